use std::collections::{BTreeMap, BTreeSet};
use std::io::BufRead;

use log::warn;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::WorldError;
use crate::ids::{EntityId, FactKey, RelationId};
use crate::seeding::master_rng;

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Triple {
    pub subject: EntityId,
    pub relation: RelationId,
    pub object: EntityId,
}

impl Triple {
    pub fn new(
        subject: impl Into<EntityId>,
        relation: impl Into<RelationId>,
        object: impl Into<EntityId>,
    ) -> Self {
        Self {
            subject: subject.into(),
            relation: relation.into(),
            object: object.into(),
        }
    }

    pub fn key(&self) -> FactKey {
        FactKey::new(self.subject.clone(), self.relation.clone())
    }
}

/// Relations and entities removed during ingestion.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Denylist {
    pub relations: BTreeSet<RelationId>,
    pub entities: BTreeSet<EntityId>,
}

impl Default for Denylist {
    /// Given name and administrative-territory relations; taxon and human class entities.
    fn default() -> Self {
        Self {
            relations: ["P735", "P131"].into_iter().map(RelationId::from).collect(),
            entities: ["Q16521", "Q5"].into_iter().map(EntityId::from).collect(),
        }
    }
}

impl Denylist {
    pub fn empty() -> Self {
        Self {
            relations: BTreeSet::new(),
            entities: BTreeSet::new(),
        }
    }

    fn admits(&self, t: &Triple) -> bool {
        !self.relations.contains(&t.relation)
            && !self.entities.contains(&t.subject)
            && !self.entities.contains(&t.object)
    }
}

/// A set of triples plus display names for entities and relations.
///
/// Triples are kept sorted and deduplicated. Names are optional; an entity
/// without a registered name displays as its id.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct KnowledgeGraph {
    triples: Vec<Triple>,
    entity_names: BTreeMap<EntityId, String>,
    relation_names: BTreeMap<RelationId, String>,
}

impl KnowledgeGraph {
    pub fn from_triples(triples: impl IntoIterator<Item = Triple>) -> Self {
        let mut triples: Vec<Triple> = triples.into_iter().collect();
        triples.sort();
        triples.dedup();
        Self {
            triples,
            entity_names: BTreeMap::new(),
            relation_names: BTreeMap::new(),
        }
    }

    pub fn triples(&self) -> &[Triple] {
        &self.triples
    }

    pub fn len(&self) -> usize {
        self.triples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.triples.is_empty()
    }

    /// Relations in use, sorted by id.
    pub fn relations(&self) -> Vec<RelationId> {
        let set: BTreeSet<&RelationId> = self.triples.iter().map(|t| &t.relation).collect();
        set.into_iter().cloned().collect()
    }

    /// Subjects and objects in use, sorted by id.
    pub fn entities(&self) -> BTreeSet<EntityId> {
        self.triples
            .iter()
            .flat_map(|t| [t.subject.clone(), t.object.clone()])
            .collect()
    }

    pub fn subjects(&self) -> Vec<EntityId> {
        let set: BTreeSet<&EntityId> = self.triples.iter().map(|t| &t.subject).collect();
        set.into_iter().cloned().collect()
    }

    pub fn entity_name(&self, id: &EntityId) -> String {
        self.entity_names
            .get(id)
            .cloned()
            .unwrap_or_else(|| sanitize_name(id.as_str()))
    }

    pub fn relation_name(&self, id: &RelationId) -> String {
        self.relation_names
            .get(id)
            .cloned()
            .unwrap_or_else(|| sanitize_name(id.as_str()))
    }

    pub fn set_entity_name(&mut self, id: EntityId, name: &str) {
        self.entity_names.insert(id, sanitize_name(name));
    }

    pub fn set_relation_name(&mut self, id: RelationId, name: &str) {
        self.relation_names.insert(id, sanitize_name(name));
    }

    pub fn entity_names(&self) -> &BTreeMap<EntityId, String> {
        &self.entity_names
    }

    pub fn relation_names(&self) -> &BTreeMap<RelationId, String> {
        &self.relation_names
    }

    /// Reads `id \t name [\t alias ...]` rows; ids starting with `P` name relations.
    pub fn load_names<R: BufRead>(&mut self, reader: R) -> Result<usize, WorldError> {
        let mut loaded = 0;
        for line in reader.lines() {
            let line = line?;
            let mut fields = line.split('\t');
            let (Some(id), Some(name)) = (fields.next(), fields.next()) else {
                continue;
            };
            let (id, name) = (id.trim(), name.trim());
            if id.is_empty() || name.is_empty() {
                continue;
            }
            if id.starts_with('P') {
                self.set_relation_name(RelationId::from(id), name);
            } else {
                self.set_entity_name(EntityId::from(id), name);
            }
            loaded += 1;
        }
        Ok(loaded)
    }

    /// Keeps only triples whose relation is in `keep`, carrying names over.
    pub fn retain_relations(&self, keep: &BTreeSet<RelationId>) -> Self {
        Self {
            triples: self
                .triples
                .iter()
                .filter(|t| keep.contains(&t.relation))
                .cloned()
                .collect(),
            entity_names: self.entity_names.clone(),
            relation_names: self.relation_names.clone(),
        }
    }

    fn with_triples(&self, triples: Vec<Triple>) -> Self {
        let mut g = Self::from_triples(triples);
        g.entity_names = self.entity_names.clone();
        g.relation_names = self.relation_names.clone();
        g
    }

    /// Subjects that carry each relation.
    pub fn subjects_by_relation(&self) -> BTreeMap<RelationId, BTreeSet<EntityId>> {
        let mut out: BTreeMap<RelationId, BTreeSet<EntityId>> = BTreeMap::new();
        for t in &self.triples {
            out.entry(t.relation.clone())
                .or_default()
                .insert(t.subject.clone());
        }
        out
    }

    /// Number of distinct subjects carrying both relations, for every ordered pair `r != r'`.
    pub fn cooccurrence_counts(&self) -> BTreeMap<(RelationId, RelationId), usize> {
        let mut per_subject: BTreeMap<&EntityId, BTreeSet<&RelationId>> = BTreeMap::new();
        for t in &self.triples {
            per_subject
                .entry(&t.subject)
                .or_default()
                .insert(&t.relation);
        }
        let mut counts = BTreeMap::new();
        for rels in per_subject.values() {
            for a in rels {
                for b in rels {
                    if a != b {
                        *counts.entry(((*a).clone(), (*b).clone())).or_insert(0) += 1;
                    }
                }
            }
        }
        counts
    }
}

/// Lowercases, strips double quotes and collapses whitespace so names tokenize cleanly.
pub fn sanitize_name(name: &str) -> String {
    name.to_lowercase()
        .replace('"', "")
        .split_whitespace()
        .filter(|tok| *tok != "." && !tok.starts_with('#'))
        .collect::<Vec<_>>()
        .join(" ")
}

/// Outcome of reading a triple file.
#[derive(Debug, Clone)]
pub struct Ingested {
    pub graph: KnowledgeGraph,
    pub rows_read: usize,
    pub rejected: usize,
    pub denied: usize,
}

fn parse_row(line: &str) -> Option<Triple> {
    let sep = if line.contains('\t') { '\t' } else { ',' };
    let fields: Vec<&str> = line.split(sep).map(str::trim).collect();
    match fields.as_slice() {
        [s, r, o] if !s.is_empty() && !r.is_empty() && !o.is_empty() => {
            Some(Triple::new(*s, *r, *o))
        }
        _ => None,
    }
}

/// Reads at most `limit` tab- or comma-separated `subject relation object` rows.
///
/// Malformed rows are skipped with a warning. Blank lines and `#` comments are not rows.
/// An input with no rows yields an empty graph; rows that are all unusable are an error.
pub fn ingest_triples<R: BufRead>(
    reader: R,
    limit: Option<usize>,
    denylist: &Denylist,
) -> Result<Ingested, WorldError> {
    let mut triples = Vec::new();
    let (mut rows_read, mut rejected, mut denied) = (0, 0, 0);
    for (lineno, line) in reader.lines().enumerate() {
        let line = line?;
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        if limit.is_some_and(|l| rows_read >= l) {
            break;
        }
        rows_read += 1;
        match parse_row(trimmed) {
            Some(t) if denylist.admits(&t) => triples.push(t),
            Some(_) => denied += 1,
            None => {
                warn!(
                    "line {}: malformed triple row rejected: {trimmed:?}",
                    lineno + 1
                );
                rejected += 1;
            }
        }
    }
    if rows_read > 0 && triples.is_empty() {
        return Err(WorldError::NoUsableTriples);
    }
    Ok(Ingested {
        graph: KnowledgeGraph::from_triples(triples),
        rows_read,
        rejected,
        denied,
    })
}

/// Per-relation co-occurrence score: the largest number of subjects it shares with any single
/// other relation.
pub fn relation_scores(graph: &KnowledgeGraph) -> BTreeMap<RelationId, usize> {
    let mut scores: BTreeMap<RelationId, usize> =
        graph.relations().into_iter().map(|r| (r, 0)).collect();
    for ((a, _), n) in graph.cooccurrence_counts() {
        let e = scores.entry(a).or_insert(0);
        *e = (*e).max(n);
    }
    scores
}

/// Keeps relations whose co-occurrence score reaches `min_cooccur`, then the `top_k` best of
/// those (score descending, id ascending).
pub fn filter_relations(
    graph: &KnowledgeGraph,
    min_cooccur: usize,
    top_k: usize,
) -> Result<KnowledgeGraph, WorldError> {
    if graph.is_empty() {
        return Err(WorldError::NoUsableTriples);
    }
    let mut ranked: Vec<(RelationId, usize)> = relation_scores(graph)
        .into_iter()
        .filter(|(_, n)| *n >= min_cooccur.max(1))
        .collect();
    ranked.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
    ranked.truncate(top_k);
    if ranked.len() < 2 {
        return Err(WorldError::TooSparse {
            surviving: ranked.len(),
        });
    }
    let keep: BTreeSet<RelationId> = ranked.into_iter().map(|(r, _)| r).collect();
    Ok(graph.retain_relations(&keep))
}

/// Keeps one object per `(subject, relation)`, chosen by a seeded RNG.
pub fn enforce_one_to_one(graph: &KnowledgeGraph, seed: u64) -> KnowledgeGraph {
    let mut rng = master_rng(seed);
    let mut kept = Vec::with_capacity(graph.len());
    let triples = graph.triples();
    let mut start = 0;
    while start < triples.len() {
        let key = (&triples[start].subject, &triples[start].relation);
        let end = start
            + triples[start..]
                .iter()
                .take_while(|t| (&t.subject, &t.relation) == key)
                .count();
        let pick = if end - start == 1 {
            start
        } else {
            start + rng.random_range(0..end - start)
        };
        kept.push(triples[pick].clone());
        start = end;
    }
    graph.with_triples(kept)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Cursor;

    fn graph(rows: &[(&str, &str, &str)]) -> KnowledgeGraph {
        KnowledgeGraph::from_triples(rows.iter().map(|(s, r, o)| Triple::new(*s, *r, *o)))
    }

    #[test]
    fn empty_stream_gives_empty_graph() {
        let out = ingest_triples(Cursor::new(""), None, &Denylist::default()).unwrap();
        assert!(out.graph.is_empty());
        assert_eq!(out.rows_read, 0);
    }

    #[test]
    fn denylisted_relation_is_dropped() {
        let text = "Q1\tP69\tQ10\nQ1\tP735\tQ11\nQ2\tP69\tQ12\nQ2\tP106\tQ13\nQ3\tP106\tQ14\nQ3\tP69\tQ15\n";
        let out = ingest_triples(Cursor::new(text), None, &Denylist::default()).unwrap();
        assert_eq!(out.graph.len(), 5);
        assert_eq!(out.denied, 1);
    }

    #[test]
    fn denylisted_entities_are_dropped_in_any_position() {
        let text = "Q1\tP31\tQ5\nQ16521\tP31\tQ2\nQ1\tP69\tQ3\n";
        let out = ingest_triples(Cursor::new(text), None, &Denylist::default()).unwrap();
        assert_eq!(out.graph.triples(), &[Triple::new("Q1", "P69", "Q3")]);
    }

    #[test]
    fn limit_reads_only_leading_rows() {
        let text: String = (0..10).map(|i| format!("s{i}\tr\to{i}\n")).collect();
        let out = ingest_triples(Cursor::new(text), Some(4), &Denylist::empty()).unwrap();
        assert_eq!(out.rows_read, 4);
        assert_eq!(out.graph.subjects().len(), 4);
        assert!(out.graph.subjects().contains(&EntityId::from("s3")));
        assert!(!out.graph.subjects().contains(&EntityId::from("s4")));
    }

    #[test]
    fn malformed_rows_are_skipped_not_fatal() {
        let text = "a,r,b\nonly-two\tfields\n\nc,r,d\n,r,x\n";
        let out = ingest_triples(Cursor::new(text), None, &Denylist::empty()).unwrap();
        assert_eq!(out.graph.len(), 2);
        assert_eq!(out.rejected, 2);
    }

    #[test]
    fn all_rows_unusable_is_an_error() {
        let err = ingest_triples(Cursor::new("x\ny\n"), None, &Denylist::empty()).unwrap_err();
        assert_eq!(err.to_string(), "no usable triples");
    }

    #[test]
    fn relation_that_never_cooccurs_is_removed() {
        let g = graph(&[
            ("s1", "a", "x"),
            ("s1", "b", "y"),
            ("s2", "a", "x"),
            ("s2", "b", "z"),
            ("s3", "lonely", "w"),
        ]);
        let f = filter_relations(&g, 1, 10).unwrap();
        assert_eq!(
            f.relations(),
            vec![RelationId::from("a"), RelationId::from("b")]
        );
    }

    #[test]
    fn top_k_keeps_highest_scoring_relations() {
        // r00..r11 each co-occur with a hub relation on (i + 1) subjects.
        let mut rows = Vec::new();
        for i in 0..12usize {
            for j in 0..=i {
                let s = format!("s{i}_{j}");
                rows.push(Triple::new(s.as_str(), "hub", "h"));
                rows.push(Triple::new(s.as_str(), format!("r{i:02}").as_str(), "o"));
            }
        }
        let g = KnowledgeGraph::from_triples(rows);
        let f = filter_relations(&g, 1, 10).unwrap();
        let rels = f.relations();
        assert_eq!(rels.len(), 10);
        assert!(rels.contains(&RelationId::from("hub")));
        assert!(!rels.contains(&RelationId::from("r00")));
        assert!(!rels.contains(&RelationId::from("r01")));
        assert!(!rels.contains(&RelationId::from("r02")));
    }

    #[test]
    fn too_few_survivors_is_an_error() {
        let g = graph(&[("s1", "a", "x"), ("s2", "b", "y")]);
        assert!(matches!(
            filter_relations(&g, 1, 10),
            Err(WorldError::TooSparse { surviving: 0 })
        ));
    }

    #[test]
    fn brute_force_cooccurrence_matches_filter() {
        let g = graph(&[
            ("s1", "a", "x"),
            ("s1", "b", "x"),
            ("s2", "a", "x"),
            ("s2", "b", "y"),
            ("s2", "c", "y"),
            ("s3", "a", "z"),
            ("s3", "c", "z"),
            ("s4", "b", "z"),
        ]);
        // hand count: a&b {s1,s2} = 2, a&c {s2,s3} = 2, b&c {s2} = 1
        let rels = ["a", "b", "c"];
        let mut brute = BTreeMap::new();
        for r in rels {
            let mut best = 0;
            for r2 in rels {
                if r == r2 {
                    continue;
                }
                let n = g
                    .subjects()
                    .iter()
                    .filter(|s| {
                        let has = |rel: &str| {
                            g.triples()
                                .iter()
                                .any(|t| &t.subject == *s && t.relation.as_str() == rel)
                        };
                        has(r) && has(r2)
                    })
                    .count();
                best = best.max(n);
            }
            brute.insert(r, best);
        }
        assert_eq!(brute[&"a"], 2);
        assert_eq!(brute[&"b"], 2);
        assert_eq!(brute[&"c"], 2);
        let f = filter_relations(&g, 2, 10).unwrap();
        let expect: Vec<RelationId> = rels
            .iter()
            .filter(|r| brute[*r] >= 2)
            .map(|r| RelationId::from(*r))
            .collect();
        assert_eq!(f.relations(), expect);
    }

    #[test]
    fn one_to_one_leaves_single_objects_alone() {
        let g = graph(&[("s", "r", "o1")]);
        assert_eq!(enforce_one_to_one(&g, 9), g);
    }

    #[test]
    fn one_to_one_is_deterministic_per_seed() {
        let g = graph(&[("s", "r", "o1"), ("s", "r", "o2"), ("s", "r", "o3")]);
        let a = enforce_one_to_one(&g, 11);
        let b = enforce_one_to_one(&g, 11);
        assert_eq!(a.len(), 1);
        assert_eq!(a, b);
    }

    #[test]
    fn one_to_one_keeps_one_triple_per_key() {
        let rows: Vec<Triple> = (0..5)
            .flat_map(|i| (0..3).map(move |j| Triple::new(format!("s{i}"), "r", format!("o{j}"))))
            .collect();
        let g = enforce_one_to_one(&KnowledgeGraph::from_triples(rows), 1);
        assert_eq!(g.len(), 5);
        let keys: BTreeSet<FactKey> = g.triples().iter().map(Triple::key).collect();
        assert_eq!(keys.len(), g.len());
    }

    #[test]
    fn sanitized_names_drop_quotes_and_lone_periods() {
        assert_eq!(
            sanitize_name("  Grace \"Stone\"  Coates . "),
            "grace stone coates"
        );
    }
}
