//! Synthetic knowledge graphs with planted relation couplings.

use std::collections::BTreeSet;

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::WorldError;
use crate::ids::{EntityId, RelationId};
use crate::seeding::master_rng;
use crate::world::graph::{KnowledgeGraph, Triple};

const RELATION_NAMES: &[&str] = &[
    "educated at",
    "occupation",
    "place of birth",
    "country of citizenship",
    "position played",
    "member of sports team",
    "sport",
    "located in time zone",
    "instance of",
    "country",
    "employer",
    "genre",
    "record label",
    "religion",
    "native language",
    "field of work",
];

const SYLLABLES: &[&str] = &[
    "ka", "lo", "mir", "ta", "ven", "sa", "ri", "dor", "el", "bru", "na", "quil", "tes", "fa",
    "gor", "hal", "im", "jor", "kel", "lun", "mo", "nev", "pra", "ros", "sul", "tor", "ul", "vi",
    "wen", "yar", "zel", "ost",
];

/// How relations co-occur on subjects and how coupled objects depend on each other.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CooccurProfile {
    /// Independent probability that a subject carries a relation.
    pub coverage: f64,
    /// Relation index pairs `(upstream, downstream)` to couple; must be disjoint.
    pub couplings: Vec<(usize, usize)>,
    /// Probability that a subject carries both relations of a coupled pair.
    pub coupling_rate: f64,
    /// Probability that a coupled downstream object follows its upstream object.
    pub dependency_strength: f64,
}

impl CooccurProfile {
    /// Couples relations `(0,1), (2,3), ...`.
    pub fn paired(n_relations: usize) -> Self {
        Self {
            coverage: 0.3,
            couplings: (0..n_relations / 2).map(|i| (2 * i, 2 * i + 1)).collect(),
            coupling_rate: 0.45,
            dependency_strength: 0.75,
        }
    }

    pub fn uncoupled() -> Self {
        Self {
            coverage: 0.5,
            couplings: Vec::new(),
            coupling_rate: 0.0,
            dependency_strength: 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthParams {
    pub n_subjects: usize,
    pub n_relations: usize,
    /// Object pool size per relation.
    pub n_objects: usize,
    pub profile: CooccurProfile,
    pub seed: u64,
}

impl SynthParams {
    /// Parameters for a small world with roughly 1.5k facts over 10 relations.
    pub fn desk(seed: u64) -> Self {
        Self {
            n_subjects: 450,
            n_relations: 10,
            n_objects: 12,
            profile: CooccurProfile::paired(10),
            seed,
        }
    }
}

struct NameGen {
    used: BTreeSet<String>,
}

impl NameGen {
    fn word<R: Rng>(rng: &mut R) -> String {
        let n = rng.random_range(2..=3);
        (0..n)
            .map(|_| SYLLABLES[rng.random_range(0..SYLLABLES.len())])
            .collect()
    }

    fn fresh<R: Rng>(&mut self, rng: &mut R, min_words: usize, max_words: usize) -> String {
        loop {
            let words = rng.random_range(min_words..=max_words);
            let name = (0..words)
                .map(|_| Self::word(rng))
                .collect::<Vec<_>>()
                .join(" ");
            if self.used.insert(name.clone()) {
                return name;
            }
        }
    }
}

fn validate(params: &SynthParams) -> Result<(), WorldError> {
    let bad = |m: String| Err(WorldError::InvalidParameter(m));
    if params.n_relations < 2 {
        return bad(format!(
            "need at least 2 relations, got {}",
            params.n_relations
        ));
    }
    if params.n_subjects == 0 {
        return bad("need at least one subject".into());
    }
    if params.n_objects < 2 {
        return bad(format!(
            "each relation needs at least 2 objects for a distractor, got {}",
            params.n_objects
        ));
    }
    let p = &params.profile;
    for (name, v) in [
        ("coverage", p.coverage),
        ("coupling_rate", p.coupling_rate),
        ("dependency_strength", p.dependency_strength),
    ] {
        if !(0.0..=1.0).contains(&v) {
            return bad(format!("{name} {v} outside [0, 1]"));
        }
    }
    let mut used = BTreeSet::new();
    for &(u, d) in &p.couplings {
        if u >= params.n_relations || d >= params.n_relations {
            return bad(format!("coupling ({u}, {d}) names a missing relation"));
        }
        if u == d || !used.insert(u) || !used.insert(d) {
            return bad(format!("coupling ({u}, {d}) overlaps another coupling"));
        }
    }
    Ok(())
}

/// Generates a 1:1 knowledge graph with planted upstream → downstream structure.
///
/// Object popularity within a relation falls off as `1/(k+1)`. For a coupled pair, a subject
/// carries both relations with probability `coupling_rate`, and its downstream object follows a
/// fixed map of its upstream object with probability `dependency_strength`.
pub fn synth_graph(params: &SynthParams) -> Result<KnowledgeGraph, WorldError> {
    validate(params)?;
    let mut rng = master_rng(params.seed);
    let mut names = NameGen {
        used: BTreeSet::new(),
    };
    let width = params.n_relations.to_string().len().max(2);
    let relations: Vec<RelationId> = (0..params.n_relations)
        .map(|i| RelationId::new(format!("r{i:0width$}")))
        .collect();

    let obj_width = params.n_objects.to_string().len();
    let pools: Vec<Vec<EntityId>> = relations
        .iter()
        .map(|r| {
            (0..params.n_objects)
                .map(|k| EntityId::new(format!("o{}_{k:0obj_width$}", &r.as_str()[1..])))
                .collect()
        })
        .collect();
    let popularity: Vec<f64> = (0..params.n_objects)
        .map(|k| 1.0 / (k as f64 + 1.0))
        .collect();
    let pop_total: f64 = popularity.iter().sum();
    let draw_object = |rng: &mut rand_chacha::ChaCha8Rng| -> usize {
        let mut u = rng.random::<f64>() * pop_total;
        for (k, w) in popularity.iter().enumerate() {
            if u < *w {
                return k;
            }
            u -= w;
        }
        params.n_objects - 1
    };

    // downstream object index for each upstream object index, per coupling
    let maps: Vec<Vec<usize>> = params
        .profile
        .couplings
        .iter()
        .map(|_| {
            let mut perm: Vec<usize> = (0..params.n_objects).collect();
            perm.shuffle(&mut rng);
            perm
        })
        .collect();

    let subj_width = params.n_subjects.to_string().len();
    let mut triples = Vec::new();
    let mut subjects = Vec::with_capacity(params.n_subjects);
    for i in 0..params.n_subjects {
        let subject = EntityId::new(format!("s{i:0subj_width$}"));
        let mut has: Vec<bool> = (0..params.n_relations)
            .map(|_| rng.random_bool(params.profile.coverage))
            .collect();
        for &(u, d) in &params.profile.couplings {
            if rng.random_bool(params.profile.coupling_rate) {
                has[u] = true;
                has[d] = true;
            }
        }
        let mut objects: Vec<Option<usize>> = vec![None; params.n_relations];
        for (r, present) in has.iter().enumerate() {
            if *present {
                objects[r] = Some(draw_object(&mut rng));
            }
        }
        for (c, &(u, d)) in params.profile.couplings.iter().enumerate() {
            if let (Some(ou), Some(_)) = (objects[u], objects[d]) {
                if rng.random_bool(params.profile.dependency_strength) {
                    objects[d] = Some(maps[c][ou]);
                }
            }
        }
        for (r, o) in objects.iter().enumerate() {
            if let Some(k) = o {
                triples.push(Triple {
                    subject: subject.clone(),
                    relation: relations[r].clone(),
                    object: pools[r][*k].clone(),
                });
            }
        }
        subjects.push(subject);
    }

    let mut graph = KnowledgeGraph::from_triples(triples);
    for (i, r) in relations.iter().enumerate() {
        let name = RELATION_NAMES
            .get(i)
            .map(|s| s.to_string())
            .unwrap_or_else(|| format!("relation {i}"));
        graph.set_relation_name(r.clone(), &name);
    }
    for s in &subjects {
        let name = names.fresh(&mut rng, 2, 3);
        graph.set_entity_name(s.clone(), &name);
    }
    for pool in &pools {
        for o in pool {
            let name = names.fresh(&mut rng, 1, 2);
            graph.set_entity_name(o.clone(), &name);
        }
    }
    Ok(graph)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::world::deps::assign_dependencies;
    use crate::world::graph::filter_relations;

    fn small(seed: u64) -> SynthParams {
        SynthParams {
            n_subjects: 100,
            n_relations: 4,
            n_objects: 5,
            profile: CooccurProfile::paired(4),
            seed,
        }
    }

    #[test]
    fn same_seed_gives_identical_graphs() {
        let a = synth_graph(&small(1)).unwrap();
        let b = synth_graph(&small(1)).unwrap();
        assert_eq!(
            serde_json::to_vec(&a).unwrap(),
            serde_json::to_vec(&b).unwrap()
        );
        assert_ne!(a, synth_graph(&small(2)).unwrap());
    }

    #[test]
    fn cardinality_bound_and_one_to_one() {
        let g = synth_graph(&small(3)).unwrap();
        assert!(g.len() <= 400);
        let keys: BTreeSet<_> = g.triples().iter().map(|t| t.key()).collect();
        assert_eq!(keys.len(), g.len());
    }

    #[test]
    fn coupled_relations_survive_filter_and_get_paired() {
        let g = synth_graph(&small(4)).unwrap();
        let g = filter_relations(&g, 2, 10).unwrap();
        let deps = assign_dependencies(&g).unwrap();
        assert!(!deps.is_empty());
    }

    #[test]
    fn impossible_parameters_are_rejected() {
        let mut p = small(1);
        p.n_objects = 1;
        assert!(synth_graph(&p).is_err());
        let mut p = small(1);
        p.n_relations = 1;
        assert!(synth_graph(&p).is_err());
        let mut p = small(1);
        p.profile.couplings = vec![(0, 1), (1, 2)];
        assert!(synth_graph(&p).is_err());
    }

    #[test]
    fn names_are_unique() {
        let g = synth_graph(&SynthParams::desk(5)).unwrap();
        let names: BTreeSet<&String> = g.entity_names().values().collect();
        assert_eq!(names.len(), g.entity_names().len());
    }
}
