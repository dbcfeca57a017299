use std::collections::{BTreeMap, HashMap};
use std::io::{BufRead, Write};

use crate::error::ArtifactError;
use crate::ids::{EntityId, RelationId};
use crate::world::graph::{sanitize_name, KnowledgeGraph};

/// Surface forms of entities and relations, with reverse lookup for parsing.
///
/// Every surface form is unique within its table. Multi-word forms are matched longest first.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Vocabulary {
    entities: BTreeMap<EntityId, String>,
    relations: BTreeMap<RelationId, String>,
    entity_lookup: HashMap<String, EntityId>,
    relation_lookup: HashMap<String, RelationId>,
    max_entity_words: usize,
    max_relation_words: usize,
}

fn word_count(s: &str) -> usize {
    s.split_whitespace().count()
}

impl Vocabulary {
    pub fn new() -> Self {
        Self::default()
    }

    /// Builds the vocabulary for every entity and relation a graph uses.
    ///
    /// Names that collide get the entity id appended.
    pub fn from_graph(graph: &KnowledgeGraph) -> Self {
        let mut v = Self::new();
        for r in graph.relations() {
            let name = graph.relation_name(&r);
            v.add_relation(r, &name);
        }
        for e in graph.entities() {
            let name = graph.entity_name(&e);
            v.add_entity(e, &name);
        }
        v
    }

    /// Registers an entity, disambiguating a clashing surface form. Returns the form used.
    pub fn add_entity(&mut self, id: EntityId, name: &str) -> String {
        if let Some(existing) = self.entities.get(&id) {
            return existing.clone();
        }
        let mut surface = sanitize_name(name);
        if surface.is_empty() {
            surface = sanitize_name(id.as_str());
        }
        if self.entity_lookup.contains_key(&surface) {
            surface = format!("{surface} {}", sanitize_name(id.as_str()));
        }
        let mut n = 2;
        let base = surface.clone();
        while self.entity_lookup.contains_key(&surface) {
            surface = format!("{base} {n}");
            n += 1;
        }
        self.max_entity_words = self.max_entity_words.max(word_count(&surface));
        self.entity_lookup.insert(surface.clone(), id.clone());
        self.entities.insert(id, surface.clone());
        surface
    }

    pub fn add_relation(&mut self, id: RelationId, name: &str) -> String {
        if let Some(existing) = self.relations.get(&id) {
            return existing.clone();
        }
        let mut surface = sanitize_name(name);
        if surface.is_empty() || self.relation_lookup.contains_key(&surface) {
            surface = format!("{surface} {}", sanitize_name(id.as_str()))
                .trim()
                .to_string();
        }
        self.max_relation_words = self.max_relation_words.max(word_count(&surface));
        self.relation_lookup.insert(surface.clone(), id.clone());
        self.relations.insert(id, surface.clone());
        surface
    }

    pub fn entity_surface<'a>(&'a self, id: &'a EntityId) -> &'a str {
        self.entities.get(id).map_or(id.as_str(), String::as_str)
    }

    pub fn relation_surface<'a>(&'a self, id: &'a RelationId) -> &'a str {
        self.relations.get(id).map_or(id.as_str(), String::as_str)
    }

    pub fn entity(&self, surface: &str) -> Option<&EntityId> {
        self.entity_lookup.get(surface)
    }

    pub fn relation(&self, surface: &str) -> Option<&RelationId> {
        self.relation_lookup.get(surface)
    }

    pub fn max_entity_words(&self) -> usize {
        self.max_entity_words
    }

    pub fn max_relation_words(&self) -> usize {
        self.max_relation_words
    }

    pub fn entities(&self) -> &BTreeMap<EntityId, String> {
        &self.entities
    }

    pub fn relations(&self) -> &BTreeMap<RelationId, String> {
        &self.relations
    }

    /// Writes `[entities]` and `[relations]` sections of `id \t surface` lines.
    pub fn write_to<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "[entities]")?;
        for (id, s) in &self.entities {
            writeln!(w, "{id}\t{s}")?;
        }
        writeln!(w, "[relations]")?;
        for (id, s) in &self.relations {
            writeln!(w, "{id}\t{s}")?;
        }
        Ok(())
    }

    /// Reads the format produced by [`Vocabulary::write_to`]; `#` lines are skipped.
    pub fn read_from<R: BufRead>(reader: R, path: &str) -> Result<Self, ArtifactError> {
        #[derive(PartialEq)]
        enum Section {
            None,
            Entities,
            Relations,
        }
        let fmt = |message: String| ArtifactError::Format {
            path: path.to_string(),
            message,
        };
        let mut v = Self::new();
        let mut section = Section::None;
        for (i, line) in reader.lines().enumerate() {
            let line = line.map_err(|source| ArtifactError::Io {
                path: path.to_string(),
                source,
            })?;
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            match line.as_str() {
                "[entities]" => section = Section::Entities,
                "[relations]" => section = Section::Relations,
                _ => {
                    let (id, surface) = line
                        .split_once('\t')
                        .ok_or_else(|| fmt(format!("line {}: expected id<TAB>surface", i + 1)))?;
                    let stored = match section {
                        Section::Entities => v.add_entity(EntityId::from(id), surface),
                        Section::Relations => v.add_relation(RelationId::from(id), surface),
                        Section::None => {
                            return Err(fmt(format!("line {}: entry before any section", i + 1)))
                        }
                    };
                    if stored != surface {
                        return Err(fmt(format!(
                            "line {}: surface {surface:?} is not canonical or not unique",
                            i + 1
                        )));
                    }
                }
            }
        }
        Ok(v)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn clashing_names_are_disambiguated() {
        let mut v = Vocabulary::new();
        assert_eq!(v.add_entity("Q1".into(), "Paris"), "paris");
        assert_eq!(v.add_entity("Q2".into(), "paris"), "paris q2");
        assert_eq!(v.entity("paris q2"), Some(&EntityId::from("Q2")));
    }

    #[test]
    fn file_round_trip() {
        let mut v = Vocabulary::new();
        v.add_entity("Q1".into(), "grace stone coates");
        v.add_entity("Q2".into(), "scions");
        v.add_relation("P69".into(), "educated at");
        let mut buf = Vec::new();
        v.write_to(&mut buf).unwrap();
        let back = Vocabulary::read_from(buf.as_slice(), "mem").unwrap();
        assert_eq!(back, v);
        assert_eq!(back.max_entity_words(), 3);
    }
}
