use std::collections::BTreeSet;
use std::fmt;
use std::io::BufRead;

use serde::{Deserialize, Serialize};

use crate::error::{ArtifactError, OracleError};
use crate::ids::{EntityId, FactKey, RelationId};
use crate::language::{parse_document, render, whitespace_tokens, Document, Sentence, Vocabulary};

/// Corpus statistics. Tokens are whitespace tokens, counting each sentence-final period.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CorpusStats {
    pub true_atomic_facts: usize,
    pub atomic_sentences: usize,
    pub tf_sentences: usize,
    pub connective_sentences: usize,
    pub total_sentences: usize,
    pub documents: usize,
    pub tokens: usize,
    pub subjects: usize,
    pub relations: usize,
    pub objects: usize,
}

#[derive(Default)]
struct Tally {
    stats: CorpusStats,
    facts: BTreeSet<FactKey>,
    subjects: BTreeSet<EntityId>,
    relations: BTreeSet<RelationId>,
    objects: BTreeSet<EntityId>,
}

impl Tally {
    fn sentence(&mut self, s: &Sentence) {
        let st = &mut self.stats;
        st.total_sentences += 1;
        match s {
            Sentence::Atomic(a) => {
                st.atomic_sentences += 1;
                self.facts.insert(a.key());
            }
            s if s.is_tf() => st.tf_sentences += 1,
            _ => st.connective_sentences += 1,
        }
        for a in s.atoms() {
            self.relations.insert(a.relation.clone());
            self.objects.insert(a.object.clone());
        }
    }

    fn finish(mut self) -> CorpusStats {
        self.stats.true_atomic_facts = self.facts.len();
        self.stats.subjects = self.subjects.len();
        self.stats.relations = self.relations.len();
        self.stats.objects = self.objects.len();
        self.stats
    }
}

const FIELDS: [&str; 10] = [
    "true_atomic_facts",
    "atomic_sentences",
    "tf_sentences",
    "connective_sentences",
    "total_sentences",
    "documents",
    "tokens",
    "subjects",
    "relations",
    "objects",
];

impl CorpusStats {
    /// Counts over in-memory documents, rendering each sentence for the token count.
    pub fn tally(documents: &[Document], vocab: &Vocabulary) -> Self {
        let mut t = Tally::default();
        for d in documents {
            t.stats.documents += 1;
            t.subjects.insert(d.topic.clone());
            for s in &d.sentences {
                t.stats.tokens += whitespace_tokens(&render(s, vocab)) + 1;
                t.sentence(s);
            }
        }
        t.finish()
    }

    fn values(&self) -> [usize; 10] {
        [
            self.true_atomic_facts,
            self.atomic_sentences,
            self.tf_sentences,
            self.connective_sentences,
            self.total_sentences,
            self.documents,
            self.tokens,
            self.subjects,
            self.relations,
            self.objects,
        ]
    }

    /// Parses `key=value` lines; `#` lines are skipped and every field is required.
    pub fn from_key_values<R: BufRead>(reader: R, path: &str) -> Result<Self, ArtifactError> {
        let fmt = |message: String| ArtifactError::Format {
            path: path.to_string(),
            message,
        };
        let mut vals: [Option<usize>; 10] = [None; 10];
        for line in reader.lines() {
            let line = line.map_err(|source| ArtifactError::Io {
                path: path.to_string(),
                source,
            })?;
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| fmt(format!("expected key=value, got {line:?}")))?;
            let idx = FIELDS
                .iter()
                .position(|f| *f == k)
                .ok_or_else(|| fmt(format!("unknown statistic {k:?}")))?;
            vals[idx] = Some(v.parse().map_err(|_| fmt(format!("bad count {v:?}")))?);
        }
        let mut get = FIELDS
            .iter()
            .zip(vals)
            .map(|(f, v)| v.ok_or_else(|| fmt(format!("missing statistic {f:?}"))));
        Ok(Self {
            true_atomic_facts: get.next().unwrap()?,
            atomic_sentences: get.next().unwrap()?,
            tf_sentences: get.next().unwrap()?,
            connective_sentences: get.next().unwrap()?,
            total_sentences: get.next().unwrap()?,
            documents: get.next().unwrap()?,
            tokens: get.next().unwrap()?,
            subjects: get.next().unwrap()?,
            relations: get.next().unwrap()?,
            objects: get.next().unwrap()?,
        })
    }
}

impl fmt::Display for CorpusStats {
    /// One `key=value` line per statistic.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (k, v) in FIELDS.iter().zip(self.values()) {
            writeln!(f, "{k}={v}")?;
        }
        Ok(())
    }
}

/// Recounts statistics from corpus text by parsing every document line.
pub fn recount_corpus<R: BufRead>(
    reader: R,
    vocab: &Vocabulary,
) -> Result<CorpusStats, OracleError> {
    let mut t = Tally::default();
    for (i, line) in reader.lines().enumerate() {
        let line = line.map_err(|e| OracleError::CorpusLine {
            line: i + 1,
            source: crate::error::ParseError::Syntax {
                pos: 0,
                message: e.to_string(),
            },
        })?;
        if line.trim().is_empty() || line.starts_with('#') {
            continue;
        }
        let sentences = parse_document(&line, vocab).map_err(|source| OracleError::CorpusLine {
            line: i + 1,
            source,
        })?;
        t.stats.documents += 1;
        t.stats.tokens += whitespace_tokens(&line);
        if let Some(topic) = Document::infer_topic(&sentences) {
            t.subjects.insert(topic);
        }
        for s in &sentences {
            t.sentence(s);
        }
    }
    Ok(t.finish())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn key_value_round_trip() {
        let s = CorpusStats {
            true_atomic_facts: 1,
            atomic_sentences: 10,
            tf_sentences: 10,
            connective_sentences: 20,
            total_sentences: 40,
            documents: 4,
            tokens: 321,
            subjects: 1,
            relations: 1,
            objects: 2,
        };
        let text = format!("# header\n{s}");
        assert_eq!(
            CorpusStats::from_key_values(text.as_bytes(), "mem").unwrap(),
            s
        );
        assert!(CorpusStats::from_key_values("tokens=3\n".as_bytes(), "mem").is_err());
    }
}
