use serde::{Deserialize, Serialize};

use crate::ids::{EntityId, FactKey, RelationId};

/// An atomic claim `s r o`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Atom {
    pub subject: EntityId,
    pub relation: RelationId,
    pub object: EntityId,
}

impl Atom {
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

/// The body of a truth claim. Connectives apply to atoms only.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Claim {
    Atom(Atom),
    Not(Atom),
    And(Atom, Atom),
    Or(Atom, Atom),
}

impl Claim {
    pub fn atoms(&self) -> Vec<&Atom> {
        match self {
            Claim::Atom(a) | Claim::Not(a) => vec![a],
            Claim::And(a, b) | Claim::Or(a, b) => vec![a, b],
        }
    }

    pub fn is_connective(&self) -> bool {
        !matches!(self, Claim::Atom(_))
    }
}

/// A corpus sentence: a bare atom, or a claim labeled true or false.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Sentence {
    Atomic(Atom),
    Truth { claim: Claim, label: bool },
}

impl Sentence {
    pub fn truth(claim: Claim, label: bool) -> Self {
        Sentence::Truth { claim, label }
    }

    pub fn atoms(&self) -> Vec<&Atom> {
        match self {
            Sentence::Atomic(a) => vec![a],
            Sentence::Truth { claim, .. } => claim.atoms(),
        }
    }

    pub fn mentions(&self, subject: &EntityId) -> bool {
        self.atoms().iter().any(|a| &a.subject == subject)
    }

    /// True/false-labeled atom without a connective.
    pub fn is_tf(&self) -> bool {
        matches!(
            self,
            Sentence::Truth {
                claim: Claim::Atom(_),
                ..
            }
        )
    }

    pub fn is_connective(&self) -> bool {
        matches!(self, Sentence::Truth { claim, .. } if claim.is_connective())
    }
}

/// A probe prompt: `s r` asks for an object, `"..." is` asks for a truth value.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Prompt {
    NextObject(FactKey),
    Truth(Claim),
}

/// Up to ten sentences about one topic subject.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Document {
    pub topic: EntityId,
    pub sentences: Vec<Sentence>,
}

pub const MAX_DOCUMENT_SENTENCES: usize = 10;

impl Document {
    pub fn is_on_topic(&self) -> bool {
        self.sentences.iter().all(|s| s.mentions(&self.topic))
    }

    /// The subject mentioned by every sentence, preferring the first sentence's first atom.
    pub fn infer_topic(sentences: &[Sentence]) -> Option<EntityId> {
        let first = sentences.first()?;
        first
            .atoms()
            .into_iter()
            .map(|a| &a.subject)
            .find(|s| sentences.iter().all(|x| x.mentions(s)))
            .cloned()
    }
}
