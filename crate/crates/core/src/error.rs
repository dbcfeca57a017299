use std::io;
use std::ops::Range;

use thiserror::Error;

use crate::ids::{FactKey, RelationId};

#[derive(Debug, Error)]
pub enum WorldError {
    #[error("no usable triples")]
    NoUsableTriples,
    #[error("world too sparse: {surviving} relation(s) survive filtering, need at least 2")]
    TooSparse { surviving: usize },
    #[error("no co-occurrence structure")]
    NoCooccurrence,
    #[error("floor {0} must lie in (0.5, 1]")]
    InvalidFloor(f64),
    #[error("relation {0} has a single object; no distractor available")]
    NoDistractor(RelationId),
    #[error("invalid world parameters: {0}")]
    InvalidParameter(String),
    #[error("dependency map names relation {0} which the graph does not contain")]
    UnknownRelation(RelationId),
    #[error("unknown fact {0}")]
    UnknownFact(FactKey),
    #[error(transparent)]
    Io(#[from] io::Error),
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ParseError {
    #[error("syntax error at byte {pos}: {message}")]
    Syntax { pos: usize, message: String },
    #[error("unknown entity {text:?} at bytes {}..{}", span.start, span.end)]
    UnknownEntity { span: Range<usize>, text: String },
    #[error("unknown relation {text:?} at bytes {}..{}", span.start, span.end)]
    UnknownRelation { span: Range<usize>, text: String },
}

impl ParseError {
    /// Byte offset where the problem starts.
    pub fn position(&self) -> usize {
        match self {
            ParseError::Syntax { pos, .. } => *pos,
            ParseError::UnknownEntity { span, .. } | ParseError::UnknownRelation { span, .. } => {
                span.start
            }
        }
    }
}

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("rejection sampling for {0} failed after {1} attempts")]
    RejectionFailed(FactKey, usize),
    #[error("world has {available} facts, {requested} requested")]
    NotEnoughFacts { available: usize, requested: usize },
    #[error(transparent)]
    World(#[from] WorldError),
    #[error(transparent)]
    Io(#[from] io::Error),
}

#[derive(Debug, Error)]
pub enum OracleError {
    #[error("negative evidence weight {0}")]
    NegativeWeight(f64),
    #[error("edit weight must be positive, got {0}")]
    NonPositiveWeight(f64),
    #[error("unknown fact key {0}")]
    UnknownFactKey(FactKey),
    #[error("dependence unsupported: both operands use {0}")]
    DependenceUnsupported(FactKey),
    #[error("threshold {0} must be below 1")]
    InvalidThreshold(f64),
    #[error("stale snapshot token")]
    StaleSnapshot,
    #[error("line {line}: {source}")]
    CorpusLine {
        line: usize,
        #[source]
        source: ParseError,
    },
    #[error(transparent)]
    Parse(#[from] ParseError),
}

#[derive(Debug, Error)]
pub enum BenchError {
    #[error("oracle has no trained subjects eligible for editing")]
    NoEligibleSubjects,
    #[error("need at least two trained subjects, found {0}")]
    TooFewSubjects(usize),
    #[error(transparent)]
    Oracle(#[from] OracleError),
    #[error(transparent)]
    World(#[from] WorldError),
}

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("protocol error: {0}")]
    Protocol(String),
    #[error("probability {probability} for probe {id} outside [0, 1]")]
    ProbabilityOutOfRange { id: String, probability: f64 },
    #[error("model edit hook failed: {0}")]
    EditHook(String),
    #[error(transparent)]
    Oracle(#[from] OracleError),
    #[error(transparent)]
    Parse(#[from] ParseError),
    #[error(transparent)]
    Io(#[from] io::Error),
}

#[derive(Debug, Error)]
pub enum ArtifactError {
    #[error("{path}: {message}")]
    Format { path: String, message: String },
    #[error("{path}: unsupported {kind} format version {found} (expected {expected})")]
    Version {
        path: String,
        kind: &'static str,
        found: u32,
        expected: u32,
    },
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: io::Error,
    },
}

/// Top-level error for pipeline orchestration.
#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    World(#[from] WorldError),
    #[error(transparent)]
    Parse(#[from] ParseError),
    #[error(transparent)]
    Corpus(#[from] CorpusError),
    #[error(transparent)]
    Oracle(#[from] OracleError),
    #[error(transparent)]
    Bench(#[from] BenchError),
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error(transparent)]
    Artifact(#[from] ArtifactError),
    #[error("missing artifact {what}: {path} does not exist")]
    MissingArtifact { what: &'static str, path: String },
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Io(#[from] io::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
