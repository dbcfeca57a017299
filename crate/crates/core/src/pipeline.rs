//! Stage functions shared by the command line, the bindings and the tests.

use crate::bench::{gen_cases, BenchConfig, TestCase};
use crate::corpus::{generate_corpus, Corpus, CorpusConfig};
use crate::error::{Error, OracleError, WorldError};
use crate::language::{render_document, Vocabulary};
use crate::oracle::{observe_corpus, observe_corpus_text, OracleState};
use crate::world::{
    assign_dependencies, build_generative_model, enforce_one_to_one, filter_relations, synth_graph,
    DependencyMap, KnowledgeGraph, SynthParams, WorldModel, DEFAULT_FLOOR,
};

pub const DEFAULT_MIN_COOCCUR: usize = 1000;
/// Threshold used for synthetic graphs, which are far smaller than an encyclopedic one.
pub const SYNTH_MIN_COOCCUR: usize = 10;
pub const DEFAULT_TOP_K: usize = 10;
pub const DESK_FACTS: usize = 1000;

#[derive(Debug, Clone, PartialEq)]
pub struct WorldSettings {
    pub min_cooccur: usize,
    pub top_k: usize,
    pub floor: f64,
    pub seed: u64,
}

impl WorldSettings {
    pub fn new(seed: u64) -> Self {
        Self {
            min_cooccur: DEFAULT_MIN_COOCCUR,
            top_k: DEFAULT_TOP_K,
            floor: DEFAULT_FLOOR,
            seed,
        }
    }

    pub fn synthetic(seed: u64) -> Self {
        Self {
            min_cooccur: SYNTH_MIN_COOCCUR,
            ..Self::new(seed)
        }
    }
}

/// Filter relations, enforce one object per fact, pair relations and build distributions.
pub fn world_from_graph(
    graph: &KnowledgeGraph,
    s: &WorldSettings,
) -> Result<WorldModel, WorldError> {
    let g = filter_relations(graph, s.min_cooccur, s.top_k)?;
    let g = enforce_one_to_one(&g, s.seed);
    let deps = assign_dependencies(&g)?;
    build_generative_model(&g, &deps, s.floor, s.seed)
}

/// The default synthetic world used for desk-scale runs.
pub fn desk_world(seed: u64) -> Result<WorldModel, WorldError> {
    let g = synth_graph(&SynthParams::desk(seed))?;
    world_from_graph(&g, &WorldSettings::synthetic(seed))
}

/// Fits an oracle on the rendered text of a corpus, exactly as a reader of the emitted file
/// would.
pub fn fit_oracle(
    deps: &DependencyMap,
    corpus: &Corpus,
    vocab: &Vocabulary,
) -> Result<OracleState, OracleError> {
    let mut text = String::new();
    for d in &corpus.documents {
        text.push_str(&render_document(d, vocab));
        text.push('\n');
    }
    fit_oracle_text(deps, &text, vocab)
}

pub fn fit_oracle_text(
    deps: &DependencyMap,
    text: &str,
    vocab: &Vocabulary,
) -> Result<OracleState, OracleError> {
    let mut state = OracleState::new(deps.clone());
    observe_corpus_text(&mut state, text.as_bytes(), vocab)?;
    Ok(state)
}

/// Fits directly on in-memory sentences, skipping the text round trip.
pub fn fit_oracle_documents(
    deps: &DependencyMap,
    corpus: &Corpus,
) -> Result<OracleState, OracleError> {
    let mut state = OracleState::new(deps.clone());
    observe_corpus(
        &mut state,
        corpus.documents.iter().flat_map(|d| &d.sentences),
    )?;
    Ok(state)
}

/// Everything an in-memory desk run produces.
#[derive(Debug, Clone)]
pub struct DeskRun {
    pub world: WorldModel,
    pub vocab: Vocabulary,
    pub corpus: Corpus,
    pub oracle: OracleState,
    pub cases: Vec<TestCase>,
}

pub fn desk_run(seed: u64, facts: usize, n_cases: usize) -> Result<DeskRun, Error> {
    let world = desk_world(seed)?;
    let vocab = Vocabulary::from_graph(&world.graph);
    let corpus = generate_corpus(&world, &vocab, &CorpusConfig::new(facts, seed))?;
    let mut oracle = fit_oracle(&world.deps, &corpus, &vocab)?;
    let cases = gen_cases(&world, &mut oracle, &BenchConfig::new(n_cases, seed))?;
    Ok(DeskRun {
        world,
        vocab,
        corpus,
        oracle,
        cases,
    })
}
