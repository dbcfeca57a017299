//! The hypothetical world: knowledge graph, relation dependencies and ground-truth
//! generative distributions.

pub mod deps;
pub mod graph;
mod io;
pub mod model;
pub mod synth;

pub use deps::{assign_dependencies, DependencyMap};
pub use graph::{
    enforce_one_to_one, filter_relations, ingest_triples, Denylist, Ingested, KnowledgeGraph,
    Triple,
};
pub use io::{read_world, world_header, write_world, WORLD_FORMAT_VERSION};
pub use model::{build_generative_model, WorldModel, DEFAULT_FLOOR};
pub use synth::{synth_graph, CooccurProfile, SynthParams};
