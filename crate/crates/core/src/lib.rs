pub mod artifact;
pub mod bench;
pub mod config;
pub mod corpus;
pub mod dist;
pub mod error;
pub mod eval;
pub mod ids;
pub mod language;
pub mod oracle;
pub mod pipeline;
pub mod seeding;
pub mod world;
