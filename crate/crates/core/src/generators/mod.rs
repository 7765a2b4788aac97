//! Seeded problem generators: single-decision 1-ID(n) diagrams, multistage
//! mazes, and reproducible corpora of either.

mod corpus;
pub mod fixtures;
pub mod maze;
mod oneid;

pub use corpus::{generate_corpus, Corpus, CorpusEntry, CorpusTemplate, Manifest, ProblemSpec};
pub use maze::{generate_maze, Grid, MazeSpec};
pub use oneid::{expected_internal_nodes, generate_1id, OneIdSpec};
