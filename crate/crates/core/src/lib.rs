//! Collapsed variational inference for the hierarchical Dirichlet process
//! topic model.
//!
//! [`pcsvb0`] holds the word-at-a-time stochastic trainer. [`baselines`]
//! holds batch collapsed inference for the HDP and stochastic collapsed
//! inference for fixed-K LDA. [`eval`] scores held-out perplexity and drives
//! the comparison between the three.
//!
//! Held-out evaluation fans out over documents with rayon when the default
//! `parallel` feature is enabled; the reduction order is fixed, so results
//! are identical either way.

pub mod baselines;
pub mod cli;
pub mod corpus;
pub mod counts;
pub mod error;
pub mod eval;
pub mod hdp_state;
pub mod model;
pub mod numerics;
pub mod pcsvb0;
pub mod snapshot;
pub mod synthetic;

pub use corpus::{Corpus, CorpusFormat, Document, HeldOutDocument, Vocabulary};
pub use error::{Error, Result};
pub use hdp_state::{DocState, GlobalState};
pub use model::TopicModel;
pub use pcsvb0::{Pcsvb0, TrainerConfig};
