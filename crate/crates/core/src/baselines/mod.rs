//! Comparison systems: batch collapsed inference for the HDP and
//! word-at-a-time stochastic collapsed inference for fixed-K LDA.

pub mod pcvb0;
pub mod scvb0;

pub use pcvb0::{Pcvb0, Pcvb0Config, TokenPosteriorStore};
pub use scvb0::{scvb0_train, LdaState, Scvb0, ScvbConfig};
