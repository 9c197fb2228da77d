//! Ideal-point vote models for a small court, grounded in topic mixtures of
//! merits and amicus briefs, with a random-utility prior over brief content.
//!
//! The pipeline has two estimation stages: [`topics`] fits LDA over all
//! documents, then [`sampler`] estimates justice and case parameters with the
//! mixtures held fixed. [`predict`] and [`counterfactual`] consume the fits.

pub mod config;
pub mod corpus;
pub mod counterfactual;
pub mod error;
pub mod ipmodel;
pub mod math;
pub mod predict;
pub mod rng;
pub mod sampler;
pub mod topics;

pub use corpus::{Case, Corpus, Document, Side};
pub use error::{Error, Result};
pub use ipmodel::{CaseParams, Hyperparams, JusticeParams, ModelKind};
pub use sampler::{FitResult, SamplerConfig};
pub use topics::{LdaConfig, Mixtures, TopicModel};
