//! Recovery of binary labels from noisy XOR queries.
//!
//! The crate covers the whole pipeline: random query design over a
//! label/query/worker graph ([`querygen`]), worker noise ([`noise`]), the
//! four-phase message-passing decoder ([`infer`]), an exhaustive
//! maximum-likelihood decoder for small instances ([`oracle`]), repetition
//! baselines ([`baselines`]), closed-form sample-complexity limits
//! ([`limits`]) and a Monte Carlo error-rate harness ([`harness`]).

pub mod baselines;
pub mod error;
pub mod format;
pub mod harness;
pub mod infer;
pub mod limits;
pub mod model;
pub mod noise;
pub mod oracle;
pub mod querygen;

pub use error::{Error, Result};
pub use infer::{InferenceConfig, InferenceMode, InferenceResult};
pub use model::{
    sign_rand, trunc, AnswerSet, DegreeDistribution, LabelVector, Phase, Query, ReliabilityMatrix,
    SeedStream, TripartiteGraph, DEFAULT_LAMBDA,
};
pub use noise::NoiseSpec;
pub use querygen::QueryGenConfig;
