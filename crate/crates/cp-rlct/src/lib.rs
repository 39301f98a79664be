//! Exact real-log-canonical-threshold upper bounds and Monte Carlo
//! generalization-error estimates for rank-H CP decompositions of
//! three-way tensors under unit-variance Gaussian noise.
//!
//! The two halves of the crate:
//!
//! * [`bounds`] — closed-form arithmetic. [`bounds::tensor_rlct_bound`]
//!   evaluates the bound λ ≤ (H₀(I+J+K) − 2)/2 + min(m₁, m₂, m₃), where
//!   each mᵢ is the exact RLCT of a reduced-rank regression problem on one
//!   matricization of the residual tensor. All values are integer multiples
//!   of 1/8 and computed exactly.
//! * [`gen_error`] — simulation. [`gen_error::estimate_lambda`] samples the
//!   posterior of a CP model over synthetic data with an adaptive
//!   random-walk Metropolis sampler ([`mcmc`]), Monte Carlo-averages the
//!   generalization error Gₙ against fresh draws from the truth, and scales
//!   by n: since E[Gₙ] ≈ λ/n in the realizable regime, n·Ḡₙ estimates λ.
//!
//! [`experiment::run_experiment`] ties the two together over a grid of
//! model shapes and emits machine-readable reports; the `cp-rlct` binary is
//! a thin wrapper over it. Every stochastic step derives its seed from a
//! master seed via a keyed splitmix chain ([`seeding`]), so results are
//! reproducible bit for bit regardless of worker count.

pub mod bounds;
pub mod error;
pub mod experiment;
pub mod gen_error;
pub mod mcmc;
pub mod model;
pub mod seeding;
pub mod tensor;

pub use bounds::{rrr_rlct, tensor_rlct_bound, RlctBound};
pub use error::{Error, Result};
pub use experiment::{
    run_experiment, table1_cells, CellReport, ExperimentConfig, OutputFormat,
};
pub use gen_error::{
    estimate_gn, estimate_lambda, predictive_log_density, EstimatorConfig, InitStrategy,
    LambdaEstimate, PredictiveDensity, TrialResult,
};
pub use mcmc::{
    log_posterior_unnorm, run_chain, sample_target, ChainInit, LogDensity, McmcConfig,
    McmcDiagnostics, PosteriorSamples,
};
pub use model::{
    draw_true_params, log_likelihood, log_prior, sample_dataset, Dataset, PriorSpec,
};
pub use tensor::{kl_divergence, CpParams, Matrix, ModelSpec, Tensor3};
