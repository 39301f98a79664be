//! Monte Carlo estimation of the Bayesian generalization error
//! Gₙ = KL(truth ‖ posterior predictive) and the RLCT estimate
//! λ̂ = n · Ê[Gₙ].
//!
//! Three nested levels of randomness: truth redraws × datasets (outer
//! trials), test draws from the true model (middle), and posterior samples
//! feeding the predictive mixture (inner).

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::mcmc::{
    run_chain, ChainInit, McmcConfig, McmcDiagnostics, PosteriorSamples, TraceRow,
};
use crate::model::{draw_true_params, gaussian_log_density, sample_dataset, PriorSpec};
use crate::seeding::{derive_seed, stream};
use crate::tensor::{compose, CpParams, ModelSpec, Tensor3};

/// One dataset's generalization-error estimate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TrialResult {
    /// Monte Carlo estimate of Gₙ = E_x[log p(x|w₀) − log p*(x)].
    pub g_n: f64,
    pub n_test: usize,
    /// Standard error of the test-draw average (inner level only; excludes
    /// posterior-sampling noise).
    pub mc_stderr: f64,
}

/// One trial (truth redraw × dataset) with its sampler health summary.
#[derive(Debug, Clone)]
pub struct TrialRecord {
    pub redraw: usize,
    pub dataset: usize,
    pub result: TrialResult,
    pub accept_rate: f64,
    pub diagnostics: McmcDiagnostics,
    /// Chain traces, present only when the MCMC config records them.
    pub traces: Option<Vec<Vec<TraceRow>>>,
}

/// Pooled λ̂ for one model shape.
#[derive(Debug, Clone)]
pub struct LambdaEstimate {
    pub spec: ModelSpec,
    pub trials: Vec<TrialRecord>,
    /// n · mean(g_n) over trials.
    pub lambda_hat: f64,
    /// n · stddev(g_n) over trials (0 for a single trial).
    pub lambda_std: f64,
    pub truth_redraws: usize,
}

impl LambdaEstimate {
    /// Standard error of λ̂ across trials.
    pub fn trial_stderr(&self) -> f64 {
        self.lambda_std / (self.trials.len() as f64).sqrt()
    }

    pub fn mean_accept_rate(&self) -> f64 {
        let n = self.trials.len() as f64;
        self.trials.iter().map(|t| t.accept_rate).sum::<f64>() / n
    }

    /// Worst split-R̂ across trials; NaN when no trial produced a finite one.
    pub fn max_split_rhat(&self) -> f64 {
        self.trials
            .iter()
            .map(|t| t.diagnostics.split_rhat)
            .filter(|r| r.is_finite())
            .fold(f64::NAN, f64::max)
    }
}

/// Posterior predictive mixture with the per-sample composed tensors
/// precomputed; evaluation reuses the exact per-sample likelihood, so a
/// one-sample mixture reproduces `log_likelihood` bit-for-bit.
pub struct PredictiveDensity {
    dims: (usize, usize, usize),
    means: Vec<Tensor3>,
}

impl PredictiveDensity {
    pub fn new(samples: &[CpParams]) -> Result<Self> {
        let first = samples
            .first()
            .ok_or_else(|| Error::Domain("predictive density needs a nonempty sample set".into()))?;
        let dims = first.dims();
        if samples.iter().any(|w| w.dims() != dims) {
            return Err(Error::DimMismatch(
                "posterior samples disagree on tensor dims".into(),
            ));
        }
        Ok(PredictiveDensity {
            dims,
            means: samples.iter().map(compose).collect(),
        })
    }

    pub fn dims(&self) -> (usize, usize, usize) {
        self.dims
    }

    pub fn len(&self) -> usize {
        self.means.len()
    }

    pub fn is_empty(&self) -> bool {
        false // construction rejects empty sample sets
    }

    /// log((1/S) Σ_s exp(log p(x|w_s))) via max-shifted log-sum-exp.
    pub fn log_density(&self, x: &Tensor3) -> Result<f64> {
        let mut buf = vec![0.0; self.means.len()];
        self.log_density_into(x, &mut buf)
    }

    fn log_density_into(&self, x: &Tensor3, buf: &mut [f64]) -> Result<f64> {
        if x.dims() != self.dims {
            return Err(Error::DimMismatch(format!(
                "observation has dims {:?}, predictive was built for {:?}",
                x.dims(),
                self.dims
            )));
        }
        for (ll, mean) in buf.iter_mut().zip(&self.means) {
            *ll = gaussian_log_density(x, mean);
        }
        Ok(log_mean_exp(buf))
    }
}

/// log of the mean of exp(values), max-shifted so finite inputs never
/// overflow.
///
/// Values are sorted before summation (permutation invariance is exact) and
/// bit-equal values are grouped into one multiply (so duplicating every
/// element shifts the sum by exactly one power of two, which the mean
/// cancels — mixture-weight invariance is exact too).
fn log_mean_exp(values: &mut [f64]) -> f64 {
    debug_assert!(!values.is_empty());
    values.sort_unstable_by(f64::total_cmp);
    let max = *values.last().unwrap();
    if !max.is_finite() {
        return max;
    }
    let mut sum = 0.0;
    let mut idx = 0;
    while idx < values.len() {
        let v = values[idx];
        let mut count = 1usize;
        while idx + count < values.len() && values[idx + count] == v {
            count += 1;
        }
        sum += count as f64 * (v - max).exp();
        idx += count;
    }
    max + (sum / values.len() as f64).ln()
}

/// Free-function form of [`PredictiveDensity::log_density`] for one-off use.
pub fn predictive_log_density(x: &Tensor3, samples: &[CpParams]) -> Result<f64> {
    PredictiveDensity::new(samples)?.log_density(x)
}

/// Estimate Gₙ for one posterior: draw `n_test` tensors from the true model
/// and average log p(x|w₀) − log p*(x).
pub fn estimate_gn(
    w0: &CpParams,
    samples: &PosteriorSamples,
    n_test: usize,
    seed: u64,
) -> Result<TrialResult> {
    if n_test < 1 {
        return Err(Error::Config("n_test must be >= 1".into()));
    }
    let pred = PredictiveDensity::new(&samples.samples)?;
    if pred.dims() != w0.dims() {
        return Err(Error::DimMismatch(format!(
            "true parameters compose to {:?}, posterior samples to {:?}",
            w0.dims(),
            pred.dims()
        )));
    }
    let t0 = compose(w0);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut buf = vec![0.0; pred.len()];
    let mut diffs = Vec::with_capacity(n_test);
    for _ in 0..n_test {
        let mut x = t0.clone();
        for v in x.values_mut() {
            *v += rng.sample::<f64, _>(StandardNormal);
        }
        let ll_true = gaussian_log_density(&x, &t0);
        let ll_pred = pred.log_density_into(&x, &mut buf)?;
        diffs.push(ll_true - ll_pred);
    }
    let n = n_test as f64;
    let g_n = diffs.iter().sum::<f64>() / n;
    let mc_stderr = if n_test > 1 {
        let var = diffs.iter().map(|d| (d - g_n) * (d - g_n)).sum::<f64>() / (n - 1.0);
        (var / n).sqrt()
    } else {
        0.0
    };
    Ok(TrialResult {
        g_n,
        n_test,
        mc_stderr,
    })
}

/// How estimate_lambda initializes each trial's chains.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum InitStrategy {
    /// Start at the trial's true parameters (padded to rank H).
    NearTruth,
    /// Start wide; see [`ChainInit::Overdispersed`].
    Overdispersed { scale: f64 },
}

/// Outer-loop counts and seeding for one cell's λ̂.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EstimatorConfig {
    pub truth_redraws: usize,
    pub datasets_per_cell: usize,
    /// Test draws per trial for the Gₙ average.
    pub n_test: usize,
    pub seed: u64,
    pub init: InitStrategy,
}

impl Default for EstimatorConfig {
    fn default() -> Self {
        EstimatorConfig {
            truth_redraws: 5,
            datasets_per_cell: 2,
            n_test: 10_000,
            seed: 0,
            init: InitStrategy::NearTruth,
        }
    }
}

impl EstimatorConfig {
    pub fn validate(&self) -> Result<()> {
        if self.truth_redraws < 1 {
            return Err(Error::Config("truth_redraws must be >= 1".into()));
        }
        if self.datasets_per_cell < 1 {
            return Err(Error::Config("datasets_per_cell must be >= 1".into()));
        }
        if self.n_test < 1 {
            return Err(Error::Config("n_test must be >= 1".into()));
        }
        if let InitStrategy::Overdispersed { scale } = self.init {
            if !(scale.is_finite() && scale > 0.0) {
                return Err(Error::Config(format!(
                    "overdispersed init needs finite scale > 0, got {scale}"
                )));
            }
        }
        Ok(())
    }
}

/// Estimate λ for one model shape: for each truth redraw, draw w₀; for each
/// dataset from that truth, run MCMC and estimate Gₙ; pool all trials into
/// λ̂ = n·mean and λ_std = n·stddev.
///
/// Trials run in parallel; every trial's seeds are derived from
/// (config.seed, trial index), so the result is a pure function of the
/// arguments regardless of worker count.
pub fn estimate_lambda(
    spec: &ModelSpec,
    prior: &PriorSpec,
    mcmc: &McmcConfig,
    config: &EstimatorConfig,
) -> Result<LambdaEstimate> {
    spec.validate()?;
    prior.validate()?;
    mcmc.validate()?;
    config.validate()?;
    let truths = (0..config.truth_redraws)
        .map(|r| {
            let w0 = draw_true_params(spec, derive_seed(config.seed, stream::TRUTH, r as u64))?;
            if !prior.contains(&w0) {
                return Err(Error::Config(format!(
                    "true parameters of redraw {r} fall outside the uniform_box support; \
                     enlarge half_width"
                )));
            }
            Ok(w0)
        })
        .collect::<Result<Vec<_>>>()?;

    let grid: Vec<(usize, usize)> = (0..config.truth_redraws)
        .flat_map(|r| (0..config.datasets_per_cell).map(move |d| (r, d)))
        .collect();
    let trials = grid
        .par_iter()
        .map(|&(redraw, dataset)| {
            let trial_idx = (redraw * config.datasets_per_cell + dataset) as u64;
            let run = || -> Result<TrialRecord> {
                let w0 = &truths[redraw];
                let data = sample_dataset(
                    spec,
                    w0,
                    derive_seed(config.seed, stream::DATA, trial_idx),
                )?;
                let mcmc = McmcConfig {
                    seed: derive_seed(config.seed, stream::MCMC, trial_idx),
                    ..*mcmc
                };
                let init = match config.init {
                    InitStrategy::NearTruth => ChainInit::NearTruth(w0.clone()),
                    InitStrategy::Overdispersed { scale } => ChainInit::Overdispersed { scale },
                };
                let post = run_chain(&data, prior, &mcmc, &init)?;
                let result = estimate_gn(
                    w0,
                    &post,
                    config.n_test,
                    derive_seed(config.seed, stream::TEST_DRAWS, trial_idx),
                )?;
                Ok(TrialRecord {
                    redraw,
                    dataset,
                    result,
                    accept_rate: post.accept_rate,
                    diagnostics: post.diagnostics,
                    traces: post.traces,
                })
            };
            run().map_err(|e| Error::trial(redraw, dataset, e))
        })
        .collect::<Result<Vec<_>>>()?;

    let n = spec.n_samples as f64;
    let count = trials.len() as f64;
    let mean_g = trials.iter().map(|t| t.result.g_n).sum::<f64>() / count;
    let lambda_hat = n * mean_g;
    let lambda_std = if trials.len() > 1 {
        let var = trials
            .iter()
            .map(|t| (t.result.g_n - mean_g) * (t.result.g_n - mean_g))
            .sum::<f64>()
            / (count - 1.0);
        n * var.sqrt()
    } else {
        0.0
    };
    if !lambda_hat.is_finite() {
        return Err(Error::Internal(format!(
            "lambda_hat is not finite ({lambda_hat}) — upstream produced non-finite g_n"
        )));
    }
    Ok(LambdaEstimate {
        spec: *spec,
        trials,
        lambda_hat,
        lambda_std,
        truth_redraws: config.truth_redraws,
    })
}
