//! Adaptive random-walk Metropolis sampling of the CP posterior.
//!
//! Proposals perturb the whole flattened (A, B, C) vector with i.i.d. normal
//! noise. The step size adapts toward a target acceptance rate during
//! burn-in only and is frozen afterwards, so the retained states come from a
//! valid fixed-kernel Markov chain. Post-burn-in states are thinned per
//! chain, pooled, and subsampled to an exact target count.

pub mod diagnostics;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{gaussian_log_density, log_prior, log_prior_slice, Dataset, PriorSpec};
use crate::seeding::{derive_seed, stream};
use crate::tensor::{compose, compose_parts, dot, CpParams, Matrix, Tensor3};

/// Sampler budget and tuning knobs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct McmcConfig {
    pub total_iters: usize,
    pub burn_in: usize,
    /// Keep every `thin`-th post-burn-in state.
    pub thin: usize,
    /// Pooled retained states are subsampled to exactly this many draws.
    pub target_samples: usize,
    pub initial_step: f64,
    /// During burn-in, rescale the step every this many iterations.
    pub adapt_window: usize,
    pub target_accept: f64,
    pub chains: usize,
    pub seed: u64,
    /// Record (iteration, log-posterior, step, accepted) per chain. Debug
    /// aid; costs memory proportional to total_iters.
    pub record_trace: bool,
}

impl Default for McmcConfig {
    fn default() -> Self {
        McmcConfig {
            total_iters: 30_000,
            burn_in: 10_000,
            thin: 20,
            target_samples: 1000,
            initial_step: 0.05,
            adapt_window: 50,
            target_accept: 0.3,
            chains: 4,
            seed: 0,
            record_trace: false,
        }
    }
}

impl McmcConfig {
    pub fn validate(&self) -> Result<()> {
        if self.burn_in >= self.total_iters {
            return Err(Error::Config(format!(
                "burn_in ({}) must be smaller than total_iters ({})",
                self.burn_in, self.total_iters
            )));
        }
        if self.thin < 1 {
            return Err(Error::Config("thin must be >= 1".into()));
        }
        if self.chains < 1 {
            return Err(Error::Config("chains must be >= 1".into()));
        }
        if self.target_samples < 1 {
            return Err(Error::Config("target_samples must be >= 1".into()));
        }
        if self.adapt_window < 1 {
            return Err(Error::Config("adapt_window must be >= 1".into()));
        }
        if !(self.initial_step.is_finite() && self.initial_step > 0.0) {
            return Err(Error::Config(format!(
                "initial_step must be finite and > 0, got {}",
                self.initial_step
            )));
        }
        if !(self.target_accept > 0.0 && self.target_accept < 1.0) {
            return Err(Error::Config(format!(
                "target_accept must lie in (0, 1), got {}",
                self.target_accept
            )));
        }
        let retained = (self.total_iters - self.burn_in) / self.thin * self.chains;
        if retained < self.target_samples {
            return Err(Error::Config(format!(
                "budget retains only {retained} states across {} chains but target_samples is {}",
                self.chains, self.target_samples
            )));
        }
        Ok(())
    }
}

/// Anything the sampler can target: an unnormalized log density over a flat
/// parameter vector.
pub trait LogDensity: Sync {
    fn dim(&self) -> usize;
    fn log_density(&self, position: &[f64]) -> f64;
}

/// One recorded sampler step, for chain-trace dumps.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TraceRow {
    pub iteration: usize,
    pub log_posterior: f64,
    pub step: f64,
    pub accepted: bool,
}

/// Scalar convergence summaries of the log-posterior trace.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct McmcDiagnostics {
    pub split_rhat: f64,
    pub ess: f64,
}

/// Pooled output of a multi-chain run over a generic target.
#[derive(Debug, Clone)]
pub struct RawChains {
    /// Exactly `target_samples` flat positions, evenly subsampled from the
    /// pooled retained states (chain-major order).
    pub samples: Vec<Vec<f64>>,
    /// Pooled post-burn-in acceptance rate.
    pub accept_rate: f64,
    pub diagnostics: McmcDiagnostics,
    /// One trace per chain when `record_trace` is set.
    pub traces: Option<Vec<Vec<TraceRow>>>,
}

struct SingleChain {
    kept: Vec<Vec<f64>>,
    kept_lp: Vec<f64>,
    accepted_post: usize,
    trace: Option<Vec<TraceRow>>,
}

fn run_single_chain<T: LogDensity + ?Sized>(
    target: &T,
    init: &[f64],
    config: &McmcConfig,
    seed: u64,
) -> Result<SingleChain> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut pos = init.to_vec();
    let mut lp = target.log_density(&pos);
    if lp.is_nan() {
        return Err(Error::Divergence(
            "log-posterior is NaN at the chain's initial point".into(),
        ));
    }
    if lp == f64::NEG_INFINITY {
        return Err(Error::Config(
            "chain initialized outside the prior support".into(),
        ));
    }
    let retained_hint = (config.total_iters - config.burn_in) / config.thin;
    let mut out = SingleChain {
        kept: Vec::with_capacity(retained_hint),
        kept_lp: Vec::with_capacity(retained_hint),
        accepted_post: 0,
        trace: config.record_trace.then(|| Vec::with_capacity(config.total_iters)),
    };
    let mut step = config.initial_step;
    let mut window_accepts = 0usize;
    let mut proposal = vec![0.0; pos.len()];
    for iter in 0..config.total_iters {
        for (p, x) in proposal.iter_mut().zip(&pos) {
            *p = x + step * rng.sample::<f64, _>(StandardNormal);
        }
        let lp_new = target.log_density(&proposal);
        if lp_new.is_nan() {
            return Err(Error::Divergence(format!(
                "log-posterior became NaN at iteration {iter}"
            )));
        }
        let delta = lp_new - lp;
        let accepted = delta >= 0.0 || rng.random::<f64>().ln() < delta;
        if accepted {
            std::mem::swap(&mut pos, &mut proposal);
            lp = lp_new;
        }
        if iter < config.burn_in {
            window_accepts += accepted as usize;
            if (iter + 1) % config.adapt_window == 0 {
                let rate = window_accepts as f64 / config.adapt_window as f64;
                step *= (0.5 * (rate - config.target_accept)).exp();
                window_accepts = 0;
            }
        } else {
            out.accepted_post += accepted as usize;
            if (iter - config.burn_in + 1) % config.thin == 0 {
                out.kept.push(pos.clone());
                out.kept_lp.push(lp);
            }
        }
        if let Some(trace) = out.trace.as_mut() {
            trace.push(TraceRow {
                iteration: iter,
                log_posterior: lp,
                step,
                accepted,
            });
        }
    }
    Ok(out)
}

/// Run `config.chains` independent Metropolis chains over `target` from the
/// given initial points (one per chain) and pool them.
///
/// Chain c's random stream is derived from (config.seed, c), so results are
/// identical however the chains are scheduled.
pub fn sample_target<T: LogDensity + ?Sized>(
    target: &T,
    inits: &[Vec<f64>],
    config: &McmcConfig,
) -> Result<RawChains> {
    config.validate()?;
    if inits.len() != config.chains {
        return Err(Error::Config(format!(
            "got {} initial points for {} chains",
            inits.len(),
            config.chains
        )));
    }
    if let Some(bad) = inits.iter().find(|i| i.len() != target.dim()) {
        return Err(Error::DimMismatch(format!(
            "initial point has {} entries, target has dimension {}",
            bad.len(),
            target.dim()
        )));
    }
    let runs = inits
        .par_iter()
        .enumerate()
        .map(|(c, init)| {
            run_single_chain(target, init, config, derive_seed(config.seed, stream::CHAIN, c as u64))
        })
        .collect::<Result<Vec<_>>>()?;

    let lp_chains: Vec<Vec<f64>> = runs.iter().map(|r| r.kept_lp.clone()).collect();
    let diagnostics = McmcDiagnostics {
        split_rhat: diagnostics::split_rhat(&lp_chains),
        ess: diagnostics::effective_sample_size(&lp_chains),
    };
    let post_iters = (config.total_iters - config.burn_in) * config.chains;
    let accept_rate =
        runs.iter().map(|r| r.accepted_post).sum::<usize>() as f64 / post_iters as f64;

    let mut pooled: Vec<Vec<f64>> = Vec::new();
    for run in &runs {
        pooled.extend(run.kept.iter().cloned());
    }
    // Evenly spaced subsample; strictly increasing because pooled ≥ target.
    let samples = (0..config.target_samples)
        .map(|s| pooled[s * pooled.len() / config.target_samples].clone())
        .collect();
    let traces = config
        .record_trace
        .then(|| runs.into_iter().filter_map(|r| r.trace).collect());
    Ok(RawChains {
        samples,
        accept_rate,
        diagnostics,
        traces,
    })
}

/// The CP posterior as a sampling target, reduced to sufficient statistics:
/// `Σᵢ‖Xᵢ − T‖² = Σᵢ‖Xᵢ‖² − 2⟨ΣᵢXᵢ, T⟩ + n‖T‖²`, so each evaluation
/// composes one tensor regardless of n.
pub struct PosteriorTarget {
    dims: (usize, usize, usize),
    rank: usize,
    n: f64,
    data_sum: Tensor3,
    data_sum_sq: f64,
    prior: PriorSpec,
    /// −(n·IJK/2)·ln(2π), the observation normalizing constant.
    const_term: f64,
}

impl PosteriorTarget {
    pub fn new(data: &Dataset, prior: &PriorSpec) -> Result<Self> {
        data.spec.validate()?;
        prior.validate()?;
        let (data_sum, data_sum_sq) = data.sufficient_stats();
        let n = data.tensors.len() as f64;
        let d = (data.spec.dims.0 * data.spec.dims.1 * data.spec.dims.2) as f64;
        Ok(PosteriorTarget {
            dims: data.spec.dims,
            rank: data.spec.rank,
            n,
            data_sum,
            data_sum_sq,
            prior: *prior,
            const_term: -0.5 * n * d * crate::model::LN_2PI,
        })
    }
}

impl LogDensity for PosteriorTarget {
    fn dim(&self) -> usize {
        CpParams::flat_len(self.dims, self.rank)
    }

    fn log_density(&self, position: &[f64]) -> f64 {
        debug_assert_eq!(position.len(), self.dim());
        let prior_lp = log_prior_slice(position, &self.prior);
        if prior_lp == f64::NEG_INFINITY {
            return f64::NEG_INFINITY;
        }
        let (i, j, _) = self.dims;
        let na = i * self.rank;
        let nb = j * self.rank;
        let t = compose_parts(
            self.dims,
            self.rank,
            &position[..na],
            &position[na..na + nb],
            &position[na + nb..],
        );
        let cross = dot(&self.data_sum, &t).expect("sufficient stats share the model's dims");
        let residual = self.data_sum_sq - 2.0 * cross + self.n * t.frobenius_sq();
        prior_lp + self.const_term - 0.5 * residual
    }
}

/// Unnormalized log posterior `log φ(w) + Σᵢ log p(Xᵢ|w)`, evaluated
/// directly (no sufficient-statistics shortcut). −∞ iff `w` is outside the
/// prior support.
///
/// The sum is a left fold over tensors in order, so appending a tensor adds
/// exactly its log-likelihood.
pub fn log_posterior_unnorm(w: &CpParams, data: &Dataset, prior: &PriorSpec) -> Result<f64> {
    if w.dims() != data.spec.dims {
        return Err(Error::DimMismatch(format!(
            "parameters compose to {:?}, data tensors are {:?}",
            w.dims(),
            data.spec.dims
        )));
    }
    let mean = compose(w);
    let mut lp = log_prior(w, prior);
    for x in &data.tensors {
        if x.dims() != mean.dims() {
            return Err(Error::DimMismatch(format!(
                "dataset tensor has dims {:?}, expected {:?}",
                x.dims(),
                mean.dims()
            )));
        }
        lp += gaussian_log_density(x, &mean);
    }
    Ok(lp)
}

/// How each chain picks its starting point.
#[derive(Debug, Clone)]
pub enum ChainInit {
    /// Start at the true parameters, padding the H − H₀ extra columns with
    /// i.i.d. normal(0, 0.1²) entries.
    NearTruth(CpParams),
    /// Start every entry at normal(0, scale²) — deliberately wide, for
    /// initialization-independence checks.
    Overdispersed { scale: f64 },
}

/// Everything run_chain returns: the retained draws plus mixing summaries.
#[derive(Debug, Clone)]
pub struct PosteriorSamples {
    /// Exactly `target_samples` parameter draws, all of the model's shape.
    pub samples: Vec<CpParams>,
    pub accept_rate: f64,
    pub diagnostics: McmcDiagnostics,
    pub traces: Option<Vec<Vec<TraceRow>>>,
}

fn initial_points(
    data: &Dataset,
    init: &ChainInit,
    config: &McmcConfig,
) -> Result<Vec<Vec<f64>>> {
    let spec = &data.spec;
    match init {
        ChainInit::NearTruth(w0) => {
            if w0.dims() != spec.dims || w0.rank() > spec.rank {
                return Err(Error::DimMismatch(format!(
                    "near-truth init has dims {:?} rank {}, spec wants dims {:?} rank <= {}",
                    w0.dims(),
                    w0.rank(),
                    spec.dims,
                    spec.rank
                )));
            }
            let pad = |m: &Matrix, rng: &mut ChaCha8Rng| {
                Matrix::from_fn(m.rows(), spec.rank, |r, c| {
                    if c < w0.rank() {
                        m.get(r, c)
                    } else {
                        0.1 * rng.sample::<f64, _>(StandardNormal)
                    }
                })
            };
            (0..config.chains)
                .map(|c| {
                    let mut rng =
                        ChaCha8Rng::seed_from_u64(derive_seed(config.seed, stream::INIT, c as u64));
                    let padded = CpParams::new(
                        pad(w0.a(), &mut rng),
                        pad(w0.b(), &mut rng),
                        pad(w0.c(), &mut rng),
                    )?;
                    Ok(padded.flatten())
                })
                .collect()
        }
        ChainInit::Overdispersed { scale } => {
            if !(scale.is_finite() && *scale > 0.0) {
                return Err(Error::Config(format!(
                    "overdispersed init needs finite scale > 0, got {scale}"
                )));
            }
            let dim = CpParams::flat_len(spec.dims, spec.rank);
            Ok((0..config.chains)
                .map(|c| {
                    let mut rng =
                        ChaCha8Rng::seed_from_u64(derive_seed(config.seed, stream::INIT, c as u64));
                    (0..dim)
                        .map(|_| scale * rng.sample::<f64, _>(StandardNormal))
                        .collect()
                })
                .collect())
        }
    }
}

/// Sample the posterior of (A, B, C) given `data` with `config.chains`
/// adaptive random-walk Metropolis chains.
pub fn run_chain(
    data: &Dataset,
    prior: &PriorSpec,
    config: &McmcConfig,
    init: &ChainInit,
) -> Result<PosteriorSamples> {
    let target = PosteriorTarget::new(data, prior)?;
    let inits = initial_points(data, init, config)?;
    let raw = sample_target(&target, &inits, config)?;
    let samples = raw
        .samples
        .iter()
        .map(|flat| CpParams::from_flat(data.spec.dims, data.spec.rank, flat))
        .collect::<Result<Vec<_>>>()?;
    Ok(PosteriorSamples {
        samples,
        accept_rate: raw.accept_rate,
        diagnostics: raw.diagnostics,
        traces: raw.traces,
    })
}
