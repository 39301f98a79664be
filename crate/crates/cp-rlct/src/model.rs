//! The Gaussian CP observation model: likelihood, priors, true-parameter
//! generation, and synthetic datasets.
//!
//! Observations are I×J×K tensors with independent unit-variance Gaussian
//! entries centered at the composed tensor. The noise variance is fixed at 1
//! and is not configurable.

use std::fs;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tensor::{compose, CpParams, Matrix, ModelSpec, Tensor3};

/// ln(2π), the per-entry normalizing constant of the unit-variance density.
pub(crate) const LN_2PI: f64 = 1.837_877_066_409_345_3;

/// Prior over every scalar entry of the factor matrices (i.i.d. across
/// entries).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PriorSpec {
    /// Zero-mean normal with standard deviation `sigma` on each entry.
    Gaussian { sigma: f64 },
    /// Uniform on [−half_width, half_width] per entry; zero density outside.
    UniformBox { half_width: f64 },
}

impl Default for PriorSpec {
    fn default() -> Self {
        PriorSpec::Gaussian { sigma: 1.0 }
    }
}

impl PriorSpec {
    pub fn validate(&self) -> Result<()> {
        match *self {
            PriorSpec::Gaussian { sigma } => {
                if !(sigma.is_finite() && sigma > 0.0) {
                    return Err(Error::Config(format!(
                        "gaussian prior needs finite sigma > 0, got {sigma}"
                    )));
                }
            }
            PriorSpec::UniformBox { half_width } => {
                if !(half_width.is_finite() && half_width > 0.0) {
                    return Err(Error::Config(format!(
                        "uniform_box prior needs finite half_width > 0, got {half_width}"
                    )));
                }
            }
        }
        Ok(())
    }

    /// Whether `w` has positive prior density.
    pub fn contains(&self, w: &CpParams) -> bool {
        match *self {
            PriorSpec::Gaussian { .. } => true,
            PriorSpec::UniformBox { half_width } => {
                let inside = |m: &Matrix| m.values().iter().all(|v| v.abs() <= half_width);
                inside(w.a()) && inside(w.b()) && inside(w.c())
            }
        }
    }
}

/// Log prior density over a flat slice of factor entries; −∞ iff some entry
/// falls outside a uniform_box support.
pub(crate) fn log_prior_slice(values: &[f64], prior: &PriorSpec) -> f64 {
    match *prior {
        PriorSpec::Gaussian { sigma } => {
            let norm = -(sigma.ln() + 0.5 * LN_2PI);
            let inv_two_var = 0.5 / (sigma * sigma);
            values
                .iter()
                .map(|v| norm - v * v * inv_two_var)
                .sum()
        }
        PriorSpec::UniformBox { half_width } => {
            if values.iter().any(|v| v.abs() > half_width) {
                f64::NEG_INFINITY
            } else {
                -(values.len() as f64) * (2.0 * half_width).ln()
            }
        }
    }
}

/// Log prior density of a factor triple; −∞ sentinel outside the support.
pub fn log_prior(w: &CpParams, prior: &PriorSpec) -> f64 {
    log_prior_slice(w.a().values(), prior)
        + log_prior_slice(w.b().values(), prior)
        + log_prior_slice(w.c().values(), prior)
}

/// Log density of the unit-variance Gaussian observation model at `x` given
/// its mean tensor.
pub(crate) fn gaussian_log_density(x: &Tensor3, mean: &Tensor3) -> f64 {
    debug_assert_eq!(x.dims(), mean.dims());
    let d = x.len() as f64;
    -0.5 * d * LN_2PI - 0.5 * crate::tensor::sq_distance_unchecked(x.values(), mean.values())
}

/// Log likelihood of one observed tensor under the model with parameters `w`:
/// `−(IJK/2)·ln(2π) − ½‖x − compose(w)‖²`.
pub fn log_likelihood(x: &Tensor3, w: &CpParams) -> Result<f64> {
    if x.dims() != w.dims() {
        return Err(Error::DimMismatch(format!(
            "observation has dims {:?}, model composes to {:?}",
            x.dims(),
            w.dims()
        )));
    }
    Ok(gaussian_log_density(x, &compose(w)))
}

/// Columns whose largest absolute entry falls below this are considered
/// degenerate and force a redraw of the whole candidate truth.
const DEGENERATE_COLUMN_THRESHOLD: f64 = 0.1;
const TRUTH_DRAW_ATTEMPTS: usize = 100;

/// Draw true parameters for `spec`: a rank-H₀ factor triple with standard
/// normal entries, rejecting candidates in which any factor column is
/// near-zero (all entries below 0.1 in absolute value).
pub fn draw_true_params(spec: &ModelSpec, seed: u64) -> Result<CpParams> {
    spec.validate()?;
    let (i, j, k) = spec.dims;
    let h0 = spec.true_rank;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..TRUTH_DRAW_ATTEMPTS {
        let mut draw =
            |rows: usize| Matrix::from_fn(rows, h0, |_, _| rng.sample(StandardNormal));
        let (a, b, c) = (draw(i), draw(j), draw(k));
        let nondegenerate = [&a, &b, &c].into_iter().all(|m| {
            (0..h0).all(|col| m.column_abs_max(col) >= DEGENERATE_COLUMN_THRESHOLD)
        });
        if nondegenerate {
            return CpParams::new(a, b, c);
        }
    }
    Err(Error::Internal(format!(
        "drew {TRUTH_DRAW_ATTEMPTS} degenerate true-parameter candidates in a row (seed {seed})"
    )))
}

/// A training set: n i.i.d. tensors from the model at some true parameters.
///
/// Fields are public so edge cases (e.g. an empty training set, for which the
/// posterior is the prior) can be constructed directly in tests.
#[derive(Debug, Clone)]
pub struct Dataset {
    pub spec: ModelSpec,
    pub tensors: Vec<Tensor3>,
    pub seed: u64,
}

/// Draw `spec.n_samples` observations, each entry independently normal with
/// mean `compose(w0)` and variance 1.
pub fn sample_dataset(spec: &ModelSpec, w0: &CpParams, seed: u64) -> Result<Dataset> {
    spec.validate()?;
    if w0.dims() != spec.dims || w0.rank() != spec.true_rank {
        return Err(Error::DimMismatch(format!(
            "true parameters have dims {:?} rank {}, spec wants dims {:?} rank {}",
            w0.dims(),
            w0.rank(),
            spec.dims,
            spec.true_rank
        )));
    }
    let t0 = compose(w0);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let tensors = (0..spec.n_samples)
        .map(|_| {
            let mut x = t0.clone();
            for v in x.values_mut() {
                *v += rng.sample::<f64, _>(StandardNormal);
            }
            x
        })
        .collect();
    Ok(Dataset {
        spec: *spec,
        tensors,
        seed,
    })
}

/// On-disk form: one row per tensor, entries row-major.
#[derive(Serialize, Deserialize)]
struct DatasetDto {
    dims: [usize; 3],
    rank: usize,
    true_rank: usize,
    seed: u64,
    tensors: Vec<Vec<f64>>,
}

impl Dataset {
    /// Sum of all tensors and total squared norm — the two statistics the
    /// likelihood depends on besides n.
    pub(crate) fn sufficient_stats(&self) -> (Tensor3, f64) {
        let mut sum = Tensor3::zeros(self.spec.dims);
        let mut sum_sq = 0.0;
        for x in &self.tensors {
            sum.add_assign(x);
            sum_sq += x.frobenius_sq();
        }
        (sum, sum_sq)
    }

    pub fn to_json(&self) -> Result<String> {
        let dto = DatasetDto {
            dims: [self.spec.dims.0, self.spec.dims.1, self.spec.dims.2],
            rank: self.spec.rank,
            true_rank: self.spec.true_rank,
            seed: self.seed,
            tensors: self.tensors.iter().map(|t| t.values().to_vec()).collect(),
        };
        serde_json::to_string(&dto).map_err(|e| Error::Parse(e.to_string()))
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let dto: DatasetDto =
            serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
        let dims = (dto.dims[0], dto.dims[1], dto.dims[2]);
        let spec = ModelSpec::new(dims, dto.rank, dto.true_rank, dto.tensors.len())?;
        let tensors = dto
            .tensors
            .into_iter()
            .map(|row| Tensor3::new(dims, row))
            .collect::<Result<Vec<_>>>()?;
        Ok(Dataset {
            spec,
            tensors,
            seed: dto.seed,
        })
    }

    pub fn save_json(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_json()?)?;
        Ok(())
    }

    pub fn load_json(path: &Path) -> Result<Self> {
        Self::from_json(&fs::read_to_string(path)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tensor::kl_divergence;

    fn scalar_params(a: f64, b: f64, c: f64) -> CpParams {
        CpParams::new(
            Matrix::new(1, 1, vec![a]).unwrap(),
            Matrix::new(1, 1, vec![b]).unwrap(),
            Matrix::new(1, 1, vec![c]).unwrap(),
        )
        .unwrap()
    }

    #[test]
    fn ln_2pi_constant_is_exact() {
        assert_eq!(LN_2PI, (2.0 * std::f64::consts::PI).ln());
    }

    #[test]
    fn likelihood_at_exact_mean() {
        let w = scalar_params(1.5, 2.0, -1.0);
        let x = compose(&w);
        assert_eq!(log_likelihood(&x, &w).unwrap(), -0.5 * LN_2PI);
    }

    #[test]
    fn likelihood_dim_mismatch_rejected() {
        let w = scalar_params(1.0, 1.0, 1.0);
        let x = Tensor3::zeros((2, 1, 1));
        assert!(log_likelihood(&x, &w).is_err());
    }

    #[test]
    fn density_integrates_to_one() {
        // 1×1×1 model: quadrature of exp(log_likelihood) over a wide grid.
        let w = scalar_params(0.7, 1.1, 0.9); // composes to 0.693
        let c = compose(&w).get(0, 0, 0);
        let (lo, hi, step) = (c - 8.0, c + 8.0, 5e-4);
        let n = ((hi - lo) / step) as usize;
        let f = |x: f64| {
            log_likelihood(&Tensor3::new((1, 1, 1), vec![x]).unwrap(), &w)
                .unwrap()
                .exp()
        };
        // Trapezoid rule.
        let mut integral = 0.5 * (f(lo) + f(hi));
        for i in 1..n {
            integral += f(lo + i as f64 * step);
        }
        integral *= step;
        assert!((integral - 1.0).abs() < 1e-6, "integral = {integral}");
    }

    #[test]
    fn likelihood_ratio_matches_kl() {
        // Mean of ll(x,w) − ll(x,w₀) over draws x ~ model(w₀) is −KL(w,w₀).
        let w = scalar_params(1.2, 1.0, 1.0);
        let w0 = scalar_params(0.8, 1.0, 1.0);
        let kl = kl_divergence(&w, &w0).unwrap();
        let spec = ModelSpec::new((1, 1, 1), 1, 1, 100_000).unwrap();
        let data = sample_dataset(&spec, &w0, 99).unwrap();
        let diffs: Vec<f64> = data
            .tensors
            .iter()
            .map(|x| log_likelihood(x, &w).unwrap() - log_likelihood(x, &w0).unwrap())
            .collect();
        let n = diffs.len() as f64;
        let mean = diffs.iter().sum::<f64>() / n;
        let var = diffs.iter().map(|d| (d - mean) * (d - mean)).sum::<f64>() / (n - 1.0);
        let se = (var / n).sqrt();
        assert!(
            (mean - (-kl)).abs() <= 3.0 * se,
            "mean {mean}, −KL {}, se {se}",
            -kl
        );
    }

    #[test]
    fn gaussian_prior_hand_checked() {
        let w = scalar_params(2.0, 0.0, 0.0);
        let prior = PriorSpec::Gaussian { sigma: 1.0 };
        // Three entries: −3/2·ln(2π) − (4 + 0 + 0)/2.
        let expected = -1.5 * LN_2PI - 2.0;
        assert!((log_prior(&w, &prior) - expected).abs() < 1e-12);
    }

    #[test]
    fn uniform_prior_support_sentinel() {
        let prior = PriorSpec::UniformBox { half_width: 1.0 };
        let inside = scalar_params(0.5, -0.5, 0.9);
        let outside = scalar_params(0.5, -1.5, 0.9);
        assert_eq!(log_prior(&inside, &prior), -3.0 * 2.0f64.ln());
        assert_eq!(log_prior(&outside, &prior), f64::NEG_INFINITY);
        assert!(prior.contains(&inside));
        assert!(!prior.contains(&outside));
    }

    #[test]
    fn prior_validation() {
        assert!(PriorSpec::Gaussian { sigma: 0.0 }.validate().is_err());
        assert!(PriorSpec::Gaussian { sigma: f64::NAN }.validate().is_err());
        assert!(PriorSpec::UniformBox { half_width: -1.0 }.validate().is_err());
        assert!(PriorSpec::default().validate().is_ok());
    }

    #[test]
    fn prior_spec_toml_roundtrip() {
        let prior = PriorSpec::UniformBox { half_width: 3.0 };
        let text = toml::to_string(&prior).unwrap();
        assert!(text.contains("uniform_box"));
        assert_eq!(toml::from_str::<PriorSpec>(&text).unwrap(), prior);
    }

    #[test]
    fn truth_draw_is_deterministic_and_nondegenerate() {
        let spec = ModelSpec::new((2, 3, 2), 4, 2, 10).unwrap();
        let w1 = draw_true_params(&spec, 7).unwrap();
        let w2 = draw_true_params(&spec, 7).unwrap();
        assert_eq!(w1, w2);
        assert_eq!(w1.dims(), (2, 3, 2));
        assert_eq!(w1.rank(), 2);
        for m in [w1.a(), w1.b(), w1.c()] {
            for col in 0..2 {
                assert!(m.column_abs_max(col) >= DEGENERATE_COLUMN_THRESHOLD);
            }
        }
        assert_ne!(draw_true_params(&spec, 8).unwrap(), w1);
    }

    #[test]
    fn dataset_sampling_is_deterministic() {
        let spec = ModelSpec::new((2, 2, 2), 2, 1, 5).unwrap();
        let w0 = draw_true_params(&spec, 3).unwrap();
        let d1 = sample_dataset(&spec, &w0, 11).unwrap();
        let d2 = sample_dataset(&spec, &w0, 11).unwrap();
        assert_eq!(d1.tensors.len(), 5);
        for (a, b) in d1.tensors.iter().zip(&d2.tensors) {
            assert_eq!(a.values(), b.values());
        }
        let d3 = sample_dataset(&spec, &w0, 12).unwrap();
        assert_ne!(d1.tensors[0].values(), d3.tensors[0].values());
    }

    #[test]
    fn dataset_rejects_mismatched_truth() {
        let spec = ModelSpec::new((2, 2, 2), 2, 1, 5).unwrap();
        let wrong_rank = draw_true_params(&ModelSpec::new((2, 2, 2), 2, 2, 5).unwrap(), 1).unwrap();
        assert!(sample_dataset(&spec, &wrong_rank, 0).is_err());
    }

    #[test]
    fn dataset_moments_match_model() {
        // 1×1×1, n = 10⁴: sample mean within 4σ/√n of the composed value and
        // per-entry variance inside [0.9, 1.1].
        let spec = ModelSpec::new((1, 1, 1), 1, 1, 10_000).unwrap();
        let w0 = scalar_params(0.9, 1.3, 0.8);
        let c = compose(&w0).get(0, 0, 0);
        let data = sample_dataset(&spec, &w0, 2024).unwrap();
        let n = data.tensors.len() as f64;
        let mean = data.tensors.iter().map(|t| t.get(0, 0, 0)).sum::<f64>() / n;
        assert!((mean - c).abs() < 4.0 / n.sqrt(), "mean {mean} vs {c}");
        let var = data
            .tensors
            .iter()
            .map(|t| (t.get(0, 0, 0) - mean).powi(2))
            .sum::<f64>()
            / (n - 1.0);
        assert!((0.9..=1.1).contains(&var), "variance {var}");
    }

    #[test]
    fn sufficient_stats_match_naive() {
        let spec = ModelSpec::new((2, 2, 3), 2, 1, 7).unwrap();
        let w0 = draw_true_params(&spec, 5).unwrap();
        let data = sample_dataset(&spec, &w0, 6).unwrap();
        let (sum, sum_sq) = data.sufficient_stats();
        let mut naive_sum = Tensor3::zeros(spec.dims);
        let mut naive_sq = 0.0;
        for x in &data.tensors {
            for (acc, v) in naive_sum.values_mut().iter_mut().zip(x.values()) {
                *acc += v;
            }
            naive_sq += x.values().iter().map(|v| v * v).sum::<f64>();
        }
        assert_eq!(sum.values(), naive_sum.values());
        assert_eq!(sum_sq, naive_sq);
    }

    #[test]
    fn dataset_json_roundtrip_is_exact() {
        let spec = ModelSpec::new((2, 2, 2), 3, 2, 4).unwrap();
        let w0 = draw_true_params(&spec, 17).unwrap();
        let data = sample_dataset(&spec, &w0, 18).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("data.json");
        data.save_json(&path).unwrap();
        let back = Dataset::load_json(&path).unwrap();
        assert_eq!(back.spec, data.spec);
        assert_eq!(back.seed, data.seed);
        for (a, b) in back.tensors.iter().zip(&data.tensors) {
            assert_eq!(a.values(), b.values());
        }
    }

    #[test]
    fn dataset_json_rejects_corrupt_rows() {
        let text = r#"{"dims":[1,1,1],"rank":1,"true_rank":1,"seed":0,"tensors":[[1.0,2.0]]}"#;
        assert!(Dataset::from_json(text).is_err());
    }
}
