//! Convergence diagnostics for pooled Metropolis chains: split-R̂ and an
//! effective-sample-size estimate of a scalar trace (here, the
//! log-posterior).

/// Split each chain in half (dropping the middle element of odd-length
/// chains) so within-chain drift shows up as between-sequence variance.
fn split(chains: &[Vec<f64>]) -> Vec<&[f64]> {
    let mut seqs = Vec::with_capacity(2 * chains.len());
    for chain in chains {
        let half = chain.len() / 2;
        seqs.push(&chain[..half]);
        seqs.push(&chain[chain.len() - half..]);
    }
    seqs
}

fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

fn sample_var(xs: &[f64]) -> f64 {
    let m = mean(xs);
    xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (xs.len() - 1) as f64
}

/// Between/within variance decomposition over split sequences; returns
/// (within W, pooled variance estimate var⁺, sequence length n). None if the
/// traces are too short or degenerate.
fn variance_decomposition(chains: &[Vec<f64>]) -> Option<(f64, f64, usize, Vec<&[f64]>)> {
    if chains.is_empty() || chains.iter().any(|c| c.len() < 4) {
        return None;
    }
    let seqs = split(chains);
    let n = seqs.iter().map(|s| s.len()).min().unwrap();
    if n < 2 {
        return None;
    }
    let seqs: Vec<&[f64]> = seqs.into_iter().map(|s| &s[..n]).collect();
    let w = seqs.iter().map(|s| sample_var(s)).sum::<f64>() / seqs.len() as f64;
    let seq_means: Vec<f64> = seqs.iter().map(|s| mean(s)).collect();
    let b = n as f64 * sample_var(&seq_means);
    let var_plus = (n as f64 - 1.0) / n as f64 * w + b / n as f64;
    if !(w.is_finite() && var_plus.is_finite()) || w <= 0.0 {
        return None;
    }
    Some((w, var_plus, n, seqs))
}

/// Split-R̂ (potential scale reduction) of a scalar trace across chains.
///
/// Values near 1 indicate the split sequences agree; NaN for traces too
/// short or constant to assess.
pub fn split_rhat(chains: &[Vec<f64>]) -> f64 {
    match variance_decomposition(chains) {
        Some((w, var_plus, _, _)) => (var_plus / w).sqrt(),
        None => f64::NAN,
    }
}

/// Effective sample size of the pooled scalar trace: m·n / (1 + 2Στ ρ̂_t),
/// with lag correlations from the variogram over split sequences, truncated
/// at the first lag pair whose correlation sum turns non-positive.
pub fn effective_sample_size(chains: &[Vec<f64>]) -> f64 {
    let Some((_, var_plus, n, seqs)) = variance_decomposition(chains) else {
        return f64::NAN;
    };
    let m = seqs.len();
    let rho = |t: usize| -> f64 {
        let mut acc = 0.0;
        for s in &seqs {
            for i in t..n {
                let d = s[i] - s[i - t];
                acc += d * d;
            }
        }
        let variogram = acc / (m * (n - t)) as f64;
        1.0 - variogram / (2.0 * var_plus)
    };
    let mut tail = 0.0;
    let mut t = 1;
    while t + 1 < n {
        let pair = rho(t) + rho(t + 1);
        if pair <= 0.0 {
            break;
        }
        tail += pair;
        t += 2;
    }
    let ess = (m * n) as f64 / (1.0 + 2.0 * tail);
    ess.min((m * n) as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::StandardNormal;

    fn iid_chains(chains: usize, len: usize, seed: u64) -> Vec<Vec<f64>> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..chains)
            .map(|_| (0..len).map(|_| rng.sample(StandardNormal)).collect())
            .collect()
    }

    #[test]
    fn rhat_near_one_for_iid_chains() {
        let r = split_rhat(&iid_chains(4, 500, 1));
        assert!((0.98..1.05).contains(&r), "rhat = {r}");
    }

    #[test]
    fn rhat_flags_disagreeing_chains() {
        let mut chains = iid_chains(4, 500, 2);
        for (c, chain) in chains.iter_mut().enumerate() {
            for v in chain.iter_mut() {
                *v += 3.0 * c as f64;
            }
        }
        assert!(split_rhat(&chains) > 1.5);
    }

    #[test]
    fn rhat_flags_within_chain_drift() {
        // A strong linear trend inside each chain inflates split-R̂ even
        // though the chains agree with each other.
        let chains: Vec<Vec<f64>> = (0..4)
            .map(|_| (0..500).map(|i| i as f64 / 100.0).collect())
            .collect();
        assert!(split_rhat(&chains) > 1.5);
    }

    #[test]
    fn ess_close_to_sample_count_for_iid() {
        let chains = iid_chains(4, 1000, 3);
        let ess = effective_sample_size(&chains);
        assert!((2000.0..=4000.0).contains(&ess), "ess = {ess}");
    }

    #[test]
    fn ess_collapses_under_autocorrelation() {
        // AR(1) with ρ = 0.95 has integrated autocorrelation time ≈ 39.
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let chains: Vec<Vec<f64>> = (0..4)
            .map(|_| {
                let mut x = 0.0;
                (0..1000)
                    .map(|_| {
                        let z: f64 = rng.sample(StandardNormal);
                        x = 0.95 * x + z * (1.0f64 - 0.95 * 0.95).sqrt();
                        x
                    })
                    .collect()
            })
            .collect();
        let ess = effective_sample_size(&chains);
        assert!(ess < 4000.0 / 5.0, "ess = {ess}");
    }

    #[test]
    fn degenerate_traces_give_nan_not_panic() {
        assert!(split_rhat(&[]).is_nan());
        assert!(split_rhat(&[vec![1.0, 1.0, 1.0, 1.0]]).is_nan());
        assert!(effective_sample_size(&[vec![0.5; 100]]).is_nan());
        assert!(split_rhat(&[vec![1.0, 2.0]]).is_nan());
    }
}
