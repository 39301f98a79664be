//! Estimate the learning coefficient of one model shape by Monte Carlo and
//! compare it to the exact upper bound.
//!
//! Reduced budget so it finishes in seconds; expect a noisier estimate than
//! the full experiment profile.

use cp_rlct::{
    estimate_lambda, tensor_rlct_bound, EstimatorConfig, InitStrategy, McmcConfig, ModelSpec,
    PriorSpec,
};

fn main() -> cp_rlct::Result<()> {
    let spec = ModelSpec::new((2, 2, 2), 2, 1, 100)?;
    let bound = tensor_rlct_bound(&spec)?;

    let mcmc = McmcConfig {
        total_iters: 12_000,
        burn_in: 4_000,
        thin: 16,
        target_samples: 500,
        chains: 4,
        ..McmcConfig::default()
    };
    let config = EstimatorConfig {
        truth_redraws: 3,
        datasets_per_cell: 2,
        n_test: 4_000,
        seed: 17,
        init: InitStrategy::NearTruth,
    };
    let est = estimate_lambda(&spec, &PriorSpec::default(), &mcmc, &config)?;

    println!(
        "I=J=K=2, H=2, H0=1, n={} ({} trials)",
        spec.n_samples,
        est.trials.len()
    );
    println!(
        "lambda_hat  = {:.3} +- {:.3} (trial spread)",
        est.lambda_hat,
        est.trial_stderr()
    );
    println!("bound       = {}", bound.bound);
    println!("half_params = {} (regular-model reference)", bound.half_params);
    println!(
        "mean accept = {:.2}   worst split-rhat = {:.3}",
        est.mean_accept_rate(),
        est.max_split_rhat()
    );
    Ok(())
}
