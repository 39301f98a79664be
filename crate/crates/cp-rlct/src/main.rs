use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use cp_rlct::experiment::{render_table, write_outputs};
use cp_rlct::{
    run_experiment, table1_cells, tensor_rlct_bound, ExperimentConfig, ModelSpec, Result,
};

#[derive(Parser)]
#[command(
    name = "cp-rlct",
    version,
    about = "Exact RLCT upper bounds and Monte Carlo generalization-error estimates for CP tensor models"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Print the exact bound and its ingredients for one model shape.
    Bound {
        i: usize,
        j: usize,
        k: usize,
        /// Model rank H.
        h: usize,
        /// True rank H0 (>= 1).
        h0: usize,
    },
    /// Run the built-in 15-cell comparison grid (I=J=K in 2..4, H=2*H0).
    Table1(Table1Args),
    /// Run the cell grid described by a TOML config file.
    Experiment(ExperimentArgs),
}

#[derive(Args)]
struct Table1Args {
    /// Optional config file for prior/sampler/budget settings; the cell
    /// list is always replaced by the built-in grid.
    #[arg(long)]
    config: Option<PathBuf>,
    #[command(flatten)]
    common: CommonArgs,
}

#[derive(Args)]
struct ExperimentArgs {
    /// TOML config file listing the cells to run.
    #[arg(long)]
    config: PathBuf,
    #[command(flatten)]
    common: CommonArgs,
}

#[derive(Args)]
struct CommonArgs {
    /// Master seed (overrides the config file).
    #[arg(long)]
    seed: Option<u64>,
    /// Worker thread count (overrides the config file).
    #[arg(long)]
    workers: Option<usize>,
    /// Write the result table to this file.
    #[arg(long)]
    output: Option<PathBuf>,
    /// Table file format: csv or json.
    #[arg(long)]
    format: Option<String>,
    /// Skip Monte Carlo and report exact bounds only.
    #[arg(long)]
    bounds_only: bool,
    /// Reduced-budget profile for smoke runs.
    #[arg(long)]
    quick: bool,
    /// Record per-chain traces and write them next to the output table.
    #[arg(long)]
    dump_chains: bool,
}

fn main() {
    std::process::exit(run_cli());
}

fn run_cli() -> i32 {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = e.print();
            return code;
        }
    };
    let outcome = match cli.command {
        Command::Bound { i, j, k, h, h0 } => cmd_bound(i, j, k, h, h0).map(|()| false),
        Command::Table1(args) => {
            resolve_config(args.config.as_deref(), &args.common, true)
                .and_then(|config| execute(&config, args.common.bounds_only))
        }
        Command::Experiment(args) => {
            resolve_config(Some(&args.config), &args.common, false)
                .and_then(|config| execute(&config, args.common.bounds_only))
        }
    };
    match outcome {
        Ok(false) => 0,
        Ok(true) => 2,
        Err(e) => {
            eprintln!("error: {e}");
            if e.is_divergence() {
                2
            } else {
                1
            }
        }
    }
}

fn cmd_bound(i: usize, j: usize, k: usize, h: usize, h0: usize) -> Result<()> {
    let spec = ModelSpec {
        dims: (i, j, k),
        rank: h,
        true_rank: h0,
        n_samples: 1,
    };
    let b = tensor_rlct_bound(&spec)?;
    let (which, residual) = b.min_residual();
    println!("I={i} J={j} K={k} H={h} H0={h0}");
    println!("core_term        {}", b.core_term);
    println!("m1               {}", b.m1);
    println!("m2               {}", b.m2);
    println!("m3               {}", b.m3);
    println!("min residual     m{which} = {residual}");
    println!("bound            {}", b.bound);
    println!("half_params      {}", b.half_params);
    println!("obvious_lambda1  {}", b.obvious_lambda1);
    Ok(())
}

/// Defaults, then config file, then flags — later layers win. `table1`
/// always pins the cell list to the built-in grid.
fn resolve_config(
    config_path: Option<&Path>,
    common: &CommonArgs,
    force_builtin_cells: bool,
) -> Result<ExperimentConfig> {
    let mut config = match config_path {
        Some(path) => ExperimentConfig::from_toml_path(path)?,
        None => ExperimentConfig::default(),
    };
    if force_builtin_cells {
        config.cells = table1_cells();
    }
    if common.quick {
        config.apply_quick_profile();
    }
    if let Some(seed) = common.seed {
        config.master_seed = seed;
    }
    if let Some(workers) = common.workers {
        config.workers = workers;
    }
    if let Some(output) = &common.output {
        config.output_path = Some(output.clone());
    }
    if let Some(format) = &common.format {
        config.format = format.parse()?;
    }
    if common.dump_chains {
        config.mcmc.record_trace = true;
    }
    Ok(config)
}

/// Returns whether any cell diverged (exit code 2).
fn execute(config: &ExperimentConfig, bounds_only: bool) -> Result<bool> {
    let reports = run_experiment(config, bounds_only)?;
    print!("{}", render_table(&reports));
    write_outputs(config, &reports)?;
    let mut diverged = false;
    for r in &reports {
        if let Some(msg) = &r.error {
            diverged = true;
            let (i, j, k) = r.spec.dims;
            eprintln!(
                "cell I={i} J={j} K={k} H={} H0={} failed: {msg}",
                r.spec.rank, r.spec.true_rank
            );
        }
    }
    Ok(diverged)
}
