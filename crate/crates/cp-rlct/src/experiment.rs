//! Experiment orchestration: cell grids, per-cell reports, TOML
//! configuration, and CSV/JSON emission.

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::bounds::{tensor_rlct_bound, RlctBound};
use crate::error::{Error, Result};
use crate::gen_error::{estimate_lambda, EstimatorConfig, InitStrategy, LambdaEstimate};
use crate::mcmc::McmcConfig;
use crate::model::PriorSpec;
use crate::seeding::{derive_seed, stream};
use crate::tensor::ModelSpec;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OutputFormat {
    Csv,
    Json,
}

impl FromStr for OutputFormat {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "csv" => Ok(OutputFormat::Csv),
            "json" => Ok(OutputFormat::Json),
            other => Err(Error::Config(format!(
                "unknown format '{other}' (expected csv or json)"
            ))),
        }
    }
}

impl fmt::Display for OutputFormat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            OutputFormat::Csv => "csv",
            OutputFormat::Json => "json",
        })
    }
}

/// Everything one experiment run needs, resolved from defaults, an optional
/// config file, and CLI overrides (in that precedence order, lowest first).
#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    pub cells: Vec<ModelSpec>,
    pub prior: PriorSpec,
    pub mcmc: McmcConfig,
    pub truth_redraws: usize,
    pub datasets_per_cell: usize,
    /// Test draws per trial for the Gₙ average.
    pub n_test: usize,
    pub master_seed: u64,
    pub workers: usize,
    pub output_path: Option<PathBuf>,
    pub format: OutputFormat,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            cells: table1_cells(),
            prior: PriorSpec::default(),
            mcmc: McmcConfig::default(),
            truth_redraws: 5,
            datasets_per_cell: 2,
            n_test: 10_000,
            master_seed: 0,
            workers: std::thread::available_parallelism().map_or(1, usize::from),
            output_path: None,
            format: OutputFormat::Csv,
        }
    }
}

/// The built-in comparison grid: I = J = K ∈ {2, 3, 4}, H = 2·H₀,
/// H₀ ∈ 1..=5, n = 100. Fifteen cells.
pub fn table1_cells() -> Vec<ModelSpec> {
    let mut cells = Vec::with_capacity(15);
    for d in [2, 3, 4] {
        for h0 in 1..=5 {
            cells.push(ModelSpec {
                dims: (d, d, d),
                rank: 2 * h0,
                true_rank: h0,
                n_samples: 100,
            });
        }
    }
    cells
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        if self.cells.is_empty() {
            return Err(Error::Config("config must list at least one cell".into()));
        }
        for (idx, cell) in self.cells.iter().enumerate() {
            cell.validate()
                .map_err(|e| Error::Config(format!("cell {idx}: {e}")))?;
            if cell.true_rank < 1 {
                return Err(Error::Config(format!(
                    "cell {idx}: H0 must be >= 1 for the RLCT bound"
                )));
            }
        }
        if self.workers < 1 {
            return Err(Error::Config("workers must be >= 1".into()));
        }
        if self.truth_redraws < 1 {
            return Err(Error::Config("truth_redraws must be >= 1".into()));
        }
        if self.datasets_per_cell < 1 {
            return Err(Error::Config("datasets_per_cell must be >= 1".into()));
        }
        if self.n_test < 1 {
            return Err(Error::Config("n_test must be >= 1".into()));
        }
        self.prior.validate()?;
        self.mcmc.validate()?;
        Ok(())
    }

    /// CI-scale profile: 3 trials per cell, 2000 test draws, 300 posterior
    /// samples, and a proportionally reduced sampler budget.
    pub fn apply_quick_profile(&mut self) {
        self.truth_redraws = 3;
        self.datasets_per_cell = 1;
        self.n_test = 2_000;
        self.mcmc.total_iters = 9_000;
        self.mcmc.burn_in = 3_000;
        self.mcmc.thin = 20;
        self.mcmc.target_samples = 300;
    }

    pub fn from_toml_path(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml_str(&text)
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        let file: ConfigFile = toml::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
        Ok(file.into_config())
    }
}

fn default_cell_n() -> usize {
    100
}

/// One `[[cells]]` table in the config file.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct CellSpec {
    i: usize,
    j: usize,
    k: usize,
    h: usize,
    h0: usize,
    #[serde(default = "default_cell_n")]
    n: usize,
}

/// On-disk config; every field optional, falling back to the shipped
/// defaults.
#[derive(Deserialize)]
#[serde(default, deny_unknown_fields)]
struct ConfigFile {
    cells: Vec<CellSpec>,
    prior: PriorSpec,
    mcmc: McmcConfig,
    truth_redraws: usize,
    datasets_per_cell: usize,
    n_test: usize,
    master_seed: u64,
    workers: usize,
    output_path: Option<String>,
    format: OutputFormat,
}

impl Default for ConfigFile {
    fn default() -> Self {
        let base = ExperimentConfig::default();
        ConfigFile {
            cells: Vec::new(),
            prior: base.prior,
            mcmc: base.mcmc,
            truth_redraws: base.truth_redraws,
            datasets_per_cell: base.datasets_per_cell,
            n_test: base.n_test,
            master_seed: base.master_seed,
            workers: base.workers,
            output_path: None,
            format: base.format,
        }
    }
}

impl ConfigFile {
    fn into_config(self) -> ExperimentConfig {
        ExperimentConfig {
            cells: self
                .cells
                .into_iter()
                .map(|c| ModelSpec {
                    dims: (c.i, c.j, c.k),
                    rank: c.h,
                    true_rank: c.h0,
                    n_samples: c.n,
                })
                .collect(),
            prior: self.prior,
            mcmc: self.mcmc,
            truth_redraws: self.truth_redraws,
            datasets_per_cell: self.datasets_per_cell,
            n_test: self.n_test,
            master_seed: self.master_seed,
            workers: self.workers,
            output_path: self.output_path.map(PathBuf::from),
            format: self.format,
        }
    }
}

/// One cell's outcome: the exact bound always, the estimate when Monte
/// Carlo ran and survived.
#[derive(Debug, Clone)]
pub struct CellReport {
    pub spec: ModelSpec,
    pub lambda_bound: RlctBound,
    pub lambda_estimate: Option<LambdaEstimate>,
    /// lambda_hat / bound when both present.
    pub tightness_ratio: Option<f64>,
    /// Divergence message when this cell's Monte Carlo failed.
    pub error: Option<String>,
}

/// Run every cell: bounds exactly, estimates by Monte Carlo unless
/// `bounds_only`. A diverged cell is reported in place (error field) without
/// aborting the others; config-level errors abort the run.
pub fn run_experiment(config: &ExperimentConfig, bounds_only: bool) -> Result<Vec<CellReport>> {
    config.validate()?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(config.workers)
        .build()
        .map_err(|e| Error::Internal(format!("could not build worker pool: {e}")))?;
    config
        .cells
        .iter()
        .enumerate()
        .map(|(idx, cell)| {
            let lambda_bound = tensor_rlct_bound(cell)?;
            if bounds_only {
                return Ok(CellReport {
                    spec: *cell,
                    lambda_bound,
                    lambda_estimate: None,
                    tightness_ratio: None,
                    error: None,
                });
            }
            let est_config = EstimatorConfig {
                truth_redraws: config.truth_redraws,
                datasets_per_cell: config.datasets_per_cell,
                n_test: config.n_test,
                seed: derive_seed(config.master_seed, stream::CELL, idx as u64),
                init: InitStrategy::NearTruth,
            };
            match pool.install(|| estimate_lambda(cell, &config.prior, &config.mcmc, &est_config))
            {
                Ok(est) => Ok(CellReport {
                    spec: *cell,
                    tightness_ratio: Some(est.lambda_hat / lambda_bound.bound),
                    lambda_estimate: Some(est),
                    lambda_bound,
                    error: None,
                }),
                Err(e) if e.is_divergence() => Ok(CellReport {
                    spec: *cell,
                    lambda_bound,
                    lambda_estimate: None,
                    tightness_ratio: None,
                    error: Some(e.to_string()),
                }),
                Err(e) => Err(e),
            }
        })
        .collect()
}

/// Shortest-roundtrip decimal form; bit-stable for identical floats.
fn fmt_f64(v: f64) -> String {
    format!("{v}")
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(fmt_f64).unwrap_or_default()
}

/// The pinned machine-readable table schema.
pub const CSV_HEADER: &str =
    "I,J,K,H,H0,n,core_term,m1,m2,m3,lambda_bound,lambda_hat,lambda_std,tightness_ratio,accept_rate,rhat";

/// Machine-formatted CSV, one row per cell. Missing estimates leave their
/// columns empty; the column set never changes.
pub fn csv_table(reports: &[CellReport]) -> String {
    let mut out = String::with_capacity(64 * (reports.len() + 1));
    out.push_str(CSV_HEADER);
    out.push('\n');
    for r in reports {
        let (i, j, k) = r.spec.dims;
        let b = &r.lambda_bound;
        let est = r.lambda_estimate.as_ref();
        let row = [
            i.to_string(),
            j.to_string(),
            k.to_string(),
            r.spec.rank.to_string(),
            r.spec.true_rank.to_string(),
            r.spec.n_samples.to_string(),
            fmt_f64(b.core_term),
            fmt_f64(b.m1),
            fmt_f64(b.m2),
            fmt_f64(b.m3),
            fmt_f64(b.bound),
            fmt_opt(est.map(|e| e.lambda_hat)),
            fmt_opt(est.map(|e| e.lambda_std)),
            fmt_opt(r.tightness_ratio),
            fmt_opt(est.map(|e| e.mean_accept_rate())),
            fmt_opt(est.map(|e| e.max_split_rhat())),
        ];
        out.push_str(&row.join(","));
        out.push('\n');
    }
    out
}

/// Stable per-cell JSON shape: the same field set regardless of outcome.
#[derive(Serialize)]
struct CellReportDto<'a> {
    i: usize,
    j: usize,
    k: usize,
    h: usize,
    h0: usize,
    n: usize,
    core_term: f64,
    m1: f64,
    m2: f64,
    m3: f64,
    lambda_bound: f64,
    half_params: f64,
    obvious_lambda1: f64,
    lambda_hat: Option<f64>,
    lambda_std: Option<f64>,
    tightness_ratio: Option<f64>,
    accept_rate: Option<f64>,
    rhat: Option<f64>,
    trial_count: Option<usize>,
    error: Option<&'a str>,
}

impl<'a> CellReportDto<'a> {
    fn new(r: &'a CellReport) -> Self {
        let est = r.lambda_estimate.as_ref();
        CellReportDto {
            i: r.spec.dims.0,
            j: r.spec.dims.1,
            k: r.spec.dims.2,
            h: r.spec.rank,
            h0: r.spec.true_rank,
            n: r.spec.n_samples,
            core_term: r.lambda_bound.core_term,
            m1: r.lambda_bound.m1,
            m2: r.lambda_bound.m2,
            m3: r.lambda_bound.m3,
            lambda_bound: r.lambda_bound.bound,
            half_params: r.lambda_bound.half_params,
            obvious_lambda1: r.lambda_bound.obvious_lambda1,
            lambda_hat: est.map(|e| e.lambda_hat),
            lambda_std: est.map(|e| e.lambda_std),
            tightness_ratio: r.tightness_ratio,
            accept_rate: est.map(|e| e.mean_accept_rate()),
            rhat: est.map(|e| e.max_split_rhat()),
            trial_count: est.map(|e| e.trials.len()),
            error: r.error.as_deref(),
        }
    }
}

/// JSON lines, one object per cell.
pub fn json_lines(reports: &[CellReport]) -> Result<String> {
    let mut out = String::new();
    for r in reports {
        let line = serde_json::to_string(&CellReportDto::new(r))
            .map_err(|e| Error::Internal(format!("report serialization failed: {e}")))?;
        out.push_str(&line);
        out.push('\n');
    }
    Ok(out)
}

#[derive(Serialize)]
struct TrialRecordDto {
    cell: usize,
    i: usize,
    j: usize,
    k: usize,
    h: usize,
    h0: usize,
    n: usize,
    redraw: usize,
    dataset: usize,
    g_n: f64,
    mc_stderr: f64,
    n_test: usize,
    accept_rate: f64,
    split_rhat: f64,
    ess: f64,
}

/// JSON lines, one object per executed trial across all cells.
pub fn trial_records_jsonl(reports: &[CellReport]) -> Result<String> {
    let mut out = String::new();
    for (cell_idx, r) in reports.iter().enumerate() {
        let Some(est) = r.lambda_estimate.as_ref() else {
            continue;
        };
        for t in &est.trials {
            let dto = TrialRecordDto {
                cell: cell_idx,
                i: r.spec.dims.0,
                j: r.spec.dims.1,
                k: r.spec.dims.2,
                h: r.spec.rank,
                h0: r.spec.true_rank,
                n: r.spec.n_samples,
                redraw: t.redraw,
                dataset: t.dataset,
                g_n: t.result.g_n,
                mc_stderr: t.result.mc_stderr,
                n_test: t.result.n_test,
                accept_rate: t.accept_rate,
                split_rhat: t.diagnostics.split_rhat,
                ess: t.diagnostics.ess,
            };
            let line = serde_json::to_string(&dto)
                .map_err(|e| Error::Internal(format!("trial serialization failed: {e}")))?;
            out.push_str(&line);
            out.push('\n');
        }
    }
    Ok(out)
}

/// Human-formatted table for stdout. Cells whose worst split-R̂ exceeds 1.2
/// are flagged with '!' (a warning, not a failure).
pub fn render_table(reports: &[CellReport]) -> String {
    let mut out = String::new();
    out.push_str(
        "  I  J  K   H  H0     n    bound  lambda_hat  lambda_std   ratio  accept   rhat\n",
    );
    let mut flagged = false;
    for r in reports {
        let (i, j, k) = r.spec.dims;
        out.push_str(&format!(
            "{i:>3}{j:>3}{k:>3}{h:>4}{h0:>4}{n:>6}{bound:>9.2}",
            h = r.spec.rank,
            h0 = r.spec.true_rank,
            n = r.spec.n_samples,
            bound = r.lambda_bound.bound,
        ));
        match (&r.lambda_estimate, &r.error) {
            (Some(est), _) => {
                let rhat = est.max_split_rhat();
                let warn = if rhat.is_finite() && rhat > 1.2 {
                    flagged = true;
                    " !"
                } else {
                    ""
                };
                out.push_str(&format!(
                    "{:>12.3}{:>12.3}{:>8.3}{:>8.3}{:>7.2}{warn}\n",
                    est.lambda_hat,
                    est.lambda_std,
                    r.tightness_ratio.unwrap_or(f64::NAN),
                    est.mean_accept_rate(),
                    rhat,
                ));
            }
            (None, Some(msg)) => out.push_str(&format!("  {msg}\n")),
            (None, None) => out.push_str("           -           -       -       -      -\n"),
        }
    }
    if flagged {
        out.push_str("! split-rhat above 1.2: treat that cell's estimate with suspicion\n");
    }
    out
}

/// Write the table file (CSV or JSON lines), per-trial records alongside it,
/// and chain traces when they were recorded.
pub fn write_outputs(config: &ExperimentConfig, reports: &[CellReport]) -> Result<()> {
    if let Some(path) = &config.output_path {
        let table = match config.format {
            OutputFormat::Csv => csv_table(reports),
            OutputFormat::Json => json_lines(reports)?,
        };
        fs::write(path, table)?;
        let trials = trial_records_jsonl(reports)?;
        if !trials.is_empty() {
            fs::write(trials_path(path), trials)?;
        }
    }
    if config.mcmc.record_trace {
        let dir = match &config.output_path {
            Some(path) => path.with_extension("traces"),
            None => PathBuf::from("chain_traces"),
        };
        write_chain_traces(&dir, reports)?;
    }
    Ok(())
}

/// `results.csv` → `results.trials.jsonl`.
pub fn trials_path(table_path: &Path) -> PathBuf {
    table_path.with_extension("trials.jsonl")
}

fn write_chain_traces(dir: &Path, reports: &[CellReport]) -> Result<()> {
    fs::create_dir_all(dir)?;
    for (cell_idx, r) in reports.iter().enumerate() {
        let Some(est) = r.lambda_estimate.as_ref() else {
            continue;
        };
        for t in &est.trials {
            let Some(traces) = t.traces.as_ref() else {
                continue;
            };
            for (chain, trace) in traces.iter().enumerate() {
                let mut out = String::from("iteration,log_posterior,step,accepted\n");
                for row in trace {
                    out.push_str(&format!(
                        "{},{},{},{}\n",
                        row.iteration,
                        fmt_f64(row.log_posterior),
                        fmt_f64(row.step),
                        row.accepted as u8
                    ));
                }
                let name = format!(
                    "cell{cell_idx}_redraw{}_data{}_chain{chain}.csv",
                    t.redraw, t.dataset
                );
                fs::write(dir.join(name), out)?;
            }
        }
    }
    Ok(())
}
