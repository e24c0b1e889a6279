//! Monte-Carlo convergence experiments.
//!
//! Every experiment draws one fBm path per seed on a grid extended far enough
//! to the right for the largest δ, then compares the lift of that path with
//! the Wong-Zakai lifts along the whole δ ladder (paired design). Seeds run in
//! parallel; results are collected in seed order, so output does not depend on
//! the thread count.

mod config;
mod noise;
mod report;
mod solution;
mod stopping;

use std::time::Instant;

use rayon::prelude::*;

pub use config::ExperimentConfig;
pub use noise::run_noise_convergence;
pub use report::{
    fit_log_log, records_csv, ConvergenceReport, DeltaStats, Gate, MetricSummary, Record, SlopeFit, SuiteReport,
    CSV_HEADER,
};
pub use solution::run_solution_convergence;
pub use stopping::run_stopping_time_convergence;

use crate::error::{Error, Result};
use crate::fbm::{FbmSampler, SamplePath, TimeGrid};
use crate::lift::{lift_left_riemann, GridRoughPath};
use crate::wongzakai::{ww_delta, DeltaParam};

/// Experiment names accepted in configs and on the command line.
pub const EXPERIMENTS: &[(&str, &str)] = &[
    ("noise", "distance between the fBm lift and its Wong-Zakai approximation along the δ ladder"),
    ("solution", "distance between RDE solutions driven by the fBm lift and by the Wong-Zakai lift"),
    ("stopping", "displacement of greedy stopping times under the Wong-Zakai approximation"),
    ("suite", "all of the above with one shared configuration"),
];

/// Execution settings that do not affect results.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct RunOptions {
    /// Worker threads; `None` uses rayon's default.
    pub threads: Option<usize>,
}

/// Sampler and ladder shared by all seeds of a run.
pub(crate) struct Setup {
    pub cfg: ExperimentConfig,
    pub base: TimeGrid,
    pub sampler: FbmSampler,
    /// Largest δ first.
    pub ladder: Vec<DeltaParam>,
}

impl Setup {
    pub fn new(cfg: &ExperimentConfig) -> Result<Self> {
        cfg.validate()?;
        let base = TimeGrid::new(cfg.t_min, cfg.t_max, cfg.grid_n)?;
        let k_max = *cfg.delta_ladder.iter().max().expect("validated non-empty");
        let sampler = FbmSampler::new(base.extended(k_max), cfg.hurst)?;
        let mut multiples = cfg.delta_ladder.clone();
        multiples.sort_unstable_by(|a, b| b.cmp(a));
        let ladder = multiples.into_iter().map(|k| DeltaParam::from_multiple(&base, k)).collect::<Result<_>>()?;
        Ok(Setup { cfg: cfg.clone(), base, sampler, ladder })
    }

    pub fn omega(&self, seed: u64) -> Result<SamplePath> {
        self.sampler.sample(self.cfg.d, self.cfg.master_seed, seed)
    }

    /// Lift of `ω` restricted to the base grid.
    pub fn true_lift(&self, omega: &SamplePath) -> Result<GridRoughPath> {
        lift_left_riemann(omega).window(0, self.base.n_steps())
    }

    /// `(W_δ, 𝕎_δ)` restricted to the base grid.
    pub fn wz_lift(&self, omega: &SamplePath, dp: &DeltaParam) -> Result<GridRoughPath> {
        ww_delta(omega, dp)?.window(0, self.base.n_steps())
    }

    pub fn seeds(&self) -> std::ops::Range<u64> {
        0..self.cfg.n_seeds as u64
    }
}

/// Map `f` over seeds in parallel, keeping seed order.
pub(crate) fn map_seeds<T: Send>(
    opts: RunOptions,
    seeds: std::ops::Range<u64>,
    f: impl Fn(u64) -> T + Sync + Send,
) -> Result<Vec<T>> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(t) = opts.threads {
        builder = builder.num_threads(t.max(1));
    }
    let pool = builder.build().map_err(|e| Error::Io(format!("thread pool: {e}")))?;
    Ok(pool.install(|| seeds.into_par_iter().map(f).collect()))
}

/// Strictly decreasing along the sequence; a run of exact zeros also counts.
pub(crate) fn strictly_decreasing(values: &[f64]) -> bool {
    values.windows(2).all(|w| w[1] < w[0] || (w[0] == 0.0 && w[1] == 0.0))
}

pub(crate) fn non_increasing(values: &[f64]) -> bool {
    values.windows(2).all(|w| w[1] <= w[0])
}

/// Fraction of rows (seeds) satisfying `pred`; rows with missing values fail.
pub(crate) fn fraction(rows: &[Option<Vec<f64>>], pred: impl Fn(&[f64]) -> bool) -> f64 {
    if rows.is_empty() {
        return 0.0;
    }
    rows.iter().filter(|r| r.as_deref().is_some_and(&pred)).count() as f64 / rows.len() as f64
}

/// Summaries for one metric from per-seed ladders (largest δ first).
pub(crate) fn summarize(
    setup: &Setup,
    metric: &str,
    rows: &[Option<Vec<f64>>],
    predicted_slope: Option<f64>,
    monotone: Option<f64>,
) -> MetricSummary {
    let per_delta: Vec<DeltaStats> = setup
        .ladder
        .iter()
        .enumerate()
        .map(|(i, dp)| {
            let vals: Vec<f64> = rows.iter().flatten().map(|r| r[i]).collect();
            DeltaStats::from_values(dp.delta(), dp.grid_multiple(), &vals, setup.cfg.moment_order)
        })
        .collect();
    let x: Vec<f64> = per_delta.iter().map(|s| s.delta).collect();
    let y: Vec<f64> = per_delta.iter().map(|s| s.rms).collect();
    MetricSummary { metric: metric.into(), per_delta, slope: fit_log_log(&x, &y), predicted_slope, monotone_fraction: monotone }
}

/// CSV records for one metric; seeds without a value are skipped.
pub(crate) fn push_records(setup: &Setup, out: &mut Vec<Record>, seed: u64, metric: &str, row: &[f64]) {
    for (dp, &v) in setup.ladder.iter().zip(row) {
        out.push(Record { seed, delta: dp.delta(), metric: metric.into(), value: v });
    }
}

pub(crate) fn monotone_gate(name: &str, observed: f64, required: f64, seeds: usize, what: &str) -> Gate {
    Gate {
        name: name.into(),
        passed: observed >= required,
        observed,
        band: format!("fraction of seeds with {what} >= {required}"),
        sample_size: seeds,
    }
}

#[allow(clippy::too_many_arguments)]
pub(crate) fn finish(
    setup: &Setup,
    name: &str,
    metrics: Vec<MetricSummary>,
    gates: Vec<Gate>,
    blow_ups: Vec<(usize, usize)>,
    mut notes: Vec<String>,
    mut records: Vec<Record>,
    started: Instant,
) -> ConvergenceReport {
    if setup.ladder.len() < 2 {
        notes.push("insufficient ladder: at least two δ values are needed for a slope".into());
    }
    // seed order, then ladder order, then metric name: independent of scheduling
    let pos = |d: f64| setup.ladder.iter().position(|p| p.delta() == d).unwrap_or(usize::MAX);
    records.sort_by(|a, b| (a.seed, pos(a.delta), &a.metric).cmp(&(b.seed, pos(b.delta), &b.metric)));
    let passed = !gates.is_empty() && gates.iter().all(|g| g.passed);
    ConvergenceReport {
        experiment: name.into(),
        config: setup.cfg.clone(),
        metrics,
        gates,
        blow_ups,
        notes,
        passed,
        runtime_secs: started.elapsed().as_secs_f64(),
        records,
    }
}

/// Run the experiment named in the config; `suite` runs all three.
pub fn run_experiment(cfg: &ExperimentConfig, opts: RunOptions) -> Result<SuiteReport> {
    let setup = Setup::new(cfg)?;
    let reports = match cfg.experiment.as_str() {
        "noise" => vec![noise::run(&setup, opts)?],
        "solution" => vec![solution::run(&setup, opts)?],
        "stopping" => vec![stopping::run(&setup, opts)?],
        "suite" => vec![noise::run(&setup, opts)?, solution::run(&setup, opts)?, stopping::run(&setup, opts)?],
        other => return Err(Error::UnknownExperiment(other.into())),
    };
    Ok(SuiteReport::new(reports))
}

/// Load a config file, run it and write reports to the configured output directory if any.
pub fn run_suite(config_path: &std::path::Path, opts: RunOptions) -> Result<SuiteReport> {
    let cfg = ExperimentConfig::from_path(config_path)?;
    let report = run_experiment(&cfg, opts)?;
    if let Some(dir) = &cfg.out {
        report.write(dir)?;
    }
    Ok(report)
}
