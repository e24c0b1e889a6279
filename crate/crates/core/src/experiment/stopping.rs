use std::time::Instant;

use crate::error::Result;
use crate::lift::GridRoughPath;
use crate::norms::{greedy_stopping_times, homogeneous_pvar_norm, NodeWindow, StoppingTimes};

use super::{
    finish, fraction, map_seeds, monotone_gate, non_increasing, push_records, summarize, ConvergenceReport,
    ExperimentConfig, Gate, Record, RunOptions, Setup,
};

pub const DISPLACEMENT: &str = "tau_displacement";
pub const COUNT: &str = "n_intervals";

/// `max_i |τ_i^a - τ_i^b|`, padding the shorter list with the window end.
pub fn stopping_time_displacement(a: &StoppingTimes, b: &StoppingTimes) -> f64 {
    let end = a.times.last().copied().unwrap_or(0.0).max(b.times.last().copied().unwrap_or(0.0));
    let len = a.times.len().max(b.times.len());
    let at = |s: &StoppingTimes, i: usize| s.times.get(i).copied().unwrap_or(end);
    (0..len).map(|i| (at(a, i) - at(b, i)).abs()).fold(0.0, f64::max)
}

struct SeedResult {
    displacement: Vec<f64>,
    counts: Vec<f64>,
    truth_count: usize,
    /// Runs violating `N ≤ 1 + η^{-p} ⦀𝛚⦀^p`, with the fBm lift counted as one run.
    bound_violations: usize,
}

fn times_and_bound(rp: &GridRoughPath, eta: f64, p: f64) -> Result<(StoppingTimes, bool)> {
    let st = greedy_stopping_times(rp, eta, p, NodeWindow::full(rp.grid()))?;
    let norm = homogeneous_pvar_norm(rp, p)?;
    let bound = 1.0 + eta.powf(-p) * norm.powf(p);
    let within = st.count() as f64 <= bound * (1.0 + 1e-12);
    Ok((st, within))
}

fn one_seed(setup: &Setup, seed: u64) -> Result<SeedResult> {
    let cfg = &setup.cfg;
    let omega = setup.omega(seed)?;
    let (truth, ok) = times_and_bound(&setup.true_lift(&omega)?, cfg.eta, cfg.p())?;
    let mut out = SeedResult {
        displacement: vec![],
        counts: vec![],
        truth_count: truth.count(),
        bound_violations: usize::from(!ok),
    };
    for dp in &setup.ladder {
        let (st, ok) = times_and_bound(&setup.wz_lift(&omega, dp)?, cfg.eta, cfg.p())?;
        out.displacement.push(stopping_time_displacement(&truth, &st));
        out.counts.push(st.count() as f64);
        out.bound_violations += usize::from(!ok);
    }
    Ok(out)
}

pub(crate) fn run(setup: &Setup, opts: RunOptions) -> Result<ConvergenceReport> {
    let started = Instant::now();
    let cfg = &setup.cfg;
    let results = map_seeds(opts, setup.seeds(), |s| one_seed(setup, s))?.into_iter().collect::<Result<Vec<_>>>()?;
    let n_seeds = results.len();

    let mut records = Vec::new();
    for (seed, r) in setup.seeds().zip(&results) {
        push_records(setup, &mut records, seed, DISPLACEMENT, &r.displacement);
        push_records(setup, &mut records, seed, COUNT, &r.counts);
        records.push(Record { seed, delta: 0.0, metric: COUNT.into(), value: r.truth_count as f64 });
    }
    let disp: Vec<Option<Vec<f64>>> = results.iter().map(|r| Some(r.displacement.clone())).collect();
    let counts: Vec<Option<Vec<f64>>> = results.iter().map(|r| Some(r.counts.clone())).collect();
    let frac = fraction(&disp, non_increasing);
    let metrics = vec![summarize(setup, DISPLACEMENT, &disp, None, Some(frac)), summarize(setup, COUNT, &counts, None, None)];

    let violations: usize = results.iter().map(|r| r.bound_violations).sum();
    let runs = n_seeds * (setup.ladder.len() + 1);
    let gates = vec![
        monotone_gate("displacement_monotone", frac, cfg.monotone_fraction, n_seeds, "max displacement non-increasing"),
        Gate {
            name: "count_bound".into(),
            passed: violations == 0,
            observed: violations as f64,
            band: "no run with N > 1 + eta^-p |||omega|||^p".into(),
            sample_size: runs,
        },
    ];
    let mean_truth = results.iter().map(|r| r.truth_count as f64).sum::<f64>() / n_seeds.max(1) as f64;
    let notes = vec![format!("mean number of stopping intervals under the fBm lift: {mean_truth:.2} (eta = {})", cfg.eta)];
    Ok(finish(setup, "stopping", metrics, gates, vec![], notes, records, started))
}

/// Greedy stopping times of the fBm lift against those of each Wong-Zakai lift.
pub fn run_stopping_time_convergence(cfg: &ExperimentConfig, opts: RunOptions) -> Result<ConvergenceReport> {
    run(&Setup::new(cfg)?, opts)
}
