use std::time::Instant;

use crate::error::Result;
use crate::lift::euclid_diff;
use crate::norms::{rho_alpha_metric, rho_pvar_metric};
use crate::wongzakai::w_delta;

use super::{
    finish, fraction, map_seeds, monotone_gate, push_records, strictly_decreasing, summarize, ConvergenceReport,
    ExperimentConfig, Gate, RunOptions, Setup,
};

pub const LEVEL1: &str = "level1_fixed_time";
pub const RHO_BETA: &str = "rho_beta";
pub const RHO_PVAR: &str = "rho_pvar";

struct SeedResult {
    level1: Vec<f64>,
    rho_beta: Vec<f64>,
    rho_pvar: Vec<f64>,
}

fn one_seed(setup: &Setup, seed: u64) -> Result<SeedResult> {
    let cfg = &setup.cfg;
    let omega = setup.omega(seed)?;
    let n = setup.base.n_steps();
    let truth = setup.true_lift(&omega)?.coarsen(cfg.metric_stride)?;
    let mut out = SeedResult { level1: vec![], rho_beta: vec![], rho_pvar: vec![] };
    for dp in &setup.ladder {
        let w = w_delta(&omega, dp)?;
        out.level1.push(euclid_diff(omega.value(n), w.value(n)));
        let wz = setup.wz_lift(&omega, dp)?.coarsen(cfg.metric_stride)?;
        out.rho_beta.push(rho_alpha_metric(&wz, &truth, cfg.beta)?);
        out.rho_pvar.push(rho_pvar_metric(&wz, &truth, cfg.p())?);
    }
    Ok(out)
}

pub(crate) fn run(setup: &Setup, opts: RunOptions) -> Result<ConvergenceReport> {
    let started = Instant::now();
    let cfg = &setup.cfg;
    let results = map_seeds(opts, setup.seeds(), |s| one_seed(setup, s))?.into_iter().collect::<Result<Vec<_>>>()?;

    let mut records = Vec::new();
    for (seed, r) in setup.seeds().zip(&results) {
        push_records(setup, &mut records, seed, LEVEL1, &r.level1);
        push_records(setup, &mut records, seed, RHO_BETA, &r.rho_beta);
        push_records(setup, &mut records, seed, RHO_PVAR, &r.rho_pvar);
    }
    let rows = |f: fn(&SeedResult) -> &Vec<f64>| results.iter().map(|r| Some(f(r).clone())).collect::<Vec<_>>();
    let (l1, rb, rp) = (rows(|r| &r.level1), rows(|r| &r.rho_beta), rows(|r| &r.rho_pvar));
    let metric_rate = cfg.hurst - cfg.beta_prime;
    let rb_frac = fraction(&rb, strictly_decreasing);
    let rp_frac = fraction(&rp, strictly_decreasing);
    let metrics = vec![
        summarize(setup, LEVEL1, &l1, Some(cfg.hurst), None),
        summarize(setup, RHO_BETA, &rb, Some(metric_rate), Some(rb_frac)),
        summarize(setup, RHO_PVAR, &rp, Some(metric_rate), Some(rp_frac)),
    ];

    let (lo, hi) = ((1.0 - cfg.slope_band) * cfg.hurst, (1.0 + cfg.slope_band) * cfg.hurst);
    let slope = metrics[0].slope.map(|f| f.slope);
    let gates = vec![
        Gate {
            name: "level1_slope".into(),
            passed: slope.is_some_and(|s| (lo..=hi).contains(&s)),
            observed: slope.unwrap_or(f64::NAN),
            band: format!("RMS slope in [{lo:.4}, {hi:.4}]"),
            sample_size: results.len(),
        },
        monotone_gate("rho_beta_monotone", rb_frac, cfg.monotone_fraction, results.len(), "rho_beta strictly decreasing"),
    ];
    let notes = vec![format!(
        "metric-level slopes are reported against the rate H - beta' = {metric_rate:.4} but not gated; rho_pvar \
         strictly decreasing in {:.1}% of seeds",
        100.0 * rp_frac
    )];
    Ok(finish(setup, "noise", metrics, gates, vec![], notes, records, started))
}

/// Level-1 fixed-time rate and rough-path metric ladders.
pub fn run_noise_convergence(cfg: &ExperimentConfig, opts: RunOptions) -> Result<ConvergenceReport> {
    run(&Setup::new(cfg)?, opts)
}
