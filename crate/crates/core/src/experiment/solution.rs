use std::time::Instant;

use crate::error::{Error, Result};
use crate::norms::NodeWindow;
use crate::rde::{apriori_bound_check, integral_distance_bound, solution_distance, solve_rde, VectorField};

use super::{
    finish, fraction, map_seeds, monotone_gate, non_increasing, strictly_decreasing, summarize, ConvergenceReport,
    DeltaStats, ExperimentConfig, Gate, Record, RunOptions, Setup,
};

pub const SUP: &str = "sup";
pub const PVAR: &str = "pvar";
pub const REMVAR: &str = "remvar";
pub const INTEGRAL_LHS: &str = "integral_lhs";
pub const INTEGRAL_RHS: &str = "integral_rhs";
pub const APRIORI_SUP_RATIO: &str = "apriori_sup_ratio";
pub const APRIORI_VAR_RATIO: &str = "apriori_var_ratio";

#[derive(Default)]
struct SeedResult {
    /// `None` at a δ whose solve blew up.
    dist: Vec<Option<[f64; 5]>>,
    /// Bound/actual ratios for the fBm-driven solution and for the smallest δ.
    apriori: Vec<(f64, [f64; 2])>,
    truth_blew_up: bool,
}

fn is_blow_up<T>(r: &Result<T>) -> bool {
    matches!(r, Err(Error::BlowUp { .. }))
}

fn one_seed(setup: &Setup, vf: &VectorField, seed: u64) -> Result<SeedResult> {
    let cfg = &setup.cfg;
    let stride = cfg.metric_stride;
    let p = cfg.p();
    let y0 = cfg.initial_state();
    let omega = setup.omega(seed)?;
    let truth = setup.true_lift(&omega)?;
    let y = solve_rde(vf, &truth, &y0);
    if is_blow_up(&y) {
        return Ok(SeedResult { dist: vec![None; setup.ladder.len()], truth_blew_up: true, ..Default::default() });
    }
    let y = y?;
    let (yc, tc) = (y.coarsen(stride)?, truth.coarsen(stride)?);
    let window = NodeWindow::full(tc.grid());
    let mut out = SeedResult::default();
    let ap = apriori_bound_check(&y, &truth, vf, p, cfg.eta, cfg.c_p)?;
    out.apriori.push((0.0, [ap.sup_ratio, ap.var_ratio]));
    for (i, dp) in setup.ladder.iter().enumerate() {
        let wz = setup.wz_lift(&omega, dp)?;
        let yd = solve_rde(vf, &wz, &y0);
        if is_blow_up(&yd) {
            out.dist.push(None);
            continue;
        }
        let yd = yd?;
        if i + 1 == setup.ladder.len() {
            let ap = apriori_bound_check(&yd, &wz, vf, p, cfg.eta, cfg.c_p)?;
            out.apriori.push((dp.delta(), [ap.sup_ratio, ap.var_ratio]));
        }
        let (ydc, wzc) = (yd.coarsen(stride)?, wz.coarsen(stride)?);
        let d = solution_distance(&yc, &tc, &ydc, &wzc, p)?;
        let b = integral_distance_bound(vf, &yc, &tc, &ydc, &wzc, p, window, cfg.c_p)?;
        out.dist.push(Some([d.sup, d.pvar, d.remvar, b.lhs, b.rhs]));
    }
    Ok(out)
}

pub(crate) fn run(setup: &Setup, opts: RunOptions) -> Result<ConvergenceReport> {
    let started = Instant::now();
    let cfg = &setup.cfg;
    let vf = VectorField::builtin(&cfg.vector_field, cfg.m, cfg.d)?;
    let results =
        map_seeds(opts, setup.seeds(), |s| one_seed(setup, &vf, s))?.into_iter().collect::<Result<Vec<_>>>()?;
    let n_seeds = results.len();

    let names = [SUP, PVAR, REMVAR, INTEGRAL_LHS, INTEGRAL_RHS];
    // rows[c][seed]: the full ladder of component c, or None if any δ blew up
    let rows: Vec<Vec<Option<Vec<f64>>>> = (0..names.len())
        .map(|c| results.iter().map(|r| r.dist.iter().map(|d| d.map(|v| v[c])).collect::<Option<Vec<f64>>>()).collect())
        .collect();

    let mut records = Vec::new();
    for (seed, r) in setup.seeds().zip(&results) {
        for (c, name) in names.iter().enumerate() {
            for (dp, d) in setup.ladder.iter().zip(&r.dist) {
                if let Some(v) = d {
                    records.push(Record { seed, delta: dp.delta(), metric: name.to_string(), value: v[c] });
                }
            }
        }
        for &(delta, ratios) in &r.apriori {
            for (name, v) in [APRIORI_SUP_RATIO, APRIORI_VAR_RATIO].iter().zip(ratios) {
                records.push(Record { seed, delta, metric: name.to_string(), value: v });
            }
        }
    }

    let joint_count =
        (0..n_seeds).filter(|&s| (0..3).all(|c| rows[c][s].as_deref().is_some_and(strictly_decreasing))).count();
    let joint = joint_count as f64 / n_seeds.max(1) as f64;
    let mut metrics = Vec::new();
    for (c, name) in names.iter().enumerate() {
        let mono = if c == 4 { fraction(&rows[c], non_increasing) } else { fraction(&rows[c], strictly_decreasing) };
        metrics.push(summarize(setup, name, &rows[c], None, Some(mono)));
    }

    let smallest = setup.ladder.len() - 1;
    let sup_small: Vec<f64> = rows[0].iter().flatten().map(|r| r[smallest]).collect();
    let sup_moment = if sup_small.len() == n_seeds {
        DeltaStats::from_values(0.0, 0, &sup_small, cfg.moment_order).moment
    } else {
        f64::INFINITY
    };
    let gates = vec![
        monotone_gate(
            "solution_monotone",
            joint,
            cfg.monotone_fraction,
            n_seeds,
            "sup, p-var and remainder distances all strictly decreasing",
        ),
        Gate {
            name: "sup_ceiling".into(),
            passed: sup_moment <= cfg.sup_ceiling,
            observed: sup_moment,
            band: format!(
                "L^{} moment of the smallest-delta sup distance <= {}",
                cfg.moment_order, cfg.sup_ceiling
            ),
            sample_size: sup_small.len(),
        },
    ];

    let mut blow_ups: Vec<(usize, usize)> = setup.ladder.iter().map(|dp| (dp.grid_multiple(), 0)).collect();
    for r in &results {
        for (slot, d) in blow_ups.iter_mut().zip(&r.dist) {
            slot.1 += usize::from(d.is_none());
        }
    }
    let truth_blow_ups = results.iter().filter(|r| r.truth_blew_up).count();
    let violations = results.iter().flat_map(|r| r.dist.iter().flatten()).filter(|v| v[3] > v[4]).count();
    let falsified =
        results.iter().flat_map(|r| &r.apriori).filter(|(_, ratios)| ratios.iter().any(|&x| x < 1.0)).count();
    let notes = vec![
        format!("{truth_blow_ups} seeds blew up under the fBm lift"),
        format!("integral bound with C_p = {}: {violations} violations (lhs > rhs)", cfg.c_p),
        format!("a-priori bounds with eta = {}, C_p = {}: {falsified} cases with ratio < 1", cfg.eta, cfg.c_p),
    ];
    Ok(finish(setup, "solution", metrics, gates, blow_ups, notes, records, started))
}

/// Paired distances between solutions driven by the fBm lift and by each Wong-Zakai lift.
pub fn run_solution_convergence(cfg: &ExperimentConfig, opts: RunOptions) -> Result<ConvergenceReport> {
    run(&Setup::new(cfg)?, opts)
}
