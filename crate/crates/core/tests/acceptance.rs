//! Acceptance suite: one line per criterion, non-zero exit if any fails.
//!
//! Run with `cargo test -p roughwz --test acceptance`.

use std::f64::consts::E;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use roughwz::experiment::{
    run_experiment, run_noise_convergence, run_solution_convergence, run_stopping_time_convergence, ConvergenceReport,
    ExperimentConfig, RunOptions,
};
use roughwz::fbm::{fbm_covariance, FbmSampler, SamplePath, TimeGrid};
use roughwz::lift::{chen_combine, geometricity_residual, lift_left_riemann, lift_smooth_quadrature, GridRoughPath};
use roughwz::norms::{greedy_stopping_times, homogeneous_pvar_norm, pvar_level2, pvar_of_values, pvar_seminorm_window, NodeWindow};
use roughwz::rde::{solve_rde, VectorField};
use roughwz::rds::{cocycle_residual, CocycleProbe};
use roughwz::wongzakai::{w_delta, DeltaParam};
use roughwz::experiment::fit_log_log;
use roughwz::fbm::{sample_fbm, wiener_shift, FbmParams};

type Outcome = Result<String, String>;

fn ensure(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn rel_err(a: &[f64], b: &[f64]) -> f64 {
    let scale = a.iter().chain(b).fold(1.0f64, |m, v| m.max(v.abs()));
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max) / scale
}

/// Random trigonometric/polynomial path with its exact derivative.
fn smooth_path(rng: &mut ChaCha8Rng, d: usize, n: usize) -> (SamplePath, Vec<f64>) {
    let g = TimeGrid::new(0.0, 1.0, n).unwrap();
    let coef: Vec<[f64; 5]> = (0..d).map(|_| std::array::from_fn(|_| rng.random_range(-2.0..2.0))).collect();
    let eval = |t: f64, c: &[f64; 5]| -> (f64, f64) {
        let w = 3.0 * c[4];
        let v = c[0] * t + c[1] * t * t + c[2] * t * t * t + c[3] * ((w * t).sin());
        let dv = c[0] + 2.0 * c[1] * t + 3.0 * c[2] * t * t + c[3] * w * (w * t).cos();
        (v, dv)
    };
    let path = SamplePath::from_fn(g, d, |t, o| o.iter_mut().zip(&coef).for_each(|(x, c)| *x = eval(t, c).0)).unwrap();
    let deriv = g.times().flat_map(|t| coef.iter().map(move |c| eval(t, c).1)).collect();
    (path, deriv)
}

fn antisymmetry_defect(rp: &GridRoughPath) -> f64 {
    let d = rp.dim();
    let n = rp.grid().n_nodes();
    let mut worst: f64 = 0.0;
    for i in 0..n {
        for j in i + 1..n {
            let (x, xx) = rp.reconstruct_nodes(i, j).unwrap();
            let scale = 1.0 + x.iter().fold(0.0f64, |m, v| m.max(v * v));
            for a in 0..d {
                for b in 0..d {
                    worst = worst.max((xx[a * d + b] + xx[b * d + a] - x[a] * x[b]).abs() / scale);
                }
            }
        }
    }
    worst
}

fn criterion_1() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let (mut split, mut geo, mut anti) = (0.0f64, 0.0f64, 0.0f64);
    for case in 0..100 {
        let d = 2 + case % 2;
        let n = 48;
        let (path, deriv) = smooth_path(&mut rng, d, n);
        let rp = lift_smooth_quadrature(&path, &deriv).unwrap();
        for _ in 0..5 {
            let s = rng.random_range(0..n - 2);
            let t = rng.random_range(s + 2..=n);
            let u = rng.random_range(s + 1..t);
            let g = rp.grid();
            let (x_su, a) = rp.reconstruct(g.time(s), g.time(u)).unwrap();
            let (x_ut, b) = rp.reconstruct(g.time(u), g.time(t)).unwrap();
            let combined = chen_combine(&a, &b, &x_su, &x_ut).unwrap();
            let sub = path.restrict(s, t).unwrap();
            let direct = lift_smooth_quadrature(&sub, &deriv[s * d..(t + 1) * d]).unwrap();
            let (_, want) = direct.reconstruct_nodes(0, t - s).unwrap();
            split = split.max(rel_err(&combined.matrix, &want));
        }
        geo = geo.max(geometricity_residual(&rp));
        anti = anti.max(antisymmetry_defect(&rp)).max(antisymmetry_defect(&lift_left_riemann(&path)));
    }
    ensure(
        split <= 1e-12 && geo <= 1e-10 && anti <= 1e-13,
        format!("split/recombine rel err {split:.2e} (<= 1e-12), geometric residual {geo:.2e} (<= 1e-10), antisymmetry defect {anti:.2e}"),
    )
}

fn criterion_2() -> Outcome {
    let mut hs = vec![];
    let mut errs = vec![];
    for k in 5..=12 {
        let n = 1usize << k;
        let g = TimeGrid::new(0.0, 1.0, n).unwrap();
        let p = SamplePath::from_fn(g, 2, |t, o| {
            o[0] = t;
            o[1] = t * t;
        })
        .unwrap();
        let rp = lift_left_riemann(&p);
        let (x, xx) = rp.reconstruct_nodes(0, n).unwrap();
        assert!((xx[1] + xx[2] - x[0] * x[1]).abs() < 1e-14);
        hs.push(1.0 / n as f64);
        errs.push((xx[1] - 2.0 / 3.0).abs());
    }
    let order = fit_log_log(&hs, &errs).unwrap().slope;
    let last = *errs.last().unwrap();
    ensure(order >= 1.0 && last <= 1e-3, format!("observed order {order:.4} (>= 1), error at h = 2^-12 {last:.2e} (<= 1e-3)"))
}

/// Every partition of `0..n` containing both ends, as a bitmask over interior nodes.
fn brute_force<F: Fn(usize, usize) -> f64>(n: usize, p: f64, block: F) -> f64 {
    let mut best: f64 = 0.0;
    for mask in 0u32..(1 << (n - 2)) {
        let mut prev = 0;
        let mut sum = 0.0;
        for node in 1..n {
            if node == n - 1 || mask & (1 << (node - 1)) != 0 {
                sum += block(prev, node).powf(p);
                prev = node;
            }
        }
        best = best.max(sum);
    }
    best.powf(1.0 / p)
}

/// Left-point iterated integrals straight from node values.
fn level2_oracle(vals: &[f64], d: usize, s: usize, t: usize) -> Vec<f64> {
    let x = |k: usize, i: usize| vals[k * d + i];
    let mut m = vec![0.0; d * d];
    for a in 0..d {
        for b in 0..d {
            let xa = x(t, a) - x(s, a);
            let xb = x(t, b) - x(s, b);
            m[a * d + b] = if a == b {
                0.5 * xa * xa
            } else {
                let (i, j) = (a.min(b), a.max(b));
                let upper: f64 = (s..t).map(|k| (x(k, i) - x(s, i)) * (x(k + 1, j) - x(k, j))).sum();
                if a < b {
                    upper
                } else {
                    xa * xb - upper
                }
            };
        }
    }
    m
}

fn criterion_3() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let (mut e1, mut e2) = (0.0f64, 0.0f64);
    for case in 0..500 {
        let n = rng.random_range(3..=12);
        let d = 1 + case % 3;
        let vals: Vec<f64> = (0..n * d).map(|_| rng.random_range(-1.0..1.0)).collect();
        let g = TimeGrid::new(0.0, 1.0, n - 1).unwrap();
        let path = SamplePath::new(g, d, vals.clone()).unwrap();
        let rp = lift_left_riemann(&path);
        for p in [1.0, 1.5, 2.0, 3.0] {
            let dp = pvar_of_values(&vals, d, p).unwrap();
            let bf = brute_force(n, p, |i, j| {
                (0..d).map(|c| (vals[j * d + c] - vals[i * d + c]).powi(2)).sum::<f64>().sqrt()
            });
            e1 = e1.max((dp - bf).abs() / bf.max(1.0));
            let dq = pvar_level2(&rp, p).unwrap();
            let bq = brute_force(n, p, |i, j| level2_oracle(&vals, d, i, j).iter().map(|v| v * v).sum::<f64>().sqrt());
            e2 = e2.max((dq - bq).abs() / bq.max(1.0));
        }
    }
    ensure(e1 <= 1e-12 && e2 <= 1e-12, format!("max rel diff level 1 {e1:.2e}, level 2 {e2:.2e} (<= 1e-12)"))
}

fn criterion_4() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut failures = 0;
    for _ in 0..1000 {
        let n = rng.random_range(4..=40);
        let d = rng.random_range(1..=3);
        let g = TimeGrid::new(0.0, 1.0, n).unwrap();
        let scale = rng.random_range(0.05..2.0);
        let mut acc = vec![0.0; d];
        let mut vals = vec![0.0; d];
        for _ in 0..n {
            acc.iter_mut().for_each(|a| *a += scale * rng.random_range(-1.0..1.0));
            vals.extend_from_slice(&acc);
        }
        let path = SamplePath::new(g, d, vals).unwrap();
        let p = rng.random_range(1.1..4.0);
        // random partition of the whole interval
        let mut cuts = vec![0];
        cuts.extend((1..n).filter(|_| rng.random_bool(0.3)));
        cuts.push(n);
        let pieces: f64 = cuts
            .windows(2)
            .map(|w| pvar_seminorm_window(&path, p, NodeWindow::new(w[0], w[1])).unwrap().powf(p))
            .sum();
        let whole = pvar_seminorm_window(&path, p, NodeWindow::full(&g)).unwrap().powf(p);
        let k = (cuts.len() - 1) as f64;
        let tol = 1e-12 * whole.max(1.0);
        if pieces > whole + tol || whole > k.powf(p - 1.0) * pieces + tol {
            failures += 1;
        }
        let rp = lift_left_riemann(&path);
        let pr = rng.random_range(2.0..4.0);
        let eta = rng.random_range(0.05..3.0);
        let st = greedy_stopping_times(&rp, eta, pr, NodeWindow::full(&g)).unwrap();
        let norm = homogeneous_pvar_norm(&rp, pr).unwrap();
        if st.count() as f64 > 1.0 + eta.powf(-pr) * norm.powf(pr) * (1.0 + 1e-12) {
            failures += 1;
        }
    }
    // linear path lift: analytic spacing 0.5/√1.5
    let n = 1000;
    let g = TimeGrid::new(0.0, 1.0, n).unwrap();
    let rp = lift_left_riemann(&SamplePath::from_fn(g, 1, |t, o| o[0] = t).unwrap());
    let st = greedy_stopping_times(&rp, 0.5, 2.0, NodeWindow::full(&g)).unwrap();
    let gap = 0.5 / 1.5f64.sqrt();
    // every interval but the last (cut at the window end) should have the analytic length
    let spacings: Vec<f64> = st.times.windows(2).map(|w| w[1] - w[0]).collect();
    let full = &spacings[..spacings.len() - 1];
    let linear_ok = st.times.len() == 4
        && full.iter().all(|s| (s - gap).abs() <= g.spacing() + 1e-12)
        && spacings[spacings.len() - 1] <= gap + g.spacing();
    ensure(
        failures == 0 && linear_ok,
        format!("{failures} failures in 1000 cases; linear stopping spacings {full:.4?} vs {gap:.4} (one cell {:.0e})", g.spacing()),
    )
}

fn criterion_5() -> Outcome {
    let g = TimeGrid::new(-1.0, 1.0, 16).unwrap();
    let mut pick = ChaCha8Rng::seed_from_u64(5);
    let mut worst: f64 = 0.0;
    for h in [0.35, 0.4, 0.45, 0.5] {
        let sampler = FbmSampler::new(g, h).unwrap();
        let paths: Vec<SamplePath> = (0..10_000).map(|s| sampler.sample(1, 55, s).unwrap()).collect();
        for _ in 0..5 {
            let (i, j) = loop {
                let i = pick.random_range(0..=16);
                let j = pick.random_range(0..=16);
                if i != 8 && j != 8 {
                    break (i, j);
                }
            };
            let prods: Vec<f64> = paths.iter().map(|p| p.value(i)[0] * p.value(j)[0]).collect();
            let n = prods.len() as f64;
            let mean = prods.iter().sum::<f64>() / n;
            let sd = (prods.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt();
            let z = (mean - fbm_covariance(g.time(i), g.time(j), h)).abs() / (sd / n.sqrt());
            worst = worst.max(z);
        }
    }
    ensure(worst <= 4.0, format!("largest deviation {worst:.2} standard errors over 20 node pairs (<= 4)"))
}

fn gates(r: &ConvergenceReport) -> String {
    r.gates.iter().map(|g| format!("{} {:.4} [{}]", g.name, g.observed, if g.passed { "ok" } else { "fail" })).collect::<Vec<_>>().join(", ")
}

fn criterion_6() -> Outcome {
    let mut lines = vec![];
    let mut ok = true;
    for (h, beta, beta_prime) in [(0.4, 0.34, 0.37), (0.5, 0.35, 0.4)] {
        let cfg = ExperimentConfig {
            experiment: "noise".into(),
            hurst: h,
            beta,
            beta_prime,
            grid_n: 4096,
            n_seeds: 200,
            ..Default::default()
        };
        let r = run_noise_convergence(&cfg, RunOptions::default()).map_err(|e| e.to_string())?;
        let metric = r.metric("rho_beta").unwrap().slope.map_or(f64::NAN, |f| f.slope);
        ok &= r.passed;
        lines.push(format!("H={h}: {}; rho_beta slope {metric:.3} vs H-beta' {:.2}", gates(&r), h - beta_prime));
    }
    ensure(ok, lines.join("; "))
}

fn criterion_7() -> Outcome {
    // additive noise
    let g = TimeGrid::new(0.0, 1.0, 500).unwrap();
    let omega = sample_fbm(g, &FbmParams::new(0.4, 2, 7).unwrap()).unwrap();
    let rp = lift_left_riemann(&omega);
    let y = solve_rde(&VectorField::builtin("additive", 2, 2).unwrap(), &rp, &[1.0, -1.0]).unwrap();
    let additive = (0..=500)
        .flat_map(|i| (0..2).map(move |c| (i, c)))
        .map(|(i, c)| (y.value(i)[c] - ([1.0, -1.0][c] + omega.value(i)[c])).abs())
        .fold(0.0, f64::max);

    // y' = y
    let g = TimeGrid::new(0.0, 1.0, 1000).unwrap();
    let zero = GridRoughPath::new(g, 1, vec![0.0; 1000], vec![0.0; 1000]).unwrap();
    let drift = (solve_rde(&VectorField::builtin("drift-only", 1, 1).unwrap(), &zero, &[1.0]).unwrap().last()[0] - E).abs();

    // dy = y dω with ω_t = t
    let lin = VectorField::builtin("linear-g", 1, 1).unwrap();
    let smooth_err = |n: usize| {
        let g = TimeGrid::new(0.0, 1.0, n).unwrap();
        let p = SamplePath::from_fn(g, 1, |t, o| o[0] = t).unwrap();
        let rp = lift_smooth_quadrature(&p, &vec![1.0; n + 1]).unwrap();
        (solve_rde(&lin, &rp, &[1.0]).unwrap().last()[0] - E).abs()
    };
    let ns = [125, 250, 500, 1000, 2000];
    let errs: Vec<f64> = ns.iter().map(|&n| smooth_err(n)).collect();
    let hs: Vec<f64> = ns.iter().map(|&n| 1.0 / n as f64).collect();
    let order = fit_log_log(&hs, &errs).unwrap().slope;
    let smooth = errs[3];
    ensure(
        additive <= 1e-12 && drift <= 2e-3 && smooth <= 1e-4 && order >= 1.99,
        format!("additive max err {additive:.1e}; |y(1)-e| drift-only {drift:.2e} (<= 2e-3), smooth driver {smooth:.2e} (<= 1e-4), order {order:.4} (>= 1.99)"),
    )
}

fn criterion_8() -> Outcome {
    let cfg = ExperimentConfig { experiment: "solution".into(), hurst: 0.45, n_seeds: 100, ..Default::default() };
    let r = run_solution_convergence(&cfg, RunOptions::default()).map_err(|e| e.to_string())?;
    ensure(r.passed, gates(&r))
}

fn criterion_9() -> Outcome {
    let g = TimeGrid::new(-0.5, 1.5, 256).unwrap();
    let sampler = FbmSampler::new(g, 0.45).unwrap();
    let vf = VectorField::builtin("sin-g", 2, 2).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let h = g.spacing();
    let mut worst: f64 = 0.0;
    for probe_id in 0..100u64 {
        let k1 = rng.random_range(0..=80usize);
        let k2 = rng.random_range(0..=80usize);
        let y0 = vec![rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)];
        for delta in [None, Some(rng.random_range(1..=16usize))] {
            let probe = CocycleProbe { t1: k1 as f64 * h, t2: k2 as f64 * h, y0: y0.clone(), seed: probe_id, delta };
            worst = worst.max(cocycle_residual(&vf, &sampler, &probe).map_err(|e| e.to_string())?);
        }
    }
    // W_δ commutes with the Wiener shift
    let p = sampler.sample(2, 99, 0).unwrap();
    let mut shift: f64 = 0.0;
    for (k, tau_node) in [(1, 100), (4, 140), (16, 180)] {
        let dp = DeltaParam::from_multiple(&g, k).unwrap();
        let tau = g.time(tau_node);
        let a = w_delta(&wiener_shift(&p, tau).unwrap(), &dp).unwrap();
        let b = wiener_shift(&w_delta(&p, &dp).unwrap(), tau).unwrap();
        shift = shift.max(a.values().iter().zip(b.values()).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max));
    }
    ensure(
        worst <= 1e-10 && shift <= 1e-12,
        format!("max cocycle residual {worst:.1e} over 200 solves (<= 1e-10); shift covariance defect {shift:.1e}"),
    )
}

fn criterion_10() -> Outcome {
    let cfg = ExperimentConfig { experiment: "stopping".into(), n_seeds: 100, ..Default::default() };
    let r = run_stopping_time_convergence(&cfg, RunOptions::default()).map_err(|e| e.to_string())?;
    ensure(r.passed, gates(&r))
}

fn criterion_11() -> Outcome {
    let cfg = ExperimentConfig {
        experiment: "suite".into(),
        grid_n: 256,
        n_seeds: 30,
        delta_ladder: vec![2, 4, 8, 16],
        ..Default::default()
    };
    let dirs = [tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap()];
    for (dir, threads) in dirs.iter().zip([1, 3]) {
        run_experiment(&cfg, RunOptions { threads: Some(threads) })
            .and_then(|r| r.write(dir.path()))
            .map_err(|e| e.to_string())?;
    }
    let mut compared = 0;
    for name in ["noise", "solution", "stopping"] {
        let file = format!("{name}.csv");
        let a = std::fs::read(dirs[0].path().join(&file)).map_err(|e| e.to_string())?;
        let b = std::fs::read(dirs[1].path().join(&file)).map_err(|e| e.to_string())?;
        if a != b {
            return Err(format!("{file} differs between 1 and 3 threads"));
        }
        compared += a.len();
    }
    Ok(format!("noise/solution/stopping CSVs byte-identical across 1 and 3 threads ({compared} bytes)"))
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 11] = [
        ("Chen/geometry suite", criterion_1),
        ("Levy-area oracle", criterion_2),
        ("p-variation DP vs exhaustive enumeration", criterion_3),
        ("variation inequality and stopping-time bound", criterion_4),
        ("fBm sampler covariance", criterion_5),
        ("Wong-Zakai level-1 rate and metric monotonicity", criterion_6),
        ("solver oracles", criterion_7),
        ("solution Wong-Zakai convergence", criterion_8),
        ("cocycle property and shift covariance", criterion_9),
        ("stopping-time convergence", criterion_10),
        ("determinism across thread counts", criterion_11),
    ];
    let filter: Option<String> = std::env::args().skip(1).find(|a| !a.starts_with('-'));
    let mut failed = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        let id = format!("criterion {}", i + 1);
        if filter.as_ref().is_some_and(|s| *s != (i + 1).to_string()) {
            continue;
        }
        let started = Instant::now();
        let outcome = std::panic::catch_unwind(f).unwrap_or_else(|_| Err("panicked".into()));
        let secs = started.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!("{id:<13} PASS  {name}: {detail} ({secs:.1} s)"),
            Err(detail) => {
                failed += 1;
                println!("{id:<13} FAIL  {name}: {detail} ({secs:.1} s)");
            }
        }
    }
    if failed > 0 {
        println!("{failed} criteria failed");
        std::process::exit(1);
    }
}
