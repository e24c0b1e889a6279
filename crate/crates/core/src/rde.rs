//! Controlled paths, compensated rough integrals and the RDE solver for
//! `dy = (Ay + f(y)) dt + g(y) d𝛚`.
//!
//! Matrices are row-major. `g(y)` is `m × d` with entry `(a, c)` at `a*d + c`.
//! `Dg(y)` stores `∂g^{a,c}/∂y^e` at `(a*d + c)*m + e`. The second-order term
//! of the one-step scheme contracts as
//!
//! ```text
//! (Dg(y) g(y) 𝕏)^a = Σ_{b,c,e} ∂_e g^{a,c}(y) g^{e,b}(y) 𝕏^{b,c},   𝕏^{b,c} = ∫ X^b dX^c
//! ```

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use nalgebra::DMatrix;
use rand::Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::fbm::{replica_rng, SamplePath, TimeGrid};
use crate::lift::{euclid, GridRoughPath};
use crate::norms::{
    greedy_stopping_times, homogeneous_pvar_norm, pvar_level1_difference, pvar_level2_difference, pvar_seminorm,
    NodeWindow, VariationParams,
};

pub type FieldFn = Arc<dyn Fn(&[f64], &mut [f64]) + Send + Sync>;

/// Names accepted by [`VectorField::builtin`].
pub const BUILTIN_FIELDS: &[(&str, &str)] = &[
    ("linear-g", "A = 0, f = 0, g^{a,c}(y) = y^a (unbounded; linear multiplicative noise)"),
    ("sin-g", "A = -I/2, f(y) = sin(y)/2, g^{a,c}(y) = 0.2 sin(y^{(a+c) mod m} + c + 1/2)"),
    ("additive", "A = 0, f = 0, g = identity (additive noise)"),
    ("drift-only", "A = 0, f(y) = y, g = 0"),
];

const SIN_G_SCALE: f64 = 0.2;

/// Drift `A y + f(y)` and diffusion `g(y)` with its derivative.
#[derive(Clone)]
pub struct VectorField {
    name: String,
    m: usize,
    d: usize,
    a: Vec<f64>,
    f: FieldFn,
    g: FieldFn,
    dg: FieldFn,
    c_f: f64,
    c_g: f64,
}

impl fmt::Debug for VectorField {
    fn fmt(&self, fmt: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt.debug_struct("VectorField")
            .field("name", &self.name)
            .field("m", &self.m)
            .field("d", &self.d)
            .field("c_f", &self.c_f)
            .field("c_g", &self.c_g)
            .finish_non_exhaustive()
    }
}

impl VectorField {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        name: impl Into<String>,
        m: usize,
        d: usize,
        a: Vec<f64>,
        f: FieldFn,
        c_f: f64,
        g: FieldFn,
        dg: FieldFn,
        c_g: f64,
    ) -> Result<Self> {
        if m == 0 || d == 0 {
            return Err(Error::param("dimensions", "m and d must be positive"));
        }
        if a.len() != m * m {
            return Err(Error::DimensionMismatch { expected: m * m, got: a.len() });
        }
        Ok(VectorField { name: name.into(), m, d, a, f, g, dg, c_f, c_g })
    }

    pub fn builtin(name: &str, m: usize, d: usize) -> Result<Self> {
        if m == 0 || d == 0 {
            return Err(Error::param("dimensions", "m and d must be positive"));
        }
        let zero_f: FieldFn = Arc::new(|_, out| out.fill(0.0));
        match name {
            "additive" => Self::new(
                name,
                m,
                d,
                vec![0.0; m * m],
                zero_f.clone(),
                0.0,
                Arc::new(move |_, out| {
                    out.fill(0.0);
                    for a in 0..m.min(d) {
                        out[a * d + a] = 1.0;
                    }
                }),
                zero_f,
                1.0,
            ),
            "drift-only" => Self::new(
                name,
                m,
                d,
                vec![0.0; m * m],
                Arc::new(|y, out| out.copy_from_slice(y)),
                1.0,
                zero_f.clone(),
                zero_f,
                0.0,
            ),
            "linear-g" => Self::new(
                name,
                m,
                d,
                vec![0.0; m * m],
                zero_f,
                0.0,
                Arc::new(move |y, out| {
                    for a in 0..m {
                        out[a * d..(a + 1) * d].fill(y[a]);
                    }
                }),
                Arc::new(move |_, out| {
                    out.fill(0.0);
                    for a in 0..m {
                        for c in 0..d {
                            out[(a * d + c) * m + a] = 1.0;
                        }
                    }
                }),
                f64::INFINITY,
            ),
            "sin-g" => {
                let mut a_mat = vec![0.0; m * m];
                for i in 0..m {
                    a_mat[i * m + i] = -0.5;
                }
                let phase = |c: usize| c as f64 + 0.5;
                Self::new(
                    name,
                    m,
                    d,
                    a_mat,
                    Arc::new(|y, out| out.iter_mut().zip(y).for_each(|(o, v)| *o = 0.5 * v.sin())),
                    0.5,
                    Arc::new(move |y, out| {
                        for a in 0..m {
                            for c in 0..d {
                                out[a * d + c] = SIN_G_SCALE * (y[(a + c) % m] + phase(c)).sin();
                            }
                        }
                    }),
                    Arc::new(move |y, out| {
                        out.fill(0.0);
                        for a in 0..m {
                            for c in 0..d {
                                let e = (a + c) % m;
                                out[(a * d + c) * m + e] = SIN_G_SCALE * (y[e] + phase(c)).cos();
                            }
                        }
                    }),
                    SIN_G_SCALE,
                )
            }
            other => Err(Error::UnknownVectorField(other.to_string())),
        }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn state_dim(&self) -> usize {
        self.m
    }

    pub fn noise_dim(&self) -> usize {
        self.d
    }

    pub fn c_f(&self) -> f64 {
        self.c_f
    }

    pub fn c_g(&self) -> f64 {
        self.c_g
    }

    /// Spectral norm of `A`.
    pub fn a_norm(&self) -> f64 {
        let a = DMatrix::from_row_slice(self.m, self.m, &self.a);
        a.singular_values().iter().fold(0.0f64, |x, &y| x.max(y))
    }

    /// `L = ‖A‖ + C_f`.
    pub fn lipschitz(&self) -> f64 {
        self.a_norm() + self.c_f
    }

    /// `A y + f(y)`.
    pub fn drift(&self, y: &[f64], out: &mut [f64]) {
        (self.f)(y, out);
        for i in 0..self.m {
            out[i] += (0..self.m).map(|j| self.a[i * self.m + j] * y[j]).sum::<f64>();
        }
    }

    pub fn f(&self, y: &[f64], out: &mut [f64]) {
        (self.f)(y, out)
    }

    pub fn g(&self, y: &[f64], out: &mut [f64]) {
        (self.g)(y, out)
    }

    pub fn dg(&self, y: &[f64], out: &mut [f64]) {
        (self.dg)(y, out)
    }

    /// Spot-check the Lipschitz, boundedness and derivative claims on random states.
    pub fn check_hypotheses(&self, seed: u64, n_points: usize, radius: f64) -> HypothesisReport {
        let (m, d) = (self.m, self.d);
        let mut rng = replica_rng(seed, 0);
        let draw = |rng: &mut rand_chacha::ChaCha8Rng| -> Vec<f64> {
            (0..m).map(|_| rng.random_range(-radius..radius)).collect()
        };
        let (mut fx, mut fy) = (vec![0.0; m], vec![0.0; m]);
        let mut g0 = vec![0.0; m * d];
        let mut g1 = vec![0.0; m * d];
        let mut dg = vec![0.0; m * d * m];
        let mut report = HypothesisReport::default();
        for _ in 0..n_points {
            let x = draw(&mut rng);
            let y = draw(&mut rng);
            self.f(&x, &mut fx);
            self.f(&y, &mut fy);
            let dist: f64 = x.iter().zip(&y).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
            let fd: f64 = fx.iter().zip(&fy).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
            if dist > 0.0 {
                report.max_f_lipschitz_ratio = report.max_f_lipschitz_ratio.max(fd / dist);
            }
            self.g(&x, &mut g0);
            self.dg(&x, &mut dg);
            report.max_g = report.max_g.max(g0.iter().fold(0.0f64, |a, b| a.max(b.abs())));
            report.max_dg = report.max_dg.max(dg.iter().fold(0.0f64, |a, b| a.max(b.abs())));
            // central differences of g along each state coordinate
            for e in 0..m {
                let step = 1e-5 * (1.0 + x[e].abs());
                let mut xp = x.clone();
                let mut xm = x.clone();
                xp[e] += step;
                xm[e] -= step;
                self.g(&xp, &mut g0);
                self.g(&xm, &mut g1);
                for ac in 0..m * d {
                    let fdv = (g0[ac] - g1[ac]) / (2.0 * step);
                    let an = dg[ac * m + e];
                    let err = (fdv - an).abs() / an.abs().max(1.0);
                    report.max_dg_fd_error = report.max_dg_fd_error.max(err);
                }
            }
        }
        report.lipschitz_ok = report.max_f_lipschitz_ratio <= self.c_f * (1.0 + 1e-12) + 1e-12;
        report.bounded_ok = report.max_g <= self.c_g + 1e-12 && report.max_dg <= self.c_g + 1e-12;
        report.derivative_ok = report.max_dg_fd_error <= 1e-6;
        report
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct HypothesisReport {
    pub max_f_lipschitz_ratio: f64,
    pub max_g: f64,
    pub max_dg: f64,
    pub max_dg_fd_error: f64,
    pub lipschitz_ok: bool,
    pub bounded_ok: bool,
    pub derivative_ok: bool,
}

/// A path `y` with Gubinelli derivative `y'`; `y_{s,t} = y'_s ω_{s,t} + R^y_{s,t}`.
#[derive(Debug, Clone, PartialEq)]
pub struct ControlledPath {
    grid: TimeGrid,
    m: usize,
    d: usize,
    values: Vec<f64>,
    gubinelli: Vec<f64>,
}

impl ControlledPath {
    pub fn new(grid: TimeGrid, m: usize, d: usize, values: Vec<f64>, gubinelli: Vec<f64>) -> Result<Self> {
        if m == 0 || d == 0 {
            return Err(Error::param("dimensions", "m and d must be positive"));
        }
        let n = grid.n_nodes();
        if values.len() != n * m {
            return Err(Error::DimensionMismatch { expected: n * m, got: values.len() });
        }
        if gubinelli.len() != n * m * d {
            return Err(Error::DimensionMismatch { expected: n * m * d, got: gubinelli.len() });
        }
        Ok(ControlledPath { grid, m, d, values, gubinelli })
    }

    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    pub fn value_dim(&self) -> usize {
        self.m
    }

    pub fn noise_dim(&self) -> usize {
        self.d
    }

    pub fn value(&self, i: usize) -> &[f64] {
        &self.values[i * self.m..(i + 1) * self.m]
    }

    pub fn gubinelli(&self, i: usize) -> &[f64] {
        let md = self.m * self.d;
        &self.gubinelli[i * md..(i + 1) * md]
    }

    pub fn last(&self) -> &[f64] {
        self.value(self.grid.n_steps())
    }

    pub fn path(&self) -> SamplePath {
        SamplePath::new(self.grid, self.m, self.values.clone()).expect("controlled path values are finite")
    }

    pub fn window(&self, w: NodeWindow) -> Result<Self> {
        let grid = self.grid.sub_grid(w.start, w.end)?;
        let md = self.m * self.d;
        Ok(ControlledPath {
            grid,
            m: self.m,
            d: self.d,
            values: self.values[w.start * self.m..(w.end + 1) * self.m].to_vec(),
            gubinelli: self.gubinelli[w.start * md..(w.end + 1) * md].to_vec(),
        })
    }

    /// Observations at every `stride`-th node.
    pub fn coarsen(&self, stride: usize) -> Result<Self> {
        let grid = self.grid.coarsened(stride)?;
        let values = (0..grid.n_nodes()).flat_map(|i| self.value(i * stride).to_vec()).collect();
        let gubinelli = (0..grid.n_nodes()).flat_map(|i| self.gubinelli(i * stride).to_vec()).collect();
        Ok(ControlledPath { grid, m: self.m, d: self.d, values, gubinelli })
    }

    /// `R^y_{t_i,t_j} = y_{t_i,t_j} - y'_{t_i} ω¹_{t_i,t_j}` given the driver's node values.
    fn remainder_into(&self, driver: &[f64], i: usize, j: usize, out: &mut [f64]) {
        let (m, d) = (self.m, self.d);
        let yp = self.gubinelli(i);
        for a in 0..m {
            let mut r = self.values[j * m + a] - self.values[i * m + a];
            for b in 0..d {
                r -= yp[a * d + b] * (driver[j * d + b] - driver[i * d + b]);
            }
            out[a] = r;
        }
    }

    fn check_driver(&self, rp: &GridRoughPath) -> Result<()> {
        if !self.grid.same_nodes(rp.grid()) {
            return Err(Error::GridMismatch("controlled path and driver live on different grids".into()));
        }
        if rp.dim() != self.d {
            return Err(Error::DimensionMismatch { expected: self.d, got: rp.dim() });
        }
        Ok(())
    }
}

/// Compensated Riemann sum `Σ y_u ω¹_{u,v} + y'_u ω²_{u,v}` over grid intervals in `[s, t]`.
///
/// The integrand's values are read as `o × d` matrices (`o = value_dim / d`) and
/// its Gubinelli derivative as `(o·d) × d`, entry `((a,c), b) = ∂Y^{a,c}/∂ω^b`.
/// For a scalar driver this is the plain `∫ y dω` of an `m`-vector path.
pub fn rough_integral(cp: &ControlledPath, rp: &GridRoughPath, s: f64, t: f64) -> Result<Vec<f64>> {
    cp.check_driver(rp)?;
    let d = cp.d;
    if !cp.m.is_multiple_of(d) {
        return Err(Error::param("integrand", format!("value dimension {} is not a multiple of d = {d}", cp.m)));
    }
    let i = rp.grid().node_index(s)?;
    let j = rp.grid().node_index(t)?;
    if i > j {
        return Err(Error::param("interval", format!("s = {s} exceeds t = {t}")));
    }
    Ok(compensated_sum(cp, rp, i, j))
}

fn compensated_sum(cp: &ControlledPath, rp: &GridRoughPath, i: usize, j: usize) -> Vec<f64> {
    let d = cp.d;
    let o = cp.m / d;
    let mut z = vec![0.0; o];
    for k in i..j {
        let y = cp.value(k);
        let yp = cp.gubinelli(k);
        let x = rp.inc1(k);
        let xx = rp.inc2(k);
        for a in 0..o {
            let mut acc = 0.0;
            for c in 0..d {
                acc += y[a * d + c] * x[c];
                for b in 0..d {
                    acc += yp[(a * d + c) * d + b] * xx[b * d + c];
                }
            }
            z[a] += acc;
        }
    }
    z
}

/// One-step compensated scheme
/// `y_v = y_u + (A y_u + f(y_u))(v-u) + g(y_u) ω¹_{u,v} + Dg(y_u) g(y_u) ω²_{u,v}`,
/// returned with Gubinelli derivative `y' = g(y)`.
pub fn solve_rde(vf: &VectorField, rp: &GridRoughPath, y0: &[f64]) -> Result<ControlledPath> {
    let (m, d) = (vf.m, vf.d);
    if rp.dim() != d {
        return Err(Error::DimensionMismatch { expected: d, got: rp.dim() });
    }
    if y0.len() != m {
        return Err(Error::DimensionMismatch { expected: m, got: y0.len() });
    }
    if y0.iter().any(|v| !v.is_finite()) {
        return Err(Error::BlowUp { node: 0 });
    }
    let n = rp.n_intervals();
    let h = rp.grid().spacing();
    let mut values = Vec::with_capacity((n + 1) * m);
    let mut gub = Vec::with_capacity((n + 1) * m * d);
    let mut y = y0.to_vec();
    let mut drift = vec![0.0; m];
    let mut g = vec![0.0; m * d];
    let mut dg = vec![0.0; m * d * m];
    for k in 0..n {
        vf.g(&y, &mut g);
        vf.dg(&y, &mut dg);
        vf.drift(&y, &mut drift);
        values.extend_from_slice(&y);
        gub.extend_from_slice(&g);
        let x = rp.inc1(k);
        let xx = rp.inc2(k);
        let mut next = y.clone();
        for a in 0..m {
            let mut inc = drift[a] * h;
            for c in 0..d {
                inc += g[a * d + c] * x[c];
                for e in 0..m {
                    let de = dg[(a * d + c) * m + e];
                    if de == 0.0 {
                        continue;
                    }
                    for b in 0..d {
                        inc += de * g[e * d + b] * xx[b * d + c];
                    }
                }
            }
            next[a] += inc;
        }
        if next.iter().any(|v| !v.is_finite()) {
            return Err(Error::BlowUp { node: k + 1 });
        }
        y = next;
    }
    vf.g(&y, &mut g);
    values.extend_from_slice(&y);
    gub.extend_from_slice(&g);
    ControlledPath::new(*rp.grid(), m, d, values, gub)
}

fn driver_values(rp: &GridRoughPath) -> Vec<f64> {
    rp.path().into_values()
}

/// `⦀R^y⦀_{q-var}` with `R^y_{s,t} = y_{s,t} - y'_s ω¹_{s,t}`.
pub fn remainder_norm(cp: &ControlledPath, rp: &GridRoughPath, q: f64) -> Result<f64> {
    cp.check_driver(rp)?;
    remainder_difference_norm(cp, rp, None, q)
}

/// q-variation of `R^a - R^b`, each remainder against its own driver.
fn remainder_difference_norm(
    a: &ControlledPath,
    a_driver: &GridRoughPath,
    b: Option<(&ControlledPath, &GridRoughPath)>,
    q: f64,
) -> Result<f64> {
    if !(q >= 1.0) {
        return Err(Error::param("q", format!("{q} must be at least 1")));
    }
    let m = a.m;
    let da = driver_values(a_driver);
    let db = b.map(|(_, r)| driver_values(r));
    let n = a.grid.n_nodes();
    let mut best = vec![0.0f64; n];
    let mut ra = vec![0.0; m];
    let mut rb = vec![0.0; m];
    for j in 1..n {
        let mut top = 0.0f64;
        for k in 0..j {
            a.remainder_into(&da, k, j, &mut ra);
            if let (Some((bp, _)), Some(db)) = (b, db.as_ref()) {
                bp.remainder_into(db, k, j, &mut rb);
                ra.iter_mut().zip(&rb).for_each(|(x, y)| *x -= y);
            }
            let norm = euclid(&ra);
            let term = if norm == 0.0 { 0.0 } else { norm.powf(q) };
            top = top.max(best[k] + term);
        }
        best[j] = top;
    }
    Ok(best[n - 1].powf(1.0 / q))
}

fn sup_norm(cp: &ControlledPath) -> f64 {
    (0..cp.grid.n_nodes()).map(|i| euclid(cp.value(i))).fold(0.0, f64::max)
}

/// Inputs and outcome of the a-priori sup and variation bounds.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AprioriReport {
    pub n_intervals: usize,
    pub eta: f64,
    pub lipschitz: f64,
    pub horizon: f64,
    pub c_p: f64,
    pub p: f64,
    pub sup_actual: f64,
    pub sup_bound: f64,
    pub sup_ratio: f64,
    pub var_actual: f64,
    pub var_bound: f64,
    pub var_ratio: f64,
    /// Set when a bound is below the measured value.
    pub falsification_candidate: bool,
}

/// Evaluate `[‖y_τ‖ + (|f(0)|/L + 1/C_p) N] e^{4LT}` (and the variation bound
/// multiplied by `N^{(p-1)/p}`) against the solution on its whole grid.
pub fn apriori_bound_check(
    cp: &ControlledPath,
    rp: &GridRoughPath,
    vf: &VectorField,
    p: f64,
    eta: f64,
    c_p: f64,
) -> Result<AprioriReport> {
    cp.check_driver(rp)?;
    let vp = VariationParams::new(p)?;
    if !(c_p >= 1.0) {
        return Err(Error::param("c_p", format!("{c_p} must be at least 1")));
    }
    let st = greedy_stopping_times(rp, eta, vp.p, NodeWindow::full(rp.grid()))?;
    let n_int = st.count() as f64;
    let l = vf.lipschitz();
    let horizon = rp.grid().t_max() - rp.grid().t_min();
    let mut f0 = vec![0.0; vf.m];
    vf.f(&vec![0.0; vf.m], &mut f0);
    let f0n = euclid(&f0);
    let f_term = if l > 0.0 {
        f0n / l
    } else if f0n == 0.0 {
        0.0
    } else {
        f64::INFINITY
    };
    let y_start = euclid(cp.value(0));
    let sup_bound = (y_start + (f_term + 1.0 / c_p) * n_int) * (4.0 * l * horizon).exp();
    let sup_actual = sup_norm(cp);
    let var_actual = y_start + pvar_seminorm(&cp.path(), vp.p)? + remainder_norm(cp, rp, vp.q)?;
    let var_bound = sup_bound * n_int.powf((vp.p - 1.0) / vp.p);
    let ratio = |b: f64, a: f64| if a == 0.0 { f64::INFINITY } else { b / a };
    let sup_ratio = ratio(sup_bound, sup_actual);
    let var_ratio = ratio(var_bound, var_actual);
    Ok(AprioriReport {
        n_intervals: st.count(),
        eta,
        lipschitz: l,
        horizon,
        c_p,
        p: vp.p,
        sup_actual,
        sup_bound,
        sup_ratio,
        var_actual,
        var_bound,
        var_ratio,
        falsification_candidate: sup_ratio < 1.0 || var_ratio < 1.0,
    })
}

/// The three terms `‖y - y^δ‖_∞`, `⦀y - y^δ⦀_{p-var}` and `⦀R^y - R^{y^δ}⦀_{q-var}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SolutionDistance {
    pub sup: f64,
    pub pvar: f64,
    pub remvar: f64,
}

pub fn solution_distance(
    a: &ControlledPath,
    a_driver: &GridRoughPath,
    b: &ControlledPath,
    b_driver: &GridRoughPath,
    p: f64,
) -> Result<SolutionDistance> {
    a.check_driver(a_driver)?;
    b.check_driver(b_driver)?;
    if !a.grid.same_nodes(&b.grid) || a.m != b.m {
        return Err(Error::GridMismatch("solutions live on different grids".into()));
    }
    let vp = VariationParams::new(p)?;
    let diff = a.path().difference(&b.path())?;
    let sup = (0..diff.n_nodes()).map(|i| euclid(diff.value(i))).fold(0.0, f64::max);
    Ok(SolutionDistance {
        sup,
        pvar: pvar_seminorm(&diff, vp.p)?,
        remvar: remainder_difference_norm(a, a_driver, Some((b, b_driver)), vp.q)?,
    })
}

/// Integrand `g(y)` with Gubinelli derivative `Dg(y) y'`, as a controlled path.
pub fn compose_diffusion(vf: &VectorField, cp: &ControlledPath) -> Result<ControlledPath> {
    let (m, d) = (vf.m, vf.d);
    if cp.m != m || cp.d != d {
        return Err(Error::DimensionMismatch { expected: m, got: cp.m });
    }
    let n = cp.grid.n_nodes();
    let mut values = Vec::with_capacity(n * m * d);
    let mut gub = Vec::with_capacity(n * m * d * d);
    let mut g = vec![0.0; m * d];
    let mut dg = vec![0.0; m * d * m];
    for i in 0..n {
        let y = cp.value(i);
        let yp = cp.gubinelli(i);
        vf.g(y, &mut g);
        vf.dg(y, &mut dg);
        values.extend_from_slice(&g);
        for ac in 0..m * d {
            for b in 0..d {
                gub.push((0..m).map(|e| dg[ac * m + e] * yp[e * d + b]).sum::<f64>());
            }
        }
    }
    ControlledPath::new(cp.grid, m * d, d, values, gub)
}

/// Left- and right-hand sides of the distance estimate between
/// `Z = ∫ g(y) d𝛚` and `Z^δ = ∫ g(y^δ) d𝛚_δ` on a window.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct IntegralBoundReport {
    pub lhs: f64,
    pub rhs: f64,
    pub solution_term: f64,
    pub level1_term: f64,
    pub level2_term: f64,
    pub c_p: f64,
    pub violated: bool,
}

#[allow(clippy::too_many_arguments)]
pub fn integral_distance_bound(
    vf: &VectorField,
    y: &ControlledPath,
    driver: &GridRoughPath,
    y_delta: &ControlledPath,
    driver_delta: &GridRoughPath,
    p: f64,
    window: NodeWindow,
    c_p: f64,
) -> Result<IntegralBoundReport> {
    y.check_driver(driver)?;
    y_delta.check_driver(driver_delta)?;
    let vp = VariationParams::new(p)?;
    let y = y.window(window)?;
    let yd = y_delta.window(window)?;
    let om = driver.window(window.start, window.end)?;
    let omd = driver_delta.window(window.start, window.end)?;

    let n = om.n_intervals();
    let z = compensated_sum(&compose_diffusion(vf, &y)?, &om, 0, n);
    let zd = compensated_sum(&compose_diffusion(vf, &yd)?, &omd, 0, n);
    let lhs = z.iter().zip(&zd).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();

    let cg = vf.c_g;
    let w_norm = homogeneous_pvar_norm(&om, vp.p)?;
    let y_var = pvar_seminorm(&y.path(), vp.p)?;
    let yd_var = pvar_seminorm(&yd.path(), vp.p)?;
    let ry = remainder_norm(&y, &om, vp.q)?;
    let ryd = remainder_norm(&yd, &omd, vp.q)?;
    let dist = solution_distance(&y, &om, &yd, &omd, vp.p)?;
    let om1 = pvar_seminorm(&om.path(), vp.p)?;
    let wd1 = pvar_seminorm(&omd.path(), vp.p)?;
    let diff1 = pvar_level1_difference(&om, &omd, vp.p)?;
    let diff2 = pvar_level2_difference(&om, &omd, vp.q)?;

    let solution_term = 15.0
        * c_p
        * (cg * cg * w_norm * w_norm).max(cg * w_norm)
        * (yd_var + y_var + ry + 1.0)
        * (dist.pvar + dist.sup + dist.remvar);
    let level1_term = (yd_var * (wd1 + om1) + ryd + 1.0) * (cg * cg).max(cg) * diff1;
    let level2_term = 2.0 * cg * cg * c_p * (yd_var + 1.0) * diff2;
    let rhs = solution_term + level1_term + level2_term;
    Ok(IntegralBoundReport { lhs, rhs, solution_term, level1_term, level2_term, c_p, violated: lhs > rhs })
}

/// Smooth periodic test driver `ω_t = (sin 2πt, ...)`; handy for oracles.
pub fn smooth_test_path(grid: TimeGrid, dim: usize) -> SamplePath {
    SamplePath::from_fn(grid, dim, |t, o| {
        for (c, v) in o.iter_mut().enumerate() {
            *v = (2.0 * PI * (c + 1) as f64 * t).sin() / (c + 1) as f64;
        }
    })
    .expect("finite")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fbm::{sample_fbm, FbmParams};
    use crate::lift::{lift_left_riemann, lift_smooth_quadrature};

    fn grid(n: usize) -> TimeGrid {
        TimeGrid::new(0.0, 1.0, n).unwrap()
    }

    fn fbm_lift(n: usize, d: usize, seed: u64) -> GridRoughPath {
        lift_left_riemann(&sample_fbm(grid(n), &FbmParams::new(0.45, d, seed).unwrap()).unwrap())
    }

    #[test]
    fn builtin_catalog() {
        for (name, _) in BUILTIN_FIELDS {
            let vf = VectorField::builtin(name, 2, 2).unwrap();
            assert_eq!(vf.name(), *name);
            let r = vf.check_hypotheses(1, 50, 3.0);
            assert!(r.derivative_ok, "{name}: {r:?}");
            assert!(r.lipschitz_ok, "{name}: {r:?}");
            if vf.c_g().is_finite() {
                assert!(r.bounded_ok, "{name}: {r:?}");
            }
        }
        assert!(matches!(VectorField::builtin("nope", 1, 1), Err(Error::UnknownVectorField(_))));
    }

    #[test]
    fn lipschitz_constant() {
        let vf = VectorField::builtin("sin-g", 3, 2).unwrap();
        assert!((vf.lipschitz() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn integral_of_constant_integrand() {
        let rp = fbm_lift(16, 1, 3);
        let g = *rp.grid();
        let cp = ControlledPath::new(g, 2, 1, [0.7, -2.0].repeat(17), vec![0.0; 34]).unwrap();
        let z = rough_integral(&cp, &rp, g.time(3), g.time(12)).unwrap();
        let (x, _) = rp.reconstruct_nodes(3, 12).unwrap();
        assert!((z[0] - 0.7 * x[0]).abs() < 1e-14);
        assert!((z[1] + 2.0 * x[0]).abs() < 1e-14);
    }

    #[test]
    fn integral_of_driver_against_itself() {
        let rp = fbm_lift(64, 1, 9);
        let w = rp.path();
        let g = *rp.grid();
        let cp = ControlledPath::new(g, 1, 1, w.values().to_vec(), vec![1.0; 65]).unwrap();
        let z = rough_integral(&cp, &rp, 0.25, 0.75).unwrap();
        let (ws, wt) = (w.value(16)[0], w.value(48)[0]);
        assert!((z[0] - 0.5 * (wt * wt - ws * ws)).abs() < 1e-12);
    }

    #[test]
    fn integral_against_zero_driver() {
        let g = grid(8);
        let rp = GridRoughPath::new(g, 1, vec![0.0; 8], vec![0.0; 8]).unwrap();
        let cp = ControlledPath::new(g, 1, 1, vec![3.0; 9], vec![1.0; 9]).unwrap();
        assert_eq!(rough_integral(&cp, &rp, 0.0, 1.0).unwrap(), vec![0.0]);
    }

    #[test]
    fn additive_noise_is_exact() {
        let rp = fbm_lift(200, 2, 4);
        let vf = VectorField::builtin("additive", 2, 2).unwrap();
        let y0 = [0.3, -1.0];
        let sol = solve_rde(&vf, &rp, &y0).unwrap();
        let w = rp.path();
        for i in 0..=200 {
            for c in 0..2 {
                assert!((sol.value(i)[c] - (y0[c] + w.value(i)[c])).abs() < 1e-12);
            }
        }
        assert!(remainder_norm(&sol, &rp, 1.25).unwrap() < 1e-12);
    }

    #[test]
    fn drift_only_reproduces_exponential() {
        let g = grid(1000);
        let rp = GridRoughPath::new(g, 1, vec![0.0; 1000], vec![0.0; 1000]).unwrap();
        let vf = VectorField::builtin("drift-only", 1, 1).unwrap();
        let sol = solve_rde(&vf, &rp, &[1.0]).unwrap();
        assert!((sol.last()[0] - std::f64::consts::E).abs() < 2e-3);
    }

    #[test]
    fn linear_multiplicative_noise_with_smooth_driver() {
        let g = grid(1000);
        let p = SamplePath::from_fn(g, 1, |t, o| o[0] = t).unwrap();
        let rp = lift_smooth_quadrature(&p, &vec![1.0; 1001]).unwrap();
        let vf = VectorField::builtin("linear-g", 1, 1).unwrap();
        let sol = solve_rde(&vf, &rp, &[1.0]).unwrap();
        assert!((sol.last()[0] - std::f64::consts::E).abs() < 1e-4);
    }

    #[test]
    fn blow_up_reports_node() {
        let g = grid(4);
        let rp = GridRoughPath::new(g, 1, vec![1e200; 4], vec![0.0; 4]).unwrap();
        let vf = VectorField::builtin("linear-g", 1, 1).unwrap();
        match solve_rde(&vf, &rp, &[1e200]) {
            Err(Error::BlowUp { node }) => assert_eq!(node, 1),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn remainder_vanishes_for_exact_difference_quotient() {
        let g = grid(1);
        let rp = GridRoughPath::new(g, 1, vec![2.0], vec![2.0]).unwrap();
        let cp = ControlledPath::new(g, 1, 1, vec![1.0, 4.0], vec![1.5, 0.0]).unwrap();
        assert_eq!(remainder_norm(&cp, &rp, 1.5).unwrap(), 0.0);
    }

    #[test]
    fn distance_examples() {
        let rp = fbm_lift(32, 2, 1);
        let vf = VectorField::builtin("sin-g", 2, 2).unwrap();
        let a = solve_rde(&vf, &rp, &[0.1, 0.2]).unwrap();
        let d = solution_distance(&a, &rp, &a, &rp, 2.5).unwrap();
        assert_eq!((d.sup, d.pvar, d.remvar), (0.0, 0.0, 0.0));
        let shifted_values: Vec<f64> = (0..33).flat_map(|i| [a.value(i)[0] + 0.3, a.value(i)[1] - 0.4]).collect();
        let gub: Vec<f64> = (0..33).flat_map(|i| a.gubinelli(i).to_vec()).collect();
        let b = ControlledPath::new(*rp.grid(), 2, 2, shifted_values, gub).unwrap();
        let d = solution_distance(&a, &rp, &b, &rp, 2.5).unwrap();
        assert!((d.sup - 0.5).abs() < 1e-12);
        assert!(d.pvar < 1e-12 && d.remvar < 1e-12);
    }

    #[test]
    fn apriori_trivial_field() {
        let rp = fbm_lift(50, 1, 2);
        let vf = VectorField::new(
            "zero",
            1,
            1,
            vec![0.0],
            Arc::new(|_, o| o.fill(0.0)),
            0.0,
            Arc::new(|_, o| o.fill(0.0)),
            Arc::new(|_, o| o.fill(0.0)),
            0.0,
        )
        .unwrap();
        let sol = solve_rde(&vf, &rp, &[2.0]).unwrap();
        let r = apriori_bound_check(&sol, &rp, &vf, 2.5, 0.5, 1.0).unwrap();
        assert_eq!(r.sup_actual, 2.0);
        assert!(r.sup_ratio >= 1.0 && !r.falsification_candidate);
        assert_eq!((r.eta, r.lipschitz, r.horizon), (0.5, 0.0, 1.0));
        assert!(r.n_intervals >= 1);
    }

    #[test]
    fn identical_inputs_have_zero_integral_distance() {
        let rp = fbm_lift(40, 2, 5);
        let vf = VectorField::builtin("sin-g", 2, 2).unwrap();
        let y = solve_rde(&vf, &rp, &[0.0, 0.5]).unwrap();
        let r = integral_distance_bound(&vf, &y, &rp, &y, &rp, 2.5, NodeWindow::new(5, 30), 1.0).unwrap();
        assert_eq!(r.lhs, 0.0);
        assert_eq!(r.rhs, 0.0);
    }

    #[test]
    fn compose_then_integrate_matches_solver_increment() {
        // with A = f = 0 the solver increment is exactly the compensated integral
        let rp = fbm_lift(64, 2, 8);
        let vf = VectorField::builtin("linear-g", 2, 2).unwrap();
        let y = solve_rde(&vf, &rp, &[1.0, 0.5]).unwrap();
        let z = rough_integral(&compose_diffusion(&vf, &y).unwrap(), &rp, 0.0, 1.0).unwrap();
        for a in 0..2 {
            assert!((z[a] - (y.last()[a] - y.value(0)[a])).abs() < 1e-12);
        }
    }
}
