//! Second-level processes on grids: canonical lifts, Chen's relation and
//! geometricity diagnostics.
//!
//! A [`GridRoughPath`] stores, for every grid interval `[t_k, t_{k+1}]`, the
//! level-1 increment and the level-2 matrix. Values over longer node pairs are
//! never stored; they are rebuilt by folding intervals with Chen's relation
//! `𝕏_{s,t} = 𝕏_{s,u} + 𝕏_{u,t} + X_{s,u} ⊗ X_{u,t}`.

use crate::error::{Error, Result};
use crate::fbm::{SamplePath, TimeGrid};

/// `acc += a ⊗ b` for row-major `d × d` storage.
#[inline]
pub(crate) fn add_outer(acc: &mut [f64], a: &[f64], b: &[f64]) {
    let d = a.len();
    for i in 0..d {
        let ai = a[i];
        if ai == 0.0 {
            continue;
        }
        let row = &mut acc[i * d..(i + 1) * d];
        for (r, bj) in row.iter_mut().zip(b) {
            *r += ai * bj;
        }
    }
}

#[inline]
pub(crate) fn euclid(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

#[inline]
pub(crate) fn euclid_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

/// Running `(X_{s,t}, 𝕏_{s,t})` that can be extended on either side.
#[derive(Debug, Clone)]
pub(crate) struct ChenFold {
    pub x: Vec<f64>,
    pub xx: Vec<f64>,
}

impl ChenFold {
    pub fn new(dim: usize) -> Self {
        ChenFold { x: vec![0.0; dim], xx: vec![0.0; dim * dim] }
    }

    pub fn reset(&mut self) {
        self.x.iter_mut().for_each(|v| *v = 0.0);
        self.xx.iter_mut().for_each(|v| *v = 0.0);
    }

    /// Append an interval on the right: `[s,t] -> [s,t']`.
    #[inline]
    pub fn push_right(&mut self, inc1: &[f64], inc2: &[f64]) {
        add_outer(&mut self.xx, &self.x, inc1);
        for (a, b) in self.xx.iter_mut().zip(inc2) {
            *a += b;
        }
        for (a, b) in self.x.iter_mut().zip(inc1) {
            *a += b;
        }
    }

    /// Prepend an interval on the left: `[s,t] -> [s',t]`.
    #[inline]
    pub fn push_left(&mut self, inc1: &[f64], inc2: &[f64]) {
        add_outer(&mut self.xx, inc1, &self.x);
        for (a, b) in self.xx.iter_mut().zip(inc2) {
            *a += b;
        }
        for (a, b) in self.x.iter_mut().zip(inc1) {
            *a += b;
        }
    }
}

/// A level-2 value `𝕏_{s,t}` tagged with its interval.
#[derive(Debug, Clone, PartialEq)]
pub struct Level2Value {
    pub s: f64,
    pub t: f64,
    pub dim: usize,
    /// Row-major `dim × dim`.
    pub matrix: Vec<f64>,
}

impl Level2Value {
    pub fn zeros(s: f64, t: f64, dim: usize) -> Self {
        Level2Value { s, t, dim, matrix: vec![0.0; dim * dim] }
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.matrix[i * self.dim + j]
    }
}

/// `𝕏_{s,t} = 𝕏_{s,u} + 𝕏_{u,t} + X_{s,u} ⊗ X_{u,t}`.
pub fn chen_combine(a: &Level2Value, b: &Level2Value, x_su: &[f64], x_ut: &[f64]) -> Result<Level2Value> {
    let scale = a.t.abs().max(b.s.abs()).max(1.0);
    if (a.t - b.s).abs() > 1e-12 * scale {
        return Err(Error::IntervalMismatch { left_end: a.t, right_start: b.s });
    }
    let d = a.dim;
    if b.dim != d || x_su.len() != d || x_ut.len() != d {
        return Err(Error::DimensionMismatch { expected: d, got: b.dim.max(x_su.len()).max(x_ut.len()) });
    }
    let mut matrix: Vec<f64> = a.matrix.iter().zip(&b.matrix).map(|(p, q)| p + q).collect();
    add_outer(&mut matrix, x_su, x_ut);
    Ok(Level2Value { s: a.s, t: b.t, dim: d, matrix })
}

/// Per-interval level-1 and level-2 data on a grid.
#[derive(Debug, Clone, PartialEq)]
pub struct GridRoughPath {
    grid: TimeGrid,
    dim: usize,
    inc1: Vec<f64>,
    inc2: Vec<f64>,
}

impl GridRoughPath {
    pub fn new(grid: TimeGrid, dim: usize, inc1: Vec<f64>, inc2: Vec<f64>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::param("dim", "must be at least 1"));
        }
        let n = grid.n_steps();
        if inc1.len() != n * dim {
            return Err(Error::DimensionMismatch { expected: n * dim, got: inc1.len() });
        }
        if inc2.len() != n * dim * dim {
            return Err(Error::DimensionMismatch { expected: n * dim * dim, got: inc2.len() });
        }
        if inc1.iter().chain(&inc2).any(|v| !v.is_finite()) {
            return Err(Error::param("increments", "non-finite entry"));
        }
        Ok(GridRoughPath { grid, dim, inc1, inc2 })
    }

    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn n_intervals(&self) -> usize {
        self.grid.n_steps()
    }

    /// Level-1 increment over interval `k`.
    pub fn inc1(&self, k: usize) -> &[f64] {
        &self.inc1[k * self.dim..(k + 1) * self.dim]
    }

    /// Level-2 matrix over interval `k`, row-major.
    pub fn inc2(&self, k: usize) -> &[f64] {
        let dd = self.dim * self.dim;
        &self.inc2[k * dd..(k + 1) * dd]
    }

    pub fn inc2_mut(&mut self, k: usize) -> &mut [f64] {
        let dd = self.dim * self.dim;
        &mut self.inc2[k * dd..(k + 1) * dd]
    }

    /// Level-1 path, zero at the zero node (or at the first node if the grid
    /// does not contain 0).
    pub fn path(&self) -> SamplePath {
        let d = self.dim;
        let mut values = vec![0.0; self.grid.n_nodes() * d];
        for k in 0..self.n_intervals() {
            for c in 0..d {
                values[(k + 1) * d + c] = values[k * d + c] + self.inc1[k * d + c];
            }
        }
        if let Some(z) = self.grid.zero_index() {
            let anchor: Vec<f64> = values[z * d..(z + 1) * d].to_vec();
            for chunk in values.chunks_mut(d) {
                chunk.iter_mut().zip(&anchor).for_each(|(v, a)| *v -= a);
            }
        }
        SamplePath::new(self.grid, d, values).expect("finite increments give a finite path")
    }

    /// `(X_{t_i,t_j}, 𝕏_{t_i,t_j})` for node indices `i ≤ j`.
    pub fn reconstruct_nodes(&self, i: usize, j: usize) -> Result<(Vec<f64>, Vec<f64>)> {
        if i > j || j > self.n_intervals() {
            return Err(Error::param("nodes", format!("need i ≤ j ≤ {}, got ({i}, {j})", self.n_intervals())));
        }
        let mut fold = ChenFold::new(self.dim);
        for k in i..j {
            fold.push_right(self.inc1(k), self.inc2(k));
        }
        Ok((fold.x, fold.xx))
    }

    /// `(ω¹_{s,t}, ω²_{s,t})` for grid times `s ≤ t`.
    pub fn reconstruct(&self, s: f64, t: f64) -> Result<(Vec<f64>, Level2Value)> {
        let i = self.grid.node_index(s)?;
        let j = self.grid.node_index(t)?;
        if i > j {
            return Err(Error::param("interval", format!("s = {s} exceeds t = {t}")));
        }
        let (x, xx) = self.reconstruct_nodes(i, j)?;
        Ok((x, Level2Value { s: self.grid.time(i), t: self.grid.time(j), dim: self.dim, matrix: xx }))
    }

    /// Rough path restricted to nodes `i0..=i1`.
    pub fn window(&self, i0: usize, i1: usize) -> Result<Self> {
        let grid = self.grid.sub_grid(i0, i1)?;
        let d = self.dim;
        Ok(GridRoughPath {
            grid,
            dim: d,
            inc1: self.inc1[i0 * d..i1 * d].to_vec(),
            inc2: self.inc2[i0 * d * d..i1 * d * d].to_vec(),
        })
    }

    /// Rough path restricted to the grid times `[s, t]`.
    pub fn window_times(&self, s: f64, t: f64) -> Result<Self> {
        self.window(self.grid.node_index(s)?, self.grid.node_index(t)?)
    }

    /// Exact coarsening: blocks of `stride` intervals are folded with Chen's relation.
    pub fn coarsen(&self, stride: usize) -> Result<Self> {
        let grid = self.grid.coarsened(stride)?;
        let d = self.dim;
        let mut inc1 = Vec::with_capacity(grid.n_steps() * d);
        let mut inc2 = Vec::with_capacity(grid.n_steps() * d * d);
        let mut fold = ChenFold::new(d);
        for b in 0..grid.n_steps() {
            fold.reset();
            for k in b * stride..(b + 1) * stride {
                fold.push_right(self.inc1(k), self.inc2(k));
            }
            inc1.extend_from_slice(&fold.x);
            inc2.extend_from_slice(&fold.xx);
        }
        Ok(GridRoughPath { grid, dim: d, inc1, inc2 })
    }

    /// Same per-interval data relabelled on a translated grid.
    pub(crate) fn with_grid(&self, grid: TimeGrid) -> Self {
        GridRoughPath { grid, ..self.clone() }
    }

    pub(crate) fn check_compatible(&self, other: &GridRoughPath) -> Result<()> {
        if !self.grid.same_nodes(&other.grid) {
            return Err(Error::GridMismatch("rough paths live on different grids".into()));
        }
        if self.dim != other.dim {
            return Err(Error::DimensionMismatch { expected: self.dim, got: other.dim });
        }
        Ok(())
    }
}

/// Canonical lift at the path's own resolution.
///
/// Upper off-diagonal entries are left-point sums `Σ X^i_{s,t_k} X^j_{t_k,t_{k+1}}`,
/// the diagonal is `½(X^i_{s,t})²`, and the lower entries are fixed by
/// `𝕏^{j,i} = X^i X^j - 𝕏^{i,j}`. Per interval this means: zero above the
/// diagonal, `½x_i²` on it and `x_i x_j` below it.
pub fn lift_left_riemann(path: &SamplePath) -> GridRoughPath {
    let d = path.dim();
    let n = path.grid().n_steps();
    let mut inc1 = Vec::with_capacity(n * d);
    let mut inc2 = vec![0.0; n * d * d];
    for k in 0..n {
        let x = path.increment(k, k + 1);
        let block = &mut inc2[k * d * d..(k + 1) * d * d];
        for i in 0..d {
            block[i * d + i] = 0.5 * x[i] * x[i];
            for j in 0..i {
                block[i * d + j] = x[i] * x[j];
            }
        }
        inc1.extend_from_slice(&x);
    }
    GridRoughPath { grid: *path.grid(), dim: d, inc1, inc2 }
}

/// Lift at the sampling resolution, then folded onto every `stride`-th node.
pub fn lift_left_riemann_coarse(path: &SamplePath, stride: usize) -> Result<GridRoughPath> {
    lift_left_riemann(path).coarsen(stride)
}

/// Canonical lift of a differentiable path from node values and node derivatives.
///
/// Per interval the symmetric part is `½ x ⊗ x` and the antisymmetric part is
/// the endpoint-corrected trapezoid value `(h/12)(x ⊗ Δ - Δ ⊗ x)` with
/// `Δ = Ẋ_{t_{k+1}} - Ẋ_{t_k}`; this is exact when the derivative is
/// piecewise linear between nodes.
pub fn lift_smooth_quadrature(path: &SamplePath, derivative: &[f64]) -> Result<GridRoughPath> {
    let d = path.dim();
    let n = path.grid().n_steps();
    if derivative.len() != path.n_nodes() * d {
        return Err(Error::DimensionMismatch { expected: path.n_nodes() * d, got: derivative.len() });
    }
    let h = path.grid().spacing();
    let mut inc1 = Vec::with_capacity(n * d);
    let mut inc2 = vec![0.0; n * d * d];
    for k in 0..n {
        let x = path.increment(k, k + 1);
        let du = &derivative[k * d..(k + 1) * d];
        let dv = &derivative[(k + 1) * d..(k + 2) * d];
        let block = &mut inc2[k * d * d..(k + 1) * d * d];
        for i in 0..d {
            for j in 0..d {
                let anti = h / 12.0 * (x[i] * (dv[j] - du[j]) - (dv[i] - du[i]) * x[j]);
                block[i * d + j] = 0.5 * x[i] * x[j] + anti;
            }
        }
        inc1.extend_from_slice(&x);
    }
    GridRoughPath::new(*path.grid(), d, inc1, inc2)
}

/// Entrywise `max |Sym(𝕏_{s,t}) - ½ X_{s,t} ⊗ X_{s,t}|` over all node pairs.
pub fn geometricity_residual(rp: &GridRoughPath) -> f64 {
    let d = rp.dim();
    let n = rp.n_intervals();
    let mut worst: f64 = 0.0;
    let mut fold = ChenFold::new(d);
    for i in 0..n {
        fold.reset();
        for k in i..n {
            fold.push_right(rp.inc1(k), rp.inc2(k));
            for a in 0..d {
                for b in a..d {
                    let sym = 0.5 * (fold.xx[a * d + b] + fold.xx[b * d + a]);
                    worst = worst.max((sym - 0.5 * fold.x[a] * fold.x[b]).abs());
                }
            }
        }
    }
    worst
}

/// Estimated `σ²(u) = E|X_{t+u} - X_t|² / d` with monotonicity and concavity flags.
#[derive(Debug, Clone, PartialEq)]
pub struct ConcavityReport {
    pub lags: Vec<f64>,
    pub sigma2: Vec<f64>,
    pub std_err: Vec<f64>,
    /// Indices `k` with `σ²(u_{k+1})` significantly below `σ²(u_k)`.
    pub monotonicity_violations: Vec<usize>,
    /// Indices `k` where the chord slope increases significantly from
    /// `[u_k, u_{k+1}]` to `[u_{k+1}, u_{k+2}]`.
    pub concavity_violations: Vec<usize>,
    pub n_paths: usize,
}

pub const MIN_CONCAVITY_ENSEMBLE: usize = 1000;

/// Diagnostic for the concave, non-decreasing variance-of-increments criterion.
///
/// `lags` are in grid steps and must be strictly increasing. A violation is
/// reported only if it exceeds `z` combined standard errors.
pub fn sigma_concavity_check(ensemble: &[SamplePath], lags: &[usize], z: f64) -> Result<ConcavityReport> {
    if ensemble.len() < MIN_CONCAVITY_ENSEMBLE {
        return Err(Error::TooFewSamples { needed: MIN_CONCAVITY_ENSEMBLE, got: ensemble.len() });
    }
    let grid = *ensemble[0].grid();
    let d = ensemble[0].dim();
    if ensemble.iter().any(|p| !p.grid().same_nodes(&grid) || p.dim() != d) {
        return Err(Error::GridMismatch("ensemble members differ in grid or dimension".into()));
    }
    if lags.is_empty() || lags[0] == 0 || lags.windows(2).any(|w| w[1] <= w[0]) || *lags.last().unwrap() >= grid.n_nodes() {
        return Err(Error::param("lags", "must be strictly increasing, positive and shorter than the grid"));
    }
    let m = ensemble.len() as f64;
    let mut sigma2 = Vec::with_capacity(lags.len());
    let mut std_err = Vec::with_capacity(lags.len());
    for &lag in lags {
        let per_path: Vec<f64> = ensemble
            .iter()
            .map(|p| {
                let count = grid.n_nodes() - lag;
                let total: f64 = (0..count)
                    .map(|t| p.value(t + lag).iter().zip(p.value(t)).map(|(a, b)| (a - b) * (a - b)).sum::<f64>())
                    .sum();
                total / (count * d) as f64
            })
            .collect();
        let mean = per_path.iter().sum::<f64>() / m;
        let var = per_path.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (m - 1.0);
        sigma2.push(mean);
        std_err.push((var / m).sqrt());
    }
    let scale = sigma2.iter().fold(0.0f64, |a, b| a.max(b.abs()));
    let eps = 1e-12 * scale.max(f64::MIN_POSITIVE);
    let h = grid.spacing();
    let times: Vec<f64> = lags.iter().map(|&l| l as f64 * h).collect();

    let monotonicity_violations = (0..lags.len().saturating_sub(1))
        .filter(|&k| {
            let tol = z * std_err[k].hypot(std_err[k + 1]) + eps;
            sigma2[k + 1] < sigma2[k] - tol
        })
        .collect();

    let concavity_violations = (0..lags.len().saturating_sub(2))
        .filter(|&k| {
            let w0 = times[k + 1] - times[k];
            let w1 = times[k + 2] - times[k + 1];
            let s0 = (sigma2[k + 1] - sigma2[k]) / w0;
            let s1 = (sigma2[k + 2] - sigma2[k + 1]) / w1;
            let tol = z * (std_err[k] + 2.0 * std_err[k + 1] + std_err[k + 2]) / w0.min(w1) + eps / w0.min(w1);
            s1 > s0 + tol
        })
        .collect();

    Ok(ConcavityReport {
        lags: times,
        sigma2,
        std_err,
        monotonicity_violations,
        concavity_violations,
        n_paths: ensemble.len(),
    })
}
