//! Hölder and variation seminorms, rough-path metrics and greedy stopping times.
//!
//! Every p-variation here is the exact supremum over partitions whose points
//! are grid nodes. The supremum decomposes on the last block, so
//!
//! ```text
//! best[j] = max_{k<j} ( best[k] + ‖y_{t_k,t_j}‖^p ),   ⦀y⦀_{p-var} = best[n]^{1/p}
//! ```
//!
//! is evaluated in O(n²) block evaluations. Level-2 blocks are produced column
//! by column by folding intervals onto the left end with Chen's relation.

use crate::error::{Error, Result};
use crate::fbm::{SamplePath, TimeGrid};
use crate::lift::{euclid, euclid_diff, ChenFold, GridRoughPath};

/// Inclusive node range `start..=end`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct NodeWindow {
    pub start: usize,
    pub end: usize,
}

impl NodeWindow {
    pub fn new(start: usize, end: usize) -> Self {
        NodeWindow { start, end }
    }

    pub fn full(grid: &TimeGrid) -> Self {
        NodeWindow { start: 0, end: grid.n_steps() }
    }

    pub fn from_times(grid: &TimeGrid, s: f64, t: f64) -> Result<Self> {
        Ok(NodeWindow { start: grid.node_index(s)?, end: grid.node_index(t)? })
    }

    pub fn len(&self) -> usize {
        self.end.saturating_sub(self.start) + 1
    }

    pub fn is_empty(&self) -> bool {
        self.end <= self.start
    }

    fn check(&self, grid: &TimeGrid) -> Result<()> {
        if self.end > grid.n_steps() || self.end < self.start {
            return Err(Error::param("window", format!("{}..={} outside 0..={}", self.start, self.end, grid.n_steps())));
        }
        Ok(())
    }
}

/// Level-1 exponent `p` with paired level-2 exponent `q = p/2`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VariationParams {
    pub p: f64,
    pub q: f64,
}

impl VariationParams {
    pub fn new(p: f64) -> Result<Self> {
        if !(p >= 2.0) || !p.is_finite() {
            return Err(Error::param("p", format!("{p} must be at least 2 so that q = p/2 ≥ 1")));
        }
        Ok(VariationParams { p, q: p / 2.0 })
    }

    /// `p = 1/β`.
    pub fn from_holder(beta: f64) -> Result<Self> {
        if !(beta > 0.0 && beta <= 0.5) {
            return Err(Error::param("beta", format!("{beta} must lie in (0, 1/2]")));
        }
        Self::new(1.0 / beta)
    }
}

#[inline]
fn pow_p(x: f64, p: f64) -> f64 {
    if p == 1.0 {
        x
    } else if p == 2.0 {
        x * x
    } else if x == 0.0 {
        0.0
    } else {
        x.powf(p)
    }
}

fn check_exponent(name: &'static str, p: f64) -> Result<()> {
    if !(p >= 1.0) || !p.is_finite() {
        return Err(Error::param(name, format!("{p} must be at least 1")));
    }
    Ok(())
}

/// Pull-form DP. `column(j, col)` must write block norms `‖y_{t_k,t_j}‖` into
/// `col[k]` for every local `k < j`. Returns the sum `best[n-1]` (not its root).
fn variation_sum(n_nodes: usize, p: f64, mut column: impl FnMut(usize, &mut [f64])) -> f64 {
    if n_nodes < 2 {
        return 0.0;
    }
    let mut best = vec![0.0; n_nodes];
    let mut col = vec![0.0; n_nodes];
    for j in 1..n_nodes {
        column(j, &mut col[..j]);
        best[j] = (0..j).map(|k| best[k] + pow_p(col[k], p)).fold(0.0, f64::max);
    }
    best[n_nodes - 1]
}

/// Exact p-variation of a node-major list of `dim`-vectors.
pub fn pvar_of_values(values: &[f64], dim: usize, p: f64) -> Result<f64> {
    check_exponent("p", p)?;
    if dim == 0 || !values.len().is_multiple_of(dim) {
        return Err(Error::param("values", "length must be a multiple of dim"));
    }
    let n = values.len() / dim;
    let at = |i: usize| &values[i * dim..(i + 1) * dim];
    let s = variation_sum(n, p, |j, col| {
        for (k, c) in col.iter_mut().enumerate() {
            *c = euclid_diff(at(j), at(k));
        }
    });
    Ok(s.powf(1.0 / p))
}

/// `⦀y⦀_{p-var}` over the whole grid.
pub fn pvar_seminorm(path: &SamplePath, p: f64) -> Result<f64> {
    pvar_of_values(path.values(), path.dim(), p)
}

/// `⦀y⦀_{p-var}` over a node window.
pub fn pvar_seminorm_window(path: &SamplePath, p: f64, w: NodeWindow) -> Result<f64> {
    w.check(path.grid())?;
    let d = path.dim();
    pvar_of_values(&path.values()[w.start * d..(w.end + 1) * d], d, p)
}

fn level2_sum(rp: &GridRoughPath, q: f64, w: NodeWindow) -> f64 {
    let d = rp.dim();
    let mut fold = ChenFold::new(d);
    variation_sum(w.len(), q, |j, col| {
        fold.reset();
        for k in (0..j).rev() {
            let iv = w.start + k;
            fold.push_left(rp.inc1(iv), rp.inc2(iv));
            col[k] = euclid(&fold.xx);
        }
    })
}

/// `⦀𝕏⦀_{q-var}` over the whole grid.
pub fn pvar_level2(rp: &GridRoughPath, q: f64) -> Result<f64> {
    pvar_level2_window(rp, q, NodeWindow::full(rp.grid()))
}

pub fn pvar_level2_window(rp: &GridRoughPath, q: f64, w: NodeWindow) -> Result<f64> {
    check_exponent("q", q)?;
    w.check(rp.grid())?;
    Ok(level2_sum(rp, q, w).powf(1.0 / q))
}

fn level1_sum(rp: &GridRoughPath, p: f64, w: NodeWindow) -> f64 {
    let d = rp.dim();
    let mut x = vec![0.0; d];
    variation_sum(w.len(), p, |j, col| {
        x.iter_mut().for_each(|v| *v = 0.0);
        for k in (0..j).rev() {
            for (a, b) in x.iter_mut().zip(rp.inc1(w.start + k)) {
                *a += b;
            }
            col[k] = euclid(&x);
        }
    })
}

/// `⦀𝐗⦀_{p-var} = (⦀X⦀^p_{p-var} + ⦀𝕏⦀^q_{q-var})^{1/p}` with `q = p/2`.
pub fn homogeneous_pvar_norm(rp: &GridRoughPath, p: f64) -> Result<f64> {
    homogeneous_pvar_norm_window(rp, p, NodeWindow::full(rp.grid()))
}

pub fn homogeneous_pvar_norm_window(rp: &GridRoughPath, p: f64, w: NodeWindow) -> Result<f64> {
    let vp = VariationParams::new(p)?;
    w.check(rp.grid())?;
    Ok((level1_sum(rp, vp.p, w) + level2_sum(rp, vp.q, w)).powf(1.0 / vp.p))
}

/// `sup ‖y_{s,t}‖ / (t-s)^α` over node pairs of the window.
pub fn holder_seminorm(path: &SamplePath, alpha: f64, w: NodeWindow) -> Result<f64> {
    if !(alpha > 0.0 && alpha <= 1.0) {
        return Err(Error::param("alpha", format!("{alpha} must lie in (0, 1]")));
    }
    w.check(path.grid())?;
    if w.is_empty() {
        return Err(Error::EmptyWindow);
    }
    let h = path.grid().spacing();
    let lag_pow: Vec<f64> = (0..w.len()).map(|l| (l as f64 * h).powf(alpha)).collect();
    let mut worst: f64 = 0.0;
    for j in w.start + 1..=w.end {
        for k in w.start..j {
            worst = worst.max(euclid_diff(path.value(j), path.value(k)) / lag_pow[j - k]);
        }
    }
    Ok(worst)
}

/// `ρ_α(𝐗,𝐘) = sup |X_{s,t}-Y_{s,t}|/(t-s)^α + sup |𝕏_{s,t}-𝕐_{s,t}|/(t-s)^{2α}`.
pub fn rho_alpha_metric(a: &GridRoughPath, b: &GridRoughPath, alpha: f64) -> Result<f64> {
    a.check_compatible(b)?;
    if !(alpha > 0.0 && alpha <= 1.0) {
        return Err(Error::param("alpha", format!("{alpha} must lie in (0, 1]")));
    }
    let n = a.n_intervals();
    let d = a.dim();
    let h = a.grid().spacing();
    let pow1: Vec<f64> = (0..=n).map(|l| (l as f64 * h).powf(alpha)).collect();
    let pow2: Vec<f64> = pow1.iter().map(|v| v * v).collect();
    let mut fa = ChenFold::new(d);
    let mut fb = ChenFold::new(d);
    let (mut sup1, mut sup2) = (0.0f64, 0.0f64);
    for i in 0..n {
        fa.reset();
        fb.reset();
        for k in i..n {
            fa.push_right(a.inc1(k), a.inc2(k));
            fb.push_right(b.inc1(k), b.inc2(k));
            let lag = k + 1 - i;
            sup1 = sup1.max(euclid_diff(&fa.x, &fb.x) / pow1[lag]);
            sup2 = sup2.max(euclid_diff(&fa.xx, &fb.xx) / pow2[lag]);
        }
    }
    Ok(sup1 + sup2)
}

/// `⦀X-Y⦀_{p-var}` for the level-1 parts of two rough paths.
pub fn pvar_level1_difference(a: &GridRoughPath, b: &GridRoughPath, p: f64) -> Result<f64> {
    a.check_compatible(b)?;
    check_exponent("p", p)?;
    let diff: Vec<f64> = (0..a.n_intervals()).flat_map(|k| a.inc1(k).iter().zip(b.inc1(k)).map(|(x, y)| x - y)).collect();
    let d = a.dim();
    let mut x = vec![0.0; d];
    let s = variation_sum(a.grid().n_nodes(), p, |j, col| {
        x.iter_mut().for_each(|v| *v = 0.0);
        for k in (0..j).rev() {
            for (v, inc) in x.iter_mut().zip(&diff[k * d..(k + 1) * d]) {
                *v += inc;
            }
            col[k] = euclid(&x);
        }
    });
    Ok(s.powf(1.0 / p))
}

/// `⦀𝕏-𝕐⦀_{q-var}` for the level-2 parts of two rough paths.
pub fn pvar_level2_difference(a: &GridRoughPath, b: &GridRoughPath, q: f64) -> Result<f64> {
    a.check_compatible(b)?;
    check_exponent("q", q)?;
    let d = a.dim();
    let mut fa = ChenFold::new(d);
    let mut fb = ChenFold::new(d);
    let s = variation_sum(a.grid().n_nodes(), q, |j, col| {
        fa.reset();
        fb.reset();
        for k in (0..j).rev() {
            fa.push_left(a.inc1(k), a.inc2(k));
            fb.push_left(b.inc1(k), b.inc2(k));
            col[k] = euclid_diff(&fa.xx, &fb.xx);
        }
    });
    Ok(s.powf(1.0 / q))
}

/// `ρ_{p-var}(𝐗,𝐘) = ⦀X-Y⦀_{p-var} + ⦀𝕏-𝕐⦀_{q-var}` with `q = p/2`.
pub fn rho_pvar_metric(a: &GridRoughPath, b: &GridRoughPath, p: f64) -> Result<f64> {
    let vp = VariationParams::new(p)?;
    Ok(pvar_level1_difference(a, b, vp.p)? + pvar_level2_difference(a, b, vp.q)?)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RhoVarMode {
    /// Supremum over all pairs of node partitions; at most [`RHO_VAR_EXACT_LIMIT`] nodes.
    Exact,
    /// Maximum over pairs of dyadic uniform partitions; a lower bound.
    LowerBound,
}

pub const RHO_VAR_EXACT_LIMIT: usize = 12;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RhoVariation {
    pub value: f64,
    pub exact: bool,
}

/// Rectangular increment `R(v,v') - R(v,u') - R(u,v') + R(u,u')` on node indices.
#[inline]
fn rect(cov: &[f64], n: usize, u: usize, v: usize, up: usize, vp: usize) -> f64 {
    cov[v * n + vp] - cov[v * n + up] - cov[u * n + vp] + cov[u * n + up]
}

/// 2D ρ-variation of a covariance evaluated on the nodes of `grid`.
pub fn rho_var_2d(cov: impl Fn(f64, f64) -> f64, grid: &TimeGrid, rho: f64, mode: RhoVarMode) -> Result<RhoVariation> {
    let n = grid.n_nodes();
    let times: Vec<f64> = grid.times().collect();
    let m: Vec<f64> = (0..n * n).map(|ij| cov(times[ij / n], times[ij % n])).collect();
    rho_var_2d_matrix(&m, n, rho, mode)
}

/// 2D ρ-variation of a row-major `n × n` matrix `R(t_i, t_j)`.
pub fn rho_var_2d_matrix(cov: &[f64], n: usize, rho: f64, mode: RhoVarMode) -> Result<RhoVariation> {
    if !(1.0..2.0).contains(&rho) {
        return Err(Error::param("rho", format!("{rho} must lie in [1, 2)")));
    }
    if cov.len() != n * n {
        return Err(Error::DimensionMismatch { expected: n * n, got: cov.len() });
    }
    if n < 2 {
        return Err(Error::EmptyWindow);
    }
    match mode {
        RhoVarMode::Exact => {
            if n > RHO_VAR_EXACT_LIMIT {
                return Err(Error::WindowTooLarge { nodes: n, limit: RHO_VAR_EXACT_LIMIT });
            }
            let interior = n - 2;
            let mut best_total: f64 = 0.0;
            let mut best = vec![0.0; n];
            for mask in 0u32..(1u32 << interior) {
                let mut part = vec![0];
                part.extend((0..interior).filter(|b| mask >> b & 1 == 1).map(|b| b + 1));
                part.push(n - 1);
                // for a fixed first partition, the second is a 1D DP whose block
                // weight sums over the blocks of the first
                best[0] = 0.0;
                for j in 1..n {
                    best[j] = (0..j)
                        .map(|k| {
                            best[k]
                                + part
                                    .windows(2)
                                    .map(|uv| pow_p(rect(cov, n, uv[0], uv[1], k, j).abs(), rho))
                                    .sum::<f64>()
                        })
                        .fold(0.0, f64::max);
                }
                best_total = best_total.max(best[n - 1]);
            }
            Ok(RhoVariation { value: best_total.powf(1.0 / rho), exact: true })
        }
        RhoVarMode::LowerBound => {
            let mut counts: Vec<usize> = std::iter::successors(Some(1usize), |m| Some(m * 2)).take_while(|&m| m < n - 1).collect();
            counts.push(n - 1);
            let partitions: Vec<Vec<usize>> = counts
                .iter()
                .map(|&m| {
                    let mut v: Vec<usize> = (0..=m).map(|i| (i * (n - 1) + m / 2) / m).collect();
                    v.dedup();
                    v
                })
                .collect();
            let mut best: f64 = 0.0;
            for p1 in &partitions {
                for p2 in &partitions {
                    let s: f64 = p1
                        .windows(2)
                        .flat_map(|a| p2.windows(2).map(move |b| (a[0], a[1], b[0], b[1])))
                        .map(|(u, v, up, vp)| pow_p(rect(cov, n, u, v, up, vp).abs(), rho))
                        .sum();
                    best = best.max(s);
                }
            }
            Ok(RhoVariation { value: best.powf(1.0 / rho), exact: false })
        }
    }
}

/// Greedy stopping times and the interval count `N`.
#[derive(Debug, Clone, PartialEq)]
pub struct StoppingTimes {
    pub nodes: Vec<usize>,
    pub times: Vec<f64>,
}

impl StoppingTimes {
    /// Number of intervals `[τ_i, τ_{i+1}]`.
    pub fn count(&self) -> usize {
        self.nodes.len() - 1
    }
}

/// `τ_{i+1}` is the first node after `τ_i` at which the homogeneous p-variation
/// norm over `[τ_i, node]` reaches `η`; capped at the window end.
pub fn greedy_stopping_times(rp: &GridRoughPath, eta: f64, p: f64, w: NodeWindow) -> Result<StoppingTimes> {
    if !(eta > 0.0) {
        return Err(Error::param("eta", format!("{eta} must be positive")));
    }
    let vp = VariationParams::new(p)?;
    w.check(rp.grid())?;
    let d = rp.dim();
    let target = eta.powf(vp.p);
    let mut nodes = vec![w.start];
    let mut fold = ChenFold::new(d);
    let len = w.len();
    let mut best1 = vec![0.0; len];
    let mut best2 = vec![0.0; len];
    let mut start = w.start;
    let mut j = start + 1;
    while j <= w.end {
        let local = j - start;
        fold.reset();
        let (mut m1, mut m2) = (0.0f64, 0.0f64);
        for k in (0..local).rev() {
            let iv = start + k;
            fold.push_left(rp.inc1(iv), rp.inc2(iv));
            m1 = m1.max(best1[k] + pow_p(euclid(&fold.x), vp.p));
            m2 = m2.max(best2[k] + pow_p(euclid(&fold.xx), vp.q));
        }
        best1[local] = m1;
        best2[local] = m2;
        if m1 + m2 >= target || j == w.end {
            nodes.push(j);
            start = j;
        }
        j += 1;
    }
    if nodes.len() == 1 {
        nodes.push(w.end);
    }
    let times = nodes.iter().map(|&i| rp.grid().time(i)).collect();
    Ok(StoppingTimes { nodes, times })
}
