//! Fractional Brownian motion on uniform two-sided grids.
//!
//! Paths are sampled exactly: the covariance of the process restricted to the
//! nonzero grid nodes is factored once by Cholesky and every replica is a
//! triangular matrix-vector product against a counter-derived normal stream.

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};

/// Relative tolerance (in units of the spacing) when matching a time to a node.
const NODE_TOL: f64 = 1e-7;

/// A uniform grid `t_min = t_0 < t_1 < ... < t_n = t_max`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimeGrid {
    t_min: f64,
    spacing: f64,
    n_steps: usize,
}

impl TimeGrid {
    pub fn new(t_min: f64, t_max: f64, n_steps: usize) -> Result<Self> {
        if !(t_min.is_finite() && t_max.is_finite()) {
            return Err(Error::InvalidGrid("endpoints must be finite".into()));
        }
        if n_steps == 0 {
            return Err(Error::InvalidGrid("n_steps must be positive".into()));
        }
        if t_max <= t_min {
            return Err(Error::InvalidGrid(format!("t_max ({t_max}) must exceed t_min ({t_min})")));
        }
        let spacing = (t_max - t_min) / n_steps as f64;
        let grid = TimeGrid { t_min, spacing, n_steps };
        if t_min <= 0.0 && 0.0 <= t_max && grid.zero_index().is_none() {
            return Err(Error::InvalidGrid(format!(
                "0 lies in [{t_min}, {t_max}] but is not a node for spacing {spacing}"
            )));
        }
        Ok(grid)
    }

    /// Grid with the given first node and spacing.
    pub fn with_spacing(t_min: f64, spacing: f64, n_steps: usize) -> Result<Self> {
        if !(spacing.is_finite() && spacing > 0.0) {
            return Err(Error::InvalidGrid(format!("spacing must be positive, got {spacing}")));
        }
        Self::new(t_min, t_min + spacing * n_steps as f64, n_steps)
    }

    pub fn t_min(&self) -> f64 {
        self.t_min
    }

    pub fn t_max(&self) -> f64 {
        self.time(self.n_steps)
    }

    pub fn spacing(&self) -> f64 {
        self.spacing
    }

    pub fn n_steps(&self) -> usize {
        self.n_steps
    }

    pub fn n_nodes(&self) -> usize {
        self.n_steps + 1
    }

    /// Time of node `i`. The zero node reports exactly `0.0`.
    pub fn time(&self, i: usize) -> f64 {
        if Some(i) == self.zero_index() {
            0.0
        } else {
            self.t_min + i as f64 * self.spacing
        }
    }

    pub fn times(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.n_nodes()).map(move |i| self.time(i))
    }

    pub fn zero_index(&self) -> Option<usize> {
        let x = -self.t_min / self.spacing;
        let k = x.round();
        if (x - k).abs() <= NODE_TOL && k >= 0.0 && k <= self.n_steps as f64 {
            Some(k as usize)
        } else {
            None
        }
    }

    /// Index of the node at time `t`, rejecting times that are not nodes.
    pub fn node_index(&self, t: f64) -> Result<usize> {
        let x = (t - self.t_min) / self.spacing;
        let k = x.round();
        if k < -NODE_TOL || k > self.n_steps as f64 + NODE_TOL || !x.is_finite() {
            return Err(Error::OutsideDomain { time: t, t_min: self.t_min, t_max: self.t_max() });
        }
        if (x - k).abs() > NODE_TOL {
            return Err(Error::NotANode { time: t, spacing: self.spacing });
        }
        Ok(k as usize)
    }

    /// Number of grid steps spanned by a duration, rejecting non-multiples.
    pub fn steps_in(&self, duration: f64) -> Result<usize> {
        let x = duration / self.spacing;
        let k = x.round();
        if k < 0.0 || (x - k).abs() > NODE_TOL {
            return Err(Error::NotANode { time: duration, spacing: self.spacing });
        }
        Ok(k as usize)
    }

    /// Sub-grid on nodes `i0..=i1`.
    pub fn sub_grid(&self, i0: usize, i1: usize) -> Result<Self> {
        if i1 <= i0 || i1 > self.n_steps {
            return Err(Error::InvalidGrid(format!("bad node window {i0}..={i1} of {}", self.n_steps)));
        }
        Ok(TimeGrid { t_min: self.time(i0), spacing: self.spacing, n_steps: i1 - i0 })
    }

    /// Same grid with `extra` additional steps appended on the right.
    pub fn extended(&self, extra: usize) -> Self {
        TimeGrid { n_steps: self.n_steps + extra, ..*self }
    }

    /// Translate node times by `-tau`.
    pub fn shifted(&self, tau: f64) -> Self {
        TimeGrid { t_min: self.t_min - tau, ..*self }
    }

    /// Every `stride`-th node; `stride` must divide `n_steps`.
    pub fn coarsened(&self, stride: usize) -> Result<Self> {
        if stride == 0 || !self.n_steps.is_multiple_of(stride) {
            return Err(Error::param("stride", format!("{stride} does not divide {} steps", self.n_steps)));
        }
        Ok(TimeGrid { t_min: self.t_min, spacing: self.spacing * stride as f64, n_steps: self.n_steps / stride })
    }

    /// True when both grids have the same nodes up to rounding.
    pub fn same_nodes(&self, other: &TimeGrid) -> bool {
        self.n_steps == other.n_steps
            && (self.spacing - other.spacing).abs() <= NODE_TOL * self.spacing
            && (self.t_min - other.t_min).abs() <= NODE_TOL * self.spacing
    }
}

/// A `dim`-vector-valued path sampled on every node of a grid, stored node-major.
#[derive(Debug, Clone, PartialEq)]
pub struct SamplePath {
    grid: TimeGrid,
    dim: usize,
    values: Vec<f64>,
}

impl SamplePath {
    pub fn new(grid: TimeGrid, dim: usize, values: Vec<f64>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::param("dim", "must be at least 1"));
        }
        if values.len() != grid.n_nodes() * dim {
            return Err(Error::DimensionMismatch { expected: grid.n_nodes() * dim, got: values.len() });
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::param("values", format!("non-finite entry at flat index {i}")));
        }
        Ok(SamplePath { grid, dim, values })
    }

    pub fn scalar(grid: TimeGrid, values: Vec<f64>) -> Result<Self> {
        Self::new(grid, 1, values)
    }

    /// Evaluate `f(t, out)` at every node.
    pub fn from_fn(grid: TimeGrid, dim: usize, mut f: impl FnMut(f64, &mut [f64])) -> Result<Self> {
        let mut values = vec![0.0; grid.n_nodes() * dim];
        for (i, chunk) in values.chunks_mut(dim.max(1)).enumerate() {
            f(grid.time(i), chunk);
        }
        Self::new(grid, dim, values)
    }

    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn n_nodes(&self) -> usize {
        self.grid.n_nodes()
    }

    pub fn value(&self, i: usize) -> &[f64] {
        &self.values[i * self.dim..(i + 1) * self.dim]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    /// `y_{t_j} - y_{t_i}`.
    pub fn increment(&self, i: usize, j: usize) -> Vec<f64> {
        self.value(j).iter().zip(self.value(i)).map(|(b, a)| b - a).collect()
    }

    /// Whether the value at the zero node (if any) is exactly zero.
    pub fn is_anchored(&self) -> bool {
        match self.grid.zero_index() {
            Some(i) => self.value(i).iter().all(|&v| v == 0.0),
            None => true,
        }
    }

    /// Copy of the path on nodes `i0..=i1`.
    pub fn restrict(&self, i0: usize, i1: usize) -> Result<Self> {
        let grid = self.grid.sub_grid(i0, i1)?;
        let values = self.values[i0 * self.dim..(i1 + 1) * self.dim].to_vec();
        Ok(SamplePath { grid, dim: self.dim, values })
    }

    /// Observations at every `stride`-th node.
    pub fn coarsen(&self, stride: usize) -> Result<Self> {
        let grid = self.grid.coarsened(stride)?;
        let values = (0..grid.n_nodes()).flat_map(|i| self.value(i * stride).iter().copied()).collect();
        Ok(SamplePath { grid, dim: self.dim, values })
    }

    /// Pointwise difference `self - other` on identical grids.
    pub fn difference(&self, other: &SamplePath) -> Result<Self> {
        if !self.grid.same_nodes(&other.grid) {
            return Err(Error::GridMismatch("paths live on different grids".into()));
        }
        if self.dim != other.dim {
            return Err(Error::DimensionMismatch { expected: self.dim, got: other.dim });
        }
        let values = self.values.iter().zip(&other.values).map(|(a, b)| a - b).collect();
        Ok(SamplePath { grid: self.grid, dim: self.dim, values })
    }
}

/// Hurst index, dimension and master seed for one fBm draw.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FbmParams {
    pub hurst: f64,
    pub dim: usize,
    pub seed: u64,
}

impl FbmParams {
    pub fn new(hurst: f64, dim: usize, seed: u64) -> Result<Self> {
        validate_hurst(hurst)?;
        if dim == 0 {
            return Err(Error::param("dim", "must be at least 1"));
        }
        Ok(FbmParams { hurst, dim, seed })
    }
}

pub(crate) fn validate_hurst(hurst: f64) -> Result<()> {
    if !(hurst > 1.0 / 3.0 && hurst <= 0.5) {
        return Err(Error::param("hurst", format!("{hurst} is outside (1/3, 1/2]")));
    }
    Ok(())
}

/// `R(s,t) = ½(|t|^{2H} + |s|^{2H} - |t-s|^{2H})`, per scalar component.
pub fn fbm_covariance(s: f64, t: f64, hurst: f64) -> f64 {
    let e = 2.0 * hurst;
    0.5 * (t.abs().powf(e) + s.abs().powf(e) - (t - s).abs().powf(e))
}

/// Random stream for replica `stream` under `master_seed`.
///
/// Streams are addressed by counter, so replica `k` is the same regardless of
/// how many replicas are drawn or in which order.
pub fn replica_rng(master_seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(master_seed);
    rng.set_stream(stream);
    rng
}

/// Cached Cholesky factor of the fBm covariance on one grid.
#[derive(Debug, Clone)]
pub struct FbmSampler {
    grid: TimeGrid,
    hurst: f64,
    nodes: Vec<usize>,
    // packed row-major lower triangle
    factor: Vec<f64>,
}

impl FbmSampler {
    pub fn new(grid: TimeGrid, hurst: f64) -> Result<Self> {
        validate_hurst(hurst)?;
        let zero = grid.zero_index().ok_or_else(|| {
            Error::InvalidGrid(format!("grid [{}, {}] does not contain 0", grid.t_min(), grid.t_max()))
        })?;
        let nodes: Vec<usize> = (0..grid.n_nodes()).filter(|&i| i != zero).collect();
        let times: Vec<f64> = nodes.iter().map(|&i| grid.time(i)).collect();
        let n = nodes.len();
        let cov = DMatrix::from_fn(n, n, |i, j| fbm_covariance(times[i], times[j], hurst));
        let chol = cov.cholesky().ok_or(Error::NotPositiveDefinite { nodes: n, hurst })?;
        let l = chol.l_dirty();
        let mut factor = Vec::with_capacity(n * (n + 1) / 2);
        for i in 0..n {
            for j in 0..=i {
                factor.push(l[(i, j)]);
            }
        }
        if factor.iter().any(|v| !v.is_finite()) || (0..n).any(|i| l[(i, i)] <= 0.0) {
            return Err(Error::NotPositiveDefinite { nodes: n, hurst });
        }
        Ok(FbmSampler { grid, hurst, nodes, factor })
    }

    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    pub fn hurst(&self) -> f64 {
        self.hurst
    }

    /// Draw replica `stream` of a `dim`-dimensional path; components are independent.
    pub fn sample(&self, dim: usize, master_seed: u64, stream: u64) -> Result<SamplePath> {
        if dim == 0 {
            return Err(Error::param("dim", "must be at least 1"));
        }
        let mut rng = replica_rng(master_seed, stream);
        let n = self.nodes.len();
        let mut values = vec![0.0; self.grid.n_nodes() * dim];
        let mut z = vec![0.0; n];
        for c in 0..dim {
            for zi in z.iter_mut() {
                *zi = rng.sample(StandardNormal);
            }
            let mut offset = 0;
            for (row, &node) in self.nodes.iter().enumerate() {
                let l_row = &self.factor[offset..offset + row + 1];
                let x: f64 = l_row.iter().zip(&z[..=row]).map(|(a, b)| a * b).sum();
                values[node * dim + c] = x;
                offset += row + 1;
            }
        }
        SamplePath::new(self.grid, dim, values)
    }
}

/// One fBm path, stream 0 of `params.seed`.
pub fn sample_fbm(grid: TimeGrid, params: &FbmParams) -> Result<SamplePath> {
    FbmSampler::new(grid, params.hurst)?.sample(params.dim, params.seed, 0)
}

/// `θ_τ ω(t) = ω(t+τ) - ω(τ)` on the grid translated by `-τ`.
pub fn wiener_shift(path: &SamplePath, tau: f64) -> Result<SamplePath> {
    let k = path.grid.node_index(tau)?;
    let grid = TimeGrid { t_min: path.grid.t_min - tau, ..path.grid };
    let anchor = path.value(k).to_vec();
    let values = path
        .values
        .chunks(path.dim)
        .flat_map(|v| v.iter().zip(&anchor).map(|(a, b)| a - b))
        .collect();
    Ok(SamplePath { grid, dim: path.dim, values })
}
