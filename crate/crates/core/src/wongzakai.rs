//! The smooth stationary approximation of a sampled driver.
//!
//! For a window `δ = k·h`, the approximate noise is the forward difference
//! quotient `𝒢_δ(θ_tω) = (ω(t+δ) - ω(t))/δ` and the approximating path is its
//! integral `W_δ(t) = ∫_0^t 𝒢_δ(θ_sω) ds`, computed here from the equivalent
//! form `(∫_t^{t+δ} ω - ∫_0^δ ω)/δ` with the trapezoid rule. Both need ω on
//! `[t_min, t_max + δ]`, so every function takes the extended path and returns
//! objects on the grid with the last `k` steps removed.

use crate::error::{Error, Result};
use crate::fbm::{SamplePath, TimeGrid};
use crate::lift::{lift_smooth_quadrature, GridRoughPath};

/// Averaging window `δ`, always an exact multiple of the grid spacing.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DeltaParam {
    delta: f64,
    grid_multiple: usize,
}

impl DeltaParam {
    pub fn from_multiple(grid: &TimeGrid, grid_multiple: usize) -> Result<Self> {
        if grid_multiple == 0 {
            return Err(Error::param("delta", "grid multiple must be positive"));
        }
        let delta = grid_multiple as f64 * grid.spacing();
        if delta > 1.0 + 1e-12 {
            return Err(Error::param("delta", format!("{delta} exceeds 1")));
        }
        Ok(DeltaParam { delta, grid_multiple })
    }

    pub fn new(grid: &TimeGrid, delta: f64) -> Result<Self> {
        if !(delta > 0.0) {
            return Err(Error::param("delta", format!("{delta} must be positive")));
        }
        let k = grid.steps_in(delta)?;
        Self::from_multiple(grid, k)
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    pub fn grid_multiple(&self) -> usize {
        self.grid_multiple
    }
}

fn check_extension(path: &SamplePath, dp: &DeltaParam) -> Result<TimeGrid> {
    let n = path.grid().n_steps();
    let k = dp.grid_multiple;
    if n <= k {
        return Err(Error::OutsideDomain {
            time: path.grid().t_min() + dp.delta,
            t_min: path.grid().t_min(),
            t_max: path.grid().t_max(),
        });
    }
    let out = path.grid().sub_grid(0, n - k)?;
    if out.zero_index().is_none() {
        return Err(Error::InvalidGrid("the approximation is anchored at 0, which is not a node".into()));
    }
    Ok(out)
}

/// `𝒢_δ(θ_tω) = (ω(t+δ) - ω(t))/δ` at grid time `t`.
pub fn g_delta(path: &SamplePath, t: f64, dp: &DeltaParam) -> Result<Vec<f64>> {
    let i = path.grid().node_index(t)?;
    let j = i + dp.grid_multiple;
    if j > path.grid().n_steps() {
        return Err(Error::OutsideDomain { time: t + dp.delta, t_min: path.grid().t_min(), t_max: path.grid().t_max() });
    }
    Ok(path.increment(i, j).into_iter().map(|x| x / dp.delta).collect())
}

/// Trapezoid value of `∫_{t_i}^{t_i+δ} ω` for every output node.
fn window_integrals(path: &SamplePath, k: usize, n_out: usize) -> Vec<f64> {
    let d = path.dim();
    let h = path.grid().spacing();
    let mut s = vec![0.0; n_out * d];
    for i in 0..n_out {
        let acc = &mut s[i * d..(i + 1) * d];
        for j in 0..=k {
            let w = if j == 0 || j == k { 0.5 } else { 1.0 };
            for (a, v) in acc.iter_mut().zip(path.value(i + j)) {
                *a += w * v;
            }
        }
        acc.iter_mut().for_each(|a| *a *= h);
    }
    s
}

/// `W_δ(·, ω)` on the grid shortened by `δ`; zero at time 0.
pub fn w_delta(path: &SamplePath, dp: &DeltaParam) -> Result<SamplePath> {
    let out = check_extension(path, dp)?;
    let d = path.dim();
    let n_out = out.n_nodes();
    let s = window_integrals(path, dp.grid_multiple, n_out);
    let z = out.zero_index().expect("checked above");
    let anchor = s[z * d..(z + 1) * d].to_vec();
    let values = s
        .chunks(d)
        .flat_map(|c| c.iter().zip(&anchor).map(|(a, b)| (a - b) / dp.delta).collect::<Vec<_>>())
        .collect();
    SamplePath::new(out, d, values)
}

/// Samples of `Ẇ_δ(t) = 𝒢_δ(θ_tω)` on the shortened grid.
pub fn w_delta_derivative(path: &SamplePath, dp: &DeltaParam) -> Result<Vec<f64>> {
    let out = check_extension(path, dp)?;
    let k = dp.grid_multiple;
    Ok((0..out.n_nodes())
        .flat_map(|i| path.increment(i, i + k).into_iter().map(|x| x / dp.delta))
        .collect())
}

/// The smooth second-order process `𝕎_δ` together with its level-1 path `W_δ`.
pub fn ww_delta(path: &SamplePath, dp: &DeltaParam) -> Result<GridRoughPath> {
    let w = w_delta(path, dp)?;
    let deriv = w_delta_derivative(path, dp)?;
    lift_smooth_quadrature(&w, &deriv)
}

/// `X_δ(t) = ω(t) - W_δ(t, ω)` on the shortened grid.
pub fn x_delta(path: &SamplePath, dp: &DeltaParam) -> Result<SamplePath> {
    let w = w_delta(path, dp)?;
    let omega = path.restrict(0, w.grid().n_steps())?;
    omega.difference(&w)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fbm::{sample_fbm, wiener_shift, FbmParams};
    use crate::lift::geometricity_residual;

    fn linear(v: &[f64], grid: TimeGrid) -> SamplePath {
        let v = v.to_vec();
        SamplePath::from_fn(grid, v.len(), |t, o| o.iter_mut().zip(&v).for_each(|(x, c)| *x = c * t)).unwrap()
    }

    #[test]
    fn delta_must_be_grid_multiple() {
        let g = TimeGrid::new(0.0, 1.0, 64).unwrap();
        assert_eq!(DeltaParam::new(&g, 0.125).unwrap().grid_multiple(), 8);
        assert!(DeltaParam::new(&g, 0.01).is_err());
        assert!(DeltaParam::from_multiple(&g, 0).is_err());
    }

    #[test]
    fn g_delta_of_linear_path() {
        let g = TimeGrid::new(0.0, 1.0, 32).unwrap();
        let p = linear(&[2.0, -1.0], g);
        let dp = DeltaParam::from_multiple(&g, 4).unwrap();
        for i in 0..=28 {
            let v = g_delta(&p, g.time(i), &dp).unwrap();
            assert!((v[0] - 2.0).abs() < 1e-12 && (v[1] + 1.0).abs() < 1e-12);
        }
        assert!(g_delta(&p, g.time(29), &dp).is_err());
    }

    #[test]
    fn g_delta_matches_shifted_origin() {
        let g = TimeGrid::new(-1.0, 1.0, 32).unwrap();
        let p = sample_fbm(g, &FbmParams::new(0.4, 2, 5).unwrap()).unwrap();
        let dp = DeltaParam::from_multiple(&g, 3).unwrap();
        let t = g.time(20);
        let a = g_delta(&p, t, &dp).unwrap();
        let b = g_delta(&wiener_shift(&p, t).unwrap(), 0.0, &dp).unwrap();
        for (x, y) in a.iter().zip(&b) {
            assert!((x - y).abs() < 1e-13);
        }
        // δ = h: plain forward difference quotient
        let dh = DeltaParam::from_multiple(&g, 1).unwrap();
        let v = g_delta(&p, t, &dh).unwrap();
        let inc = p.increment(20, 21);
        assert!((v[0] - inc[0] / g.spacing()).abs() < 1e-12);
    }

    #[test]
    fn linear_paths_are_fixed_points() {
        let g = TimeGrid::new(-0.5, 1.25, 56).unwrap();
        let p = linear(&[0.7, 3.0], g);
        let dp = DeltaParam::from_multiple(&g, 8).unwrap();
        let w = w_delta(&p, &dp).unwrap();
        assert_eq!(w.grid().n_steps(), 48);
        for i in 0..w.n_nodes() {
            let t = w.grid().time(i);
            assert!((w.value(i)[0] - 0.7 * t).abs() < 1e-13);
            assert!((w.value(i)[1] - 3.0 * t).abs() < 1e-13);
        }
        let x = x_delta(&p, &dp).unwrap();
        assert!(x.values().iter().all(|v| v.abs() < 1e-13));
    }

    #[test]
    fn w_delta_is_anchored() {
        let g = TimeGrid::new(-1.0, 1.0, 40).unwrap();
        let p = sample_fbm(g, &FbmParams::new(0.45, 1, 11).unwrap()).unwrap();
        let dp = DeltaParam::from_multiple(&g, 5).unwrap();
        let w = w_delta(&p, &dp).unwrap();
        assert!(w.is_anchored());
        assert!(x_delta(&p, &dp).unwrap().is_anchored());
    }

    #[test]
    fn insufficient_extension() {
        let g = TimeGrid::new(0.0, 1.0, 4).unwrap();
        let p = linear(&[1.0], g);
        let dp = DeltaParam::from_multiple(&g, 4).unwrap();
        assert!(w_delta(&p, &dp).is_err());
    }

    #[test]
    fn ww_delta_of_linear_path() {
        let g = TimeGrid::new(0.0, 1.0, 40).unwrap();
        let (v, w) = (1.2, -0.4);
        let p = linear(&[v, w], g);
        let dp = DeltaParam::from_multiple(&g, 8).unwrap();
        let rp = ww_delta(&p, &dp).unwrap();
        for j in 1..=32 {
            let t = rp.grid().time(j);
            let (_, l) = rp.reconstruct_nodes(0, j).unwrap();
            assert!((l[1] - v * w * t * t / 2.0).abs() < 1e-13);
        }
    }

    #[test]
    fn ww_delta_is_geometric() {
        let g = TimeGrid::new(0.0, 1.0, 72).unwrap();
        let p = sample_fbm(g, &FbmParams::new(0.4, 3, 2).unwrap()).unwrap();
        let dp = DeltaParam::from_multiple(&g, 8).unwrap();
        let rp = ww_delta(&p, &dp).unwrap();
        assert!(geometricity_residual(&rp) < 1e-10);
        let (x, l) = rp.reconstruct_nodes(5, 50).unwrap();
        for i in 0..3 {
            assert!((l[i * 4] - 0.5 * x[i] * x[i]).abs() < 1e-12);
        }
    }
}
