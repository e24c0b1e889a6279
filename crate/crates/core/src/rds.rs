//! Time shifts of rough paths and the discrete cocycle property of the solution flow.

use crate::error::{Error, Result};
use crate::fbm::FbmSampler;
use crate::lift::{euclid_diff, lift_left_riemann, GridRoughPath};
use crate::rde::{solve_rde, VectorField};
use crate::wongzakai::{ww_delta, DeltaParam};

/// `θ_τ 𝛚`: the same per-interval data on the grid translated by `-τ`.
pub fn shift_rough_path(rp: &GridRoughPath, tau: f64) -> Result<GridRoughPath> {
    rp.grid().node_index(tau)?;
    Ok(rp.with_grid(rp.grid().shifted(tau)))
}

/// One cocycle test case. `delta` is a grid multiple; `None` drives with the fBm lift itself.
#[derive(Debug, Clone, PartialEq)]
pub struct CocycleProbe {
    pub t1: f64,
    pub t2: f64,
    pub y0: Vec<f64>,
    pub seed: u64,
    pub delta: Option<usize>,
}

/// `φ(t, 𝛚, y0)`: solve on `[0, t]` and return the final state.
pub fn flow(vf: &VectorField, rp: &GridRoughPath, t: f64, y0: &[f64]) -> Result<Vec<f64>> {
    let z = rp.grid().node_index(0.0)?;
    let end = rp.grid().node_index(t)?;
    if end < z {
        return Err(Error::param("t", format!("{t} is negative")));
    }
    if end == z {
        return Ok(y0.to_vec());
    }
    let w = rp.window(z, end)?;
    Ok(solve_rde(vf, &w, y0)?.last().to_vec())
}

/// `‖φ(t₁+t₂, 𝛚, y0) - φ(t₂, θ_{t₁}𝛚, φ(t₁, 𝛚, y0))‖` for a given driver.
pub fn cocycle_residual_on(vf: &VectorField, rp: &GridRoughPath, t1: f64, t2: f64, y0: &[f64]) -> Result<f64> {
    if !(t1 >= 0.0 && t2 >= 0.0) {
        return Err(Error::param("t1/t2", "split times must be non-negative"));
    }
    let direct = flow(vf, rp, t1 + t2, y0)?;
    let mid = flow(vf, rp, t1, y0)?;
    let restarted = flow(vf, &shift_rough_path(rp, t1)?, t2, &mid)?;
    Ok(euclid_diff(&direct, &restarted))
}

/// Sample `ω` from the probe's seed, build the requested driver and measure the cocycle residual.
///
/// The sampler's grid must contain `[0, t₁ + t₂ + δ]`.
pub fn cocycle_residual(vf: &VectorField, sampler: &FbmSampler, probe: &CocycleProbe) -> Result<f64> {
    let omega = sampler.sample(vf.noise_dim(), probe.seed, 0)?;
    let rp = match probe.delta {
        None => lift_left_riemann(&omega),
        Some(k) => ww_delta(&omega, &DeltaParam::from_multiple(omega.grid(), k)?)?,
    };
    cocycle_residual_on(vf, &rp, probe.t1, probe.t2, &probe.y0)
}
