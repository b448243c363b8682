//! One time step of the split kinetic scheme: upwind transport in x, centered
//! transport in v with closed velocity boundaries, and implicit BGK
//! relaxation.

use super::moments::matched_maxwellian_row;
use super::KineticState;
use crate::grid::PhaseGrid;
use crate::{Error, Result};

/// Largest stable time step, `safety * min(dx / vmax, dv / max|E|)`.
pub fn stable_dt(e: &[f64], grid: &PhaseGrid, safety: f64) -> f64 {
    let emax = e.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let dt_x = grid.dx() / grid.vmax;
    let dt_v = if emax > 0.0 { grid.dv() / emax } else { f64::INFINITY };
    safety * dt_x.min(dt_v)
}

/// Explicit transport step writing into `out`.
///
/// In x: `F_{i+1/2} = v (f_{i+1} + f_i)/2 - |v| (f_{i+1} - f_i)/2`, periodic.
/// In v: the force term `E df/dv` is written in flux form with velocity
/// `a = -E` and centered interface fluxes `a (f_j + f_{j+1})/2`. The flux
/// through the two velocity cutoffs is zero, so the step conserves mass to
/// rounding whatever the tail of `f`.
pub(crate) fn transport_into(f: &[f64], out: &mut [f64], e: &[f64], dt: f64, grid: &PhaseGrid) {
    let nx = grid.nx();
    let nv = grid.nv;
    let lx = dt / grid.dx();
    let lv = dt / grid.dv();
    let vel = grid.velocities();
    for i in 0..nx {
        let prev = &f[((i + nx - 1) % nx) * nv..][..nv];
        let cur = &f[i * nv..][..nv];
        let next = &f[((i + 1) % nx) * nv..][..nv];
        let dst = &mut out[i * nv..][..nv];
        for j in 0..nv {
            let v = vel[j];
            let vp = v.max(0.0);
            let vm = v.min(0.0);
            let flux_diff = vp * (cur[j] - prev[j]) + vm * (next[j] - cur[j]);
            dst[j] = cur[j] - lx * flux_diff;
        }

        let a = -e[i];
        if a == 0.0 {
            continue;
        }
        let half = 0.5 * a;
        let mut g_left = 0.0;
        for j in 0..nv {
            let g_right = if j + 1 < nv { half * (cur[j] + cur[j + 1]) } else { 0.0 };
            dst[j] -= lv * (g_right - g_left);
            g_left = g_right;
        }
    }
}

/// One explicit transport step, `f <- f - dt/dx (F_{i+1/2} - F_{i-1/2}) - dt E B(f)`.
pub fn transport_step(state: &KineticState, e: &[f64], dt: f64, grid: &PhaseGrid) -> Result<KineticState> {
    check_shapes(state, e, grid)?;
    let mut out = vec![0.0; state.f.len()];
    transport_into(&state.f, &mut out, e, dt, grid);
    Ok(KineticState { f: out, time: state.time + dt })
}

/// Implicit BGK relaxation in place: `f <- f + w (M(f) - f)`, `w = dt / (dt + eps)`.
pub(crate) fn bgk_in_place(f: &mut [f64], dt: f64, eps: f64, grid: &PhaseGrid, scratch: &mut [f64]) -> Result<()> {
    let nv = grid.nv;
    let omega = dt / (dt + eps);
    let vel = grid.velocities();
    let dv = grid.dv();
    for (i, row) in f.chunks_exact_mut(nv).enumerate() {
        matched_maxwellian_row(row, &vel, dv, i, scratch)?;
        if omega == 0.0 {
            continue;
        }
        for (x, &m) in row.iter_mut().zip(scratch.iter()) {
            *x += omega * (m - *x);
        }
    }
    Ok(())
}

/// BGK relaxation over `dt` for Knudsen number `eps`. The relaxation target is
/// the sampled Maxwellian matching the discrete moments of `f`, so density,
/// momentum and energy are conserved to rounding.
pub fn bgk_relax(state: &KineticState, dt: f64, eps: f64, grid: &PhaseGrid) -> Result<KineticState> {
    if !(eps > 0.0) {
        return Err(Error::Config(format!("Knudsen number must be positive, got {eps}")));
    }
    check_shapes(state, &vec![0.0; grid.nx()], grid)?;
    let mut f = state.f.clone();
    let mut scratch = vec![0.0; grid.nv];
    bgk_in_place(&mut f, dt, eps, grid, &mut scratch)?;
    Ok(KineticState { f, time: state.time })
}

fn check_shapes(state: &KineticState, e: &[f64], grid: &PhaseGrid) -> Result<()> {
    if state.f.len() != grid.len() {
        return Err(Error::Shape(format!(
            "distribution has {} values, grid needs {}",
            state.f.len(),
            grid.len()
        )));
    }
    if e.len() != grid.nx() {
        return Err(Error::Shape(format!("field has length {}, grid has {}", e.len(), grid.nx())));
    }
    Ok(())
}
