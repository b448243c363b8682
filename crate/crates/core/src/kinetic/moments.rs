//! Velocity moments of the distribution function and discrete Maxwellians.

use std::f64::consts::PI;

use super::KineticState;
use crate::grid::PhaseGrid;
use crate::{Error, Result};

/// Fluid moments of a distribution, one value per spatial cell.
///
/// `pressure = rho * temperature` and
/// `energy = rho * u^2 / 2 + pressure / 2` hold elementwise.
#[derive(Debug, Clone, PartialEq)]
pub struct Moments {
    pub rho: Vec<f64>,
    pub u: Vec<f64>,
    pub temperature: Vec<f64>,
    pub pressure: Vec<f64>,
    pub energy: Vec<f64>,
    pub heat_flux: Vec<f64>,
}

impl Moments {
    pub fn len(&self) -> usize {
        self.rho.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rho.is_empty()
    }
}

/// Raw discrete moments `dv * sum(f)`, `dv * sum(v f)`, `dv * sum(v^2 f)` of
/// one velocity row.
#[cfg(test)]
pub(crate) fn raw_moments(row: &[f64], vel: &[f64], dv: f64) -> [f64; 3] {
    let (mut s0, mut s1, mut s2) = (0.0, 0.0, 0.0);
    for (&f, &v) in row.iter().zip(vel) {
        s0 += f;
        s1 += v * f;
        s2 += v * v * f;
    }
    [s0 * dv, s1 * dv, s2 * dv]
}

/// Density, mean velocity and temperature of one row, with the
/// temperature computed from centered velocities.
#[inline]
fn row_primitives(row: &[f64], vel: &[f64], dv: f64, cell: usize) -> Result<(f64, f64, f64)> {
    let mut s0 = 0.0;
    let mut s1 = 0.0;
    for (&f, &v) in row.iter().zip(vel) {
        s0 += f;
        s1 += v * f;
    }
    let rho = s0 * dv;
    if !(rho > 0.0 && rho.is_finite()) {
        return Err(Error::NonPositiveDensity { cell, value: rho });
    }
    let u = s1 * dv / rho;
    let mut s2 = 0.0;
    for (&f, &v) in row.iter().zip(vel) {
        let c = v - u;
        s2 += c * c * f;
    }
    let temperature = s2 * dv / rho;
    Ok((rho, u, temperature))
}

/// Discrete moments with the `dv` quadrature weight and the 1/2 factor in the
/// heat flux. Fails when a cell has non-positive (or non-finite) density.
pub fn compute_moments(state: &KineticState, grid: &PhaseGrid) -> Result<Moments> {
    let nx = grid.nx();
    let nv = grid.nv;
    if state.f.len() != nx * nv {
        return Err(Error::Shape(format!(
            "distribution has {} values, grid needs {}x{}",
            state.f.len(),
            nx,
            nv
        )));
    }
    let dv = grid.dv();
    let vel = grid.velocities();
    let mut m = Moments {
        rho: vec![0.0; nx],
        u: vec![0.0; nx],
        temperature: vec![0.0; nx],
        pressure: vec![0.0; nx],
        energy: vec![0.0; nx],
        heat_flux: vec![0.0; nx],
    };
    for (i, row) in state.f.chunks_exact(nv).enumerate() {
        let (rho, u, t) = row_primitives(row, &vel, dv, i)?;
        let mut s3 = 0.0;
        for (&f, &v) in row.iter().zip(&vel) {
            let c = v - u;
            s3 += c * c * c * f;
        }
        let p = rho * t;
        m.rho[i] = rho;
        m.u[i] = u;
        m.temperature[i] = t;
        m.pressure[i] = p;
        m.energy[i] = 0.5 * rho * u * u + 0.5 * p;
        m.heat_flux[i] = 0.5 * dv * s3;
    }
    Ok(m)
}

/// Fills `row` with `rho / sqrt(2 pi T) exp(-(v - u)^2 / (2T))`.
#[inline]
pub(crate) fn maxwellian_row(row: &mut [f64], vel: &[f64], rho: f64, u: f64, t: f64) {
    let norm = rho / (2.0 * PI * t).sqrt();
    let inv = 0.5 / t;
    for (out, &v) in row.iter_mut().zip(vel) {
        let c = v - u;
        *out = norm * (-c * c * inv).exp();
    }
}

/// Sampled Maxwellian `rho_i / sqrt(2 pi T_i) exp(-(v_j - u_i)^2 / (2 T_i))`.
pub fn maxwellian(rho: &[f64], u: &[f64], temperature: &[f64], grid: &PhaseGrid) -> Result<KineticState> {
    let nx = grid.nx();
    if rho.len() != nx || u.len() != nx || temperature.len() != nx {
        return Err(Error::Shape(format!(
            "maxwellian parameters must have length {nx}"
        )));
    }
    let nv = grid.nv;
    let vel = grid.velocities();
    let mut f = vec![0.0; nx * nv];
    for (i, row) in f.chunks_exact_mut(nv).enumerate() {
        if !(rho[i] > 0.0) {
            return Err(Error::NonPositiveDensity { cell: i, value: rho[i] });
        }
        if !(temperature[i] > 0.0) {
            return Err(Error::Realizability {
                cell: i,
                quantity: "temperature",
                value: temperature[i],
            });
        }
        maxwellian_row(row, &vel, rho[i], u[i], temperature[i]);
    }
    Ok(KineticState { f, time: 0.0 })
}

/// Writes into `out` the sampled Maxwellian whose *discrete* moments
/// (`dv`-weighted sums of 1, v, v^2) equal those of `row`.
///
/// The sampled Maxwellian with the row's own (rho, u, T) misses these moments
/// by the quadrature and truncation error of the velocity grid, so the three
/// parameters are corrected with a few Newton iterations. Without the
/// correction the relaxation step would not conserve mass, momentum and
/// energy exactly. Returns the row's (rho, u, T).
pub(crate) fn matched_maxwellian_row(
    row: &[f64],
    vel: &[f64],
    dv: f64,
    cell: usize,
    out: &mut [f64],
) -> Result<(f64, f64, f64)> {
    let (rho, u0, t0) = row_primitives(row, vel, dv, cell)?;
    if !(t0 > 0.0 && t0.is_finite()) {
        return Err(Error::Realizability {
            cell,
            quantity: "temperature",
            value: t0,
        });
    }
    // Targets: moments centered on the row's mean velocity.
    let target = [rho, 0.0, rho * t0];
    let scale = [rho, rho * t0.sqrt(), rho * t0];

    let (mut a, mut b, mut c) = (rho, u0, t0);
    maxwellian_row(out, vel, a, b, c);
    for _ in 0..12 {
        // Residuals and Jacobian of the centered moments w.r.t. (a, b, c).
        let mut s = [0.0; 3];
        let mut jb = [0.0; 3];
        let mut jc = [0.0; 3];
        let inv_c = 1.0 / c;
        for (&m, &v) in out.iter().zip(vel) {
            let w = v - u0;
            let d = v - b;
            let db = m * d * inv_c;
            let dc = m * (0.5 * d * d * inv_c * inv_c - 0.5 * inv_c);
            let mut p = 1.0;
            for k in 0..3 {
                s[k] += p * m;
                jb[k] += p * db;
                jc[k] += p * dc;
                p *= w;
            }
        }
        let mut res = [0.0; 3];
        let mut converged = true;
        for k in 0..3 {
            s[k] *= dv;
            jb[k] *= dv;
            jc[k] *= dv;
            res[k] = s[k] - target[k];
            if res[k].abs() > 1e-15 * scale[k] {
                converged = false;
            }
        }
        if converged {
            return Ok((rho, u0, t0));
        }
        let ja = [s[0] / a, s[1] / a, s[2] / a];
        let Some([da, db, dc]) = solve3([ja, jb, jc], res) else {
            break;
        };
        let (na, nb, nc) = (a - da, b - db, c - dc);
        if !(na > 0.0 && nc > 0.0 && nb.is_finite()) {
            break;
        }
        a = na;
        b = nb;
        c = nc;
        maxwellian_row(out, vel, a, b, c);
    }
    // Unresolved or badly truncated Maxwellian: keep the last iterate.
    Ok((rho, u0, t0))
}

/// Solves the 3x3 system whose columns are `cols` (Cramer's rule).
fn solve3(cols: [[f64; 3]; 3], rhs: [f64; 3]) -> Option<[f64; 3]> {
    let det = |c0: [f64; 3], c1: [f64; 3], c2: [f64; 3]| {
        c0[0] * (c1[1] * c2[2] - c1[2] * c2[1]) - c1[0] * (c0[1] * c2[2] - c0[2] * c2[1])
            + c2[0] * (c0[1] * c1[2] - c0[2] * c1[1])
    };
    let d = det(cols[0], cols[1], cols[2]);
    if d == 0.0 || !d.is_finite() {
        return None;
    }
    Some([
        det(rhs, cols[1], cols[2]) / d,
        det(cols[0], rhs, cols[2]) / d,
        det(cols[0], cols[1], rhs) / d,
    ])
}
