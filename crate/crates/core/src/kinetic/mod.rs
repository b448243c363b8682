//! Vlasov-Poisson-BGK reference solver on a periodic space domain and a
//! truncated velocity domain.
//!
//! Each step is split into three stages: Poisson solve for the field,
//! explicit transport (upwind in x, centered in v), implicit BGK relaxation.

mod moments;
mod poisson;
mod scheme;

pub use moments::{compute_moments, maxwellian, Moments};
pub use poisson::{solve_poisson, ElectricField, PoissonSign};
pub use scheme::{bgk_relax, stable_dt, transport_step};

use serde::{Deserialize, Serialize};

use crate::grid::PhaseGrid;
use crate::{Error, Result};

/// Distribution values `f(x_i, v_j)` stored row-major (`f[i * nv + j]`).
#[derive(Debug, Clone, PartialEq)]
pub struct KineticState {
    pub f: Vec<f64>,
    pub time: f64,
}

impl KineticState {
    pub fn row(&self, i: usize, nv: usize) -> &[f64] {
        &self.f[i * nv..(i + 1) * nv]
    }

    /// Most negative value of the distribution (0 if none is negative).
    pub fn min_value(&self) -> f64 {
        self.f.iter().fold(0.0f64, |m, &v| m.min(v))
    }

    /// `dx * dv * sum(f)`.
    pub fn mass(&self, grid: &PhaseGrid) -> f64 {
        self.f.iter().sum::<f64>() * grid.dx() * grid.dv()
    }
}

/// Tunables of the kinetic time loop.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct KineticOptions {
    /// Fraction of the stability bound used as time step.
    pub safety: f64,
    pub poisson_sign: PoissonSign,
}

impl Default for KineticOptions {
    fn default() -> Self {
        KineticOptions { safety: 0.9, poisson_sign: PoissonSign::Plasma }
    }
}

/// State of the kinetic model at one recorded time.
#[derive(Debug, Clone)]
pub struct KineticSnapshot {
    pub time: f64,
    pub state: KineticState,
    pub moments: Moments,
    pub field: ElectricField,
}

/// A kinetic simulation that can be advanced incrementally.
#[derive(Debug, Clone)]
pub struct KineticSim {
    grid: PhaseGrid,
    eps: f64,
    options: KineticOptions,
    state: KineticState,
    scratch: Vec<f64>,
    row_scratch: Vec<f64>,
    steps: usize,
}

impl KineticSim {
    pub fn new(init: KineticState, eps: f64, grid: PhaseGrid, options: KineticOptions) -> Result<Self> {
        if init.f.len() != grid.len() {
            return Err(Error::Shape(format!(
                "initial distribution has {} values, grid needs {}",
                init.f.len(),
                grid.len()
            )));
        }
        if !(eps > 0.0) {
            return Err(Error::Config(format!("Knudsen number must be positive, got {eps}")));
        }
        if !(options.safety > 0.0 && options.safety <= 1.0) {
            return Err(Error::Config(format!("safety must lie in (0, 1], got {}", options.safety)));
        }
        let n = init.f.len();
        Ok(KineticSim {
            grid,
            eps,
            options,
            state: init,
            scratch: vec![0.0; n],
            row_scratch: vec![0.0; grid.nv],
            steps: 0,
        })
    }

    pub fn time(&self) -> f64 {
        self.state.time
    }

    pub fn state(&self) -> &KineticState {
        &self.state
    }

    pub fn grid(&self) -> &PhaseGrid {
        &self.grid
    }

    pub fn eps(&self) -> f64 {
        self.eps
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn moments(&self) -> Result<Moments> {
        compute_moments(&self.state, &self.grid)
    }

    pub fn field(&self) -> Result<ElectricField> {
        let m = self.moments()?;
        solve_poisson(&m.rho, &self.grid.space, self.options.poisson_sign)
    }

    pub fn snapshot(&self) -> Result<KineticSnapshot> {
        let moments = self.moments()?;
        let field = solve_poisson(&moments.rho, &self.grid.space, self.options.poisson_sign)?;
        Ok(KineticSnapshot {
            time: self.state.time,
            state: self.state.clone(),
            moments,
            field,
        })
    }

    /// Performs one Poisson/transport/relaxation step of length at most
    /// `max_dt`; returns the step taken.
    pub fn step(&mut self, max_dt: f64) -> Result<f64> {
        let time = self.state.time;
        let wrap = |e: Error| Error::Aborted { time, source: Box::new(e) };
        let rho = density(&self.state.f, &self.grid);
        let field = solve_poisson(&rho, &self.grid.space, self.options.poisson_sign).map_err(wrap)?;
        let dt = stable_dt(&field.e, &self.grid, self.options.safety).min(max_dt);
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(wrap(Error::NonFinite { time }));
        }
        scheme::transport_into(&self.state.f, &mut self.scratch, &field.e, dt, &self.grid);
        scheme::bgk_in_place(&mut self.scratch, dt, self.eps, &self.grid, &mut self.row_scratch)
            .map_err(wrap)?;
        std::mem::swap(&mut self.state.f, &mut self.scratch);
        self.state.time += dt;
        self.steps += 1;
        Ok(dt)
    }

    /// Advances to exactly `t`, clipping the last step.
    pub fn advance_to(&mut self, t: f64) -> Result<()> {
        while self.state.time < t {
            let remaining = t - self.state.time;
            self.step(remaining)?;
            // Land exactly on t despite rounding of the accumulated time.
            if (t - self.state.time).abs() <= 1e-12 * t.abs().max(1.0) {
                self.state.time = t;
            }
        }
        Ok(())
    }
}

/// `dv * sum_j f_ij` per cell, without positivity checks.
fn density(f: &[f64], grid: &PhaseGrid) -> Vec<f64> {
    let dv = grid.dv();
    f.chunks_exact(grid.nv).map(|row| row.iter().sum::<f64>() * dv).collect()
}

/// Runs the kinetic model from `init` and returns a snapshot at each of the
/// ascending `record_times`. Fails with [`Error::Aborted`] carrying the time
/// reached if the state stops being usable.
pub fn run_kinetic(
    init: KineticState,
    eps: f64,
    record_times: &[f64],
    grid: &PhaseGrid,
    options: &KineticOptions,
) -> Result<Vec<KineticSnapshot>> {
    if record_times.windows(2).any(|w| w[1] < w[0]) || record_times.iter().any(|&t| !(t >= 0.0)) {
        return Err(Error::Config("record times must be ascending and non-negative".into()));
    }
    let mut sim = KineticSim::new(init, eps, *grid, *options)?;
    let mut out = Vec::with_capacity(record_times.len());
    for &t in record_times {
        sim.advance_to(t)?;
        let time = sim.time();
        out.push(sim.snapshot().map_err(|e| Error::Aborted { time, source: Box::new(e) })?);
    }
    Ok(out)
}
