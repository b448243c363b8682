//! Heat-flux closures `q = C(eps, rho, u, T)` for the fluid solver.

use crate::kinetic::KineticSim;
use crate::processing::{
    assemble_input, compute_qns_scale, fourier_resample, gaussian_smooth, ns_denormalize, reconstruct, slice_predict,
    standardize, PipelineConfig, Signal, StandardizationStats,
};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ClosureKind {
    Zero,
    NavierStokes,
    Kinetic,
    Neural,
}

/// Fluid quantities handed to a closure.
#[derive(Debug, Clone, Copy)]
pub struct ClosureInput<'a> {
    pub time: f64,
    pub eps: f64,
    pub rho: &'a [f64],
    pub u: &'a [f64],
    pub temperature: &'a [f64],
    pub dx: f64,
}

pub trait Closure {
    fn kind(&self) -> ClosureKind;

    /// Heat flux with the same length as the inputs.
    fn heat_flux(&mut self, input: &ClosureInput<'_>) -> Result<Vec<f64>>;
}

/// Euler closure: no heat flux.
#[derive(Debug, Clone, Copy, Default)]
pub struct ZeroClosure;

impl Closure for ZeroClosure {
    fn kind(&self) -> ClosureKind {
        ClosureKind::Zero
    }

    fn heat_flux(&mut self, input: &ClosureInput<'_>) -> Result<Vec<f64>> {
        Ok(vec![0.0; input.rho.len()])
    }
}

/// `q = -(3/2) eps rho T dT/dx` with a centered periodic difference.
pub fn navier_stokes_heat_flux(eps: f64, rho: &[f64], temperature: &[f64], dx: f64) -> Vec<f64> {
    let n = rho.len();
    (0..n)
        .map(|i| {
            let dt = (temperature[(i + 1) % n] - temperature[(i + n - 1) % n]) / (2.0 * dx);
            -1.5 * eps * rho[i] * temperature[i] * dt
        })
        .collect()
}

#[derive(Debug, Clone, Copy, Default)]
pub struct NavierStokesClosure;

impl Closure for NavierStokesClosure {
    fn kind(&self) -> ClosureKind {
        ClosureKind::NavierStokes
    }

    fn heat_flux(&mut self, input: &ClosureInput<'_>) -> Result<Vec<f64>> {
        Ok(navier_stokes_heat_flux(input.eps, input.rho, input.temperature, input.dx))
    }
}

/// Heat flux taken from a kinetic simulation running alongside the fluid
/// model, linearly interpolated between kinetic time steps.
#[derive(Debug, Clone)]
pub struct KineticClosure {
    sim: KineticSim,
    prev: (f64, Vec<f64>),
    curr: (f64, Vec<f64>),
}

impl KineticClosure {
    pub fn new(sim: KineticSim) -> Result<Self> {
        let q = sim.moments()?.heat_flux;
        let t = sim.time();
        Ok(KineticClosure { prev: (t, q.clone()), curr: (t, q), sim })
    }

    pub fn sim(&self) -> &KineticSim {
        &self.sim
    }

    /// Kinetic heat flux at time `t` on the kinetic grid.
    pub fn heat_flux_at(&mut self, t: f64) -> Result<Vec<f64>> {
        let tol = 1e-12 * t.abs().max(1.0);
        while self.curr.0 < t - tol {
            self.sim.step(f64::INFINITY)?;
            let time = self.sim.time();
            let q = self
                .sim
                .moments()
                .map_err(|e| Error::Aborted { time, source: Box::new(e) })?
                .heat_flux;
            self.prev = std::mem::replace(&mut self.curr, (time, q));
        }
        if (self.curr.0 - t).abs() <= tol {
            return Ok(self.curr.1.clone());
        }
        let (t0, q0) = &self.prev;
        let (t1, q1) = &self.curr;
        if t < t0 - tol {
            return Err(Error::Config(format!("kinetic closure queried at {t}, before {t0}")));
        }
        let theta = (t - t0) / (t1 - t0);
        Ok(q0.iter().zip(q1).map(|(a, b)| (1.0 - theta) * a + theta * b).collect())
    }
}

impl Closure for KineticClosure {
    fn kind(&self) -> ClosureKind {
        ClosureKind::Kinetic
    }

    fn heat_flux(&mut self, input: &ClosureInput<'_>) -> Result<Vec<f64>> {
        let q = self.heat_flux_at(input.time)?;
        if q.len() == input.rho.len() {
            Ok(q)
        } else {
            fourier_resample(&q, input.rho.len())
        }
    }
}

/// Anything that maps standardized input windows to output windows.
pub trait WindowModel: Sync {
    fn window_size(&self) -> usize;

    fn predict_windows(&self, windows: &[Signal]) -> Result<Vec<Vec<f64>>>;
}

/// Learned closure: resampling, standardization, windowed prediction,
/// reconstruction, inverse normalization, smoothing and resampling back.
#[derive(Debug, Clone)]
pub struct NeuralClosure<M> {
    pub model: M,
    pub stats: StandardizationStats,
    pub pipeline: PipelineConfig,
    /// Resample the inputs to the training resolution before prediction.
    pub corrective_resampling: bool,
}

impl<M: WindowModel> NeuralClosure<M> {
    pub fn new(model: M, stats: StandardizationStats, pipeline: PipelineConfig) -> Result<Self> {
        pipeline.validate()?;
        if model.window_size() != pipeline.window_size {
            return Err(Error::Config(format!(
                "model window {} does not match pipeline window {}",
                model.window_size(),
                pipeline.window_size
            )));
        }
        Ok(NeuralClosure { model, stats, pipeline, corrective_resampling: true })
    }

    /// Network prediction before smoothing, on the working grid (the
    /// training resolution when resampling is on). Returns the prediction
    /// and the working cell size.
    pub fn raw_prediction(&self, eps: f64, rho: &[f64], u: &[f64], temperature: &[f64], dx: f64) -> Result<(Vec<f64>, f64)> {
        let n = rho.len();
        if n < 4 || u.len() != n || temperature.len() != n {
            return Err(Error::Shape(format!("closure inputs must share a length >= 4, got {n}")));
        }
        let target = self.pipeline.training_resolution;
        let (r, v, t) = if self.corrective_resampling && n != target {
            (
                fourier_resample(rho, target)?,
                fourier_resample(u, target)?,
                fourier_resample(temperature, target)?,
            )
        } else {
            (rho.to_vec(), u.to_vec(), temperature.to_vec())
        };
        let m = r.len();
        let dxw = dx * n as f64 / m as f64;
        let mut input = assemble_input(eps, &r, &v, &t)?;
        standardize(&mut input, &self.stats)?;
        let ws = slice_predict(&input, &self.pipeline)?;
        let preds = self.model.predict_windows(&ws.windows)?;
        let q_norm = reconstruct(&ws, &preds)?;
        let q_ns = compute_qns_scale(eps, &r, &t, dxw);
        Ok((ns_denormalize(&q_norm, q_ns, self.pipeline.norm_threshold), dxw))
    }

    /// Full closure with smoothing width `sigma`.
    pub fn predict_with_sigma(
        &self,
        eps: f64,
        rho: &[f64],
        u: &[f64],
        temperature: &[f64],
        dx: f64,
        sigma: f64,
    ) -> Result<Vec<f64>> {
        let (q, dxw) = self.raw_prediction(eps, rho, u, temperature, dx)?;
        let q = gaussian_smooth(&q, sigma, dxw);
        if q.len() == rho.len() {
            Ok(q)
        } else {
            fourier_resample(&q, rho.len())
        }
    }

    pub fn predict(&self, eps: f64, rho: &[f64], u: &[f64], temperature: &[f64], dx: f64) -> Result<Vec<f64>> {
        self.predict_with_sigma(eps, rho, u, temperature, dx, self.pipeline.smoothing_sigma)
    }
}

impl<M: WindowModel> Closure for NeuralClosure<M> {
    fn kind(&self) -> ClosureKind {
        ClosureKind::Neural
    }

    fn heat_flux(&mut self, input: &ClosureInput<'_>) -> Result<Vec<f64>> {
        let q = self.predict(input.eps, input.rho, input.u, input.temperature, input.dx)?;
        if q.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite { time: input.time });
        }
        Ok(q)
    }
}
