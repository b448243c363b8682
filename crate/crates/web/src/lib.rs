//! WebAssembly bindings for a static demo page: fluid runs with the
//! analytic closures, the window layout of the neural closure, and network
//! parameter counts.

use heatflux::closures::{Closure, KineticClosure, NavierStokesClosure, ZeroClosure};
use heatflux::datagen::InitFamily;
use heatflux::evaluation::sample_runs;
use heatflux::fluid::{primitive_vars, run_fluid, FluidOptions, FluidState};
use heatflux::grid::PhaseGrid;
use heatflux::kinetic::{maxwellian, KineticOptions, KineticSim};
use heatflux::processing::{reconstruction_weight, PipelineConfig, WindowSet};
use heatflux::vnet::{param_count, VNetConfig};
use serde::Serialize;
use wasm_bindgen::prelude::*;

#[derive(Debug, Serialize, PartialEq)]
pub struct FluidRun {
    pub times: Vec<f64>,
    pub energies: Vec<f64>,
    pub x: Vec<f64>,
    pub rho0: Vec<f64>,
    pub rho: Vec<f64>,
    pub temperature: Vec<f64>,
    pub q: Vec<f64>,
}

/// Runs the fluid model from a random smooth initial condition.
pub fn fluid_run(closure: &str, eps: f64, nx: usize, t_end: f64, seed: u64) -> heatflux::Result<FluidRun> {
    let grid = PhaseGrid::new(nx, 2.0 * std::f64::consts::PI, 61, 7.0)?;
    let init = sample_runs(&[eps], nx, InitFamily::Smooth, seed)?.remove(0).init;
    let mut c: Box<dyn Closure> = match closure {
        "zero" => Box::new(ZeroClosure),
        "ns" => Box::new(NavierStokesClosure),
        "kinetic" => {
            let f0 = maxwellian(&init.rho, &init.u, &init.temperature, &grid)?;
            Box::new(KineticClosure::new(KineticSim::new(f0, eps, grid, KineticOptions::default())?)?)
        }
        other => return Err(heatflux::Error::Config(format!("unknown closure {other:?}"))),
    };
    let state = FluidState::from_primitives(&init.rho, &init.u, &init.temperature, grid.space)?;
    let record_dt = (t_end / 40.0).max(1e-3);
    let traj = run_fluid(state, c.as_mut(), eps, t_end, record_dt, &FluidOptions::default())?;
    let last = traj.last().expect("at least one record");
    let p = primitive_vars(&last.state)?;
    Ok(FluidRun {
        times: traj.times(),
        energies: traj.electric_energies(),
        x: grid.space.points(),
        rho0: init.rho,
        rho: p.rho,
        temperature: p.temperature,
        q: last.q.clone(),
    })
}

#[derive(Debug, Serialize, PartialEq)]
pub struct Layout {
    pub starts: Vec<usize>,
    pub stride: usize,
    pub margin: usize,
    /// Normalized reconstruction weight of every window at every point.
    pub weights: Vec<Vec<f64>>,
    /// Sum of the raw cosine weights, which the reconstruction divides by.
    pub raw_total: Vec<f64>,
}

/// Windows covering an `n`-point periodic signal and their weights.
pub fn window_layout(n: usize, window: usize, redundancy: usize) -> heatflux::Result<Layout> {
    let cfg = PipelineConfig { window_size: window, redundancy, ..PipelineConfig::default() };
    let ws = WindowSet::layout(n, &cfg)?;
    let mut weights = vec![vec![0.0; n]; ws.starts.len()];
    for (k, &s) in ws.starts.iter().enumerate() {
        for u in 0..ws.useful_len {
            weights[k][(s + ws.margin_points + u) % n] += reconstruction_weight(u, ws.useful_len, redundancy);
        }
    }
    let raw_total: Vec<f64> = (0..n).map(|i| weights.iter().map(|w| w[i]).sum()).collect();
    for w in &mut weights {
        w.iter_mut().zip(&raw_total).for_each(|(v, t)| *v /= t);
    }
    Ok(Layout { starts: ws.starts.clone(), stride: ws.stride, margin: ws.margin_points, weights, raw_total })
}

fn js_err(e: impl std::fmt::Display) -> JsError {
    JsError::new(&e.to_string())
}

/// JSON of [`fluid_run`].
#[wasm_bindgen(js_name = fluidRun)]
pub fn fluid_run_js(closure: &str, eps: f64, nx: usize, t_end: f64, seed: u64) -> Result<String, JsError> {
    serde_json::to_string(&fluid_run(closure, eps, nx, t_end, seed).map_err(js_err)?).map_err(js_err)
}

/// JSON of [`window_layout`].
#[wasm_bindgen(js_name = windowLayout)]
pub fn window_layout_js(n: usize, window: usize, redundancy: usize) -> Result<String, JsError> {
    serde_json::to_string(&window_layout(n, window, redundancy).map_err(js_err)?).map_err(js_err)
}

/// Learnable parameters of a V-Net with four input channels.
#[wasm_bindgen(js_name = paramCount)]
pub fn param_count_js(levels: usize, depth: usize, kernel: usize) -> Result<usize, JsError> {
    let window = 1 << (levels.clamp(2, 12) - 1);
    let cfg = VNetConfig { levels, depth, kernel, window: window * 32, ..VNetConfig::default() };
    cfg.validate().map_err(js_err)?;
    Ok(param_count(&cfg))
}
