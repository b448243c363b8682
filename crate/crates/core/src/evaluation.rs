//! Error measurements: heat-flux prediction errors over datasets, model
//! comparisons through the electric energy, smoothing and stability sweeps,
//! resolution tests and discontinuous-initialization runs.
//!
//! Every routine returns flat [`ErrorRecord`]s, written as CSV with the
//! columns `run_id,eps,model,metric,param,value`. `param` carries the time,
//! smoothing width or resolution a value refers to, when there is one.

use std::fmt;
use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::closures::{
    navier_stokes_heat_flux, Closure, ClosureInput, ClosureKind, KineticClosure, NavierStokesClosure, NeuralClosure,
    WindowModel, ZeroClosure,
};
use crate::datagen::{random_initial_condition, run_rng, GenConfig, InitFamily, InitialProfiles};
use crate::dataset::Dataset;
use crate::fluid::{record_schedule, run_fluid, FluidOptions, FluidState};
use crate::grid::PhaseGrid;
use crate::kinetic::{maxwellian, run_kinetic, KineticOptions, KineticSim};
use crate::processing::{fourier_resample, gaussian_smooth};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ModelTag {
    #[serde(rename = "Kinetic")]
    Kinetic,
    #[serde(rename = "Fluid+Kinetic")]
    FluidKinetic,
    #[serde(rename = "Fluid+Network")]
    FluidNetwork,
    #[serde(rename = "Navier-Stokes")]
    NavierStokes,
    #[serde(rename = "Euler")]
    Euler,
    #[serde(rename = "NS-estimate")]
    NsEstimate,
    #[serde(rename = "NN-estimate")]
    NnEstimate,
}

impl ModelTag {
    pub fn name(self) -> &'static str {
        match self {
            ModelTag::Kinetic => "Kinetic",
            ModelTag::FluidKinetic => "Fluid+Kinetic",
            ModelTag::FluidNetwork => "Fluid+Network",
            ModelTag::NavierStokes => "Navier-Stokes",
            ModelTag::Euler => "Euler",
            ModelTag::NsEstimate => "NS-estimate",
            ModelTag::NnEstimate => "NN-estimate",
        }
    }
}

impl fmt::Display for ModelTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// A metric value, or an explicit marker when there is none.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum MetricValue {
    Value(f64),
    /// Zero denominator or non-positive energy.
    Undefined,
    /// The run producing the value failed.
    Failed,
}

impl MetricValue {
    pub fn from_option(v: Option<f64>) -> Self {
        match v {
            Some(x) if x.is_finite() => MetricValue::Value(x),
            Some(_) => MetricValue::Failed,
            None => MetricValue::Undefined,
        }
    }

    pub fn value(self) -> Option<f64> {
        match self {
            MetricValue::Value(v) => Some(v),
            _ => None,
        }
    }
}

impl fmt::Display for MetricValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            MetricValue::Value(v) => write!(f, "{v:e}"),
            MetricValue::Undefined => f.write_str("undefined"),
            MetricValue::Failed => f.write_str("failed"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ErrorRecord {
    pub run_id: u64,
    pub eps: f64,
    pub model: ModelTag,
    pub metric: String,
    pub param: Option<f64>,
    pub value: MetricValue,
}

impl ErrorRecord {
    pub fn new(run_id: u64, eps: f64, model: ModelTag, metric: &str, param: Option<f64>, value: MetricValue) -> Self {
        ErrorRecord { run_id, eps, model, metric: metric.to_string(), param, value }
    }
}

#[derive(Serialize)]
struct CsvRow<'a> {
    run_id: u64,
    eps: f64,
    model: &'a str,
    metric: &'a str,
    param: Option<f64>,
    value: String,
}

pub fn write_csv(records: &[ErrorRecord], w: impl Write) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    for r in records {
        out.serialize(CsvRow {
            run_id: r.run_id,
            eps: r.eps,
            model: r.model.name(),
            metric: &r.metric,
            param: r.param,
            value: r.value.to_string(),
        })
        .map_err(|e| Error::Format(e.to_string()))?;
    }
    if records.is_empty() {
        out.write_record(["run_id", "eps", "model", "metric", "param", "value"])
            .map_err(|e| Error::Format(e.to_string()))?;
    }
    out.flush()?;
    Ok(())
}

/// Values of one model and metric.
pub fn select<'a>(records: &'a [ErrorRecord], model: ModelTag, metric: &str) -> Vec<&'a ErrorRecord> {
    records.iter().filter(|r| r.model == model && r.metric == metric).collect()
}

/// Linear-interpolation quantile of sorted data.
fn quantile_sorted(v: &[f64], p: f64) -> f64 {
    let h = p * (v.len() - 1) as f64;
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(v.len() - 1);
    v[lo] + (h - lo as f64) * (v[hi] - v[lo])
}

pub fn median(values: &[f64]) -> Option<f64> {
    let mut v: Vec<f64> = values.iter().copied().filter(|x| !x.is_nan()).collect();
    if v.is_empty() {
        return None;
    }
    v.sort_by(f64::total_cmp);
    Some(quantile_sorted(&v, 0.5))
}

/// Median and quartiles of the defined values, with counts of the rest.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Summary {
    pub count: usize,
    pub undefined: usize,
    pub failed: usize,
    pub median: f64,
    pub q1: f64,
    pub q3: f64,
}

impl Summary {
    pub fn of<'a>(values: impl IntoIterator<Item = &'a MetricValue>) -> Self {
        let mut v = Vec::new();
        let (mut undefined, mut failed) = (0, 0);
        for m in values {
            match m {
                MetricValue::Value(x) => v.push(*x),
                MetricValue::Undefined => undefined += 1,
                MetricValue::Failed => failed += 1,
            }
        }
        v.sort_by(f64::total_cmp);
        let q = |p| if v.is_empty() { f64::NAN } else { quantile_sorted(&v, p) };
        Summary { count: v.len(), undefined, failed, median: q(0.5), q1: q(0.25), q3: q(0.75) }
    }

    pub fn of_records(records: &[&ErrorRecord]) -> Self {
        Self::of(records.iter().map(|r| &r.value))
    }
}

/// Summaries per class of `n` uniform ε-bins on `range` (last bin closed).
pub fn eps_class_summaries(records: &[&ErrorRecord], n: usize, range: [f64; 2]) -> Vec<([f64; 2], Summary)> {
    let w = (range[1] - range[0]) / n as f64;
    (0..n)
        .map(|k| {
            let lo = range[0] + k as f64 * w;
            let hi = if k + 1 == n { range[1] } else { lo + w };
            let vals: Vec<&ErrorRecord> = records
                .iter()
                .copied()
                .filter(|r| r.eps >= lo && (r.eps < hi || (k + 1 == n && r.eps <= hi)))
                .collect();
            ([lo, hi], Summary::of_records(&vals))
        })
        .collect()
}

/// Splits the records into `k` groups of (nearly) equal size by ascending
/// ε and summarizes each.
pub fn eps_quantile_groups(records: &[&ErrorRecord], k: usize) -> Vec<Summary> {
    let mut sorted: Vec<&ErrorRecord> = records.to_vec();
    sorted.sort_by(|a, b| a.eps.total_cmp(&b.eps).then(a.run_id.cmp(&b.run_id)));
    let n = sorted.len();
    (0..k).map(|g| Summary::of_records(&sorted[g * n / k..(g + 1) * n / k])).collect()
}

/// `||q - qhat|| / ||q||`, or `None` when `q` vanishes.
pub fn rel_l2(q: &[f64], qhat: &[f64]) -> Option<f64> {
    assert_eq!(q.len(), qhat.len(), "rel_l2 needs equal lengths");
    let den = q.iter().map(|v| v * v).sum::<f64>().sqrt();
    if den == 0.0 || !den.is_finite() {
        return None;
    }
    let num = q.iter().zip(qhat).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
    Some(num / den)
}

/// `dx * sum(E^2)`.
pub fn electric_energy(e: &[f64], dx: f64) -> f64 {
    dx * e.iter().map(|v| v * v).sum::<f64>()
}

/// Relative L2 error of `ln(energy)` against the kinetic reference.
pub fn log_energy_rel_error(model: &[f64], kinetic: &[f64]) -> Option<f64> {
    if model.len() != kinetic.len() || model.iter().chain(kinetic).any(|&e| !(e > 0.0)) {
        return None;
    }
    let lm: Vec<f64> = model.iter().map(|e| e.ln()).collect();
    let lk: Vec<f64> = kinetic.iter().map(|e| e.ln()).collect();
    rel_l2(&lk, &lm)
}

/// Per-entry heat-flux errors of the network closure and of the
/// Navier-Stokes estimate. `run_id` is the entry index; the entry's
/// `||q||` and record time are logged under the `Kinetic` tag.
pub fn predict_vs_dataset<M: WindowModel>(
    closure: &NeuralClosure<M>,
    dataset: &Dataset,
    entries: &[usize],
) -> Result<Vec<ErrorRecord>> {
    let dx = 2.0 * std::f64::consts::PI / dataset.nx as f64;
    let mut out = Vec::with_capacity(entries.len() * 4);
    for &i in entries {
        let e = dataset
            .entries
            .get(i)
            .ok_or_else(|| Error::Config(format!("entry {i} out of range")))?;
        let id = i as u64;
        let nn = closure.predict(e.eps, &e.rho, &e.u, &e.temperature, dx)?;
        let ns = navier_stokes_heat_flux(e.eps, &e.rho, &e.temperature, dx);
        let norm = e.q.iter().map(|v| v * v).sum::<f64>().sqrt();
        out.push(ErrorRecord::new(id, e.eps, ModelTag::NnEstimate, "rel_l2", None, MetricValue::from_option(rel_l2(&e.q, &nn))));
        out.push(ErrorRecord::new(id, e.eps, ModelTag::NsEstimate, "rel_l2", None, MetricValue::from_option(rel_l2(&e.q, &ns))));
        out.push(ErrorRecord::new(id, e.eps, ModelTag::Kinetic, "q_norm", None, MetricValue::Value(norm)));
        out.push(ErrorRecord::new(id, e.eps, ModelTag::Kinetic, "record_time", None, MetricValue::Value(e.provenance.record_time)));
    }
    Ok(out)
}

/// Network closure with an explicit smoothing width.
struct SmoothedNetwork<'a, M> {
    net: &'a NeuralClosure<M>,
    sigma: f64,
}

impl<M: WindowModel> Closure for SmoothedNetwork<'_, M> {
    fn kind(&self) -> ClosureKind {
        ClosureKind::Neural
    }

    fn heat_flux(&mut self, input: &ClosureInput<'_>) -> Result<Vec<f64>> {
        let q = self
            .net
            .predict_with_sigma(input.eps, input.rho, input.u, input.temperature, input.dx, self.sigma)?;
        if q.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite { time: input.time });
        }
        Ok(q)
    }
}

/// Grid and schedule of model comparisons.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CompareConfig {
    pub nx: usize,
    pub nv: usize,
    pub vmax: f64,
    pub t_end: f64,
    pub record_dt: f64,
    pub kinetic: KineticOptions,
    pub fluid: FluidOptions,
}

impl Default for CompareConfig {
    fn default() -> Self {
        CompareConfig {
            nx: 512,
            nv: 101,
            vmax: 7.0,
            t_end: 8.0,
            record_dt: 0.25,
            kinetic: KineticOptions::default(),
            fluid: FluidOptions::default(),
        }
    }
}

impl CompareConfig {
    pub fn phase_grid(&self) -> Result<PhaseGrid> {
        PhaseGrid::new(self.nx, 2.0 * std::f64::consts::PI, self.nv, self.vmax)
    }

    pub fn schedule(&self) -> Vec<f64> {
        record_schedule(self.t_end, self.record_dt)
    }
}

/// Electric-energy history of one model run.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub model: ModelTag,
    pub times: Vec<f64>,
    pub energies: Vec<f64>,
    /// Time reached and message when the run failed.
    pub failure: Option<(f64, String)>,
}

impl Trajectory {
    pub fn reached(&self) -> f64 {
        match &self.failure {
            Some((t, _)) => *t,
            None => self.times.last().copied().unwrap_or(0.0),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Comparison {
    pub run_id: u64,
    pub eps: f64,
    pub trajectories: Vec<Trajectory>,
}

impl Comparison {
    pub fn trajectory(&self, model: ModelTag) -> Option<&Trajectory> {
        self.trajectories.iter().find(|t| t.model == model)
    }

    /// Log-energy error of `model` against the kinetic run.
    pub fn log_energy_error(&self, model: ModelTag) -> MetricValue {
        match (self.trajectory(model), self.trajectory(ModelTag::Kinetic)) {
            (Some(m), Some(k)) if m.failure.is_none() && k.failure.is_none() => {
                MetricValue::from_option(log_energy_rel_error(&m.energies, &k.energies))
            }
            _ => MetricValue::Failed,
        }
    }

    /// Energy samples, time reached, and log-energy errors.
    pub fn records(&self) -> Vec<ErrorRecord> {
        let mut out = Vec::new();
        for t in &self.trajectories {
            for (&time, &e) in t.times.iter().zip(&t.energies) {
                out.push(ErrorRecord::new(self.run_id, self.eps, t.model, "electric_energy", Some(time), MetricValue::Value(e)));
            }
            out.push(ErrorRecord::new(self.run_id, self.eps, t.model, "t_reached", None, MetricValue::Value(t.reached())));
            if t.model != ModelTag::Kinetic {
                out.push(ErrorRecord::new(self.run_id, self.eps, t.model, "log_energy_error", None, self.log_energy_error(t.model)));
            }
        }
        out
    }
}

fn failed(model: ModelTag, e: Error) -> Trajectory {
    Trajectory { model, times: Vec::new(), energies: Vec::new(), failure: Some((e.time_reached().unwrap_or(0.0), e.to_string())) }
}

fn run_fluid_model(
    model: ModelTag,
    closure: &mut dyn Closure,
    init: &InitialProfiles,
    eps: f64,
    t_end: f64,
    cfg: &CompareConfig,
) -> Trajectory {
    let res = cfg
        .phase_grid()
        .and_then(|g| FluidState::from_primitives(&init.rho, &init.u, &init.temperature, g.space))
        .and_then(|s| run_fluid(s, closure, eps, t_end, cfg.record_dt, &cfg.fluid));
    match res {
        Ok(traj) => Trajectory { model, times: traj.times(), energies: traj.electric_energies(), failure: None },
        Err(e) => failed(model, e),
    }
}

fn run_kinetic_model(init: &InitialProfiles, eps: f64, cfg: &CompareConfig) -> Trajectory {
    let res = cfg.phase_grid().and_then(|g| {
        let f0 = maxwellian(&init.rho, &init.u, &init.temperature, &g)?;
        run_kinetic(f0, eps, &cfg.schedule(), &g, &cfg.kinetic)
    });
    match res {
        Ok(snaps) => {
            let dx = 2.0 * std::f64::consts::PI / cfg.nx as f64;
            Trajectory {
                model: ModelTag::Kinetic,
                times: snaps.iter().map(|s| s.time).collect(),
                energies: snaps.iter().map(|s| electric_energy(&s.field.e, dx)).collect(),
                failure: None,
            }
        }
        Err(e) => failed(ModelTag::Kinetic, e),
    }
}

/// Runs the requested models from a shared initial condition sampled on the
/// comparison grid. `Kinetic` is always run as the reference. The network
/// runs with the smoothing width of its pipeline.
pub fn compare_models<M: WindowModel>(
    network: Option<&NeuralClosure<M>>,
    init: &InitialProfiles,
    eps: f64,
    run_id: u64,
    models: &[ModelTag],
    cfg: &CompareConfig,
) -> Result<Comparison> {
    if init.rho.len() != cfg.nx {
        return Err(Error::Shape(format!("initial condition has {} points, grid {}", init.rho.len(), cfg.nx)));
    }
    let mut trajectories = vec![run_kinetic_model(init, eps, cfg)];
    for &m in models {
        let t = match m {
            ModelTag::Kinetic => continue,
            ModelTag::FluidKinetic => {
                let res = cfg.phase_grid().and_then(|g| {
                    let f0 = maxwellian(&init.rho, &init.u, &init.temperature, &g)?;
                    KineticClosure::new(KineticSim::new(f0, eps, g, cfg.kinetic)?)
                });
                match res {
                    Ok(mut c) => run_fluid_model(m, &mut c, init, eps, cfg.t_end, cfg),
                    Err(e) => failed(m, e),
                }
            }
            ModelTag::FluidNetwork => {
                let net = network.ok_or_else(|| Error::Config("Fluid+Network needs a model".into()))?;
                let mut c = SmoothedNetwork { net, sigma: net.pipeline.smoothing_sigma };
                run_fluid_model(m, &mut c, init, eps, cfg.t_end, cfg)
            }
            ModelTag::NavierStokes => run_fluid_model(m, &mut NavierStokesClosure, init, eps, cfg.t_end, cfg),
            ModelTag::Euler => run_fluid_model(m, &mut ZeroClosure, init, eps, cfg.t_end, cfg),
            ModelTag::NsEstimate | ModelTag::NnEstimate => {
                return Err(Error::Config(format!("{m} is not a simulation model")));
            }
        };
        trajectories.push(t);
    }
    Ok(Comparison { run_id, eps, trajectories })
}

/// A run specification: id, Knudsen number and initial profiles.
#[derive(Debug, Clone, PartialEq)]
pub struct RunSpec {
    pub run_id: u64,
    pub eps: f64,
    pub init: InitialProfiles,
}

/// `n` values log-spaced over `range`, endpoints included.
pub fn log_spaced(range: [f64; 2], n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![range[0]],
        _ => {
            let (a, b) = (range[0].ln(), range[1].ln());
            (0..n).map(|k| (a + (b - a) * k as f64 / (n - 1) as f64).exp()).collect()
        }
    }
}

/// Random initial conditions on an `nx`-point grid, one per Knudsen number,
/// drawn with the generation rules. Run `k` uses stream `k` of `seed`.
pub fn sample_runs(eps: &[f64], nx: usize, family: InitFamily, seed: u64) -> Result<Vec<RunSpec>> {
    let cfg = GenConfig { nx, seed, init_family: family, ..GenConfig::default() };
    let grid = crate::grid::SpaceGrid::periodic_2pi(nx)?;
    eps.iter()
        .enumerate()
        .map(|(k, &e)| {
            let mut rng = run_rng(seed, k as u64);
            Ok(RunSpec { run_id: k as u64, eps: e, init: random_initial_condition(&mut rng, &cfg, &grid)? })
        })
        .collect()
}

/// [`compare_models`] over many runs, in parallel, results in input order.
pub fn compare_many<M: WindowModel>(
    network: Option<&NeuralClosure<M>>,
    runs: &[RunSpec],
    models: &[ModelTag],
    cfg: &CompareConfig,
) -> Result<Vec<Comparison>> {
    runs.par_iter()
        .map(|r| compare_models(network, &r.init, r.eps, r.run_id, models, cfg))
        .collect()
}

/// Prediction error after smoothing with each width. Values are tagged
/// `NN-estimate`, metric `rel_l2_smoothed`, `param` = sigma.
pub fn smoothing_sweep<M: WindowModel>(
    closure: &NeuralClosure<M>,
    dataset: &Dataset,
    entries: &[usize],
    sigmas: &[f64],
) -> Result<Vec<ErrorRecord>> {
    let dx = 2.0 * std::f64::consts::PI / dataset.nx as f64;
    let mut out = Vec::new();
    for &i in entries {
        let e = &dataset.entries[i];
        let (raw, dxw) = closure.raw_prediction(e.eps, &e.rho, &e.u, &e.temperature, dx)?;
        for &s in sigmas {
            let mut q = gaussian_smooth(&raw, s, dxw);
            if q.len() != e.q.len() {
                q = fourier_resample(&q, e.q.len())?;
            }
            out.push(ErrorRecord::new(
                i as u64,
                e.eps,
                ModelTag::NnEstimate,
                "rel_l2_smoothed",
                Some(s),
                MetricValue::from_option(rel_l2(&e.q, &q)),
            ));
        }
    }
    Ok(out)
}

/// Runs Fluid+Network to `t_target` for every run and smoothing width.
/// Records `t_reached` and `reached` (1 or 0) with `param` = sigma.
pub fn stability_sweep<M: WindowModel>(
    closure: &NeuralClosure<M>,
    runs: &[RunSpec],
    sigmas: &[f64],
    t_target: f64,
    cfg: &CompareConfig,
) -> Result<Vec<ErrorRecord>> {
    let jobs: Vec<(&RunSpec, f64)> = sigmas.iter().flat_map(|&s| runs.iter().map(move |r| (r, s))).collect();
    let trajs: Vec<Trajectory> = jobs
        .par_iter()
        .map(|&(r, s)| {
            let mut c = SmoothedNetwork { net: closure, sigma: s };
            run_fluid_model(ModelTag::FluidNetwork, &mut c, &r.init, r.eps, t_target, cfg)
        })
        .collect();
    let mut out = Vec::new();
    for ((r, s), t) in jobs.iter().zip(&trajs) {
        let ok = t.failure.is_none();
        out.push(ErrorRecord::new(r.run_id, r.eps, ModelTag::FluidNetwork, "t_reached", Some(*s), MetricValue::Value(t.reached())));
        out.push(ErrorRecord::new(
            r.run_id,
            r.eps,
            ModelTag::FluidNetwork,
            "reached",
            Some(*s),
            MetricValue::Value(if ok { 1.0 } else { 0.0 }),
        ));
    }
    Ok(out)
}

/// Number of runs that reached the target per sigma, in `sigmas` order.
pub fn success_counts(records: &[ErrorRecord], sigmas: &[f64]) -> Vec<usize> {
    sigmas
        .iter()
        .map(|&s| {
            records
                .iter()
                .filter(|r| r.metric == "reached" && r.param == Some(s) && r.value == MetricValue::Value(1.0))
                .count()
        })
        .collect()
}

/// Network error on entries resampled to each target resolution, without
/// (`rel_l2_naive`) and with (`rel_l2_corrected`) resampling back to the
/// training resolution inside the closure. `param` is the resolution.
pub fn resolution_test<M: WindowModel + Clone>(
    closure: &NeuralClosure<M>,
    dataset: &Dataset,
    entries: &[usize],
    targets: &[usize],
) -> Result<Vec<ErrorRecord>> {
    let mut naive = closure.clone();
    naive.corrective_resampling = false;
    let mut corrected = closure.clone();
    corrected.corrective_resampling = true;
    let mut out = Vec::new();
    for &n in targets {
        let dx = 2.0 * std::f64::consts::PI / n as f64;
        for &i in entries {
            let e = &dataset.entries[i];
            let rs = |v: &[f64]| fourier_resample(v, n);
            let (rho, u, t, q) = (rs(&e.rho)?, rs(&e.u)?, rs(&e.temperature)?, rs(&e.q)?);
            for (c, metric) in [(&naive, "rel_l2_naive"), (&corrected, "rel_l2_corrected")] {
                let p = c.predict(e.eps, &rho, &u, &t, dx)?;
                out.push(ErrorRecord::new(
                    i as u64,
                    e.eps,
                    ModelTag::NnEstimate,
                    metric,
                    Some(n as f64),
                    MetricValue::from_option(rel_l2(&q, &p)),
                ));
            }
        }
    }
    Ok(out)
}

/// Heat-flux estimate errors along kinetic runs at the training
/// resolution, sampled every `record_dt` up to `t_end`. `param` is the time.
pub fn time_error_study<M: WindowModel>(
    closure: &NeuralClosure<M>,
    runs: &[RunSpec],
    gen: &GenConfig,
    t_end: f64,
    record_dt: f64,
) -> Result<Vec<ErrorRecord>> {
    let grid = gen.phase_grid()?;
    let dx = grid.dx();
    let times = record_schedule(t_end, record_dt);
    let per_run: Vec<Result<Vec<ErrorRecord>>> = runs
        .par_iter()
        .map(|r| {
            let mut out = Vec::new();
            let f0 = maxwellian(&r.init.rho, &r.init.u, &r.init.temperature, &grid)?;
            let snaps = match run_kinetic(f0, r.eps, &times, &grid, &gen.kinetic) {
                Ok(s) => s,
                Err(e) => {
                    let t = e.time_reached();
                    out.push(ErrorRecord::new(r.run_id, r.eps, ModelTag::Kinetic, "t_reached", None, MetricValue::from_option(t)));
                    return Ok(out);
                }
            };
            for s in snaps {
                let m = &s.moments;
                let nn = closure.predict(r.eps, &m.rho, &m.u, &m.temperature, dx)?;
                let ns = navier_stokes_heat_flux(r.eps, &m.rho, &m.temperature, dx);
                for (tag, q) in [(ModelTag::NnEstimate, nn), (ModelTag::NsEstimate, ns)] {
                    out.push(ErrorRecord::new(
                        r.run_id,
                        r.eps,
                        tag,
                        "rel_l2",
                        Some(s.time),
                        MetricValue::from_option(rel_l2(&m.heat_flux, &q)),
                    ));
                }
            }
            Ok(out)
        })
        .collect();
    let mut out = Vec::new();
    for r in per_run {
        out.extend(r?);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::processing::{PipelineConfig, Signal, StandardizationStats};
    use std::f64::consts::PI;

    #[test]
    fn rel_l2_examples() {
        let q = vec![1.0, -2.0, 0.5];
        assert_eq!(rel_l2(&q, &q), Some(0.0));
        assert_eq!(rel_l2(&q, &[0.0; 3]), Some(1.0));
        let q2: Vec<f64> = q.iter().map(|v| 2.0 * v).collect();
        assert_eq!(rel_l2(&q, &q2), Some(1.0));
        assert_eq!(rel_l2(&[0.0; 3], &q), None);
    }

    #[test]
    fn energy_examples() {
        assert_eq!(electric_energy(&[0.0; 8], 0.1), 0.0);
        let n = 512;
        let dx = 2.0 * PI / n as f64;
        let e: Vec<f64> = (0..n).map(|i| 0.1 * (i as f64 * dx).sin()).collect();
        assert!((electric_energy(&e, dx) - 0.01 * PI).abs() < 1e-4);
        let e2: Vec<f64> = e.iter().map(|v| 2.0 * v).collect();
        assert!((electric_energy(&e2, dx) - 4.0 * electric_energy(&e, dx)).abs() < 1e-15);
    }

    #[test]
    fn log_energy_examples() {
        let k = vec![1.0, 0.5, 0.2, 0.1];
        assert_eq!(log_energy_rel_error(&k, &k), Some(0.0));
        let m: Vec<f64> = k.iter().map(|e| e * std::f64::consts::E).collect();
        let lk: Vec<f64> = k.iter().map(|e: &f64| e.ln()).collect();
        let expect = 2.0 / lk.iter().map(|v| v * v).sum::<f64>().sqrt();
        assert!((log_energy_rel_error(&m, &k).unwrap() - expect).abs() < 1e-14);
        // exp(-t) against exp(-2t) at t = 1, 2: logs (-1,-2) vs (-2,-4)
        let t = [1.0f64, 2.0];
        let kin: Vec<f64> = t.iter().map(|t| (-t).exp()).collect();
        let mdl: Vec<f64> = t.iter().map(|t| (-2.0 * t).exp()).collect();
        assert!((log_energy_rel_error(&mdl, &kin).unwrap() - 1.0).abs() < 1e-14);
        assert_eq!(log_energy_rel_error(&[0.0, 1.0], &[1.0, 1.0]), None);
        assert_eq!(log_energy_rel_error(&[1.0], &[1.0, 1.0]), None);
    }

    #[test]
    fn summaries() {
        let vals = [
            MetricValue::Value(3.0),
            MetricValue::Value(1.0),
            MetricValue::Undefined,
            MetricValue::Value(2.0),
            MetricValue::Failed,
        ];
        let s = Summary::of(&vals);
        assert_eq!((s.count, s.undefined, s.failed), (3, 1, 1));
        assert_eq!((s.median, s.q1, s.q3), (2.0, 1.5, 2.5));
        let mut rev = vals;
        rev.reverse();
        assert_eq!(Summary::of(&rev), s);
        assert_eq!(median(&[4.0, 1.0, 3.0, 2.0]), Some(2.5));
        assert_eq!(median(&[]), None);
    }

    #[test]
    fn eps_groupings() {
        let recs: Vec<ErrorRecord> = (0..10)
            .map(|i| ErrorRecord::new(i, 0.01 + 0.1 * i as f64, ModelTag::NnEstimate, "rel_l2", None, MetricValue::Value(i as f64)))
            .collect();
        let refs: Vec<&ErrorRecord> = recs.iter().collect();
        let g = eps_quantile_groups(&refs, 5);
        assert_eq!(g.iter().map(|s| s.median).collect::<Vec<_>>(), vec![0.5, 2.5, 4.5, 6.5, 8.5]);
        let bins = eps_class_summaries(&refs, 20, [0.01, 1.0]);
        assert_eq!(bins.len(), 20);
        assert_eq!(bins.iter().map(|(_, s)| s.count).sum::<usize>(), 10);
        assert_eq!(bins.last().unwrap().0[1], 1.0);
    }

    #[test]
    fn csv_format() {
        let recs = vec![
            ErrorRecord::new(3, 0.5, ModelTag::FluidNetwork, "log_energy_error", None, MetricValue::Value(0.25)),
            ErrorRecord::new(4, 0.1, ModelTag::NsEstimate, "rel_l2", Some(0.06), MetricValue::Undefined),
        ];
        let mut buf = Vec::new();
        write_csv(&recs, &mut buf).unwrap();
        let s = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = s.lines().collect();
        assert_eq!(lines[0], "run_id,eps,model,metric,param,value");
        assert_eq!(lines[1], "3,0.5,Fluid+Network,log_energy_error,,2.5e-1");
        assert_eq!(lines[2], "4,0.1,NS-estimate,rel_l2,0.06,undefined");
        let mut buf = Vec::new();
        write_csv(&[], &mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap().trim(), "run_id,eps,model,metric,param,value");
    }

    /// Predicts the normalized heat flux of the first entry whatever the input.
    #[derive(Clone)]
    struct Constant(usize);

    impl WindowModel for Constant {
        fn window_size(&self) -> usize {
            self.0
        }

        fn predict_windows(&self, windows: &[Signal]) -> Result<Vec<Vec<f64>>> {
            Ok(windows.iter().map(|w| vec![0.0; w.len]).collect())
        }
    }

    fn small_dataset() -> Dataset {
        let cfg = GenConfig { n_eps: 2, inits_per_eps: 1, times_per_run: 2, nx: 64, nv: 41, ..GenConfig::default() };
        crate::datagen::generate_dataset(&cfg).unwrap().dataset
    }

    fn zero_network(nx: usize) -> NeuralClosure<Constant> {
        let pipe = PipelineConfig { window_size: 32, training_resolution: nx, ..Default::default() };
        NeuralClosure::new(Constant(32), StandardizationStats::identity(), pipe).unwrap()
    }

    #[test]
    fn dataset_errors_of_a_zero_network() {
        let ds = small_dataset();
        let net = zero_network(64);
        let recs = predict_vs_dataset(&net, &ds, &[0, 1, 3]).unwrap();
        assert_eq!(recs.len(), 12);
        for r in select(&recs, ModelTag::NnEstimate, "rel_l2") {
            assert_eq!(r.value, MetricValue::Value(1.0));
        }
        assert!(select(&recs, ModelTag::NsEstimate, "rel_l2").iter().all(|r| r.value.value().unwrap() > 0.0));
        let sweep = smoothing_sweep(&net, &ds, &[0, 2], &[0.0, 0.1]).unwrap();
        assert_eq!(sweep.len(), 4);
        assert!(sweep.iter().all(|r| r.value == MetricValue::Value(1.0)));
        let res = resolution_test(&net, &ds, &[1], &[64, 32]).unwrap();
        assert_eq!(res.len(), 4);
        assert!(res.iter().all(|r| r.value == MetricValue::Value(1.0)));
    }

    fn small_compare() -> CompareConfig {
        CompareConfig { nx: 32, nv: 31, t_end: 0.5, record_dt: 0.25, ..Default::default() }
    }

    #[test]
    fn uniform_init_gives_undefined_errors() {
        let cfg = small_compare();
        let init = InitialProfiles { rho: vec![1.0; 32], u: vec![0.0; 32], temperature: vec![1.0; 32], mach: 0.0 };
        let models = [ModelTag::FluidKinetic, ModelTag::NavierStokes, ModelTag::Euler];
        let c = compare_models::<Constant>(None, &init, 0.5, 0, &models, &cfg).unwrap();
        assert_eq!(c.trajectories.len(), 4);
        for t in &c.trajectories {
            assert!(t.failure.is_none());
            assert_eq!(t.times.len(), 3);
            assert!(t.energies.iter().all(|&e| e == 0.0));
        }
        for m in models {
            assert_eq!(c.log_energy_error(m), MetricValue::Undefined);
        }
        assert!(compare_models::<Constant>(None, &init, 0.5, 0, &[ModelTag::FluidNetwork], &cfg).is_err());
    }

    #[test]
    fn kinetic_heat_flux_beats_euler() {
        let cfg = CompareConfig { nx: 64, nv: 61, t_end: 2.0, ..Default::default() };
        let runs = sample_runs(&[1.0], 64, InitFamily::Smooth, 11).unwrap();
        let models = [ModelTag::FluidKinetic, ModelTag::Euler];
        let c = compare_many::<Constant>(None, &runs, &models, &cfg).unwrap().remove(0);
        assert_eq!(c.trajectory(ModelTag::Kinetic).unwrap().times.len(), 9);
        let fk = c.log_energy_error(ModelTag::FluidKinetic).value().unwrap();
        let eu = c.log_energy_error(ModelTag::Euler).value().unwrap();
        assert!(fk < eu, "{fk} vs {eu}");
        let recs = c.records();
        assert_eq!(select(&recs, ModelTag::Euler, "electric_energy").len(), 9);
    }

    #[test]
    fn helpers() {
        let v = log_spaced([0.01, 1.0], 10);
        assert_eq!(v.len(), 10);
        assert!((v[0] - 0.01).abs() < 1e-15 && (v[9] - 1.0).abs() < 1e-15);
        let a = sample_runs(&v[..3], 32, InitFamily::Discontinuous, 5).unwrap();
        assert_eq!(a, sample_runs(&v[..3], 32, InitFamily::Discontinuous, 5).unwrap());
        assert_ne!(a[0].init, a[1].init);
    }
}
