//! Dataset generation from kinetic simulations with random smooth initial
//! conditions and Knudsen numbers.

use std::f64::consts::PI;

use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::{Dataset, DatasetEntry, Provenance};
use crate::grid::{PhaseGrid, SpaceGrid};
use crate::kinetic::{maxwellian, run_kinetic, KineticOptions};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EpsSampling {
    #[default]
    Deterministic,
    Random,
}

/// Family of initial conditions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum InitFamily {
    #[default]
    Smooth,
    /// Smooth profiles multiplied by a random single-jump function.
    Discontinuous,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GenConfig {
    pub n_eps: usize,
    pub inits_per_eps: usize,
    pub times_per_run: usize,
    pub eps_range: [f64; 2],
    pub time_window: [f64; 2],
    pub nx: usize,
    pub nv: usize,
    pub vmax: f64,
    pub n_modes: usize,
    pub mach_range: [f64; 2],
    pub seed: u64,
    pub eps_sampling: EpsSampling,
    pub init_family: InitFamily,
    pub kinetic: KineticOptions,
}

impl Default for GenConfig {
    fn default() -> Self {
        GenConfig {
            n_eps: 100,
            inits_per_eps: 5,
            times_per_run: 20,
            eps_range: [0.01, 1.0],
            time_window: [0.1, 2.0],
            nx: 1024,
            nv: 141,
            vmax: 7.0,
            n_modes: 20,
            mach_range: [1e-4, 0.5],
            seed: 0,
            eps_sampling: EpsSampling::Deterministic,
            init_family: InitFamily::Smooth,
            kinetic: KineticOptions::default(),
        }
    }
}

impl GenConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Config(m.to_string()));
        if self.n_eps == 0 || self.inits_per_eps == 0 || self.times_per_run == 0 || self.n_modes == 0 {
            return bad("generation counts must be >= 1");
        }
        if !(self.eps_range[0] > 0.0 && self.eps_range[0] <= self.eps_range[1]) {
            return bad("eps_range must satisfy 0 < min <= max");
        }
        if !(self.time_window[0] >= 0.0 && self.time_window[0] <= self.time_window[1]) {
            return bad("time_window must satisfy 0 <= min <= max");
        }
        if !(self.mach_range[0] > 0.0 && self.mach_range[0] <= self.mach_range[1]) {
            return bad("mach_range must satisfy 0 < min <= max");
        }
        PhaseGrid::new(self.nx, 2.0 * PI, self.nv, self.vmax)?;
        Ok(())
    }

    pub fn phase_grid(&self) -> Result<PhaseGrid> {
        PhaseGrid::new(self.nx, 2.0 * PI, self.nv, self.vmax)
    }

    pub fn run_count(&self) -> usize {
        self.n_eps * self.inits_per_eps
    }
}

/// Independent random stream for one run.
pub fn run_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// `alpha * (a0_half + 0.5 * sum_n (a_n cos(nx) + b_n sin(nx)))` with
/// `a_n, b_n` uniform in `[-1/n, 1/n]`, sampled on `grid`.
pub fn random_fourier(rng: &mut ChaCha8Rng, a0_half: f64, alpha: f64, n_modes: usize, grid: &SpaceGrid) -> Vec<f64> {
    let coeffs: Vec<(f64, f64)> = (1..=n_modes)
        .map(|n| {
            let b = 1.0 / n as f64;
            (rng.random_range(-b..=b), rng.random_range(-b..=b))
        })
        .collect();
    grid.sample(|x| {
        let s: f64 = coeffs
            .iter()
            .enumerate()
            .map(|(k, (a, b))| {
                let n = (k + 1) as f64;
                a * (n * x).cos() + b * (n * x).sin()
            })
            .sum();
        alpha * (a0_half + 0.5 * s)
    })
}

const MAX_REDRAWS: usize = 1000;

fn positive_draw(rng: &mut ChaCha8Rng, mut draw: impl FnMut(&mut ChaCha8Rng) -> Vec<f64>, what: &str) -> Result<Vec<f64>> {
    for _ in 0..MAX_REDRAWS {
        let v = draw(rng);
        if v.iter().all(|&x| x > 0.0) {
            return Ok(v);
        }
    }
    Err(Error::Numerical(format!("no positive {what} profile after {MAX_REDRAWS} draws")))
}

/// Piecewise-linear multiplier with a jump of size `2|c|` at `x_d`.
pub fn discontinuity_multiplier(x_d: f64, c: f64) -> impl Fn(f64) -> f64 {
    move |x| {
        let base = c / PI * (x - x_d);
        if x < x_d {
            base + 1.0 + c
        } else {
            base + 1.0 - c
        }
    }
}

/// Initial profiles for density, velocity and temperature.
#[derive(Debug, Clone, PartialEq)]
pub struct InitialProfiles {
    pub rho: Vec<f64>,
    pub u: Vec<f64>,
    pub temperature: Vec<f64>,
    pub mach: f64,
}

fn draw_multiplier(rng: &mut ChaCha8Rng, grid: &SpaceGrid, positive: bool) -> Result<Vec<f64>> {
    for _ in 0..MAX_REDRAWS {
        let x_d = rng.random_range(0.0..=2.0 * PI);
        let c = rng.random_range(-1.0..=1.0);
        let m = grid.sample(discontinuity_multiplier(x_d, c));
        if !positive || m.iter().all(|&v| v >= 0.1) {
            return Ok(m);
        }
    }
    Err(Error::Numerical("no admissible discontinuity multiplier".into()))
}

/// Random density, velocity and temperature. The velocity is scaled so that
/// `max |u| / sqrt(2T)` equals a log-uniform Mach target.
pub fn random_initial_condition(rng: &mut ChaCha8Rng, cfg: &GenConfig, grid: &SpaceGrid) -> Result<InitialProfiles> {
    let nm = cfg.n_modes;
    let disc = cfg.init_family == InitFamily::Discontinuous;
    let mut rho = positive_draw(rng, |r| random_fourier(r, 1.0, 1.0, nm, grid), "density")?;
    let mut temperature = positive_draw(
        rng,
        |r| {
            let alpha = r.random_range(0.1..=1.0);
            random_fourier(r, 1.0, alpha, nm, grid)
        },
        "temperature",
    )?;
    let a0_half = rng.random_range(-1.0..=1.0);
    let mut shape = random_fourier(rng, a0_half, 1.0, nm, grid);
    if disc {
        for v in [&mut rho, &mut temperature] {
            let m = draw_multiplier(rng, grid, true)?;
            v.iter_mut().zip(&m).for_each(|(x, k)| *x *= k);
        }
        let m = draw_multiplier(rng, grid, false)?;
        shape.iter_mut().zip(&m).for_each(|(x, k)| *x *= k);
    }
    let [lo, hi] = cfg.mach_range;
    let mach = (lo.ln() + rng.random::<f64>() * (hi.ln() - lo.ln())).exp();
    let current = shape
        .iter()
        .zip(&temperature)
        .fold(0.0f64, |m, (u, t)| m.max(u.abs() / (2.0 * t).sqrt()));
    let u = if current > 0.0 {
        shape.iter().map(|v| v * mach / current).collect()
    } else {
        vec![0.0; grid.nx]
    };
    Ok(InitialProfiles { rho, u, temperature, mach })
}

/// Knudsen numbers with `sqrt(eps)` uniform in the square roots of the range:
/// an even grid in deterministic mode, random draws otherwise.
pub fn sample_knudsen(cfg: &GenConfig) -> Vec<f64> {
    let (a, b) = (cfg.eps_range[0].sqrt(), cfg.eps_range[1].sqrt());
    let n = cfg.n_eps;
    match cfg.eps_sampling {
        EpsSampling::Deterministic => (0..n)
            .map(|k| {
                if k == 0 {
                    return cfg.eps_range[0];
                }
                if k + 1 == n {
                    return cfg.eps_range[1];
                }
                let s = a + (k as f64 / (n - 1) as f64) * (b - a);
                s * s
            })
            .collect(),
        EpsSampling::Random => {
            let mut rng = run_rng(cfg.seed, u64::MAX);
            (0..n)
                .map(|_| {
                    let s = rng.random_range(a..=b);
                    (s * s).clamp(cfg.eps_range[0], cfg.eps_range[1])
                })
                .collect()
        }
    }
}

/// `times_per_run` uniform draws in the time window, sorted.
pub fn sample_record_times(rng: &mut ChaCha8Rng, cfg: &GenConfig) -> Vec<f64> {
    let [lo, hi] = cfg.time_window;
    let mut t: Vec<f64> = (0..cfg.times_per_run).map(|_| rng.random_range(lo..=hi)).collect();
    t.sort_by(f64::total_cmp);
    t
}

/// Outcome of a generation: the dataset and the runs that failed.
#[derive(Debug, Clone)]
pub struct GenReport {
    pub dataset: Dataset,
    pub failures: Vec<(u64, String)>,
}

fn run_one(cfg: &GenConfig, grid: &PhaseGrid, run_id: u64, eps: f64) -> Result<Vec<DatasetEntry>> {
    let mut rng = run_rng(cfg.seed, run_id);
    let init = random_initial_condition(&mut rng, cfg, &grid.space)?;
    let times = sample_record_times(&mut rng, cfg);
    let f0 = maxwellian(&init.rho, &init.u, &init.temperature, grid)?;
    let snaps = run_kinetic(f0, eps, &times, grid, &cfg.kinetic)?;
    Ok(snaps
        .into_iter()
        .map(|s| DatasetEntry {
            eps,
            rho: s.moments.rho,
            u: s.moments.u,
            temperature: s.moments.temperature,
            q: s.moments.heat_flux,
            provenance: Provenance { run_id, record_time: s.time, seed: cfg.seed },
        })
        .collect())
}

/// Runs every `(eps, init)` pair in parallel and merges the entries in
/// run order. Failed runs are skipped and reported.
pub fn generate_dataset(cfg: &GenConfig) -> Result<GenReport> {
    cfg.validate()?;
    let grid = cfg.phase_grid()?;
    let eps = sample_knudsen(cfg);
    let runs: Vec<(u64, f64)> = (0..cfg.run_count())
        .map(|r| (r as u64, eps[r / cfg.inits_per_eps]))
        .collect();
    let results: Vec<Result<Vec<DatasetEntry>>> =
        runs.par_iter().map(|&(id, e)| run_one(cfg, &grid, id, e)).collect();
    let mut entries = Vec::new();
    let mut failures = Vec::new();
    for ((id, _), r) in runs.iter().zip(results) {
        match r {
            Ok(es) => entries.extend(es),
            Err(e) => failures.push((*id, e.to_string())),
        }
    }
    Ok(GenReport {
        dataset: Dataset::new(cfg.nx, cfg.seed, Some(cfg.clone()), entries),
        failures,
    })
}
