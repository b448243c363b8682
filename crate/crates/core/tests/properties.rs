//! Randomized invariants across modules.

use std::f64::consts::PI;

use heatflux::closures::navier_stokes_heat_flux;
use heatflux::dataset::{Dataset, DatasetEntry, Provenance};
use heatflux::evaluation::{log_energy_rel_error, rel_l2};
use heatflux::fluid::llf_flux;
use heatflux::grid::{PhaseGrid, SpaceGrid};
use heatflux::kinetic::{bgk_relax, compute_moments, maxwellian, solve_poisson, transport_step, KineticState, PoissonSign};
use heatflux::linalg::{solve_cyclic_tridiagonal, solve_tridiagonal};
use heatflux::processing::{
    fourier_resample, gaussian_smooth, ns_denormalize, ns_normalize, reconstruct, slice_predict, PipelineConfig, Signal,
};
use heatflux::trainer::mae_loss;
use heatflux::vnet::{init_params, Padding, Tensor, VNetConfig};
use proptest::prelude::*;

fn vec_in(lo: f64, hi: f64, n: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(lo..hi, n)
}

/// Smooth positive periodic profile from a few random modes.
fn profile(base: f64, amp: &[f64], n: usize) -> Vec<f64> {
    (0..n)
        .map(|i| {
            let x = 2.0 * PI * i as f64 / n as f64;
            base + amp.iter().enumerate().map(|(k, a)| a * ((k + 1) as f64 * x + k as f64).sin()).sum::<f64>()
        })
        .collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn slice_reconstruct_identity(data in vec_in(-3.0, 3.0, 300), r in 2usize..=4) {
        let cfg = PipelineConfig { window_size: 64, redundancy: r, training_resolution: 300, ..Default::default() };
        let sig = Signal { channels: 1, len: 300, data: data.clone() };
        let ws = slice_predict(&sig, &cfg).unwrap();
        let preds: Vec<Vec<f64>> = ws.windows.iter().map(|w| w.data.clone()).collect();
        let back = reconstruct(&ws, &preds).unwrap();
        for (a, b) in back.iter().zip(&data) {
            prop_assert!((a - b).abs() < 1e-10);
        }
    }

    #[test]
    fn ns_normalization_inverts(q in vec_in(-5.0, 5.0, 40), scale in 1e-4f64..10.0, theta in 0.01f64..1.0) {
        let back = ns_denormalize(&ns_normalize(&q, scale, theta), scale, theta);
        for (a, b) in back.iter().zip(&q) {
            prop_assert!((a - b).abs() <= 1e-14 * b.abs().max(1.0));
        }
    }

    #[test]
    fn fourier_up_down_identity(amp in vec_in(-1.0, 1.0, 6), n in 20usize..80, factor in 2usize..4) {
        // band-limited below the coarse Nyquist frequency
        let s = profile(0.3, &amp, n);
        let up = fourier_resample(&s, n * factor).unwrap();
        let down = fourier_resample(&up, n).unwrap();
        for (a, b) in down.iter().zip(&s) {
            prop_assert!((a - b).abs() < 1e-10);
        }
    }

    #[test]
    fn smoothing_preserves_mean(q in vec_in(-2.0, 2.0, 128), sigma in 0.0f64..0.5) {
        let dx = 2.0 * PI / 128.0;
        let s = gaussian_smooth(&q, sigma, dx);
        let m0: f64 = q.iter().sum::<f64>() / 128.0;
        let m1: f64 = s.iter().sum::<f64>() / 128.0;
        prop_assert!((m0 - m1).abs() < 1e-12);
        let max0 = q.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        prop_assert!(s.iter().all(|v| v.abs() <= max0 + 1e-12));
    }

    #[test]
    fn bgk_conserves_moments(amp in vec_in(-0.3, 0.3, 3), uamp in vec_in(-0.4, 0.4, 2),
                             dt in 0.001f64..0.5, eps in 0.01f64..1.0) {
        let grid = PhaseGrid::new(16, 2.0 * PI, 61, 7.0).unwrap();
        let rho = profile(1.0, &amp, 16);
        let u = profile(0.0, &uamp, 16);
        let t = profile(1.0, &amp[..2], 16);
        let mut f = maxwellian(&rho, &u, &t, &grid).unwrap();
        // push the state away from equilibrium
        for (k, v) in f.f.iter_mut().enumerate() {
            *v *= 1.0 + 0.3 * ((k % 61) as f64 * 0.37).sin();
        }
        let m0 = compute_moments(&f, &grid).unwrap();
        let g = bgk_relax(&f, dt, eps, &grid).unwrap();
        let m1 = compute_moments(&g, &grid).unwrap();
        for i in 0..16 {
            prop_assert!((m0.rho[i] - m1.rho[i]).abs() < 1e-12 * m0.rho[i]);
            prop_assert!((m0.rho[i] * m0.u[i] - m1.rho[i] * m1.u[i]).abs() < 1e-12 * m0.rho[i]);
            prop_assert!((m0.energy[i] - m1.energy[i]).abs() < 1e-12 * m0.energy[i]);
        }
    }

    #[test]
    fn transport_conserves_mass(amp in vec_in(-0.3, 0.3, 3), e in vec_in(-0.2, 0.2, 16)) {
        let grid = PhaseGrid::new(16, 2.0 * PI, 81, 7.0).unwrap();
        let rho = profile(1.0, &amp, 16);
        let f = maxwellian(&rho, &[0.0; 16], &[1.0; 16], &grid).unwrap();
        let dt = 0.5 * grid.dx() / 7.0;
        let g = transport_step(&f, &e, dt, &grid).unwrap();
        prop_assert!((g.mass(&grid) - f.mass(&grid)).abs() < 1e-11 * f.mass(&grid));
    }

    #[test]
    fn poisson_field_has_zero_mean_and_solves(amp in vec_in(-0.5, 0.5, 4)) {
        let grid = SpaceGrid::periodic_2pi(64).unwrap();
        let rho = profile(1.0, &amp, 64);
        let fld = solve_poisson(&rho, &grid, PoissonSign::Plasma).unwrap();
        prop_assert!(fld.e.iter().sum::<f64>().abs() < 1e-10);
        let mean = rho.iter().sum::<f64>() / 64.0;
        let dx = grid.dx();
        for i in 0..64 {
            let (l, r) = ((i + 63) % 64, (i + 1) % 64);
            let lap = (fld.phi[l] - 2.0 * fld.phi[i] + fld.phi[r]) / (dx * dx);
            prop_assert!((lap - (rho[i] - mean)).abs() < 1e-8);
        }
        let rev = solve_poisson(&rho, &grid, PoissonSign::Reversed).unwrap();
        for (a, b) in rev.e.iter().zip(&fld.e) {
            prop_assert!((a + b).abs() < 1e-12);
        }
    }

    #[test]
    fn tridiagonal_solutions_satisfy_system(a in vec_in(-1.0, 1.0, 12), c in vec_in(-1.0, 1.0, 12), d in vec_in(-5.0, 5.0, 12)) {
        let b: Vec<f64> = a.iter().zip(&c).map(|(x, y)| 2.5 + x.abs() + y.abs()).collect();
        let n = 12;
        let x = solve_tridiagonal(&a, &b, &c, &d).unwrap();
        for i in 0..n {
            let mut s = b[i] * x[i];
            if i > 0 { s += a[i] * x[i - 1]; }
            if i + 1 < n { s += c[i] * x[i + 1]; }
            prop_assert!((s - d[i]).abs() < 1e-12);
        }
        let y = solve_cyclic_tridiagonal(&a, &b, &c, &d).unwrap();
        for i in 0..n {
            let s = a[i] * y[(i + n - 1) % n] + b[i] * y[i] + c[i] * y[(i + 1) % n];
            prop_assert!((s - d[i]).abs() < 1e-11);
        }
    }

    #[test]
    fn llf_flux_is_consistent(rho in 0.1f64..3.0, u in -2.0f64..2.0, t in 0.1f64..3.0, q in -1.0f64..1.0) {
        let w = 0.5 * rho * u * u + 0.5 * rho * t;
        let st = [rho, rho * u, w];
        let f = llf_flux(st, st, q, q).unwrap();
        let p = rho * t;
        prop_assert!((f[0] - rho * u).abs() < 1e-12);
        prop_assert!((f[1] - (rho * u * u + p)).abs() < 1e-12);
        prop_assert!((f[2] - ((w + p) * u + q)).abs() < 1e-12);
    }

    #[test]
    fn ns_flux_vanishes_for_uniform_temperature(rho in vec_in(0.2, 2.0, 16), t in 0.1f64..3.0, eps in 0.01f64..1.0) {
        prop_assert!(navier_stokes_heat_flux(eps, &rho, &[t; 16], 0.3).iter().all(|&q| q == 0.0));
    }

    #[test]
    fn metrics_behave(q in vec_in(-2.0, 2.0, 30), k in 0.1f64..10.0) {
        prop_assume!(q.iter().any(|v| v.abs() > 1e-3));
        let scaled: Vec<f64> = q.iter().map(|v| v * k).collect();
        let qhat: Vec<f64> = q.iter().map(|v| v * 0.9 + 0.05).collect();
        let qhat_s: Vec<f64> = qhat.iter().map(|v| v * k).collect();
        let a = rel_l2(&q, &qhat).unwrap();
        let b = rel_l2(&scaled, &qhat_s).unwrap();
        prop_assert!((a - b).abs() < 1e-12 * a.max(1.0));
        let (loss, grad) = mae_loss(&qhat, &q).unwrap();
        prop_assert!(loss >= 0.0 && grad.iter().all(|g| g.abs() <= 1.0 / 30.0 + 1e-15));
        let e: Vec<f64> = q.iter().map(|v| v.abs() + 0.1).collect();
        prop_assert_eq!(log_energy_rel_error(&e, &e), Some(0.0));
    }

    #[test]
    fn dataset_round_trip_is_bitwise(eps in 0.01f64..1.0, vals in vec_in(0.5, 1.5, 8), seed in any::<u64>()) {
        let entry = DatasetEntry {
            eps,
            rho: vals.clone(),
            u: vals.iter().map(|v| v - 1.0).collect(),
            temperature: vals.iter().rev().cloned().collect(),
            q: vals.iter().map(|v| (v * 7.0).sin()).collect(),
            provenance: Provenance { run_id: 3, record_time: 0.7, seed },
        };
        let ds = Dataset::new(8, seed, None, vec![entry.clone(), entry]);
        let mut a = Vec::new();
        ds.write_to(&mut a).unwrap();
        let back = Dataset::read_from(a.as_slice()).unwrap();
        let mut b = Vec::new();
        back.write_to(&mut b).unwrap();
        prop_assert_eq!(a, b);
        prop_assert_eq!(back.entries, ds.entries);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(8))]

    #[test]
    fn periodic_vnet_is_shift_equivariant(seed in any::<u64>(), shift_blocks in 0usize..8, data in vec_in(-1.0, 1.0, 4 * 64)) {
        let cfg = VNetConfig { window: 64, levels: 3, depth: 2, kernel: 5, padding: Padding::Periodic, ..Default::default() };
        let p = init_params(&cfg, seed).unwrap();
        let shift = 4 * shift_blocks;
        let x = Tensor::from_vec(4, 64, data.clone());
        let mut xs = Tensor::zeros(4, 64);
        for c in 0..4 {
            for i in 0..64 {
                xs.data[c * 64 + (i + shift) % 64] = data[c * 64 + i];
            }
        }
        let y = p.predict(&x).unwrap();
        let ys = p.predict(&xs).unwrap();
        for i in 0..64 {
            prop_assert!((ys[(i + shift) % 64] - y[i]).abs() < 1e-12);
        }
    }
}

#[test]
fn maxwellian_of_moments_round_trips() {
    let grid = PhaseGrid::new(8, 2.0 * PI, 141, 7.0).unwrap();
    let rho = profile(1.0, &[0.2, -0.1], 8);
    let u = profile(0.1, &[0.3], 8);
    let t = profile(1.2, &[0.2], 8);
    let f: KineticState = maxwellian(&rho, &u, &t, &grid).unwrap();
    let m = compute_moments(&f, &grid).unwrap();
    // limited by the Gaussian tail beyond |v| = 7 (T up to 1.4)
    for i in 0..8 {
        assert!((m.rho[i] - rho[i]).abs() < 1e-6);
        assert!((m.u[i] - u[i]).abs() < 1e-6);
        assert!((m.temperature[i] - t[i]).abs() < 1e-5);
    }
}
