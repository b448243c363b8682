//! Data transformations around the network: standardization, heat-flux
//! normalization, window slicing and reconstruction, smoothing and Fourier
//! resampling.

use std::f64::consts::PI;

use rustfft::num_complex::Complex;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::dataset::DatasetEntry;
use crate::{Error, Result};

/// Number of network input channels: `(eps, rho, u, T)`.
pub const CHANNELS: usize = 4;

/// Processing constants of the neural closure.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub window_size: usize,
    /// Margin discarded on each side of a predicted window, as a fraction
    /// of the window size.
    pub margin_fraction: f64,
    pub redundancy: usize,
    pub norm_threshold: f64,
    /// Gaussian smoothing width in physical length units.
    pub smoothing_sigma: f64,
    pub training_resolution: usize,
    pub training_windows_per_entry: usize,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            window_size: 512,
            margin_fraction: 0.10,
            redundancy: 2,
            norm_threshold: 0.1,
            smoothing_sigma: 0.06,
            training_resolution: 1024,
            training_windows_per_entry: 8,
        }
    }
}

impl PipelineConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.window_size < 2 || self.window_size % 2 != 0 {
            return bad(format!("window_size must be even and >= 2, got {}", self.window_size));
        }
        if !(self.margin_fraction >= 0.0 && self.margin_fraction < 0.5) {
            return bad(format!("margin_fraction must lie in [0, 0.5), got {}", self.margin_fraction));
        }
        if self.redundancy < 2 {
            return bad(format!("redundancy must be >= 2, got {}", self.redundancy));
        }
        if self.useful_points() < self.redundancy {
            return bad("window too small for the requested redundancy".into());
        }
        if !(self.norm_threshold > 0.0) {
            return bad(format!("norm_threshold must be positive, got {}", self.norm_threshold));
        }
        if !(self.smoothing_sigma >= 0.0) {
            return bad(format!("smoothing_sigma must be non-negative, got {}", self.smoothing_sigma));
        }
        if self.training_resolution < 4 || self.training_windows_per_entry == 0 {
            return bad("training_resolution must be >= 4 and training_windows_per_entry >= 1".into());
        }
        Ok(())
    }

    pub fn margin_points(&self) -> usize {
        (self.margin_fraction * self.window_size as f64).round() as usize
    }

    pub fn useful_points(&self) -> usize {
        self.window_size.saturating_sub(2 * self.margin_points())
    }
}

/// A multi-channel signal stored channel-major (`data[c * len + i]`).
#[derive(Debug, Clone, PartialEq)]
pub struct Signal {
    pub channels: usize,
    pub len: usize,
    pub data: Vec<f64>,
}

impl Signal {
    pub fn zeros(channels: usize, len: usize) -> Self {
        Signal { channels, len, data: vec![0.0; channels * len] }
    }

    pub fn from_channels(chans: &[&[f64]]) -> Result<Self> {
        let len = chans.first().map_or(0, |c| c.len());
        if chans.iter().any(|c| c.len() != len) {
            return Err(Error::Shape("channels of unequal length".into()));
        }
        let mut data = Vec::with_capacity(len * chans.len());
        for c in chans {
            data.extend_from_slice(c);
        }
        Ok(Signal { channels: chans.len(), len, data })
    }

    pub fn channel(&self, c: usize) -> &[f64] {
        &self.data[c * self.len..(c + 1) * self.len]
    }

    pub fn channel_mut(&mut self, c: usize) -> &mut [f64] {
        &mut self.data[c * self.len..(c + 1) * self.len]
    }

    /// Periodic extraction of `n` consecutive points starting at `start`.
    pub fn periodic_window(&self, start: usize, n: usize) -> Signal {
        let mut out = Signal::zeros(self.channels, n);
        for c in 0..self.channels {
            let src = self.channel(c);
            let dst = out.channel_mut(c);
            for (k, d) in dst.iter_mut().enumerate() {
                *d = src[(start + k) % self.len];
            }
        }
        out
    }
}

/// Builds the 4-channel network input with `eps` as a constant channel.
pub fn assemble_input(eps: f64, rho: &[f64], u: &[f64], temperature: &[f64]) -> Result<Signal> {
    let e = vec![eps; rho.len()];
    Signal::from_channels(&[&e, rho, u, temperature])
}

/// Per-channel mean and standard deviation of the network inputs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StandardizationStats {
    pub mean: [f64; CHANNELS],
    pub std: [f64; CHANNELS],
}

impl StandardizationStats {
    pub fn identity() -> Self {
        StandardizationStats { mean: [0.0; CHANNELS], std: [1.0; CHANNELS] }
    }
}

/// Pooled mean and standard deviation over all entries and spatial points.
pub fn fit_standardization(entries: &[&DatasetEntry]) -> Result<StandardizationStats> {
    if entries.is_empty() {
        return Err(Error::Config("cannot fit standardization on an empty dataset".into()));
    }
    let chans = |e: &DatasetEntry, c: usize| -> Vec<f64> {
        match c {
            0 => vec![e.eps; e.rho.len()],
            1 => e.rho.clone(),
            2 => e.u.clone(),
            _ => e.temperature.clone(),
        }
    };
    let mut stats = StandardizationStats::identity();
    for c in 0..CHANNELS {
        let mut count = 0usize;
        let mut sum = 0.0;
        for e in entries {
            let v = chans(e, c);
            count += v.len();
            sum += v.iter().sum::<f64>();
        }
        let mean = sum / count as f64;
        let mut ss = 0.0;
        for e in entries {
            ss += chans(e, c).iter().map(|x| (x - mean) * (x - mean)).sum::<f64>();
        }
        let std = (ss / count as f64).sqrt();
        if !(std > 1e-300) || !std.is_finite() {
            return Err(Error::Numerical(format!("channel {c} has zero variance")));
        }
        stats.mean[c] = mean;
        stats.std[c] = std;
    }
    Ok(stats)
}

pub fn standardize(signal: &mut Signal, stats: &StandardizationStats) -> Result<()> {
    if signal.channels != CHANNELS {
        return Err(Error::Shape(format!("expected {CHANNELS} channels, got {}", signal.channels)));
    }
    for c in 0..CHANNELS {
        let (m, s) = (stats.mean[c], stats.std[c]);
        signal.channel_mut(c).iter_mut().for_each(|x| *x = (*x - m) / s);
    }
    Ok(())
}

/// Centered periodic derivative.
pub fn centered_derivative(v: &[f64], dx: f64) -> Vec<f64> {
    let n = v.len();
    (0..n).map(|i| (v[(i + 1) % n] - v[(i + n - 1) % n]) / (2.0 * dx)).collect()
}

/// `max_i |(3/2) eps rho_i (dT/dx)_i|` with a centered difference.
pub fn compute_qns_scale(eps: f64, rho: &[f64], temperature: &[f64], dx: f64) -> f64 {
    centered_derivative(temperature, dx)
        .iter()
        .zip(rho)
        .fold(0.0f64, |m, (dt, r)| m.max((1.5 * eps * r * dt).abs()))
}

fn ns_factor(q_ns: f64, theta: f64) -> f64 {
    if q_ns > 0.0 && q_ns <= theta {
        theta / q_ns
    } else {
        1.0
    }
}

/// Rescales heat fluxes with a small Navier-Stokes estimate up to the
/// threshold `theta`; leaves the others untouched.
pub fn ns_normalize(q: &[f64], q_ns: f64, theta: f64) -> Vec<f64> {
    let f = ns_factor(q_ns, theta);
    if f == 1.0 {
        return q.to_vec();
    }
    q.iter().map(|v| v * f).collect()
}

pub fn ns_denormalize(q: &[f64], q_ns: f64, theta: f64) -> Vec<f64> {
    let f = ns_factor(q_ns, theta);
    if f == 1.0 {
        return q.to_vec();
    }
    // Divide rather than multiply by q_ns / theta so the round trip is exact
    // up to a single rounding.
    q.iter().map(|v| v / f).collect()
}

/// Overlapping windows cut from a periodic signal for prediction.
#[derive(Debug, Clone, PartialEq)]
pub struct WindowSet {
    /// Index of each window's first point in the source (after wrapping).
    pub starts: Vec<usize>,
    pub windows: Vec<Signal>,
    pub source_len: usize,
    pub margin_points: usize,
    pub useful_len: usize,
    pub stride: usize,
    pub redundancy: usize,
}

impl WindowSet {
    /// Layout only, without extracting windows.
    pub fn layout(source_len: usize, cfg: &PipelineConfig) -> Result<WindowSet> {
        cfg.validate()?;
        if source_len == 0 {
            return Err(Error::Shape("cannot slice an empty signal".into()));
        }
        let margin = cfg.margin_points();
        let useful = cfg.useful_points();
        let stride = (useful / cfg.redundancy).max(1);
        let count = source_len.div_ceil(stride);
        let starts = (0..count)
            .map(|w| ((w * stride) as isize - margin as isize).rem_euclid(source_len as isize) as usize)
            .collect();
        Ok(WindowSet {
            starts,
            windows: Vec::new(),
            source_len,
            margin_points: margin,
            useful_len: useful,
            stride,
            redundancy: cfg.redundancy,
        })
    }

    pub fn len(&self) -> usize {
        self.starts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.starts.is_empty()
    }

    /// Number of useful-part windows covering each source point.
    pub fn coverage(&self) -> Vec<usize> {
        let mut cov = vec![0; self.source_len];
        for w in 0..self.len() {
            for k in 0..self.useful_len {
                cov[(w * self.stride + k) % self.source_len] += 1;
            }
        }
        cov
    }
}

/// Slices a periodic signal into windows whose useful parts cover every point
/// at least `redundancy` times.
pub fn slice_predict(signal: &Signal, cfg: &PipelineConfig) -> Result<WindowSet> {
    let mut ws = WindowSet::layout(signal.len, cfg)?;
    ws.windows = ws.starts.iter().map(|&s| signal.periodic_window(s, cfg.window_size)).collect();
    Ok(ws)
}

/// Raised-cosine weight of useful point `k` out of `useful` points.
pub fn reconstruction_weight(k: usize, useful: usize, redundancy: usize) -> f64 {
    let x = (k as f64 + 0.5) / useful as f64;
    ((2.0 * PI * x - PI).cos() + 1.0) / redundancy as f64
}

/// Overlap-adds the useful parts of window predictions with raised-cosine
/// weights, normalized by the summed weights.
pub fn reconstruct(ws: &WindowSet, predictions: &[Vec<f64>]) -> Result<Vec<f64>> {
    if predictions.len() != ws.len() {
        return Err(Error::Shape(format!("{} predictions for {} windows", predictions.len(), ws.len())));
    }
    let m = ws.source_len;
    let mut acc = vec![0.0; m];
    let mut wsum = vec![0.0; m];
    let weights: Vec<f64> = (0..ws.useful_len).map(|k| reconstruction_weight(k, ws.useful_len, ws.redundancy)).collect();
    for (w, pred) in predictions.iter().enumerate() {
        if pred.len() < ws.margin_points + ws.useful_len {
            return Err(Error::Shape(format!("prediction {w} is too short ({})", pred.len())));
        }
        for k in 0..ws.useful_len {
            let pos = (w * ws.stride + k) % m;
            acc[pos] += weights[k] * pred[ws.margin_points + k];
            wsum[pos] += weights[k];
        }
    }
    for (i, (a, s)) in acc.iter_mut().zip(&wsum).enumerate() {
        if *s <= 0.0 {
            return Err(Error::Shape(format!("point {i} is not covered by any window")));
        }
        *a /= s;
    }
    Ok(acc)
}

/// Fixed training slicing: `training_windows_per_entry` windows at uniform
/// stride, with labels cut at the same offsets.
pub fn slice_train(input: &Signal, label: &[f64], cfg: &PipelineConfig) -> Result<Vec<(Signal, Vec<f64>)>> {
    let n = cfg.training_resolution;
    if input.len != n || label.len() != n {
        return Err(Error::Shape(format!("training entries must have {n} points")));
    }
    let count = cfg.training_windows_per_entry;
    if n % count != 0 {
        return Err(Error::Config(format!("{count} windows do not divide {n} points evenly")));
    }
    let stride = n / count;
    Ok((0..count)
        .map(|w| {
            let start = w * stride;
            let lab = (0..cfg.window_size).map(|k| label[(start + k) % n]).collect();
            (input.periodic_window(start, cfg.window_size), lab)
        })
        .collect())
}

/// Periodic convolution with a Gaussian of width `sigma` (physical units),
/// truncated at three standard deviations and normalized.
pub fn gaussian_smooth(q: &[f64], sigma: f64, dx: f64) -> Vec<f64> {
    let half = if sigma > 0.0 { (3.0 * sigma / dx).floor() as usize } else { 0 };
    if half == 0 || q.is_empty() {
        return q.to_vec();
    }
    let mut kernel: Vec<f64> = (0..=2 * half)
        .map(|j| {
            let t = (j as f64 - half as f64) * dx;
            (-t * t / (2.0 * sigma * sigma)).exp()
        })
        .collect();
    let total: f64 = kernel.iter().sum();
    kernel.iter_mut().for_each(|w| *w /= total);
    let n = q.len();
    (0..n)
        .map(|i| {
            kernel
                .iter()
                .enumerate()
                .map(|(j, w)| w * q[(i + n * (half / n + 1) + j - half) % n])
                .sum()
        })
        .collect()
}

/// Band-limited resampling of a real periodic signal to `target` points.
///
/// When the length changes the spectrum is truncated or zero-padded; an even
/// Nyquist bin is split in two when upsampling and folded when downsampling,
/// so up-then-down is the identity.
pub fn fourier_resample(signal: &[f64], target: usize) -> Result<Vec<f64>> {
    if target < 2 || signal.is_empty() {
        return Err(Error::Shape(format!(
            "cannot resample {} points to {target}",
            signal.len()
        )));
    }
    let m = signal.len();
    if m == target {
        return Ok(signal.to_vec());
    }
    let mut planner = FftPlanner::<f64>::new();
    let mut spec: Vec<Complex<f64>> = signal.iter().map(|&x| Complex::new(x, 0.0)).collect();
    planner.plan_fft_forward(m).process(&mut spec);

    let mut out = vec![Complex::new(0.0, 0.0); target];
    let small = m.min(target);
    // Bins strictly below the Nyquist frequency of the smaller grid.
    let pos = small.div_ceil(2);
    let neg = (small - 1) / 2;
    out[..pos].copy_from_slice(&spec[..pos]);
    for k in 1..=neg {
        out[target - k] = spec[m - k];
    }
    if small % 2 == 0 {
        let h = small / 2;
        if target > m {
            let half = spec[h] * 0.5;
            out[h] = half;
            out[target - h] = half;
        } else {
            out[h] = spec[h] + spec[m - h];
        }
    }
    planner.plan_fft_inverse(target).process(&mut out);
    let scale = 1.0 / m as f64;
    Ok(out.iter().map(|c| c.re * scale).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::Provenance;

    fn entry(eps: f64, v: f64, n: usize) -> DatasetEntry {
        DatasetEntry {
            eps,
            rho: vec![v; n],
            u: vec![v; n],
            temperature: vec![v; n],
            q: vec![0.0; n],
            provenance: Provenance::default(),
        }
    }

    #[test]
    fn standardization_examples() {
        let a = entry(0.0, 0.0, 8);
        let b = entry(2.0, 2.0, 8);
        let stats = fit_standardization(&[&a, &b]).unwrap();
        assert_eq!(stats.mean, [1.0; 4]);
        assert_eq!(stats.std, [1.0; 4]);
        let mut s = assemble_input(a.eps, &a.rho, &a.u, &a.temperature).unwrap();
        standardize(&mut s, &stats).unwrap();
        assert!(s.data.iter().all(|&x| x == -1.0));
        assert!(fit_standardization(&[&a]).is_err());
        assert!(fit_standardization(&[]).is_err());
    }

    #[test]
    fn standardized_dataset_has_unit_moments() {
        let n = 64;
        let make = |eps: f64, k: f64| DatasetEntry {
            eps,
            rho: (0..n).map(|i| 1.0 + 0.3 * (k * i as f64).sin()).collect(),
            u: (0..n).map(|i| 0.1 * (k * i as f64).cos()).collect(),
            temperature: (0..n).map(|i| 0.5 + 0.2 * (0.3 * k * i as f64).sin()).collect(),
            q: vec![0.0; n],
            provenance: Provenance::default(),
        };
        let es = [make(0.1, 0.3), make(0.7, 0.5), make(0.3, 1.1)];
        let refs: Vec<&DatasetEntry> = es.iter().collect();
        let stats = fit_standardization(&refs).unwrap();
        for c in 0..4 {
            let mut all = Vec::new();
            for e in &es {
                let mut s = assemble_input(e.eps, &e.rho, &e.u, &e.temperature).unwrap();
                standardize(&mut s, &stats).unwrap();
                all.extend_from_slice(s.channel(c));
            }
            let mean = all.iter().sum::<f64>() / all.len() as f64;
            let var = all.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / all.len() as f64;
            assert!(mean.abs() < 1e-12 && (var - 1.0).abs() < 1e-12, "channel {c}");
        }
    }

    #[test]
    fn qns_scale_examples() {
        let n = 16;
        assert_eq!(compute_qns_scale(1.0, &vec![1.0; n], &vec![2.0; n], 0.1), 0.0);
        let dx = 0.1;
        let t: Vec<f64> = (0..n).map(|i| i as f64 * dx).collect();
        // the wrap-around cells have a large negative slope; use an interior check
        let d = centered_derivative(&t, dx);
        assert!((1.5 * d[5] - 1.5).abs() < 1e-12);
        let t: Vec<f64> = (0..n).map(|i| (i as f64 * 2.0 * PI / n as f64).sin()).collect();
        let a = compute_qns_scale(0.2, &vec![1.0; n], &t, 2.0 * PI / n as f64);
        let b = compute_qns_scale(0.4, &vec![1.0; n], &t, 2.0 * PI / n as f64);
        assert!((2.0 * a - b).abs() < 1e-15);
    }

    #[test]
    fn ns_normalization_examples() {
        let q = vec![0.1, -0.3, 0.25];
        let n = ns_normalize(&q, 0.05, 0.1);
        assert_eq!(n, vec![0.2, -0.6, 0.5]);
        assert_eq!(ns_denormalize(&n, 0.05, 0.1), q);
        assert_eq!(ns_normalize(&q, 0.5, 0.1), q);
        assert_eq!(ns_denormalize(&q, 0.5, 0.1), q);
        assert_eq!(ns_normalize(&q, 0.0, 0.1), q);
    }

    fn coverage_oracle(ws: &WindowSet) -> Vec<usize> {
        // independent count: a point is covered by a window if its offset
        // from the window start, modulo M, lies in the useful range
        let m = ws.source_len;
        (0..m)
            .map(|p| {
                ws.starts
                    .iter()
                    .map(|&s| {
                        let mut hits = 0;
                        for k in ws.margin_points..ws.margin_points + ws.useful_len {
                            if (s + k) % m == p {
                                hits += 1;
                            }
                        }
                        hits
                    })
                    .sum()
            })
            .collect()
    }

    #[test]
    fn prediction_slicing_layout() {
        let cfg = PipelineConfig::default();
        let ws = WindowSet::layout(1024, &cfg).unwrap();
        assert_eq!((ws.margin_points, ws.useful_len, ws.stride, ws.len()), (51, 410, 205, 5));
        assert!(coverage_oracle(&ws).iter().all(|&c| c >= 2));
        assert_eq!(ws.coverage(), coverage_oracle(&ws));

        let cfg3 = PipelineConfig { redundancy: 3, ..cfg };
        let ws = WindowSet::layout(1024, &cfg3).unwrap();
        assert_eq!((ws.stride, ws.len()), (136, 8));
        assert!(coverage_oracle(&ws).iter().all(|&c| c >= 3));

        let nomargin = PipelineConfig { margin_fraction: 0.0, ..cfg };
        let ws = WindowSet::layout(512, &nomargin).unwrap();
        assert_eq!(ws.len(), 2);
        assert_eq!(ws.starts, vec![0, 256]);
    }

    #[test]
    fn constant_predictions_reconstruct_exactly() {
        let cfg = PipelineConfig::default();
        let ws = WindowSet::layout(1024, &cfg).unwrap();
        let preds = vec![vec![1.0; 512]; ws.len()];
        let r = reconstruct(&ws, &preds).unwrap();
        assert!(r.iter().all(|v| (v - 1.0).abs() < 1e-12));
    }

    #[test]
    fn two_shifted_kernels_sum_to_one() {
        let u = 400;
        for k in 0..u / 2 {
            let s = reconstruction_weight(k, u, 2) + reconstruction_weight(k + u / 2, u, 2);
            assert!((s - 1.0).abs() < 1e-14);
        }
    }

    #[test]
    fn slice_reconstruct_round_trip() {
        for r in [2, 3, 4] {
            for m in [410, 700, 1024, 1500] {
                let cfg = PipelineConfig { redundancy: r, ..Default::default() };
                let x: Vec<f64> = (0..m).map(|i| (0.37 * i as f64).sin() + 0.01 * i as f64).collect();
                let sig = Signal::from_channels(&[&x]).unwrap();
                let ws = slice_predict(&sig, &cfg).unwrap();
                let preds: Vec<Vec<f64>> = ws.windows.iter().map(|w| w.channel(0).to_vec()).collect();
                let back = reconstruct(&ws, &preds).unwrap();
                for i in 0..m {
                    assert!((back[i] - x[i]).abs() < 1e-10, "r={r} m={m} i={i}");
                }
            }
        }
    }

    #[test]
    fn training_slices() {
        let cfg = PipelineConfig::default();
        let n = 1024;
        let x: Vec<f64> = (0..n).map(|i| i as f64).collect();
        let sig = Signal::from_channels(&[&x, &x, &x, &x]).unwrap();
        let lab: Vec<f64> = x.iter().map(|v| -v).collect();
        let slices = slice_train(&sig, &lab, &cfg).unwrap();
        assert_eq!(slices.len(), 8);
        for (w, (inp, l)) in slices.iter().enumerate() {
            assert_eq!(inp.channel(0)[0], (128 * w) as f64);
            for k in 0..512 {
                assert_eq!(inp.channel(2)[k], -l[k]);
            }
        }
        assert_eq!(slices[7].0.channel(0)[511], ((7 * 128 + 511) % 1024) as f64);
        let one = PipelineConfig { training_windows_per_entry: 1, ..cfg };
        assert_eq!(slice_train(&sig, &lab, &one).unwrap()[0].0.channel(0)[0], 0.0);
        let bad = PipelineConfig { training_windows_per_entry: 3, ..cfg };
        assert!(slice_train(&sig, &lab, &bad).is_err());
    }

    fn dense_gauss(q: &[f64], sigma: f64, dx: f64) -> Vec<f64> {
        let n = q.len();
        let half = (3.0 * sigma / dx).floor() as isize;
        let w = |t: f64| (-t * t / (2.0 * sigma * sigma)).exp();
        let total: f64 = (-half..=half).map(|k| w(k as f64 * dx)).sum();
        (0..n as isize)
            .map(|i| {
                (-half..=half)
                    .map(|k| w(k as f64 * dx) * q[(i + k).rem_euclid(n as isize) as usize])
                    .sum::<f64>()
                    / total
            })
            .collect()
    }

    #[test]
    fn gaussian_smoothing_examples() {
        let n = 512;
        let dx = 2.0 * PI / n as f64;
        assert_eq!(gaussian_smooth(&vec![0.7; n], 0.06, dx).iter().all(|v| (v - 0.7).abs() < 1e-15), true);
        let x: Vec<f64> = (0..n).map(|i| (4.0 * i as f64 * dx).sin()).collect();
        assert_eq!(gaussian_smooth(&x, 0.0, dx), x);
        let s = gaussian_smooth(&x, 0.06, dx);
        let oracle = dense_gauss(&x, 0.06, dx);
        for i in 0..n {
            assert!((s[i] - oracle[i]).abs() < 1e-14);
        }
        let ratio = s.iter().zip(&x).map(|(a, b)| a * b).sum::<f64>() / x.iter().map(|b| b * b).sum::<f64>();
        let expected = (-16.0f64 * 0.06 * 0.06 / 2.0).exp();
        assert!((ratio / expected - 1.0).abs() < 0.02, "{ratio} vs {expected}");
    }

    #[test]
    fn wide_kernel_wraps() {
        let x: Vec<f64> = (0..8).map(|i| i as f64).collect();
        let s = gaussian_smooth(&x, 10.0, 1.0);
        let mean = x.iter().sum::<f64>() / 8.0;
        assert!((s.iter().sum::<f64>() / 8.0 - mean).abs() < 1e-12);
    }

    #[test]
    fn fourier_resample_examples() {
        assert!(fourier_resample(&[1.0, 2.0], 1).is_err());
        let c = fourier_resample(&[0.3; 7], 12).unwrap();
        assert!(c.iter().all(|v| (v - 0.3).abs() < 1e-14));
        let x: Vec<f64> = (0..9).map(|i| (i as f64).sqrt()).collect();
        assert_eq!(fourier_resample(&x, 9).unwrap(), x);

        let f = |n: usize| -> Vec<f64> { (0..n).map(|i| (3.0 * 2.0 * PI * i as f64 / n as f64).sin()).collect() };
        let up = fourier_resample(&f(512), 1024).unwrap();
        for (a, b) in up.iter().zip(f(1024)) {
            assert!((a - b).abs() < 1e-10);
        }
        let down = fourier_resample(&f(1024), 512).unwrap();
        for (a, b) in down.iter().zip(f(512)) {
            assert!((a - b).abs() < 1e-10);
        }
    }

    #[test]
    fn fourier_up_down_identity() {
        for m in [8usize, 9, 64, 101] {
            let x: Vec<f64> = (0..m).map(|i| ((i * i) % 7) as f64 - 3.0).collect();
            for t in [2 * m, 3 * m + 1] {
                let back = fourier_resample(&fourier_resample(&x, t).unwrap(), m).unwrap();
                for i in 0..m {
                    assert!((back[i] - x[i]).abs() < 1e-10, "m={m} t={t}");
                }
            }
        }
    }
}
