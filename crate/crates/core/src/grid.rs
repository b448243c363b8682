//! Uniform periodic spatial grid and the (x, v) phase-space grid built on it.

use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::{Error, Result};

/// Periodic 1D grid of `nx` cells on `[0, length)`, with `x_i = i * dx`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpaceGrid {
    pub nx: usize,
    pub length: f64,
}

impl SpaceGrid {
    pub fn new(nx: usize, length: f64) -> Result<Self> {
        if nx < 4 {
            return Err(Error::Config(format!("need at least 4 cells, got {nx}")));
        }
        if !(length > 0.0 && length.is_finite()) {
            return Err(Error::Config(format!("domain length must be positive, got {length}")));
        }
        Ok(SpaceGrid { nx, length })
    }

    /// Grid on the standard `[0, 2π)` domain.
    pub fn periodic_2pi(nx: usize) -> Result<Self> {
        Self::new(nx, 2.0 * PI)
    }

    #[inline]
    pub fn dx(&self) -> f64 {
        self.length / self.nx as f64
    }

    #[inline]
    pub fn x(&self, i: usize) -> f64 {
        i as f64 * self.dx()
    }

    pub fn points(&self) -> Vec<f64> {
        (0..self.nx).map(|i| self.x(i)).collect()
    }

    /// Samples `f` at every grid point.
    pub fn sample(&self, f: impl Fn(f64) -> f64) -> Vec<f64> {
        (0..self.nx).map(|i| f(self.x(i))).collect()
    }
}

/// Phase-space grid: periodic space times the truncated velocity interval
/// `[-vmax, vmax]` sampled at `nv` points (odd, so `v = 0` is a node).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhaseGrid {
    pub space: SpaceGrid,
    pub nv: usize,
    pub vmax: f64,
}

impl PhaseGrid {
    pub fn new(nx: usize, length: f64, nv: usize, vmax: f64) -> Result<Self> {
        let space = SpaceGrid::new(nx, length)?;
        if nv < 3 || nv % 2 == 0 {
            return Err(Error::Config(format!(
                "velocity points must be odd and >= 3, got {nv}"
            )));
        }
        if !(vmax > 0.0 && vmax.is_finite()) {
            return Err(Error::Config(format!("vmax must be positive, got {vmax}")));
        }
        Ok(PhaseGrid { space, nv, vmax })
    }

    #[inline]
    pub fn nx(&self) -> usize {
        self.space.nx
    }

    #[inline]
    pub fn dx(&self) -> f64 {
        self.space.dx()
    }

    #[inline]
    pub fn dv(&self) -> f64 {
        2.0 * self.vmax / (self.nv - 1) as f64
    }

    #[inline]
    pub fn v(&self, j: usize) -> f64 {
        -self.vmax + j as f64 * self.dv()
    }

    pub fn velocities(&self) -> Vec<f64> {
        (0..self.nv).map(|j| self.v(j)).collect()
    }

    /// Number of phase-space cells, `nx * nv`.
    #[inline]
    pub fn len(&self) -> usize {
        self.space.nx * self.nv
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}
