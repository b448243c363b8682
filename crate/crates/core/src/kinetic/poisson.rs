//! Periodic Poisson solve for the self-consistent electric field.

use serde::{Deserialize, Serialize};

use crate::grid::SpaceGrid;
use crate::linalg::solve_tridiagonal;
use crate::{Error, Result};

/// Sign convention of the Poisson equation.
///
/// `Plasma` solves `d2phi/dx2 = rho - mean(rho)` with `E = -dphi/dx`: the field
/// pushes electrons (acceleration `-E`) away from density peaks and produces
/// plasma oscillations with Landau damping. `Reversed` solves
/// `-d2phi/dx2 = rho - mean(rho)`, which turns the force attractive; it is kept
/// for sensitivity checks.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PoissonSign {
    #[default]
    Plasma,
    Reversed,
}

impl PoissonSign {
    fn factor(self) -> f64 {
        match self {
            PoissonSign::Plasma => 1.0,
            PoissonSign::Reversed => -1.0,
        }
    }
}

/// Electric field and potential on the spatial grid.
#[derive(Debug, Clone, PartialEq)]
pub struct ElectricField {
    pub e: Vec<f64>,
    pub phi: Vec<f64>,
}

impl ElectricField {
    pub fn zeros(nx: usize) -> Self {
        ElectricField { e: vec![0.0; nx], phi: vec![0.0; nx] }
    }

    pub fn max_abs(&self) -> f64 {
        self.e.iter().fold(0.0f64, |m, e| m.max(e.abs()))
    }
}

/// Second-order periodic finite differences with the zero-mean gauge for the
/// potential and a centered difference for the field.
pub fn solve_poisson(rho: &[f64], grid: &SpaceGrid, sign: PoissonSign) -> Result<ElectricField> {
    let n = grid.nx;
    if rho.len() != n {
        return Err(Error::Shape(format!("density has length {}, grid has {n}", rho.len())));
    }
    let dx = grid.dx();
    let mean = rho.iter().sum::<f64>() / n as f64;
    let s = sign.factor();
    if rho.iter().all(|&r| r == rho[0]) {
        return Ok(ElectricField::zeros(n));
    }
    let rhs: Vec<f64> = rho.iter().map(|r| s * dx * dx * (r - mean)).collect();

    // Pin phi_0 = 0 and solve rows 1..n-1 (row 0 is implied by the zero-sum
    // right-hand side), then shift to zero mean.
    let m = n - 1;
    let a = vec![1.0; m];
    let b = vec![-2.0; m];
    let c = vec![1.0; m];
    let inner = solve_tridiagonal(&a, &b, &c, &rhs[1..])?;
    let mut phi = Vec::with_capacity(n);
    phi.push(0.0);
    phi.extend(inner);
    let shift = phi.iter().sum::<f64>() / n as f64;
    phi.iter_mut().for_each(|p| *p -= shift);

    let e = (0..n)
        .map(|i| -(phi[(i + 1) % n] - phi[(i + n - 1) % n]) / (2.0 * dx))
        .collect();
    Ok(ElectricField { e, phi })
}
