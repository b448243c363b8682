//! Tridiagonal solvers (plain and periodic).

use crate::{Error, Result};

/// Solves `a[i] x[i-1] + b[i] x[i] + c[i] x[i+1] = d[i]` (Thomas algorithm).
///
/// `a[0]` and `c[n-1]` are ignored.
pub fn solve_tridiagonal(a: &[f64], b: &[f64], c: &[f64], d: &[f64]) -> Result<Vec<f64>> {
    let n = b.len();
    if a.len() != n || c.len() != n || d.len() != n {
        return Err(Error::Shape("tridiagonal diagonals must share one length".into()));
    }
    if n == 0 {
        return Ok(Vec::new());
    }
    let mut cp = vec![0.0; n];
    let mut dp = vec![0.0; n];
    let mut denom = b[0];
    if denom == 0.0 || !denom.is_finite() {
        return Err(Error::LinearSolve("zero pivot at row 0".into()));
    }
    cp[0] = c[0] / denom;
    dp[0] = d[0] / denom;
    for i in 1..n {
        denom = b[i] - a[i] * cp[i - 1];
        if denom == 0.0 || !denom.is_finite() {
            return Err(Error::LinearSolve(format!("zero pivot at row {i}")));
        }
        cp[i] = c[i] / denom;
        dp[i] = (d[i] - a[i] * dp[i - 1]) / denom;
    }
    let mut x = dp;
    for i in (0..n - 1).rev() {
        x[i] -= cp[i] * x[i + 1];
    }
    Ok(x)
}

/// Solves the periodic tridiagonal system where row 0 couples to `x[n-1]`
/// through `a[0]` and row `n-1` couples to `x[0]` through `c[n-1]`
/// (Sherman-Morrison correction of a Thomas solve).
pub fn solve_cyclic_tridiagonal(a: &[f64], b: &[f64], c: &[f64], d: &[f64]) -> Result<Vec<f64>> {
    let n = b.len();
    if a.len() != n || c.len() != n || d.len() != n {
        return Err(Error::Shape("tridiagonal diagonals must share one length".into()));
    }
    if n < 3 {
        return Err(Error::Shape(format!("cyclic system needs n >= 3, got {n}")));
    }
    let alpha = c[n - 1];
    let beta = a[0];
    let gamma = -b[0];
    let mut bb = b.to_vec();
    bb[0] = b[0] - gamma;
    bb[n - 1] = b[n - 1] - alpha * beta / gamma;

    let x = solve_tridiagonal(a, &bb, c, d)?;
    let mut rhs = vec![0.0; n];
    rhs[0] = gamma;
    rhs[n - 1] = alpha;
    let z = solve_tridiagonal(a, &bb, c, &rhs)?;

    let denom = 1.0 + z[0] + beta * z[n - 1] / gamma;
    if denom == 0.0 || !denom.is_finite() {
        return Err(Error::LinearSolve("singular periodic system".into()));
    }
    let fact = (x[0] + beta * x[n - 1] / gamma) / denom;
    Ok(x.iter().zip(&z).map(|(xi, zi)| xi - fact * zi).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dense_cyclic(a: &[f64], b: &[f64], c: &[f64]) -> Vec<Vec<f64>> {
        let n = b.len();
        let mut m = vec![vec![0.0; n]; n];
        for i in 0..n {
            m[i][i] = b[i];
            m[i][(i + n - 1) % n] += a[i];
            m[i][(i + 1) % n] += c[i];
        }
        m
    }

    #[test]
    fn cyclic_matches_dense_product() {
        let n = 9;
        let a: Vec<f64> = (0..n).map(|i| -0.3 - 0.01 * i as f64).collect();
        let c: Vec<f64> = (0..n).map(|i| -0.2 + 0.02 * i as f64).collect();
        let b: Vec<f64> = (0..n).map(|i| 2.0 + 0.1 * i as f64).collect();
        let d: Vec<f64> = (0..n).map(|i| (i as f64 * 0.7).sin()).collect();
        let x = solve_cyclic_tridiagonal(&a, &b, &c, &d).unwrap();
        let m = dense_cyclic(&a, &b, &c);
        for i in 0..n {
            let r: f64 = (0..n).map(|j| m[i][j] * x[j]).sum();
            assert!((r - d[i]).abs() < 1e-13, "row {i}: {r} vs {}", d[i]);
        }
    }

    #[test]
    fn thomas_solves_identity() {
        let x = solve_tridiagonal(&[0.0; 4], &[1.0; 4], &[0.0; 4], &[1.0, 2.0, 3.0, 4.0]).unwrap();
        assert_eq!(x, vec![1.0, 2.0, 3.0, 4.0]);
    }

    #[test]
    fn zero_pivot_is_an_error() {
        assert!(solve_tridiagonal(&[0.0; 2], &[0.0, 1.0], &[0.0; 2], &[1.0, 1.0]).is_err());
    }
}
