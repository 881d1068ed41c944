//! Non-negative least squares by the Lawson-Hanson active-set method.
//!
//! Solves `min |A x - b|` subject to `x >= 0`. The passive set is grown one
//! column at a time by the most positive gradient entry; an inner loop backs
//! off along the segment to the previous iterate whenever the unconstrained
//! solution on the passive set leaves the nonnegative orthant. Ties in the
//! gradient are broken by lowest column index so runs are deterministic.

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum NnlsError {
    /// The active-set loop failed to converge within the iteration cap.
    #[error("nnls failed to converge within {cap} iterations (m = {ncols} columns)")]
    IterationCap { cap: usize, ncols: usize },
}

/// Iteration cap multiplier: the classic bound of a few times the column
/// count, made generous because ill-conditioned desk inputs are allowed.
const CAP_PER_COLUMN: usize = 100;

/// Solution of one NNLS run.
#[derive(Debug, Clone)]
pub struct NnlsSolution {
    pub x: DVector<f64>,
    pub residual: DVector<f64>,
    pub iterations: usize,
}

/// Solves `min |A x - b|, x >= 0`.
pub fn nnls(a: &DMatrix<f64>, b: &DVector<f64>) -> Result<NnlsSolution, NnlsError> {
    let (n, m) = (a.nrows(), a.ncols());
    assert_eq!(b.len(), n, "rhs length must match row count");
    let mut x = DVector::zeros(m);
    if m == 0 {
        return Ok(NnlsSolution {
            x,
            residual: b.clone(),
            iterations: 0,
        });
    }

    let cap = CAP_PER_COLUMN * m;
    let col_scale = (0..m).map(|j| a.column(j).norm()).fold(0.0_f64, f64::max);
    let grad_tol = 1e-12 * col_scale.max(1.0) * b.norm().max(1.0);

    let mut passive = vec![false; m];
    let mut residual = b.clone();
    let mut iterations = 0;

    loop {
        // w = A^T r is the gradient of the objective decrease per column.
        let w = a.transpose() * &residual;
        let mut best: Option<(usize, f64)> = None;
        for j in 0..m {
            if !passive[j] && w[j] > grad_tol {
                if best.map_or(true, |(_, bw)| w[j] > bw) {
                    best = Some((j, w[j]));
                }
            }
        }
        let Some((enter, _)) = best else {
            break;
        };
        passive[enter] = true;

        loop {
            iterations += 1;
            if iterations > cap {
                return Err(NnlsError::IterationCap { cap, ncols: m });
            }

            let z = solve_passive(a, b, &passive);
            let feasible = passive
                .iter()
                .enumerate()
                .all(|(j, &p)| !p || z[j] > grad_tol);
            if feasible {
                x = z;
                break;
            }

            // Step from x toward z until the first passive coordinate hits 0.
            let mut alpha = 1.0_f64;
            for j in 0..m {
                if passive[j] && z[j] <= grad_tol {
                    let denom = x[j] - z[j];
                    if denom > 0.0 {
                        alpha = alpha.min(x[j] / denom);
                    } else {
                        alpha = 0.0;
                    }
                }
            }
            for j in 0..m {
                if passive[j] {
                    x[j] += alpha * (z[j] - x[j]);
                }
            }
            for j in 0..m {
                if passive[j] && x[j] <= grad_tol {
                    passive[j] = false;
                    x[j] = 0.0;
                }
            }
        }

        residual = b - a * &x;
    }

    Ok(NnlsSolution {
        x,
        residual,
        iterations,
    })
}

/// Unconstrained least squares restricted to the passive columns; inactive
/// coordinates are returned as zero.
fn solve_passive(a: &DMatrix<f64>, b: &DVector<f64>, passive: &[bool]) -> DVector<f64> {
    let idx: Vec<usize> = (0..passive.len()).filter(|&j| passive[j]).collect();
    let mut sub = DMatrix::zeros(a.nrows(), idx.len());
    for (c, &j) in idx.iter().enumerate() {
        sub.column_mut(c).copy_from(&a.column(j));
    }
    let svd = sub.svd(true, true);
    let sol = svd.solve(b, 1e-13).expect("svd solve is infallible here");
    let mut z = DVector::zeros(passive.len());
    for (c, &j) in idx.iter().enumerate() {
        z[j] = sol[c];
    }
    z
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unconstrained_optimum_inside_orthant() {
        // b is in the cone of the columns, so the fit is exact.
        let a = DMatrix::from_column_slice(2, 2, &[1.0, 0.0, 0.0, 1.0]);
        let b = DVector::from_row_slice(&[2.0, 3.0]);
        let sol = nnls(&a, &b).unwrap();
        assert!((sol.x[0] - 2.0).abs() < 1e-12);
        assert!((sol.x[1] - 3.0).abs() < 1e-12);
        assert!(sol.residual.norm() < 1e-12);
    }

    #[test]
    fn clamps_negative_coefficient() {
        // Best unconstrained fit would need a negative weight on column 0.
        let a = DMatrix::from_column_slice(2, 2, &[1.0, 0.0, 0.0, 1.0]);
        let b = DVector::from_row_slice(&[-2.0, 3.0]);
        let sol = nnls(&a, &b).unwrap();
        assert!(sol.x[0].abs() < 1e-12);
        assert!((sol.x[1] - 3.0).abs() < 1e-12);
        assert!((sol.residual.norm() - 2.0).abs() < 1e-12);
    }

    #[test]
    fn overcomplete_generators() {
        let a = DMatrix::from_column_slice(2, 3, &[1.0, 0.0, 0.0, 1.0, -1.0, 0.0]);
        let b = DVector::from_row_slice(&[-3.0, 1.0]);
        let sol = nnls(&a, &b).unwrap();
        assert!(sol.residual.norm() < 1e-12);
        assert!(sol.x.iter().all(|&c| c >= 0.0));
    }

    #[test]
    fn empty_matrix_returns_rhs_residual() {
        let a = DMatrix::zeros(3, 0);
        let b = DVector::from_row_slice(&[1.0, 2.0, 2.0]);
        let sol = nnls(&a, &b).unwrap();
        assert_eq!(sol.x.len(), 0);
        assert!((sol.residual.norm() - 3.0).abs() < 1e-12);
    }
}
