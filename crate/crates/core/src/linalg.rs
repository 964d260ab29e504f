//! Small dense linear-algebra helpers for verification paths.
//!
//! Solvers never touch these on the hot path; they exist so reference
//! Hessians and test oracles can be checked exactly at small dimension.

use crate::error::{Result, ZoError};
use ndarray::{Array1, Array2, ArrayView1, ArrayView2};

/// Eigenvalues of a symmetric matrix, ascending, by cyclic Jacobi rotations.
///
/// Intended for verification at small dimension; rejects `d > 512` so it can
/// never sneak into a large-scale code path.
pub fn symmetric_eigenvalues(a: &ArrayView2<'_, f64>) -> Result<Vec<f64>> {
    let d = a.nrows();
    if a.ncols() != d {
        return Err(ZoError::contract("symmetric_eigenvalues: matrix not square"));
    }
    if d > 512 {
        return Err(ZoError::NotAvailable(
            "dense eigenvalues limited to d <= 512".into(),
        ));
    }
    for i in 0..d {
        for j in (i + 1)..d {
            if (a[[i, j]] - a[[j, i]]).abs() > 1e-10 * (1.0 + a[[i, j]].abs()) {
                return Err(ZoError::contract(
                    "symmetric_eigenvalues: matrix not symmetric",
                ));
            }
        }
    }
    let mut m = a.to_owned();
    let scale: f64 = m.iter().map(|v| v * v).sum::<f64>().sqrt().max(1e-300);
    for _sweep in 0..100 {
        let mut off = 0.0;
        for i in 0..d {
            for j in (i + 1)..d {
                off += 2.0 * m[[i, j]] * m[[i, j]];
            }
        }
        if off.sqrt() <= 1e-14 * scale {
            break;
        }
        for p in 0..d {
            for q in (p + 1)..d {
                let apq = m[[p, q]];
                if apq.abs() <= 1e-300 {
                    continue;
                }
                let theta = (m[[q, q]] - m[[p, p]]) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..d {
                    let mkp = m[[k, p]];
                    let mkq = m[[k, q]];
                    m[[k, p]] = c * mkp - s * mkq;
                    m[[k, q]] = s * mkp + c * mkq;
                }
                for k in 0..d {
                    let mpk = m[[p, k]];
                    let mqk = m[[q, k]];
                    m[[p, k]] = c * mpk - s * mqk;
                    m[[q, k]] = s * mpk + c * mqk;
                }
            }
        }
    }
    let mut eigs: Vec<f64> = (0..d).map(|i| m[[i, i]]).collect();
    eigs.sort_by(|x, y| x.partial_cmp(y).unwrap());
    Ok(eigs)
}

/// Spectral norm (largest absolute eigenvalue) of a symmetric matrix.
pub fn symmetric_operator_norm(a: &ArrayView2<'_, f64>) -> Result<f64> {
    let eigs = symmetric_eigenvalues(a)?;
    Ok(eigs
        .iter()
        .fold(0.0f64, |acc, v| acc.max(v.abs())))
}

/// Solves `A x = b` for symmetric positive definite `A` by Cholesky.
/// Returns `None` when `A` is not positive definite.
pub fn cholesky_solve(a: &ArrayView2<'_, f64>, b: &ArrayView1<'_, f64>) -> Option<Array1<f64>> {
    let d = a.nrows();
    if a.ncols() != d || b.len() != d {
        return None;
    }
    // Lower-triangular factor, column by column.
    let mut l = Array2::<f64>::zeros((d, d));
    for j in 0..d {
        let mut diag = a[[j, j]];
        for k in 0..j {
            diag -= l[[j, k]] * l[[j, k]];
        }
        if diag <= 0.0 || !diag.is_finite() {
            return None;
        }
        l[[j, j]] = diag.sqrt();
        for i in (j + 1)..d {
            let mut v = a[[i, j]];
            for k in 0..j {
                v -= l[[i, k]] * l[[j, k]];
            }
            l[[i, j]] = v / l[[j, j]];
        }
    }
    // Forward then backward substitution.
    let mut y = Array1::<f64>::zeros(d);
    for i in 0..d {
        let mut v = b[i];
        for k in 0..i {
            v -= l[[i, k]] * y[k];
        }
        y[i] = v / l[[i, i]];
    }
    let mut x = Array1::<f64>::zeros(d);
    for i in (0..d).rev() {
        let mut v = y[i];
        for k in (i + 1)..d {
            v -= l[[k, i]] * x[k];
        }
        x[i] = v / l[[i, i]];
    }
    Some(x)
}
