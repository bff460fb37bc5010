//! Linear solvers: matrix-free preconditioned CG and small dense helpers.

use nalgebra::{DMatrix, DVector};

use crate::par;
use crate::{Error, Result};

/// Outcome of a CG solve.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CgInfo {
    pub iterations: usize,
    pub relative_residual: f64,
}

/// Jacobi-preconditioned conjugate gradients for an SPD operator.
///
/// `apply(x, out)` writes `A x`. Starts from the contents of `x`. Stops when
/// ‖r‖ ≤ tol·‖b‖.
pub fn cg<F>(apply: F, diag: &[f64], b: &[f64], x: &mut [f64], tol: f64, max_iter: usize) -> Result<CgInfo>
where
    F: Fn(&[f64], &mut [f64]),
{
    let n = b.len();
    let bnorm = par::dot(b, b).sqrt();
    if bnorm == 0.0 {
        x.iter_mut().for_each(|v| *v = 0.0);
        return Ok(CgInfo { iterations: 0, relative_residual: 0.0 });
    }
    let mut ax = vec![0.0; n];
    apply(x, &mut ax);
    let mut r: Vec<f64> = par::map_range(n, |i| b[i] - ax[i]);
    let mut z: Vec<f64> = par::map_range(n, |i| r[i] / diag[i]);
    let mut p = z.clone();
    let mut rz = par::dot(&r, &z);
    let mut ap = vec![0.0; n];
    for it in 0..=max_iter {
        let rnorm = par::dot(&r, &r).sqrt();
        if rnorm <= tol * bnorm {
            return Ok(CgInfo { iterations: it, relative_residual: rnorm / bnorm });
        }
        if it == max_iter {
            break;
        }
        apply(&p, &mut ap);
        let pap = par::dot(&p, &ap);
        if !(pap > 0.0) {
            return Err(Error::Step(format!("CG breakdown: pᵀAp = {pap}")));
        }
        let alpha = rz / pap;
        for i in 0..n {
            x[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
        }
        par::fill(&mut z, |i| r[i] / diag[i]);
        let rz_new = par::dot(&r, &z);
        let beta = rz_new / rz;
        rz = rz_new;
        for i in 0..n {
            p[i] = z[i] + beta * p[i];
        }
    }
    let rnorm = par::dot(&r, &r).sqrt();
    Err(Error::Step(format!("CG did not converge in {max_iter} iterations (relative residual {:.3e})", rnorm / bnorm)))
}

/// Solves a dense system by LU with partial pivoting.
pub fn solve_dense(a: &DMatrix<f64>, b: &DVector<f64>) -> Result<DVector<f64>> {
    let scale = a.amax();
    if scale == 0.0 {
        return Err(Error::Step("system matrix is zero".into()));
    }
    let lu = a.clone().lu();
    let u = lu.u();
    let min_pivot = u.diagonal().iter().map(|d| d.abs()).fold(f64::INFINITY, f64::min);
    if min_pivot <= 1e-14 * scale {
        return Err(Error::Step(format!("singular system (pivot ratio {:.3e})", min_pivot / scale)));
    }
    lu.solve(b).ok_or_else(|| Error::Step("singular system".into()))
}

/// Smallest eigenvalue of a symmetric matrix.
pub fn min_eigenvalue(a: &DMatrix<f64>) -> f64 {
    a.clone().symmetric_eigen().eigenvalues.iter().copied().fold(f64::INFINITY, f64::min)
}

/// max |a_ij − a_ji| / max |a_ij|.
pub fn asymmetry(a: &DMatrix<f64>) -> f64 {
    let scale = a.amax();
    if scale == 0.0 {
        return 0.0;
    }
    (a - a.transpose()).amax() / scale
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cg_solves_tridiagonal() {
        let n = 50;
        let apply = |x: &[f64], out: &mut [f64]| {
            for i in 0..n {
                let mut s = 3.0 * x[i];
                if i > 0 {
                    s -= x[i - 1];
                }
                if i + 1 < n {
                    s -= x[i + 1];
                }
                out[i] = s;
            }
        };
        let truth: Vec<f64> = (0..n).map(|i| (i as f64 * 0.3).sin()).collect();
        let mut b = vec![0.0; n];
        apply(&truth, &mut b);
        let mut x = vec![0.0; n];
        let info = cg(apply, &vec![3.0; n], &b, &mut x, 1e-13, 200).unwrap();
        assert!(info.relative_residual <= 1e-13);
        assert!(x.iter().zip(&truth).all(|(a, b)| (a - b).abs() < 1e-11));
    }

    #[test]
    fn dense_detects_singular() {
        let a = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 4.0]);
        assert!(solve_dense(&a, &DVector::from_vec(vec![1.0, 1.0])).is_err());
        let b = DMatrix::from_row_slice(2, 2, &[2.0, 1.0, 1.0, 3.0]);
        let x = solve_dense(&b, &DVector::from_vec(vec![3.0, 4.0])).unwrap();
        assert!((x[0] - 1.0).abs() < 1e-15 && (x[1] - 1.0).abs() < 1e-15);
        assert!((min_eigenvalue(&b) - (2.5 - 1.25f64.sqrt())).abs() < 1e-14);
    }
}
