//! Cyclic Jacobi eigensolver for small symmetric matrices.
//!
//! The limit-law covariance matrices carry eigenvalues spanning eight orders
//! of magnitude (the smallest behaves like t²/12 as t → 0 while the largest
//! stays near 2). QR-type solvers guarantee only *absolute* accuracy
//! `O(ε‖A‖)`, which destroys the relative accuracy of the tiny eigenvalues;
//! two-sided Jacobi rotations are known to compute the eigenvalues of
//! positive-definite matrices to high *relative* accuracy, which the
//! closed-form cross-checks require (1e-10 relative down to t = 1e-3).
//! Matrices here are at most 2nr ≤ 30 rows, so the O(k³) sweeps are free.

use nalgebra::DMatrix;

/// Eigenvalues of a symmetric matrix by the cyclic Jacobi method,
/// returned in ascending order. Only the lower triangle is read.
pub fn jacobi_eigenvalues(a: &DMatrix<f64>) -> Vec<f64> {
    assert_eq!(a.nrows(), a.ncols(), "matrix must be square");
    let k = a.nrows();
    let mut m = a.clone_owned();
    for sweep in 0..60 {
        let mut off = 0.0f64;
        for p in 0..k {
            for q in (p + 1)..k {
                off += m[(p, q)] * m[(p, q)];
            }
        }
        let scale: f64 = m.diagonal().iter().map(|d| d * d).sum::<f64>() + off;
        if off <= f64::EPSILON * f64::EPSILON * scale || off == 0.0 {
            break;
        }
        debug_assert!(sweep < 59, "jacobi failed to converge");
        for p in 0..k {
            for q in (p + 1)..k {
                let apq = m[(p, q)];
                if apq == 0.0 {
                    continue;
                }
                // Rotation angle from tan(2θ) = 2 a_pq / (a_qq - a_pp),
                // using the stable one-parameter form.
                let theta = (m[(q, q)] - m[(p, p)]) / (2.0 * apq);
                let t = if theta >= 0.0 {
                    1.0 / (theta + (1.0 + theta * theta).sqrt())
                } else {
                    -1.0 / (-theta + (1.0 + theta * theta).sqrt())
                };
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = t * c;
                let tau = s / (1.0 + c);
                let app = m[(p, p)];
                let aqq = m[(q, q)];
                m[(p, p)] = app - t * apq;
                m[(q, q)] = aqq + t * apq;
                m[(p, q)] = 0.0;
                m[(q, p)] = 0.0;
                for i in 0..k {
                    if i != p && i != q {
                        let aip = m[(i, p)];
                        let aiq = m[(i, q)];
                        m[(i, p)] = aip - s * (aiq + tau * aip);
                        m[(i, q)] = aiq + s * (aip - tau * aiq);
                        m[(p, i)] = m[(i, p)];
                        m[(q, i)] = m[(i, q)];
                    }
                }
            }
        }
    }
    let mut eig: Vec<f64> = m.diagonal().iter().copied().collect();
    eig.sort_by(|a, b| a.partial_cmp(b).unwrap());
    eig
}
