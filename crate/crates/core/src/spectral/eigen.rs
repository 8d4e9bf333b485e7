//! Cyclic Jacobi eigendecomposition for real symmetric matrices.
//!
//! Rotations annihilate one off-diagonal pair at a time, sweeping the upper
//! triangle until the off-diagonal mass is at round-off level. Fine for the
//! desk-scale matrices this crate works with (hundreds of nodes), and
//! accurate to machine precision, which downstream spectrum comparisons rely
//! on.

use crate::mat::Mat;

use super::SpectralError;

const MAX_SWEEPS: usize = 100;

/// Eigenvalues (unsorted) and orthonormal eigenvector columns of a symmetric
/// matrix. The caller is responsible for symmetry validation.
pub(super) fn symmetric_eigen(a: &Mat) -> Result<(Vec<f64>, Mat), SpectralError> {
    let n = a.rows();
    debug_assert_eq!(n, a.cols());
    let mut m = a.clone();
    let mut v = Mat::identity(n);
    if n < 2 {
        return Ok(((0..n).map(|i| m[(i, i)]).collect(), v));
    }

    let scale = a.frobenius_norm().max(f64::MIN_POSITIVE);
    let tol = (f64::EPSILON * scale).powi(2);

    for _ in 0..MAX_SWEEPS {
        let mut off = 0.0;
        for p in 0..n {
            for q in p + 1..n {
                off += m[(p, q)] * m[(p, q)];
            }
        }
        if off <= tol {
            let eigenvalues = (0..n).map(|i| m[(i, i)]).collect();
            return Ok((eigenvalues, v));
        }

        for p in 0..n - 1 {
            for q in p + 1..n {
                let apq = m[(p, q)];
                if apq == 0.0 {
                    continue;
                }
                let theta = (m[(q, q)] - m[(p, p)]) / (2.0 * apq);
                // For very large theta, t = 1/(2θ) avoids overflow in θ².
                let t = if theta.abs() > 1e20 {
                    1.0 / (2.0 * theta)
                } else {
                    theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt())
                };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                let tau = s / (1.0 + c);

                let app = m[(p, p)];
                let aqq = m[(q, q)];
                m[(p, p)] = app - t * apq;
                m[(q, q)] = aqq + t * apq;
                m[(p, q)] = 0.0;
                m[(q, p)] = 0.0;
                for r in 0..n {
                    if r != p && r != q {
                        let arp = m[(r, p)];
                        let arq = m[(r, q)];
                        m[(r, p)] = arp - s * (arq + tau * arp);
                        m[(p, r)] = m[(r, p)];
                        m[(r, q)] = arq + s * (arp - tau * arq);
                        m[(q, r)] = m[(r, q)];
                    }
                }
                for r in 0..n {
                    let vrp = v[(r, p)];
                    let vrq = v[(r, q)];
                    v[(r, p)] = vrp - s * (vrq + tau * vrp);
                    v[(r, q)] = vrq + s * (vrp - tau * vrq);
                }
            }
        }
    }
    Err(SpectralError::NoConvergence(MAX_SWEEPS))
}
