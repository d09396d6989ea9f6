//! Small dense linear algebra: the 2×2 generalized symmetric eigenproblem,
//! metric-orthonormal frames and rigid-motion fitting.

use nalgebra::{DMatrix, Matrix2, Matrix3, Vector2, Vector3};

use crate::error::{GeomError, Result};

/// Solution of `q v = λ g v` for symmetric `q` and positive definite `g`.
#[derive(Debug, Clone, Copy)]
pub struct GeneralizedEigen {
    /// `λ₊ ≥ λ₋`.
    pub values: [f64; 2],
    /// Eigenvectors normalized so that `vᵀ g v = 1`, in the order of `values`.
    pub vectors: [Vector2<f64>; 2],
}

/// Solves `det(q − λ g) = 0` by reducing to a standard symmetric problem
/// with the Cholesky factor of `g`.
pub fn generalized_symmetric_eigen(q: &Matrix2<f64>, g: &Matrix2<f64>) -> Result<GeneralizedEigen> {
    let det = g[(0, 0)] * g[(1, 1)] - g[(0, 1)] * g[(1, 0)];
    if !(g[(0, 0)] > 0.0 && det > 0.0) {
        return Err(GeomError::Precondition(format!(
            "metric matrix is not positive definite (g11 = {}, det = {det})",
            g[(0, 0)]
        )));
    }
    // g = L Lᵀ
    let l11 = g[(0, 0)].sqrt();
    let l21 = 0.5 * (g[(0, 1)] + g[(1, 0)]) / l11;
    let l22 = (g[(1, 1)] - l21 * l21).sqrt();
    let linv = Matrix2::new(1.0 / l11, 0.0, -l21 / (l11 * l22), 1.0 / l22);
    let qs = 0.5 * (q + q.transpose());
    let a = linv * qs * linv.transpose();
    let (vals, vecs) = sym2_eigen(&a);
    let lt_inv = linv.transpose();
    Ok(GeneralizedEigen {
        values: vals,
        vectors: [lt_inv * vecs[0], lt_inv * vecs[1]],
    })
}

/// Eigen-decomposition of a symmetric 2×2 matrix by one Jacobi rotation.
fn sym2_eigen(a: &Matrix2<f64>) -> ([f64; 2], [Vector2<f64>; 2]) {
    let (p, r, s) = (a[(0, 0)], a[(1, 1)], 0.5 * (a[(0, 1)] + a[(1, 0)]));
    let theta = 0.5 * (2.0 * s).atan2(p - r);
    let (sn, cs) = theta.sin_cos();
    let v1 = Vector2::new(cs, sn);
    let v2 = Vector2::new(-sn, cs);
    let l1 = p * cs * cs + 2.0 * s * cs * sn + r * sn * sn;
    let l2 = p * sn * sn - 2.0 * s * cs * sn + r * cs * cs;
    if l1 >= l2 {
        ([l1, l2], [v1, v2])
    } else {
        ([l2, l1], [v2, v1])
    }
}

/// Columns form a `g`-orthonormal basis (Gram–Schmidt on the coordinate
/// basis, so the first column is parallel to `e_1`).
pub fn orthonormal_frame(g: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let chol = g.clone().cholesky().ok_or_else(|| {
        GeomError::Precondition("metric matrix is not positive definite".into())
    })?;
    // g = L Lᵀ  ⇒  E = L⁻ᵀ satisfies Eᵀ g E = I and is upper triangular.
    let l = chol.l();
    let n = g.nrows();
    let lt = l.transpose();
    lt.try_inverse()
        .ok_or_else(|| GeomError::Precondition("singular metric".into()))
        .inspect(|e| debug_assert_eq!(e.nrows(), n))
}

/// Inner product `aᵀ g b`.
pub fn g_dot(g: &DMatrix<f64>, a: &[f64], b: &[f64]) -> f64 {
    let n = a.len();
    let mut s = 0.0;
    for i in 0..n {
        for j in 0..n {
            s += a[i] * g[(i, j)] * b[j];
        }
    }
    s
}

pub fn g_norm(g: &DMatrix<f64>, a: &[f64]) -> f64 {
    g_dot(g, a, a).sqrt()
}

/// Best rigid motion `x ↦ R x + t` (proper rotation) taking `from` onto
/// `to` in the least-squares sense, with the RMS residual.
pub fn fit_rigid_motion(from: &[Vector3<f64>], to: &[Vector3<f64>]) -> (Matrix3<f64>, Vector3<f64>, f64) {
    assert_eq!(from.len(), to.len());
    let n = from.len() as f64;
    let ca = from.iter().sum::<Vector3<f64>>() / n;
    let cb = to.iter().sum::<Vector3<f64>>() / n;
    let mut h = Matrix3::zeros();
    for (a, b) in from.iter().zip(to) {
        h += (a - ca) * (b - cb).transpose();
    }
    let svd = h.svd(true, true);
    let (u, vt) = (svd.u.unwrap(), svd.v_t.unwrap());
    let mut d = Matrix3::identity();
    if (vt.transpose() * u.transpose()).determinant() < 0.0 {
        d[(2, 2)] = -1.0;
    }
    let rot = vt.transpose() * d * u.transpose();
    let t = cb - rot * ca;
    let rms = (from
        .iter()
        .zip(to)
        .map(|(a, b)| (rot * a + t - b).norm_squared())
        .sum::<f64>()
        / n)
        .sqrt();
    (rot, t, rms)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn identity_pair() {
        let e = generalized_symmetric_eigen(&Matrix2::identity(), &Matrix2::identity()).unwrap();
        assert!((e.values[0] - 1.0).abs() < 1e-15 && (e.values[1] - 1.0).abs() < 1e-15);
        assert!(e.vectors[0].dot(&e.vectors[1]).abs() < 1e-15);
    }

    #[test]
    fn diagonal_form() {
        let e = generalized_symmetric_eigen(&Matrix2::new(2.0, 0.0, 0.0, 0.0), &Matrix2::identity()).unwrap();
        assert_eq!(e.values, [2.0, 0.0]);
        assert!((e.vectors[0].x.abs() - 1.0).abs() < 1e-15);
        assert!((e.vectors[1].y.abs() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn saddle_form() {
        let e = generalized_symmetric_eigen(&Matrix2::new(0.0, 1.0, 1.0, 0.0), &Matrix2::identity()).unwrap();
        assert!((e.values[0] - 1.0).abs() < 1e-15 && (e.values[1] + 1.0).abs() < 1e-15);
        let r = std::f64::consts::FRAC_1_SQRT_2;
        assert!((e.vectors[0].x.abs() - r).abs() < 1e-15);
        assert!((e.vectors[0].x - e.vectors[0].y).abs() < 1e-15);
        assert!((e.vectors[1].x + e.vectors[1].y).abs() < 1e-15);
    }

    #[test]
    fn rejects_indefinite_metric() {
        assert!(generalized_symmetric_eigen(&Matrix2::identity(), &Matrix2::new(1.0, 2.0, 2.0, 1.0)).is_err());
    }

    #[test]
    fn random_residuals() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..100 {
            let m = Matrix2::new(rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0));
            let g = m * m.transpose() + Matrix2::identity() * 0.1;
            let b = rng.gen_range(-3.0..3.0);
            let q = Matrix2::new(rng.gen_range(-3.0..3.0), b, b, rng.gen_range(-3.0..3.0));
            let e = generalized_symmetric_eigen(&q, &g).unwrap();
            assert!(e.values[0] >= e.values[1]);
            for k in 0..2 {
                let v = e.vectors[k];
                let res = q * v - e.values[k] * g * v;
                assert!(res.norm() < 1e-12, "residual {}", res.norm());
                assert!(((v.transpose() * g * v)[0] - 1.0).abs() < 1e-12);
            }
            assert!((e.vectors[0].transpose() * g * e.vectors[1])[0].abs() < 1e-12);
        }
    }

    #[test]
    fn frame_is_orthonormal() {
        let g = DMatrix::from_row_slice(3, 3, &[2.0, 0.3, 0.1, 0.3, 1.5, -0.2, 0.1, -0.2, 1.0]);
        let e = orthonormal_frame(&g).unwrap();
        let m = e.transpose() * &g * &e;
        assert!((m - DMatrix::identity(3, 3)).norm() < 1e-14);
    }

    #[test]
    fn rigid_fit_recovers_rotation() {
        let rot = nalgebra::Rotation3::from_euler_angles(0.3, -0.2, 1.1).into_inner();
        let t = Vector3::new(1.0, -2.0, 0.5);
        let pts: Vec<_> = (0..10).map(|i| Vector3::new(i as f64, (i * i) as f64 * 0.1, (i as f64).sin())).collect();
        let moved: Vec<_> = pts.iter().map(|p| rot * p + t).collect();
        let (r, tt, rms) = fit_rigid_motion(&pts, &moved);
        assert!(rms < 1e-12);
        assert!((r - rot).norm() < 1e-12 && (tt - t).norm() < 1e-12);
    }
}
