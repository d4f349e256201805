use super::{GeometryError, Mat3, Vec3};
use num_traits::Float;

/// Signed SVD of a 3×3 matrix: `m = u · diag(s) · vᵀ` with `det u = det v = +1`.
///
/// `s[0] ≥ s[1] ≥ |s[2]|`; only `s[2]` can be negative, which happens exactly
/// when `det m < 0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Svd3 {
    pub u: Mat3,
    pub s: Vec3,
    pub v: Mat3,
}

impl Svd3 {
    pub fn reconstruct(&self) -> Mat3 {
        self.u * Mat3::from_diagonal(&self.s) * self.v.transpose()
    }
}

const MAX_SWEEPS: usize = 64;

/// One-sided (Hestenes) Jacobi SVD.
///
/// Columns of `w = m·v` are rotated pairwise until mutually orthogonal; the
/// column norms are then the singular values and the normalized columns the
/// left singular vectors. The third left vector is always completed as
/// `u0 × u1`, which fixes `det u = +1` and lets the sign of `s[2]` carry the
/// orientation.
pub fn svd3(m: &Mat3) -> Result<Svd3, GeometryError> {
    if m.iter().any(|x| !x.is_finite()) {
        return Err(GeometryError::InvalidInput("non-finite matrix entry"));
    }
    let mut w = *m;
    let mut v = Mat3::identity();
    for _ in 0..MAX_SWEEPS {
        let mut rotated = false;
        for (p, q) in [(0, 1), (0, 2), (1, 2)] {
            let alpha = w.column(p).norm_squared();
            let beta = w.column(q).norm_squared();
            let gamma = w.column(p).dot(&w.column(q));
            if gamma == 0.0 || gamma.abs() <= f64::EPSILON * Float::sqrt(alpha * beta) {
                continue;
            }
            rotated = true;
            let zeta = (beta - alpha) / (2.0 * gamma);
            let t = Float::signum(zeta) / (Float::abs(zeta) + Float::sqrt(1.0 + zeta * zeta));
            let c = 1.0 / Float::sqrt(1.0 + t * t);
            let s = c * t;
            rotate_columns(&mut w, p, q, c, s);
            rotate_columns(&mut v, p, q, c, s);
        }
        if !rotated {
            break;
        }
    }

    let norms = [w.column(0).norm(), w.column(1).norm(), w.column(2).norm()];
    let mut order = [0usize, 1, 2];
    // stable: equal singular values keep their original column order
    order.sort_by(|&a, &b| {
        norms[b]
            .partial_cmp(&norms[a])
            .unwrap_or(core::cmp::Ordering::Equal)
    });
    let mut ws = Mat3::zeros();
    let mut vs = Mat3::zeros();
    for (dst, &src) in order.iter().enumerate() {
        ws.set_column(dst, &w.column(src));
        vs.set_column(dst, &v.column(src));
    }
    if vs.determinant() < 0.0 {
        let flipped = -vs.column(2);
        vs.set_column(2, &flipped);
        let flipped = -ws.column(2);
        ws.set_column(2, &flipped);
    }

    let s0 = ws.column(0).norm();
    if s0 == 0.0 {
        return Ok(Svd3 {
            u: Mat3::identity(),
            s: Vec3::zeros(),
            v: vs,
        });
    }
    let tiny = s0 * 1e-18;
    let u0: Vec3 = ws.column(0) / s0;
    let w1: Vec3 = ws.column(1).into();
    let w1_perp = w1 - u0 * u0.dot(&w1);
    let u1 = if w1_perp.norm() > tiny {
        w1_perp.normalize()
    } else {
        any_orthogonal(&u0)
    };
    let u2 = u0.cross(&u1);
    let s1 = u1.dot(&w1);
    let s2 = u2.dot(&ws.column(2));
    let u = Mat3::from_columns(&[u0, u1, u2]);
    Ok(Svd3 {
        u,
        s: Vec3::new(s0, s1, s2),
        v: vs,
    })
}

fn rotate_columns(m: &mut Mat3, p: usize, q: usize, c: f64, s: f64) {
    for r in 0..3 {
        let a = m[(r, p)];
        let b = m[(r, q)];
        m[(r, p)] = c * a - s * b;
        m[(r, q)] = s * a + c * b;
    }
}

fn any_orthogonal(u: &Vec3) -> Vec3 {
    let axis = if u.x.abs() <= u.y.abs() && u.x.abs() <= u.z.abs() {
        Vec3::x()
    } else if u.y.abs() <= u.z.abs() {
        Vec3::y()
    } else {
        Vec3::z()
    };
    (axis - u * u.dot(&axis)).normalize()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::rotation_residual;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    /// Cyclic Jacobi eigensolver for symmetric 3×3 matrices, used as an
    /// independent reference for the squared singular values.
    fn jacobi_eigenvalues(mut a: Mat3) -> [f64; 3] {
        for _ in 0..100 {
            let off = a[(0, 1)].powi(2) + a[(0, 2)].powi(2) + a[(1, 2)].powi(2);
            if off < 1e-40 * a.norm_squared().max(1e-300) {
                break;
            }
            for (p, q) in [(0, 1), (0, 2), (1, 2)] {
                if a[(p, q)] == 0.0 {
                    continue;
                }
                let theta = (a[(q, q)] - a[(p, p)]) / (2.0 * a[(p, q)]);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                let mut j = Mat3::identity();
                j[(p, p)] = c;
                j[(q, q)] = c;
                j[(p, q)] = s;
                j[(q, p)] = -s;
                a = j.transpose() * a * j;
            }
        }
        let mut e = [a[(0, 0)], a[(1, 1)], a[(2, 2)]];
        e.sort_by(|x, y| y.partial_cmp(x).unwrap());
        e
    }

    fn check(m: &Mat3) -> Svd3 {
        let d = svd3(m).unwrap();
        let rel = (d.reconstruct() - m).norm() / m.norm().max(1e-300);
        assert!(rel < 1e-9, "reconstruction error {rel}");
        assert!(rotation_residual(&d.u) < 1e-9);
        assert!(rotation_residual(&d.v) < 1e-9);
        assert!(d.s[0] >= d.s[1] && d.s[1] >= d.s[2].abs());
        d
    }

    #[test]
    fn identity_is_its_own_decomposition() {
        let d = check(&Mat3::identity());
        assert_eq!(d.u, Mat3::identity());
        assert_eq!(d.v, Mat3::identity());
        assert_eq!(d.s, Vec3::new(1.0, 1.0, 1.0));
    }

    #[test]
    fn diagonal_descending() {
        let d = check(&Mat3::from_diagonal(&Vec3::new(3.0, 2.0, 1.0)));
        assert_eq!(d.u, Mat3::identity());
        assert_eq!(d.v, Mat3::identity());
        assert_eq!(d.s, Vec3::new(3.0, 2.0, 1.0));
    }

    #[test]
    fn reflection_gives_negative_last_value() {
        let d = check(&Mat3::from_diagonal(&Vec3::new(1.0, 2.0, -3.0)));
        assert!((d.s - Vec3::new(3.0, 2.0, -1.0)).norm() < 1e-12);
    }

    #[test]
    fn rank_deficient_inputs() {
        check(&Mat3::zeros());
        let a = Vec3::new(1.0, 2.0, 3.0);
        let b = Vec3::new(-1.0, 0.5, 2.0);
        check(&(a * b.transpose()));
        check(&(a * b.transpose() + b * a.transpose()));
    }

    #[test]
    fn non_finite_rejected() {
        let mut m = Mat3::identity();
        m[(1, 2)] = f64::NAN;
        assert!(matches!(svd3(&m), Err(GeometryError::InvalidInput(_))));
    }

    #[test]
    fn random_matrices_match_eigen_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let mut tested = 0;
        while tested < 2000 {
            let m = Mat3::from_fn(|_, _| rng.random_range(-1.0..1.0));
            let d = check(&m);
            let eig = jacobi_eigenvalues(m.transpose() * m);
            let cond = (eig[0] / eig[2].max(1e-300)).sqrt();
            if cond > 1e6 {
                continue;
            }
            tested += 1;
            for i in 0..3 {
                let s2 = d.s[i] * d.s[i];
                assert!((s2 - eig[i]).abs() <= 1e-10 * eig[0], "{s2} vs {}", eig[i]);
            }
            assert_eq!(d.s[2] < 0.0, m.determinant() < 0.0);
        }
    }

    #[test]
    fn ill_conditioned_reconstruction() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..200 {
            let a = crate::geometry::rot_z(rng.random_range(-3.0..3.0))
                * crate::geometry::rot_y(rng.random_range(-1.5..1.5));
            let b = crate::geometry::rot_x(rng.random_range(-3.0..3.0));
            let m = a * Mat3::from_diagonal(&Vec3::new(1.0, 1e-3, 1e-6)) * b;
            check(&m);
        }
    }
}
