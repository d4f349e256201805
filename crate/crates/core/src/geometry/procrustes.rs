use super::{svd3, GeometryError, Mat3, RigidTransform, Vec3};

/// Intermediate quantities of a closed-form alignment.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProcrustesWork {
    pub centroid_x: Vec3,
    pub centroid_y: Vec3,
    /// `Σ (xᵢ − x̄)(yᵢ − ȳ)ᵀ`
    pub cross_cov: Mat3,
    pub svd_u: Mat3,
    /// Signed, `s[0] ≥ s[1] ≥ |s[2]|`.
    pub svd_s: Vec3,
    pub svd_v: Mat3,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Procrustes {
    pub transform: RigidTransform,
    pub work: ProcrustesWork,
    /// Set when the minimizer is not unique (`s[1] + s[2] ≈ 0`, e.g. collinear
    /// points). The returned rotation is still proper.
    pub degenerate: bool,
}

const DEGENERACY_TOL: f64 = 1e-12;

/// Least-squares rigid motion taking `src[i]` onto `dst[i]`.
///
/// `R = V·Uᵀ` from the signed SVD `H = U·S·Vᵀ` of the cross-covariance, so
/// `det R = +1` without a separate reflection fix-up, and `t = ȳ − R·x̄`.
pub fn procrustes_solve(src: &[Vec3], dst: &[Vec3]) -> Result<Procrustes, GeometryError> {
    if src.len() != dst.len() {
        return Err(GeometryError::LengthMismatch {
            src: src.len(),
            dst: dst.len(),
        });
    }
    if src.len() < 3 {
        return Err(GeometryError::InsufficientData {
            needed: 3,
            got: src.len(),
        });
    }
    if src
        .iter()
        .chain(dst)
        .any(|p| p.iter().any(|c| !c.is_finite()))
    {
        return Err(GeometryError::InvalidInput("non-finite point"));
    }
    let n = src.len() as f64;
    let centroid_x = src.iter().fold(Vec3::zeros(), |a, p| a + p) / n;
    let centroid_y = dst.iter().fold(Vec3::zeros(), |a, p| a + p) / n;
    let cross_cov = src.iter().zip(dst).fold(Mat3::zeros(), |h, (x, y)| {
        h + (x - centroid_x) * (y - centroid_y).transpose()
    });
    let d = svd3(&cross_cov)?;
    let rotation = d.v * d.u.transpose();
    let translation = centroid_y - rotation * centroid_x;
    let degenerate = d.s[0] == 0.0 || d.s[1] + d.s[2] <= DEGENERACY_TOL * d.s[0];
    Ok(Procrustes {
        transform: RigidTransform {
            rotation,
            translation,
        },
        work: ProcrustesWork {
            centroid_x,
            centroid_y,
            cross_cov,
            svd_u: d.u,
            svd_s: d.s,
            svd_v: d.v,
        },
        degenerate,
    })
}

/// Mean squared residual `1/N Σ ‖R·xᵢ + t − yᵢ‖²` over index-aligned lists.
pub fn paired_objective(t: &RigidTransform, src: &[Vec3], dst: &[Vec3]) -> f64 {
    debug_assert_eq!(src.len(), dst.len());
    if src.is_empty() {
        return 0.0;
    }
    src.iter()
        .zip(dst)
        .map(|(x, y)| (t.apply(x) - y).norm_squared())
        .sum::<f64>()
        / src.len() as f64
}
