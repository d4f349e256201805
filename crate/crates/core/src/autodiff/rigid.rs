//! Custom differentiable operations on 3×3 rotations.

use super::tape::Op;
use super::{AutodiffError, Scalar, Tape, Tensor, Var};
use crate::geometry::{svd3, Mat3};
use alloc::vec::Vec;
use num_traits::Float;

/// Relative size of `s1 + s2` below which the rotation gradient is refused.
pub const SINGULAR_GAP: f64 = 1e-8;

pub(crate) fn to_mat3<T: Scalar>(d: &[T]) -> Mat3 {
    Mat3::from_fn(|i, j| d[3 * i + j].as_f64())
}

/// Rotation part of the orthogonal Procrustes solution for each trailing
/// 3×3 block `H = Σ xᵢ yᵢᵀ` of centered points: `R = V·Uᵀ` from the signed
/// SVD `H = U·S·Vᵀ`.
///
/// The reverse pass uses `∂L/∂H = U·K·Vᵀ` with `M = Vᵀ·(∂L/∂R)·U` and
/// `K_ij = (M_ji − M_ij) / (s_i + s_j)`. With signed singular values the
/// smallest denominator is `s1 + s2`; when it is tiny relative to `s0` the
/// rotation is not differentiable and `backward` reports it.
pub fn procrustes_rotation<T: Scalar>(tape: &mut Tape<T>, h: Var) -> Result<Var, AutodiffError> {
    let shape = tape.shape(h).to_vec();
    let r = shape.len();
    if r < 2 || shape[r - 2..] != [3, 3] {
        return Err(AutodiffError::Shape {
            op: "procrustes_rotation",
            lhs: shape,
            rhs: alloc::vec![3, 3],
        });
    }
    let hv = tape.value(h).data();
    let blocks = hv.len() / 9;
    let mut out = Vec::with_capacity(hv.len());
    let mut svds = Vec::with_capacity(blocks);
    let mut singular = None;
    for b in 0..blocks {
        let d = svd3(&to_mat3(&hv[9 * b..9 * b + 9])).map_err(|_| AutodiffError::NonFinite {
            op: "procrustes_rotation",
        })?;
        let gap = d.s[1] + d.s[2];
        if singular.is_none() && (d.s[0] == 0.0 || gap <= SINGULAR_GAP * d.s[0]) {
            singular = Some((gap, d.s[0]));
        }
        let rot = d.v * d.u.transpose();
        for i in 0..3 {
            for j in 0..3 {
                out.push(T::from_f64(rot[(i, j)]));
            }
        }
        svds.push(d);
    }
    let rg = tape.any_grad(&[h]);
    Ok(tape.push(
        Tensor::new(&shape, out)?,
        Op::Procrustes {
            h,
            svd: svds,
            singular,
        },
        rg,
    ))
}

pub(crate) fn procrustes_backward(svd: &crate::geometry::Svd3, g: &Mat3) -> Mat3 {
    let m = svd.v.transpose() * g * svd.u;
    let s = svd.s;
    let k = Mat3::from_fn(|i, j| {
        if i == j {
            0.0
        } else {
            (m[(j, i)] - m[(i, j)]) / (s[i] + s[j])
        }
    });
    svd.u * k * svd.v.transpose()
}

/// Norm below which a quaternion is rejected.
pub const MIN_QUAT_NORM: f64 = 1e-12;

pub(crate) fn quat_matrix(q: [f64; 4]) -> [f64; 9] {
    let [w, x, y, z] = q;
    #[rustfmt::skip]
    let r = [
        1.0 - 2.0 * (y * y + z * z), 2.0 * (x * y - w * z), 2.0 * (x * z + w * y),
        2.0 * (x * y + w * z), 1.0 - 2.0 * (x * x + z * z), 2.0 * (y * z - w * x),
        2.0 * (x * z - w * y), 2.0 * (y * z + w * x), 1.0 - 2.0 * (x * x + y * y),
    ];
    r
}

/// Rotation matrices from unnormalized quaternions `(w, x, y, z)` on the last
/// axis; output shape replaces that axis with `3, 3`.
pub fn quat_to_rotation<T: Scalar>(tape: &mut Tape<T>, q: Var) -> Result<Var, AutodiffError> {
    let shape = tape.shape(q).to_vec();
    if shape.last() != Some(&4) {
        return Err(AutodiffError::Shape {
            op: "quat_to_rotation",
            lhs: shape,
            rhs: alloc::vec![4],
        });
    }
    let qv = tape.value(q).data();
    let mut out = Vec::with_capacity(qv.len() / 4 * 9);
    for c in qv.chunks_exact(4) {
        let p: [f64; 4] = core::array::from_fn(|i| c[i].as_f64());
        let norm = Float::sqrt(p.iter().map(|x| x * x).sum::<f64>());
        if !(norm >= MIN_QUAT_NORM) {
            return Err(AutodiffError::DegenerateQuaternion { norm });
        }
        out.extend(
            quat_matrix(p.map(|x| x / norm))
                .iter()
                .map(|&x| T::from_f64(x)),
        );
    }
    let mut oshape = shape;
    oshape.pop();
    oshape.extend([3, 3]);
    let rg = tape.any_grad(&[q]);
    Ok(tape.push(Tensor::new(&oshape, out)?, Op::QuatToRot { q }, rg))
}

pub(crate) fn quat_backward(p: [f64; 4], g: &[f64; 9]) -> [f64; 4] {
    let norm = Float::sqrt(p.iter().map(|x| x * x).sum::<f64>());
    let [w, x, y, z] = p.map(|v| v / norm);
    #[rustfmt::skip]
    let partials = [
        [0.0, -2.0 * z, 2.0 * y, 2.0 * z, 0.0, -2.0 * x, -2.0 * y, 2.0 * x, 0.0],
        [0.0, 2.0 * y, 2.0 * z, 2.0 * y, -4.0 * x, -2.0 * w, 2.0 * z, 2.0 * w, -4.0 * x],
        [-4.0 * y, 2.0 * x, 2.0 * w, 2.0 * x, 0.0, 2.0 * z, -2.0 * w, 2.0 * z, -4.0 * y],
        [-4.0 * z, -2.0 * w, 2.0 * x, 2.0 * w, -4.0 * z, 2.0 * y, 2.0 * x, 2.0 * y, 0.0],
    ];
    let dq: [f64; 4] =
        core::array::from_fn(|a| partials[a].iter().zip(g).map(|(d, gg)| d * gg).sum());
    // project through q = p / |p|
    let qn = [w, x, y, z];
    let dot: f64 = dq.iter().zip(&qn).map(|(a, b)| a * b).sum();
    core::array::from_fn(|i| (dq[i] - dot * qn[i]) / norm)
}

/// Differentiable rigid fit of `dst ≈ R·src + t` over matched rows, both
/// `[..., N, 3]`. Returns `R` as `[..., 3, 3]` and `t` as `[..., 3]`.
pub fn svd_rigid_head<T: Scalar>(
    tape: &mut Tape<T>,
    src: Var,
    dst: Var,
) -> Result<(Var, Var), AutodiffError> {
    let s = tape.shape(src).to_vec();
    let r = s.len();
    if r < 2 || s[r - 1] != 3 || tape.shape(dst) != s.as_slice() {
        return Err(AutodiffError::Shape {
            op: "svd_rigid_head",
            lhs: s,
            rhs: tape.shape(dst).to_vec(),
        });
    }
    if s[r - 2] < 3 {
        return Err(AutodiffError::Shape {
            op: "svd_rigid_head",
            lhs: s,
            rhs: alloc::vec![3, 3],
        });
    }
    let mut kept = s.clone();
    kept[r - 2] = 1;
    let mx = tape.mean(src, r - 2)?;
    let my = tape.mean(dst, r - 2)?;
    let mx_row = tape.reshape(mx, &kept)?;
    let my_row = tape.reshape(my, &kept)?;
    let xc = tape.sub(src, mx_row)?;
    let yc = tape.sub(dst, my_row)?;
    let xt = tape.transpose(xc, r - 2, r - 1)?;
    let h = tape.matmul(xt, yc)?;
    let rot = procrustes_rotation(tape, h)?;
    let mut col = s;
    col[r - 2] = 3;
    col[r - 1] = 1;
    let mx_col = tape.reshape(mx, &col)?;
    let rx = tape.matmul(rot, mx_col)?;
    let rx = tape.reshape(rx, tape.shape(my).to_vec().as_slice())?;
    let t = tape.sub(my, rx)?;
    Ok((rot, t))
}
