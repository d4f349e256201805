//! Reverse-mode automatic differentiation over dense tensors.
//!
//! A [`Tape`] records each primitive as it executes; [`Tape::backward`]
//! replays the record in reverse. Values are row-major [`Tensor`]s generic
//! over the element type, `f64` for gradient checks and `f32` for training.

mod backward;
pub mod gradcheck;
mod ops;
mod rigid;
mod scalar;
mod shape;
mod tape;
mod tensor;

pub use gradcheck::{gradcheck, GradCheck};
pub use ops::{BatchStats, BnMode, BN_EPS, LN_EPS};
pub use rigid::{
    procrustes_rotation, quat_to_rotation, svd_rigid_head, MIN_QUAT_NORM, SINGULAR_GAP,
};
pub use scalar::{DType, Scalar};
pub use tape::{Tape, Var};
pub use tensor::Tensor;

use alloc::vec::Vec;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum AutodiffError {
    #[error("{op}: incompatible shapes {lhs:?} and {rhs:?}")]
    Shape {
        op: &'static str,
        lhs: Vec<usize>,
        rhs: Vec<usize>,
    },
    #[error("data length {len} does not match shape {shape:?}")]
    DataLength { shape: Vec<usize>, len: usize },
    #[error("{op}: invalid axis {axis} for shape {shape:?}")]
    InvalidAxis {
        op: &'static str,
        axis: usize,
        shape: Vec<usize>,
    },
    #[error("{op}: empty input")]
    Empty { op: &'static str },
    #[error("{op}: index {index} out of range for axis of length {len}")]
    IndexOutOfRange {
        op: &'static str,
        index: usize,
        len: usize,
    },
    #[error("backward needs a one-element output, got shape {shape:?}")]
    NotScalar { shape: Vec<usize> },
    #[error("{op}: non-finite input")]
    NonFinite { op: &'static str },
    #[error("rotation gradient undefined: s1 + s2 = {gap:e} against s0 = {scale:e} (relative tolerance {tol:e})")]
    GradientSingularity { gap: f64, scale: f64, tol: f64 },
    #[error("quaternion norm {norm:e} too small to normalize")]
    DegenerateQuaternion { norm: f64 },
}
