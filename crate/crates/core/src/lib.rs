//! Rigid point-cloud registration.
//!
//! The crate is `no_std` + `alloc` when built without the default `std`
//! feature. It contains everything that is pure computation:
//!
//! * [`geometry`]: rigid motions, a 3×3 SVD, closed-form Procrustes alignment
//!   and Euler-angle error metrics.
//! * [`dataio`]: point clouds, OFF/XYZ text parsing, surface sampling,
//!   synthetic labeled pairs and the clipped Gaussian noise model.
//! * [`icp`]: an exact k-d tree and point-to-point ICP.
//! * [`autodiff`]: a small tape-based reverse-mode AD engine over dense
//!   tensors, including a differentiable rigid-alignment head.
//! * [`dcpnet`]: the learned closest-point network (PointNet / DGCNN
//!   embeddings, transformer co-attention, soft pointers, SVD or MLP head).
//! * [`train`]: Adam, the learning-rate schedule, metrics, the training loop
//!   and the checkpoint codec.
#![cfg_attr(not(feature = "std"), no_std)]

extern crate alloc;

pub mod autodiff;
pub mod dataio;
pub mod dcpnet;
pub mod geometry;
pub mod icp;
pub mod train;

pub use dataio::PointCloud;
pub use geometry::RigidTransform;
