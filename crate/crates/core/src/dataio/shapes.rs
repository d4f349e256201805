//! Procedural CAD-like meshes used as a small offline corpus.
//!
//! Each shape is a union of boxes, cylinders, cones and ellipsoids. Like
//! their real counterparts, many are symmetric or nearly so (a vase, a
//! bowl, a square table), which leaves local alignment methods with
//! spurious minima. Components may intersect; sampling does not care.

use super::{normalize_unit_sphere, sample_surface, DataError, PointCloud, TriMesh};
use crate::geometry::{Mat3, Vec3};
use alloc::vec::Vec;
use core::f64::consts::PI;
use num_traits::Float;

/// Names of the built-in shapes, in index order.
pub const SHAPE_NAMES: [&str; 20] = [
    "chair",
    "table",
    "lamp",
    "mug",
    "airplane",
    "car",
    "bottle",
    "bed",
    "bookshelf",
    "vase",
    "sofa",
    "bowl",
    "monitor",
    "stool",
    "toilet",
    "dresser",
    "tent",
    "night_stand",
    "flower_pot",
    "cone",
];

const SEGMENTS: usize = 16;

struct Builder {
    mesh: TriMesh,
}

impl Builder {
    fn new() -> Self {
        Self {
            mesh: TriMesh::default(),
        }
    }

    fn push(&mut self, verts: &[Vec3], tris: &[[usize; 3]]) {
        let base = self.mesh.vertices.len();
        self.mesh.vertices.extend_from_slice(verts);
        self.mesh
            .triangles
            .extend(tris.iter().map(|t| t.map(|i| i + base)));
    }

    /// Axis-aligned box from center and full size.
    fn cuboid(&mut self, c: [f64; 3], size: [f64; 3]) -> &mut Self {
        let h = Vec3::new(size[0], size[1], size[2]) * 0.5;
        let c = Vec3::new(c[0], c[1], c[2]);
        let v: Vec<Vec3> = (0..8)
            .map(|i| {
                let s = Vec3::new(
                    if i & 1 == 0 { -1.0 } else { 1.0 },
                    if i & 2 == 0 { -1.0 } else { 1.0 },
                    if i & 4 == 0 { -1.0 } else { 1.0 },
                );
                c + h.component_mul(&s)
            })
            .collect();
        let quads = [
            [0, 2, 3, 1],
            [4, 5, 7, 6],
            [0, 1, 5, 4],
            [2, 6, 7, 3],
            [0, 4, 6, 2],
            [1, 3, 7, 5],
        ];
        let tris: Vec<[usize; 3]> = quads
            .iter()
            .flat_map(|q| [[q[0], q[1], q[2]], [q[0], q[2], q[3]]])
            .collect();
        self.push(&v, &tris);
        self
    }

    /// Frustum along `axis` (0 = x, 1 = y, 2 = z) centered at `c`; `r1 = 0`
    /// gives a cone. Caps are closed.
    fn frustum(&mut self, c: [f64; 3], axis: usize, r0: f64, r1: f64, len: f64) -> &mut Self {
        let frame = axis_frame(axis);
        let c = Vec3::new(c[0], c[1], c[2]);
        let mut v = Vec::with_capacity(2 * SEGMENTS + 2);
        for ring in 0..2 {
            let (r, z) = if ring == 0 {
                (r0, -0.5 * len)
            } else {
                (r1, 0.5 * len)
            };
            for k in 0..SEGMENTS {
                let a = 2.0 * PI * k as f64 / SEGMENTS as f64;
                v.push(c + frame * Vec3::new(r * Float::cos(a), r * Float::sin(a), z));
            }
        }
        v.push(c + frame * Vec3::new(0.0, 0.0, -0.5 * len));
        v.push(c + frame * Vec3::new(0.0, 0.0, 0.5 * len));
        let (bot, top) = (2 * SEGMENTS, 2 * SEGMENTS + 1);
        let mut t = Vec::new();
        for k in 0..SEGMENTS {
            let k1 = (k + 1) % SEGMENTS;
            t.push([k, k1, SEGMENTS + k1]);
            t.push([k, SEGMENTS + k1, SEGMENTS + k]);
            t.push([bot, k1, k]);
            t.push([top, SEGMENTS + k, SEGMENTS + k1]);
        }
        self.push(&v, &t);
        self
    }

    fn cylinder(&mut self, c: [f64; 3], axis: usize, r: f64, len: f64) -> &mut Self {
        self.frustum(c, axis, r, r, len)
    }

    fn ellipsoid(&mut self, c: [f64; 3], radii: [f64; 3]) -> &mut Self {
        let (nu, nv) = (SEGMENTS, SEGMENTS / 2);
        let c = Vec3::new(c[0], c[1], c[2]);
        let mut v = Vec::new();
        for i in 0..=nv {
            let th = PI * i as f64 / nv as f64;
            for j in 0..nu {
                let ph = 2.0 * PI * j as f64 / nu as f64;
                v.push(
                    c + Vec3::new(
                        radii[0] * Float::sin(th) * Float::cos(ph),
                        radii[1] * Float::sin(th) * Float::sin(ph),
                        radii[2] * Float::cos(th),
                    ),
                );
            }
        }
        let mut t = Vec::new();
        for i in 0..nv {
            for j in 0..nu {
                let j1 = (j + 1) % nu;
                let (a, b, cc, d) = (i * nu + j, i * nu + j1, (i + 1) * nu + j1, (i + 1) * nu + j);
                if i != 0 {
                    t.push([a, b, cc]);
                }
                if i != nv - 1 {
                    t.push([a, cc, d]);
                }
            }
        }
        self.push(&v, &t);
        self
    }

    fn finish(&mut self) -> TriMesh {
        core::mem::take(&mut self.mesh)
    }
}

fn axis_frame(axis: usize) -> Mat3 {
    match axis {
        0 => Mat3::new(0.0, 0.0, 1.0, 1.0, 0.0, 0.0, 0.0, 1.0, 0.0),
        1 => Mat3::new(0.0, 1.0, 0.0, 0.0, 0.0, 1.0, 1.0, 0.0, 0.0),
        _ => Mat3::identity(),
    }
}

/// Mesh for shape `index` (`0..SHAPE_NAMES.len()`).
pub fn shape_mesh(index: usize) -> TriMesh {
    let mut b = Builder::new();
    match index % SHAPE_NAMES.len() {
        0 => b
            .cuboid([0.0, 0.0, 0.45], [1.0, 1.0, 0.1])
            .cuboid([0.0, -0.45, 1.0], [1.0, 0.1, 1.0])
            .cuboid([0.42, 0.42, 0.2], [0.08, 0.08, 0.4])
            .cuboid([-0.42, 0.42, 0.2], [0.08, 0.08, 0.4])
            .cuboid([0.42, -0.42, 0.2], [0.08, 0.08, 0.4])
            .cuboid([-0.42, -0.42, 0.2], [0.08, 0.08, 0.4])
            .finish(),
        1 => b
            .cuboid([0.0, 0.0, 0.75], [1.2, 1.2, 0.06])
            .cuboid([0.5, 0.5, 0.36], [0.07, 0.07, 0.72])
            .cuboid([-0.5, 0.5, 0.36], [0.07, 0.07, 0.72])
            .cuboid([0.5, -0.5, 0.36], [0.07, 0.07, 0.72])
            .cuboid([-0.5, -0.5, 0.36], [0.07, 0.07, 0.72])
            .cuboid([0.0, 0.5, 0.2], [1.0, 0.04, 0.04])
            .finish(),
        2 => b
            .cylinder([0.0, 0.0, 0.03], 2, 0.35, 0.06)
            .cylinder([0.0, 0.0, 0.6], 2, 0.03, 1.1)
            .cylinder([0.2, 0.0, 1.15], 0, 0.03, 0.4)
            .frustum([0.45, 0.0, 1.0], 2, 0.3, 0.1, 0.35)
            .finish(),
        3 => b
            .cylinder([0.0, 0.0, 0.5], 2, 0.4, 1.0)
            .cuboid([0.5, 0.0, 0.65], [0.2, 0.08, 0.5])
            .cuboid([0.45, 0.0, 0.35], [0.15, 0.08, 0.08])
            .finish(),
        4 => b
            .ellipsoid([0.0, 0.0, 0.0], [1.2, 0.18, 0.18])
            .cuboid([0.1, 0.0, 0.0], [0.4, 2.0, 0.05])
            .cuboid([-1.0, 0.0, 0.25], [0.25, 0.05, 0.45])
            .cuboid([-1.05, 0.0, 0.05], [0.2, 0.7, 0.04])
            .cylinder([0.2, 0.55, -0.15], 0, 0.08, 0.35)
            .cylinder([0.2, -0.55, -0.15], 0, 0.08, 0.35)
            .finish(),
        5 => b
            .cuboid([0.0, 0.0, 0.35], [2.0, 0.9, 0.4])
            .cuboid([-0.25, 0.0, 0.72], [1.0, 0.8, 0.35])
            .cylinder([0.65, 0.48, 0.15], 1, 0.18, 0.1)
            .cylinder([-0.65, 0.48, 0.15], 1, 0.18, 0.1)
            .cylinder([0.65, -0.48, 0.15], 1, 0.18, 0.1)
            .cylinder([-0.65, -0.48, 0.15], 1, 0.18, 0.1)
            .cuboid([1.02, 0.0, 0.4], [0.05, 0.6, 0.12])
            .finish(),
        6 => b
            .cylinder([0.0, 0.0, 0.4], 2, 0.3, 0.8)
            .frustum([0.0, 0.0, 0.95], 2, 0.3, 0.1, 0.3)
            .cylinder([0.0, 0.0, 1.2], 2, 0.1, 0.2)
            .cuboid([0.38, 0.0, 0.5], [0.12, 0.06, 0.45])
            .finish(),
        7 => b
            .cuboid([0.0, 0.0, 0.25], [2.0, 1.4, 0.3])
            .cuboid([-0.98, 0.0, 0.6], [0.08, 1.4, 1.0])
            .cuboid([0.98, 0.0, 0.4], [0.06, 1.4, 0.5])
            .ellipsoid([-0.65, 0.0, 0.48], [0.22, 0.5, 0.08])
            .finish(),
        8 => b
            .cuboid([0.0, 0.0, 1.0], [1.2, 0.4, 0.05])
            .cuboid([0.0, 0.0, 0.0], [1.2, 0.4, 0.05])
            .cuboid([-0.6, 0.0, 0.5], [0.05, 0.4, 1.0])
            .cuboid([0.6, 0.0, 0.5], [0.05, 0.4, 1.0])
            .cuboid([0.0, 0.2, 0.5], [1.2, 0.03, 1.0])
            .cuboid([0.0, 0.0, 0.33], [1.2, 0.4, 0.04])
            .cuboid([0.0, 0.0, 0.7], [1.2, 0.4, 0.04])
            .finish(),
        9 => b
            .frustum([0.0, 0.0, 0.3], 2, 0.22, 0.4, 0.6)
            .frustum([0.0, 0.0, 0.8], 2, 0.4, 0.14, 0.4)
            .cylinder([0.0, 0.0, 1.05], 2, 0.16, 0.1)
            .ellipsoid([0.36, 0.0, 0.55], [0.08, 0.08, 0.1])
            .finish(),
        10 => b
            .cuboid([0.0, 0.0, 0.25], [2.0, 0.9, 0.3])
            .cuboid([0.0, -0.4, 0.65], [2.0, 0.2, 0.6])
            .cuboid([0.95, 0.05, 0.5], [0.2, 0.8, 0.5])
            .cuboid([-0.95, 0.05, 0.5], [0.2, 0.8, 0.5])
            .finish(),
        11 => b
            .frustum([0.0, 0.0, 0.2], 2, 0.3, 0.6, 0.35)
            .cylinder([0.0, 0.0, 0.0], 2, 0.22, 0.05)
            .cuboid([0.62, 0.0, 0.35], [0.15, 0.1, 0.04])
            .finish(),
        12 => b
            .cuboid([0.0, 0.0, 0.8], [1.2, 0.05, 0.7])
            .cuboid([0.0, 0.08, 0.35], [0.1, 0.06, 0.4])
            .cuboid([0.0, 0.15, 0.02], [0.5, 0.35, 0.04])
            .finish(),
        13 => b
            .cylinder([0.0, 0.0, 0.7], 2, 0.3, 0.06)
            .cuboid([0.2, 0.0, 0.35], [0.05, 0.05, 0.7])
            .cuboid([-0.1, 0.17, 0.35], [0.05, 0.05, 0.7])
            .cuboid([-0.1, -0.17, 0.35], [0.05, 0.05, 0.7])
            .finish(),
        14 => b
            .ellipsoid([0.0, 0.0, 0.35], [0.35, 0.25, 0.2])
            .cylinder([0.0, 0.0, 0.15], 2, 0.15, 0.3)
            .cuboid([-0.35, 0.0, 0.7], [0.2, 0.5, 0.5])
            .finish(),
        15 => b
            .cuboid([0.0, 0.0, 0.55], [1.0, 0.6, 1.0])
            .cuboid([0.0, -0.32, 0.25], [0.2, 0.04, 0.04])
            .cuboid([0.0, -0.32, 0.55], [0.2, 0.04, 0.04])
            .cuboid([0.0, -0.32, 0.85], [0.2, 0.04, 0.04])
            .cuboid([0.0, 0.0, 0.03], [0.9, 0.5, 0.06])
            .finish(),
        16 => b
            .frustum([0.0, 0.0, 0.5], 2, 0.9, 0.05, 1.0)
            .cuboid([0.7, 0.0, 0.2], [0.3, 0.35, 0.4])
            .finish(),
        17 => b
            .cuboid([0.0, 0.0, 0.45], [0.6, 0.6, 0.6])
            .cuboid([0.25, 0.25, 0.08], [0.05, 0.05, 0.16])
            .cuboid([-0.25, 0.25, 0.08], [0.05, 0.05, 0.16])
            .cuboid([0.25, -0.25, 0.08], [0.05, 0.05, 0.16])
            .cuboid([-0.25, -0.25, 0.08], [0.05, 0.05, 0.16])
            .cuboid([0.0, -0.32, 0.55], [0.08, 0.04, 0.04])
            .finish(),
        18 => b
            .frustum([0.0, 0.0, 0.25], 2, 0.25, 0.35, 0.5)
            .ellipsoid([0.05, 0.0, 0.75], [0.35, 0.3, 0.3])
            .finish(),
        _ => b
            .frustum([0.0, 0.0, 0.5], 2, 0.5, 0.0, 1.0)
            .cylinder([0.0, 0.0, 0.0], 2, 0.5, 0.02)
            .cuboid([0.45, 0.0, 0.08], [0.12, 0.12, 0.12])
            .finish(),
    }
}

/// Samples `count` clouds of `n_points` from the built-in shapes, cycling
/// through them, normalized to the unit sphere and labeled by shape name.
/// Sample `i` uses seed `seed + i`.
pub fn builtin_corpus(
    count: usize,
    n_points: usize,
    seed: u64,
) -> Result<Vec<PointCloud>, DataError> {
    (0..count)
        .map(|i| {
            let k = i % SHAPE_NAMES.len();
            let p = sample_surface(&shape_mesh(k), n_points, seed.wrapping_add(i as u64))?;
            Ok(normalize_unit_sphere(&p)?.with_label(SHAPE_NAMES[k]))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataio::{format_off, parse_off};

    #[test]
    fn every_shape_is_a_valid_mesh() {
        for k in 0..SHAPE_NAMES.len() {
            let m = shape_mesh(k);
            assert!(m.surface_area() > 0.1, "{}", SHAPE_NAMES[k]);
            assert!(m
                .triangles
                .iter()
                .all(|t| t.iter().all(|&i| i < m.vertices.len())));
            assert_eq!(
                parse_off(&format_off(&m)).unwrap().triangles.len(),
                m.triangles.len()
            );
        }
    }

    #[test]
    fn corpus_is_normalized_and_labeled() {
        let c = builtin_corpus(40, 256, 1).unwrap();
        assert_eq!(c.len(), 40);
        for p in &c {
            assert_eq!(p.len(), 256);
            assert!(p.centroid().norm() < 1e-9);
            let r = p.points.iter().map(|x| x.norm()).fold(0.0, f64::max);
            assert!((r - 1.0).abs() < 1e-9);
        }
        assert_eq!(c[21].label.as_deref(), Some("table"));
    }
}
