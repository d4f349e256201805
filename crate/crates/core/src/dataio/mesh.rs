use super::{DataError, PointCloud};
use crate::geometry::Vec3;
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt::Write;
use num_traits::Float;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Triangle mesh; polygonal faces are fan-triangulated on load.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct TriMesh {
    pub vertices: Vec<Vec3>,
    pub triangles: Vec<[usize; 3]>,
}

impl TriMesh {
    pub fn triangle_area(&self, t: usize) -> f64 {
        let [a, b, c] = self.triangles[t].map(|i| self.vertices[i]);
        0.5 * (b - a).cross(&(c - a)).norm()
    }

    pub fn surface_area(&self) -> f64 {
        (0..self.triangles.len())
            .map(|t| self.triangle_area(t))
            .sum()
    }
}

fn perr(line: usize, msg: impl Into<String>) -> DataError {
    DataError::Parse {
        line,
        msg: msg.into(),
    }
}

/// Parses an ASCII OFF file.
///
/// Accepts the `OFF<nv> <nf> <ne>` run-together header found in some
/// ModelNet files, `#` comments and blank lines. Extra tokens on face lines
/// (colors) are ignored.
pub fn parse_off(text: &str) -> Result<TriMesh, DataError> {
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.split('#').next().unwrap_or("").trim()))
        .filter(|(_, l)| !l.is_empty());

    let (hline, header) = lines.next().ok_or_else(|| perr(1, "empty file"))?;
    let rest = header
        .strip_prefix("OFF")
        .ok_or_else(|| perr(hline, format!("expected \"OFF\" magic, found {header:?}")))?
        .trim();
    let (cline, counts) = if rest.is_empty() {
        lines
            .next()
            .ok_or_else(|| perr(hline + 1, "missing vertex/face counts"))?
    } else {
        (hline, rest)
    };
    let counts: Vec<usize> = counts
        .split_whitespace()
        .map(|t| {
            t.parse::<usize>()
                .map_err(|_| perr(cline, format!("bad count {t:?}")))
        })
        .collect::<Result<_, _>>()?;
    if counts.len() < 2 {
        return Err(perr(cline, "expected vertex and face counts"));
    }
    let (nv, nf) = (counts[0], counts[1]);

    let mut vertices = Vec::with_capacity(nv);
    for k in 0..nv {
        let (ln, l) = lines
            .next()
            .ok_or_else(|| perr(cline, format!("file ends after {k} of {nv} vertices")))?;
        let c: Vec<f64> = l
            .split_whitespace()
            .take(3)
            .map(|t| {
                t.parse::<f64>()
                    .map_err(|_| perr(ln, format!("bad coordinate {t:?}")))
            })
            .collect::<Result<_, _>>()?;
        if c.len() != 3 || c.iter().any(|x| !x.is_finite()) {
            return Err(perr(ln, "vertex needs three finite coordinates"));
        }
        vertices.push(Vec3::new(c[0], c[1], c[2]));
    }

    let mut triangles = Vec::with_capacity(nf);
    for k in 0..nf {
        let (ln, l) = lines
            .next()
            .ok_or_else(|| perr(cline, format!("file ends after {k} of {nf} faces")))?;
        let mut tok = l.split_whitespace();
        let arity: usize = tok
            .next()
            .and_then(|t| t.parse().ok())
            .ok_or_else(|| perr(ln, "bad face vertex count"))?;
        if arity < 3 {
            return Err(perr(ln, format!("face with {arity} vertices")));
        }
        let idx: Vec<usize> = tok
            .take(arity)
            .map(|t| {
                t.parse::<usize>()
                    .map_err(|_| perr(ln, format!("bad vertex index {t:?}")))
            })
            .collect::<Result<_, _>>()?;
        if idx.len() != arity {
            return Err(perr(
                ln,
                format!("face declares {arity} vertices, lists {}", idx.len()),
            ));
        }
        if let Some(bad) = idx.iter().find(|&&i| i >= nv) {
            return Err(perr(
                ln,
                format!("vertex index {bad} out of range (0..{nv})"),
            ));
        }
        for j in 1..arity - 1 {
            triangles.push([idx[0], idx[j], idx[j + 1]]);
        }
    }
    Ok(TriMesh {
        vertices,
        triangles,
    })
}

pub fn format_off(mesh: &TriMesh) -> String {
    let mut s = String::new();
    s.push_str("OFF\n");
    let _ = writeln!(s, "{} {} 0", mesh.vertices.len(), mesh.triangles.len());
    for v in &mesh.vertices {
        let _ = writeln!(s, "{} {} {}", v.x, v.y, v.z);
    }
    for t in &mesh.triangles {
        let _ = writeln!(s, "3 {} {} {}", t[0], t[1], t[2]);
    }
    s
}

/// Draws `n` points uniformly over the surface: a triangle is chosen with
/// probability proportional to its area, then a point uniformly inside it.
pub fn sample_surface(mesh: &TriMesh, n: usize, seed: u64) -> Result<PointCloud, DataError> {
    let mut cumulative = Vec::with_capacity(mesh.triangles.len());
    let mut total = 0.0;
    for t in 0..mesh.triangles.len() {
        total += mesh.triangle_area(t);
        cumulative.push(total);
    }
    if !(total > 0.0) {
        return Err(DataError::DegenerateMesh);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut points = Vec::with_capacity(n);
    for _ in 0..n {
        let target = rng.random::<f64>() * total;
        let t = cumulative
            .partition_point(|&c| c <= target)
            .min(cumulative.len() - 1);
        let [a, b, c] = mesh.triangles[t].map(|i| mesh.vertices[i]);
        let r1 = Float::sqrt(rng.random::<f64>());
        let r2 = rng.random::<f64>();
        points.push(a * (1.0 - r1) + b * (r1 * (1.0 - r2)) + c * (r1 * r2));
    }
    Ok(PointCloud::new(points))
}

#[cfg(test)]
mod tests {
    use super::*;

    const SQUARE: &str = "OFF\n4 2 0\n0 0 0\n1 0 0\n1 1 0\n0 1 0\n3 0 1 2\n3 0 2 3\n";

    #[test]
    fn parses_square() {
        let m = parse_off(SQUARE).unwrap();
        assert_eq!(m.vertices.len(), 4);
        assert_eq!(m.triangles, alloc::vec![[0, 1, 2], [0, 2, 3]]);
        assert!((m.surface_area() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn quad_is_fan_triangulated_and_header_may_run_together() {
        let m = parse_off("OFF4 1 0\n# comment\n0 0 0\n1 0 0\n1 1 0\n0 1 0\n4 0 1 2 3 255 0 0\n")
            .unwrap();
        assert_eq!(m.triangles, alloc::vec![[0, 1, 2], [0, 2, 3]]);
    }

    #[test]
    fn errors_carry_line_numbers() {
        assert!(matches!(
            parse_off("PLY\n"),
            Err(DataError::Parse { line: 1, .. })
        ));
        assert!(matches!(
            parse_off("OFF\n2 x 0\n"),
            Err(DataError::Parse { line: 2, .. })
        ));
        let bad_vertex = "OFF\n3 1 0\n0 0 0\n1 zero 0\n0 1 0\n3 0 1 2\n";
        assert!(matches!(
            parse_off(bad_vertex),
            Err(DataError::Parse { line: 4, .. })
        ));
        let bad_index = "OFF\n3 1 0\n0 0 0\n1 0 0\n0 1 0\n3 0 1 7\n";
        assert!(matches!(
            parse_off(bad_index),
            Err(DataError::Parse { line: 6, .. })
        ));
        let short = "OFF\n3 1 0\n0 0 0\n1 0 0\n";
        assert!(matches!(parse_off(short), Err(DataError::Parse { .. })));
    }

    #[test]
    fn round_trip_through_text() {
        let m = parse_off(SQUARE).unwrap();
        assert_eq!(parse_off(&format_off(&m)).unwrap(), m);
    }

    #[test]
    fn square_samples_center_on_half() {
        let m = parse_off(SQUARE).unwrap();
        let p = sample_surface(&m, 10_000, 3).unwrap();
        let c = p.centroid();
        assert!((c.x - 0.5).abs() < 0.01 && (c.y - 0.5).abs() < 0.01 && c.z == 0.0);
    }

    #[test]
    fn samples_stay_inside_triangle() {
        let m = TriMesh {
            vertices: alloc::vec![
                Vec3::new(0.0, 0.0, 0.0),
                Vec3::new(2.0, 0.0, 0.0),
                Vec3::new(0.0, 1.0, 0.0)
            ],
            triangles: alloc::vec![[0, 1, 2]],
        };
        let p = sample_surface(&m, 2000, 4).unwrap();
        for q in &p.points {
            // barycentric w.r.t. the right triangle with legs 2 and 1
            let (b1, b2) = (q.x / 2.0, q.y);
            assert!(b1 >= -1e-12 && b2 >= -1e-12 && b1 + b2 <= 1.0 + 1e-12);
        }
    }

    #[test]
    fn area_weighting() {
        // triangle A has area 9, triangle B area 1, far apart in x
        let m = TriMesh {
            vertices: alloc::vec![
                Vec3::new(0.0, 0.0, 0.0),
                Vec3::new(6.0, 0.0, 0.0),
                Vec3::new(0.0, 3.0, 0.0),
                Vec3::new(100.0, 0.0, 0.0),
                Vec3::new(102.0, 0.0, 0.0),
                Vec3::new(100.0, 1.0, 0.0),
            ],
            triangles: alloc::vec![[0, 1, 2], [3, 4, 5]],
        };
        assert!(
            (m.triangle_area(0) - 9.0).abs() < 1e-12 && (m.triangle_area(1) - 1.0).abs() < 1e-12
        );
        let p = sample_surface(&m, 10_000, 5).unwrap();
        let in_a = p.points.iter().filter(|q| q.x < 50.0).count() as f64 / 10_000.0;
        assert!((in_a - 0.9).abs() < 0.02, "{in_a}");
    }

    #[test]
    fn zero_area_mesh() {
        let m = TriMesh {
            vertices: alloc::vec![Vec3::zeros(), Vec3::x(), Vec3::x() * 2.0],
            triangles: alloc::vec![[0, 1, 2]],
        };
        assert_eq!(sample_surface(&m, 10, 0), Err(DataError::DegenerateMesh));
    }

    #[test]
    fn sampling_is_deterministic() {
        let m = parse_off(SQUARE).unwrap();
        assert_eq!(
            sample_surface(&m, 100, 42).unwrap(),
            sample_surface(&m, 100, 42).unwrap()
        );
        assert_ne!(
            sample_surface(&m, 100, 42).unwrap(),
            sample_surface(&m, 100, 43).unwrap()
        );
    }
}
