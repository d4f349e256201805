use super::{DataError, PointCloud};
use crate::geometry::{rotation_residual, Mat3, RigidTransform, Vec3};
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt::Write;

/// One `x y z` triple per line; `#` starts a comment.
pub fn parse_xyz(text: &str) -> Result<PointCloud, DataError> {
    let mut points = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let c: Vec<f64> = line
            .split_whitespace()
            .map(|t| {
                t.parse::<f64>().map_err(|_| DataError::Parse {
                    line: i + 1,
                    msg: format!("bad coordinate {t:?}"),
                })
            })
            .collect::<Result<_, _>>()?;
        if c.len() != 3 {
            return Err(DataError::Parse {
                line: i + 1,
                msg: format!("expected 3 values, found {}", c.len()),
            });
        }
        if c.iter().any(|x| !x.is_finite()) {
            return Err(DataError::Parse {
                line: i + 1,
                msg: "non-finite coordinate".into(),
            });
        }
        points.push(Vec3::new(c[0], c[1], c[2]));
    }
    Ok(PointCloud::new(points))
}

/// Shortest round-trip decimal for every coordinate, so parse∘format is exact.
pub fn format_xyz(p: &PointCloud) -> String {
    let mut s = String::with_capacity(p.len() * 48);
    for q in &p.points {
        let _ = writeln!(s, "{} {} {}", q.x, q.y, q.z);
    }
    s
}

/// Rotation rows on three lines, translation on the fourth.
pub fn format_gt(t: &RigidTransform) -> String {
    let v = t.to_row_major();
    let mut s = String::new();
    for row in v.chunks(3) {
        let _ = writeln!(s, "{} {} {}", row[0], row[1], row[2]);
    }
    s
}

/// Twelve whitespace-separated numbers, rotation row-major then translation.
/// Rotations off SO(3) by more than 1e-9 but less than 1e-4 (e.g. printed
/// with few digits) are projected back onto it; larger violations fail.
pub fn parse_gt(text: &str) -> Result<RigidTransform, DataError> {
    let mut vals = Vec::with_capacity(12);
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("");
        for t in line.split_whitespace() {
            let x = t.parse::<f64>().map_err(|_| DataError::Parse {
                line: i + 1,
                msg: format!("bad number {t:?}"),
            })?;
            vals.push(x);
        }
    }
    let last = text.lines().count().max(1);
    if vals.len() != 12 {
        return Err(DataError::Parse {
            line: last,
            msg: format!("expected 12 numbers, found {}", vals.len()),
        });
    }
    if vals.iter().any(|x| !x.is_finite()) {
        return Err(DataError::Parse {
            line: last,
            msg: "non-finite value".into(),
        });
    }
    let r = Mat3::new(
        vals[0], vals[1], vals[2], vals[3], vals[4], vals[5], vals[6], vals[7], vals[8],
    );
    let t = Vec3::new(vals[9], vals[10], vals[11]);
    let residual = rotation_residual(&r);
    if residual <= RigidTransform::ROTATION_TOL {
        Ok(RigidTransform {
            rotation: r,
            translation: t,
        })
    } else if residual <= 1e-4 {
        RigidTransform::from_approximate(r, t).map_err(|_| DataError::Parse {
            line: last,
            msg: "rotation is not orthogonal".into(),
        })
    } else {
        Err(DataError::Parse {
            line: last,
            msg: format!("rotation is not in SO(3) (residual {residual:e})"),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{rot_x, rot_z};

    #[test]
    fn parse_with_comments() {
        let p = parse_xyz("# header\n1 2 3\n\n  4.5 -1e-3 0 # trailing\n").unwrap();
        assert_eq!(
            p.points,
            alloc::vec![Vec3::new(1.0, 2.0, 3.0), Vec3::new(4.5, -1e-3, 0.0)]
        );
    }

    #[test]
    fn malformed_lines() {
        assert!(matches!(
            parse_xyz("1 2 3\n1 2\n"),
            Err(DataError::Parse { line: 2, .. })
        ));
        assert!(matches!(
            parse_xyz("1 2 a\n"),
            Err(DataError::Parse { line: 1, .. })
        ));
        assert!(matches!(
            parse_xyz("1 2 3 4\n"),
            Err(DataError::Parse { line: 1, .. })
        ));
    }

    #[test]
    fn xyz_text_is_lossless() {
        let p = PointCloud::new(alloc::vec![Vec3::new(0.1 + 0.2, 1.0 / 3.0, -7e-300)]);
        assert_eq!(parse_xyz(&format_xyz(&p)).unwrap(), p);
    }

    #[test]
    fn gt_round_trip() {
        let t = RigidTransform::new(rot_z(0.4) * rot_x(-1.1), Vec3::new(0.1, -0.25, 0.3)).unwrap();
        assert_eq!(parse_gt(&format_gt(&t)).unwrap(), t);
        assert!(parse_gt("1 0 0 0 1 0 0 0 1 0 0").is_err());
        assert!(parse_gt("2 0 0 0 1 0 0 0 1 0 0 0").is_err());
    }
}
