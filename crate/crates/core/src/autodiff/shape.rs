//! Index arithmetic shared by the forward and backward kernels.

use super::tensor::strides;
use alloc::vec;
use alloc::vec::Vec;

/// NumPy-style broadcast of two shapes, right-aligned.
pub(crate) fn broadcast_shape(a: &[usize], b: &[usize]) -> Option<Vec<usize>> {
    let r = a.len().max(b.len());
    let mut out = vec![0; r];
    for i in 0..r {
        let da = if i + a.len() >= r {
            a[i + a.len() - r]
        } else {
            1
        };
        let db = if i + b.len() >= r {
            b[i + b.len() - r]
        } else {
            1
        };
        out[i] = match (da, db) {
            (x, y) if x == y => x,
            (1, y) => y,
            (x, 1) => x,
            _ => return None,
        };
    }
    Some(out)
}

/// Strides of `shape` viewed inside a broadcast output of rank `rank`;
/// broadcast dimensions get stride 0.
pub(crate) fn aligned_strides(shape: &[usize], out: &[usize]) -> Vec<usize> {
    let rank = out.len();
    let own = strides(shape);
    let mut s = vec![0; rank];
    for (k, (&d, &st)) in shape.iter().zip(&own).enumerate() {
        let j = rank - shape.len() + k;
        s[j] = if d == 1 && out[j] != 1 { 0 } else { st };
    }
    s
}

/// Calls `f(out_offset, a_offset, b_offset)` for every element of `out`
/// in row-major order.
pub(crate) fn bcast_for_each(
    out: &[usize],
    sa: &[usize],
    sb: &[usize],
    mut f: impl FnMut(usize, usize, usize),
) {
    let r = out.len();
    if r == 0 {
        f(0, 0, 0);
        return;
    }
    let inner = out[r - 1];
    let (ia, ib) = (sa[r - 1], sb[r - 1]);
    let outer: usize = out[..r - 1].iter().product();
    if inner == 0 {
        return;
    }
    let mut idx = vec![0usize; r - 1];
    for row in 0..outer {
        let mut oa = 0;
        let mut ob = 0;
        for d in 0..r - 1 {
            oa += idx[d] * sa[d];
            ob += idx[d] * sb[d];
        }
        let base = row * inner;
        for j in 0..inner {
            f(base + j, oa + j * ia, ob + j * ib);
        }
        for d in (0..r - 1).rev() {
            idx[d] += 1;
            if idx[d] < out[d] {
                break;
            }
            idx[d] = 0;
        }
    }
}

/// `(outer, len, inner)` decomposition around `axis`.
pub(crate) fn axis_split(shape: &[usize], axis: usize) -> (usize, usize, usize) {
    let outer = shape[..axis].iter().product();
    let inner = shape[axis + 1..].iter().product();
    (outer, shape[axis], inner)
}

/// Copy of `data` (shape `shape`) with axes `d0` and `d1` exchanged.
pub(crate) fn swap_axes<T: Copy>(data: &[T], shape: &[usize], d0: usize, d1: usize) -> Vec<T> {
    let src = strides(shape);
    let mut out_shape = shape.to_vec();
    out_shape.swap(d0, d1);
    let mut view = src.clone();
    view.swap(d0, d1);
    let mut out = Vec::with_capacity(data.len());
    let zero = vec![0; shape.len()];
    bcast_for_each(&out_shape, &view, &zero, |_, ia, _| out.push(data[ia]));
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn broadcast_rules() {
        assert_eq!(broadcast_shape(&[4, 1, 3], &[5, 1]), Some(vec![4, 5, 3]));
        assert_eq!(broadcast_shape(&[2, 3], &[3]), Some(vec![2, 3]));
        assert_eq!(broadcast_shape(&[2, 3], &[2]), None);
        assert_eq!(broadcast_shape(&[], &[2]), Some(vec![2]));
    }

    #[test]
    fn swap_matches_manual_transpose() {
        let data: Vec<u32> = (0..24).collect();
        let t = swap_axes(&data, &[2, 3, 4], 1, 2);
        for b in 0..2 {
            for i in 0..3 {
                for j in 0..4 {
                    assert_eq!(t[b * 12 + j * 3 + i], data[b * 12 + i * 4 + j]);
                }
            }
        }
    }
}
