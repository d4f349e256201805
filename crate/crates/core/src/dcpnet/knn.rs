use super::DcpError;
use crate::autodiff::Scalar;
use crate::geometry::Vec3;
use crate::icp::SpatialIndex;
use alloc::vec::Vec;

/// Neighbor lists of a k-NN graph, row-major `n × k`. Each row is sorted by
/// distance, ties by index, and never contains the point itself.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct KnnGraph {
    pub k: usize,
    pub neighbors: Vec<usize>,
}

impl KnnGraph {
    pub fn len(&self) -> usize {
        if self.k == 0 {
            0
        } else {
            self.neighbors.len() / self.k
        }
    }

    pub fn is_empty(&self) -> bool {
        self.neighbors.is_empty()
    }

    pub fn row(&self, i: usize) -> &[usize] {
        &self.neighbors[i * self.k..(i + 1) * self.k]
    }
}

fn check_k(n: usize, k: usize) -> Result<(), DcpError> {
    if k == 0 || k >= n {
        return Err(DcpError::InvalidK { k, n });
    }
    Ok(())
}

/// Exact k-NN graph over 3D points.
pub fn knn_graph(points: &[Vec3], k: usize) -> Result<KnnGraph, DcpError> {
    check_k(points.len(), k)?;
    let index = SpatialIndex::new(points);
    let mut neighbors = Vec::with_capacity(points.len() * k);
    for (i, p) in points.iter().enumerate() {
        neighbors.extend(index.k_nearest(p, k, Some(i)).into_iter().map(|(j, _)| j));
    }
    Ok(KnnGraph { k, neighbors })
}

/// Exact k-NN graph over `n` feature rows of width `c` by exhaustive scan.
pub fn knn_features<T: Scalar>(
    features: &[T],
    n: usize,
    c: usize,
    k: usize,
) -> Result<KnnGraph, DcpError> {
    check_k(n, k)?;
    let mut neighbors = Vec::with_capacity(n * k);
    let mut cand: Vec<(T, usize)> = Vec::with_capacity(n);
    for i in 0..n {
        let fi = &features[i * c..(i + 1) * c];
        cand.clear();
        for j in (0..n).filter(|&j| j != i) {
            let d = fi
                .iter()
                .zip(&features[j * c..(j + 1) * c])
                .map(|(&a, &b)| (a - b) * (a - b))
                .sum::<T>();
            cand.push((d, j));
        }
        cand.sort_by(|a, b| {
            a.0.partial_cmp(&b.0)
                .unwrap_or(core::cmp::Ordering::Equal)
                .then(a.1.cmp(&b.1))
        });
        neighbors.extend(cand[..k].iter().map(|&(_, j)| j));
    }
    Ok(KnnGraph { k, neighbors })
}
