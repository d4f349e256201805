use crate::geometry::Vec3;
use alloc::collections::BinaryHeap;
use alloc::vec::Vec;
use core::cmp::Ordering;
use num_traits::Float;

const LEAF_SIZE: usize = 8;

#[derive(Debug, Clone)]
enum Node {
    Leaf {
        start: usize,
        end: usize,
    },
    Split {
        axis: usize,
        value: f64,
        left: usize,
        right: usize,
    },
}

/// Balanced k-d tree over a fixed point set with exact queries.
///
/// Distances compare as `(squared distance, point index)`, so among
/// equidistant points the lowest index wins, exactly as in a linear scan.
#[derive(Debug, Clone)]
pub struct SpatialIndex {
    points: Vec<Vec3>,
    order: Vec<usize>,
    nodes: Vec<Node>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct Candidate {
    d2: f64,
    index: usize,
}

impl Eq for Candidate {}

impl Ord for Candidate {
    fn cmp(&self, other: &Self) -> Ordering {
        self.d2
            .total_cmp(&other.d2)
            .then(self.index.cmp(&other.index))
    }
}

impl PartialOrd for Candidate {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl SpatialIndex {
    pub fn new(points: &[Vec3]) -> Self {
        let mut tree = SpatialIndex {
            points: points.to_vec(),
            order: (0..points.len()).collect(),
            nodes: Vec::new(),
        };
        if !points.is_empty() {
            tree.build(0, points.len());
        }
        tree
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn points(&self) -> &[Vec3] {
        &self.points
    }

    fn build(&mut self, start: usize, end: usize) -> usize {
        let id = self.nodes.len();
        if end - start <= LEAF_SIZE {
            self.nodes.push(Node::Leaf { start, end });
            return id;
        }
        let mut lo = [f64::INFINITY; 3];
        let mut hi = [f64::NEG_INFINITY; 3];
        for &i in &self.order[start..end] {
            for a in 0..3 {
                lo[a] = lo[a].min(self.points[i][a]);
                hi[a] = hi[a].max(self.points[i][a]);
            }
        }
        let axis = (0..3)
            .max_by(|&a, &b| (hi[a] - lo[a]).total_cmp(&(hi[b] - lo[b])))
            .unwrap_or(0);
        let mid = start + (end - start) / 2;
        let pts = &self.points;
        self.order[start..end].select_nth_unstable_by(mid - start, |&a, &b| {
            pts[a][axis].total_cmp(&pts[b][axis]).then(a.cmp(&b))
        });
        let value = self.points[self.order[mid]][axis];
        self.nodes.push(Node::Leaf { start: 0, end: 0 });
        let left = self.build(start, mid);
        let right = self.build(mid, end);
        self.nodes[id] = Node::Split {
            axis,
            value,
            left,
            right,
        };
        id
    }

    /// Exact nearest neighbor: `(index, distance)`. `None` on an empty index.
    pub fn nearest(&self, q: &Vec3) -> Option<(usize, f64)> {
        if self.points.is_empty() {
            return None;
        }
        let mut best = Candidate {
            d2: f64::INFINITY,
            index: usize::MAX,
        };
        self.nearest_rec(0, q, &mut best);
        Some((best.index, Float::sqrt(best.d2)))
    }

    fn nearest_rec(&self, node: usize, q: &Vec3, best: &mut Candidate) {
        match self.nodes[node] {
            Node::Leaf { start, end } => {
                for &i in &self.order[start..end] {
                    let c = Candidate {
                        d2: (self.points[i] - q).norm_squared(),
                        index: i,
                    };
                    if c < *best {
                        *best = c;
                    }
                }
            }
            Node::Split {
                axis,
                value,
                left,
                right,
            } => {
                let diff = q[axis] - value;
                let (near, far) = if diff < 0.0 {
                    (left, right)
                } else {
                    (right, left)
                };
                self.nearest_rec(near, q, best);
                // `<=` keeps equidistant points on the far side in play for the index tie-break
                if diff * diff <= best.d2 {
                    self.nearest_rec(far, q, best);
                }
            }
        }
    }

    /// The `k` nearest points in ascending `(distance, index)` order, skipping
    /// `exclude`. Returns fewer than `k` when the index is too small.
    pub fn k_nearest(&self, q: &Vec3, k: usize, exclude: Option<usize>) -> Vec<(usize, f64)> {
        if k == 0 || self.points.is_empty() {
            return Vec::new();
        }
        let mut heap = BinaryHeap::with_capacity(k + 1);
        self.knn_rec(0, q, k, exclude, &mut heap);
        let mut out: Vec<Candidate> = heap.into_vec();
        out.sort_unstable();
        out.into_iter()
            .map(|c| (c.index, Float::sqrt(c.d2)))
            .collect()
    }

    fn knn_rec(
        &self,
        node: usize,
        q: &Vec3,
        k: usize,
        exclude: Option<usize>,
        heap: &mut BinaryHeap<Candidate>,
    ) {
        match self.nodes[node] {
            Node::Leaf { start, end } => {
                for &i in &self.order[start..end] {
                    if Some(i) == exclude {
                        continue;
                    }
                    let c = Candidate {
                        d2: (self.points[i] - q).norm_squared(),
                        index: i,
                    };
                    if heap.len() < k {
                        heap.push(c);
                    } else if c < *heap.peek().expect("heap holds k items") {
                        heap.pop();
                        heap.push(c);
                    }
                }
            }
            Node::Split {
                axis,
                value,
                left,
                right,
            } => {
                let diff = q[axis] - value;
                let (near, far) = if diff < 0.0 {
                    (left, right)
                } else {
                    (right, left)
                };
                self.knn_rec(near, q, k, exclude, heap);
                if heap.len() < k || diff * diff <= heap.peek().map_or(f64::INFINITY, |c| c.d2) {
                    self.knn_rec(far, q, k, exclude, heap);
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn brute_nearest(pts: &[Vec3], q: &Vec3) -> (usize, f64) {
        let mut best = (usize::MAX, f64::INFINITY);
        for (i, p) in pts.iter().enumerate() {
            let d2 = (p - q).norm_squared();
            if d2 < best.1 {
                best = (i, d2);
            }
        }
        (best.0, best.1.sqrt())
    }

    fn random_points(rng: &mut ChaCha8Rng, n: usize) -> Vec<Vec3> {
        (0..n)
            .map(|_| {
                Vec3::new(
                    rng.random_range(-1.0..1.0),
                    rng.random_range(-1.0..1.0),
                    rng.random_range(-1.0..1.0),
                )
            })
            .collect()
    }

    #[test]
    fn exact_hit() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let pts = random_points(&mut rng, 100);
        let t = SpatialIndex::new(&pts);
        assert_eq!(t.nearest(&pts[37]), Some((37, 0.0)));
    }

    #[test]
    fn ties_go_to_lowest_index() {
        let pts = [Vec3::new(1.0, 0.0, 0.0), Vec3::new(-1.0, 0.0, 0.0)];
        let t = SpatialIndex::new(&pts);
        assert_eq!(t.nearest(&Vec3::zeros()).unwrap().0, 0);
        // many duplicates spread across leaves
        let mut many = alloc::vec![Vec3::new(0.5, 0.5, 0.5); 200];
        many.extend(random_points(&mut ChaCha8Rng::seed_from_u64(2), 200));
        let mut dup = many.clone();
        dup.reverse();
        let t = SpatialIndex::new(&dup);
        assert_eq!(t.nearest(&Vec3::new(0.5, 0.5, 0.5)).unwrap().0, 200);
    }

    #[test]
    fn matches_brute_force() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let pts = random_points(&mut rng, 2000);
        let t = SpatialIndex::new(&pts);
        for _ in 0..1000 {
            let q = Vec3::new(
                rng.random_range(-1.2..1.2),
                rng.random_range(-1.2..1.2),
                rng.random_range(-1.2..1.2),
            );
            assert_eq!(t.nearest(&q).unwrap(), brute_nearest(&pts, &q));
        }
    }

    #[test]
    fn grid_ties_match_brute_force() {
        let mut pts = Vec::new();
        for i in 0..6 {
            for j in 0..6 {
                for k in 0..6 {
                    pts.push(Vec3::new(i as f64, j as f64, k as f64));
                }
            }
        }
        let t = SpatialIndex::new(&pts);
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..500 {
            let q = Vec3::new(
                rng.random_range(0..12) as f64 * 0.5,
                rng.random_range(0..12) as f64 * 0.5,
                rng.random_range(0..12) as f64 * 0.5,
            );
            assert_eq!(t.nearest(&q).unwrap(), brute_nearest(&pts, &q));
        }
    }

    #[test]
    fn k_nearest_matches_sorting() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let pts = random_points(&mut rng, 500);
        let t = SpatialIndex::new(&pts);
        for qi in 0..100 {
            let q = pts[qi];
            let mut all: Vec<(usize, f64)> = pts
                .iter()
                .enumerate()
                .filter(|(i, _)| *i != qi)
                .map(|(i, p)| (i, (p - q).norm_squared()))
                .collect();
            all.sort_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)));
            let got: Vec<usize> = t
                .k_nearest(&q, 20, Some(qi))
                .into_iter()
                .map(|c| c.0)
                .collect();
            let want: Vec<usize> = all[..20].iter().map(|c| c.0).collect();
            assert_eq!(got, want);
        }
        assert_eq!(
            SpatialIndex::new(&pts[..3])
                .k_nearest(&q0(), 10, None)
                .len(),
            3
        );
    }

    fn q0() -> Vec3 {
        Vec3::zeros()
    }

    #[test]
    fn empty_index() {
        assert!(SpatialIndex::new(&[]).nearest(&Vec3::zeros()).is_none());
    }
}
