//! Static 2-d tree over planar points.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use crate::error::{Error, Result};
use crate::sample::Coord;

const LEAF_SIZE: usize = 8;

#[derive(Debug, Clone)]
pub struct SpatialIndex {
    points: Vec<Coord>,
    order: Vec<u32>,
    /// Split axis for the node whose pivot sits at this position of `order`.
    axis: Vec<u8>,
}

#[derive(Debug, Clone, Copy)]
struct Candidate {
    dist_sq: f64,
    index: u32,
}

impl PartialEq for Candidate {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}
impl Eq for Candidate {}
impl PartialOrd for Candidate {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Candidate {
    fn cmp(&self, other: &Self) -> Ordering {
        self.dist_sq
            .total_cmp(&other.dist_sq)
            .then(self.index.cmp(&other.index))
    }
}

#[inline]
fn coord_axis(c: &Coord, axis: u8) -> f64 {
    if axis == 0 {
        c.u
    } else {
        c.v
    }
}

impl SpatialIndex {
    pub fn new(points: Vec<Coord>) -> Self {
        let n = points.len();
        let mut order: Vec<u32> = (0..n as u32).collect();
        let mut axis = vec![0u8; n];
        build(&points, &mut order, &mut axis, 0, n);
        SpatialIndex {
            points,
            order,
            axis,
        }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn points(&self) -> &[Coord] {
        &self.points
    }

    /// The `min(k, len)` nearest points ordered by non-decreasing distance;
    /// equal distances are ordered by lower index.
    pub fn knn(&self, query: Coord, k: usize) -> Result<Vec<usize>> {
        Ok(self
            .knn_with_dist_sq(query, k)?
            .into_iter()
            .map(|(i, _)| i)
            .collect())
    }

    /// Like [`knn`](Self::knn) but also returns squared distances.
    pub fn knn_with_dist_sq(&self, query: Coord, k: usize) -> Result<Vec<(usize, f64)>> {
        if self.points.is_empty() {
            return Err(Error::EmptyIndex);
        }
        if k == 0 {
            return Err(Error::InvalidParameter("k must be ≥ 1".into()));
        }
        let k = k.min(self.points.len());
        let mut heap = BinaryHeap::with_capacity(k + 1);
        self.knn_rec(query, k, 0, self.points.len(), &mut heap);
        let mut out = heap.into_vec();
        out.sort_unstable();
        Ok(out
            .into_iter()
            .map(|c| (c.index as usize, c.dist_sq))
            .collect())
    }

    pub fn nearest(&self, query: Coord) -> Result<usize> {
        Ok(self.knn(query, 1)?[0])
    }

    fn knn_rec(&self, q: Coord, k: usize, lo: usize, hi: usize, heap: &mut BinaryHeap<Candidate>) {
        if hi - lo <= LEAF_SIZE {
            for &idx in &self.order[lo..hi] {
                offer(heap, k, q.dist_sq(&self.points[idx as usize]), idx);
            }
            return;
        }
        let mid = lo + (hi - lo) / 2;
        let pivot_idx = self.order[mid];
        let pivot = self.points[pivot_idx as usize];
        let axis = self.axis[mid];
        offer(heap, k, q.dist_sq(&pivot), pivot_idx);
        let diff = coord_axis(&q, axis) - coord_axis(&pivot, axis);
        let (near, far) = if diff <= 0.0 {
            ((lo, mid), (mid + 1, hi))
        } else {
            ((mid + 1, hi), (lo, mid))
        };
        if near.0 < near.1 {
            self.knn_rec(q, k, near.0, near.1, heap);
        }
        if far.0 < far.1 {
            let plane = diff * diff;
            // `<=`: a far point at equal distance may still win on index
            if heap.len() < k || plane <= heap.peek().map_or(f64::INFINITY, |c| c.dist_sq) {
                self.knn_rec(q, k, far.0, far.1, heap);
            }
        }
    }

    /// Indices of all points with distance `<= radius`, ascending.
    pub fn within_radius(&self, query: Coord, radius: f64) -> Vec<usize> {
        let mut out = Vec::new();
        if !self.points.is_empty() && radius >= 0.0 {
            self.radius_rec(query, radius * radius, 0, self.points.len(), &mut out);
        }
        out.sort_unstable();
        out
    }

    fn radius_rec(&self, q: Coord, r2: f64, lo: usize, hi: usize, out: &mut Vec<usize>) {
        if hi - lo <= LEAF_SIZE {
            for &idx in &self.order[lo..hi] {
                if q.dist_sq(&self.points[idx as usize]) <= r2 {
                    out.push(idx as usize);
                }
            }
            return;
        }
        let mid = lo + (hi - lo) / 2;
        let pivot_idx = self.order[mid];
        let pivot = self.points[pivot_idx as usize];
        let axis = self.axis[mid];
        if q.dist_sq(&pivot) <= r2 {
            out.push(pivot_idx as usize);
        }
        let diff = coord_axis(&q, axis) - coord_axis(&pivot, axis);
        let plane = diff * diff;
        if lo < mid && (diff <= 0.0 || plane <= r2) {
            self.radius_rec(q, r2, lo, mid, out);
        }
        if mid + 1 < hi && (diff >= 0.0 || plane <= r2) {
            self.radius_rec(q, r2, mid + 1, hi, out);
        }
    }
}

fn offer(heap: &mut BinaryHeap<Candidate>, k: usize, dist_sq: f64, index: u32) {
    let c = Candidate { dist_sq, index };
    if heap.len() < k {
        heap.push(c);
    } else if let Some(worst) = heap.peek() {
        if c < *worst {
            heap.pop();
            heap.push(c);
        }
    }
}

fn build(points: &[Coord], order: &mut [u32], axis: &mut [u8], lo: usize, hi: usize) {
    if hi - lo <= LEAF_SIZE {
        return;
    }
    let (mut min_u, mut max_u, mut min_v, mut max_v) = (
        f64::INFINITY,
        f64::NEG_INFINITY,
        f64::INFINITY,
        f64::NEG_INFINITY,
    );
    for &i in &order[lo..hi] {
        let p = points[i as usize];
        min_u = min_u.min(p.u);
        max_u = max_u.max(p.u);
        min_v = min_v.min(p.v);
        max_v = max_v.max(p.v);
    }
    let ax = u8::from(max_v - min_v > max_u - min_u);
    let mid = lo + (hi - lo) / 2;
    order[lo..hi].select_nth_unstable_by(mid - lo, |a, b| {
        coord_axis(&points[*a as usize], ax)
            .total_cmp(&coord_axis(&points[*b as usize], ax))
            .then(a.cmp(b))
    });
    axis[mid] = ax;
    build(points, order, axis, lo, mid);
    build(points, order, axis, mid + 1, hi);
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn brute_knn(points: &[Coord], q: Coord, k: usize) -> Vec<usize> {
        let mut all: Vec<(f64, usize)> = points
            .iter()
            .enumerate()
            .map(|(i, p)| (q.dist_sq(p), i))
            .collect();
        all.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        all.into_iter().take(k).map(|(_, i)| i).collect()
    }

    #[test]
    fn query_at_indexed_point() {
        let pts: Vec<_> = (0..50)
            .map(|i| Coord::new(i as f64 * 3.0, (i % 7) as f64))
            .collect();
        let idx = SpatialIndex::new(pts.clone());
        for (i, p) in pts.iter().enumerate() {
            assert_eq!(idx.knn(*p, 1).unwrap(), vec![i]);
        }
    }

    #[test]
    fn collinear_first_two() {
        let pts = vec![
            Coord::new(3.0, 0.0),
            Coord::new(1.0, 0.0),
            Coord::new(2.0, 0.0),
        ];
        let idx = SpatialIndex::new(pts);
        assert_eq!(idx.knn(Coord::new(0.0, 0.0), 2).unwrap(), vec![1, 2]);
        assert_eq!(idx.knn(Coord::new(0.0, 0.0), 10).unwrap().len(), 3);
    }

    #[test]
    fn ties_go_to_lower_index() {
        let pts = vec![Coord::new(1.0, 0.0); 20];
        let idx = SpatialIndex::new(pts);
        assert_eq!(idx.knn(Coord::new(0.0, 0.0), 3).unwrap(), vec![0, 1, 2]);
        let ring = vec![
            Coord::new(1.0, 0.0),
            Coord::new(0.0, 1.0),
            Coord::new(-1.0, 0.0),
            Coord::new(0.0, -1.0),
        ];
        let idx = SpatialIndex::new(ring);
        assert_eq!(idx.nearest(Coord::new(0.0, 0.0)).unwrap(), 0);
    }

    #[test]
    fn empty_and_bad_k() {
        let idx = SpatialIndex::new(vec![]);
        assert!(matches!(
            idx.knn(Coord::new(0.0, 0.0), 1),
            Err(Error::EmptyIndex)
        ));
        assert!(idx.within_radius(Coord::new(0.0, 0.0), 5.0).is_empty());
        let idx = SpatialIndex::new(vec![Coord::new(0.0, 0.0)]);
        assert!(idx.knn(Coord::new(0.0, 0.0), 0).is_err());
    }

    #[test]
    fn matches_brute_force_random() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let pts: Vec<_> = (0..1000)
            .map(|_| Coord::new(rng.random_range(0.0..1000.0), rng.random_range(0.0..1000.0)))
            .collect();
        let idx = SpatialIndex::new(pts.clone());
        for _ in 0..100 {
            let q = Coord::new(
                rng.random_range(-50.0..1050.0),
                rng.random_range(-50.0..1050.0),
            );
            assert_eq!(idx.knn(q, 25).unwrap(), brute_knn(&pts, q, 25));
            let r = rng.random_range(0.0..200.0);
            let brute: Vec<usize> = (0..pts.len())
                .filter(|&i| q.dist_sq(&pts[i]) <= r * r)
                .collect();
            assert_eq!(idx.within_radius(q, r), brute);
        }
    }

    #[test]
    fn integer_grid_with_many_ties() {
        let pts: Vec<_> = (0..400)
            .map(|i| Coord::new((i % 20) as f64, (i / 20) as f64))
            .collect();
        let idx = SpatialIndex::new(pts.clone());
        for q in [
            Coord::new(10.0, 10.0),
            Coord::new(0.5, 0.5),
            Coord::new(-3.0, 7.0),
        ] {
            for k in [1, 4, 9, 13, 50] {
                assert_eq!(idx.knn(q, k).unwrap(), brute_knn(&pts, q, k));
            }
        }
    }
}
