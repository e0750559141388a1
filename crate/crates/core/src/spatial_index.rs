//! Uniform-grid index over a static point set: radius queries and exact k-NN.
//!
//! Results depend only on exact squared distances and point indices, never on
//! the cell size. Ties are broken by ascending index.

use std::cmp::Ordering;
use std::collections::{BinaryHeap, HashMap};

use nalgebra::Vector3;

use crate::error::{Error, Result};

type CellKey = [i64; 3];

#[derive(Debug, Clone)]
pub struct UniformGrid3D {
    cell_size: f64,
    min: Vector3<f64>,
    max: Vector3<f64>,
    points: Vec<Vector3<f64>>,
    /// Point indices grouped by cell, ascending inside each cell.
    order: Vec<u32>,
    cells: HashMap<CellKey, (u32, u32)>,
    key_lo: CellKey,
    key_hi: CellKey,
}

#[derive(Clone, Copy)]
struct Candidate {
    dist2: f64,
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
        self.dist2
            .total_cmp(&other.dist2)
            .then(self.index.cmp(&other.index))
    }
}

impl UniformGrid3D {
    pub fn build(points: &[Vector3<f64>], cell_size: f64) -> Result<Self> {
        Self::from_points(points.to_vec(), cell_size)
    }

    /// Takes ownership of `points`; they stay reachable through [`Self::points`].
    pub fn from_points(points: Vec<Vector3<f64>>, cell_size: f64) -> Result<Self> {
        if !(cell_size > 0.0 && cell_size.is_finite()) {
            return Err(Error::InvalidParameter {
                name: "cell_size",
                detail: format!("{cell_size} is not a positive finite length"),
            });
        }
        if points.is_empty() {
            return Err(Error::EmptyCloud);
        }
        if u32::try_from(points.len()).is_err() {
            return Err(Error::InvalidParameter {
                name: "points",
                detail: "more than u32::MAX points".into(),
            });
        }
        if let Some(i) = points.iter().position(|p| !p.iter().all(|c| c.is_finite())) {
            return Err(Error::NonFinite { index: i });
        }
        let (mut min, mut max) = (points[0], points[0]);
        for p in &points {
            min = min.inf(p);
            max = max.sup(p);
        }
        let key = |p: &Vector3<f64>| -> CellKey {
            let r = (p - min) / cell_size;
            [r.x.floor() as i64, r.y.floor() as i64, r.z.floor() as i64]
        };
        let mut keyed: Vec<(CellKey, u32)> = points
            .iter()
            .enumerate()
            .map(|(i, p)| (key(p), i as u32))
            .collect();
        keyed.sort_unstable();

        let mut cells = HashMap::new();
        let mut order = Vec::with_capacity(points.len());
        let mut key_lo = [i64::MAX; 3];
        let mut key_hi = [i64::MIN; 3];
        let mut start = 0usize;
        while start < keyed.len() {
            let k = keyed[start].0;
            let mut end = start;
            while end < keyed.len() && keyed[end].0 == k {
                order.push(keyed[end].1);
                end += 1;
            }
            cells.insert(k, (start as u32, (end - start) as u32));
            for a in 0..3 {
                key_lo[a] = key_lo[a].min(k[a]);
                key_hi[a] = key_hi[a].max(k[a]);
            }
            start = end;
        }
        Ok(Self {
            cell_size,
            min,
            max,
            points,
            order,
            cells,
            key_lo,
            key_hi,
        })
    }

    /// Cell size suited to k-NN queries: four times an estimate of the
    /// average point spacing, treating the set as a surface sample.
    pub fn knn_cell_size(points: &[Vector3<f64>]) -> f64 {
        let Some(first) = points.first() else {
            return 1.0;
        };
        let (lo, hi) = points
            .iter()
            .fold((*first, *first), |(lo, hi), p| (lo.inf(p), hi.sup(p)));
        let e = hi - lo;
        let n = points.len() as f64;
        let area = (e.x * e.y).max(e.x * e.z).max(e.y * e.z);
        let spacing = if area > 0.0 {
            (area / n).sqrt()
        } else if e.amax() > 0.0 {
            e.amax() / n
        } else {
            1.0
        };
        4.0 * spacing
    }

    pub fn cell_size(&self) -> f64 {
        self.cell_size
    }

    pub fn bounds(&self) -> (Vector3<f64>, Vector3<f64>) {
        (self.min, self.max)
    }

    pub fn points(&self) -> &[Vector3<f64>] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn occupied_cells(&self) -> usize {
        self.cells.len()
    }

    /// Cell key of an indexed or query position.
    pub fn cell_of(&self, p: &Vector3<f64>) -> [i64; 3] {
        let r = (p - self.min) / self.cell_size;
        [r.x.floor() as i64, r.y.floor() as i64, r.z.floor() as i64]
    }

    /// Indices stored in the cell with key `key`.
    pub fn cell_members(&self, key: [i64; 3]) -> &[u32] {
        match self.cells.get(&key) {
            Some(&(start, len)) => &self.order[start as usize..(start + len) as usize],
            None => &[],
        }
    }

    /// Calls `visit(index, squared_distance)` for every point within `radius`
    /// (inclusive) of `center`, in no particular order.
    pub fn for_each_within(
        &self,
        center: &Vector3<f64>,
        radius: f64,
        mut visit: impl FnMut(usize, f64),
    ) {
        if !(radius >= 0.0) {
            return;
        }
        let r2 = radius * radius;
        // widen the cell range slightly so rounding in the key computation never drops a cell
        let reach = radius * (1.0 + 1e-12) + 1e-12 * self.cell_size;
        let lo = self.cell_of(&center.add_scalar(-reach));
        let hi = self.cell_of(&center.add_scalar(reach));
        let mut span = 1u128;
        let mut range = [(0i64, 0i64); 3];
        for a in 0..3 {
            let l = lo[a].max(self.key_lo[a]);
            let h = hi[a].min(self.key_hi[a]);
            if l > h {
                return;
            }
            range[a] = (l, h);
            span *= (h - l + 1) as u128;
        }
        let mut check = |members: &[u32]| {
            for &i in members {
                let d2 = (self.points[i as usize] - center).norm_squared();
                if d2 <= r2 {
                    visit(i as usize, d2);
                }
            }
        };
        if span > self.cells.len() as u128 {
            for (k, &(start, len)) in &self.cells {
                if (0..3).all(|a| (range[a].0..=range[a].1).contains(&k[a])) {
                    check(&self.order[start as usize..(start + len) as usize]);
                }
            }
        } else {
            for x in range[0].0..=range[0].1 {
                for y in range[1].0..=range[1].1 {
                    for z in range[2].0..=range[2].1 {
                        check(self.cell_members([x, y, z]));
                    }
                }
            }
        }
    }

    /// Indices of all points within `radius` (inclusive) of `center`, ascending.
    pub fn query_radius(&self, center: &Vector3<f64>, radius: f64) -> Vec<usize> {
        let mut out = Vec::new();
        self.for_each_within(center, radius, |i, _| out.push(i));
        out.sort_unstable();
        out
    }

    /// The `k` nearest indices ordered by distance, then index. Returns every
    /// point when fewer than `k` exist.
    pub fn knn(&self, center: &Vector3<f64>, k: usize) -> Vec<usize> {
        self.knn_with_distances(center, k)
            .into_iter()
            .map(|(i, _)| i)
            .collect()
    }

    /// Like [`Self::knn`] but also returns squared distances.
    pub fn knn_with_distances(&self, center: &Vector3<f64>, k: usize) -> Vec<(usize, f64)> {
        let k = k.min(self.points.len());
        if k == 0 {
            return Vec::new();
        }
        let q = self.cell_of(center);
        let max_ring = (0..3)
            .map(|a| {
                (q[a] - self.key_lo[a])
                    .abs()
                    .max((self.key_hi[a] - q[a]).abs())
            })
            .max()
            .unwrap_or(0);
        let mut heap: BinaryHeap<Candidate> = BinaryHeap::with_capacity(k + 1);
        let offer = |members: &[u32], heap: &mut BinaryHeap<Candidate>| {
            for &i in members {
                let c = Candidate {
                    dist2: (self.points[i as usize] - center).norm_squared(),
                    index: i,
                };
                if heap.len() < k {
                    heap.push(c);
                } else if c < *heap.peek().unwrap() {
                    heap.pop();
                    heap.push(c);
                }
            }
        };
        for d in 0..=max_ring {
            self.visit_shell(q, d, |key| offer(self.cell_members(key), &mut heap));
            if heap.len() == k {
                // anything in ring d+1 or beyond is at least d cells away
                let bound = d as f64 * self.cell_size * (1.0 - 1e-9);
                if heap.peek().unwrap().dist2 < bound * bound {
                    break;
                }
            }
        }
        let mut out: Vec<Candidate> = heap.into_vec();
        out.sort_unstable();
        out.into_iter()
            .map(|c| (c.index as usize, c.dist2))
            .collect()
    }

    /// Visits the keys of occupied-range cells at Chebyshev distance exactly `d` from `q`.
    fn visit_shell(&self, q: CellKey, d: i64, mut visit: impl FnMut(CellKey)) {
        let clip = |a: usize, lo: i64, hi: i64| (lo.max(self.key_lo[a]), hi.min(self.key_hi[a]));
        let (x0, x1) = clip(0, q[0] - d, q[0] + d);
        let (y0, y1) = clip(1, q[1] - d, q[1] + d);
        let (z0, z1) = clip(2, q[2] - d, q[2] + d);
        for x in x0..=x1 {
            let x_edge = (x - q[0]).abs() == d;
            for y in y0..=y1 {
                if x_edge || (y - q[1]).abs() == d {
                    for z in z0..=z1 {
                        visit([x, y, z]);
                    }
                } else {
                    // interior column of the shell: only its two caps, d > 0 here
                    for z in [q[2] - d, q[2] + d] {
                        if (z0..=z1).contains(&z) {
                            visit([x, y, z]);
                        }
                    }
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_points(n: usize, seed: u64) -> Vec<Vector3<f64>> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n)
            .map(|_| Vector3::new(rng.random(), rng.random(), rng.random::<f64>() * 0.3))
            .collect()
    }

    fn scan_radius(pts: &[Vector3<f64>], c: &Vector3<f64>, r: f64) -> Vec<usize> {
        (0..pts.len())
            .filter(|&i| (pts[i] - c).norm_squared() <= r * r)
            .collect()
    }

    fn sort_knn(pts: &[Vector3<f64>], c: &Vector3<f64>, k: usize) -> Vec<usize> {
        let mut idx: Vec<usize> = (0..pts.len()).collect();
        idx.sort_by(|&a, &b| {
            (pts[a] - c)
                .norm_squared()
                .total_cmp(&(pts[b] - c).norm_squared())
                .then(a.cmp(&b))
        });
        idx.truncate(k);
        idx
    }

    #[test]
    fn single_point_single_cell() {
        let g = UniformGrid3D::build(&[Vector3::new(1.0, 2.0, 3.0)], 0.5).unwrap();
        assert_eq!(g.occupied_cells(), 1);
    }

    #[test]
    fn cube_corners_share_a_large_cell() {
        let pts: Vec<_> = (0..8)
            .map(|i| Vector3::new((i & 1) as f64, ((i >> 1) & 1) as f64, ((i >> 2) & 1) as f64))
            .collect();
        let g = UniformGrid3D::build(&pts, 1.5).unwrap();
        assert_eq!(g.occupied_cells(), 1);
    }

    #[test]
    fn rejects_bad_input() {
        assert!(matches!(
            UniformGrid3D::build(&[Vector3::new(f64::NAN, 0.0, 0.0)], 1.0),
            Err(Error::NonFinite { index: 0 })
        ));
        assert!(UniformGrid3D::build(&[Vector3::zeros()], 0.0).is_err());
        assert!(matches!(
            UniformGrid3D::build(&[], 1.0),
            Err(Error::EmptyCloud)
        ));
    }

    #[test]
    fn membership_matches_floor_oracle() {
        let pts = random_points(10_000, 1);
        let cs = 0.07;
        let g = UniformGrid3D::build(&pts, cs).unwrap();
        let min = pts.iter().fold(pts[0], |m, p| m.inf(p));
        let mut seen = vec![0u32; pts.len()];
        let mut expected_cells = std::collections::HashSet::new();
        for (i, p) in pts.iter().enumerate() {
            let key = [
                ((p.x - min.x) / cs).floor() as i64,
                ((p.y - min.y) / cs).floor() as i64,
                ((p.z - min.z) / cs).floor() as i64,
            ];
            expected_cells.insert(key);
            assert!(g.cell_members(key).contains(&(i as u32)));
        }
        for key in &expected_cells {
            for &m in g.cell_members(*key) {
                seen[m as usize] += 1;
            }
        }
        assert!(seen.iter().all(|&c| c == 1));
        assert_eq!(g.occupied_cells(), expected_cells.len());
    }

    #[test]
    fn radius_zero_and_gap() {
        let pts = vec![Vector3::zeros(), Vector3::x(), Vector3::new(2.0, 0.0, 0.0)];
        let g = UniformGrid3D::build(&pts, 0.3).unwrap();
        assert_eq!(g.query_radius(&Vector3::x(), 0.0), vec![1]);
        assert!(g.query_radius(&Vector3::new(0.5, 0.0, 0.0), 0.4).is_empty());
    }

    #[test]
    fn radius_matches_linear_scan() {
        let pts = random_points(10_000, 2);
        let g = UniformGrid3D::build(&pts, 0.05).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..100 {
            let c = Vector3::new(rng.random(), rng.random(), rng.random::<f64>() * 0.3);
            let r = rng.random::<f64>() * 0.2;
            assert_eq!(g.query_radius(&c, r), scan_radius(&pts, &c, r));
        }
    }

    #[test]
    fn knn_hand_case() {
        let pts = vec![Vector3::zeros(), Vector3::x(), Vector3::new(2.0, 0.0, 0.0)];
        let g = UniformGrid3D::build(&pts, 0.25).unwrap();
        assert_eq!(g.knn(&Vector3::new(0.6, 0.0, 0.0), 2), vec![1, 0]);
        assert_eq!(g.knn(&Vector3::new(2.0, 0.0, 0.0), 1), vec![2]);
        assert_eq!(g.knn(&Vector3::zeros(), 10), vec![0, 1, 2]);
    }

    #[test]
    fn knn_matches_sort_oracle() {
        let pts = random_points(10_000, 4);
        let g = UniformGrid3D::build(&pts, UniformGrid3D::knn_cell_size(&pts)).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for q in 0..100 {
            // some queries start well outside the point set
            let scale = if q % 10 == 0 { 3.0 } else { 1.0 };
            let c = Vector3::new(rng.random(), rng.random(), rng.random()) * scale;
            let got = g.knn(&c, 64);
            assert_eq!(got, sort_knn(&pts, &c, 64));
            let d: Vec<f64> = got.iter().map(|&i| (pts[i] - c).norm()).collect();
            assert!(d.windows(2).all(|w| w[0] <= w[1]));
        }
    }

    #[test]
    fn knn_ties_by_index() {
        // four points on a circle around the query
        let pts = vec![
            Vector3::new(1.0, 0.0, 0.0),
            Vector3::new(0.0, 1.0, 0.0),
            Vector3::new(-1.0, 0.0, 0.0),
            Vector3::new(0.0, -1.0, 0.0),
        ];
        let g = UniformGrid3D::build(&pts, 0.3).unwrap();
        assert_eq!(g.knn(&Vector3::zeros(), 2), vec![0, 1]);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]
        #[test]
        fn results_do_not_depend_on_cell_size(
            seed in 0u64..1000,
            cs_a in 0.01f64..2.0,
            cs_b in 0.01f64..2.0,
            r in 0.0f64..0.5,
            k in 1usize..40,
        ) {
            let pts = random_points(300, seed);
            let a = UniformGrid3D::build(&pts, cs_a).unwrap();
            let b = UniformGrid3D::build(&pts, cs_b).unwrap();
            let c = pts[(seed as usize) % pts.len()] + Vector3::new(0.01, -0.02, 0.005);
            prop_assert_eq!(a.query_radius(&c, r), b.query_radius(&c, r));
            prop_assert_eq!(a.knn(&c, k), b.knn(&c, k));
        }
    }
}
