use crate::geometry::Point2;
use crate::scalar::Scalar;

/// Uniform bucket grid over a fixed point set, answering k-nearest queries.
#[derive(Debug, Clone)]
pub struct PointIndex<T> {
    points: Vec<Point2<T>>,
    origin: Point2<T>,
    cell: T,
    cols: usize,
    rows: usize,
    /// Bucket start offsets into `order`, length `cols * rows + 1`.
    starts: Vec<usize>,
    order: Vec<usize>,
}

impl<T: Scalar> PointIndex<T> {
    pub fn new(points: Vec<Point2<T>>, cell: T) -> Self {
        assert!(cell > T::zero(), "cell size must be positive");
        if points.is_empty() {
            return Self {
                points,
                origin: Point2::zero(),
                cell,
                cols: 0,
                rows: 0,
                starts: vec![0],
                order: Vec::new(),
            };
        }
        let (mut min, mut max) = (points[0], points[0]);
        for p in &points {
            min.x = min.x.min(p.x);
            min.y = min.y.min(p.y);
            max.x = max.x.max(p.x);
            max.y = max.y.max(p.y);
        }
        let cols = ((max.x - min.x) / cell).floor().to_usize().unwrap_or(0) + 1;
        let rows = ((max.y - min.y) / cell).floor().to_usize().unwrap_or(0) + 1;
        let mut counts = vec![0usize; cols * rows + 1];
        let bucket_of = |p: &Point2<T>| -> usize {
            let cx = ((p.x - min.x) / cell).floor().to_usize().unwrap_or(0).min(cols - 1);
            let cy = ((p.y - min.y) / cell).floor().to_usize().unwrap_or(0).min(rows - 1);
            cy * cols + cx
        };
        let buckets: Vec<usize> = points.iter().map(bucket_of).collect();
        for &b in &buckets {
            counts[b + 1] += 1;
        }
        for i in 1..counts.len() {
            counts[i] += counts[i - 1];
        }
        let starts = counts.clone();
        let mut fill = counts;
        let mut order = vec![0usize; points.len()];
        for (i, &b) in buckets.iter().enumerate() {
            order[fill[b]] = i;
            fill[b] += 1;
        }
        Self {
            points,
            origin: min,
            cell,
            cols,
            rows,
            starts,
            order,
        }
    }

    pub fn points(&self) -> &[Point2<T>] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Indices of the `k` points closest to `q`, ascending by distance with
    /// ties broken by index.
    pub fn nearest(&self, q: Point2<T>, k: usize) -> Vec<usize> {
        if self.points.is_empty() || k == 0 {
            return Vec::new();
        }
        let k = k.min(self.points.len());
        let fx = ((q.x - self.origin.x) / self.cell).floor();
        let fy = ((q.y - self.origin.y) / self.cell).floor();
        // Query cell, possibly outside the grid.
        let qx = fx.to_i64().unwrap_or(i64::MAX / 4);
        let qy = fy.to_i64().unwrap_or(i64::MAX / 4);
        let (cols, rows) = (self.cols as i64, self.rows as i64);

        // Chebyshev ring distance from the query cell to the grid.
        let gap = |v: i64, n: i64| if v < 0 { -v } else if v >= n { v - n + 1 } else { 0 };
        let first_ring = gap(qx, cols).max(gap(qy, rows));
        let last_ring = (qx - 0).abs().max((qx - (cols - 1)).abs())
            .max((qy - 0).abs().max((qy - (rows - 1)).abs()));

        let mut found: Vec<(T, usize)> = Vec::new();
        let mut ring = first_ring;
        while ring <= last_ring {
            self.visit_ring(qx, qy, ring, |i| {
                found.push((self.points[i].distance_squared(q), i));
            });
            if found.len() >= k {
                found.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap().then(a.1.cmp(&b.1)));
                found.truncate(k);
                // Anything in ring + 1 is at least `ring * cell` away.
                let reach = self.cell * T::c(ring as f64);
                if found[k - 1].0 <= reach * reach {
                    break;
                }
            }
            ring += 1;
        }
        found.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap().then(a.1.cmp(&b.1)));
        found.truncate(k);
        found.into_iter().map(|(_, i)| i).collect()
    }

    fn visit_ring(&self, qx: i64, qy: i64, ring: i64, mut f: impl FnMut(usize)) {
        let (cols, rows) = (self.cols as i64, self.rows as i64);
        let mut visit_cell = |cx: i64, cy: i64| {
            if cx < 0 || cy < 0 || cx >= cols || cy >= rows {
                return;
            }
            let b = (cy * cols + cx) as usize;
            for &i in &self.order[self.starts[b]..self.starts[b + 1]] {
                f(i);
            }
        };
        if ring == 0 {
            visit_cell(qx, qy);
            return;
        }
        for cx in (qx - ring)..=(qx + ring) {
            visit_cell(cx, qy - ring);
            visit_cell(cx, qy + ring);
        }
        for cy in (qy - ring + 1)..=(qy + ring - 1) {
            visit_cell(qx - ring, cy);
            visit_cell(qx + ring, cy);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn matches_exhaustive_sort() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let pts: Vec<Point2<f64>> = (0..300)
            .map(|_| Point2::new(rng.random_range(-50.0..50.0), rng.random_range(0.0..20.0)))
            .collect();
        let idx = PointIndex::new(pts.clone(), 3.0);
        for _ in 0..200 {
            let q = Point2::new(rng.random_range(-90.0..90.0), rng.random_range(-40.0..60.0));
            let k = rng.random_range(1..20);
            let mut brute: Vec<usize> = (0..pts.len()).collect();
            brute.sort_by(|&a, &b| {
                pts[a]
                    .distance_squared(q)
                    .partial_cmp(&pts[b].distance_squared(q))
                    .unwrap()
                    .then(a.cmp(&b))
            });
            brute.truncate(k);
            assert_eq!(idx.nearest(q, k), brute);
        }
    }

    #[test]
    fn empty_index() {
        let idx: PointIndex<f64> = PointIndex::new(vec![], 1.0);
        assert!(idx.nearest(Point2::zero(), 3).is_empty());
    }
}
