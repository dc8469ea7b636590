use std::cmp::Ordering;

use super::{dist2, Point};
use crate::error::{Error, Result};
use crate::tensor::IndexArray;

/// K nearest neighbors of each query row among `data` rows of width `dim`.
///
/// Rows are sorted by ascending squared Euclidean distance with ties broken
/// by lower index. With `include_self` the queries must be the data rows
/// themselves and row `i` always starts with `i`.
pub fn knn_rows(data: &[f64], queries: &[f64], dim: usize, k: usize, include_self: bool) -> Result<IndexArray> {
    let m = data.len() / dim;
    let q = queries.len() / dim;
    if k == 0 || k > m {
        return Err(Error::InvalidArgument(format!("knn: K = {k} but only {m} points")));
    }
    if include_self && q != m {
        return Err(Error::InvalidArgument(
            "knn: include_self requires the queries to be the point set".into(),
        ));
    }
    let mut out = Vec::with_capacity(q * k);
    let mut cand: Vec<(f64, usize)> = Vec::with_capacity(m);
    for qi in 0..q {
        let query = &queries[qi * dim..(qi + 1) * dim];
        cand.clear();
        for j in 0..m {
            if include_self && j == qi {
                continue;
            }
            let row = &data[j * dim..(j + 1) * dim];
            let d: f64 = row.iter().zip(query).map(|(a, b)| (a - b) * (a - b)).sum();
            cand.push((d, j));
        }
        let want = if include_self { k - 1 } else { k };
        if include_self {
            out.push(qi);
        }
        if want > 0 {
            if want < cand.len() {
                cand.select_nth_unstable_by(want - 1, cmp_candidate);
                cand.truncate(want);
            }
            cand.sort_unstable_by(cmp_candidate);
            out.extend(cand.iter().map(|&(_, j)| j));
        }
    }
    IndexArray::new(vec![q, k], out)
}

fn cmp_candidate(a: &(f64, usize), b: &(f64, usize)) -> Ordering {
    a.0.total_cmp(&b.0).then(a.1.cmp(&b.1))
}

/// K nearest neighbors of 3D queries; see [`knn_rows`].
pub fn knn(points: &[Point], queries: &[Point], k: usize, include_self: bool) -> Result<IndexArray> {
    knn_rows(points.as_flattened(), queries.as_flattened(), 3, k, include_self)
}

/// Greedy farthest-point order of `m` points starting at `seed_index`.
/// Ties go to the lower index.
pub fn fps(points: &[Point], m: usize, seed_index: usize) -> Result<Vec<usize>> {
    let n = points.len();
    if m == 0 || m > n {
        return Err(Error::NotEnoughPoints {
            requested: m,
            available: n,
        });
    }
    if seed_index >= n {
        return Err(Error::InvalidArgument(format!("fps seed {seed_index} out of range")));
    }
    let mut order = Vec::with_capacity(m);
    let mut min_d = vec![f64::INFINITY; n];
    let mut current = seed_index;
    for _ in 0..m {
        order.push(current);
        let c = points[current];
        let mut best = 0;
        let mut best_d = f64::NEG_INFINITY;
        for (j, (p, md)) in points.iter().zip(min_d.iter_mut()).enumerate() {
            let d = dist2(p, &c);
            if d < *md {
                *md = d;
            }
            if *md > best_d {
                best_d = *md;
                best = j;
            }
        }
        current = best;
    }
    Ok(order)
}

/// Index and squared distance of the point nearest `query` (lower index on ties).
pub fn nearest(points: &[Point], query: &Point) -> (usize, f64) {
    let mut best = (0, f64::INFINITY);
    for (j, p) in points.iter().enumerate() {
        let d = dist2(p, query);
        if d < best.1 {
            best = (j, d);
        }
    }
    best
}

/// Squared nearest distance from every query to `points`.
///
/// Large inputs go through a uniform grid; the result is identical to the
/// exhaustive scan.
pub fn nearest_dist2(points: &[Point], queries: &[Point]) -> Vec<(usize, f64)> {
    if points.len() <= 4096 || queries.len() < 64 {
        return queries.iter().map(|q| nearest(points, q)).collect();
    }
    let grid = Grid::new(points);
    queries.iter().map(|q| grid.nearest(points, q)).collect()
}

struct Grid {
    origin: Point,
    cell: f64,
    dims: [usize; 3],
    /// Start offsets into `items`, one per cell plus a sentinel.
    starts: Vec<usize>,
    items: Vec<usize>,
}

impl Grid {
    fn new(points: &[Point]) -> Self {
        let mut lo = [f64::INFINITY; 3];
        let mut hi = [f64::NEG_INFINITY; 3];
        for p in points {
            for a in 0..3 {
                lo[a] = lo[a].min(p[a]);
                hi[a] = hi[a].max(p[a]);
            }
        }
        let extent = (0..3).map(|a| hi[a] - lo[a]).fold(0.0, f64::max).max(1e-12);
        let per_axis = (2.0 * (points.len() as f64).cbrt()).clamp(1.0, 512.0);
        let cell = extent / per_axis;
        let dims = [0, 1, 2].map(|a| (((hi[a] - lo[a]) / cell) as usize + 1).min(4096));
        let n_cells = dims[0] * dims[1] * dims[2];
        let cell_of = |p: &Point| -> usize {
            let c: [usize; 3] = [0, 1, 2].map(|a| (((p[a] - lo[a]) / cell) as usize).min(dims[a] - 1));
            (c[0] * dims[1] + c[1]) * dims[2] + c[2]
        };
        let mut counts = vec![0usize; n_cells + 1];
        for p in points {
            counts[cell_of(p) + 1] += 1;
        }
        for i in 1..counts.len() {
            counts[i] += counts[i - 1];
        }
        let starts = counts.clone();
        let mut fill = counts;
        let mut items = vec![0; points.len()];
        for (i, p) in points.iter().enumerate() {
            let c = cell_of(p);
            items[fill[c]] = i;
            fill[c] += 1;
        }
        Self {
            origin: lo,
            cell,
            dims,
            starts,
            items,
        }
    }

    fn nearest(&self, points: &[Point], q: &Point) -> (usize, f64) {
        let home: [isize; 3] = [0, 1, 2]
            .map(|a| (((q[a] - self.origin[a]) / self.cell).floor() as isize).clamp(0, self.dims[a] as isize - 1));
        let max_ring = *self.dims.iter().max().unwrap() as isize;
        let mut best = (usize::MAX, f64::INFINITY);
        for ring in 0..=max_ring {
            for i in home[0] - ring..=home[0] + ring {
                for j in home[1] - ring..=home[1] + ring {
                    for k in home[2] - ring..=home[2] + ring {
                        let on_shell =
                            (i - home[0]).abs() == ring || (j - home[1]).abs() == ring || (k - home[2]).abs() == ring;
                        if !on_shell {
                            continue;
                        }
                        if i < 0
                            || j < 0
                            || k < 0
                            || i >= self.dims[0] as isize
                            || j >= self.dims[1] as isize
                            || k >= self.dims[2] as isize
                        {
                            continue;
                        }
                        let c = ((i as usize * self.dims[1] + j as usize) * self.dims[2]) + k as usize;
                        for &idx in &self.items[self.starts[c]..self.starts[c + 1]] {
                            let d = dist2(&points[idx], q);
                            if d < best.1 || (d == best.1 && idx < best.0) {
                                best = (idx, d);
                            }
                        }
                    }
                }
            }
            // Anything beyond this ring is at least `ring * cell` away.
            let bound = ring as f64 * self.cell;
            if best.1 < bound * bound {
                break;
            }
        }
        best
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_points(n: usize, seed: u64) -> Vec<Point> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n).map(|_| [rng.gen(), rng.gen(), rng.gen()]).collect()
    }

    fn brute_knn(points: &[Point], q: &Point, k: usize) -> Vec<usize> {
        let mut all: Vec<(f64, usize)> = points.iter().enumerate().map(|(j, p)| (dist2(p, q), j)).collect();
        all.sort_by(cmp_candidate);
        all.into_iter().take(k).map(|(_, j)| j).collect()
    }

    #[test]
    fn knn_on_a_line() {
        let pts = [[0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [2.0, 0.0, 0.0]];
        let ix = knn(&pts, &[[0.0, 0.0, 0.0]], 2, false).unwrap();
        assert_eq!(ix.data(), &[0, 1]);
        assert!(knn(&pts, &pts, 4, false).is_err());
    }

    #[test]
    fn knn_full_rows_are_permutations() {
        let pts = random_points(10, 1);
        let ix = knn(&pts, &pts, 10, true).unwrap();
        for i in 0..10 {
            let mut row = ix.data()[i * 10..(i + 1) * 10].to_vec();
            assert_eq!(row[0], i);
            row.sort_unstable();
            assert_eq!(row, (0..10).collect::<Vec<_>>());
        }
    }

    #[test]
    fn knn_matches_exhaustive_sort() {
        for seed in 0..5 {
            let pts = random_points(64, seed);
            let ix = knn(&pts, &pts, 8, false).unwrap();
            for (i, q) in pts.iter().enumerate() {
                assert_eq!(&ix.data()[i * 8..(i + 1) * 8], brute_knn(&pts, q, 8).as_slice());
            }
        }
    }

    #[test]
    fn include_self_puts_duplicates_after_self() {
        let pts = [[0.0; 3], [0.0; 3], [1.0, 0.0, 0.0]];
        let ix = knn(&pts, &pts, 2, true).unwrap();
        assert_eq!(ix.data(), &[0, 1, 1, 0, 2, 0]);
    }

    #[test]
    fn fps_picks_farthest() {
        let pts = [[0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [10.0, 0.0, 0.0]];
        assert_eq!(fps(&pts, 2, 0).unwrap(), vec![0, 2]);
        assert!(fps(&pts, 4, 0).is_err());
        let mut all = fps(&pts, 3, 0).unwrap();
        all.sort_unstable();
        assert_eq!(all, vec![0, 1, 2]);
    }

    #[test]
    fn fps_each_pick_maximizes_min_distance() {
        let pts = random_points(100, 9);
        let order = fps(&pts, 10, 0).unwrap();
        for step in 1..order.len() {
            let chosen = &order[..step];
            let min_to = |j: usize| {
                chosen
                    .iter()
                    .map(|&c| dist2(&pts[j], &pts[c]))
                    .fold(f64::INFINITY, f64::min)
            };
            let best = (0..pts.len()).map(min_to).fold(f64::NEG_INFINITY, f64::max);
            assert_eq!(min_to(order[step]), best);
        }
    }

    #[test]
    fn grid_nearest_matches_scan() {
        let pts = random_points(6000, 3);
        let queries: Vec<Point> = random_points(500, 4)
            .into_iter()
            .map(|p| [p[0] * 1.6 - 0.3, p[1] * 1.6 - 0.3, p[2]])
            .collect();
        let fast = nearest_dist2(&pts, &queries);
        for (q, got) in queries.iter().zip(fast) {
            assert_eq!(got, nearest(&pts, q));
        }
    }
}
