use nalgebra::Point3;

use crate::geom::Aabb;

/// Uniform bucket grid answering exact nearest-neighbor queries.
///
/// Distances are computed as `(p - q).norm_squared()`, the same expression a
/// brute-force scan uses, so results match a scan bit for bit.
pub struct NnGrid<'a> {
    points: &'a [Point3<f64>],
    min: Point3<f64>,
    cell: f64,
    dims: [usize; 3],
    starts: Vec<u32>,
    items: Vec<u32>,
}

const MAX_DIM: usize = 256;

impl<'a> NnGrid<'a> {
    pub fn new(points: &'a [Point3<f64>]) -> Self {
        assert!(!points.is_empty(), "grid over an empty cloud");
        let b = Aabb::from_points(points).expect("non-empty");
        let ext = b.extent();
        let longest = ext.max();
        // about two points per cell for a surface-like cloud
        let target = (points.len() as f64 / 2.0).sqrt().max(1.0);
        let cell = if longest > 0.0 { longest / target.min(MAX_DIM as f64) } else { 1.0 };
        let dims = [0, 1, 2].map(|k| ((ext[k] / cell).floor() as usize + 1).min(MAX_DIM));
        let mut counts = vec![0u32; dims[0] * dims[1] * dims[2] + 1];
        let mut grid = Self {
            points,
            min: b.min,
            cell,
            dims,
            starts: Vec::new(),
            items: Vec::new(),
        };
        let cells: Vec<usize> = points.iter().map(|p| grid.flat(grid.home(p))).collect();
        for &c in &cells {
            counts[c + 1] += 1;
        }
        for i in 1..counts.len() {
            counts[i] += counts[i - 1];
        }
        let mut fill = counts.clone();
        let mut items = vec![0u32; points.len()];
        for (i, &c) in cells.iter().enumerate() {
            items[fill[c] as usize] = i as u32;
            fill[c] += 1;
        }
        grid.starts = counts;
        grid.items = items;
        grid
    }

    fn home(&self, p: &Point3<f64>) -> [usize; 3] {
        [0, 1, 2].map(|k| {
            let x = ((p[k] - self.min[k]) / self.cell).floor();
            if x > 0.0 {
                (x as usize).min(self.dims[k] - 1)
            } else {
                0
            }
        })
    }

    fn flat(&self, c: [usize; 3]) -> usize {
        c[0] + self.dims[0] * (c[1] + self.dims[1] * c[2])
    }

    /// Squared distance to the nearest point and its index (lowest index on
    /// ties).
    pub fn nearest(&self, p: &Point3<f64>) -> (f64, usize) {
        let home = self.home(p);
        let mut best = (f64::INFINITY, usize::MAX);
        let max_ring = *self.dims.iter().max().expect("3 dims");
        for r in 0..=max_ring {
            let lo = home.map(|h| h.saturating_sub(r));
            let hi = [0, 1, 2].map(|k| (home[k] + r).min(self.dims[k] - 1));
            for k in lo[2]..=hi[2] {
                for j in lo[1]..=hi[1] {
                    let shell = k.abs_diff(home[2]) == r || j.abs_diff(home[1]) == r;
                    let mut visit = |i: usize| {
                        let c = self.flat([i, j, k]);
                        for &idx in &self.items[self.starts[c] as usize..self.starts[c + 1] as usize] {
                            let d = (self.points[idx as usize] - p).norm_squared();
                            if d < best.0 || (d == best.0 && (idx as usize) < best.1) {
                                best = (d, idx as usize);
                            }
                        }
                    };
                    if shell {
                        (lo[0]..=hi[0]).for_each(&mut visit);
                    } else {
                        if home[0] >= r {
                            visit(home[0] - r);
                        }
                        if r > 0 && home[0] + r < self.dims[0] {
                            visit(home[0] + r);
                        }
                    }
                }
            }
            // distance from p to any cell outside the visited block
            let mut bound = f64::INFINITY;
            for a in 0..3 {
                if home[a] >= r + 1 {
                    let face = self.min[a] + (home[a] - r) as f64 * self.cell;
                    bound = bound.min(p[a] - face);
                }
                if home[a] + r + 1 < self.dims[a] {
                    let face = self.min[a] + (home[a] + r + 1) as f64 * self.cell;
                    bound = bound.min(face - p[a]);
                }
            }
            if bound == f64::INFINITY {
                break;
            }
            let bound = (bound - 1e-9 * self.cell).max(0.0);
            if best.0 < bound * bound {
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

    #[test]
    fn matches_scan() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for n in [1, 2, 7, 300] {
            let pts: Vec<Point3<f64>> = (0..n)
                .map(|_| Point3::new(rng.gen_range(-1.0..1.0), rng.gen_range(-0.2..0.2), rng.gen_range(0.0..0.01)))
                .collect();
            let g = NnGrid::new(&pts);
            for _ in 0..200 {
                let q = Point3::new(rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0));
                let scan = pts
                    .iter()
                    .enumerate()
                    .map(|(i, p)| ((p - q).norm_squared(), i))
                    .fold((f64::INFINITY, usize::MAX), |a, b| if b.0 < a.0 { b } else { a });
                assert_eq!(g.nearest(&q), scan);
            }
        }
    }

    #[test]
    fn duplicate_points_pick_lowest_index() {
        let pts = vec![Point3::new(1.0, 0.0, 0.0); 5];
        assert_eq!(NnGrid::new(&pts).nearest(&Point3::origin()), (1.0, 0));
    }
}
