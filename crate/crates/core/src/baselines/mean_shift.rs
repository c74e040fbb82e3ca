//! Flat-kernel mean shift with bandwidth `r_c`.

use crate::config::ClassConfig;
use crate::model::{PointCloud, ProposalSet, SemanticMap};
use crate::spatial::{dist2, SpatialHash};
use crate::union_find::UnionFind;

use super::points_by_class;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MeanShiftParams {
    /// Stop once a point moves less than this many meters in one step.
    pub tolerance: f64,
    pub max_iterations: usize,
}

impl Default for MeanShiftParams {
    fn default() -> Self {
        MeanShiftParams {
            tolerance: 1e-3,
            max_iterations: 50,
        }
    }
}

pub fn mean_shift(cloud: &PointCloud, labels: &SemanticMap, cfg: &ClassConfig) -> ProposalSet {
    mean_shift_with(cloud, labels, cfg, MeanShiftParams::default())
}

pub fn mean_shift_with(
    cloud: &PointCloud,
    labels: &SemanticMap,
    cfg: &ClassConfig,
    params: MeanShiftParams,
) -> ProposalSet {
    let mut raw = vec![None; cloud.len()];
    let mut next_label = 0u32;
    for (class, members) in points_by_class(cloud, labels, cfg) {
        let Some(bandwidth) = cfg.radius(class) else {
            continue;
        };
        let originals: Vec<[f64; 3]> = members.iter().map(|&p| cloud.xyz(p as usize)).collect();
        let grid = BallSums::build(&originals, bandwidth);
        let modes_raw: Vec<[f64; 3]> = originals.iter().map(|&start| seek(&grid, start, params)).collect();

        // Converged positions closer than half the bandwidth share a mode.
        let half = bandwidth / 2.0;
        let mode_hash = SpatialHash::build(
            modes_raw.iter().enumerate().map(|(k, &q)| (k as u32, q)),
            half,
        );
        let mut uf = UnionFind::new(modes_raw.len());
        for (k, &q) in modes_raw.iter().enumerate() {
            mode_hash.for_each_within(q, half, |v, _, _| {
                uf.union(k as u32, v);
            });
        }
        let (component, count) = uf.labels();
        let mut sums = vec![[0.0f64; 4]; count];
        for (q, &c) in modes_raw.iter().zip(&component) {
            let s = &mut sums[c as usize];
            s[0] += q[0];
            s[1] += q[1];
            s[2] += q[2];
            s[3] += 1.0;
        }
        let modes: Vec<[f64; 3]> = sums.iter().map(|s| [s[0] / s[3], s[1] / s[3], s[2] / s[3]]).collect();

        let nearest = SpatialHash::build(
            modes.iter().enumerate().map(|(k, &q)| (k as u32, q)),
            bandwidth,
        );
        for (&p, &q) in members.iter().zip(&originals) {
            let (m, _) = nearest.nearest(q).expect("at least one mode per class");
            raw[p as usize] = Some(next_label + m);
        }
        next_label += modes.len() as u32;
    }
    ProposalSet::from_point_labels(cloud, labels, &raw)
}

const CELLS_PER_RADIUS: i32 = 4;

fn cell_key(p: [f64; 3], inv_cell: f64) -> [i32; 3] {
    let c = |v: f64| (v * inv_cell).floor() as i32;
    [c(p[0]), c(p[1]), c(p[2])]
}

fn seek(grid: &BallSums, start: [f64; 3], params: MeanShiftParams) -> [f64; 3] {
    let tol2 = params.tolerance * params.tolerance;
    let mut pos = start;
    for _ in 0..params.max_iterations {
        let (sum, n) = grid.ball_sum(pos);
        if n == 0 {
            break;
        }
        let inv = 1.0 / n as f64;
        let next = [sum[0] * inv, sum[1] * inv, sum[2] * inv];
        let moved = dist2(pos, next);
        pos = next;
        if moved < tol2 {
            break;
        }
    }
    pos
}

/// Sum and count of the points strictly inside a ball of fixed radius.
///
/// Points are bucketed into cells a quarter of the radius wide, each with a
/// precomputed sum. A query adds whole cells that lie inside the ball, skips
/// cells that lie outside it and tests points only in the cells cut by the
/// boundary.
struct BallSums {
    radius: f64,
    cell: f64,
    inv_cell: f64,
    /// Dense `(x, y)` column table over the occupied footprint: `extent`
    /// columns per axis from `origin`. Each entry is a range in `cells`;
    /// cells of a column ascend in z.
    columns: Vec<(u32, u32)>,
    origin: [i32; 2],
    extent: [i32; 2],
    /// `(z, start, end, sum)`; the range indexes `positions`.
    cells: Vec<(i32, u32, u32, [f64; 3])>,
    xs: Vec<f64>,
    ys: Vec<f64>,
    zs: Vec<f64>,
}

impl BallSums {
    fn build(points: &[[f64; 3]], radius: f64) -> Self {
        let cell = radius / CELLS_PER_RADIUS as f64;
        let inv_cell = 1.0 / cell;
        let mut keyed: Vec<([i32; 3], usize)> = points
            .iter()
            .enumerate()
            .map(|(k, p)| (cell_key(*p, inv_cell), k))
            .collect();
        keyed.sort_unstable();
        let positions: Vec<[f64; 3]> = keyed.iter().map(|&(_, k)| points[k]).collect();
        let lo = |a: usize| keyed.iter().map(|k| k.0[a]).min().unwrap_or(0);
        let hi = |a: usize| keyed.iter().map(|k| k.0[a]).max().unwrap_or(-1);
        let origin = [lo(0), lo(1)];
        let extent = [hi(0) - origin[0] + 1, hi(1) - origin[1] + 1];
        let mut columns = vec![(0u32, 0u32); (extent[0].max(0) as usize) * (extent[1].max(0) as usize)];
        let mut cells = Vec::new();
        let mut start = 0;
        while start < keyed.len() {
            let key = keyed[start].0;
            let mut end = start + 1;
            while end < keyed.len() && keyed[end].0 == key {
                end += 1;
            }
            let mut s = [0.0f64; 3];
            for p in &positions[start..end] {
                s[0] += p[0];
                s[1] += p[1];
                s[2] += p[2];
            }
            let at = cells.len() as u32;
            let col = &mut columns[((key[0] - origin[0]) * extent[1] + (key[1] - origin[1])) as usize];
            if col.0 == col.1 {
                col.0 = at;
            }
            col.1 = at + 1;
            cells.push((key[2], start as u32, end as u32, s));
            start = end;
        }
        BallSums {
            radius,
            cell,
            inv_cell,
            columns,
            origin,
            extent,
            cells,
            xs: positions.iter().map(|p| p[0]).collect(),
            ys: positions.iter().map(|p| p[1]).collect(),
            zs: positions.iter().map(|p| p[2]).collect(),
        }
    }

    /// Squared nearest and farthest distance from `v` to the cell interval
    /// starting at `lo` along one axis.
    #[inline]
    fn axis(&self, v: f64, lo: f64, slack: f64) -> (f64, f64) {
        let hi = lo + self.cell;
        let near = (lo - slack - v).max(v - hi - slack).max(0.0);
        let far = (v - lo).abs().max((hi - v).abs()) + slack;
        (near * near, far * far)
    }

    fn ball_sum(&self, p: [f64; 3]) -> ([f64; 3], usize) {
        let r2 = self.radius * self.radius;
        // Rounding between `floor(v / cell)` and `k * cell` is absorbed by
        // treating boxes as slightly larger when pruning and slightly smaller
        // when accepting whole.
        let slack = 1e-9 * (1.0 + self.cell);
        let c = cell_key(p, self.inv_cell);
        let mut sum = [0.0f64; 3];
        let mut n = 0usize;
        for dx in -CELLS_PER_RADIUS..=CELLS_PER_RADIUS {
            for dy in -CELLS_PER_RADIUS..=CELLS_PER_RADIUS {
                let (cx, cy) = (c[0] + dx - self.origin[0], c[1] + dy - self.origin[1]);
                if cx < 0 || cy < 0 || cx >= self.extent[0] || cy >= self.extent[1] {
                    continue;
                }
                let (nx, fx) = self.axis(p[0], (c[0] + dx) as f64 * self.cell, slack);
                let (ny, fy) = self.axis(p[1], (c[1] + dy) as f64 * self.cell, slack);
                if nx + ny >= r2 {
                    continue;
                }
                let (c0, c1) = self.columns[(cx * self.extent[1] + cy) as usize];
                for &(z, s, e, cs) in &self.cells[c0 as usize..c1 as usize] {
                    if z < c[2] - CELLS_PER_RADIUS {
                        continue;
                    }
                    if z > c[2] + CELLS_PER_RADIUS {
                        break;
                    }
                    let (nz, fz) = self.axis(p[2], z as f64 * self.cell, slack);
                    if nx + ny + nz >= r2 {
                        continue;
                    }
                    if fx + fy + fz < r2 {
                        sum[0] += cs[0];
                        sum[1] += cs[1];
                        sum[2] += cs[2];
                        n += (e - s) as usize;
                        continue;
                    }
                    let (s, e) = (s as usize, e as usize);
                    let (xs, ys, zs) = (&self.xs[s..e], &self.ys[s..e], &self.zs[s..e]);
                    // Branch-free: membership is a 0/1 weight.
                    let mut part = [0.0f64; 4];
                    for ((&x, &y), &z) in xs.iter().zip(ys).zip(zs) {
                        let (ddx, ddy, ddz) = (x - p[0], y - p[1], z - p[2]);
                        let w = ((ddx * ddx + ddy * ddy + ddz * ddz) < r2) as u8 as f64;
                        part[0] += w * x;
                        part[1] += w * y;
                        part[2] += w * z;
                        part[3] += w;
                    }
                    sum[0] += part[0];
                    sum[1] += part[1];
                    sum[2] += part[2];
                    n += part[3] as usize;
                }
            }
        }
        (sum, n)
    }
}
