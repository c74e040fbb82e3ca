//! Uniform-grid spatial hash for fixed-radius and nearest-neighbor queries.

use rustc_hash::FxHashMap;

type CellKey = [i32; 3];

#[derive(Debug, Clone)]
pub struct SpatialHash {
    cell: f64,
    inv_cell: f64,
    cells: FxHashMap<CellKey, (u32, u32)>,
    ids: Vec<u32>,
    positions: Vec<[f64; 3]>,
    lo: CellKey,
    hi: CellKey,
}

#[inline]
fn cell_of(p: [f64; 3], inv_cell: f64) -> CellKey {
    let c = |v: f64| (v * inv_cell).floor().clamp(i32::MIN as f64 / 2.0, i32::MAX as f64 / 2.0) as i32;
    [c(p[0]), c(p[1]), c(p[2])]
}

impl SpatialHash {
    /// Buckets `(id, position)` pairs into cubic cells of side `cell`.
    pub fn build(items: impl IntoIterator<Item = (u32, [f64; 3])>, cell: f64) -> Self {
        assert!(cell > 0.0 && cell.is_finite(), "cell size must be positive");
        let inv_cell = 1.0 / cell;
        let mut keyed: Vec<(CellKey, u32, [f64; 3])> = items
            .into_iter()
            .map(|(id, p)| (cell_of(p, inv_cell), id, p))
            .collect();
        keyed.sort_unstable_by(|a, b| a.0.cmp(&b.0).then(a.1.cmp(&b.1)));

        let mut cells = FxHashMap::default();
        cells.reserve(keyed.len() / 2);
        let mut lo = [i32::MAX; 3];
        let mut hi = [i32::MIN; 3];
        let mut start = 0usize;
        while start < keyed.len() {
            let key = keyed[start].0;
            let mut end = start + 1;
            while end < keyed.len() && keyed[end].0 == key {
                end += 1;
            }
            cells.insert(key, (start as u32, end as u32));
            for a in 0..3 {
                lo[a] = lo[a].min(key[a]);
                hi[a] = hi[a].max(key[a]);
            }
            start = end;
        }
        let ids = keyed.iter().map(|k| k.1).collect();
        let positions = keyed.iter().map(|k| k.2).collect();
        SpatialHash {
            cell,
            inv_cell,
            cells,
            ids,
            positions,
            lo,
            hi,
        }
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn cell_size(&self) -> f64 {
        self.cell
    }

    /// Calls `f(id, position, squared_distance)` for every item strictly
    /// closer than `radius` to `p`.
    #[inline]
    pub fn for_each_within(&self, p: [f64; 3], radius: f64, mut f: impl FnMut(u32, [f64; 3], f64)) {
        let r2 = radius * radius;
        let reach = (radius * self.inv_cell).ceil().max(1.0) as i32;
        let c = cell_of(p, self.inv_cell);
        for dx in -reach..=reach {
            for dy in -reach..=reach {
                for dz in -reach..=reach {
                    let key = [c[0] + dx, c[1] + dy, c[2] + dz];
                    let Some(&(s, e)) = self.cells.get(&key) else {
                        continue;
                    };
                    for k in s as usize..e as usize {
                        let q = self.positions[k];
                        let d2 = dist2(p, q);
                        if d2 < r2 {
                            f(self.ids[k], q, d2);
                        }
                    }
                }
            }
        }
    }

    /// IDs strictly within `radius` of `p`, ascending.
    pub fn within(&self, p: [f64; 3], radius: f64) -> Vec<u32> {
        let mut out = Vec::new();
        self.for_each_within(p, radius, |id, _, _| out.push(id));
        out.sort_unstable();
        out
    }

    pub fn any_within(&self, p: [f64; 3], radius: f64) -> bool {
        let r2 = radius * radius;
        let reach = (radius * self.inv_cell).ceil().max(1.0) as i32;
        let c = cell_of(p, self.inv_cell);
        for dx in -reach..=reach {
            for dy in -reach..=reach {
                for dz in -reach..=reach {
                    if let Some(&(s, e)) = self.cells.get(&[c[0] + dx, c[1] + dy, c[2] + dz]) {
                        if self.positions[s as usize..e as usize]
                            .iter()
                            .any(|&q| dist2(p, q) < r2)
                        {
                            return true;
                        }
                    }
                }
            }
        }
        false
    }

    /// Smallest squared distance from `p` to any item, if below `radius`.
    pub fn min_dist2_within(&self, p: [f64; 3], radius: f64) -> Option<f64> {
        let mut best: Option<f64> = None;
        self.for_each_within(p, radius, |_, _, d2| {
            if best.is_none_or(|b| d2 < b) {
                best = Some(d2);
            }
        });
        best
    }

    /// Nearest item to `p` by Euclidean distance; ties go to the lowest ID.
    pub fn nearest(&self, p: [f64; 3]) -> Option<(u32, f64)> {
        if self.is_empty() {
            return None;
        }
        let c = cell_of(p, self.inv_cell);
        let max_ring = (0..3)
            .map(|a| (c[a] - self.lo[a]).abs().max((self.hi[a] - c[a]).abs()))
            .max()
            .unwrap_or(0);
        let mut best: Option<(u32, f64)> = None;
        for ring in 0..=max_ring {
            self.visit_ring(c, ring, |k| {
                let d2 = dist2(p, self.positions[k]);
                let id = self.ids[k];
                let better = match best {
                    None => true,
                    Some((bid, bd)) => d2 < bd || (d2 == bd && id < bid),
                };
                if better {
                    best = Some((id, d2));
                }
            });
            if let Some((_, bd)) = best {
                let cleared = ring as f64 * self.cell;
                if bd < cleared * cleared {
                    break;
                }
            }
        }
        best
    }

    fn visit_ring(&self, c: CellKey, ring: i32, mut f: impl FnMut(usize)) {
        for dx in -ring..=ring {
            for dy in -ring..=ring {
                let edge = dx.abs() == ring || dy.abs() == ring;
                let step = if edge || ring == 0 { 1 } else { 2 * ring };
                let mut dz = -ring;
                while dz <= ring {
                    if let Some(&(s, e)) = self.cells.get(&[c[0] + dx, c[1] + dy, c[2] + dz]) {
                        for k in s as usize..e as usize {
                            f(k);
                        }
                    }
                    dz += step.max(1);
                }
            }
        }
    }
}

#[inline]
pub fn dist2(a: [f64; 3], b: [f64; 3]) -> f64 {
    let dx = a[0] - b[0];
    let dy = a[1] - b[1];
    let dz = a[2] - b[2];
    dx * dx + dy * dy + dz * dz
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_points(n: usize, seed: u64) -> Vec<[f64; 3]> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n)
            .map(|_| [rng.gen_range(-5.0..5.0), rng.gen_range(-5.0..5.0), rng.gen_range(-1.0..1.0)])
            .collect()
    }

    #[test]
    fn radius_query_matches_scan() {
        let pts = random_points(500, 1);
        let hash = SpatialHash::build(pts.iter().enumerate().map(|(i, p)| (i as u32, *p)), 0.7);
        for (i, p) in pts.iter().enumerate().step_by(7) {
            for r in [0.3, 0.7, 1.6] {
                let brute: Vec<u32> = (0..pts.len() as u32)
                    .filter(|&j| dist2(*p, pts[j as usize]) < r * r)
                    .collect();
                assert_eq!(hash.within(*p, r), brute, "point {i} radius {r}");
            }
        }
    }

    #[test]
    fn nearest_matches_scan() {
        let pts = random_points(300, 2);
        let hash = SpatialHash::build(pts.iter().enumerate().map(|(i, p)| (i as u32, *p)), 0.5);
        for q in random_points(100, 3).into_iter().chain([[40.0, -30.0, 9.0]]) {
            let brute = (0..pts.len())
                .min_by(|&a, &b| dist2(q, pts[a]).partial_cmp(&dist2(q, pts[b])).unwrap())
                .unwrap();
            assert_eq!(hash.nearest(q).unwrap().0 as usize, brute);
        }
    }

    #[test]
    fn strict_radius() {
        let hash = SpatialHash::build([(0, [0.0, 0.0, 0.0]), (1, [1.0, 0.0, 0.0])], 1.0);
        assert_eq!(hash.within([0.0; 3], 1.0), vec![0]);
        assert!(!hash.any_within([3.0, 0.0, 0.0], 1.0));
    }
}
