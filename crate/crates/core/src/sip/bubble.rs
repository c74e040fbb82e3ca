use rustc_hash::FxHashMap;

use crate::config::ClassConfig;
use crate::model::SeedSet;
use crate::spatial::dist2;

/// Fixed radius graph over the initial seed positions.
///
/// Seeds `u` and `v` are adjacent iff they share class `c` and lie strictly
/// closer than `r_c`. Every seed is its own neighbor, so no bubble is empty.
///
/// Internally seeds are renumbered so that spatially close seeds sit next to
/// each other in memory. Each unordered pair is stored once, in the row of its
/// lower local index. The layout is fixed by the construction, which keeps the
/// summation order of a shrinking step reproducible.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BubbleGraph {
    /// Local index to seed index.
    order: Vec<u32>,
    /// Row `a` spans `targets[offsets[a]..offsets[a + 1]]`.
    offsets: Vec<usize>,
    /// Local indices greater than the row's own.
    targets: Vec<u32>,
    /// Bubble size per local index, self included.
    degree: Vec<u32>,
}

impl BubbleGraph {
    pub fn build(seeds: &SeedSet, cfg: &ClassConfig) -> Self {
        let m = seeds.len();
        let mut by_class: Vec<(u16, Vec<u32>)> = Vec::new();
        for (s, &c) in seeds.classes.iter().enumerate() {
            match by_class.iter_mut().find(|(k, _)| *k == c) {
                Some((_, v)) => v.push(s as u32),
                None => by_class.push((c, vec![s as u32])),
            }
        }
        let mut rows = Rows {
            order: Vec::with_capacity(m),
            offsets: Vec::with_capacity(m + 1),
            targets: Vec::new(),
        };
        rows.offsets.push(0);
        for (class, members) in &by_class {
            match cfg.radius(*class) {
                Some(radius) => rows.add_class(&seeds.positions, members, radius),
                None => {
                    for &s in members {
                        rows.order.push(s);
                        rows.offsets.push(rows.targets.len());
                    }
                }
            }
        }
        let Rows { order, offsets, targets } = rows;
        let mut degree = vec![1u32; m];
        for a in 0..m {
            let row = &targets[offsets[a]..offsets[a + 1]];
            degree[a] += row.len() as u32;
            for &b in row {
                degree[b as usize] += 1;
            }
        }
        BubbleGraph {
            order,
            offsets,
            targets,
            degree,
        }
    }

    pub fn len(&self) -> usize {
        self.order.len()
    }

    pub fn is_empty(&self) -> bool {
        self.order.is_empty()
    }

    fn local_of(&self, u: usize) -> usize {
        self.order.iter().position(|&s| s as usize == u).expect("seed in graph")
    }

    fn row(&self, a: usize) -> &[u32] {
        &self.targets[self.offsets[a]..self.offsets[a + 1]]
    }

    /// Neighbors of seed `u` including itself, ascending. Linear in the graph
    /// size; meant for inspection, not for inner loops.
    pub fn neighbors(&self, u: usize) -> Vec<u32> {
        let a = self.local_of(u);
        let mut out = vec![u as u32];
        out.extend(self.row(a).iter().map(|&b| self.order[b as usize]));
        for x in 0..a {
            if self.row(x).contains(&(a as u32)) {
                out.push(self.order[x]);
            }
        }
        out.sort_unstable();
        out
    }

    pub fn degree(&self, u: usize) -> usize {
        self.degree[self.local_of(u)] as usize
    }

    /// Directed edge count, self-loops included.
    pub fn edge_count(&self) -> usize {
        self.order.len() + 2 * self.targets.len()
    }

    /// Applies `iterations` neighbor-mean steps: every seed moves to the mean
    /// of its bubble members' current positions.
    pub fn shrink(&self, positions: &[[f64; 3]], iterations: usize) -> Vec<[f64; 3]> {
        let m = self.order.len();
        let mut current: Vec<[f64; 3]> = self.order.iter().map(|&s| positions[s as usize]).collect();
        let mut next = vec![[0.0f64; 3]; m];
        let inv: Vec<f64> = self.degree.iter().map(|&d| 1.0 / d as f64).collect();
        for _ in 0..iterations {
            next.copy_from_slice(&current);
            for a in 0..m {
                let pa = current[a];
                // The row's own sum stays in registers; the mirrored half is
                // scattered, and no target repeats within a row.
                let mut acc = [0.0f64; 3];
                for &b in self.row(a) {
                    let b = b as usize;
                    let pb = current[b];
                    acc[0] += pb[0];
                    acc[1] += pb[1];
                    acc[2] += pb[2];
                    let nb = &mut next[b];
                    nb[0] += pa[0];
                    nb[1] += pa[1];
                    nb[2] += pa[2];
                }
                let na = &mut next[a];
                na[0] += acc[0];
                na[1] += acc[1];
                na[2] += acc[2];
            }
            for (p, w) in next.iter_mut().zip(&inv) {
                p[0] *= w;
                p[1] *= w;
                p[2] *= w;
            }
            std::mem::swap(&mut current, &mut next);
        }
        let mut out = vec![[0.0f64; 3]; m];
        for (k, &s) in self.order.iter().enumerate() {
            out[s as usize] = current[k];
        }
        out
    }
}

struct Rows {
    order: Vec<u32>,
    offsets: Vec<usize>,
    targets: Vec<u32>,
}

impl Rows {
    /// Appends the members of one class, sorted by grid cell, with a row of
    /// strictly-closer-than-`radius` partners for each. Cells are half the
    /// radius wide. A seed only scans cells that come after its own in cell
    /// order and whose box it could reach, so every distance is computed once.
    fn add_class(&mut self, positions: &[[f64; 3]], members: &[u32], radius: f64) {
        let base = self.order.len();
        let h = radius / 2.0;
        let inv = 1.0 / h;
        let mut keyed: Vec<([i32; 3], u32)> = members
            .iter()
            .map(|&s| {
                let p = positions[s as usize];
                let c = |v: f64| (v * inv).floor() as i32;
                ([c(p[0]), c(p[1]), c(p[2])], s)
            })
            .collect();
        keyed.sort_unstable();
        self.order.extend(keyed.iter().map(|k| k.1));
        let pos: Vec<[f64; 3]> = keyed.iter().map(|k| positions[k.1 as usize]).collect();

        // Cells in key order; cells of one (x, y) column are contiguous.
        let mut cells: Vec<([i32; 3], usize, usize)> = Vec::new();
        let mut columns: FxHashMap<[i32; 2], (usize, usize)> = FxHashMap::default();
        let mut start = 0;
        while start < keyed.len() {
            let key = keyed[start].0;
            let mut end = start + 1;
            while end < keyed.len() && keyed[end].0 == key {
                end += 1;
            }
            let col = columns.entry([key[0], key[1]]).or_insert((cells.len(), cells.len()));
            col.1 = cells.len() + 1;
            cells.push((key, start, end));
            start = end;
        }

        let r2 = radius * radius;
        // Pruning slack absorbs rounding between `floor(v / h)` and `k * h`.
        let slack = 1e-9 * (1.0 + h);
        let mut near: Vec<(usize, usize, [f64; 3])> = Vec::new();
        for &(key, a0, a1) in &cells {
            near.clear();
            for dx in 0..=2 {
                for dy in -2..=2 {
                    if dx == 0 && dy < 0 {
                        continue;
                    }
                    let Some(&(c0, c1)) = columns.get(&[key[0] + dx, key[1] + dy]) else {
                        continue;
                    };
                    for &(k, b0, b1) in &cells[c0..c1] {
                        let dz = k[2] - key[2];
                        if dz > 2 {
                            break;
                        }
                        if dz < -2 || (dx == 0 && dy == 0 && dz <= 0) {
                            continue;
                        }
                        let lo = [k[0] as f64 * h, k[1] as f64 * h, k[2] as f64 * h];
                        near.push((b0, b1, lo));
                    }
                }
            }
            for a in a0..a1 {
                let p = pos[a];
                for b in a + 1..a1 {
                    if dist2(p, pos[b]) < r2 {
                        self.targets.push((base + b) as u32);
                    }
                }
                for &(b0, b1, lo) in &near {
                    let gap = |v: f64, lo: f64| (lo - v - slack).max(v - lo - h - slack).max(0.0);
                    let (gx, gy, gz) = (gap(p[0], lo[0]), gap(p[1], lo[1]), gap(p[2], lo[2]));
                    if gx * gx + gy * gy + gz * gz >= r2 {
                        continue;
                    }
                    for (b, &q) in pos.iter().enumerate().take(b1).skip(b0) {
                        if dist2(p, q) < r2 {
                            self.targets.push((base + b) as u32);
                        }
                    }
                }
                self.offsets.push(self.targets.len());
            }
        }
    }
}

/// Runs `cfg.iterations` neighbor-mean steps over the graph built from the
/// initial positions. Classes and assignment are carried through unchanged.
pub fn bubble_shrink(seeds: &SeedSet, cfg: &ClassConfig) -> SeedSet {
    let graph = BubbleGraph::build(seeds, cfg);
    shrink_with_graph(seeds, &graph, cfg.iterations)
}

pub fn shrink_with_graph(seeds: &SeedSet, graph: &BubbleGraph, iterations: usize) -> SeedSet {
    SeedSet {
        positions: graph.shrink(&seeds.positions, iterations),
        classes: seeds.classes.clone(),
        assignment: seeds.assignment.clone(),
    }
}
