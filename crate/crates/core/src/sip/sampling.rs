use rustc_hash::FxHashMap;

use crate::config::ClassConfig;
use crate::model::{PointCloud, SeedSet, SemanticMap};

/// Whether a point takes part in instance clustering: finite, labeled with a
/// thing class, and inside the voxelization extent.
#[inline]
pub fn participates(cloud: &PointCloud, labels: &SemanticMap, cfg: &ClassConfig, i: usize) -> bool {
    let p = cloud.points[i];
    p.is_finite() && cfg.is_thing(labels.semantic[i]) && cfg.in_extent(p.xyz())
}

/// Balanced point sampling: one seed per occupied voxel, placed at the mean of
/// the voxel's thing points.
///
/// Seeds are numbered in order of their first member point, and each voxel
/// sum accumulates in ascending point order. The seed class is the majority
/// class of its members, ties to the lowest ID.
pub fn balanced_sample(cloud: &PointCloud, labels: &SemanticMap, cfg: &ClassConfig) -> SeedSet {
    let n = cloud.len().min(labels.len());
    let dims = cfg.grid_dims();
    let mut slot_of_voxel: FxHashMap<u64, u32> = FxHashMap::default();
    let mut sums: Vec<[f64; 3]> = Vec::new();
    let mut counts: Vec<u32> = Vec::new();
    // Single-class voxels are the norm; mixed ones keep a small vote list.
    let mut votes: Vec<Vec<(u16, u32)>> = Vec::new();
    let mut assignment = vec![None; cloud.len()];

    for i in 0..n {
        if !participates(cloud, labels, cfg, i) {
            continue;
        }
        let p = cloud.xyz(i);
        let key = cfg.voxel_key(p, dims);
        let slot = *slot_of_voxel.entry(key).or_insert_with(|| {
            sums.push([0.0; 3]);
            counts.push(0);
            votes.push(Vec::with_capacity(1));
            sums.len() as u32 - 1
        });
        let s = slot as usize;
        sums[s][0] += p[0];
        sums[s][1] += p[1];
        sums[s][2] += p[2];
        counts[s] += 1;
        let class = labels.semantic[i];
        match votes[s].iter_mut().find(|(c, _)| *c == class) {
            Some((_, k)) => *k += 1,
            None => votes[s].push((class, 1)),
        }
        assignment[i] = Some(slot);
    }

    let positions = sums
        .iter()
        .zip(&counts)
        .map(|(s, &c)| {
            let c = c as f64;
            [s[0] / c, s[1] / c, s[2] / c]
        })
        .collect();
    let classes = votes
        .iter()
        .map(|v| {
            v.iter()
                .max_by(|a, b| a.1.cmp(&b.1).then(b.0.cmp(&a.0)))
                .map(|&(c, _)| c)
                .unwrap_or(0)
        })
        .collect();
    SeedSet {
        positions,
        classes,
        assignment,
    }
}
