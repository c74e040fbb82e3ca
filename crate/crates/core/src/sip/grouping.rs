use rustc_hash::FxHashMap;

use crate::config::ClassConfig;
use crate::model::{PointCloud, ProposalSet, SeedSet, SemanticMap};
use crate::spatial::dist2;
use crate::union_find::UnionFind;

/// Seed components over the shifted positions: same class and strictly closer
/// than half the class radius. Labels are dense, ordered by each component's
/// lowest seed index.
pub fn seed_components(shifted: &SeedSet, cfg: &ClassConfig) -> (Vec<u32>, usize) {
    let mut uf = UnionFind::new(shifted.len());
    let mut by_class: Vec<(u16, Vec<u32>)> = Vec::new();
    for (s, &c) in shifted.classes.iter().enumerate() {
        match by_class.iter_mut().find(|(k, _)| *k == c) {
            Some((_, v)) => v.push(s as u32),
            None => by_class.push((c, vec![s as u32])),
        }
    }
    for (class, members) in by_class {
        if let Some(radius) = cfg.radius(class) {
            link_within(&shifted.positions, &members, radius / 2.0, &mut uf);
        }
    }
    uf.labels()
}

/// Unions every pair of `members` strictly closer than `threshold`.
///
/// Shrunk seeds pile up, so a pairwise scan would be quadratic in the object
/// size. Cells are half the threshold wide: their diagonal is below the
/// threshold, so everything in one cell is connected outright, and a pair of
/// cells needs only one qualifying edge, which is skipped once both cells are
/// already in one component.
fn link_within(positions: &[[f64; 3]], members: &[u32], threshold: f64, uf: &mut UnionFind) {
    let cell = threshold / 2.0;
    let inv = 1.0 / cell;
    let mut keyed: Vec<([i32; 3], u32)> = members
        .iter()
        .map(|&s| {
            let p = positions[s as usize];
            let c = |v: f64| (v * inv).floor() as i32;
            ([c(p[0]), c(p[1]), c(p[2])], s)
        })
        .collect();
    keyed.sort_unstable();

    let mut cells: FxHashMap<[i32; 3], (usize, usize)> = FxHashMap::default();
    let mut ranges = Vec::new();
    let mut start = 0;
    while start < keyed.len() {
        let key = keyed[start].0;
        let mut end = start + 1;
        while end < keyed.len() && keyed[end].0 == key {
            uf.union(keyed[start].1, keyed[end].1);
            end += 1;
        }
        cells.insert(key, (start, end));
        ranges.push((key, start, end));
        start = end;
    }

    let t2 = threshold * threshold;
    for &(key, a0, a1) in &ranges {
        for dx in -2..=2i32 {
            for dy in -2..=2i32 {
                for dz in -2..=2i32 {
                    let other = [key[0] + dx, key[1] + dy, key[2] + dz];
                    if other <= key {
                        continue;
                    }
                    let Some(&(b0, b1)) = cells.get(&other) else {
                        continue;
                    };
                    if uf.find(keyed[a0].1) == uf.find(keyed[b0].1) {
                        continue;
                    }
                    'pairs: for &(_, u) in &keyed[a0..a1] {
                        let p = positions[u as usize];
                        for &(_, v) in &keyed[b0..b1] {
                            if dist2(p, positions[v as usize]) < t2 {
                                uf.union(u, v);
                                break 'pairs;
                            }
                        }
                    }
                }
            }
        }
    }
}

/// Point grouping: every point inherits the component of its dominating seed.
pub fn group_proposals(
    shifted: &SeedSet,
    cfg: &ClassConfig,
    cloud: &PointCloud,
    labels: &SemanticMap,
) -> ProposalSet {
    let (component, count) = seed_components(shifted, cfg);
    let mut groups: Vec<Vec<u32>> = vec![Vec::new(); count];
    for (i, s) in shifted.assignment.iter().enumerate() {
        if let Some(s) = s {
            groups[component[*s as usize] as usize].push(i as u32);
        }
    }
    ProposalSet::from_groups(cloud, labels, groups)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::ClassInfo;
    use crate::model::Point;

    fn cfg() -> ClassConfig {
        ClassConfig::new(vec![ClassInfo {
            id: 1,
            name: "a".into(),
            is_thing: true,
            radius: Some(2.0),
            affinity_cutoff: None,
        }])
        .unwrap()
    }

    fn setup(xs: &[f64]) -> (SeedSet, PointCloud, SemanticMap) {
        let cloud = PointCloud::new(xs.iter().map(|&x| Point::new(x as f32, 0.0, 0.0, 0.0)).collect());
        let labels = SemanticMap::from_semantic(vec![1; xs.len()]);
        let seeds = SeedSet {
            positions: xs.iter().map(|&x| [x, 0.0, 0.0]).collect(),
            classes: vec![1; xs.len()],
            assignment: (0..xs.len() as u32).map(Some).collect(),
        };
        (seeds, cloud, labels)
    }

    #[test]
    fn close_seeds_form_one_proposal() {
        let (seeds, cloud, labels) = setup(&[0.0, 0.4, 0.8]);
        let set = group_proposals(&seeds, &cfg(), &cloud, &labels);
        assert_eq!(set.len(), 1);
        assert_eq!(set.proposals[0].points, vec![0, 1, 2]);
        assert_eq!(set.instance_of_point, vec![1, 1, 1]);
    }

    #[test]
    fn half_radius_is_strict() {
        let (seeds, cloud, labels) = setup(&[0.0, 1.0]);
        let set = group_proposals(&seeds, &cfg(), &cloud, &labels);
        assert_eq!(set.len(), 2);
        assert_eq!(set.instance_of_point, vec![1, 2]);
    }

    #[test]
    fn ids_follow_lowest_seed() {
        let (seeds, cloud, labels) = setup(&[10.0, 0.0, 10.5, 0.3]);
        let set = group_proposals(&seeds, &cfg(), &cloud, &labels);
        assert_eq!(set.instance_of_point, vec![1, 2, 1, 2]);
    }
}
