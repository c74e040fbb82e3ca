//! Density clustering. Neighborhoods are open balls (`distance < eps`) and
//! include the point itself.

use std::collections::VecDeque;

use crate::config::ClassConfig;
use crate::model::{PointCloud, ProposalSet, SemanticMap};
use crate::spatial::SpatialHash;

use super::points_by_class;

/// Per-class DBSCAN. Noise points get instance 0.
pub fn dbscan(cloud: &PointCloud, labels: &SemanticMap, cfg: &ClassConfig, eps: f64, min_pts: usize) -> ProposalSet {
    assert!(eps > 0.0, "eps must be positive");
    assert!(min_pts >= 1, "min_pts must be at least 1");
    let mut raw: Vec<Option<u32>> = vec![None; cloud.len()];
    let mut next_cluster = 0u32;

    for (_, members) in points_by_class(cloud, labels, cfg) {
        let positions: Vec<[f64; 3]> = members.iter().map(|&p| cloud.xyz(p as usize)).collect();
        let hash = SpatialHash::build(
            positions.iter().enumerate().map(|(k, &q)| (k as u32, q)),
            eps,
        );
        let n = members.len();
        let mut cluster: Vec<Option<u32>> = vec![None; n];
        let mut visited = vec![false; n];
        let mut neighbors = Vec::new();
        let mut queue = VecDeque::new();

        for start in 0..n {
            if visited[start] {
                continue;
            }
            visited[start] = true;
            neighbors.clear();
            hash.for_each_within(positions[start], eps, |v, _, _| neighbors.push(v));
            if neighbors.len() < min_pts {
                continue;
            }
            let id = next_cluster;
            next_cluster += 1;
            cluster[start] = Some(id);
            for &w in &neighbors {
                if cluster[w as usize].is_none() {
                    cluster[w as usize] = Some(id);
                    queue.push_back(w);
                }
            }
            while let Some(v) = queue.pop_front() {
                let v = v as usize;
                if visited[v] {
                    continue;
                }
                visited[v] = true;
                neighbors.clear();
                hash.for_each_within(positions[v], eps, |w, _, _| neighbors.push(w));
                if neighbors.len() < min_pts {
                    continue;
                }
                for &w in &neighbors {
                    if cluster[w as usize].is_none() {
                        cluster[w as usize] = Some(id);
                        queue.push_back(w);
                    }
                }
            }
        }
        for (k, &p) in members.iter().enumerate() {
            raw[p as usize] = cluster[k];
        }
    }
    ProposalSet::from_point_labels(cloud, labels, &raw)
}
