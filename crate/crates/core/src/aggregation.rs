//! Instance aggregation: score affinities between nearby proposals and merge
//! the ones above the class threshold with connected-component labeling.
//!
//! Scores come from an [`AffinityScorer`]. The default
//! [`GeometricAffinity`] decays linearly with the gap between two proposals'
//! point sets; any other scorer (a learned one, say) can be plugged in.

use crate::config::ClassConfig;
use crate::model::{PointCloud, ProposalSet, SemanticMap};
use crate::spatial::{dist2, SpatialHash};
use crate::union_find::UnionFind;

pub trait AffinityScorer {
    /// Affinity in `[0, 1]` between proposals at positions `i` and `j` of
    /// `proposals.proposals`. Only called for same-class pairs.
    fn score(&self, i: usize, j: usize, proposals: &ProposalSet, cloud: &PointCloud) -> f64;
}

/// `s = max(0, 1 - gap / g_max)` where `gap` is the smallest point-to-point
/// distance between the two proposals and `g_max` the class cutoff.
#[derive(Debug, Clone)]
pub struct GeometricAffinity {
    cutoffs: Vec<(u16, f64)>,
    fallback: Option<f64>,
}

impl GeometricAffinity {
    /// Per-class cutoffs from the config (`affinity_cutoff`, else `r_c`).
    pub fn from_config(cfg: &ClassConfig) -> Self {
        GeometricAffinity {
            cutoffs: cfg
                .thing_classes()
                .filter_map(|c| cfg.affinity_cutoff(c.id).map(|g| (c.id, g)))
                .collect(),
            fallback: None,
        }
    }

    /// The same cutoff for every class.
    pub fn uniform(cutoff: f64) -> Self {
        GeometricAffinity {
            cutoffs: Vec::new(),
            fallback: Some(cutoff),
        }
    }

    pub fn cutoff(&self, class: u16) -> Option<f64> {
        self.cutoffs
            .iter()
            .find(|(c, _)| *c == class)
            .map(|&(_, g)| g)
            .or(self.fallback)
    }
}

impl AffinityScorer for GeometricAffinity {
    fn score(&self, i: usize, j: usize, proposals: &ProposalSet, cloud: &PointCloud) -> f64 {
        let class = proposals.proposals[i].class;
        match self.cutoff(class) {
            Some(g_max) => geometric_affinity(i, j, proposals, cloud, g_max),
            None => 0.0,
        }
    }
}

/// Gap-based affinity of two proposals with cutoff `g_max`.
pub fn geometric_affinity(i: usize, j: usize, proposals: &ProposalSet, cloud: &PointCloud, g_max: f64) -> f64 {
    match min_gap(&proposals.proposals[i].points, &proposals.proposals[j].points, cloud, g_max) {
        Some(gap) => gap_to_affinity(gap, g_max),
        None => 0.0,
    }
}

#[inline]
pub fn gap_to_affinity(gap: f64, g_max: f64) -> f64 {
    (1.0 - gap / g_max).clamp(0.0, 1.0)
}

/// Smallest distance between two point sets, if it is below `limit`.
pub fn min_gap(a: &[u32], b: &[u32], cloud: &PointCloud, limit: f64) -> Option<f64> {
    if a.is_empty() || b.is_empty() {
        return None;
    }
    let (small, large) = if a.len() <= b.len() { (a, b) } else { (b, a) };
    let (lo_s, hi_s) = bounds(small, cloud);
    let (lo_l, hi_l) = bounds(large, cloud);
    let mut box_gap2 = 0.0;
    for k in 0..3 {
        let d = (lo_l[k] - hi_s[k]).max(lo_s[k] - hi_l[k]).max(0.0);
        box_gap2 += d * d;
    }
    if box_gap2 >= limit * limit {
        return None;
    }
    let hash = SpatialHash::build(large.iter().map(|&p| (p, cloud.xyz(p as usize))), limit);
    let mut best: Option<f64> = None;
    for &p in small {
        let q = cloud.xyz(p as usize);
        let r = best.map_or(limit, f64::sqrt);
        if let Some(d2) = hash.min_dist2_within(q, r) {
            if best.is_none_or(|b| d2 < b) {
                best = Some(d2);
                if d2 == 0.0 {
                    break;
                }
            }
        }
    }
    best.map(f64::sqrt)
}

fn bounds(points: &[u32], cloud: &PointCloud) -> ([f64; 3], [f64; 3]) {
    let mut lo = [f64::INFINITY; 3];
    let mut hi = [f64::NEG_INFINITY; 3];
    for &p in points {
        let q = cloud.xyz(p as usize);
        for k in 0..3 {
            lo[k] = lo[k].min(q[k]);
            hi[k] = hi[k].max(q[k]);
        }
    }
    (lo, hi)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AffinityEdge {
    /// Positions into `ProposalSet::proposals`, `i < j`.
    pub i: u32,
    pub j: u32,
    pub score: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct AffinityGraph {
    pub pairs: Vec<AffinityEdge>,
}

/// Unordered candidate pairs: each proposal with its `k` nearest proposals by
/// centroid distance (ties by index). Sorted, without duplicates.
pub fn candidate_pairs(proposals: &ProposalSet, k: usize) -> Vec<(usize, usize)> {
    let o = proposals.len();
    let mut pairs = Vec::with_capacity(o * k);
    let mut order: Vec<(f64, usize)> = Vec::with_capacity(o);
    for i in 0..o {
        let ci = proposals.proposals[i].centroid;
        order.clear();
        order.extend(
            (0..o)
                .filter(|&j| j != i)
                .map(|j| (dist2(ci, proposals.proposals[j].centroid), j)),
        );
        let take = k.min(order.len());
        if take == 0 {
            continue;
        }
        let cmp = |a: &(f64, usize), b: &(f64, usize)| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1));
        if take < order.len() {
            order.select_nth_unstable_by(take - 1, cmp);
        }
        for &(_, j) in &order[..take] {
            pairs.push((i.min(j), i.max(j)));
        }
    }
    pairs.sort_unstable();
    pairs.dedup();
    pairs
}

/// Scores every candidate pair once. Cross-class pairs get affinity 0.
pub fn score_affinities(
    proposals: &ProposalSet,
    cloud: &PointCloud,
    scorer: &dyn AffinityScorer,
    k: usize,
) -> AffinityGraph {
    let pairs = candidate_pairs(proposals, k)
        .into_iter()
        .map(|(i, j)| {
            let same_class = proposals.proposals[i].class == proposals.proposals[j].class;
            let score = if same_class {
                let s = scorer.score(i, j, proposals, cloud);
                if s.is_nan() {
                    0.0
                } else {
                    s.clamp(0.0, 1.0)
                }
            } else {
                0.0
            };
            AffinityEdge {
                i: i as u32,
                j: j as u32,
                score,
            }
        })
        .collect();
    AffinityGraph { pairs }
}

/// Merges proposals joined by same-class edges with affinity above the class
/// threshold. Merged proposals are renumbered by their lowest original ID.
pub fn merge(
    proposals: &ProposalSet,
    graph: &AffinityGraph,
    cfg: &ClassConfig,
    cloud: &PointCloud,
    labels: &SemanticMap,
) -> ProposalSet {
    let o = proposals.len();
    let mut uf = UnionFind::new(o);
    for e in &graph.pairs {
        let (a, b) = (&proposals.proposals[e.i as usize], &proposals.proposals[e.j as usize]);
        if a.class == b.class && e.score > cfg.merge_threshold(a.class) {
            uf.union(e.i, e.j);
        }
    }
    let (component, count) = uf.labels();
    let mut groups: Vec<Vec<u32>> = vec![Vec::new(); count];
    for (p, c) in proposals.proposals.iter().zip(&component) {
        groups[*c as usize].extend_from_slice(&p.points);
    }
    let mut merged = ProposalSet::from_groups(cloud, labels, groups);
    merged.instance_of_point.resize(proposals.instance_of_point.len(), 0);
    merged
}

/// Scores affinities with `scorer` over `cfg.knn` candidates and merges.
pub fn aggregate(
    proposals: &ProposalSet,
    cloud: &PointCloud,
    labels: &SemanticMap,
    cfg: &ClassConfig,
    scorer: &dyn AffinityScorer,
) -> ProposalSet {
    let graph = score_affinities(proposals, cloud, scorer, cfg.knn);
    merge(proposals, &graph, cfg, cloud, labels)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::MergeThreshold;
    use crate::model::Point;

    /// Proposals of single points at the given x coordinates, one class.
    fn line(xs: &[f32], class: u16) -> (PointCloud, SemanticMap, ProposalSet) {
        let cloud = PointCloud::new(xs.iter().map(|&x| Point::new(x, 0.0, 0.0, 0.0)).collect());
        let labels = SemanticMap::from_semantic(vec![class; xs.len()]);
        let groups = (0..xs.len() as u32).map(|i| vec![i]).collect();
        let set = ProposalSet::from_groups(&cloud, &labels, groups);
        (cloud, labels, set)
    }

    #[test]
    fn single_proposal_has_no_pairs() {
        let (cloud, _, set) = line(&[0.0], 10);
        let graph = score_affinities(&set, &cloud, &GeometricAffinity::uniform(1.0), 5);
        assert!(graph.pairs.is_empty());
    }

    #[test]
    fn gap_formula() {
        let (cloud, _, set) = line(&[0.0, 0.0, 0.5, 5.0], 10);
        assert_eq!(geometric_affinity(0, 1, &set, &cloud, 1.0), 1.0);
        assert_eq!(geometric_affinity(0, 2, &set, &cloud, 1.0), 0.5);
        assert_eq!(geometric_affinity(0, 3, &set, &cloud, 1.0), 0.0);
        assert_eq!(geometric_affinity(2, 3, &set, &cloud, 4.5), 0.0);
    }

    #[test]
    fn cross_class_pairs_score_zero() {
        let cloud = PointCloud::new(vec![Point::default(); 2]);
        let labels = SemanticMap::from_semantic(vec![10, 30]);
        let set = ProposalSet::from_groups(&cloud, &labels, vec![vec![0], vec![1]]);
        let graph = score_affinities(&set, &cloud, &GeometricAffinity::uniform(1.0), 5);
        assert_eq!(graph.pairs, vec![AffinityEdge { i: 0, j: 1, score: 0.0 }]);
    }

    #[test]
    fn unreachable_threshold_is_identity() {
        let (cloud, labels, set) = line(&[0.0, 0.1, 0.2], 10);
        let mut cfg = ClassConfig::semantic_kitti();
        cfg.merge_threshold = MergeThreshold::Uniform(1.1);
        let graph = score_affinities(&set, &cloud, &GeometricAffinity::uniform(1.0), 5);
        assert_eq!(merge(&set, &graph, &cfg, &cloud, &labels), set);
    }

    #[test]
    fn chain_merges_transitively() {
        let (cloud, labels, set) = line(&[0.0, 0.4, 0.8], 10);
        let cfg = ClassConfig::semantic_kitti();
        let graph = AffinityGraph {
            pairs: vec![
                AffinityEdge { i: 0, j: 1, score: 0.9 },
                AffinityEdge { i: 1, j: 2, score: 0.9 },
                AffinityEdge { i: 0, j: 2, score: 0.0 },
            ],
        };
        let merged = merge(&set, &graph, &cfg, &cloud, &labels);
        assert_eq!(merged.len(), 1);
        assert_eq!(merged.proposals[0].points, vec![0, 1, 2]);
        assert!((merged.proposals[0].centroid[0] - 0.4).abs() < 1e-7);
    }

    #[test]
    fn knn_candidates() {
        let (_, _, set) = line(&[0.0, 1.0, 2.0, 10.0], 10);
        assert_eq!(candidate_pairs(&set, 1), vec![(0, 1), (1, 2), (2, 3)]);
        assert_eq!(candidate_pairs(&set, 3).len(), 6);
    }

    #[test]
    fn min_gap_matches_scan() {
        let cloud = PointCloud::new(
            (0..60)
                .map(|i| {
                    let t = i as f32 * 0.7;
                    Point::new(t.sin() * 4.0, t.cos() * 3.0, (i % 5) as f32 * 0.1, 0.0)
                })
                .collect(),
        );
        let a: Vec<u32> = (0..30).collect();
        let b: Vec<u32> = (30..60).collect();
        let brute = a
            .iter()
            .flat_map(|&i| b.iter().map(move |&j| (i, j)))
            .map(|(i, j)| dist2(cloud.xyz(i as usize), cloud.xyz(j as usize)))
            .fold(f64::INFINITY, f64::min)
            .sqrt();
        let got = min_gap(&a, &b, &cloud, 10.0).unwrap();
        assert!((got - brute).abs() < 1e-12);
        assert_eq!(min_gap(&a, &b, &cloud, brute * 0.99), None);
    }
}
