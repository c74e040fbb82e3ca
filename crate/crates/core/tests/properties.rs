mod common;

use common::{random_cloud, random_config, rng, THINGS};
use panoptic_sip::aggregation::{aggregate, GeometricAffinity};
use panoptic_sip::baselines::{dbscan, mean_shift};
use panoptic_sip::pipeline::{segment, Method};
use panoptic_sip::synth::{generate_scene, oracle_cluster, SceneSpec};
use panoptic_sip::{MergeThreshold, Point, PointCloud, ProposalSet, SemanticMap};
use proptest::prelude::*;
use rand::Rng;

/// Proposals as a sorted list of sorted member lists, independent of IDs.
fn partition(set: &ProposalSet) -> Vec<Vec<u32>> {
    let mut groups: Vec<Vec<u32>> = set.proposals.iter().map(|p| p.points.clone()).collect();
    groups.sort();
    groups
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 100, failure_persistence: None, ..ProptestConfig::default() })]

    #[test]
    fn dbscan_with_one_point_cores_is_connected_components(seed in any::<u64>(), eps in 0.1f64..1.5) {
        let mut r = rng(seed);
        let cfg = random_config(&mut r);
        let (cloud, labels) = random_cloud(&mut r, 1000);
        let radii: Vec<(u16, f64)> = THINGS.iter().map(|&c| (c, eps)).collect();
        let expected = oracle_cluster(&cloud, &labels, &radii).unwrap();
        let got = dbscan(&cloud, &labels, &cfg, eps, 1);
        prop_assert_eq!(partition(&got), partition(&expected));
    }

    #[test]
    fn unreachable_threshold_never_merges(seed in any::<u64>()) {
        let mut r = rng(seed);
        let mut cfg = random_config(&mut r);
        cfg.merge_threshold = MergeThreshold::Uniform(1.1);
        cfg.finish().unwrap();
        let (cloud, labels) = random_cloud(&mut r, 600);
        let (set, _) = segment(&cloud, &labels, &cfg, Method::Sip { shift: true });
        let merged = aggregate(&set, &cloud, &labels, &cfg, &GeometricAffinity::from_config(&cfg));
        prop_assert_eq!(merged, set);
    }

    #[test]
    fn oracle_ignores_point_order(seed in any::<u64>(), radius in 0.2f64..1.5) {
        let mut r = rng(seed);
        let (cloud, labels) = random_cloud(&mut r, 400);
        let radii: Vec<(u16, f64)> = THINGS.iter().map(|&c| (c, radius)).collect();
        let n = cloud.len();
        let perm: Vec<usize> = (0..n).rev().collect();
        let shuffled = PointCloud::new(perm.iter().map(|&i| cloud.points[i]).collect());
        let shuffled_labels = SemanticMap {
            semantic: perm.iter().map(|&i| labels.semantic[i]).collect(),
            instance: perm.iter().map(|&i| labels.instance[i]).collect(),
        };
        let a = oracle_cluster(&cloud, &labels, &radii).unwrap();
        let b = oracle_cluster(&shuffled, &shuffled_labels, &radii).unwrap();
        let mapped: Vec<Vec<u32>> = {
            let mut groups: Vec<Vec<u32>> = b
                .proposals
                .iter()
                .map(|p| {
                    let mut g: Vec<u32> = p.points.iter().map(|&i| perm[i as usize] as u32).collect();
                    g.sort_unstable();
                    g
                })
                .collect();
            groups.sort();
            groups
        };
        prop_assert_eq!(partition(&a), mapped);
    }
}

#[test]
fn aggregation_is_idempotent_on_fragmented_scenes() {
    let spec = SceneSpec::fragmented(2.5);
    let cfg = panoptic_sip::ClassConfig::semantic_kitti();
    let scorer = GeometricAffinity::from_config(&cfg);
    for seed in 0..5 {
        let (cloud, labels) = generate_scene(&spec, seed).unwrap();
        let (once, _) = segment(&cloud, &labels, &cfg, Method::SipIa { shift: true });
        let twice = aggregate(&once, &cloud, &labels, &cfg, &scorer);
        assert_eq!(twice, once, "seed {seed}");
    }
}

#[test]
fn generated_scenes_are_reproducible() {
    for spec in [SceneSpec::separable(), SceneSpec::recovery(), SceneSpec::fragmented(2.5)] {
        let a = generate_scene(&spec, 11).unwrap();
        let b = generate_scene(&spec, 11).unwrap();
        let c = generate_scene(&spec, 12).unwrap();
        assert_eq!(a, b);
        assert_ne!(a.0, c.0);
    }
}

#[test]
fn spec_toml_round_trip() {
    let spec = SceneSpec::recovery();
    let back = SceneSpec::from_toml_str(&spec.to_toml_string()).unwrap();
    assert_eq!(generate_scene(&back, 3).unwrap(), generate_scene(&spec, 3).unwrap());
}

#[test]
fn mean_shift_splits_distant_blobs() {
    let mut r = rng(5);
    let mut points = Vec::new();
    for center in [-6.0f32, 6.0] {
        for _ in 0..150 {
            points.push(Point::new(
                center + r.gen_range(-0.4..0.4),
                r.gen_range(-0.4..0.4),
                r.gen_range(-0.2..0.2),
                0.0,
            ));
        }
    }
    let cloud = PointCloud::new(points);
    let labels = SemanticMap::from_semantic(vec![10; 300]);
    let set = mean_shift(&cloud, &labels, &panoptic_sip::ClassConfig::semantic_kitti());
    assert_eq!(set.len(), 2);
    assert!(set.instance_of_point[..150].iter().all(|&i| i == set.instance_of_point[0]));
    assert!(set.instance_of_point[150..].iter().all(|&i| i == set.instance_of_point[150]));
}
