//! Random instance generators shared by the integration tests.
#![allow(dead_code)]

pub mod oracles;

use panoptic_sip::{ClassConfig, ClassInfo, MergeThreshold, Point, PointCloud, SeedSet, SemanticMap};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const THINGS: [u16; 3] = [1, 2, 3];
pub const STUFF: [u16; 2] = [8, 9];

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Three thing classes with random radii and two stuff classes.
pub fn random_config(rng: &mut ChaCha8Rng) -> ClassConfig {
    let mut classes: Vec<ClassInfo> = THINGS
        .iter()
        .map(|&id| ClassInfo {
            id,
            name: format!("thing{id}"),
            is_thing: true,
            radius: Some(rng.gen_range(0.3..2.0)),
            affinity_cutoff: if rng.gen_bool(0.5) {
                Some(rng.gen_range(0.3..3.0))
            } else {
                None
            },
        })
        .collect();
    classes.extend(STUFF.iter().map(|&id| ClassInfo {
        id,
        name: format!("stuff{id}"),
        is_thing: false,
        radius: None,
        affinity_cutoff: None,
    }));
    let mut cfg = ClassConfig::new(classes).unwrap();
    cfg.knn = rng.gen_range(1..8);
    cfg.merge_threshold = MergeThreshold::Uniform(rng.gen_range(0.05..0.95));
    cfg.iterations = rng.gen_range(1..6);
    cfg.extent = [[-20.0, 20.0], [-20.0, 20.0], [-5.0, 5.0]];
    cfg.finish().unwrap();
    cfg
}

/// `m` seeds scattered over a few blobs; density is chosen so that bubbles
/// hold anywhere from one to a few hundred members.
pub fn random_seeds(rng: &mut ChaCha8Rng, m: usize) -> SeedSet {
    let blobs = rng.gen_range(1..8);
    let centers: Vec<[f64; 3]> = (0..blobs)
        .map(|_| [rng.gen_range(-10.0..10.0), rng.gen_range(-10.0..10.0), rng.gen_range(-1.0..1.0)])
        .collect();
    let spread = rng.gen_range(0.2..4.0);
    let mut positions = Vec::with_capacity(m);
    let mut classes = Vec::with_capacity(m);
    for _ in 0..m {
        let b = rng.gen_range(0..blobs);
        let c = centers[b];
        positions.push([
            c[0] + rng.gen_range(-spread..spread),
            c[1] + rng.gen_range(-spread..spread),
            c[2] + rng.gen_range(-spread..spread) * 0.5,
        ]);
        classes.push(if rng.gen_bool(0.8) { THINGS[b % 3] } else { THINGS[rng.gen_range(0..3)] });
    }
    SeedSet {
        positions,
        classes,
        assignment: Vec::new(),
    }
}

/// A labeled cloud of `n` points: several thing blobs of random size plus
/// stuff and ignored points. Instance IDs follow the blob.
pub fn random_cloud(rng: &mut ChaCha8Rng, n: usize) -> (PointCloud, SemanticMap) {
    let blobs = rng.gen_range(1..10);
    let centers: Vec<([f64; 3], f64, u16)> = (0..blobs)
        .map(|_| {
            (
                [rng.gen_range(-15.0..15.0), rng.gen_range(-15.0..15.0), rng.gen_range(-2.0..2.0)],
                rng.gen_range(0.1..2.5),
                THINGS[rng.gen_range(0..3)],
            )
        })
        .collect();
    let mut points = Vec::with_capacity(n);
    let mut semantic = Vec::with_capacity(n);
    let mut instance = Vec::with_capacity(n);
    for _ in 0..n {
        let roll: f64 = rng.gen();
        if roll < 0.15 {
            points.push(Point::new(
                rng.gen_range(-18.0..18.0),
                rng.gen_range(-18.0..18.0),
                rng.gen_range(-3.0..3.0),
                0.0,
            ));
            semantic.push(if roll < 0.03 { 0 } else { STUFF[rng.gen_range(0..2)] });
            instance.push(0);
            continue;
        }
        let b = rng.gen_range(0..blobs);
        let (c, s, class) = centers[b];
        points.push(Point::new(
            (c[0] + rng.gen_range(-s..s)) as f32,
            (c[1] + rng.gen_range(-s..s)) as f32,
            (c[2] + rng.gen_range(-s..s)) as f32,
            rng.gen(),
        ));
        // A few points carry a different thing class than their blob.
        semantic.push(if rng.gen_bool(0.05) { THINGS[rng.gen_range(0..3)] } else { class });
        instance.push(b as u16 + 1);
    }
    (PointCloud::new(points), SemanticMap { semantic, instance })
}

/// Classes used for metric tests: ignore 0, stuff 40 and 50, things 10 and 30.
pub const METRIC_CLASSES: [u16; 5] = [0, 40, 50, 10, 30];

/// Ground truth plus a perturbed prediction: flipped classes, split and
/// merged instances, renumbered IDs.
pub fn random_panoptic_pair(rng: &mut ChaCha8Rng, n: usize) -> (SemanticMap, SemanticMap) {
    let mut gt = SemanticMap::from_semantic(Vec::with_capacity(n));
    let seg_len = rng.gen_range(1..40);
    let mut class = METRIC_CLASSES[rng.gen_range(0..5)];
    let mut inst = 1u16;
    for i in 0..n {
        if i % seg_len == 0 {
            class = METRIC_CLASSES[rng.gen_range(0..5)];
            inst = rng.gen_range(0..6);
        }
        gt.semantic.push(class);
        gt.instance.push(inst);
    }
    let flip = rng.gen_range(0.0..0.4);
    let split = rng.gen_range(0.0..0.3);
    let offset: u16 = rng.gen_range(0..50);
    let mut pred = gt.clone();
    for i in 0..n {
        if rng.gen_bool(flip) {
            pred.semantic[i] = METRIC_CLASSES[rng.gen_range(0..5)];
        }
        if rng.gen_bool(split) {
            pred.instance[i] = rng.gen_range(0..4);
        } else {
            pred.instance[i] = pred.instance[i].wrapping_add(offset);
        }
    }
    (pred, gt)
}

pub fn dist(a: [f64; 3], b: [f64; 3]) -> f64 {
    ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2) + (a[2] - b[2]).powi(2)).sqrt()
}
