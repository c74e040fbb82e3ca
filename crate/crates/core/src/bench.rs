//! Latency harness.
//!
//! Besides the production methods, this module carries two alternative seed
//! samplers used only as comparators for balanced sampling: farthest point
//! sampling and uniform random sampling. Both draw as many seeds per class as
//! balanced sampling would and then assign every point to its nearest seed.

use std::str::FromStr;
use std::time::{Duration, Instant};

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::config::ClassConfig;
use crate::error::{Error, Result};
use crate::model::{majority_class, PointCloud, ProposalSet, SeedSet, SemanticMap};
use crate::pipeline::{segment, Method, StageTimings};
use crate::sip::{balanced_sample, bubble_shrink, group_proposals, participates};
use crate::spatial::{dist2, SpatialHash};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sampler {
    Balanced,
    Farthest,
    Random,
}

/// Per-class seed budget matching what balanced sampling produces.
fn seed_budget(cloud: &PointCloud, labels: &SemanticMap, cfg: &ClassConfig) -> Vec<(u16, Vec<u32>, usize)> {
    let seeds = balanced_sample(cloud, labels, cfg);
    let mut per_class: std::collections::BTreeMap<u16, (Vec<u32>, usize)> = Default::default();
    for i in 0..cloud.len().min(labels.len()) {
        if participates(cloud, labels, cfg, i) {
            per_class.entry(labels.semantic[i]).or_default().0.push(i as u32);
        }
    }
    // Balanced seeds are counted against the class of each member point so the
    // budgets sum to the balanced seed count when voxels are class-pure.
    let members = seeds.members();
    for m in &members {
        let c = majority_class(m.iter().map(|&p| labels.semantic[p as usize]));
        if let Some(entry) = per_class.get_mut(&c) {
            entry.1 += 1;
        }
    }
    per_class
        .into_iter()
        .map(|(c, (pts, k))| {
            let k = k.clamp(1, pts.len());
            (c, pts, k)
        })
        .collect()
}

/// Farthest point sampling of `k` indices out of `points` (positions into the
/// slice), starting from the first one. Ties go to the lowest position.
pub fn farthest_point_sample(points: &[[f64; 3]], k: usize) -> Vec<usize> {
    let n = points.len();
    if n == 0 || k == 0 {
        return Vec::new();
    }
    let k = k.min(n);
    let mut chosen = Vec::with_capacity(k);
    let mut min_d2 = vec![f64::INFINITY; n];
    let mut current = 0usize;
    for _ in 0..k {
        chosen.push(current);
        let c = points[current];
        let mut best = (f64::NEG_INFINITY, 0usize);
        for (j, (p, d)) in points.iter().zip(min_d2.iter_mut()).enumerate() {
            let dd = dist2(*p, c);
            if dd < *d {
                *d = dd;
            }
            if *d > best.0 {
                best = (*d, j);
            }
        }
        current = best.1;
    }
    chosen
}

/// Seeds from an alternative sampler, with nearest-seed assignment.
pub fn sample_seeds(cloud: &PointCloud, labels: &SemanticMap, cfg: &ClassConfig, sampler: Sampler) -> SeedSet {
    if sampler == Sampler::Balanced {
        return balanced_sample(cloud, labels, cfg);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let mut seeds = SeedSet {
        positions: Vec::new(),
        classes: Vec::new(),
        assignment: vec![None; cloud.len()],
    };
    for (class, members, k) in seed_budget(cloud, labels, cfg) {
        let positions: Vec<[f64; 3]> = members.iter().map(|&p| cloud.xyz(p as usize)).collect();
        let mut picked = match sampler {
            Sampler::Farthest => farthest_point_sample(&positions, k),
            Sampler::Random => sample(&mut rng, positions.len(), k).into_vec(),
            Sampler::Balanced => unreachable!(),
        };
        picked.sort_unstable();
        let base = seeds.positions.len() as u32;
        let cell = cfg.radius(class).unwrap_or(1.0) / 2.0;
        let hash = SpatialHash::build(
            picked.iter().enumerate().map(|(s, &j)| (s as u32, positions[j])),
            cell,
        );
        for &j in &picked {
            seeds.positions.push(positions[j]);
            seeds.classes.push(class);
        }
        for (&p, &q) in members.iter().zip(&positions) {
            let (s, _) = hash.nearest(q).expect("class has seeds");
            seeds.assignment[p as usize] = Some(base + s);
        }
    }
    seeds
}

/// SIP with a chosen sampler; returns proposals and
/// `[sample, shrink, group, total]` timings.
pub fn run_sip_sampled(cloud: &PointCloud, labels: &SemanticMap, cfg: &ClassConfig, sampler: Sampler) -> (ProposalSet, StageTimings) {
    let start = Instant::now();
    let t = Instant::now();
    let seeds = sample_seeds(cloud, labels, cfg, sampler);
    let sample_t = t.elapsed();
    let t = Instant::now();
    let shifted = if seeds.is_empty() { seeds } else { bubble_shrink(&seeds, cfg) };
    let shrink_t = t.elapsed();
    let t = Instant::now();
    let set = group_proposals(&shifted, cfg, cloud, labels);
    let group_t = t.elapsed();
    (
        set,
        vec![
            ("sample", sample_t),
            ("shrink", shrink_t),
            ("group", group_t),
            ("total", start.elapsed()),
        ],
    )
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum BenchMethod {
    Pipeline(Method),
    SipFps,
    SipRandom,
}

impl BenchMethod {
    pub fn name(&self) -> String {
        match self {
            BenchMethod::Pipeline(m) => m.name(),
            BenchMethod::SipFps => "sip-fps".into(),
            BenchMethod::SipRandom => "sip-random".into(),
        }
    }

    pub fn run(&self, cloud: &PointCloud, labels: &SemanticMap, cfg: &ClassConfig) -> (ProposalSet, StageTimings) {
        match self {
            BenchMethod::Pipeline(m) => segment(cloud, labels, cfg, *m),
            BenchMethod::SipFps => run_sip_sampled(cloud, labels, cfg, Sampler::Farthest),
            BenchMethod::SipRandom => run_sip_sampled(cloud, labels, cfg, Sampler::Random),
        }
    }
}

impl FromStr for BenchMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "sip-fps" => Ok(BenchMethod::SipFps),
            "sip-random" => Ok(BenchMethod::SipRandom),
            other => other.parse().map(BenchMethod::Pipeline),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageStats {
    pub stage: String,
    pub samples: usize,
    pub median_ms: f64,
    pub p95_ms: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodReport {
    pub method: String,
    pub stages: Vec<StageStats>,
}

impl MethodReport {
    pub fn stage(&self, name: &str) -> Option<&StageStats> {
        self.stages.iter().find(|s| s.stage == name)
    }
}

/// Bench output. Serialized as JSON:
/// `{"scenes", "repeat", "thing_points": [..], "methods": [{"method",
/// "stages": [{"stage", "samples", "median_ms", "p95_ms"}]}]}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchReport {
    pub scenes: usize,
    pub repeat: usize,
    pub thing_points: Vec<usize>,
    pub methods: Vec<MethodReport>,
}

impl BenchReport {
    pub fn method(&self, name: &str) -> Option<&MethodReport> {
        self.methods.iter().find(|m| m.method == name)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    pub fn to_table(&self) -> String {
        use std::fmt::Write as _;
        let mut out = String::new();
        let _ = writeln!(
            out,
            "{:<16} {:<10} {:>8} {:>11} {:>11}",
            "method", "stage", "samples", "median ms", "p95 ms"
        );
        for m in &self.methods {
            for s in &m.stages {
                let _ = writeln!(
                    out,
                    "{:<16} {:<10} {:>8} {:>11.3} {:>11.3}",
                    m.method, s.stage, s.samples, s.median_ms, s.p95_ms
                );
            }
        }
        out
    }
}

pub fn median(sorted: &[f64]) -> f64 {
    match sorted.len() {
        0 => 0.0,
        n if n % 2 == 1 => sorted[n / 2],
        n => 0.5 * (sorted[n / 2 - 1] + sorted[n / 2]),
    }
}

/// Nearest-rank percentile of sorted samples.
pub fn percentile(sorted: &[f64], p: f64) -> f64 {
    if sorted.is_empty() {
        return 0.0;
    }
    let rank = (p / 100.0 * sorted.len() as f64).ceil() as usize;
    sorted[rank.clamp(1, sorted.len()) - 1]
}

fn ms(d: Duration) -> f64 {
    d.as_secs_f64() * 1e3
}

/// Runs every method `repeat` times on every scene.
pub fn run_bench(
    scenes: &[(PointCloud, SemanticMap)],
    cfg: &ClassConfig,
    methods: &[BenchMethod],
    repeat: usize,
) -> BenchReport {
    let thing_points = scenes
        .iter()
        .map(|(c, l)| (0..c.len()).filter(|&i| participates(c, l, cfg, i)).count())
        .collect();
    let mut reports = Vec::new();
    for method in methods {
        let mut stage_names: Vec<&'static str> = Vec::new();
        let mut samples: Vec<Vec<f64>> = Vec::new();
        for (cloud, labels) in scenes {
            for _ in 0..repeat {
                let (_, timings) = method.run(cloud, labels, cfg);
                for (name, d) in timings {
                    let slot = match stage_names.iter().position(|n| *n == name) {
                        Some(k) => k,
                        None => {
                            stage_names.push(name);
                            samples.push(Vec::new());
                            samples.len() - 1
                        }
                    };
                    samples[slot].push(ms(d));
                }
            }
        }
        let stages = stage_names
            .into_iter()
            .zip(samples)
            .map(|(name, mut v)| {
                v.sort_by(f64::total_cmp);
                StageStats {
                    stage: name.to_string(),
                    samples: v.len(),
                    median_ms: median(&v),
                    p95_ms: percentile(&v, 95.0),
                }
            })
            .collect();
        reports.push(MethodReport {
            method: method.name(),
            stages,
        });
    }
    BenchReport {
        scenes: scenes.len(),
        repeat,
        thing_points,
        methods: reports,
    }
}
