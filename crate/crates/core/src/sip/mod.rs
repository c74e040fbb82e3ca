//! Sparse instance proposals: sample seeds per voxel, shrink them toward
//! instance centers, then group them with connected-component labeling.

mod bubble;
mod grouping;
mod sampling;

use std::time::{Duration, Instant};

pub use bubble::{bubble_shrink, shrink_with_graph, BubbleGraph};
pub use grouping::{group_proposals, seed_components};
pub use sampling::{balanced_sample, participates};

use crate::config::ClassConfig;
use crate::model::{PointCloud, ProposalSet, SemanticMap};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SipOptions {
    /// Run bubble shrinking. Disabling it groups the raw voxel seeds.
    pub shift: bool,
}

impl Default for SipOptions {
    fn default() -> Self {
        SipOptions { shift: true }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct SipTimings {
    pub sample: Duration,
    pub shrink: Duration,
    pub group: Duration,
}

impl SipTimings {
    pub fn total(&self) -> Duration {
        self.sample + self.shrink + self.group
    }
}

pub fn run_sip(cloud: &PointCloud, labels: &SemanticMap, cfg: &ClassConfig) -> (ProposalSet, SipTimings) {
    run_sip_with(cloud, labels, cfg, SipOptions::default())
}

pub fn run_sip_with(
    cloud: &PointCloud,
    labels: &SemanticMap,
    cfg: &ClassConfig,
    options: SipOptions,
) -> (ProposalSet, SipTimings) {
    let mut timings = SipTimings::default();

    let t = Instant::now();
    let seeds = balanced_sample(cloud, labels, cfg);
    timings.sample = t.elapsed();

    let t = Instant::now();
    let shifted = if options.shift && !seeds.is_empty() {
        bubble_shrink(&seeds, cfg)
    } else {
        seeds
    };
    timings.shrink = t.elapsed();

    let t = Instant::now();
    let proposals = group_proposals(&shifted, cfg, cloud, labels);
    timings.group = t.elapsed();

    (proposals, timings)
}
