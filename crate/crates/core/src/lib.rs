//! Clustering of LiDAR thing points into instances without a learned offset
//! head.
//!
//! The main pipeline is [`sip::run_sip`]: voxel-balanced seed sampling, bubble
//! shrinking over a fixed radius graph, and connected-component grouping of
//! the shifted seeds. [`aggregation`] merges fragmented proposals through an
//! affinity graph, [`metrics`] scores predictions with panoptic quality, and
//! [`kitti_io`] reads and writes SemanticKITTI scan/label files.

pub mod aggregation;
pub mod baselines;
pub mod bench;
pub mod config;
pub mod error;
pub mod kitti_io;
pub mod metrics;
pub mod model;
pub mod pipeline;
pub mod sip;
pub mod spatial;
pub mod synth;
pub mod union_find;

pub use config::{ClassConfig, ClassInfo, MergeThreshold};
pub use error::{Error, Result};
pub use model::{
    validate_scan, Point, PointCloud, Proposal, ProposalSet, SeedSet, SemanticMap,
    ValidationIssue, ValidationReport,
};
