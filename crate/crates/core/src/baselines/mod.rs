//! Reference clusterers over raw thing points, run per class.

mod dbscan;
mod mean_shift;

pub use dbscan::dbscan;
pub use mean_shift::{mean_shift, MeanShiftParams};

use crate::config::ClassConfig;
use crate::model::{PointCloud, SemanticMap};
use crate::sip::participates;

/// Participating point indices grouped by class, classes in ascending order.
pub(crate) fn points_by_class(
    cloud: &PointCloud,
    labels: &SemanticMap,
    cfg: &ClassConfig,
) -> Vec<(u16, Vec<u32>)> {
    let mut by_class: std::collections::BTreeMap<u16, Vec<u32>> = Default::default();
    for i in 0..cloud.len().min(labels.len()) {
        if participates(cloud, labels, cfg, i) {
            by_class.entry(labels.semantic[i]).or_default().push(i as u32);
        }
    }
    by_class.into_iter().collect()
}
