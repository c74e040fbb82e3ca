use serde::Serialize;

use crate::config::ClassConfig;
use crate::error::{Error, Result};

/// One LiDAR return, stored exactly as it appears in a `.bin` record.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Point {
    pub x: f32,
    pub y: f32,
    pub z: f32,
    pub intensity: f32,
}

impl Point {
    pub fn new(x: f32, y: f32, z: f32, intensity: f32) -> Self {
        Point { x, y, z, intensity }
    }

    #[inline]
    pub fn xyz(&self) -> [f64; 3] {
        [self.x as f64, self.y as f64, self.z as f64]
    }

    #[inline]
    pub fn is_finite(&self) -> bool {
        self.x.is_finite() && self.y.is_finite() && self.z.is_finite()
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct PointCloud {
    pub points: Vec<Point>,
    /// Problems noticed while reading the cloud. Readers never drop points.
    pub warnings: Vec<ValidationIssue>,
}

impl PointCloud {
    pub fn new(points: Vec<Point>) -> Self {
        PointCloud {
            points,
            warnings: Vec::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    #[inline]
    pub fn xyz(&self, i: usize) -> [f64; 3] {
        self.points[i].xyz()
    }
}

/// Per-point semantic class and instance ID. Instance 0 means "no instance".
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct SemanticMap {
    pub semantic: Vec<u16>,
    pub instance: Vec<u16>,
}

impl SemanticMap {
    pub fn new(semantic: Vec<u16>, instance: Vec<u16>) -> Result<Self> {
        if semantic.len() != instance.len() {
            return Err(Error::Invalid(format!(
                "semantic has {} entries but instance has {}",
                semantic.len(),
                instance.len()
            )));
        }
        Ok(SemanticMap { semantic, instance })
    }

    /// Semantic labels only; every instance is 0.
    pub fn from_semantic(semantic: Vec<u16>) -> Self {
        let instance = vec![0; semantic.len()];
        SemanticMap { semantic, instance }
    }

    pub fn len(&self) -> usize {
        self.semantic.len()
    }

    pub fn is_empty(&self) -> bool {
        self.semantic.is_empty()
    }

    /// Packs one point as a SemanticKITTI label word.
    #[inline]
    pub fn word(&self, i: usize) -> u32 {
        (self.instance[i] as u32) << 16 | self.semantic[i] as u32
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ValidationIssue {
    LengthMismatch {
        points: usize,
        semantic: usize,
        instance: usize,
    },
    NonFinite {
        index: usize,
    },
    InstanceOnStuff {
        index: usize,
        class: u16,
        instance: u16,
    },
}

impl std::fmt::Display for ValidationIssue {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            ValidationIssue::LengthMismatch {
                points,
                semantic,
                instance,
            } => write!(
                f,
                "length mismatch: {points} points, {semantic} semantic labels, {instance} instance labels"
            ),
            ValidationIssue::NonFinite { index } => {
                write!(f, "point {index} has a non-finite coordinate")
            }
            ValidationIssue::InstanceOnStuff {
                index,
                class,
                instance,
            } => write!(
                f,
                "point {index} carries instance {instance} on non-thing class {class}"
            ),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize)]
pub struct ValidationReport {
    pub issues: Vec<ValidationIssue>,
}

impl ValidationReport {
    pub fn is_empty(&self) -> bool {
        self.issues.is_empty()
    }
}

/// Checks a cloud/label pair against the class table. Never fails; an empty
/// report means the pair is well-formed.
pub fn validate_scan(cloud: &PointCloud, labels: &SemanticMap, cfg: &ClassConfig) -> ValidationReport {
    let mut issues = Vec::new();
    let n = cloud.len();
    if labels.semantic.len() != n || labels.instance.len() != n {
        issues.push(ValidationIssue::LengthMismatch {
            points: n,
            semantic: labels.semantic.len(),
            instance: labels.instance.len(),
        });
    }
    for (index, p) in cloud.points.iter().enumerate() {
        if !p.is_finite() {
            issues.push(ValidationIssue::NonFinite { index });
        }
    }
    let paired = labels.semantic.len().min(labels.instance.len());
    for index in 0..paired {
        let (class, instance) = (labels.semantic[index], labels.instance[index]);
        if instance != 0 && !cfg.is_thing(class) {
            issues.push(ValidationIssue::InstanceOnStuff {
                index,
                class,
                instance,
            });
        }
    }
    ValidationReport { issues }
}

/// Sparse seed points with their class and the point-to-seed assignment.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct SeedSet {
    pub positions: Vec<[f64; 3]>,
    pub classes: Vec<u16>,
    /// Dominating seed of every point; `None` for points that do not take part
    /// (stuff, outside the extent, non-finite).
    pub assignment: Vec<Option<u32>>,
}

impl SeedSet {
    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    /// Point indices dominated by each seed, ascending.
    pub fn members(&self) -> Vec<Vec<u32>> {
        let mut members = vec![Vec::new(); self.len()];
        for (i, s) in self.assignment.iter().enumerate() {
            if let Some(s) = s {
                members[*s as usize].push(i as u32);
            }
        }
        members
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Proposal {
    pub id: u32,
    pub class: u16,
    /// Member point indices, ascending.
    pub points: Vec<u32>,
    pub centroid: [f64; 3],
}

/// Instance proposals over one scan. IDs run densely from 1 to `len()`;
/// `instance_of_point` holds 0 for points that belong to no proposal.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ProposalSet {
    pub instance_of_point: Vec<u32>,
    pub proposals: Vec<Proposal>,
}

impl ProposalSet {
    pub fn empty(n_points: usize) -> Self {
        ProposalSet {
            instance_of_point: vec![0; n_points],
            proposals: Vec::new(),
        }
    }

    /// Builds proposals from point groups, numbering them in the given order.
    /// Empty groups are skipped.
    pub fn from_groups(cloud: &PointCloud, labels: &SemanticMap, groups: Vec<Vec<u32>>) -> Self {
        let mut set = ProposalSet::empty(cloud.len());
        for mut points in groups.into_iter().filter(|g| !g.is_empty()) {
            points.sort_unstable();
            let id = set.proposals.len() as u32 + 1;
            for &p in &points {
                set.instance_of_point[p as usize] = id;
            }
            let class = majority_class(points.iter().map(|&p| labels.semantic[p as usize]));
            let centroid = centroid(cloud, &points);
            set.proposals.push(Proposal {
                id,
                class,
                points,
                centroid,
            });
        }
        set
    }

    /// Builds proposals from raw per-point group labels (`None` = no group).
    /// Groups are numbered by their lowest member point index.
    pub fn from_point_labels(cloud: &PointCloud, labels: &SemanticMap, raw: &[Option<u32>]) -> Self {
        let mut remap = rustc_hash::FxHashMap::default();
        let mut groups: Vec<Vec<u32>> = Vec::new();
        for (i, g) in raw.iter().enumerate() {
            if let Some(g) = g {
                let slot = *remap.entry(*g).or_insert_with(|| {
                    groups.push(Vec::new());
                    groups.len() - 1
                });
                groups[slot].push(i as u32);
            }
        }
        ProposalSet::from_groups(cloud, labels, groups)
    }

    pub fn len(&self) -> usize {
        self.proposals.len()
    }

    pub fn is_empty(&self) -> bool {
        self.proposals.is_empty()
    }

    /// Semantic labels from `labels` with instance IDs taken from the
    /// proposals.
    pub fn to_semantic_map(&self, labels: &SemanticMap) -> Result<SemanticMap> {
        if self.proposals.len() > u16::MAX as usize {
            return Err(Error::Invalid(format!(
                "{} proposals do not fit in 16-bit instance IDs",
                self.proposals.len()
            )));
        }
        if labels.len() != self.instance_of_point.len() {
            return Err(Error::Invalid(format!(
                "labels cover {} points but proposals cover {}",
                labels.len(),
                self.instance_of_point.len()
            )));
        }
        Ok(SemanticMap {
            semantic: labels.semantic.clone(),
            instance: self.instance_of_point.iter().map(|&i| i as u16).collect(),
        })
    }
}

/// Most frequent class; ties go to the lowest class ID.
pub fn majority_class(classes: impl IntoIterator<Item = u16>) -> u16 {
    let mut counts: Vec<(u16, u32)> = Vec::new();
    for c in classes {
        match counts.iter_mut().find(|(k, _)| *k == c) {
            Some((_, n)) => *n += 1,
            None => counts.push((c, 1)),
        }
    }
    counts
        .into_iter()
        .max_by(|a, b| a.1.cmp(&b.1).then(b.0.cmp(&a.0)))
        .map(|(c, _)| c)
        .unwrap_or(0)
}

/// Mean position of the given points, summed in the given order.
pub fn centroid(cloud: &PointCloud, points: &[u32]) -> [f64; 3] {
    let mut sum = [0.0f64; 3];
    for &p in points {
        let q = cloud.xyz(p as usize);
        sum[0] += q[0];
        sum[1] += q[1];
        sum[2] += q[2];
    }
    let n = points.len().max(1) as f64;
    [sum[0] / n, sum[1] / n, sum[2] / n]
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg() -> ClassConfig {
        ClassConfig::semantic_kitti()
    }

    fn cloud3() -> PointCloud {
        PointCloud::new(vec![
            Point::new(0.0, 0.0, 0.0, 0.1),
            Point::new(1.0, 0.0, 0.0, 0.2),
            Point::new(2.0, 0.0, 0.0, 0.3),
        ])
    }

    #[test]
    fn well_formed_scan_has_empty_report() {
        let labels = SemanticMap::new(vec![10, 10, 40], vec![1, 1, 0]).unwrap();
        assert!(validate_scan(&cloud3(), &labels, &cfg()).is_empty());
    }

    #[test]
    fn short_labels_reported() {
        let labels = SemanticMap::new(vec![10, 10], vec![1, 1]).unwrap();
        let report = validate_scan(&cloud3(), &labels, &cfg());
        assert_eq!(
            report.issues,
            vec![ValidationIssue::LengthMismatch {
                points: 3,
                semantic: 2,
                instance: 2
            }]
        );
    }

    #[test]
    fn instance_on_stuff_reported() {
        let labels = SemanticMap::new(vec![10, 40, 40], vec![1, 5, 0]).unwrap();
        let report = validate_scan(&cloud3(), &labels, &cfg());
        assert_eq!(
            report.issues,
            vec![ValidationIssue::InstanceOnStuff {
                index: 1,
                class: 40,
                instance: 5
            }]
        );
    }

    #[test]
    fn non_finite_reported() {
        let mut cloud = cloud3();
        cloud.points[2].y = f32::NAN;
        let labels = SemanticMap::from_semantic(vec![40; 3]);
        let report = validate_scan(&cloud, &labels, &cfg());
        assert_eq!(report.issues, vec![ValidationIssue::NonFinite { index: 2 }]);
    }

    #[test]
    fn majority_ties_go_to_lowest_class() {
        assert_eq!(majority_class([30, 10, 30, 10]), 10);
        assert_eq!(majority_class([30, 30, 10]), 30);
        assert_eq!(majority_class([]), 0);
    }

    #[test]
    fn groups_numbered_in_order() {
        let cloud = cloud3();
        let labels = SemanticMap::from_semantic(vec![10, 10, 30]);
        let set = ProposalSet::from_point_labels(&cloud, &labels, &[Some(7), None, Some(3)]);
        assert_eq!(set.instance_of_point, vec![1, 0, 2]);
        assert_eq!(set.proposals[1].class, 30);
        assert_eq!(set.proposals[1].centroid, [2.0, 0.0, 0.0]);
    }
}
