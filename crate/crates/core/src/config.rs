//! Class table and pipeline geometry.
//!
//! Configs are TOML. Only `classes` is required:
//!
//! ```toml
//! L = 4
//! voxel_size = [0.2, 0.2, 0.1]
//! extent = [[-48.0, 48.0], [-48.0, 48.0], [-3.0, 1.8]]
//! merge_threshold = 0.5            # or { default = 0.5, truck = 0.3, "20" = 0.3 }
//! knn = 5
//! ignore = [0]
//!
//! [[classes]]
//! id = 10
//! name = "car"
//! thing = true
//! r_c = 1.5
//! affinity_cutoff = 1.5           # optional, defaults to r_c
//! ```

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const DEFAULT_ITERATIONS: usize = 4;
pub const DEFAULT_VOXEL_SIZE: [f64; 3] = [0.2, 0.2, 0.1];
pub const DEFAULT_EXTENT: [[f64; 2]; 3] = [[-48.0, 48.0], [-48.0, 48.0], [-3.0, 1.8]];
pub const DEFAULT_MERGE_THRESHOLD: f64 = 0.5;
pub const DEFAULT_KNN: usize = 5;

const ABSENT: u16 = u16::MAX;

#[derive(Debug, Clone, PartialEq)]
pub struct ClassInfo {
    pub id: u16,
    pub name: String,
    pub is_thing: bool,
    /// Bubble radius `r_c` in meters. Required for thing classes.
    pub radius: Option<f64>,
    /// Gap at which the geometric affinity reaches zero. Defaults to `radius`.
    pub affinity_cutoff: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum MergeThreshold {
    Uniform(f64),
    PerClass {
        default: f64,
        classes: BTreeMap<u16, f64>,
    },
}

impl MergeThreshold {
    pub fn for_class(&self, class: u16) -> f64 {
        match self {
            MergeThreshold::Uniform(t) => *t,
            MergeThreshold::PerClass { default, classes } => {
                classes.get(&class).copied().unwrap_or(*default)
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClassConfig {
    classes: Vec<ClassInfo>,
    /// Number of bubble-shrinking iterations.
    pub iterations: usize,
    pub voxel_size: [f64; 3],
    /// Axis-aligned `[min, max)` bounds per axis. The voxel grid is anchored
    /// at the minimum corner.
    pub extent: [[f64; 2]; 3],
    pub merge_threshold: MergeThreshold,
    /// Candidate neighbors per proposal when scoring affinities.
    pub knn: usize,
    /// Class IDs excluded from evaluation.
    pub ignore: Vec<u16>,
    lookup: Vec<u16>,
}

impl ClassConfig {
    pub fn new(classes: Vec<ClassInfo>) -> Result<Self> {
        let mut cfg = ClassConfig {
            classes,
            iterations: DEFAULT_ITERATIONS,
            voxel_size: DEFAULT_VOXEL_SIZE,
            extent: DEFAULT_EXTENT,
            merge_threshold: MergeThreshold::Uniform(DEFAULT_MERGE_THRESHOLD),
            knn: DEFAULT_KNN,
            ignore: vec![0],
            lookup: Vec::new(),
        };
        cfg.finish()?;
        Ok(cfg)
    }

    /// Re-checks every invariant and rebuilds the class lookup. Call after
    /// mutating public fields.
    pub fn finish(&mut self) -> Result<()> {
        if self.classes.is_empty() {
            return Err(Error::config("classes", "class table is empty"));
        }
        if self.iterations < 1 {
            return Err(Error::config("L", "must be at least 1"));
        }
        for (axis, s) in self.voxel_size.iter().enumerate() {
            if !(s.is_finite() && *s > 0.0) {
                return Err(Error::config(
                    "voxel_size",
                    format!("component {axis} must be positive, got {s}"),
                ));
            }
        }
        for (axis, [lo, hi]) in self.extent.iter().enumerate() {
            if !(lo.is_finite() && hi.is_finite() && lo < hi) {
                return Err(Error::config(
                    "extent",
                    format!("axis {axis} needs min < max, got [{lo}, {hi}]"),
                ));
            }
        }
        if self.knn < 1 {
            return Err(Error::config("knn", "must be at least 1"));
        }
        let max_id = self.classes.iter().map(|c| c.id).max().unwrap_or(0);
        let mut lookup = vec![ABSENT; max_id as usize + 1];
        for (pos, class) in self.classes.iter().enumerate() {
            if lookup[class.id as usize] != ABSENT {
                return Err(Error::config(
                    "classes",
                    format!("duplicate class id {}", class.id),
                ));
            }
            if class.is_thing {
                match class.radius {
                    Some(r) if r.is_finite() && r > 0.0 => {}
                    Some(r) => {
                        return Err(Error::config(
                            "r_c",
                            format!("class {} ({}) has non-positive radius {r}", class.id, class.name),
                        ))
                    }
                    None => {
                        return Err(Error::config(
                            "r_c",
                            format!("thing class {} ({}) has no radius", class.id, class.name),
                        ))
                    }
                }
            }
            if let Some(g) = class.affinity_cutoff {
                if !(g.is_finite() && g > 0.0) {
                    return Err(Error::config(
                        "affinity_cutoff",
                        format!("class {} ({}) has non-positive cutoff {g}", class.id, class.name),
                    ));
                }
            }
            lookup[class.id as usize] = pos as u16;
        }
        self.lookup = lookup;
        Ok(())
    }

    pub fn classes(&self) -> &[ClassInfo] {
        &self.classes
    }

    pub fn class(&self, id: u16) -> Option<&ClassInfo> {
        match self.lookup.get(id as usize) {
            Some(&pos) if pos != ABSENT => Some(&self.classes[pos as usize]),
            _ => None,
        }
    }

    #[inline]
    pub fn is_thing(&self, id: u16) -> bool {
        self.class(id).is_some_and(|c| c.is_thing)
    }

    #[inline]
    pub fn radius(&self, id: u16) -> Option<f64> {
        self.class(id).and_then(|c| if c.is_thing { c.radius } else { None })
    }

    pub fn affinity_cutoff(&self, id: u16) -> Option<f64> {
        self.class(id)
            .filter(|c| c.is_thing)
            .and_then(|c| c.affinity_cutoff.or(c.radius))
    }

    pub fn merge_threshold(&self, id: u16) -> f64 {
        self.merge_threshold.for_class(id)
    }

    pub fn is_ignored(&self, id: u16) -> bool {
        self.ignore.contains(&id)
    }

    pub fn thing_classes(&self) -> impl Iterator<Item = &ClassInfo> {
        self.classes.iter().filter(|c| c.is_thing)
    }

    pub fn max_radius(&self) -> Option<f64> {
        self.thing_classes()
            .filter_map(|c| c.radius)
            .fold(None, |acc, r| Some(acc.map_or(r, |a: f64| a.max(r))))
    }

    /// Whether a point lies in the half-open voxelization extent.
    #[inline]
    pub fn in_extent(&self, p: [f64; 3]) -> bool {
        (0..3).all(|a| p[a] >= self.extent[a][0] && p[a] < self.extent[a][1])
    }

    /// Voxel counts along each axis.
    pub fn grid_dims(&self) -> [u64; 3] {
        let mut dims = [0u64; 3];
        for a in 0..3 {
            let span = (self.extent[a][1] - self.extent[a][0]) / self.voxel_size[a];
            dims[a] = (span - 1e-9).ceil().max(1.0) as u64;
        }
        dims
    }

    /// Linear voxel index of a point inside the extent.
    #[inline]
    pub fn voxel_key(&self, p: [f64; 3], dims: [u64; 3]) -> u64 {
        let mut idx = [0u64; 3];
        for a in 0..3 {
            let v = ((p[a] - self.extent[a][0]) / self.voxel_size[a]).floor() as u64;
            idx[a] = v.min(dims[a] - 1);
        }
        (idx[0] * dims[1] + idx[1]) * dims[2] + idx[2]
    }

    /// SemanticKITTI class table with documented default radii.
    ///
    /// The radii and merge thresholds here are engineering defaults scaled to
    /// typical object footprints (person-scale classes small, truck-scale
    /// classes large). They are not tuned values.
    pub fn semantic_kitti() -> Self {
        let thing = |id, name: &str, r: f64| ClassInfo {
            id,
            name: name.to_string(),
            is_thing: true,
            radius: Some(r),
            affinity_cutoff: None,
        };
        let stuff = |id, name: &str| ClassInfo {
            id,
            name: name.to_string(),
            is_thing: false,
            radius: None,
            affinity_cutoff: None,
        };
        let classes = vec![
            thing(10, "car", 1.2),
            thing(11, "bicycle", 0.6),
            thing(15, "motorcycle", 0.8),
            thing(18, "truck", 2.0),
            thing(20, "other-vehicle", 2.0),
            thing(30, "person", 0.5),
            thing(31, "bicyclist", 0.6),
            thing(32, "motorcyclist", 0.8),
            stuff(40, "road"),
            stuff(44, "parking"),
            stuff(48, "sidewalk"),
            stuff(49, "other-ground"),
            stuff(50, "building"),
            stuff(51, "fence"),
            stuff(70, "vegetation"),
            stuff(71, "trunk"),
            stuff(72, "terrain"),
            stuff(80, "pole"),
            stuff(81, "traffic-sign"),
        ];
        ClassConfig::new(classes).expect("built-in class table is valid")
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        let raw: RawConfig =
            toml::from_str(text).map_err(|e| Error::config(raw_key_of(&e), e.message()))?;
        raw.into_config()
    }

    pub fn to_toml_string(&self) -> String {
        let raw = RawConfig {
            classes: Some(
                self.classes
                    .iter()
                    .map(|c| RawClass {
                        id: c.id,
                        name: c.name.clone(),
                        thing: c.is_thing,
                        r_c: c.radius,
                        affinity_cutoff: c.affinity_cutoff,
                    })
                    .collect(),
            ),
            iterations: Some(self.iterations as i64),
            voxel_size: Some(self.voxel_size),
            extent: Some(self.extent),
            merge_threshold: Some(match &self.merge_threshold {
                MergeThreshold::Uniform(t) => RawThreshold::Scalar(*t),
                MergeThreshold::PerClass { default, classes } => {
                    let mut map: BTreeMap<String, f64> =
                        classes.iter().map(|(k, v)| (k.to_string(), *v)).collect();
                    map.insert("default".into(), *default);
                    RawThreshold::Map(map)
                }
            }),
            knn: Some(self.knn as i64),
            ignore: Some(self.ignore.clone()),
        };
        toml::to_string(&raw).expect("config serializes")
    }
}

fn raw_key_of(e: &toml::de::Error) -> String {
    // toml reports the offending key in its message for missing fields.
    let msg = e.message();
    if let Some(rest) = msg.strip_prefix("missing field `") {
        if let Some(end) = rest.find('`') {
            return rest[..end].to_string();
        }
    }
    "<document>".to_string()
}

#[derive(Debug, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    #[serde(rename = "L", skip_serializing_if = "Option::is_none")]
    iterations: Option<i64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    voxel_size: Option<[f64; 3]>,
    #[serde(skip_serializing_if = "Option::is_none")]
    extent: Option<[[f64; 2]; 3]>,
    #[serde(skip_serializing_if = "Option::is_none")]
    merge_threshold: Option<RawThreshold>,
    #[serde(skip_serializing_if = "Option::is_none")]
    knn: Option<i64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    ignore: Option<Vec<u16>>,
    classes: Option<Vec<RawClass>>,
}

#[derive(Debug, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
struct RawClass {
    id: u16,
    name: String,
    thing: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    r_c: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    affinity_cutoff: Option<f64>,
}

#[derive(Debug, Deserialize, Serialize)]
#[serde(untagged)]
enum RawThreshold {
    Scalar(f64),
    Map(BTreeMap<String, f64>),
}

impl RawConfig {
    fn into_config(self) -> Result<ClassConfig> {
        let raw_classes = self
            .classes
            .ok_or_else(|| Error::config("classes", "missing required class table"))?;
        let classes: Vec<ClassInfo> = raw_classes
            .into_iter()
            .map(|c| ClassInfo {
                id: c.id,
                name: c.name,
                is_thing: c.thing,
                radius: c.r_c,
                affinity_cutoff: c.affinity_cutoff,
            })
            .collect();

        let merge_threshold = match self.merge_threshold {
            None => MergeThreshold::Uniform(DEFAULT_MERGE_THRESHOLD),
            Some(RawThreshold::Scalar(t)) => MergeThreshold::Uniform(t),
            Some(RawThreshold::Map(map)) => {
                let mut default = DEFAULT_MERGE_THRESHOLD;
                let mut per_class = BTreeMap::new();
                for (key, value) in map {
                    if key == "default" {
                        default = value;
                        continue;
                    }
                    let id = key
                        .parse::<u16>()
                        .ok()
                        .or_else(|| classes.iter().find(|c| c.name == key).map(|c| c.id))
                        .ok_or_else(|| {
                            Error::config("merge_threshold", format!("unknown class `{key}`"))
                        })?;
                    per_class.insert(id, value);
                }
                MergeThreshold::PerClass {
                    default,
                    classes: per_class,
                }
            }
        };
        let thresholds: Vec<f64> = match &merge_threshold {
            MergeThreshold::Uniform(t) => vec![*t],
            MergeThreshold::PerClass { default, classes } => {
                std::iter::once(*default).chain(classes.values().copied()).collect()
            }
        };
        if thresholds.iter().any(|t| !t.is_finite()) {
            return Err(Error::config("merge_threshold", "must be finite"));
        }

        let iterations = match self.iterations {
            None => DEFAULT_ITERATIONS,
            Some(l) if l >= 1 => l as usize,
            Some(l) => return Err(Error::config("L", format!("must be at least 1, got {l}"))),
        };
        let knn = match self.knn {
            None => DEFAULT_KNN,
            Some(k) if k >= 1 => k as usize,
            Some(k) => return Err(Error::config("knn", format!("must be at least 1, got {k}"))),
        };

        let mut cfg = ClassConfig {
            classes,
            iterations,
            voxel_size: self.voxel_size.unwrap_or(DEFAULT_VOXEL_SIZE),
            extent: self.extent.unwrap_or(DEFAULT_EXTENT),
            merge_threshold,
            knn,
            ignore: self.ignore.unwrap_or_else(|| vec![0]),
            lookup: Vec::new(),
        };
        cfg.finish()?;
        Ok(cfg)
    }
}
