//! Synthetic scenes with known ground truth.
//!
//! Objects are box or ellipsoid shells standing on a flat ground plane. The
//! number of points on an object falls off with its distance from the sensor
//! as `(reference_distance / d) ^ density_exponent`, so near objects are dense
//! and far ones sparse. Ground points are stuff and carry instance 0.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{Point, PointCloud, ProposalSet, SemanticMap};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Shape {
    #[default]
    Box,
    Ellipsoid,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ObjectKind {
    pub class: u16,
    #[serde(default = "one")]
    pub weight: f64,
    /// Length, width, height in meters.
    pub size: [f64; 3],
    /// Relative uniform jitter applied to each dimension.
    #[serde(default)]
    pub size_jitter: f64,
    #[serde(default)]
    pub shape: Shape,
    pub points_at_reference: usize,
    #[serde(default = "one_usize")]
    pub min_points: usize,
    #[serde(default = "usize_max")]
    pub max_points: usize,
    /// Splits every object of this kind into two halves along its length,
    /// separated by this gap in meters. Both halves keep one instance ID.
    #[serde(default)]
    pub split_gap: Option<f64>,
}

fn one() -> f64 {
    1.0
}
fn one_usize() -> usize {
    1
}
fn usize_max() -> usize {
    usize::MAX
}
fn default_exponent() -> f64 {
    2.0
}
fn default_reference() -> f64 {
    10.0
}
fn default_ground_z() -> f64 {
    -1.7
}
fn default_attempts() -> usize {
    2000
}
fn yes() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SceneSpec {
    /// Inclusive range for the number of instances.
    pub instances: [usize; 2],
    /// Horizontal distance range from the sensor for object centers.
    pub range: [f64; 2],
    /// Minimum gap between object footprints.
    pub min_gap: f64,
    #[serde(default = "default_exponent")]
    pub density_exponent: f64,
    #[serde(default = "default_reference")]
    pub reference_distance: f64,
    #[serde(default)]
    pub ground_class: Option<u16>,
    #[serde(default)]
    pub ground_points: usize,
    #[serde(default = "default_ground_z")]
    pub ground_z: f64,
    #[serde(default = "default_attempts")]
    pub max_attempts: usize,
    /// Sample only object surfaces facing the sensor at the origin.
    #[serde(default = "yes")]
    pub self_occlusion: bool,
    pub objects: Vec<ObjectKind>,
}

impl SceneSpec {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let spec: SceneSpec = toml::from_str(text).map_err(|e| Error::config("scene", e.message()))?;
        spec.check()?;
        Ok(spec)
    }

    pub fn read(path: impl AsRef<std::path::Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        SceneSpec::from_toml_str(&text)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("scene spec serializes")
    }

    pub fn check(&self) -> Result<()> {
        if self.objects.is_empty() {
            return Err(Error::config("objects", "at least one object kind is required"));
        }
        if self.instances[0] > self.instances[1] {
            return Err(Error::config("instances", "min exceeds max"));
        }
        if !(self.range[0] > 0.0 && self.range[0] <= self.range[1]) {
            return Err(Error::config("range", "needs 0 < min <= max"));
        }
        if self.min_gap < 0.0 || self.reference_distance <= 0.0 {
            return Err(Error::config("min_gap", "gaps and distances must be non-negative"));
        }
        for o in &self.objects {
            if o.size.iter().any(|s| !(s.is_finite() && *s > 0.0)) || o.weight <= 0.0 || o.min_points > o.max_points {
                return Err(Error::config(
                    "objects",
                    format!("object kind for class {} is malformed", o.class),
                ));
            }
        }
        Ok(())
    }

    /// Mixed traffic scene: cars, people, cyclists and trucks, well separated.
    pub fn separable() -> Self {
        SceneSpec {
            instances: [8, 14],
            range: [6.0, 40.0],
            min_gap: 4.0,
            density_exponent: 2.0,
            reference_distance: 10.0,
            ground_class: Some(40),
            ground_points: 4000,
            ground_z: -1.7,
            max_attempts: 2000,
            self_occlusion: true,
            objects: vec![
                ObjectKind {
                    class: 10,
                    weight: 4.0,
                    size: [4.2, 1.8, 1.5],
                    size_jitter: 0.1,
                    shape: Shape::Box,
                    points_at_reference: 1500,
                    min_points: 150,
                    max_points: 4000,
                    split_gap: None,
                },
                ObjectKind {
                    class: 30,
                    weight: 2.0,
                    size: [0.6, 0.6, 1.7],
                    size_jitter: 0.1,
                    shape: Shape::Ellipsoid,
                    points_at_reference: 300,
                    min_points: 40,
                    max_points: 1000,
                    split_gap: None,
                },
                ObjectKind {
                    class: 31,
                    weight: 1.0,
                    size: [1.7, 0.6, 1.7],
                    size_jitter: 0.1,
                    shape: Shape::Box,
                    points_at_reference: 400,
                    min_points: 60,
                    max_points: 1200,
                    split_gap: None,
                },
                ObjectKind {
                    class: 18,
                    weight: 1.0,
                    size: [7.0, 2.5, 3.0],
                    size_jitter: 0.1,
                    shape: Shape::Box,
                    points_at_reference: 3000,
                    min_points: 400,
                    max_points: 6000,
                    split_gap: None,
                },
            ],
        }
    }

    /// Densely sampled objects with wide gaps: every instance is connected at
    /// half its class radius and instances lie further apart than any radius.
    pub fn recovery() -> Self {
        let mut spec = SceneSpec::separable();
        spec.range = [6.0, 30.0];
        spec.min_gap = 4.0;
        for o in &mut spec.objects {
            o.min_points = match o.class {
                30 => 500,
                31 => 700,
                18 => 1500,
                _ => 800,
            };
            o.max_points = o.max_points.max(o.min_points);
        }
        spec
    }

    /// Large vehicles cut in two by a gap, the typical over-segmentation case.
    pub fn fragmented(split_gap: f64) -> Self {
        let mut spec = SceneSpec::recovery();
        spec.min_gap = 8.0;
        spec.instances = [5, 8];
        for o in &mut spec.objects {
            if o.class == 18 {
                o.weight = 3.0;
                o.split_gap = Some(split_gap);
            }
        }
        spec
    }

    /// Dense scene with roughly 100k thing points.
    pub fn dense_100k() -> Self {
        let mut spec = SceneSpec::separable();
        spec.instances = [40, 40];
        spec.range = [5.0, 40.0];
        spec.min_gap = 3.0;
        spec.ground_points = 20_000;
        for o in &mut spec.objects {
            o.points_at_reference *= 6;
            o.max_points *= 4;
            o.min_points = o.min_points.max(o.points_at_reference / 4);
        }
        spec
    }
}

struct Placed {
    kind: usize,
    center: [f64; 2],
    yaw: f64,
    size: [f64; 3],
    footprint: f64,
}

/// Generates a scene. The same spec and seed always give identical output.
pub fn generate_scene(spec: &SceneSpec, seed: u64) -> Result<(PointCloud, SemanticMap)> {
    spec.check()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let total_weight: f64 = spec.objects.iter().map(|o| o.weight).sum();
    let count = rng.gen_range(spec.instances[0]..=spec.instances[1]);
    if count > u16::MAX as usize {
        return Err(Error::Generation("too many instances for 16-bit IDs".into()));
    }

    let mut placed: Vec<Placed> = Vec::with_capacity(count);
    for _ in 0..count {
        let mut pick = rng.gen_range(0.0..total_weight);
        let mut kind = spec.objects.len() - 1;
        for (k, o) in spec.objects.iter().enumerate() {
            if pick < o.weight {
                kind = k;
                break;
            }
            pick -= o.weight;
        }
        let o = &spec.objects[kind];
        let mut size = o.size;
        for s in &mut size {
            *s *= 1.0 + o.size_jitter * rng.gen_range(-1.0..=1.0);
        }
        let length = size[0] + o.split_gap.unwrap_or(0.0);
        let footprint = 0.5 * (length * length + size[1] * size[1]).sqrt();

        let mut ok = false;
        for _ in 0..spec.max_attempts {
            let d = rng.gen_range(spec.range[0]..=spec.range[1]);
            let theta = rng.gen_range(0.0..2.0 * PI);
            let center = [d * theta.cos(), d * theta.sin()];
            let clear = placed.iter().all(|p| {
                let dx = p.center[0] - center[0];
                let dy = p.center[1] - center[1];
                (dx * dx + dy * dy).sqrt() >= p.footprint + footprint + spec.min_gap
            });
            if clear {
                let yaw = rng.gen_range(0.0..PI);
                placed.push(Placed {
                    kind,
                    center,
                    yaw,
                    size,
                    footprint,
                });
                ok = true;
                break;
            }
        }
        if !ok {
            return Err(Error::Generation(format!(
                "could not place instance {} of {count} with gap {} m inside range {:?}",
                placed.len() + 1,
                spec.min_gap,
                spec.range
            )));
        }
    }

    let mut points = Vec::new();
    let mut semantic = Vec::new();
    let mut instance = Vec::new();

    if let Some(class) = spec.ground_class {
        let (r0, r1) = (spec.range[0], spec.range[1]);
        for _ in 0..spec.ground_points {
            // Log-uniform radius gives areal density falling off as 1/r^2.
            let r = r0 * (r1 / r0).powf(rng.gen_range(0.0..1.0));
            let theta = rng.gen_range(0.0..2.0 * PI);
            let z = spec.ground_z + rng.gen_range(-0.02..0.02);
            points.push(Point::new(
                (r * theta.cos()) as f32,
                (r * theta.sin()) as f32,
                z as f32,
                rng.gen_range(0.0..1.0),
            ));
            semantic.push(class);
            instance.push(0);
        }
    }

    for (id, p) in placed.iter().enumerate() {
        let o = &spec.objects[p.kind];
        let d = (p.center[0].powi(2) + p.center[1].powi(2)).sqrt().max(1e-3);
        let scaled = o.points_at_reference as f64 * (spec.reference_distance / d).powf(spec.density_exponent);
        let n = (scaled.round() as usize).clamp(o.min_points, o.max_points);
        let (sin, cos) = p.yaw.sin_cos();
        let half_gap = o.split_gap.unwrap_or(0.0) / 2.0;
        let center_z = spec.ground_z + p.size[2] / 2.0;
        // Sensor position in the object frame.
        let sensor = if spec.self_occlusion {
            Some([
                -(cos * p.center[0] + sin * p.center[1]),
                sin * p.center[0] - cos * p.center[1],
                -center_z,
            ])
        } else {
            None
        };
        for _ in 0..n {
            let mut q = match o.shape {
                Shape::Box => sample_box_surface(&mut rng, p.size, sensor),
                Shape::Ellipsoid => sample_ellipsoid_surface(&mut rng, p.size, sensor),
            };
            if half_gap > 0.0 {
                q[0] += if q[0] >= 0.0 { half_gap } else { -half_gap };
            }
            let x = p.center[0] + cos * q[0] - sin * q[1];
            let y = p.center[1] + sin * q[0] + cos * q[1];
            let z = center_z + q[2];
            points.push(Point::new(x as f32, y as f32, z as f32, rng.gen_range(0.0..1.0)));
            semantic.push(o.class);
            instance.push(id as u16 + 1);
        }
    }

    Ok((PointCloud::new(points), SemanticMap { semantic, instance }))
}

/// Uniform sample on the surface of a centered box, restricted to the faces
/// that face `sensor` when given.
fn sample_box_surface(rng: &mut ChaCha8Rng, size: [f64; 3], sensor: Option<[f64; 3]>) -> [f64; 3] {
    let [l, w, h] = size;
    let mut areas = [w * h, w * h, l * h, l * h, l * w, l * w];
    if let Some(s) = sensor {
        let visible = |face: usize| {
            let axis = face / 2;
            let half = size[axis] / 2.0;
            if face.is_multiple_of(2) {
                s[axis] > half
            } else {
                s[axis] < -half
            }
        };
        if (0..6).any(visible) {
            for (face, a) in areas.iter_mut().enumerate() {
                if !visible(face) {
                    *a = 0.0;
                }
            }
        }
    }
    let total: f64 = areas.iter().sum();
    let mut pick = rng.gen_range(0.0..total);
    let mut face = 5;
    for (k, a) in areas.iter().enumerate() {
        if *a > 0.0 && pick < *a {
            face = k;
            break;
        }
        pick -= a;
    }
    let u = rng.gen_range(-0.5..0.5);
    let v = rng.gen_range(-0.5..0.5);
    let sign = if face.is_multiple_of(2) { 0.5 } else { -0.5 };
    match face / 2 {
        0 => [sign * l, u * w, v * h],
        1 => [u * l, sign * w, v * h],
        _ => [u * l, v * w, sign * h],
    }
}

fn sample_ellipsoid_surface(rng: &mut ChaCha8Rng, size: [f64; 3], sensor: Option<[f64; 3]>) -> [f64; 3] {
    let semi = [size[0] / 2.0, size[1] / 2.0, size[2] / 2.0];
    let mut fallback = None;
    for _ in 0..64 {
        let v = [
            rng.gen_range(-1.0..1.0f64),
            rng.gen_range(-1.0..1.0f64),
            rng.gen_range(-1.0..1.0f64),
        ];
        let n2 = v[0] * v[0] + v[1] * v[1] + v[2] * v[2];
        if !(n2 > 1e-6 && n2 <= 1.0) {
            continue;
        }
        let n = n2.sqrt();
        let q = [v[0] / n * semi[0], v[1] / n * semi[1], v[2] / n * semi[2]];
        let Some(s) = sensor else {
            return q;
        };
        let facing: f64 = (0..3).map(|k| q[k] / (semi[k] * semi[k]) * (s[k] - q[k])).sum();
        if facing > 0.0 {
            return q;
        }
        fallback.get_or_insert(q);
    }
    fallback.unwrap_or([semi[0], 0.0, 0.0])
}

pub const ORACLE_MAX_POINTS: usize = 50_000;

/// Exact per-class single-linkage clustering over every finite thing point:
/// two points connect when strictly closer than their class radius. Classes
/// absent from `radius_per_class` are not clustered.
///
/// Quadratic per class and intended for tests; refuses more than
/// [`ORACLE_MAX_POINTS`] thing points.
pub fn oracle_cluster(
    cloud: &PointCloud,
    labels: &SemanticMap,
    radius_per_class: &[(u16, f64)],
) -> Result<ProposalSet> {
    let radius_of = |c: u16| radius_per_class.iter().find(|(k, _)| *k == c).map(|&(_, r)| r);
    let things: Vec<usize> = (0..cloud.len())
        .filter(|&i| cloud.points[i].is_finite() && radius_of(labels.semantic[i]).is_some())
        .collect();
    if things.len() > ORACLE_MAX_POINTS {
        return Err(Error::OracleGuard(format!(
            "{} thing points exceed the oracle limit of {ORACLE_MAX_POINTS}",
            things.len()
        )));
    }

    let mut component: Vec<Option<u32>> = vec![None; cloud.len()];
    let mut next = 0u32;
    for &start in &things {
        if component[start].is_some() {
            continue;
        }
        let class = labels.semantic[start];
        let r = radius_of(class).unwrap_or(0.0);
        component[start] = Some(next);
        let mut stack = vec![start];
        while let Some(u) = stack.pop() {
            let pu = cloud.points[u];
            for &v in &things {
                if component[v].is_some() || labels.semantic[v] != class {
                    continue;
                }
                let pv = cloud.points[v];
                let dx = pu.x as f64 - pv.x as f64;
                let dy = pu.y as f64 - pv.y as f64;
                let dz = pu.z as f64 - pv.z as f64;
                if (dx * dx + dy * dy + dz * dz).sqrt() < r {
                    component[v] = Some(next);
                    stack.push(v);
                }
            }
        }
        next += 1;
    }
    Ok(ProposalSet::from_point_labels(cloud, labels, &component))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::ClassConfig;
    use crate::model::validate_scan;

    fn single(points: usize) -> SceneSpec {
        SceneSpec {
            instances: [1, 1],
            range: [10.0, 10.0],
            min_gap: 1.0,
            density_exponent: 0.0,
            reference_distance: 10.0,
            ground_class: Some(40),
            ground_points: 50,
            ground_z: -1.7,
            max_attempts: 10,
            self_occlusion: true,
            objects: vec![ObjectKind {
                class: 10,
                weight: 1.0,
                size: [4.0, 1.8, 1.5],
                size_jitter: 0.0,
                shape: Shape::Box,
                points_at_reference: points,
                min_points: points,
                max_points: points,
                split_gap: None,
            }],
        }
    }

    #[test]
    fn one_instance_exact_points() {
        let (cloud, labels) = generate_scene(&single(100), 3).unwrap();
        assert_eq!(cloud.len(), 150);
        let members: Vec<usize> = (0..cloud.len()).filter(|&i| labels.instance[i] != 0).collect();
        assert_eq!(members.len(), 100);
        assert!(members.iter().all(|&i| labels.instance[i] == 1 && labels.semantic[i] == 10));
    }

    #[test]
    fn fixed_seed_is_deterministic() {
        let spec = SceneSpec::separable();
        let a = generate_scene(&spec, 42).unwrap();
        let b = generate_scene(&spec, 42).unwrap();
        assert_eq!(a, b);
        assert_ne!(a.0, generate_scene(&spec, 43).unwrap().0);
    }

    #[test]
    fn scenes_validate() {
        let cfg = ClassConfig::semantic_kitti();
        for seed in 0..5 {
            let (cloud, labels) = generate_scene(&SceneSpec::separable(), seed).unwrap();
            assert!(validate_scan(&cloud, &labels, &cfg).is_empty());
        }
    }

    #[test]
    fn infeasible_spec_fails() {
        let mut spec = single(10);
        spec.instances = [30, 30];
        spec.range = [5.0, 6.0];
        spec.min_gap = 5.0;
        assert!(matches!(generate_scene(&spec, 0), Err(Error::Generation(_))));
    }

    #[test]
    fn spec_round_trips_toml() {
        let spec = SceneSpec::fragmented(2.0);
        assert_eq!(SceneSpec::from_toml_str(&spec.to_toml_string()).unwrap(), spec);
    }

    #[test]
    fn oracle_pairs() {
        let cloud = PointCloud::new(vec![Point::new(0.0, 0.0, 0.0, 0.0), Point::new(0.5, 0.0, 0.0, 0.0)]);
        let labels = SemanticMap::from_semantic(vec![10, 10]);
        assert_eq!(oracle_cluster(&cloud, &labels, &[(10, 0.6)]).unwrap().len(), 1);
        assert_eq!(oracle_cluster(&cloud, &labels, &[(10, 0.4)]).unwrap().len(), 2);
    }

    #[test]
    fn oracle_guard() {
        let n = ORACLE_MAX_POINTS + 1;
        let cloud = PointCloud::new(vec![Point::default(); n]);
        let labels = SemanticMap::from_semantic(vec![10; n]);
        assert!(matches!(
            oracle_cluster(&cloud, &labels, &[(10, 1.0)]),
            Err(Error::OracleGuard(_))
        ));
    }
}
