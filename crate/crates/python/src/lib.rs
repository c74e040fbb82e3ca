//! Python bindings. Heavy calls release the interpreter lock while they run.

use std::collections::BTreeMap;
use std::path::PathBuf;

use panoptic_sip::aggregation::{aggregate as aggregate_proposals, GeometricAffinity};
use panoptic_sip::baselines::{dbscan as dbscan_points, mean_shift as mean_shift_points};
use panoptic_sip::kitti_io::{encode_labels, encode_scan, read_config, read_labels, read_scan, write_labels, write_scan};
use panoptic_sip::metrics::evaluate_maps;
use panoptic_sip::pipeline::{segment as segment_scan, Method, DEFAULT_DBSCAN_EPS, DEFAULT_DBSCAN_MIN_PTS};
use panoptic_sip::synth::{generate_scene as generate, SceneSpec};
use panoptic_sip::{ClassConfig, Point, PointCloud, ProposalSet, SemanticMap};
use pyo3::exceptions::{PyIOError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyBytes;

fn to_py(e: panoptic_sip::Error) -> PyErr {
    match e {
        panoptic_sip::Error::Io { .. } => PyIOError::new_err(e.to_string()),
        other => PyValueError::new_err(other.to_string()),
    }
}

/// Resolves a method name plus DBSCAN overrides.
pub fn parse_method(name: &str, eps: Option<f64>, min_pts: Option<usize>) -> Result<Method, String> {
    let method: Method = name.parse().map_err(|e: panoptic_sip::Error| e.to_string())?;
    match method {
        Method::Dbscan { .. } => {
            let eps = eps.unwrap_or(DEFAULT_DBSCAN_EPS);
            let min_pts = min_pts.unwrap_or(DEFAULT_DBSCAN_MIN_PTS);
            if !(eps.is_finite() && eps > 0.0) || min_pts == 0 {
                return Err("dbscan needs eps > 0 and min_pts >= 1".into());
            }
            Ok(Method::Dbscan { eps, min_pts })
        }
        _ if eps.is_some() || min_pts.is_some() => Err(format!("eps and min_pts only apply to dbscan, not {name}")),
        m => Ok(m),
    }
}

/// Built-in synthetic scene specs.
pub fn preset(name: &str, gap: f64) -> Result<SceneSpec, String> {
    Ok(match name {
        "separable" => SceneSpec::separable(),
        "recovery" => SceneSpec::recovery(),
        "fragmented" => SceneSpec::fragmented(gap),
        "dense" => SceneSpec::dense_100k(),
        other => return Err(format!("unknown preset `{other}`")),
    })
}

/// Class table with per-class radii and merge thresholds.
#[pyclass(name = "ClassConfig", frozen)]
struct PyClassConfig {
    inner: ClassConfig,
}

#[pymethods]
impl PyClassConfig {
    #[staticmethod]
    fn semantic_kitti() -> Self {
        PyClassConfig {
            inner: ClassConfig::semantic_kitti(),
        }
    }

    #[staticmethod]
    fn from_toml(text: &str) -> PyResult<Self> {
        Ok(PyClassConfig {
            inner: ClassConfig::from_toml_str(text).map_err(to_py)?,
        })
    }

    #[staticmethod]
    fn read(path: PathBuf) -> PyResult<Self> {
        Ok(PyClassConfig {
            inner: read_config(path).map_err(to_py)?,
        })
    }

    fn to_toml(&self) -> String {
        self.inner.to_toml_string()
    }

    fn thing_classes(&self) -> Vec<u16> {
        self.inner.thing_classes().map(|c| c.id).collect()
    }

    fn radius(&self, class_id: u16) -> Option<f64> {
        self.inner.radius(class_id)
    }

    fn __repr__(&self) -> String {
        format!("ClassConfig({} classes)", self.inner.classes().len())
    }
}

/// A point cloud with per-point semantic and instance labels.
#[pyclass(name = "Scan", frozen)]
struct PyScan {
    cloud: PointCloud,
    labels: SemanticMap,
}

#[pymethods]
impl PyScan {
    /// `points` holds `(x, y, z, intensity)` rows. Instances default to 0.
    #[new]
    #[pyo3(signature = (points, semantic, instance=None))]
    fn new(points: Vec<(f32, f32, f32, f32)>, semantic: Vec<u16>, instance: Option<Vec<u16>>) -> PyResult<Self> {
        if points.len() != semantic.len() {
            return Err(PyValueError::new_err(format!(
                "{} points but {} semantic labels",
                points.len(),
                semantic.len()
            )));
        }
        let instance = instance.unwrap_or_else(|| vec![0; semantic.len()]);
        let labels = SemanticMap::new(semantic, instance).map_err(to_py)?;
        let cloud = PointCloud::new(points.into_iter().map(|(x, y, z, i)| Point::new(x, y, z, i)).collect());
        Ok(PyScan { cloud, labels })
    }

    /// Reads a `.bin` scan and its `.label` file.
    #[staticmethod]
    fn read(scan_path: PathBuf, label_path: PathBuf) -> PyResult<Self> {
        let cloud = read_scan(scan_path).map_err(to_py)?;
        let labels = read_labels(label_path, cloud.len()).map_err(to_py)?;
        Ok(PyScan { cloud, labels })
    }

    fn write(&self, scan_path: PathBuf, label_path: PathBuf) -> PyResult<()> {
        write_scan(&self.cloud, scan_path).map_err(to_py)?;
        write_labels(&self.labels, label_path).map_err(to_py)
    }

    fn scan_bytes<'py>(&self, py: Python<'py>) -> Bound<'py, PyBytes> {
        PyBytes::new(py, &encode_scan(&self.cloud))
    }

    fn label_bytes<'py>(&self, py: Python<'py>) -> Bound<'py, PyBytes> {
        PyBytes::new(py, &encode_labels(&self.labels))
    }

    #[getter]
    fn points(&self) -> Vec<(f32, f32, f32, f32)> {
        self.cloud.points.iter().map(|p| (p.x, p.y, p.z, p.intensity)).collect()
    }

    #[getter]
    fn semantic(&self) -> Vec<u16> {
        self.labels.semantic.clone()
    }

    #[getter]
    fn instance(&self) -> Vec<u16> {
        self.labels.instance.clone()
    }

    fn __len__(&self) -> usize {
        self.cloud.len()
    }

    fn __repr__(&self) -> String {
        format!("Scan({} points)", self.cloud.len())
    }
}

/// Instance proposals over one scan.
#[pyclass(name = "Proposals", frozen)]
struct PyProposals {
    inner: ProposalSet,
}

#[pymethods]
impl PyProposals {
    /// Per-point proposal ID; 0 where a point belongs to no proposal.
    #[getter]
    fn instance_of_point(&self) -> Vec<u32> {
        self.inner.instance_of_point.clone()
    }

    /// `(id, class, point indices)` per proposal.
    fn instances(&self) -> Vec<(u32, u16, Vec<u32>)> {
        self.inner
            .proposals
            .iter()
            .map(|p| (p.id, p.class, p.points.clone()))
            .collect()
    }

    /// Label file contents pairing the scan's semantics with these instances.
    fn label_bytes<'py>(&self, py: Python<'py>, scan: &PyScan) -> PyResult<Bound<'py, PyBytes>> {
        let map = self.inner.to_semantic_map(&scan.labels).map_err(to_py)?;
        Ok(PyBytes::new(py, &encode_labels(&map)))
    }

    fn __len__(&self) -> usize {
        self.inner.len()
    }

    fn __repr__(&self) -> String {
        format!("Proposals({} instances)", self.inner.len())
    }
}

fn check_len(scan: &PyScan, proposals: &PyProposals) -> PyResult<()> {
    if scan.cloud.len() != proposals.inner.instance_of_point.len() {
        return Err(PyValueError::new_err("proposals belong to a scan of a different size"));
    }
    Ok(())
}

/// Runs a named method (`sip`, `sip-noshift`, `sip+ia`, `sip+ia-noshift`,
/// `meanshift`, `dbscan`). Returns the proposals and stage timings in ms.
#[pyfunction]
#[pyo3(signature = (scan, config, method="sip", eps=None, min_pts=None))]
fn segment(
    py: Python<'_>,
    scan: &PyScan,
    config: &PyClassConfig,
    method: &str,
    eps: Option<f64>,
    min_pts: Option<usize>,
) -> PyResult<(PyProposals, BTreeMap<String, f64>)> {
    let method = parse_method(method, eps, min_pts).map_err(PyValueError::new_err)?;
    let (set, stages) = py.detach(|| segment_scan(&scan.cloud, &scan.labels, &config.inner, method));
    let timings = stages
        .into_iter()
        .map(|(name, d)| (name.to_string(), d.as_secs_f64() * 1e3))
        .collect();
    Ok((PyProposals { inner: set }, timings))
}

#[pyfunction]
#[pyo3(signature = (scan, config, shift=true))]
fn run_sip(py: Python<'_>, scan: &PyScan, config: &PyClassConfig, shift: bool) -> PyProposals {
    let (set, _) = py.detach(|| segment_scan(&scan.cloud, &scan.labels, &config.inner, Method::Sip { shift }));
    PyProposals { inner: set }
}

/// Merges fragmented proposals by geometric affinity.
#[pyfunction]
fn aggregate(py: Python<'_>, proposals: &PyProposals, scan: &PyScan, config: &PyClassConfig) -> PyResult<PyProposals> {
    check_len(scan, proposals)?;
    let cfg = &config.inner;
    let merged = py.detach(|| {
        aggregate_proposals(&proposals.inner, &scan.cloud, &scan.labels, cfg, &GeometricAffinity::from_config(cfg))
    });
    Ok(PyProposals { inner: merged })
}

#[pyfunction]
fn mean_shift(py: Python<'_>, scan: &PyScan, config: &PyClassConfig) -> PyProposals {
    PyProposals {
        inner: py.detach(|| mean_shift_points(&scan.cloud, &scan.labels, &config.inner)),
    }
}

#[pyfunction]
#[pyo3(signature = (scan, config, eps=DEFAULT_DBSCAN_EPS, min_pts=DEFAULT_DBSCAN_MIN_PTS))]
fn dbscan(py: Python<'_>, scan: &PyScan, config: &PyClassConfig, eps: f64, min_pts: usize) -> PyResult<PyProposals> {
    parse_method("dbscan", Some(eps), Some(min_pts)).map_err(PyValueError::new_err)?;
    Ok(PyProposals {
        inner: py.detach(|| dbscan_points(&scan.cloud, &scan.labels, &config.inner, eps, min_pts)),
    })
}

/// Scores `proposals` (on the semantics of `scan`) against the labels of
/// `gt`, or `scan`'s own labels when `gt` is omitted. Returns a dict of
/// fractions in `[0, 1]`.
#[pyfunction]
#[pyo3(signature = (proposals, scan, config, gt=None))]
fn evaluate<'py>(
    py: Python<'py>,
    proposals: &PyProposals,
    scan: &PyScan,
    config: &PyClassConfig,
    gt: Option<&PyScan>,
) -> PyResult<Bound<'py, PyAny>> {
    check_len(scan, proposals)?;
    let gt = gt.unwrap_or(scan);
    let pred = proposals.inner.to_semantic_map(&scan.labels).map_err(to_py)?;
    let scores = evaluate_maps(&pred, &gt.labels, &config.inner).map_err(to_py)?;
    py.import("json")?.call_method1("loads", (scores.to_json(),))
}

/// Generates a synthetic scene from a built-in preset or a TOML spec.
#[pyfunction]
#[pyo3(signature = (seed, preset_name="separable", spec_toml=None, gap=2.5))]
fn generate_scene(py: Python<'_>, seed: u64, preset_name: &str, spec_toml: Option<&str>, gap: f64) -> PyResult<PyScan> {
    let spec = match spec_toml {
        Some(text) => SceneSpec::from_toml_str(text).map_err(to_py)?,
        None => preset(preset_name, gap).map_err(PyValueError::new_err)?,
    };
    let (cloud, labels) = py.detach(|| generate(&spec, seed)).map_err(to_py)?;
    Ok(PyScan { cloud, labels })
}

#[pymodule]
fn pysip(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyClassConfig>()?;
    m.add_class::<PyScan>()?;
    m.add_class::<PyProposals>()?;
    m.add_function(wrap_pyfunction!(segment, m)?)?;
    m.add_function(wrap_pyfunction!(run_sip, m)?)?;
    m.add_function(wrap_pyfunction!(aggregate, m)?)?;
    m.add_function(wrap_pyfunction!(mean_shift, m)?)?;
    m.add_function(wrap_pyfunction!(dbscan, m)?)?;
    m.add_function(wrap_pyfunction!(evaluate, m)?)?;
    m.add_function(wrap_pyfunction!(generate_scene, m)?)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn method_names() {
        assert_eq!(parse_method("sip", None, None), Ok(Method::Sip { shift: true }));
        assert_eq!(
            parse_method("dbscan", Some(0.7), None),
            Ok(Method::Dbscan { eps: 0.7, min_pts: DEFAULT_DBSCAN_MIN_PTS })
        );
        assert!(parse_method("sip", Some(0.7), None).is_err());
        assert!(parse_method("dbscan", Some(0.0), None).is_err());
        assert!(parse_method("kmeans", None, None).is_err());
    }

    #[test]
    fn presets() {
        for name in ["separable", "recovery", "fragmented", "dense"] {
            assert!(preset(name, 2.5).is_ok(), "{name}");
        }
        assert!(preset("nope", 2.5).is_err());
    }
}
