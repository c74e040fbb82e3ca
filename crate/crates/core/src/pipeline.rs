//! Method dispatch and the per-scan worker pool.

use std::str::FromStr;
use std::time::{Duration, Instant};

use crate::aggregation::{aggregate, GeometricAffinity};
use crate::baselines::{dbscan, mean_shift};
use crate::config::ClassConfig;
use crate::error::{Error, Result};
use crate::model::{PointCloud, ProposalSet, SemanticMap};
use crate::sip::{run_sip_with, SipOptions};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Method {
    Sip { shift: bool },
    SipIa { shift: bool },
    MeanShift,
    Dbscan { eps: f64, min_pts: usize },
}

impl Method {
    pub fn name(&self) -> String {
        match self {
            Method::Sip { shift: true } => "sip".into(),
            Method::Sip { shift: false } => "sip-noshift".into(),
            Method::SipIa { shift: true } => "sip+ia".into(),
            Method::SipIa { shift: false } => "sip+ia-noshift".into(),
            Method::MeanShift => "meanshift".into(),
            Method::Dbscan { .. } => "dbscan".into(),
        }
    }
}

pub const DEFAULT_DBSCAN_EPS: f64 = 0.5;
pub const DEFAULT_DBSCAN_MIN_PTS: usize = 5;

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "sip" => Method::Sip { shift: true },
            "sip-noshift" => Method::Sip { shift: false },
            "sip+ia" => Method::SipIa { shift: true },
            "sip+ia-noshift" => Method::SipIa { shift: false },
            "meanshift" => Method::MeanShift,
            "dbscan" => Method::Dbscan {
                eps: DEFAULT_DBSCAN_EPS,
                min_pts: DEFAULT_DBSCAN_MIN_PTS,
            },
            other => return Err(Error::Invalid(format!("unknown method `{other}`"))),
        })
    }
}

/// Named stage durations, in execution order, ending with `total`.
pub type StageTimings = Vec<(&'static str, Duration)>;

pub fn segment(cloud: &PointCloud, labels: &SemanticMap, cfg: &ClassConfig, method: Method) -> (ProposalSet, StageTimings) {
    let start = Instant::now();
    let (set, mut stages) = match method {
        Method::Sip { shift } | Method::SipIa { shift } => {
            let (set, t) = run_sip_with(cloud, labels, cfg, SipOptions { shift });
            let mut stages = vec![("sample", t.sample), ("shrink", t.shrink), ("group", t.group)];
            if let Method::SipIa { .. } = method {
                let t = Instant::now();
                let merged = aggregate(&set, cloud, labels, cfg, &GeometricAffinity::from_config(cfg));
                stages.push(("aggregate", t.elapsed()));
                (merged, stages)
            } else {
                (set, stages)
            }
        }
        Method::MeanShift => (mean_shift(cloud, labels, cfg), Vec::new()),
        Method::Dbscan { eps, min_pts } => (dbscan(cloud, labels, cfg, eps, min_pts), Vec::new()),
    };
    stages.push(("total", start.elapsed()));
    (set, stages)
}

/// Maps `f` over `items` on a dedicated pool of `threads` workers (0 = all
/// available cores). Output order matches input order.
pub fn run_parallel<T, R, F>(items: &[T], threads: usize, f: F) -> Result<Vec<R>>
where
    T: Sync,
    R: Send,
    F: Fn(&T) -> R + Sync + Send,
{
    use rayon::prelude::*;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| Error::Invalid(format!("cannot build worker pool: {e}")))?;
    Ok(pool.install(|| items.par_iter().map(&f).collect()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn method_names_parse_back() {
        for name in ["sip", "sip-noshift", "sip+ia", "sip+ia-noshift", "meanshift", "dbscan"] {
            assert_eq!(name.parse::<Method>().unwrap().name(), name);
        }
        assert!("kmeans".parse::<Method>().is_err());
    }

    #[test]
    fn pool_preserves_order() {
        let items: Vec<u32> = (0..50).collect();
        let out = run_parallel(&items, 3, |x| x * 2).unwrap();
        assert_eq!(out, items.iter().map(|x| x * 2).collect::<Vec<_>>());
    }
}
