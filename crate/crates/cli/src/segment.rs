use std::fs;
use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use clap::Args;
use panoptic_sip::kitti_io::{read_labels, read_scan, write_labels};
use panoptic_sip::pipeline::{run_parallel, segment, Method, DEFAULT_DBSCAN_EPS, DEFAULT_DBSCAN_MIN_PTS};
use panoptic_sip::validate_scan;

use crate::files::scan_inputs;
use crate::Threads;

#[derive(Args)]
pub struct SegmentArgs {
    /// A `.bin` scan or a directory of them.
    #[arg(long)]
    scan: PathBuf,
    /// The matching `.label` file or directory; supplies the semantic classes.
    #[arg(long)]
    labels: PathBuf,
    /// Class table (TOML).
    #[arg(long)]
    config: PathBuf,
    /// Directory for the predicted `.label` files.
    #[arg(long)]
    out: PathBuf,
    /// sip, sip+ia, meanshift or dbscan.
    #[arg(long, default_value = "sip")]
    method: String,
    /// Skip bubble shrinking (sip and sip+ia only).
    #[arg(long)]
    no_shift: bool,
    /// DBSCAN neighborhood radius in meters.
    #[arg(long, default_value_t = DEFAULT_DBSCAN_EPS)]
    eps: f64,
    /// DBSCAN core point threshold, the point itself included.
    #[arg(long, default_value_t = DEFAULT_DBSCAN_MIN_PTS)]
    min_pts: usize,
    #[command(flatten)]
    threads: Threads,
}

fn resolve_method(args: &SegmentArgs) -> Result<Method> {
    let method = match args.method.as_str() {
        "sip" => Method::Sip { shift: !args.no_shift },
        "sip+ia" => Method::SipIa { shift: !args.no_shift },
        "meanshift" | "dbscan" if args.no_shift => {
            bail!("--no-shift applies to sip and sip+ia, not {}", args.method)
        }
        "meanshift" => Method::MeanShift,
        "dbscan" => {
            if !(args.eps.is_finite() && args.eps > 0.0) {
                bail!("--eps must be positive");
            }
            if args.min_pts < 1 {
                bail!("--min-pts must be at least 1");
            }
            Method::Dbscan {
                eps: args.eps,
                min_pts: args.min_pts,
            }
        }
        other => bail!("--method: unknown method `{other}` (expected sip, sip+ia, meanshift or dbscan)"),
    };
    Ok(method)
}

struct Outcome {
    name: String,
    instances: usize,
    warnings: usize,
    stages: Vec<(&'static str, std::time::Duration)>,
}

pub fn run(args: SegmentArgs) -> Result<()> {
    let cfg = crate::load_config(Some(&args.config))?;
    let method = resolve_method(&args)?;
    let inputs = scan_inputs(&args.scan, &args.labels)?;
    fs::create_dir_all(&args.out).with_context(|| format!("--out {}", args.out.display()))?;

    let results = run_parallel(&inputs, args.threads.threads, |input| -> Result<Outcome> {
        let cloud = read_scan(&input.scan)?;
        let labels = read_labels(&input.labels, cloud.len())?;
        let report = validate_scan(&cloud, &labels, &cfg);
        let (set, stages) = segment(&cloud, &labels, &cfg, method);
        let pred = set.to_semantic_map(&labels)?;
        write_labels(&pred, args.out.join(format!("{}.label", input.name)))?;
        Ok(Outcome {
            name: input.name.clone(),
            instances: set.len(),
            warnings: report.issues.len(),
            stages,
        })
    })?;

    for r in results {
        let r = r?;
        let stages: Vec<String> = r
            .stages
            .iter()
            .map(|(name, d)| format!("{name} {:.2} ms", d.as_secs_f64() * 1e3))
            .collect();
        println!("{}: {} instances | {}", r.name, r.instances, stages.join(" | "));
        if r.warnings > 0 {
            eprintln!("warning: {}: {} validation issue(s)", r.name, r.warnings);
        }
    }
    Ok(())
}
