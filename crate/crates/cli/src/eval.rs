use std::fs;
use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use clap::Args;
use panoptic_sip::kitti_io::read_labels_any;
use panoptic_sip::metrics::PanopticEvaluator;
use panoptic_sip::pipeline::run_parallel;

use crate::files::label_pairs;
use crate::Threads;

#[derive(Args)]
pub struct EvalArgs {
    /// Predicted `.label` file or directory.
    #[arg(long)]
    pred: PathBuf,
    /// Ground-truth `.label` file or directory with the same file names.
    #[arg(long)]
    gt: PathBuf,
    /// Class table (TOML).
    #[arg(long)]
    config: PathBuf,
    /// Where to write the JSON score report.
    #[arg(long, default_value = "scores.json")]
    report: PathBuf,
    #[command(flatten)]
    threads: Threads,
}

pub fn run(args: EvalArgs) -> Result<()> {
    let cfg = crate::load_config(Some(&args.config))?;
    let pairs = label_pairs(&args.pred, &args.gt)?;

    let partial = run_parallel(&pairs, args.threads.threads, |(name, pred, gt)| -> Result<PanopticEvaluator> {
        let pred_map = read_labels_any(pred)?;
        let gt_map = read_labels_any(gt)?;
        if pred_map.len() != gt_map.len() {
            bail!(
                "{name}: prediction has {} points but ground truth has {}",
                pred_map.len(),
                gt_map.len()
            );
        }
        let mut ev = PanopticEvaluator::new(&cfg);
        ev.add_scan(&pred_map, &gt_map).with_context(|| name.clone())?;
        Ok(ev)
    })?;

    let mut total = PanopticEvaluator::new(&cfg);
    for ev in partial {
        total.merge(&ev?);
    }
    let scores = total.finalize();
    print!("{}", scores.to_table());
    fs::write(&args.report, scores.to_json()).with_context(|| format!("--report {}", args.report.display()))?;
    println!("{} scan(s); report written to {}", pairs.len(), args.report.display());
    Ok(())
}
