use std::fs;
use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use clap::Args;
use panoptic_sip::bench::{run_bench, BenchMethod};
use panoptic_sip::synth::generate_scene;

use crate::synth::load_spec;

#[derive(Args)]
pub struct BenchArgs {
    /// Scene spec (TOML) the benchmark scenes are generated from.
    #[arg(long, conflicts_with = "preset", required_unless_present = "preset")]
    suite: Option<PathBuf>,
    /// Built-in scene spec instead of a file.
    #[arg(long)]
    preset: Option<String>,
    /// Runs per method per scene.
    #[arg(long, default_value_t = 20)]
    repeat: usize,
    /// Comma-separated: sip, sip-noshift, sip+ia, meanshift, dbscan, sip-fps, sip-random.
    #[arg(long, default_value = "sip,sip-fps,sip-random,meanshift")]
    methods: String,
    /// Number of scenes, generated from consecutive seeds.
    #[arg(long, default_value_t = 1)]
    scenes: usize,
    /// First scene seed.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Class table (TOML); defaults to the built-in table.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Also write the report as JSON.
    #[arg(long)]
    report: Option<PathBuf>,
}

pub fn run(args: BenchArgs) -> Result<()> {
    let cfg = crate::load_config(args.config.as_ref())?;
    let spec = load_spec(args.suite.as_ref(), args.preset.as_deref(), "--suite")?;
    if args.repeat == 0 {
        bail!("--repeat must be at least 1");
    }
    if args.scenes == 0 {
        bail!("--scenes must be at least 1");
    }
    let methods: Vec<BenchMethod> = args
        .methods
        .split(',')
        .map(|m| m.trim().parse::<BenchMethod>().with_context(|| "--methods"))
        .collect::<Result<_>>()?;
    if methods.is_empty() {
        bail!("--methods is empty");
    }
    let scenes = (0..args.scenes as u64)
        .map(|k| generate_scene(&spec, args.seed + k).with_context(|| format!("--suite: seed {}", args.seed + k)))
        .collect::<Result<Vec<_>>>()?;

    // Latency is measured on one thread.
    let pool = rayon::ThreadPoolBuilder::new().num_threads(1).build()?;
    let report = pool.install(|| run_bench(&scenes, &cfg, &methods, args.repeat));
    println!(
        "{} scene(s), thing points {:?}, {} repeat(s)",
        report.scenes, report.thing_points, report.repeat
    );
    print!("{}", report.to_table());
    if let Some(path) = &args.report {
        fs::write(path, report.to_json()).with_context(|| format!("--report {}", path.display()))?;
    }
    Ok(())
}
