mod bench;
mod eval;
mod files;
mod segment;
mod synth;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

#[derive(Parser)]
#[command(name = "panoptic-sip", version, about = "Sparse instance proposals for LiDAR panoptic segmentation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Group thing points of labeled scans into instances.
    Segment(segment::SegmentArgs),
    /// Score predicted label files against ground truth.
    Eval(eval::EvalArgs),
    /// Time the pipeline and baselines on generated scenes.
    Bench(bench::BenchArgs),
    /// Generate synthetic scan/label pairs.
    Synth(synth::SynthArgs),
    /// Print the built-in class table as a config file.
    DefaultConfig,
    /// Print a built-in scene spec (separable, recovery, fragmented, dense).
    Preset(PresetArgs),
}

#[derive(Args)]
struct PresetArgs {
    name: String,
    /// Split gap in meters for the fragmented preset.
    #[arg(long, default_value_t = 2.5)]
    gap: f64,
}

/// Worker pool size shared by the commands that process many scans.
#[derive(Args, Clone, Copy)]
pub struct Threads {
    /// Worker threads; 0 uses every available core.
    #[arg(long, default_value_t = 0)]
    pub threads: usize,
}

fn load_config(path: Option<&PathBuf>) -> anyhow::Result<panoptic_sip::ClassConfig> {
    use anyhow::Context;
    match path {
        Some(p) => panoptic_sip::kitti_io::read_config(p).with_context(|| format!("--config {}", p.display())),
        None => Ok(panoptic_sip::ClassConfig::semantic_kitti()),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Segment(args) => segment::run(args),
        Command::Eval(args) => eval::run(args),
        Command::Bench(args) => bench::run(args),
        Command::Synth(args) => synth::run(args),
        Command::DefaultConfig => {
            print!("{}", panoptic_sip::ClassConfig::semantic_kitti().to_toml_string());
            Ok(())
        }
        Command::Preset(args) => synth::preset(&args.name, args.gap).map(|spec| print!("{}", spec.to_toml_string())),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
