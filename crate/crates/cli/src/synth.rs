use std::fs;
use std::path::PathBuf;

use anyhow::{anyhow, bail, Context, Result};
use clap::Args;
use panoptic_sip::kitti_io::{write_labels, write_scan};
use panoptic_sip::pipeline::run_parallel;
use panoptic_sip::synth::{generate_scene, SceneSpec};

use crate::Threads;

#[derive(Args)]
pub struct SynthArgs {
    /// Scene spec (TOML).
    #[arg(long, conflicts_with = "preset", required_unless_present = "preset")]
    spec: Option<PathBuf>,
    /// Built-in scene spec instead of a file.
    #[arg(long)]
    preset: Option<String>,
    /// Inclusive seed range `a..b`, or a single seed.
    #[arg(long, default_value = "0..0")]
    seeds: String,
    /// Output directory for `NNNNNN.bin` and `NNNNNN.label`.
    #[arg(long)]
    out: PathBuf,
    #[command(flatten)]
    threads: Threads,
}

pub fn preset(name: &str, gap: f64) -> Result<SceneSpec> {
    Ok(match name {
        "separable" => SceneSpec::separable(),
        "recovery" => SceneSpec::recovery(),
        "fragmented" => SceneSpec::fragmented(gap),
        "dense" => SceneSpec::dense_100k(),
        other => bail!("unknown preset `{other}` (expected separable, recovery, fragmented or dense)"),
    })
}

/// Loads `--spec` or `--preset`; `flag` names the spec flag in errors.
pub fn load_spec(path: Option<&PathBuf>, preset_name: Option<&str>, flag: &str) -> Result<SceneSpec> {
    match (path, preset_name) {
        (Some(p), _) => SceneSpec::read(p).with_context(|| format!("{flag} {}", p.display())),
        (None, Some(name)) => preset(name, 2.5).context("--preset"),
        (None, None) => bail!("{flag} is required"),
    }
}

pub fn parse_seeds(text: &str) -> Result<Vec<u64>> {
    let bad = || anyhow!("--seeds `{text}`: expected `a..b` with a <= b, or a single seed");
    let (a, b) = match text.split_once("..") {
        Some((a, b)) => (a.trim().parse().map_err(|_| bad())?, b.trim().parse().map_err(|_| bad())?),
        None => {
            let s = text.trim().parse().map_err(|_| bad())?;
            (s, s)
        }
    };
    if a > b {
        return Err(bad());
    }
    Ok((a..=b).collect())
}

pub fn run(args: SynthArgs) -> Result<()> {
    let spec = load_spec(args.spec.as_ref(), args.preset.as_deref(), "--spec")?;
    let seeds = parse_seeds(&args.seeds)?;
    fs::create_dir_all(&args.out).with_context(|| format!("--out {}", args.out.display()))?;
    let written = run_parallel(&seeds, args.threads.threads, |&seed| -> Result<usize> {
        let (cloud, labels) = generate_scene(&spec, seed).with_context(|| format!("seed {seed}"))?;
        write_scan(&cloud, args.out.join(format!("{seed:06}.bin")))?;
        write_labels(&labels, args.out.join(format!("{seed:06}.label")))?;
        Ok(cloud.len())
    })?;
    let mut points = 0;
    for n in written {
        points += n?;
    }
    println!("wrote {} scene(s), {points} points, to {}", seeds.len(), args.out.display());
    Ok(())
}
