//! Pairing of scan and label files given as single files or directories.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};

#[derive(Debug, Clone)]
pub struct ScanInput {
    pub name: String,
    pub scan: PathBuf,
    pub labels: PathBuf,
}

/// Files in `dir` with extension `ext`, sorted by name.
pub fn list(dir: &Path, ext: &str, flag: &str) -> Result<Vec<PathBuf>> {
    let mut out = Vec::new();
    for entry in fs::read_dir(dir).with_context(|| format!("{flag} {}", dir.display()))? {
        let path = entry.with_context(|| format!("{flag} {}", dir.display()))?.path();
        if path.is_file() && path.extension().is_some_and(|e| e == ext) {
            out.push(path);
        }
    }
    out.sort();
    Ok(out)
}

pub fn stem(path: &Path) -> String {
    path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default()
}

/// `--scan` and `--labels` are both files or both directories. In directory
/// mode every `NAME.bin` needs a `NAME.label` next to the labels.
pub fn scan_inputs(scan: &Path, labels: &Path) -> Result<Vec<ScanInput>> {
    if !scan.exists() {
        bail!("--scan {}: no such file or directory", scan.display());
    }
    if !labels.exists() {
        bail!("--labels {}: no such file or directory", labels.display());
    }
    match (scan.is_dir(), labels.is_dir()) {
        (false, false) => Ok(vec![ScanInput {
            name: stem(scan),
            scan: scan.to_path_buf(),
            labels: labels.to_path_buf(),
        }]),
        (true, true) => {
            let scans = list(scan, "bin", "--scan")?;
            if scans.is_empty() {
                bail!("--scan {}: no .bin files", scan.display());
            }
            scans
                .into_iter()
                .map(|s| {
                    let name = stem(&s);
                    let l = labels.join(format!("{name}.label"));
                    if !l.is_file() {
                        bail!("--labels {}: missing {name}.label", labels.display());
                    }
                    Ok(ScanInput { name, scan: s, labels: l })
                })
                .collect()
        }
        _ => bail!("--scan and --labels must both be files or both be directories"),
    }
}

/// Pairs prediction and ground-truth label files by name. Both sides must
/// hold exactly the same names.
pub fn label_pairs(pred: &Path, gt: &Path) -> Result<Vec<(String, PathBuf, PathBuf)>> {
    if !pred.exists() {
        bail!("--pred {}: no such file or directory", pred.display());
    }
    if !gt.exists() {
        bail!("--gt {}: no such file or directory", gt.display());
    }
    match (pred.is_dir(), gt.is_dir()) {
        (false, false) => Ok(vec![(stem(gt), pred.to_path_buf(), gt.to_path_buf())]),
        (true, true) => {
            let gts = list(gt, "label", "--gt")?;
            let preds = list(pred, "label", "--pred")?;
            let names = |v: &[PathBuf]| v.iter().map(|p| stem(p)).collect::<Vec<_>>();
            let (gn, pn) = (names(&gts), names(&preds));
            if let Some(missing) = gn.iter().find(|n| !pn.contains(n)) {
                bail!("--pred {}: missing {missing}.label", pred.display());
            }
            if let Some(extra) = pn.iter().find(|n| !gn.contains(n)) {
                bail!("--gt {}: missing {extra}.label", gt.display());
            }
            if gts.is_empty() {
                bail!("--gt {}: no .label files", gt.display());
            }
            Ok(gn.into_iter().zip(preds).zip(gts).map(|((n, p), g)| (n, p, g)).collect())
        }
        _ => bail!("--pred and --gt must both be files or both be directories"),
    }
}
