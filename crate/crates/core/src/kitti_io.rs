//! SemanticKITTI binary formats.
//!
//! A `.bin` scan is a flat array of little-endian `f32` records
//! `(x, y, z, intensity)`, 16 bytes per point. A `.label` file holds one
//! little-endian `u32` per point: semantic class in the low 16 bits, instance
//! ID in the high 16 bits.

use std::fs;
use std::path::Path;

use crate::config::ClassConfig;
use crate::error::{Error, Result};
use crate::model::{Point, PointCloud, SemanticMap, ValidationIssue};

pub const SCAN_RECORD_BYTES: usize = 16;
pub const LABEL_RECORD_BYTES: usize = 4;

pub fn decode_scan(bytes: &[u8]) -> std::result::Result<PointCloud, String> {
    if !bytes.len().is_multiple_of(SCAN_RECORD_BYTES) {
        return Err(format!(
            "length {} is not a multiple of {SCAN_RECORD_BYTES} bytes",
            bytes.len()
        ));
    }
    let points: Vec<Point> = bytes
        .chunks_exact(SCAN_RECORD_BYTES)
        .map(|r| {
            let f = |o: usize| f32::from_le_bytes([r[o], r[o + 1], r[o + 2], r[o + 3]]);
            Point::new(f(0), f(4), f(8), f(12))
        })
        .collect();
    let warnings = points
        .iter()
        .enumerate()
        .filter(|(_, p)| !p.is_finite())
        .map(|(index, _)| ValidationIssue::NonFinite { index })
        .collect();
    Ok(PointCloud { points, warnings })
}

pub fn encode_scan(cloud: &PointCloud) -> Vec<u8> {
    let mut out = Vec::with_capacity(cloud.len() * SCAN_RECORD_BYTES);
    for p in &cloud.points {
        for v in [p.x, p.y, p.z, p.intensity] {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    out
}

pub fn decode_labels(bytes: &[u8], expected_n: usize) -> std::result::Result<SemanticMap, String> {
    if bytes.len() != expected_n * LABEL_RECORD_BYTES {
        return Err(format!(
            "length {} does not match {expected_n} points ({} bytes expected)",
            bytes.len(),
            expected_n * LABEL_RECORD_BYTES
        ));
    }
    let mut semantic = Vec::with_capacity(expected_n);
    let mut instance = Vec::with_capacity(expected_n);
    for r in bytes.chunks_exact(LABEL_RECORD_BYTES) {
        let word = u32::from_le_bytes([r[0], r[1], r[2], r[3]]);
        semantic.push((word & 0xFFFF) as u16);
        instance.push((word >> 16) as u16);
    }
    Ok(SemanticMap { semantic, instance })
}

pub fn encode_labels(labels: &SemanticMap) -> Vec<u8> {
    let mut out = Vec::with_capacity(labels.len() * LABEL_RECORD_BYTES);
    for i in 0..labels.len() {
        out.extend_from_slice(&labels.word(i).to_le_bytes());
    }
    out
}

pub fn read_scan(path: impl AsRef<Path>) -> Result<PointCloud> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_scan(&bytes).map_err(|message| Error::Format {
        path: path.into(),
        message,
    })
}

/// Reads a label file; `expected_n` is the point count of the paired scan.
pub fn read_labels(path: impl AsRef<Path>, expected_n: usize) -> Result<SemanticMap> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_labels(&bytes, expected_n).map_err(|message| Error::Format {
        path: path.into(),
        message,
    })
}

/// Reads a label file of unknown length.
pub fn read_labels_any(path: impl AsRef<Path>) -> Result<SemanticMap> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    let n = bytes.len() / LABEL_RECORD_BYTES;
    decode_labels(&bytes, n).map_err(|message| Error::Format {
        path: path.into(),
        message,
    })
}

pub fn write_scan(cloud: &PointCloud, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, encode_scan(cloud)).map_err(|e| Error::io(path, e))
}

pub fn write_labels(labels: &SemanticMap, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, encode_labels(labels)).map_err(|e| Error::io(path, e))
}

pub fn read_config(path: impl AsRef<Path>) -> Result<ClassConfig> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    ClassConfig::from_toml_str(&text)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn single_record() {
        let mut bytes = Vec::new();
        for v in [1.0f32, 2.0, 3.0, 0.5] {
            bytes.extend_from_slice(&v.to_le_bytes());
        }
        let cloud = decode_scan(&bytes).unwrap();
        assert_eq!(cloud.points, vec![Point::new(1.0, 2.0, 3.0, 0.5)]);
        assert!(cloud.warnings.is_empty());
    }

    #[test]
    fn empty_scan() {
        assert!(decode_scan(&[]).unwrap().is_empty());
    }

    #[test]
    fn ragged_scan_is_format_error() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.bin");
        fs::write(&path, [0u8; 17]).unwrap();
        let err = read_scan(&path).unwrap_err();
        assert!(matches!(err, Error::Format { .. }));
        assert!(err.to_string().contains("bad.bin"));
    }

    #[test]
    fn nan_carried_as_warning() {
        let mut bytes = vec![0u8; 32];
        bytes[16..20].copy_from_slice(&f32::NAN.to_le_bytes());
        let cloud = decode_scan(&bytes).unwrap();
        assert_eq!(cloud.len(), 2);
        assert_eq!(cloud.warnings, vec![ValidationIssue::NonFinite { index: 1 }]);
    }

    #[test]
    fn label_bit_fields() {
        let bytes = [0x0005_0001u32, 0]
            .iter()
            .flat_map(|w| w.to_le_bytes())
            .collect::<Vec<_>>();
        let labels = decode_labels(&bytes, 2).unwrap();
        assert_eq!(labels.semantic, vec![1, 0]);
        assert_eq!(labels.instance, vec![5, 0]);
    }

    #[test]
    fn label_length_mismatch() {
        assert!(decode_labels(&[0u8; 8], 3).is_err());
    }

    #[test]
    fn missing_file_names_path() {
        let err = read_scan("/nonexistent/000000.bin").unwrap_err();
        assert!(err.to_string().contains("000000.bin"));
    }

    proptest! {
        #[test]
        fn scan_bytes_round_trip(words in proptest::collection::vec(any::<u32>(), 0..256)) {
            let n = words.len() / 4 * 4;
            let bytes: Vec<u8> = words[..n].iter().flat_map(|w| w.to_le_bytes()).collect();
            let cloud = decode_scan(&bytes).unwrap();
            prop_assert_eq!(encode_scan(&cloud), bytes);
        }

        #[test]
        fn label_bytes_round_trip(words in proptest::collection::vec(any::<u32>(), 0..256)) {
            let bytes: Vec<u8> = words.iter().flat_map(|w| w.to_le_bytes()).collect();
            let labels = decode_labels(&bytes, words.len()).unwrap();
            prop_assert_eq!(encode_labels(&labels), bytes);
        }
    }
}
