//! Bounding-box statistics CSV (`size_fraction,cx,cy`) and the JSON-lines
//! annotation dump they are derived from.

use std::fs;
use std::path::Path;

use caninesynth_core::placement::{AnnotationRecord, BBoxEntry, BBoxStats};

use crate::error::{format_err, IoContext, Result};
use crate::formats::write_atomic;

pub fn encode_stats(stats: &BBoxStats) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for e in stats.entries() {
        w.serialize(e)
            .map_err(|e| format_err(Path::new("<stats>"), e.to_string()))?;
    }
    w.into_inner()
        .map_err(|e| format_err(Path::new("<stats>"), e.to_string()))
}

pub fn save_stats(stats: &BBoxStats, path: &Path) -> Result<()> {
    write_atomic(path, &encode_stats(stats)?)
}

pub fn decode_stats(bytes: &[u8], path: &Path) -> Result<BBoxStats> {
    let mut r = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(bytes);
    let entries = r
        .deserialize::<BBoxEntry>()
        .enumerate()
        .map(|(i, row)| row.map_err(|e| format_err(path, format!("row {}: {e}", i + 1))))
        .collect::<Result<Vec<_>>>()?;
    BBoxStats::new(entries).map_err(|e| format_err(path, e.to_string()))
}

pub fn load_stats(path: &Path) -> Result<BBoxStats> {
    decode_stats(&fs::read(path).at(path)?, path)
}

/// One `{image_w, image_h, joints}` object per non-blank line.
pub fn load_annotations(path: &Path) -> Result<Vec<AnnotationRecord>> {
    let text = fs::read_to_string(path).at(path)?;
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| serde_json::from_str(l).map_err(|e| format_err(path, format!("line {}: {e}", i + 1))))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_round_trip() {
        let stats = BBoxStats::new(vec![
            BBoxEntry {
                size_fraction: 0.125,
                cx: 0.3,
                cy: 1.0 / 3.0,
            },
            BBoxEntry {
                size_fraction: 0.5,
                cx: 0.5,
                cy: 0.5,
            },
        ])
        .unwrap();
        let bytes = encode_stats(&stats).unwrap();
        assert!(bytes.starts_with(b"size_fraction,cx,cy\n"));
        assert_eq!(decode_stats(&bytes, Path::new("s.csv")).unwrap(), stats);
        assert!(decode_stats(b"size_fraction,cx,cy\n", Path::new("e.csv")).is_err());
        assert!(decode_stats(b"size_fraction,cx,cy\n0.1,abc,0.2\n", Path::new("e.csv")).is_err());
    }
}
