//! Directory-level segmentation evaluation and report files.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use caninesynth_core::eval::{evaluate_one, ImageMetrics, MetricReport, Summary};
use log::warn;
use rayon::prelude::*;

use crate::error::{format_err, Error, Result};
use crate::formats::images::{is_image_file, list_files, load_ground_truth, load_prediction};
use crate::formats::{floatmap, write_atomic, write_json};

fn stem(path: &Path) -> String {
    path.file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default()
}

fn by_stem(files: Vec<PathBuf>, dir: &Path) -> Result<BTreeMap<String, PathBuf>> {
    let mut map = BTreeMap::new();
    for f in files {
        if let Some(prev) = map.insert(stem(&f), f.clone()) {
            return Err(format_err(
                dir,
                format!("{} and {} share a file stem", prev.display(), f.display()),
            ));
        }
    }
    Ok(map)
}

/// Pairs predictions with ground truth by file stem and scores the
/// intersection. Predictions may be PNG/JPEG heatmaps or masks, or float
/// maps; ground truth is binarized at 0.5. Files without a partner are
/// listed in the report, and an empty intersection is an error.
pub fn evaluate_dirs(pred_dir: &Path, gt_dir: &Path, t0: f64) -> Result<MetricReport> {
    let preds = by_stem(
        list_files(pred_dir, |p| {
            is_image_file(p)
                || p.extension()
                    .is_some_and(|e| e.eq_ignore_ascii_case(floatmap::EXTENSION))
        })?,
        pred_dir,
    )?;
    let gts = by_stem(list_files(gt_dir, is_image_file)?, gt_dir)?;

    let mut unmatched: Vec<String> = preds
        .iter()
        .filter(|(k, _)| !gts.contains_key(*k))
        .chain(gts.iter().filter(|(k, _)| !preds.contains_key(*k)))
        .map(|(_, p)| p.display().to_string())
        .collect();
    unmatched.sort();
    let pairs: Vec<(&String, &PathBuf, &PathBuf)> = preds
        .iter()
        .filter_map(|(k, p)| gts.get(k).map(|g| (k, p, g)))
        .collect();
    if pairs.is_empty() {
        return Err(Error::NoPairs {
            unmatched: unmatched.len(),
        });
    }
    for u in &unmatched {
        warn!("no partner for {u}");
    }

    let images = pairs
        .par_iter()
        .map(|(name, pred_path, gt_path)| {
            let loaded = load_prediction(pred_path)?;
            if loaded.clamped > 0 {
                warn!(
                    "{}: {} values clamped into [0, 1]",
                    pred_path.display(),
                    loaded.clamped
                );
            }
            let gt = load_ground_truth(gt_path)?;
            evaluate_one((*name).clone(), &loaded.prediction, &gt, t0)
                .map_err(|e| format_err(pred_path, e.to_string()))
        })
        .collect::<Result<Vec<ImageMetrics>>>()?;
    Ok(MetricReport::from_images(t0, images, unmatched)?)
}

pub fn write_report_json(report: &MetricReport, path: &Path) -> Result<()> {
    write_json(path, report)
}

/// One row per image, then `mean` and `pooled` summary rows.
pub fn encode_report_csv(report: &MetricReport) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let err = |e: csv::Error| format_err(Path::new("<report>"), e.to_string());
    w.write_record([
        "name",
        "threshold",
        "tp",
        "fp",
        "fn",
        "tn",
        "iou",
        "dice_f2",
        "f_beta2",
        "pixel_accuracy",
    ])
    .map_err(err)?;
    for m in &report.images {
        w.write_record([
            m.name.clone(),
            m.threshold.map(|t| t.to_string()).unwrap_or_default(),
            m.counts.tp.to_string(),
            m.counts.fp.to_string(),
            m.counts.fn_.to_string(),
            m.counts.tn.to_string(),
            m.iou.to_string(),
            m.dice_f2.to_string(),
            m.f_beta2.to_string(),
            m.pixel_accuracy.to_string(),
        ])
        .map_err(err)?;
    }
    let summary_row = |name: &str, s: &Summary| {
        vec![
            name.to_string(),
            String::new(),
            String::new(),
            String::new(),
            String::new(),
            String::new(),
            s.iou.to_string(),
            s.dice_f2.to_string(),
            s.f_beta2.to_string(),
            s.pixel_accuracy.to_string(),
        ]
    };
    w.write_record(summary_row("mean", &report.mean)).map_err(err)?;
    w.write_record(summary_row("pooled", &report.pooled))
        .map_err(err)?;
    w.into_inner()
        .map_err(|e| format_err(Path::new("<report>"), e.to_string()))
}

pub fn write_report_csv(report: &MetricReport, path: &Path) -> Result<()> {
    write_atomic(path, &encode_report_csv(report)?)
}
