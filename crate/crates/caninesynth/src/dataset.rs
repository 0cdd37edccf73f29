//! Parallel, resumable dataset writer.
//!
//! Layout under the output directory:
//!
//! ```text
//! manifest.json
//! rgb/000000.png    composited image
//! mask/000000.png   silhouette, 0 or 255
//! part/000000.png   part label + 1, 0 for background
//! ann/000000.json   per-sample annotation record
//! depth/000000.scfd optional float depth
//! ```
//!
//! Each sample draws from its own RNG stream, so the bytes written depend
//! only on the configuration and seed, never on the worker count.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use caninesynth_core::composite::{generate_sample, Assets, DataSample, GenerationParams, PoseRecord};
use caninesynth_core::image::PixelRect;
use caninesynth_core::placement::PlacementSample;
use caninesynth_core::render::{Joint2d, Lighting};
use log::{info, warn};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::GenerationConfig;
use crate::error::{Error, IoContext, Result};
use crate::formats::images::{encode_mask, encode_parts, encode_rgb};
use crate::formats::{floatmap, read_json, write_atomic, write_json};

pub const MANIFEST_FILE: &str = "manifest.json";
pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleFiles {
    pub rgb: String,
    pub mask: String,
    pub part: String,
    pub ann: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub depth: Option<String>,
}

impl SampleFiles {
    pub fn for_index(index: u64, depth: bool) -> Self {
        let stem = format!("{index:06}");
        Self {
            rgb: format!("rgb/{stem}.png"),
            mask: format!("mask/{stem}.png"),
            part: format!("part/{stem}.png"),
            ann: format!("ann/{stem}.json"),
            depth: depth.then(|| format!("depth/{stem}.{}", floatmap::EXTENSION)),
        }
    }

    pub fn all(&self) -> impl Iterator<Item = &str> {
        [&self.rgb, &self.mask, &self.part, &self.ann]
            .into_iter()
            .chain(self.depth.as_ref())
            .map(String::as_str)
    }
}

/// Everything recorded about one sample. Written to `ann/` and repeated in
/// the manifest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleRecord {
    pub index: u64,
    pub seed: u64,
    pub files: SampleFiles,
    pub width: usize,
    pub height: usize,
    /// Silhouette box after repositioning, `[x0, x1) × [y0, y1)`.
    pub bbox: Option<PixelRect>,
    /// Projected joints after repositioning.
    pub joints_2d: Vec<Joint2d>,
    /// Camera-frame joints before repositioning.
    pub joints_3d: Vec<[f64; 3]>,
    pub pose: PoseRecord,
    pub shape_coefficients: Vec<f64>,
    pub texture_coefficients: Vec<f64>,
    pub background_id: String,
    pub placement: PlacementSample,
    pub lighting: Lighting,
    pub attempts: u32,
}

impl SampleRecord {
    pub fn of(sample: &DataSample, seed: u64, files: SampleFiles) -> Self {
        Self {
            index: sample.index,
            seed,
            files,
            width: sample.rgb.width(),
            height: sample.rgb.height(),
            bbox: sample.render.bbox,
            joints_2d: sample.render.joints_2d.clone(),
            joints_3d: sample.joints_3d.iter().map(|j| j.to_array()).collect(),
            pose: sample.pose.clone(),
            shape_coefficients: sample.shape_coefficients.values().to_vec(),
            texture_coefficients: sample.texture_coefficients.values().to_vec(),
            background_id: sample.background_id.clone(),
            placement: sample.placement,
            lighting: sample.lighting,
            attempts: sample.attempts,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub schema_version: u32,
    /// False when generation stopped early; `samples` then lists only the
    /// samples that were written.
    pub complete: bool,
    pub seed: u64,
    pub count: u64,
    pub config: GenerationConfig,
    pub samples: Vec<SampleRecord>,
}

impl Manifest {
    pub fn load(dir: &Path) -> Result<Self> {
        read_json(&dir.join(MANIFEST_FILE))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GenerationSummary {
    pub generated: u64,
    pub skipped: u64,
}

/// Encodes and writes one sample. Files are written atomically, and the
/// annotation last, so a sample with an annotation is complete.
pub fn write_sample(out: &Path, sample: &DataSample, seed: u64, write_depth: bool) -> Result<SampleRecord> {
    let files = SampleFiles::for_index(sample.index, write_depth);
    write_atomic(&out.join(&files.rgb), &encode_rgb(&sample.rgb))?;
    write_atomic(&out.join(&files.mask), &encode_mask(&sample.render.mask))?;
    write_atomic(&out.join(&files.part), &encode_parts(&sample.render.part_map)?)?;
    if let Some(d) = &files.depth {
        floatmap::save(&sample.render.depth, &out.join(d))?;
    }
    let record = SampleRecord::of(sample, seed, files);
    write_json(&out.join(&record.files.ann), &record)?;
    Ok(record)
}

/// The record of a finished sample, if every file is present and the
/// annotation belongs to this seed.
fn existing_sample(out: &Path, index: u64, seed: u64, write_depth: bool) -> Option<SampleRecord> {
    let files = SampleFiles::for_index(index, write_depth);
    if !files.all().all(|f| out.join(f).is_file()) {
        return None;
    }
    match read_json::<SampleRecord>(&out.join(&files.ann)) {
        Ok(r) if r.index == index && r.seed == seed && r.files == files => Some(r),
        Ok(_) => None,
        Err(e) => {
            warn!("regenerating sample {index}: {e}");
            None
        }
    }
}

fn generate_one(
    out: &Path,
    params: &GenerationParams,
    assets: &Assets,
    config: &GenerationConfig,
    index: u64,
) -> Result<(SampleRecord, bool)> {
    if let Some(r) = existing_sample(out, index, config.seed, config.write_depth) {
        return Ok((r, false));
    }
    let sample = generate_sample(params, assets, config.seed, index).map_err(|e| Error::Sample {
        index,
        source: Box::new(e.into()),
    })?;
    let record = write_sample(out, &sample, config.seed, config.write_depth).map_err(|e| Error::Sample {
        index,
        source: Box::new(e),
    })?;
    Ok((record, true))
}

/// Refuses to mix samples from different configurations in one directory.
fn check_existing_manifest(out: &Path, config: &GenerationConfig) -> Result<()> {
    let path = out.join(MANIFEST_FILE);
    if !path.exists() {
        return Ok(());
    }
    let old: Manifest = read_json(&path)?;
    let same = GenerationConfig {
        count: config.count,
        ..old.config.clone()
    } == *config;
    if !same {
        return Err(Error::Config(format!(
            "{} holds a dataset generated with a different configuration",
            out.display()
        )));
    }
    Ok(())
}

/// Generates `config.count` samples into `out` on `workers` threads
/// (0 = one per core). Finished samples already on disk are kept. On failure
/// the manifest lists the samples that were written and is marked
/// incomplete.
pub fn generate_dataset(
    config: &GenerationConfig,
    assets: &Assets,
    out: &Path,
    workers: usize,
) -> Result<GenerationSummary> {
    let params = config.params()?;
    fs::create_dir_all(out).at(out)?;
    check_existing_manifest(out, config)?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Error::Config(format!("thread pool: {e}")))?;

    let start = Instant::now();
    let results: Vec<Result<(SampleRecord, bool)>> = pool.install(|| {
        (0..config.count)
            .into_par_iter()
            .map(|i| generate_one(out, &params, assets, config, i))
            .collect()
    });

    let mut samples = Vec::with_capacity(results.len());
    let mut first_error = None;
    let mut generated = 0;
    for r in results {
        match r {
            Ok((record, fresh)) => {
                generated += fresh as u64;
                samples.push(record);
            }
            Err(e) => {
                if first_error.is_none() {
                    first_error = Some(e);
                }
            }
        }
    }
    let manifest = Manifest {
        schema_version: SCHEMA_VERSION,
        complete: first_error.is_none(),
        seed: config.seed,
        count: config.count,
        config: config.clone(),
        samples,
    };
    write_json(&out.join(MANIFEST_FILE), &manifest)?;
    if let Some(e) = first_error {
        return Err(e);
    }
    let summary = GenerationSummary {
        generated,
        skipped: config.count - generated,
    };
    info!(
        "{} samples generated, {} kept, in {:.1} s",
        summary.generated,
        summary.skipped,
        start.elapsed().as_secs_f64()
    );
    Ok(summary)
}

/// Paths of all files a manifest references, relative to `out`.
pub fn manifest_files(manifest: &Manifest) -> Vec<PathBuf> {
    manifest
        .samples
        .iter()
        .flat_map(|s| s.files.all().map(PathBuf::from).collect::<Vec<_>>())
        .collect()
}
