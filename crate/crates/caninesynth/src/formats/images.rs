//! PNG output for dataset channels, heatmap and mask input for evaluation,
//! and background loading.

use std::fs;
use std::io::Cursor;
use std::path::{Path, PathBuf};

use caninesynth_core::composite::Background;
use caninesynth_core::eval::{BinaryMask, Heatmap, Prediction};
use caninesynth_core::image::{Image, Rgb};
use image::codecs::png::PngEncoder;
use image::imageops::FilterType;
use image::{DynamicImage, ExtendedColorType, ImageEncoder, ImageReader};

use crate::error::{format_err, Error, IoContext, Result};
use crate::formats::{floatmap, write_atomic};

pub fn quantize(v: f64) -> u8 {
    (v.clamp(0.0, 1.0) * 255.0).round() as u8
}

fn encode_png(width: usize, height: usize, bytes: &[u8], color: ExtendedColorType) -> Vec<u8> {
    let mut out = Vec::new();
    PngEncoder::new(&mut out)
        .write_image(bytes, width as u32, height as u32, color)
        .expect("in-memory PNG encoding cannot fail for matching buffer sizes");
    out
}

pub fn encode_rgb(img: &Image<Rgb>) -> Vec<u8> {
    let bytes: Vec<u8> = img.data().iter().flat_map(|p| p.map(quantize)).collect();
    encode_png(img.width(), img.height(), &bytes, ExtendedColorType::Rgb8)
}

pub fn encode_mask(mask: &Image<bool>) -> Vec<u8> {
    let bytes: Vec<u8> = mask.data().iter().map(|&m| if m { 255 } else { 0 }).collect();
    encode_png(mask.width(), mask.height(), &bytes, ExtendedColorType::L8)
}

/// Part label + 1, 0 for background. Labels above 254 do not fit and are an
/// error.
pub fn encode_parts(parts: &Image<Option<u16>>) -> Result<Vec<u8>> {
    let bytes = parts
        .data()
        .iter()
        .map(|p| match p {
            None => Ok(0),
            Some(l) if *l < 255 => Ok(*l as u8 + 1),
            Some(l) => Err(Error::Config(format!("part label {l} does not fit an 8-bit map"))),
        })
        .collect::<Result<Vec<u8>>>()?;
    Ok(encode_png(
        parts.width(),
        parts.height(),
        &bytes,
        ExtendedColorType::L8,
    ))
}

/// 8-bit grayscale heatmap, `round(v·255)`.
pub fn encode_heatmap(hm: &Image<f64>) -> Vec<u8> {
    let bytes: Vec<u8> = hm.data().iter().map(|&v| quantize(v)).collect();
    encode_png(hm.width(), hm.height(), &bytes, ExtendedColorType::L8)
}

pub fn save_rgb(img: &Image<Rgb>, path: &Path) -> Result<()> {
    write_atomic(path, &encode_rgb(img))
}

pub fn save_mask(mask: &Image<bool>, path: &Path) -> Result<()> {
    write_atomic(path, &encode_mask(mask))
}

pub fn save_heatmap(hm: &Image<f64>, path: &Path) -> Result<()> {
    write_atomic(path, &encode_heatmap(hm))
}

fn open(path: &Path) -> Result<DynamicImage> {
    let bytes = fs::read(path).at(path)?;
    ImageReader::new(Cursor::new(bytes))
        .with_guessed_format()
        .at(path)?
        .decode()
        .map_err(|source| Error::Image {
            path: path.to_path_buf(),
            source,
        })
}

/// Gray levels in `[0, 1]`. Colour images are converted to luma; 16-bit
/// images keep their precision.
pub fn load_gray(path: &Path) -> Result<Image<f64>> {
    let img = open(path)?;
    let (w, h) = (img.width() as usize, img.height() as usize);
    let data: Vec<f64> = if img.color().bytes_per_pixel() / img.color().channel_count() > 1 {
        img.to_luma16()
            .into_raw()
            .into_iter()
            .map(|v| v as f64 / 65535.0)
            .collect()
    } else {
        img.to_luma8()
            .into_raw()
            .into_iter()
            .map(|v| v as f64 / 255.0)
            .collect()
    };
    Ok(Image::from_vec(w, h, data)?)
}

pub fn load_rgb(path: &Path) -> Result<Image<Rgb>> {
    let img = open(path)?.to_rgb8();
    let (w, h) = (img.width() as usize, img.height() as usize);
    let data = img.pixels().map(|p| p.0.map(|c| c as f64 / 255.0)).collect();
    Ok(Image::from_vec(w, h, data)?)
}

pub fn load_mask(path: &Path) -> Result<BinaryMask> {
    let gray = load_gray(path)?;
    Ok(Image::from_vec(
        gray.width(),
        gray.height(),
        gray.data().iter().map(|&v| v >= 0.5).collect(),
    )?)
}

/// Ground truth is binarized at 0.5.
pub fn load_ground_truth(path: &Path) -> Result<BinaryMask> {
    load_mask(path)
}

/// A loaded prediction plus the number of values clamped into `[0, 1]`.
pub struct LoadedPrediction {
    pub prediction: Prediction,
    pub clamped: usize,
}

/// Float dumps are always heatmaps. A PNG whose pixels are all exactly 0 or
/// full scale is a binary mask and passes through unthresholded; any other
/// PNG is a heatmap at `v/255` (or `v/65535`).
pub fn load_prediction(path: &Path) -> Result<LoadedPrediction> {
    let is_float = path
        .extension()
        .is_some_and(|e| e.eq_ignore_ascii_case(floatmap::EXTENSION));
    let values = if is_float {
        floatmap::load(path)?
    } else {
        load_gray(path)?
    };
    if !is_float && values.data().iter().all(|&v| v == 0.0 || v == 1.0) {
        let mask = Image::from_vec(
            values.width(),
            values.height(),
            values.data().iter().map(|&v| v == 1.0).collect(),
        )?;
        return Ok(LoadedPrediction {
            prediction: Prediction::Mask(mask),
            clamped: 0,
        });
    }
    let (hm, clamped) = Heatmap::clamped(values);
    Ok(LoadedPrediction {
        prediction: Prediction::Heatmap(hm),
        clamped,
    })
}

pub fn is_image_file(path: &Path) -> bool {
    path.extension()
        .and_then(|e| e.to_str())
        .is_some_and(|e| ["png", "jpg", "jpeg"].contains(&e.to_ascii_lowercase().as_str()))
}

/// Files in `dir` accepted by `keep`, sorted by name.
pub fn list_files(dir: &Path, keep: impl Fn(&Path) -> bool) -> Result<Vec<PathBuf>> {
    let mut files = Vec::new();
    for entry in fs::read_dir(dir).at(dir)? {
        let path = entry.at(dir)?.path();
        if path.is_file() && keep(&path) {
            files.push(path);
        }
    }
    files.sort();
    Ok(files)
}

/// Centre-crops to the target aspect ratio, then resizes to `width × height`.
pub fn fit_background(img: &DynamicImage, width: usize, height: usize) -> Image<Rgb> {
    let (iw, ih) = (img.width() as u64, img.height() as u64);
    let (tw, th) = (width as u64, height as u64);
    let (cw, ch) = if iw * th > ih * tw {
        ((ih * tw / th).max(1), ih)
    } else {
        (iw, (iw * th / tw).max(1))
    };
    let cropped = img.crop_imm(
        ((iw - cw) / 2) as u32,
        ((ih - ch) / 2) as u32,
        cw as u32,
        ch as u32,
    );
    let resized = cropped
        .resize_exact(width as u32, height as u32, FilterType::Triangle)
        .to_rgb8();
    Image::from_vec(
        width,
        height,
        resized.pixels().map(|p| p.0.map(|c| c as f64 / 255.0)).collect(),
    )
    .expect("resized buffer has the requested size")
}

/// Every PNG/JPEG in `dir`, sorted by file name, fitted to the frame. The
/// background id is the file stem.
pub fn load_backgrounds(dir: &Path, width: usize, height: usize) -> Result<Vec<Background>> {
    let files = list_files(dir, is_image_file)?;
    if files.is_empty() {
        return Err(format_err(dir, "no PNG or JPEG backgrounds found"));
    }
    files
        .iter()
        .map(|p| {
            Ok(Background {
                id: p
                    .file_stem()
                    .map(|s| s.to_string_lossy().into_owned())
                    .unwrap_or_default(),
                image: fit_background(&open(p)?, width, height),
            })
        })
        .collect()
}
