//! Depth and image-position sampling driven by bounding-box statistics of
//! real images.
//!
//! Box sizes are area fractions of the image. Large boxes mean a nearby
//! animal, so sizes map monotonically decreasing onto the depth bounds. After
//! rendering, the rendered box size selects statistics entries of similar size
//! (±10 %), and a diagonal Gaussian over their centres gives the target
//! centre. Alignment with that centre is done per axis and never pushes the
//! box out of frame.

// Inherent float methods are missing when std is not linked.
use alloc::vec::Vec;
#[allow(unused_imports)]
use num_traits::Float;

use rand::Rng;
use rand_distr::{Distribution, LogNormal, Normal, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::image::PixelRect;

/// Relative half-width of the size window.
pub const SIZE_WINDOW: f64 = 0.1;
/// Growth factor applied to the half-width while too few entries match.
pub const WINDOW_GROWTH: f64 = 1.5;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BBoxEntry {
    /// Box area over image area, in `(0, 1]`.
    pub size_fraction: f64,
    /// Box centre in normalized image coordinates.
    pub cx: f64,
    pub cy: f64,
}

/// Empirical distribution of box sizes and centres.
#[derive(Debug, Clone, PartialEq)]
pub struct BBoxStats {
    entries: Vec<BBoxEntry>,
    min_size: f64,
    max_size: f64,
}

impl BBoxStats {
    pub fn new(entries: Vec<BBoxEntry>) -> Result<Self> {
        if entries.is_empty() {
            return Err(Error::EmptyStats);
        }
        for (i, e) in entries.iter().enumerate() {
            let ok = e.size_fraction > 0.0
                && e.size_fraction <= 1.0
                && (0.0..=1.0).contains(&e.cx)
                && (0.0..=1.0).contains(&e.cy);
            if !ok {
                return Err(Error::InvalidConfig(alloc::format!(
                    "bbox entry {i} out of range: {e:?}"
                )));
            }
        }
        let min_size = entries
            .iter()
            .map(|e| e.size_fraction)
            .fold(f64::INFINITY, f64::min);
        let max_size = entries.iter().map(|e| e.size_fraction).fold(0.0, f64::max);
        Ok(Self {
            entries,
            min_size,
            max_size,
        })
    }

    pub fn entries(&self) -> &[BBoxEntry] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn size_range(&self) -> (f64, f64) {
        (self.min_size, self.max_size)
    }

    /// Synthetic stand-in statistics: log-normal sizes (median 0.12) and
    /// centre-biased positions.
    pub fn synthetic<R: Rng + ?Sized>(rng: &mut R, count: usize) -> Result<Self> {
        let sizes = LogNormal::new(0.12f64.ln(), 0.7).expect("valid parameters");
        let cx = Normal::new(0.5, 0.12).expect("valid parameters");
        let cy = Normal::new(0.55, 0.1).expect("valid parameters");
        let entries = (0..count)
            .map(|_| BBoxEntry {
                size_fraction: sizes.sample(rng).clamp(0.005, 0.9),
                cx: cx.sample(rng).clamp(0.05, 0.95),
                cy: cy.sample(rng).clamp(0.05, 0.95),
            })
            .collect();
        Self::new(entries)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DepthBounds {
    pub near: f64,
    pub far: f64,
}

impl Default for DepthBounds {
    fn default() -> Self {
        Self { near: 1.5, far: 8.0 }
    }
}

impl DepthBounds {
    pub fn new(near: f64, far: f64) -> Result<Self> {
        let b = Self { near, far };
        b.validate()?;
        Ok(b)
    }

    pub fn validate(&self) -> Result<()> {
        if self.near > 0.0 && self.near < self.far && self.far.is_finite() {
            Ok(())
        } else {
            Err(Error::InvalidConfig(alloc::format!(
                "depth bounds need 0 < near < far, got {} .. {}",
                self.near,
                self.far
            )))
        }
    }
}

/// Result of placing one rendered animal.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PlacementSample {
    pub d_root: f64,
    pub cp: [f64; 2],
    pub translation: [i64; 2],
}

/// Linear decreasing map from box size to depth: the largest observed size
/// maps to `near`, the smallest to `far`. Identical sizes map to the midpoint.
pub fn depth_for_size(stats: &BBoxStats, bounds: &DepthBounds, size: f64) -> f64 {
    let (lo, hi) = stats.size_range();
    if hi <= lo {
        return 0.5 * (bounds.near + bounds.far);
    }
    let u = ((size - lo) / (hi - lo)).clamp(0.0, 1.0);
    bounds.far - (bounds.far - bounds.near) * u
}

/// Draws a box size uniformly from the statistics and maps it to a depth.
pub fn sample_root_depth<R: Rng + ?Sized>(stats: &BBoxStats, bounds: &DepthBounds, rng: &mut R) -> f64 {
    let e = &stats.entries[rng.random_range(0..stats.len())];
    depth_for_size(stats, bounds, e.size_fraction)
}

/// Entries selected for a rendered box size, and the window that selected
/// them.
#[derive(Debug, Clone, PartialEq)]
pub struct WindowSelection {
    pub lo: f64,
    pub hi: f64,
    pub indices: Vec<usize>,
}

/// Selects entries whose size lies in `[s(1−w), s(1+w)]`, starting at
/// `w = 0.1` and growing `w` by ×1.5 until at least two match or the window
/// spans every entry.
pub fn select_window(stats: &BBoxStats, size: f64) -> WindowSelection {
    let (smin, smax) = stats.size_range();
    let mut half = SIZE_WINDOW;
    loop {
        let lo = size * (1.0 - half);
        let hi = size * (1.0 + half);
        let indices: Vec<usize> = stats
            .entries
            .iter()
            .enumerate()
            .filter(|(_, e)| e.size_fraction >= lo && e.size_fraction <= hi)
            .map(|(i, _)| i)
            .collect();
        let covers_all = lo <= smin && hi >= smax;
        if indices.len() >= 2 || covers_all {
            return WindowSelection { lo, hi, indices };
        }
        half *= WINDOW_GROWTH;
    }
}

/// Diagonal Gaussian fitted to the centres of the selected entries.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CenterGaussian {
    pub mean: [f64; 2],
    pub std: [f64; 2],
}

pub fn fit_center_gaussian(stats: &BBoxStats, indices: &[usize]) -> CenterGaussian {
    let n = indices.len() as f64;
    let mut mean = [0.0; 2];
    for &i in indices {
        mean[0] += stats.entries[i].cx;
        mean[1] += stats.entries[i].cy;
    }
    mean[0] /= n;
    mean[1] /= n;
    let mut var = [0.0; 2];
    if indices.len() > 1 {
        for &i in indices {
            var[0] += (stats.entries[i].cx - mean[0]).powi(2);
            var[1] += (stats.entries[i].cy - mean[1]).powi(2);
        }
        var[0] /= n - 1.0;
        var[1] /= n - 1.0;
    }
    CenterGaussian {
        mean,
        std: [var[0].sqrt(), var[1].sqrt()],
    }
}

/// Samples the target centre `cp` for a rendered box of the given area
/// fraction. The draw is clamped to the unit square.
pub fn sample_center<R: Rng + ?Sized>(
    stats: &BBoxStats,
    rendered_box_size: f64,
    rng: &mut R,
) -> Result<[f64; 2]> {
    if stats.is_empty() {
        return Err(Error::EmptyStats);
    }
    if !(rendered_box_size > 0.0 && rendered_box_size <= 1.0) {
        return Err(Error::InvalidConfig(alloc::format!(
            "rendered box size {rendered_box_size} outside (0, 1]"
        )));
    }
    let sel = select_window(stats, rendered_box_size);
    let indices = if sel.indices.is_empty() {
        (0..stats.len()).collect()
    } else {
        sel.indices
    };
    let g = fit_center_gaussian(stats, &indices);
    let zx: f64 = StandardNormal.sample(rng);
    let zy: f64 = StandardNormal.sample(rng);
    Ok([
        (g.mean[0] + g.std[0] * zx).clamp(0.0, 1.0),
        (g.mean[1] + g.std[1] * zy).clamp(0.0, 1.0),
    ])
}

fn clamp_axis(lo: i64, hi: i64, extent: i64, target: f64) -> i64 {
    // A box touching or crossing an edge was clipped by the frame on this axis
    // and stays where it is.
    if lo <= 0 || hi >= extent {
        return 0;
    }
    let ideal = (target - (lo + hi) as f64 * 0.5).round() as i64;
    ideal.clamp(-lo, extent - hi)
}

/// Integer translation moving the box centre towards `cp·(W, H)`, resolved
/// independently per axis.
///
/// On an axis where the box is strictly inside the frame the translation is
/// clamped so the box stays inside. On an axis where the box touches or
/// crosses the frame edge (including boxes larger than the frame) the
/// translation is zero.
pub fn clamp_translation(dog_box: PixelRect, cp: [f64; 2], image: (usize, usize)) -> Result<(i64, i64)> {
    if dog_box.is_empty() {
        return Err(Error::DegenerateBox);
    }
    let (w, h) = (image.0 as i64, image.1 as i64);
    if dog_box.intersection_area(image.0, image.1) == 0 {
        return Err(Error::InvalidConfig("box does not intersect the image".into()));
    }
    Ok((
        clamp_axis(dog_box.x0, dog_box.x1, w, cp[0] * w as f64),
        clamp_axis(dog_box.y0, dog_box.y1, h, cp[1] * h as f64),
    ))
}

/// One record of 2D joint annotations.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnnotationRecord {
    pub image_w: f64,
    pub image_h: f64,
    pub joints: Vec<[f64; 2]>,
}

/// Builds statistics from joint annotations. Records with fewer than two
/// joints inside the image, or whose joints span a zero-area box, are skipped
/// and counted.
pub fn derive_bbox_stats(records: &[AnnotationRecord]) -> Result<(BBoxStats, usize)> {
    if records.is_empty() {
        return Err(Error::EmptyStats);
    }
    let mut entries = Vec::new();
    let mut skipped = 0;
    for r in records {
        let inside: Vec<[f64; 2]> = r
            .joints
            .iter()
            .copied()
            .filter(|j| {
                j[0].is_finite()
                    && j[1].is_finite()
                    && (0.0..=r.image_w).contains(&j[0])
                    && (0.0..=r.image_h).contains(&j[1])
            })
            .collect();
        if inside.len() < 2 || r.image_w <= 0.0 || r.image_h <= 0.0 {
            skipped += 1;
            continue;
        }
        let (mut x0, mut y0, mut x1, mut y1) =
            (f64::INFINITY, f64::INFINITY, f64::NEG_INFINITY, f64::NEG_INFINITY);
        for j in &inside {
            x0 = x0.min(j[0]);
            y0 = y0.min(j[1]);
            x1 = x1.max(j[0]);
            y1 = y1.max(j[1]);
        }
        let area = (x1 - x0) * (y1 - y0);
        if area <= 0.0 {
            skipped += 1;
            continue;
        }
        entries.push(BBoxEntry {
            size_fraction: area / (r.image_w * r.image_h),
            cx: 0.5 * (x0 + x1) / r.image_w,
            cy: 0.5 * (y0 + y1) / r.image_h,
        });
    }
    if entries.is_empty() {
        return Err(Error::EmptyStats);
    }
    Ok((BBoxStats::new(entries)?, skipped))
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn entry(s: f64, cx: f64, cy: f64) -> BBoxEntry {
        BBoxEntry {
            size_fraction: s,
            cx,
            cy,
        }
    }

    #[test]
    fn single_entry_depth_is_midpoint() {
        let stats = BBoxStats::new(vec![entry(0.2, 0.5, 0.5)]).unwrap();
        let b = DepthBounds::new(2.0, 6.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert_eq!(sample_root_depth(&stats, &b, &mut rng), 4.0);
    }

    #[test]
    fn endpoints_map_to_bounds() {
        let stats = BBoxStats::new(vec![entry(0.1, 0.5, 0.5), entry(0.4, 0.5, 0.5)]).unwrap();
        let b = DepthBounds::default();
        assert_eq!(depth_for_size(&stats, &b, 0.4), b.near);
        assert_eq!(depth_for_size(&stats, &b, 0.1), b.far);
    }

    #[test]
    fn invalid_inputs() {
        assert!(BBoxStats::new(vec![]).is_err());
        assert!(BBoxStats::new(vec![entry(0.0, 0.5, 0.5)]).is_err());
        assert!(BBoxStats::new(vec![entry(0.5, 1.5, 0.5)]).is_err());
        assert!(DepthBounds::new(3.0, 2.0).is_err());
        assert!(DepthBounds::new(0.0, 2.0).is_err());
    }

    #[test]
    fn single_entry_center_after_widening() {
        let stats = BBoxStats::new(vec![entry(0.3, 0.5, 0.5)]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let sel = select_window(&stats, 0.01);
        assert_eq!(sel.indices, vec![0]);
        assert_eq!(sample_center(&stats, 0.01, &mut rng).unwrap(), [0.5, 0.5]);
    }

    #[test]
    fn widening_engages_when_window_is_empty() {
        let stats = BBoxStats::new(vec![
            entry(0.05, 0.2, 0.2),
            entry(0.5, 0.8, 0.8),
            entry(0.6, 0.7, 0.7),
        ])
        .unwrap();
        let sel = select_window(&stats, 0.2);
        assert!(sel.indices.len() >= 2);
        assert!(sel.lo < 0.18 || sel.hi > 0.22);
    }

    #[test]
    fn centred_box_needs_no_translation() {
        let b = PixelRect::new(100, 50, 200, 150);
        let cp = [150.0 / 400.0, 100.0 / 200.0];
        assert_eq!(clamp_translation(b, cp, (400, 200)).unwrap(), (0, 0));
    }

    #[test]
    fn top_edge_locks_vertical_axis() {
        let b = PixelRect::new(100, 0, 200, 80);
        let (dx, dy) = clamp_translation(b, [0.6, 0.2], (455, 256)).unwrap();
        assert_eq!(dy, 0);
        assert_eq!(dx, (0.6f64 * 455.0 - 150.0).round() as i64);
    }

    #[test]
    fn oversize_box_never_moves_on_that_axis() {
        let b = PixelRect::new(100, -20, 180, 280);
        for cp in [[0.1, 0.1], [0.9, 0.9]] {
            let (_, dy) = clamp_translation(b, cp, (455, 256)).unwrap();
            assert_eq!(dy, 0);
        }
    }

    #[test]
    fn translation_clamped_to_frame() {
        let b = PixelRect::new(10, 10, 60, 60);
        let (dx, dy) = clamp_translation(b, [1.0, 1.0], (100, 100)).unwrap();
        assert_eq!((dx, dy), (40, 40));
        assert!(b.translated(dx, dy).inside(100, 100));
    }

    #[test]
    fn degenerate_box_is_rejected() {
        assert!(matches!(
            clamp_translation(PixelRect::new(5, 5, 5, 9), [0.5, 0.5], (10, 10)),
            Err(Error::DegenerateBox)
        ));
    }

    #[test]
    fn derive_arithmetic() {
        let recs = vec![AnnotationRecord {
            image_w: 455.0,
            image_h: 256.0,
            joints: vec![[10.0, 10.0], [110.0, 210.0]],
        }];
        let (stats, skipped) = derive_bbox_stats(&recs).unwrap();
        assert_eq!(skipped, 0);
        let e = stats.entries()[0];
        assert!((e.size_fraction - 20000.0 / 116480.0).abs() < 1e-15);
        assert!((e.cx - 60.0 / 455.0).abs() < 1e-15);
        assert!((e.cy - 110.0 / 256.0).abs() < 1e-15);
    }

    #[test]
    fn derive_skips_single_joint_and_rejects_empty() {
        let recs = vec![
            AnnotationRecord {
                image_w: 100.0,
                image_h: 100.0,
                joints: vec![[10.0, 10.0]],
            },
            AnnotationRecord {
                image_w: 100.0,
                image_h: 100.0,
                joints: vec![[10.0, 10.0], [50.0, 40.0], [500.0, 40.0]],
            },
        ];
        let (stats, skipped) = derive_bbox_stats(&recs).unwrap();
        assert_eq!((stats.len(), skipped), (1, 1));
        assert!(derive_bbox_stats(&[]).is_err());
        assert!(derive_bbox_stats(&recs[..1]).is_err());
    }
}
