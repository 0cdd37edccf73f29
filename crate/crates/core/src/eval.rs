//! Heatmap binarization and binary segmentation metrics.

use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::image::Image;

pub const DEFAULT_T0: f64 = 0.7;
pub const CONVERGENCE_TOL: f64 = 1e-4;
pub const MAX_ITERATIONS: usize = 100;

pub type BinaryMask = Image<bool>;

/// Per-pixel foreground probability in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Heatmap(Image<f64>);

impl Heatmap {
    /// Clamps values into `[0, 1]` and returns how many were changed. NaN
    /// becomes 0.
    pub fn clamped(mut image: Image<f64>) -> (Self, usize) {
        let mut changed = 0;
        for v in image.data_mut() {
            let c = if v.is_nan() { 0.0 } else { v.clamp(0.0, 1.0) };
            if c != *v || v.is_nan() {
                changed += 1;
                *v = c;
            }
        }
        (Self(image), changed)
    }

    pub fn image(&self) -> &Image<f64> {
        &self.0
    }

    pub fn width(&self) -> usize {
        self.0.width()
    }

    pub fn height(&self) -> usize {
        self.0.height()
    }

    pub fn threshold(&self, t: f64) -> BinaryMask {
        Image::from_vec(
            self.width(),
            self.height(),
            self.0.data().iter().map(|&v| v >= t).collect(),
        )
        .expect("same shape")
    }
}

/// Outcome of the intermeans iteration.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IsodataOutcome {
    pub threshold: f64,
    pub iterations: usize,
    pub converged: bool,
}

/// One step of the iteration: the midpoint of the means below and at-or-above
/// `t`, or the global mean when either side is empty.
pub fn isodata_step(values: &[f64], t: f64) -> f64 {
    let (mut lo_sum, mut lo_n, mut hi_sum, mut hi_n) = (0.0, 0usize, 0.0, 0usize);
    for &v in values {
        if v < t {
            lo_sum += v;
            lo_n += 1;
        } else {
            hi_sum += v;
            hi_n += 1;
        }
    }
    if lo_n == 0 || hi_n == 0 {
        return (lo_sum + hi_sum) / (lo_n + hi_n) as f64;
    }
    0.5 * (lo_sum / lo_n as f64 + hi_sum / hi_n as f64)
}

/// Iterates [`isodata_step`] from `t0` until successive thresholds differ by
/// less than `1e-4` or 100 steps have run. On convergence the returned
/// threshold is the one whose step moved less than the tolerance.
pub fn isodata(values: &[f64], t0: f64) -> Result<IsodataOutcome> {
    if !(t0 > 0.0 && t0 < 1.0) {
        return Err(Error::InvalidConfig(alloc::format!(
            "t0 = {t0} is outside (0, 1)"
        )));
    }
    if values.is_empty() {
        return Ok(IsodataOutcome {
            threshold: t0,
            iterations: 0,
            converged: true,
        });
    }
    let mut t = t0;
    for i in 1..=MAX_ITERATIONS {
        let next = isodata_step(values, t);
        if (next - t).abs() < CONVERGENCE_TOL {
            return Ok(IsodataOutcome {
                threshold: t,
                iterations: i,
                converged: true,
            });
        }
        t = next;
    }
    Ok(IsodataOutcome {
        threshold: t,
        iterations: MAX_ITERATIONS,
        converged: false,
    })
}

/// Binarizes a heatmap with the intermeans threshold started at `t0`.
pub fn iterative_threshold(hm: &Heatmap, t0: f64) -> Result<(f64, BinaryMask)> {
    let outcome = isodata(hm.image().data(), t0)?;
    Ok((outcome.threshold, hm.threshold(outcome.threshold)))
}

/// Confusion counts of a prediction against ground truth.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Confusion {
    pub tp: u64,
    pub fp: u64,
    pub fn_: u64,
    pub tn: u64,
}

impl Confusion {
    pub fn of(pred: &BinaryMask, gt: &BinaryMask) -> Result<Self> {
        pred.check_shape(gt)?;
        let mut c = Confusion::default();
        for (&p, &g) in pred.data().iter().zip(gt.data()) {
            match (p, g) {
                (true, true) => c.tp += 1,
                (true, false) => c.fp += 1,
                (false, true) => c.fn_ += 1,
                (false, false) => c.tn += 1,
            }
        }
        Ok(c)
    }

    pub fn total(&self) -> u64 {
        self.tp + self.fp + self.fn_ + self.tn
    }

    /// `|a∩b| / |a∪b|`, 1 when both are empty.
    pub fn iou(&self) -> f64 {
        ratio(self.tp, self.tp + self.fp + self.fn_)
    }

    /// `2|a∩b| / (|a| + |b|)`, 1 when both are empty.
    pub fn dice(&self) -> f64 {
        ratio(2 * self.tp, 2 * self.tp + self.fp + self.fn_)
    }

    /// `F_β` with recall weighted `β²` times precision; 1 when both are empty.
    pub fn f_beta(&self, beta: f64) -> f64 {
        let b2 = beta * beta;
        let num = (1.0 + b2) * self.tp as f64;
        let den = num + b2 * self.fn_ as f64 + self.fp as f64;
        if den == 0.0 {
            1.0
        } else {
            num / den
        }
    }

    /// Fraction of agreeing pixels; 1 for zero-sized masks.
    pub fn accuracy(&self) -> f64 {
        ratio(self.tp + self.tn, self.total())
    }
}

impl core::ops::Add for Confusion {
    type Output = Confusion;

    fn add(self, o: Confusion) -> Confusion {
        Confusion {
            tp: self.tp + o.tp,
            fp: self.fp + o.fp,
            fn_: self.fn_ + o.fn_,
            tn: self.tn + o.tn,
        }
    }
}

fn ratio(num: u64, den: u64) -> f64 {
    if den == 0 {
        1.0
    } else {
        num as f64 / den as f64
    }
}

pub fn iou(a: &BinaryMask, b: &BinaryMask) -> Result<f64> {
    Ok(Confusion::of(a, b)?.iou())
}

/// Dice coefficient (the F1 score).
pub fn dice_f2(a: &BinaryMask, b: &BinaryMask) -> Result<f64> {
    Ok(Confusion::of(a, b)?.dice())
}

pub fn f_beta(pred: &BinaryMask, gt: &BinaryMask, beta: f64) -> Result<f64> {
    Ok(Confusion::of(pred, gt)?.f_beta(beta))
}

pub fn pixel_accuracy(a: &BinaryMask, gt: &BinaryMask) -> Result<f64> {
    Ok(Confusion::of(a, gt)?.accuracy())
}

/// A prediction is either a heatmap to threshold or a finished mask.
#[derive(Debug, Clone, PartialEq)]
pub enum Prediction {
    Heatmap(Heatmap),
    Mask(BinaryMask),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImageMetrics {
    pub name: String,
    /// `None` when the prediction was already binary.
    pub threshold: Option<f64>,
    pub counts: Confusion,
    pub iou: f64,
    pub dice_f2: f64,
    pub f_beta2: f64,
    pub pixel_accuracy: f64,
}

impl ImageMetrics {
    pub fn from_counts(name: String, threshold: Option<f64>, counts: Confusion) -> Self {
        Self {
            name,
            threshold,
            counts,
            iou: counts.iou(),
            dice_f2: counts.dice(),
            f_beta2: counts.f_beta(2.0),
            pixel_accuracy: counts.accuracy(),
        }
    }
}

/// Means across images plus pooled-pixel metrics. Accuracy appears both as a
/// fraction and as a percentage.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub iou: f64,
    pub dice_f2: f64,
    pub f_beta2: f64,
    pub pixel_accuracy: f64,
    pub accuracy_pct: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub t0: f64,
    pub images: Vec<ImageMetrics>,
    pub mean: Summary,
    pub pooled: Summary,
    pub unmatched: Vec<String>,
}

impl MetricReport {
    pub fn from_images(t0: f64, images: Vec<ImageMetrics>, unmatched: Vec<String>) -> Result<Self> {
        if images.is_empty() {
            return Err(Error::InvalidConfig("no prediction/ground-truth pairs".into()));
        }
        let n = images.len() as f64;
        let avg = |f: fn(&ImageMetrics) -> f64| images.iter().map(f).sum::<f64>() / n;
        let mean_acc = avg(|m| m.pixel_accuracy);
        let mean = Summary {
            iou: avg(|m| m.iou),
            dice_f2: avg(|m| m.dice_f2),
            f_beta2: avg(|m| m.f_beta2),
            pixel_accuracy: mean_acc,
            accuracy_pct: 100.0 * mean_acc,
        };
        let all = images.iter().fold(Confusion::default(), |acc, m| acc + m.counts);
        let pooled = Summary {
            iou: all.iou(),
            dice_f2: all.dice(),
            f_beta2: all.f_beta(2.0),
            pixel_accuracy: all.accuracy(),
            accuracy_pct: 100.0 * all.accuracy(),
        };
        Ok(Self {
            t0,
            images,
            mean,
            pooled,
            unmatched,
        })
    }
}

/// Scores one prediction against its ground truth.
pub fn evaluate_one(name: String, pred: &Prediction, gt: &BinaryMask, t0: f64) -> Result<ImageMetrics> {
    let (threshold, mask) = match pred {
        Prediction::Heatmap(hm) => {
            let (t, m) = iterative_threshold(hm, t0)?;
            (Some(t), m)
        }
        Prediction::Mask(m) => (None, m.clone()),
    };
    Ok(ImageMetrics::from_counts(
        name,
        threshold,
        Confusion::of(&mask, gt)?,
    ))
}

/// Scores named pairs and summarizes them.
pub fn evaluate_pairs(pairs: &[(String, Prediction, BinaryMask)], t0: f64) -> Result<MetricReport> {
    let images = pairs
        .iter()
        .map(|(name, p, gt)| evaluate_one(name.clone(), p, gt, t0))
        .collect::<Result<Vec<_>>>()?;
    MetricReport::from_images(t0, images, Vec::new())
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn mask(w: usize, h: usize, on: &[(usize, usize)]) -> BinaryMask {
        Image::from_fn(w, h, |x, y| on.contains(&(x, y)))
    }

    #[test]
    fn two_by_two_example() {
        let a = mask(2, 2, &[(0, 0), (0, 1)]);
        let b = mask(2, 2, &[(0, 1), (1, 1)]);
        assert_eq!(iou(&a, &b).unwrap(), 1.0 / 3.0);
        assert_eq!(dice_f2(&a, &b).unwrap(), 0.5);
        assert_eq!(pixel_accuracy(&a, &b).unwrap(), 0.5);
    }

    #[test]
    fn identical_disjoint_empty() {
        let a = mask(3, 3, &[(0, 0), (2, 2)]);
        let b = mask(3, 3, &[(1, 1)]);
        let none = mask(3, 3, &[]);
        assert_eq!(iou(&a, &a).unwrap(), 1.0);
        assert_eq!(dice_f2(&a, &a).unwrap(), 1.0);
        assert_eq!(iou(&a, &b).unwrap(), 0.0);
        assert_eq!(dice_f2(&a, &b).unwrap(), 0.0);
        assert_eq!(iou(&none, &none).unwrap(), 1.0);
        assert_eq!(dice_f2(&none, &none).unwrap(), 1.0);
        let complement = Image::from_fn(3, 3, |x, y| !a.get(x, y));
        assert_eq!(pixel_accuracy(&a, &complement).unwrap(), 0.0);
        assert!(iou(&a, &mask(2, 2, &[])).is_err());
    }

    #[test]
    fn f_beta_weights_recall() {
        let c = Confusion {
            tp: 2,
            fp: 0,
            fn_: 2,
            tn: 0,
        };
        // precision 1, recall 0.5
        assert!((c.f_beta(1.0) - 2.0 / 3.0).abs() < 1e-15);
        assert!((c.f_beta(2.0) - 5.0 * 0.5 / (4.0 + 0.5)).abs() < 1e-15);
    }

    #[test]
    fn isodata_two_levels() {
        let values = [0.1, 0.9, 0.1, 0.9, 0.9];
        let out = isodata(&values, 0.7).unwrap();
        assert!(out.converged);
        assert!((out.threshold - 0.5).abs() < 1e-12);
        let hm = Heatmap::clamped(Image::from_vec(5, 1, values.to_vec()).unwrap()).0;
        let (_, m) = iterative_threshold(&hm, 0.7).unwrap();
        assert_eq!(m.data(), &[false, true, false, true, true]);
    }

    #[test]
    fn isodata_constant_map() {
        let hm = Heatmap::clamped(Image::filled(4, 3, 0.3)).0;
        let (t, m) = iterative_threshold(&hm, 0.7).unwrap();
        assert!((t - 0.3).abs() < 1e-12);
        assert!(m.data().iter().all(|v| *v));
    }

    #[test]
    fn isodata_rejects_bad_start() {
        assert!(isodata(&[0.5], 0.0).is_err());
        assert!(isodata(&[0.5], 1.0).is_err());
    }

    #[test]
    fn heatmap_clamping() {
        let (hm, changed) = Heatmap::clamped(Image::from_vec(4, 1, vec![-0.5, 0.2, 1.5, f64::NAN]).unwrap());
        assert_eq!(changed, 3);
        assert_eq!(hm.image().data(), &[0.0, 0.2, 1.0, 0.0]);
    }

    #[test]
    fn report_means_and_pooling() {
        let gt = mask(2, 1, &[(0, 0)]);
        let pairs = vec![
            ("a".into(), Prediction::Mask(mask(2, 1, &[(0, 0)])), gt.clone()),
            ("b".into(), Prediction::Mask(mask(2, 1, &[(1, 0)])), gt.clone()),
        ];
        let r = evaluate_pairs(&pairs, 0.7).unwrap();
        assert_eq!(r.mean.iou, 0.5);
        assert_eq!(r.mean.pixel_accuracy, 0.5);
        assert_eq!(r.mean.accuracy_pct, 50.0);
        assert_eq!(r.pooled.iou, 1.0 / 3.0);
        assert!(evaluate_pairs(&[], 0.7).is_err());
    }
}
