//! Linear PCA spaces over flattened samples.
//!
//! A model is a mean vector plus an orthonormal basis and per-component
//! variances. The same type serves the per-face texture space and the mesh
//! vertex space; only [`FeatureLayout`] differs, and texture synthesis clamps
//! its output into `[0, 1]`.
//!
//! Fitting goes through the `n_samples × n_samples` Gram matrix of the centred
//! samples, so a texture space with close to a million features is fitted from
//! a 12 × 12 eigenproblem.

// Inherent float methods are missing when std is not linked.
use alloc::vec;
use alloc::vec::Vec;
#[allow(unused_imports)]
use num_traits::Float;

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::symmetric_eigen;

/// Components whose variance falls below this fraction of the largest one are
/// dropped.
pub const VARIANCE_CUTOFF: f64 = 1e-10;

/// Coefficient draws are truncated at this many standard deviations.
pub const TRUNCATION_SIGMAS: f64 = 2.0;

/// Default faces and per-face texel resolution of the texture space.
pub const DEFAULT_TEXTURE_FACES: usize = 4848;
pub const DEFAULT_TEXTURE_RESOLUTION: usize = 4;

/// How a flattened feature vector maps back onto its domain object.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum FeatureLayout {
    /// `faces × d × d × d × 3` texels, each in `[0, 1]`.
    Texture { faces: usize, resolution: usize },
    /// `vertices × 3` coordinates.
    Mesh { vertices: usize },
}

impl FeatureLayout {
    pub fn n_features(&self) -> usize {
        match *self {
            FeatureLayout::Texture { faces, resolution } => faces * resolution.pow(3) * 3,
            FeatureLayout::Mesh { vertices } => vertices * 3,
        }
    }

    pub fn is_texture(&self) -> bool {
        matches!(self, FeatureLayout::Texture { .. })
    }
}

/// Training samples stored column by column (each sample contiguous).
#[derive(Debug, Clone, PartialEq)]
pub struct SampleMatrix {
    layout: FeatureLayout,
    n_samples: usize,
    data: Vec<f64>,
}

impl SampleMatrix {
    pub fn from_columns<C: AsRef<[f64]>>(layout: FeatureLayout, columns: &[C]) -> Result<Self> {
        let n_features = layout.n_features();
        if columns.len() < 2 {
            return Err(Error::TooFewSamples {
                required: 2,
                got: columns.len(),
            });
        }
        let mut data = Vec::with_capacity(n_features * columns.len());
        for col in columns {
            let col = col.as_ref();
            if col.len() != n_features {
                return Err(Error::DimensionMismatch {
                    expected: n_features,
                    got: col.len(),
                });
            }
            data.extend_from_slice(col);
        }
        for (i, &v) in data.iter().enumerate() {
            if !v.is_finite() {
                return Err(Error::NonFinite(i));
            }
            if layout.is_texture() && !(0.0..=1.0).contains(&v) {
                return Err(Error::OutOfUnitRange { index: i, value: v });
            }
        }
        Ok(Self {
            layout,
            n_samples: columns.len(),
            data,
        })
    }

    pub fn layout(&self) -> FeatureLayout {
        self.layout
    }

    pub fn n_features(&self) -> usize {
        self.layout.n_features()
    }

    pub fn n_samples(&self) -> usize {
        self.n_samples
    }

    pub fn column(&self, i: usize) -> &[f64] {
        let n = self.n_features();
        &self.data[i * n..(i + 1) * n]
    }
}

/// Coefficients in a PCA space (`β_shape` or `β_tex`).
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Coefficients(pub Vec<f64>);

impl Coefficients {
    pub fn zeros(n: usize) -> Self {
        Coefficients(vec![0.0; n])
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

/// Mean, orthonormal basis (column-major, one component per column) and
/// descending per-component variances.
#[derive(Debug, Clone, PartialEq)]
pub struct PcaModel {
    layout: FeatureLayout,
    mean: Vec<f64>,
    basis: Vec<f64>,
    variances: Vec<f64>,
}

impl PcaModel {
    /// Assembles a model from raw parts, checking shapes, finiteness, variance
    /// order and basis orthonormality to `ortho_tol`.
    pub fn from_parts(
        layout: FeatureLayout,
        mean: Vec<f64>,
        basis: Vec<f64>,
        variances: Vec<f64>,
        ortho_tol: f64,
    ) -> Result<Self> {
        let n = layout.n_features();
        if mean.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                got: mean.len(),
            });
        }
        if basis.len() != n * variances.len() {
            return Err(Error::DimensionMismatch {
                expected: n * variances.len(),
                got: basis.len(),
            });
        }
        if let Some(i) = mean
            .iter()
            .chain(&basis)
            .chain(&variances)
            .position(|v| !v.is_finite())
        {
            return Err(Error::NonFinite(i));
        }
        if variances.iter().any(|&v| v < 0.0) || variances.windows(2).any(|w| w[1] > w[0]) {
            return Err(Error::Asset(
                "variances must be non-negative and non-increasing".into(),
            ));
        }
        let model = Self {
            layout,
            mean,
            basis,
            variances,
        };
        let err = model.orthonormality_error();
        if err > ortho_tol {
            return Err(Error::Asset(alloc::format!(
                "basis is not orthonormal (max |EᵀE − I| = {err:e})"
            )));
        }
        Ok(model)
    }

    pub fn layout(&self) -> FeatureLayout {
        self.layout
    }

    pub fn n_features(&self) -> usize {
        self.mean.len()
    }

    pub fn n_components(&self) -> usize {
        self.variances.len()
    }

    pub fn mean(&self) -> &[f64] {
        &self.mean
    }

    pub fn variances(&self) -> &[f64] {
        &self.variances
    }

    pub fn component(&self, k: usize) -> &[f64] {
        let n = self.n_features();
        &self.basis[k * n..(k + 1) * n]
    }

    /// Column-major basis, `n_features × n_components`.
    pub fn basis(&self) -> &[f64] {
        &self.basis
    }

    /// `max |EᵀE − I|` over all entries.
    pub fn orthonormality_error(&self) -> f64 {
        let k = self.n_components();
        let mut worst = 0.0f64;
        for i in 0..k {
            for j in i..k {
                let d = dot(self.component(i), self.component(j));
                let target = if i == j { 1.0 } else { 0.0 };
                worst = worst.max((d - target).abs());
            }
        }
        worst
    }

    /// Re-orthonormalizes the basis with modified Gram-Schmidt. Used after
    /// loading single-precision assets.
    pub fn reorthonormalize(&mut self) {
        let n = self.n_features();
        let k = self.n_components();
        for i in 0..k {
            for j in 0..i {
                let (done, rest) = self.basis.split_at_mut(i * n);
                let prev = &done[j * n..(j + 1) * n];
                let cur = &mut rest[..n];
                let p = dot(prev, cur);
                for (c, &q) in cur.iter_mut().zip(prev) {
                    *c -= p * q;
                }
            }
            let cur = &mut self.basis[i * n..(i + 1) * n];
            let norm = dot(cur, cur).sqrt();
            for c in cur.iter_mut() {
                *c /= norm;
            }
        }
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Fits a PCA model to the columns of `samples`.
pub fn fit_pca(samples: &SampleMatrix) -> Result<PcaModel> {
    let n = samples.n_features();
    let m = samples.n_samples();
    if m < 2 {
        return Err(Error::TooFewSamples { required: 2, got: m });
    }

    let mut mean = vec![0.0; n];
    for s in 0..m {
        for (acc, &v) in mean.iter_mut().zip(samples.column(s)) {
            *acc += v;
        }
    }
    for v in mean.iter_mut() {
        *v /= m as f64;
    }

    let mut centered = Vec::with_capacity(n * m);
    for s in 0..m {
        centered.extend(samples.column(s).iter().zip(&mean).map(|(x, mu)| x - mu));
    }
    let col = |s: usize| &centered[s * n..(s + 1) * n];

    let mut gram = vec![0.0; m * m];
    for i in 0..m {
        for j in i..m {
            let d = dot(col(i), col(j));
            gram[i * m + j] = d;
            gram[j * m + i] = d;
        }
    }
    let (eigvals, eigvecs) = symmetric_eigen(&gram, m);

    let largest = eigvals.first().copied().unwrap_or(0.0);
    let keep = if largest > 0.0 {
        eigvals
            .iter()
            .take(m - 1)
            .take_while(|&&l| l > 0.0 && l >= VARIANCE_CUTOFF * largest)
            .count()
    } else {
        0
    };

    let mut basis = vec![0.0; n * keep];
    let mut variances = Vec::with_capacity(keep);
    for k in 0..keep {
        let lambda = eigvals[k];
        let out = &mut basis[k * n..(k + 1) * n];
        for s in 0..m {
            let w = eigvecs[s * m + k];
            if w != 0.0 {
                for (o, &x) in out.iter_mut().zip(col(s)) {
                    *o += w * x;
                }
            }
        }
        let inv = 1.0 / lambda.sqrt();
        for o in out.iter_mut() {
            *o *= inv;
        }
        variances.push(lambda / (m - 1) as f64);
    }

    let mut model = PcaModel {
        layout: samples.layout(),
        mean,
        basis,
        variances,
    };
    model.reorthonormalize();
    canonicalize_signs(&mut model);
    Ok(model)
}

/// Flips each basis column so that its largest-magnitude entry is positive
/// (first such entry on ties).
fn canonicalize_signs(model: &mut PcaModel) {
    let n = model.n_features();
    for k in 0..model.n_components() {
        let c = &mut model.basis[k * n..(k + 1) * n];
        let mut best = 0.0f64;
        let mut sign = 1.0;
        for &v in c.iter() {
            if v.abs() > best {
                best = v.abs();
                sign = v.signum();
            }
        }
        if sign < 0.0 {
            for v in c.iter_mut() {
                *v = -*v;
            }
        }
    }
}

/// `E·β + mean` without the texture clamp.
pub fn synthesize_unclamped(model: &PcaModel, coeffs: &Coefficients) -> Result<Vec<f64>> {
    if coeffs.len() > model.n_components() {
        return Err(Error::TooManyCoefficients {
            count: coeffs.len(),
            components: model.n_components(),
        });
    }
    if let Some(i) = coeffs.values().iter().position(|v| !v.is_finite()) {
        return Err(Error::NonFinite(i));
    }
    let mut out = model.mean.clone();
    for (k, &b) in coeffs.values().iter().enumerate() {
        if b != 0.0 {
            for (o, &e) in out.iter_mut().zip(model.component(k)) {
                *o += b * e;
            }
        }
    }
    Ok(out)
}

/// Synthesizes a new instance from coefficients. Missing trailing
/// coefficients are treated as zero; texture layouts are clamped to `[0, 1]`.
pub fn synthesize(model: &PcaModel, coeffs: &Coefficients) -> Result<Vec<f64>> {
    let mut out = synthesize_unclamped(model, coeffs)?;
    if model.layout.is_texture() {
        clamp_unit(&mut out);
    }
    Ok(out)
}

/// The element-wise `[0, 1]` clamp applied to synthesized textures.
pub fn clamp_unit(values: &mut [f64]) {
    for v in values {
        *v = v.clamp(0.0, 1.0);
    }
}

/// Coefficients `Eᵀ(sample − mean)`.
pub fn project(model: &PcaModel, sample: &[f64]) -> Result<Coefficients> {
    if sample.len() != model.n_features() {
        return Err(Error::DimensionMismatch {
            expected: model.n_features(),
            got: sample.len(),
        });
    }
    let centered: Vec<f64> = sample.iter().zip(&model.mean).map(|(x, m)| x - m).collect();
    Ok(Coefficients(
        (0..model.n_components())
            .map(|k| dot(model.component(k), &centered))
            .collect(),
    ))
}

/// Draws coefficients from zero-mean normals with standard deviation
/// `scale·sqrt(variance)`, truncated to `±2` standard deviations.
pub fn sample_coefficients<R: Rng + ?Sized>(model: &PcaModel, rng: &mut R, scale: f64) -> Coefficients {
    Coefficients(
        model
            .variances
            .iter()
            .map(|&var| {
                let sd = scale * var.sqrt();
                sd * truncated_standard_normal(rng, TRUNCATION_SIGMAS)
            })
            .collect(),
    )
}

fn truncated_standard_normal<R: Rng + ?Sized>(rng: &mut R, limit: f64) -> f64 {
    loop {
        let z: f64 = StandardNormal.sample(rng);
        if z.abs() <= limit {
            return z;
        }
    }
}

/// Per-face texel tensor, `faces × d × d × d × 3`.
#[derive(Debug, Clone, PartialEq)]
pub struct TextureTensor {
    faces: usize,
    resolution: usize,
    texels: Vec<f64>,
}

impl TextureTensor {
    pub fn new(faces: usize, resolution: usize, texels: Vec<f64>) -> Result<Self> {
        let expected = faces * resolution.pow(3) * 3;
        if texels.len() != expected {
            return Err(Error::DimensionMismatch {
                expected,
                got: texels.len(),
            });
        }
        if resolution == 0 {
            return Err(Error::InvalidConfig("texture resolution must be ≥ 1".into()));
        }
        if let Some((index, &value)) = texels.iter().enumerate().find(|(_, v)| !(0.0..=1.0).contains(*v)) {
            return Err(Error::OutOfUnitRange { index, value });
        }
        Ok(Self {
            faces,
            resolution,
            texels,
        })
    }

    /// Every texel of every face set to `rgb`.
    pub fn uniform(faces: usize, resolution: usize, rgb: [f64; 3]) -> Result<Self> {
        let n = faces * resolution.pow(3);
        let mut texels = Vec::with_capacity(n * 3);
        for _ in 0..n {
            texels.extend_from_slice(&rgb);
        }
        Self::new(faces, resolution, texels)
    }

    /// Reshapes a synthesized texture-layout vector.
    pub fn from_model_output(layout: FeatureLayout, values: Vec<f64>) -> Result<Self> {
        match layout {
            FeatureLayout::Texture { faces, resolution } => Self::new(faces, resolution, values),
            FeatureLayout::Mesh { .. } => Err(Error::InvalidConfig(
                "mesh layout cannot be reshaped into a texture".into(),
            )),
        }
    }

    pub fn faces(&self) -> usize {
        self.faces
    }

    pub fn resolution(&self) -> usize {
        self.resolution
    }

    pub fn texels(&self) -> &[f64] {
        &self.texels
    }

    pub fn layout(&self) -> FeatureLayout {
        FeatureLayout::Texture {
            faces: self.faces,
            resolution: self.resolution,
        }
    }

    #[inline]
    pub fn texel(&self, face: usize, i: usize, j: usize, k: usize) -> [f64; 3] {
        let d = self.resolution;
        let base = ((((face * d) + i) * d + j) * d + k) * 3;
        [self.texels[base], self.texels[base + 1], self.texels[base + 2]]
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.texels
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn generic(n: usize) -> FeatureLayout {
        FeatureLayout::Mesh { vertices: n }
    }

    #[test]
    fn identical_columns_give_no_components() {
        let c = vec![0.25, -1.0, 3.0];
        let s = SampleMatrix::from_columns(generic(1), &[c.clone(), c.clone()]).unwrap();
        let m = fit_pca(&s).unwrap();
        assert_eq!(m.n_components(), 0);
        assert_eq!(m.mean(), &c[..]);
    }

    #[test]
    fn rejects_single_sample_and_non_finite() {
        assert!(matches!(
            SampleMatrix::from_columns(generic(1), &[vec![0.0; 3]]),
            Err(Error::TooFewSamples { .. })
        ));
        assert!(matches!(
            SampleMatrix::from_columns(generic(1), &[vec![0.0; 3], vec![f64::NAN, 0.0, 0.0]]),
            Err(Error::NonFinite(3))
        ));
    }

    #[test]
    fn texture_samples_must_be_unit_range() {
        let layout = FeatureLayout::Texture {
            faces: 1,
            resolution: 1,
        };
        let r = SampleMatrix::from_columns(layout, &[vec![0.5; 3], vec![1.5, 0.0, 0.0]]);
        assert!(matches!(r, Err(Error::OutOfUnitRange { .. })));
    }

    #[test]
    fn zero_coefficients_give_mean_and_clamp_saturates() {
        let layout = FeatureLayout::Texture {
            faces: 1,
            resolution: 1,
        };
        let s = 1.0 / 3.0f64.sqrt();
        let model = PcaModel::from_parts(layout, vec![0.9; 3], vec![s, s, s], vec![0.1], 1e-12).unwrap();
        assert_eq!(synthesize(&model, &Coefficients(vec![])).unwrap(), vec![0.9; 3]);
        let out = synthesize(&model, &Coefficients(vec![0.3 / s])).unwrap();
        assert_eq!(out, vec![1.0; 3]);
        assert!(matches!(
            synthesize(&model, &Coefficients(vec![0.0, 0.0])),
            Err(Error::TooManyCoefficients { .. })
        ));
    }

    #[test]
    fn project_mean_is_zero() {
        let cols = [vec![1.0, 2.0, 0.0], vec![0.0, 1.0, 1.0], vec![2.0, 0.0, 1.0]];
        let m = fit_pca(&SampleMatrix::from_columns(generic(1), &cols).unwrap()).unwrap();
        let c = project(&m, m.mean()).unwrap();
        assert!(c.values().iter().all(|v| v.abs() < 1e-15));
        assert!(project(&m, &[0.0; 2]).is_err());
    }

    #[test]
    fn sign_convention_makes_largest_entry_positive() {
        let cols = [vec![1.0, -5.0, 0.0], vec![-1.0, 5.0, 0.0], vec![0.0, 0.0, 0.1]];
        let m = fit_pca(&SampleMatrix::from_columns(generic(1), &cols).unwrap()).unwrap();
        for k in 0..m.n_components() {
            let c = m.component(k);
            let big = c
                .iter()
                .copied()
                .fold(0.0f64, |a, b| if b.abs() > a.abs() { b } else { a });
            assert!(big > 0.0);
        }
    }

    #[test]
    fn zero_variance_sampling_is_zero_and_seeded_is_reproducible() {
        let layout = generic(1);
        let model =
            PcaModel::from_parts(layout, vec![0.0; 3], vec![1.0, 0.0, 0.0], vec![0.0], 1e-12).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        assert_eq!(sample_coefficients(&model, &mut rng, 1.0).values(), &[0.0]);

        let cols = [vec![1.0, 2.0, 0.0], vec![0.0, 1.0, 1.0], vec![2.0, 0.0, 1.0]];
        let m = fit_pca(&SampleMatrix::from_columns(layout, &cols).unwrap()).unwrap();
        let a: Vec<_> = (0..5)
            .scan(ChaCha8Rng::seed_from_u64(9), |r, _| {
                Some(sample_coefficients(&m, r, 1.0))
            })
            .collect();
        let b: Vec<_> = (0..5)
            .scan(ChaCha8Rng::seed_from_u64(9), |r, _| {
                Some(sample_coefficients(&m, r, 1.0))
            })
            .collect();
        assert_eq!(a, b);
    }

    #[test]
    fn texel_indexing() {
        let mut texels = vec![0.0; 2 * 8 * 3];
        // face 1, (1,0,1), green channel
        texels[((((2 + 1) * 2) * 2 + 1) * 3) + 1] = 0.5;
        let t = TextureTensor::new(2, 2, texels).unwrap();
        assert_eq!(t.texel(1, 1, 0, 1), [0.0, 0.5, 0.0]);
    }
}
