//! Fréchet distance between Gaussian summaries of embedded sample sets.
//!
//! Images are embedded either as raw pixels or through a fixed random
//! Gaussian projection; no pretrained feature network is involved, so
//! scores are only comparable within one run configuration.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::{Tensor, TrainedNetwork};
use crate::WORST_FITNESS;

/// Added to every covariance diagonal.
pub const COV_REGULARIZER: f64 = 1e-6;
/// Largest embedding dimension a random projection may produce.
pub const MAX_FEATURES: usize = 256;

const EIGEN_EPS: f64 = 1e-14;
const EIGEN_MAX_ITER: usize = 10_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ExtractorKind {
    Flatten,
    RandomProjection { dim: usize, seed: u64 },
}

/// Maps flattened samples to feature vectors. Fixed for a whole run.
#[derive(Debug, Clone)]
pub struct FeatureExtractor {
    kind: ExtractorKind,
    input_len: usize,
    projection: Option<DMatrix<f64>>,
}

impl FeatureExtractor {
    pub fn new(kind: ExtractorKind, input_len: usize) -> Result<Self> {
        if input_len == 0 {
            return Err(Error::Config("feature extractor over empty samples".into()));
        }
        let projection = match kind {
            ExtractorKind::Flatten => None,
            ExtractorKind::RandomProjection { dim, seed } => {
                if dim == 0 || dim > MAX_FEATURES {
                    return Err(Error::Config(format!(
                        "projection dimension {dim} outside [1, {MAX_FEATURES}]"
                    )));
                }
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                let scale = 1.0 / (dim as f64).sqrt();
                Some(DMatrix::from_fn(dim, input_len, |_, _| rng.sample::<f64, _>(StandardNormal) * scale))
            }
        };
        Ok(FeatureExtractor { kind, input_len, projection })
    }

    pub fn kind(&self) -> ExtractorKind {
        self.kind
    }

    pub fn output_dim(&self) -> usize {
        match &self.projection {
            Some(p) => p.nrows(),
            None => self.input_len,
        }
    }

    /// Embed a batch `[n, ...]` into an `n x k` feature matrix.
    pub fn embed(&self, samples: &Tensor) -> Result<DMatrix<f64>> {
        let n = samples.batch();
        if n < 2 {
            return Err(Error::Usage(format!("need at least 2 samples to embed, got {n}")));
        }
        if samples.row_len() != self.input_len {
            return Err(Error::Usage(format!(
                "extractor expects {} values per sample, got {}",
                self.input_len,
                samples.row_len()
            )));
        }
        let raw = DMatrix::from_row_slice(n, self.input_len, samples.data());
        Ok(match &self.projection {
            Some(p) => raw * p.transpose(),
            None => raw,
        })
    }
}

/// Mean and covariance of a feature set.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianStats {
    pub mean: DVector<f64>,
    pub cov: DMatrix<f64>,
}

impl GaussianStats {
    pub fn dim(&self) -> usize {
        self.mean.len()
    }
}

/// Sample mean and unbiased covariance of an `n x k` feature matrix, with
/// [`COV_REGULARIZER`] added on the diagonal.
pub fn estimate_stats(features: &DMatrix<f64>) -> Result<GaussianStats> {
    let n = features.nrows();
    if n < 2 {
        return Err(Error::Usage(format!("covariance needs at least 2 rows, got {n}")));
    }
    let k = features.ncols();
    let mean = DVector::from_fn(k, |j, _| features.column(j).sum() / n as f64);
    let mut centered = features.clone();
    for mut row in centered.row_iter_mut() {
        for j in 0..k {
            row[j] -= mean[j];
        }
    }
    let mut cov = centered.transpose() * &centered / (n as f64 - 1.0);
    // exact symmetry regardless of summation order
    for i in 0..k {
        for j in 0..i {
            let v = 0.5 * (cov[(i, j)] + cov[(j, i)]);
            cov[(i, j)] = v;
            cov[(j, i)] = v;
        }
        cov[(i, i)] += COV_REGULARIZER;
    }
    Ok(GaussianStats { mean, cov })
}

fn symmetrize(m: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    if !m.is_square() {
        return Err(Error::Usage(format!("matrix is {}x{}, not square", m.nrows(), m.ncols())));
    }
    let asym = (m - m.transpose()).amax();
    if asym > 1e-6 {
        return Err(Error::Usage(format!("matrix asymmetric by {asym:e}")));
    }
    Ok((m + m.transpose()) * 0.5)
}

fn eigen(m: DMatrix<f64>) -> Result<SymmetricEigen<f64, nalgebra::Dyn>> {
    SymmetricEigen::try_new(m, EIGEN_EPS, EIGEN_MAX_ITER)
        .ok_or_else(|| Error::Metric("symmetric eigensolver did not converge".into()))
}

/// Clamp round-off negatives; reject anything clearly indefinite.
fn clamp_eigenvalues(values: &DVector<f64>) -> Result<Vec<f64>> {
    let scale = values.iter().fold(1.0f64, |a, v| a.max(v.abs()));
    values
        .iter()
        .map(|&l| {
            if l >= 0.0 {
                Ok(l)
            } else if -l < 1e-8 * scale {
                Ok(0.0)
            } else {
                Err(Error::Metric(format!("matrix is not positive semi-definite (eigenvalue {l:e})")))
            }
        })
        .collect()
}

/// Symmetric PSD square root via eigendecomposition.
pub fn matrix_sqrt(m: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let eig = eigen(symmetrize(m)?)?;
    let roots: Vec<f64> = clamp_eigenvalues(&eig.eigenvalues)?.into_iter().map(f64::sqrt).collect();
    let q = &eig.eigenvectors;
    let scaled = DMatrix::from_fn(q.nrows(), q.ncols(), |i, j| q[(i, j)] * roots[j]);
    let r = scaled * q.transpose();
    Ok((&r + r.transpose()) * 0.5)
}

/// Trace of `(Σ_a Σ_b)^{1/2}` computed as `tr sqrt(S Σ_b S)` with `S = Σ_a^{1/2}`.
fn trace_sqrt_product(sqrt_a: &DMatrix<f64>, cov_b: &DMatrix<f64>) -> Result<f64> {
    let inner = sqrt_a * cov_b * sqrt_a;
    let inner = (&inner + inner.transpose()) * 0.5;
    let eig = eigen(inner)?;
    Ok(clamp_eigenvalues(&eig.eigenvalues)?.into_iter().map(f64::sqrt).sum())
}

fn assemble(a: &GaussianStats, b: &GaussianStats, tr_sqrt: f64) -> Result<f64> {
    let diff = &a.mean - &b.mean;
    let d = diff.dot(&diff) + a.cov.trace() + b.cov.trace() - 2.0 * tr_sqrt;
    if d >= 0.0 {
        Ok(d)
    } else if d > -1e-8 {
        Ok(0.0)
    } else {
        Err(Error::Metric(format!("Fréchet distance came out negative ({d:e})")))
    }
}

fn check_dims(a: &GaussianStats, b: &GaussianStats) -> Result<()> {
    if a.dim() != b.dim() || a.cov.nrows() != a.dim() || b.cov.nrows() != b.dim() {
        return Err(Error::Usage(format!("dimension mismatch: {} vs {}", a.dim(), b.dim())));
    }
    Ok(())
}

/// `||μ_a − μ_b||² + Tr(Σ_a + Σ_b − 2(Σ_a Σ_b)^{1/2})`.
pub fn frechet_distance(a: &GaussianStats, b: &GaussianStats) -> Result<f64> {
    check_dims(a, b)?;
    if a == b {
        return Ok(0.0);
    }
    let sqrt_a = matrix_sqrt(&a.cov)?;
    assemble(a, b, trace_sqrt_product(&sqrt_a, &b.cov)?)
}

/// Dataset statistics with the covariance square root cached, for scoring
/// many generators against the same data.
#[derive(Debug, Clone)]
pub struct ReferenceStats {
    pub stats: GaussianStats,
    sqrt_cov: DMatrix<f64>,
}

impl ReferenceStats {
    pub fn new(stats: GaussianStats) -> Result<Self> {
        let sqrt_cov = matrix_sqrt(&stats.cov)?;
        Ok(ReferenceStats { stats, sqrt_cov })
    }

    pub fn from_samples(samples: &Tensor, extractor: &FeatureExtractor) -> Result<Self> {
        Self::new(estimate_stats(&extractor.embed(samples)?)?)
    }

    pub fn distance(&self, other: &GaussianStats) -> Result<f64> {
        check_dims(&self.stats, other)?;
        if &self.stats == other {
            return Ok(0.0);
        }
        assemble(&self.stats, other, trace_sqrt_product(&self.sqrt_cov, &other.cov)?)
    }
}

/// Samples per generator forward pass while scoring.
const FID_CHUNK: usize = 256;

/// Draw `n_samples` latent vectors, generate, embed and compare with the
/// reference. Any failure maps to [`WORST_FITNESS`].
pub fn fid_score<R: Rng + ?Sized>(
    generator: &TrainedNetwork,
    reference: &ReferenceStats,
    n_samples: usize,
    extractor: &FeatureExtractor,
    rng: &mut R,
) -> f64 {
    try_fid_score(generator, reference, n_samples, extractor, rng).unwrap_or(WORST_FITNESS)
}

pub fn try_fid_score<R: Rng + ?Sized>(
    generator: &TrainedNetwork,
    reference: &ReferenceStats,
    n_samples: usize,
    extractor: &FeatureExtractor,
    rng: &mut R,
) -> Result<f64> {
    let samples = generate(generator, n_samples, rng)?;
    if !samples.all_finite() {
        return Err(Error::Metric("generator produced non-finite samples".into()));
    }
    let stats = estimate_stats(&extractor.embed(&samples)?)?;
    reference.distance(&stats)
}

/// Run a generator on `n` standard-normal latent vectors.
pub fn generate<R: Rng + ?Sized>(generator: &TrainedNetwork, n: usize, rng: &mut R) -> Result<Tensor> {
    let latent = generator.input_len();
    let mut data = Vec::with_capacity(n * generator.output_shape.iter().product::<usize>());
    let mut done = 0;
    while done < n {
        let m = FID_CHUNK.min(n - done);
        let z = Tensor::from_fn(vec![m, latent], |_| rng.sample(StandardNormal));
        data.extend_from_slice(generator.predict(&z)?.data());
        done += m;
    }
    let mut shape = vec![n];
    shape.extend_from_slice(&generator.output_shape);
    Tensor::new(shape, data)
}
