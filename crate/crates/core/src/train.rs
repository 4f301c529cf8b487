//! Adversarial losses, a single generator/discriminator training bout, and
//! the all-vs-all evaluation of two populations.

use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::metrics::{fid_score, FeatureExtractor, ReferenceStats};
use crate::nn::{sigmoid, Tensor};
use crate::phenotype::Individual;
use crate::rng::stream;
use crate::WORST_FITNESS;

/// Scores are clamped to `[SCORE_EPS, 1 - SCORE_EPS]` before taking logs.
pub const SCORE_EPS: f64 = 1e-7;

fn clamp_score(s: f64) -> f64 {
    s.clamp(SCORE_EPS, 1.0 - SCORE_EPS)
}

fn mean_neg_log(values: impl Iterator<Item = f64>) -> (f64, usize) {
    let mut sum = 0.0;
    let mut n = 0;
    for v in values {
        sum -= v.ln();
        n += 1;
    }
    (sum / n.max(1) as f64, n)
}

/// Discriminator loss: `-mean(log D(x)) - mean(log(1 - D(G(z))))`.
pub fn d_loss(real_scores: &[f64], fake_scores: &[f64]) -> Result<f64> {
    if real_scores.is_empty() || fake_scores.is_empty() {
        return Err(Error::Usage("discriminator loss over an empty score array".into()));
    }
    let (r, _) = mean_neg_log(real_scores.iter().map(|&s| clamp_score(s)));
    let (f, _) = mean_neg_log(fake_scores.iter().map(|&s| 1.0 - clamp_score(s)));
    Ok(r + f)
}

/// Non-saturating generator loss: `-mean(log D(G(z)))`.
pub fn g_loss(fake_scores: &[f64]) -> Result<f64> {
    if fake_scores.is_empty() {
        return Err(Error::Usage("generator loss over an empty score array".into()));
    }
    Ok(mean_neg_log(fake_scores.iter().map(|&s| clamp_score(s))).0)
}

/// Training-loop sizes shared by every bout in a run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoutConfig {
    pub batches: usize,
    pub batch_size: usize,
    pub latent_dim: usize,
    pub learning_rate: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Side {
    Generator,
    Discriminator,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairingResult {
    pub generator_id: u64,
    pub discriminator_id: u64,
    /// Mean discriminator loss over the bout's batches.
    pub d_loss: f64,
    /// Mean generator loss over the bout's batches.
    pub g_loss: f64,
    /// Samples consumed by each side.
    pub samples: u64,
    /// Which side broke, if the bout was aborted.
    pub failure: Option<Side>,
}

fn latent<R: Rng + ?Sized>(n: usize, dim: usize, rng: &mut R) -> Tensor {
    Tensor::from_fn(vec![n, dim], |_| rng.sample(StandardNormal))
}

/// Stack two batches with identical row shapes.
fn concat(a: &Tensor, b: &Tensor) -> Result<Tensor> {
    let mut shape = a.shape().to_vec();
    shape[0] += b.batch();
    let mut data = Vec::with_capacity(a.len() + b.len());
    data.extend_from_slice(a.data());
    data.extend_from_slice(b.data());
    Tensor::new(shape, data)
}

/// Train `g` and `d` against each other for `cfg.batches` batches: each
/// batch takes one discriminator step on fresh fakes, then one generator
/// step through the frozen discriminator.
pub fn train_bout<R: Rng + ?Sized>(
    g: &mut Individual,
    d: &mut Individual,
    data: &Dataset,
    cfg: &BoutConfig,
    rng: &mut R,
) -> PairingResult {
    let mut result = PairingResult {
        generator_id: g.id,
        discriminator_id: d.id,
        d_loss: 0.0,
        g_loss: 0.0,
        samples: 0,
        failure: None,
    };
    if cfg.batches == 0 {
        return result;
    }
    let b = cfg.batch_size;
    let mut cursor = rng.random_range(0..data.len());
    let mut d_total = 0.0;
    let mut g_total = 0.0;
    let mut done = 0usize;
    for _ in 0..cfg.batches {
        match train_step(g, d, data, cfg, cursor, rng) {
            Ok((dl, gl)) => {
                d_total += dl;
                g_total += gl;
                done += 1;
            }
            Err(side) => {
                result.failure = Some(side);
                break;
            }
        }
        cursor = (cursor + b) % data.len();
    }
    let samples = (done * b) as u64;
    g.trained_samples += samples;
    d.trained_samples += samples;
    result.samples = samples;
    if done > 0 {
        result.d_loss = d_total / done as f64;
        result.g_loss = g_total / done as f64;
    }
    match result.failure {
        Some(Side::Generator) => g.failed = true,
        Some(Side::Discriminator) => d.failed = true,
        None => {}
    }
    result
}

fn train_step<R: Rng + ?Sized>(
    g: &mut Individual,
    d: &mut Individual,
    data: &Dataset,
    cfg: &BoutConfig,
    cursor: usize,
    rng: &mut R,
) -> std::result::Result<(f64, f64), Side> {
    use Side::{Discriminator as D, Generator as G};
    let b = cfg.batch_size;

    // discriminator step, generator frozen
    let real = data.batch(cursor, b);
    let fake = g.network.predict(&latent(b, cfg.latent_dim, rng)).map_err(|_| G)?;
    if !fake.all_finite() {
        return Err(G);
    }
    let both = concat(&real, &fake).map_err(|_| G)?;
    let (scores, cache) = d.network.forward(&both).map_err(|_| D)?;
    let logits = cache.logits().ok_or(D)?;
    if !logits.all_finite() {
        return Err(D);
    }
    let dl = d_loss(&scores.data()[..b], &scores.data()[b..]).map_err(|_| D)?;
    // d/dlogit of the sigmoid cross-entropy terms
    let inv = 1.0 / b as f64;
    let grad = Tensor::from_fn(logits.shape().to_vec(), |i| {
        let s = sigmoid(logits.data()[i]);
        if i < b {
            (s - 1.0) * inv
        } else {
            s * inv
        }
    });
    let grads = d.network.backward_logits(&cache, &grad).map_err(|_| D)?;
    d.network.apply_gradients(&grads, cfg.learning_rate).map_err(|_| D)?;

    // generator step through the frozen discriminator
    let z = latent(b, cfg.latent_dim, rng);
    let (fake, g_cache) = g.network.forward(&z).map_err(|_| G)?;
    if !fake.all_finite() {
        return Err(G);
    }
    let (scores, d_cache) = d.network.forward(&fake).map_err(|_| D)?;
    let logits = d_cache.logits().ok_or(D)?;
    if !logits.all_finite() {
        return Err(D);
    }
    let gl = g_loss(scores.data()).map_err(|_| G)?;
    let grad = Tensor::from_fn(logits.shape().to_vec(), |i| (sigmoid(logits.data()[i]) - 1.0) * inv);
    let through_d = d.network.backward_logits(&d_cache, &grad).map_err(|_| D)?;
    let g_out_grad = through_d.input.reshape(fake.shape().to_vec()).map_err(|_| G)?;
    let g_grads = g.network.backward(&g_cache, &g_out_grad).map_err(|_| G)?;
    g.network.apply_gradients(&g_grads, cfg.learning_rate).map_err(|_| G)?;

    if !dl.is_finite() {
        return Err(D);
    }
    if !gl.is_finite() {
        return Err(G);
    }
    Ok((dl, gl))
}

/// Shared read-only inputs of an evaluation.
pub struct EvalContext<'a> {
    pub data: &'a Dataset,
    pub reference: &'a ReferenceStats,
    pub extractor: &'a FeatureExtractor,
    pub bout: BoutConfig,
    pub fid_samples: usize,
}

/// Bouts and fitness aggregates from one all-vs-all evaluation.
#[derive(Debug, Clone, PartialEq)]
pub struct Evaluation {
    /// `results[i][j]`: generator `i` against discriminator `j`.
    pub results: Vec<Vec<PairingResult>>,
    pub generator_fitness: Vec<f64>,
    pub discriminator_fitness: Vec<f64>,
}

impl Evaluation {
    pub fn bouts(&self) -> usize {
        self.results.iter().map(Vec::len).sum()
    }
}

/// Train every generator against every discriminator, then assign
/// fitness: mean bout loss for discriminators, FID for generators.
///
/// Bout `(i, j)` is equivalent to running all bouts serially in row-major
/// order. Bouts on the same anti-diagonal share no individual and run in
/// parallel; each bout draws from its own stream keyed by `(seed, i, j)`.
pub fn evaluate_all_vs_all(
    generators: &mut [Individual],
    discriminators: &mut [Individual],
    ctx: &EvalContext<'_>,
    seed: u64,
) -> Result<Evaluation> {
    let (ng, nd) = (generators.len(), discriminators.len());
    if ng == 0 || nd == 0 {
        return Err(Error::Usage("all-vs-all evaluation needs both populations non-empty".into()));
    }
    let mut results: Vec<Vec<Option<PairingResult>>> = vec![vec![None; nd]; ng];
    let mut gs: Vec<Option<&mut Individual>> = generators.iter_mut().map(Some).collect();
    let mut ds: Vec<Option<&mut Individual>> = discriminators.iter_mut().map(Some).collect();

    for wave in 0..ng + nd - 1 {
        let lo = wave.saturating_sub(nd - 1);
        let hi = wave.min(ng - 1);
        let jobs: Vec<_> = (lo..=hi)
            .map(|i| {
                let j = wave - i;
                (i, j, gs[i].take().unwrap(), ds[j].take().unwrap())
            })
            .collect();
        let done: Vec<_> = jobs
            .into_par_iter()
            .map(|(i, j, g, d)| {
                let mut rng = stream(seed, &[0, i as u64, j as u64]);
                let r = train_bout(g, d, ctx.data, &ctx.bout, &mut rng);
                (i, j, r, g, d)
            })
            .collect();
        for (i, j, r, g, d) in done {
            results[i][j] = Some(r);
            gs[i] = Some(g);
            ds[j] = Some(d);
        }
    }
    let results: Vec<Vec<PairingResult>> =
        results.into_iter().map(|row| row.into_iter().map(Option::unwrap).collect()).collect();

    let discriminator_fitness: Vec<f64> = (0..nd)
        .map(|j| {
            if discriminators[j].failed {
                return WORST_FITNESS;
            }
            let losses: Vec<f64> = results.iter().map(|row| row[j].d_loss).collect();
            losses.iter().sum::<f64>() / losses.len() as f64
        })
        .collect();
    for (d, &f) in discriminators.iter_mut().zip(&discriminator_fitness) {
        d.fitness = f;
    }

    let generator_fitness: Vec<f64> = generators
        .par_iter()
        .enumerate()
        .map(|(i, g)| {
            if g.failed {
                return WORST_FITNESS;
            }
            let mut rng = stream(seed, &[1, i as u64]);
            fid_score(&g.network, ctx.reference, ctx.fid_samples, ctx.extractor, &mut rng)
        })
        .collect();
    for (g, &f) in generators.iter_mut().zip(&generator_fitness) {
        g.fitness = f;
        if f == WORST_FITNESS {
            g.failed = true;
        }
    }

    Ok(Evaluation { results, generator_fitness, discriminator_fitness })
}
