//! Training data: IDX image files and small synthetic sets.

use std::path::{Path, PathBuf};

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::Tensor;

pub const IDX_IMAGE_MAGIC: u32 = 0x0000_0803;

/// A fixed set of samples, all with one shape and values in `[-1, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    samples: Tensor,
}

impl Dataset {
    pub fn new(samples: Tensor) -> Result<Self> {
        if samples.shape().len() < 2 {
            return Err(Error::Config("dataset tensor needs a batch dimension".into()));
        }
        if samples.data().iter().any(|v| !(-1.0..=1.0).contains(v)) {
            return Err(Error::Config("dataset values must lie in [-1, 1]".into()));
        }
        Ok(Dataset { samples })
    }

    pub fn len(&self) -> usize {
        self.samples.batch()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn sample_shape(&self) -> &[usize] {
        &self.samples.shape()[1..]
    }

    pub fn samples(&self) -> &Tensor {
        &self.samples
    }

    /// `size` consecutive samples starting at `start`, wrapping around.
    pub fn batch(&self, start: usize, size: usize) -> Tensor {
        let n = self.len();
        let rows = (0..size).map(|k| self.samples.row((start + k) % n));
        Tensor::stack_rows(rows, self.sample_shape()).expect("rows share the dataset shape")
    }
}

/// Where a run's data comes from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum DatasetSpec {
    /// IDX image file, optionally area-downsampled to `target x target` and
    /// truncated to the first `limit` images.
    Idx { path: PathBuf, target: Option<usize>, limit: Option<usize> },
    /// Points from `components` isotropic Gaussians spaced on a circle.
    GaussianMixture2d { components: usize, radius: f64, variance: f64, samples: usize },
    /// 8x8 binary glyphs (bars, crosses, boxes) at random positions and sizes.
    Shapes8x8 { samples: usize, noise: f64 },
}

impl DatasetSpec {
    pub fn shapes(samples: usize) -> Self {
        DatasetSpec::Shapes8x8 { samples, noise: 0.0 }
    }

    pub fn label(&self) -> String {
        match self {
            DatasetSpec::Idx { path, .. } => format!("idx:{}", path.display()),
            DatasetSpec::GaussianMixture2d { .. } => "gaussian-mixture-2d".into(),
            DatasetSpec::Shapes8x8 { .. } => "synthetic-shapes-8x8".into(),
        }
    }
}

pub fn load_dataset<R: Rng + ?Sized>(spec: &DatasetSpec, rng: &mut R) -> Result<Dataset> {
    match spec {
        DatasetSpec::Idx { path, target, limit } => {
            let mut images = load_idx(path)?;
            if let Some(l) = limit {
                images.truncate(*l);
            }
            images.to_dataset(*target)
        }
        _ => synth_dataset(spec, rng),
    }
}

/// Raw contents of an IDX image file.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IdxImages {
    pub count: usize,
    pub rows: usize,
    pub cols: usize,
    pub pixels: Vec<u8>,
}

fn be_u32(bytes: &[u8], offset: usize) -> Result<u32> {
    bytes
        .get(offset..offset + 4)
        .map(|b| u32::from_be_bytes([b[0], b[1], b[2], b[3]]))
        .ok_or_else(|| Error::Format { offset, reason: "header truncated".into() })
}

/// Parse an IDX3 unsigned-byte image file.
pub fn parse_idx(bytes: &[u8]) -> Result<IdxImages> {
    let magic = be_u32(bytes, 0)?;
    if magic != IDX_IMAGE_MAGIC {
        return Err(Error::Format { offset: 0, reason: format!("bad magic {magic:#010x}") });
    }
    let count = be_u32(bytes, 4)? as usize;
    let rows = be_u32(bytes, 8)? as usize;
    let cols = be_u32(bytes, 12)? as usize;
    if rows == 0 || cols == 0 {
        return Err(Error::Format { offset: 8, reason: "zero image dimension".into() });
    }
    let need = count
        .checked_mul(rows * cols)
        .ok_or_else(|| Error::Format { offset: 4, reason: "image count overflows".into() })?;
    let body = &bytes[16..];
    if body.len() < need {
        return Err(Error::Format {
            offset: 16 + body.len(),
            reason: format!("expected {need} pixel bytes, found {}", body.len()),
        });
    }
    Ok(IdxImages { count, rows, cols, pixels: body[..need].to_vec() })
}

pub fn load_idx(path: impl AsRef<Path>) -> Result<IdxImages> {
    let bytes = std::fs::read(path.as_ref())
        .map_err(|e| Error::Io(format!("{}: {e}", path.as_ref().display())))?;
    parse_idx(&bytes)
}

/// Byte 0 maps to -1, byte 255 to +1.
pub fn pixel_to_unit(p: u8) -> f64 {
    p as f64 / 255.0 * 2.0 - 1.0
}

impl IdxImages {
    pub fn truncate(&mut self, n: usize) {
        if n < self.count {
            self.count = n;
            self.pixels.truncate(n * self.rows * self.cols);
        }
    }

    /// Rescale to `[-1, 1]` and optionally area-average down to `target`.
    pub fn to_dataset(&self, target: Option<usize>) -> Result<Dataset> {
        if self.count == 0 {
            return Err(Error::Config("IDX file holds no images".into()));
        }
        let unit: Vec<f64> = self.pixels.iter().map(|&p| pixel_to_unit(p)).collect();
        let (data, h, w) = match target {
            None => (unit, self.rows, self.cols),
            Some(t) => {
                let per = self.rows * self.cols;
                let mut out = Vec::with_capacity(self.count * t * t);
                for img in unit.chunks(per) {
                    out.extend(area_downsample(img, self.rows, self.cols, t)?);
                }
                (out, t, t)
            }
        };
        Dataset::new(Tensor::new(vec![self.count, 1, h, w], data)?)
    }
}

/// Average non-overlapping blocks so a `rows x cols` image becomes
/// `target x target`. The block size must divide both sides.
pub fn area_downsample(img: &[f64], rows: usize, cols: usize, target: usize) -> Result<Vec<f64>> {
    if target == 0 || !rows.is_multiple_of(target) || !cols.is_multiple_of(target) {
        return Err(Error::Config(format!(
            "cannot area-downsample {rows}x{cols} to {target}x{target}"
        )));
    }
    let (fy, fx) = (rows / target, cols / target);
    let norm = (fy * fx) as f64;
    let mut out = vec![0.0; target * target];
    for y in 0..rows {
        for x in 0..cols {
            out[(y / fy) * target + x / fx] += img[y * cols + x];
        }
    }
    for v in &mut out {
        *v /= norm;
    }
    Ok(out)
}

/// Build a synthetic dataset.
pub fn synth_dataset<R: Rng + ?Sized>(spec: &DatasetSpec, rng: &mut R) -> Result<Dataset> {
    match *spec {
        DatasetSpec::GaussianMixture2d { components, radius, variance, samples } => {
            if components == 0 || samples < 2 || variance < 0.0 {
                return Err(Error::Config("gaussian mixture needs components, samples >= 2, variance >= 0".into()));
            }
            let std = variance.sqrt();
            let mut data = Vec::with_capacity(samples * 2);
            for _ in 0..samples {
                let c = rng.random_range(0..components);
                let angle = std::f64::consts::TAU * c as f64 / components as f64;
                for centre in [radius * angle.cos(), radius * angle.sin()] {
                    let noise: f64 = rng.sample(StandardNormal);
                    data.push((centre + std * noise).clamp(-1.0, 1.0));
                }
            }
            Dataset::new(Tensor::new(vec![samples, 2], data)?)
        }
        DatasetSpec::Shapes8x8 { samples, noise } => {
            if samples < 2 || noise < 0.0 {
                return Err(Error::Config("shape dataset needs samples >= 2 and noise >= 0".into()));
            }
            let mut data = Vec::with_capacity(samples * 64);
            for _ in 0..samples {
                let glyph = random_glyph(rng);
                data.extend(glyph.iter().map(|&p| {
                    if noise > 0.0 {
                        (p + noise * rng.sample::<f64, _>(StandardNormal)).clamp(-1.0, 1.0)
                    } else {
                        p
                    }
                }));
            }
            Dataset::new(Tensor::new(vec![samples, 1, 8, 8], data)?)
        }
        DatasetSpec::Idx { .. } => Err(Error::Usage("IDX datasets are loaded, not synthesized".into())),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Glyph {
    HorizontalBar,
    VerticalBar,
    Cross,
    Box,
}

/// One 8x8 glyph with pixels in {-1, +1}, row-major.
pub fn random_glyph<R: Rng + ?Sized>(rng: &mut R) -> [f64; 64] {
    let glyph = [Glyph::HorizontalBar, Glyph::VerticalBar, Glyph::Cross, Glyph::Box][rng.random_range(0..4)];
    render_glyph(glyph, rng)
}

pub fn render_glyph<R: Rng + ?Sized>(glyph: Glyph, rng: &mut R) -> [f64; 64] {
    let mut img = [-1.0; 64];
    let mut on = |y: usize, x: usize| img[y * 8 + x] = 1.0;
    match glyph {
        Glyph::HorizontalBar | Glyph::VerticalBar => {
            let line = rng.random_range(1..7);
            let thick = rng.random_range(1..3);
            let len = rng.random_range(4..9);
            let from = rng.random_range(0..=8 - len);
            for t in 0..thick {
                for k in from..from + len {
                    let (a, b) = ((line + t).min(7), k);
                    if glyph == Glyph::HorizontalBar {
                        on(a, b)
                    } else {
                        on(b, a)
                    }
                }
            }
        }
        Glyph::Cross => {
            let cy = rng.random_range(2..6);
            let cx = rng.random_range(2..6);
            let arm = rng.random_range(1..3);
            for d in 0..=2 * arm {
                on(cy + d - arm, cx);
                on(cy, cx + d - arm);
            }
        }
        Glyph::Box => {
            let size = rng.random_range(3..7);
            let y0 = rng.random_range(0..=8 - size);
            let x0 = rng.random_range(0..=8 - size);
            for k in 0..size {
                on(y0, x0 + k);
                on(y0 + size - 1, x0 + k);
                on(y0 + k, x0);
                on(y0 + k, x0 + size - 1);
            }
        }
    }
    img
}
