//! Run configuration: presets, the flat `key = value` file format and
//! conversion into engine settings.
//!
//! Files hold one `key = value` pair per line; blank lines and lines
//! starting with `#` are ignored. Later assignments override earlier ones.
//! [`RunConfig::to_kv`] writes every key, so a dumped config reloads to
//! the same value.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::data::DatasetSpec;
use crate::engine::{EngineConfig, Mode};
use crate::error::{Error, Result};
use crate::genome::{GeneSpace, MutationRates};
use crate::metrics::ExtractorKind;
use crate::phenotype::IoShape;
use crate::train::BoutConfig;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum DataKind {
    Shapes,
    Mixture,
    Idx(PathBuf),
}

/// Dataset source plus every parameter any source may use.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DataConfig {
    pub kind: DataKind,
    /// Synthetic sample count.
    pub samples: usize,
    /// Gaussian jitter added to glyph pixels.
    pub noise: f64,
    pub components: usize,
    pub radius: f64,
    pub variance: f64,
    /// Square side to downsample IDX images to.
    pub image_size: Option<usize>,
    /// Keep only the first `limit` IDX images.
    pub limit: Option<usize>,
}

impl DataConfig {
    pub fn spec(&self) -> DatasetSpec {
        match &self.kind {
            DataKind::Shapes => DatasetSpec::Shapes8x8 { samples: self.samples, noise: self.noise },
            DataKind::Mixture => DatasetSpec::GaussianMixture2d {
                components: self.components,
                radius: self.radius,
                variance: self.variance,
                samples: self.samples,
            },
            DataKind::Idx(path) => DatasetSpec::Idx { path: path.clone(), target: self.image_size, limit: self.limit },
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Preset {
    /// The full experimental setup.
    Full,
    /// Small settings that finish in minutes on one core.
    Desk,
}

impl std::str::FromStr for Preset {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "full" => Ok(Preset::Full),
            "desk" => Ok(Preset::Desk),
            _ => Err(Error::Config(format!("unknown preset `{s}` (expected full or desk)"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub mode: Mode,
    pub seed: u64,
    pub generations: u32,
    pub population_size: usize,
    pub rates: MutationRates,
    pub width_min: usize,
    pub width_max: usize,
    pub genome_limit: usize,
    pub tournament_k: usize,
    pub species: usize,
    pub neighborhood: usize,
    pub archive_probability: f64,
    pub batch_size: usize,
    pub batches: usize,
    pub learning_rate: f64,
    pub fid_samples: usize,
    pub latent_dim: usize,
    pub data: DataConfig,
    pub extractor: ExtractorKind,
    pub out_dir: PathBuf,
    /// Write a sample grid every this many generations (0 disables).
    pub sample_every: u32,
    /// Write a checkpoint every this many generations (0 disables).
    pub checkpoint_every: u32,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig::preset(Preset::Full)
    }
}

impl RunConfig {
    pub fn preset(preset: Preset) -> Self {
        match preset {
            Preset::Full => RunConfig {
                mode: Mode::Nsgc,
                seed: 0,
                generations: 50,
                population_size: 10,
                rates: MutationRates::default(),
                width_min: 32,
                width_max: 256,
                genome_limit: 4,
                tournament_k: 2,
                species: 3,
                neighborhood: 3,
                archive_probability: 0.1,
                batch_size: 64,
                batches: 50,
                learning_rate: 0.001,
                fid_samples: 1024,
                latent_dim: 100,
                data: DataConfig {
                    kind: DataKind::Idx(PathBuf::from("data/train-images-idx3-ubyte")),
                    samples: 0,
                    noise: 0.0,
                    components: 8,
                    radius: 0.8,
                    variance: 0.0025,
                    image_size: None,
                    limit: None,
                },
                extractor: ExtractorKind::RandomProjection { dim: 128, seed: 0 },
                out_dir: PathBuf::from("runs"),
                sample_every: 10,
                checkpoint_every: 10,
            },
            Preset::Desk => RunConfig {
                generations: 20,
                population_size: 5,
                width_min: 8,
                width_max: 32,
                batch_size: 32,
                batches: 50,
                learning_rate: 0.002,
                fid_samples: 256,
                latent_dim: 16,
                data: DataConfig {
                    kind: DataKind::Shapes,
                    samples: 1024,
                    noise: 0.1,
                    image_size: Some(14),
                    ..RunConfig::preset(Preset::Full).data
                },
                extractor: ExtractorKind::Flatten,
                sample_every: 5,
                checkpoint_every: 0,
                ..RunConfig::preset(Preset::Full)
            },
        }
    }

    pub fn engine_config(&self, sample_shape: Vec<usize>) -> Result<EngineConfig> {
        let cfg = EngineConfig {
            mode: self.mode,
            population_size: self.population_size,
            rates: self.rates,
            space: GeneSpace { width_min: self.width_min, width_max: self.width_max, genome_limit: self.genome_limit },
            tournament_k: self.tournament_k,
            species: self.species,
            neighborhood: self.neighborhood,
            archive_probability: self.archive_probability,
            bout: BoutConfig {
                batches: self.batches,
                batch_size: self.batch_size,
                latent_dim: self.latent_dim,
                learning_rate: self.learning_rate,
            },
            fid_samples: self.fid_samples,
            io: IoShape { sample_shape, latent_dim: self.latent_dim },
        };
        cfg.validate()?;
        Ok(cfg)
    }

    /// Apply one assignment.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        fn num<T: std::str::FromStr>(key: &str, v: &str) -> Result<T> {
            v.parse().map_err(|_| Error::Config(format!("invalid value `{v}` for `{key}`")))
        }
        fn opt(key: &str, v: &str) -> Result<Option<usize>> {
            if v == "none" {
                Ok(None)
            } else {
                num(key, v).map(Some)
            }
        }
        let v = value.trim();
        match key.trim() {
            "mode" => self.mode = v.parse()?,
            "seed" => self.seed = num(key, v)?,
            "generations" => self.generations = num(key, v)?,
            "population_size" => self.population_size = num(key, v)?,
            "add_rate" => self.rates.add = num(key, v)?,
            "remove_rate" => self.rates.remove = num(key, v)?,
            "change_rate" => self.rates.change = num(key, v)?,
            "width_min" => self.width_min = num(key, v)?,
            "width_max" => self.width_max = num(key, v)?,
            "genome_limit" => self.genome_limit = num(key, v)?,
            "tournament_k" => self.tournament_k = num(key, v)?,
            "species" => self.species = num(key, v)?,
            "neighborhood" => self.neighborhood = num(key, v)?,
            "archive_probability" => self.archive_probability = num(key, v)?,
            "batch_size" => self.batch_size = num(key, v)?,
            "batches" => self.batches = num(key, v)?,
            "learning_rate" => self.learning_rate = num(key, v)?,
            "fid_samples" => self.fid_samples = num(key, v)?,
            "latent_dim" => self.latent_dim = num(key, v)?,
            "dataset" => self.data.kind = parse_data_kind(v)?,
            "dataset_samples" => self.data.samples = num(key, v)?,
            "dataset_noise" => self.data.noise = num(key, v)?,
            "mixture_components" => self.data.components = num(key, v)?,
            "mixture_radius" => self.data.radius = num(key, v)?,
            "mixture_variance" => self.data.variance = num(key, v)?,
            "image_size" => self.data.image_size = opt(key, v)?,
            "dataset_limit" => self.data.limit = opt(key, v)?,
            "extractor" => self.extractor = parse_extractor(v)?,
            "out_dir" => self.out_dir = PathBuf::from(v),
            "sample_every" => self.sample_every = num(key, v)?,
            "checkpoint_every" => self.checkpoint_every = num(key, v)?,
            other => return Err(Error::Config(format!("unknown config key `{other}`"))),
        }
        Ok(())
    }

    /// Apply every assignment in a `key = value` text.
    pub fn apply_text(&mut self, text: &str) -> Result<()> {
        for (n, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("line {}: expected `key = value`", n + 1)))?;
            self.set(k, v).map_err(|e| Error::Config(format!("line {}: {e}", n + 1)))?;
        }
        Ok(())
    }

    pub fn apply_file(&mut self, path: &Path) -> Result<()> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
        self.apply_text(&text)
    }

    /// Every key, one per line, in a form [`RunConfig::apply_text`] accepts.
    pub fn to_kv(&self) -> String {
        let opt = |o: Option<usize>| o.map_or("none".to_string(), |v| v.to_string());
        let mut s = String::new();
        let mut put = |k: &str, v: String| {
            let _ = writeln!(s, "{k} = {v}");
        };
        put("mode", self.mode.to_string());
        put("seed", self.seed.to_string());
        put("generations", self.generations.to_string());
        put("population_size", self.population_size.to_string());
        put("add_rate", self.rates.add.to_string());
        put("remove_rate", self.rates.remove.to_string());
        put("change_rate", self.rates.change.to_string());
        put("width_min", self.width_min.to_string());
        put("width_max", self.width_max.to_string());
        put("genome_limit", self.genome_limit.to_string());
        put("tournament_k", self.tournament_k.to_string());
        put("species", self.species.to_string());
        put("neighborhood", self.neighborhood.to_string());
        put("archive_probability", self.archive_probability.to_string());
        put("batch_size", self.batch_size.to_string());
        put("batches", self.batches.to_string());
        put("learning_rate", self.learning_rate.to_string());
        put("fid_samples", self.fid_samples.to_string());
        put("latent_dim", self.latent_dim.to_string());
        put(
            "dataset",
            match &self.data.kind {
                DataKind::Shapes => "shapes".to_string(),
                DataKind::Mixture => "mixture".to_string(),
                DataKind::Idx(p) => format!("idx:{}", p.display()),
            },
        );
        put("dataset_samples", self.data.samples.to_string());
        put("dataset_noise", self.data.noise.to_string());
        put("mixture_components", self.data.components.to_string());
        put("mixture_radius", self.data.radius.to_string());
        put("mixture_variance", self.data.variance.to_string());
        put("image_size", opt(self.data.image_size));
        put("dataset_limit", opt(self.data.limit));
        put(
            "extractor",
            match self.extractor {
                ExtractorKind::Flatten => "flatten".to_string(),
                ExtractorKind::RandomProjection { dim, seed } => format!("projection:{dim}:{seed}"),
            },
        );
        put("out_dir", self.out_dir.display().to_string());
        put("sample_every", self.sample_every.to_string());
        put("checkpoint_every", self.checkpoint_every.to_string());
        s
    }
}

/// `shapes`, `mixture`, `idx:PATH`, or a bare path to an IDX file.
pub fn parse_data_kind(v: &str) -> Result<DataKind> {
    match v {
        "shapes" | "synthetic-shapes-8x8" => Ok(DataKind::Shapes),
        "mixture" | "gaussian-mixture-2d" => Ok(DataKind::Mixture),
        "" => Err(Error::Config("empty dataset".into())),
        other => Ok(DataKind::Idx(PathBuf::from(other.strip_prefix("idx:").unwrap_or(other)))),
    }
}

/// `flatten` or `projection:DIM[:SEED]`.
pub fn parse_extractor(v: &str) -> Result<ExtractorKind> {
    let bad = || Error::Config(format!("invalid extractor `{v}` (expected flatten or projection:DIM[:SEED])"));
    if v == "flatten" {
        return Ok(ExtractorKind::Flatten);
    }
    let rest = v.strip_prefix("projection:").ok_or_else(bad)?;
    let mut parts = rest.split(':');
    let dim = parts.next().and_then(|d| d.parse().ok()).ok_or_else(bad)?;
    let seed = match parts.next() {
        Some(s) => s.parse().map_err(|_| bad())?,
        None => 0,
    };
    if parts.next().is_some() {
        return Err(bad());
    }
    Ok(ExtractorKind::RandomProjection { dim, seed })
}
