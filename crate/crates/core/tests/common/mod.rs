#![allow(dead_code)]

use std::path::Path;

use gan_qd::config::{DataKind, Preset, RunConfig};
use gan_qd::engine::{EngineConfig, Mode};
use gan_qd::harness::{prepare, Prepared};

/// A run small enough for a unit-speed test: 8x8 shapes, tiny bouts.
pub fn tiny_config(mode: Mode, seed: u64, out_dir: &Path) -> RunConfig {
    let mut c = RunConfig::preset(Preset::Desk);
    c.mode = mode;
    c.seed = seed;
    c.generations = 2;
    c.population_size = 3;
    c.batch_size = 4;
    c.batches = 2;
    c.fid_samples = 24;
    c.latent_dim = 4;
    c.width_min = 2;
    c.width_max = 6;
    c.data.kind = DataKind::Shapes;
    c.data.samples = 64;
    c.sample_every = 1;
    c.checkpoint_every = 1;
    c.out_dir = out_dir.to_path_buf();
    c
}

/// Flat 2-d samples: only linear layers are feasible, so it is the cheapest setup.
pub fn mixture_config(mode: Mode, seed: u64, out_dir: &Path) -> RunConfig {
    let mut c = tiny_config(mode, seed, out_dir);
    c.data.kind = DataKind::Mixture;
    c.data.samples = 64;
    c
}

pub fn engine_setup(c: &RunConfig) -> (EngineConfig, Prepared) {
    let prepared = prepare(c).unwrap();
    let engine = c.engine_config(prepared.dataset.sample_shape().to_vec()).unwrap();
    (engine, prepared)
}
