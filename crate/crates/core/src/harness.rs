//! Experiment runner: loads data, drives the engine, and writes the
//! per-generation CSV, sample grids, checkpoints and a run manifest.
//!
//! Layout of an output directory:
//!
//! ```text
//! config.txt          effective configuration (key = value)
//! metrics.csv         one row per generation, fixed columns
//! genomes.jsonl       survivors' genomes, fitness and samples per generation
//! samples/gen_NNNN.pgm  4x4 grid from the best generator (image data only)
//! checkpoints/gen_NNNN.ckpt  engine state (see `engine::write_checkpoint`)
//! summary.json        final best FID and per-generation bests
//! manifest.json       status, error message, generations completed
//! ```

use std::fs::{self, File, OpenOptions};
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::config::RunConfig;
use crate::data::{load_dataset, Dataset};
use crate::engine::{
    initialize, read_checkpoint, run_generation, write_checkpoint, EngineState, GenerationReport, RunContext,
};
use crate::error::{Error, Result};
use crate::metrics::{generate, FeatureExtractor, ReferenceStats};
use crate::rng::stream;

pub const CSV_COLUMNS: [&str; 15] = [
    "generation",
    "mode",
    "seed",
    "best_fid",
    "mean_fid",
    "best_d_loss",
    "mean_d_loss",
    "mean_novelty_g",
    "mean_novelty_d",
    "archive_size_g",
    "archive_size_d",
    "best_g_trained_samples",
    "best_d_trained_samples",
    "mean_g_trained_samples",
    "mean_d_trained_samples",
];

// stream tags, disjoint from the engine's per-generation paths
const DATA_STREAM: u64 = u64::MAX;
const GRID_STREAM: u64 = u64::MAX - 1;

/// One CSV row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CsvRow {
    pub generation: u32,
    pub mode: String,
    pub seed: u64,
    pub best_fid: f64,
    pub mean_fid: f64,
    pub best_d_loss: f64,
    pub mean_d_loss: f64,
    pub mean_novelty_g: f64,
    pub mean_novelty_d: f64,
    pub archive_size_g: usize,
    pub archive_size_d: usize,
    pub best_g_trained_samples: u64,
    pub best_d_trained_samples: u64,
    pub mean_g_trained_samples: f64,
    pub mean_d_trained_samples: f64,
}

impl CsvRow {
    pub fn from_report(r: &GenerationReport, config: &RunConfig) -> Self {
        CsvRow {
            generation: r.generation,
            mode: config.mode.to_string(),
            seed: config.seed,
            best_fid: r.generators.best_fitness,
            mean_fid: r.generators.mean_fitness,
            best_d_loss: r.discriminators.best_fitness,
            mean_d_loss: r.discriminators.mean_fitness,
            mean_novelty_g: r.generators.mean_novelty,
            mean_novelty_d: r.discriminators.mean_novelty,
            archive_size_g: r.generators.archive_size,
            archive_size_d: r.discriminators.archive_size,
            best_g_trained_samples: r.generators.best_trained_samples,
            best_d_trained_samples: r.discriminators.best_trained_samples,
            mean_g_trained_samples: r.generators.mean_trained_samples,
            mean_d_trained_samples: r.discriminators.mean_trained_samples,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub status: String,
    pub error: Option<String>,
    pub generations_completed: u32,
    pub mode: String,
    pub seed: u64,
    pub dataset: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub mode: String,
    pub seed: u64,
    pub generations: u32,
    pub final_best_fid: Option<f64>,
    pub best_fid_per_generation: Vec<f64>,
    pub final_mean_d_trained_samples: Option<f64>,
}

/// Result of a finished run.
#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub rows: Vec<CsvRow>,
    pub out_dir: PathBuf,
}

/// Shared per-run inputs built from the configuration.
pub struct Prepared {
    pub dataset: Dataset,
    pub extractor: FeatureExtractor,
    pub reference: ReferenceStats,
}

pub fn prepare(config: &RunConfig) -> Result<Prepared> {
    let mut rng = stream(config.seed, &[DATA_STREAM]);
    let dataset = load_dataset(&config.data.spec(), &mut rng)?;
    let extractor = FeatureExtractor::new(config.extractor, dataset.samples().row_len())?;
    let reference = ReferenceStats::from_samples(dataset.samples(), &extractor)?;
    Ok(Prepared { dataset, extractor, reference })
}

/// Run `config.generations` generations from scratch, writing artifacts
/// into `config.out_dir`. Failures are recorded in the manifest before
/// being returned.
pub fn run_experiment(config: &RunConfig) -> Result<RunOutcome> {
    run_guarded(config, None)
}

/// Continue from a checkpoint up to `config.generations`, appending to
/// the existing CSV.
pub fn resume_experiment(config: &RunConfig, checkpoint: &Path) -> Result<RunOutcome> {
    let file = File::open(checkpoint).map_err(|e| Error::Io(format!("{}: {e}", checkpoint.display())))?;
    let state = read_checkpoint(BufReader::new(file))?;
    if state.seed != config.seed {
        return Err(Error::Config(format!("checkpoint seed {} differs from config seed {}", state.seed, config.seed)));
    }
    run_guarded(config, Some(state))
}

fn run_guarded(config: &RunConfig, state: Option<EngineState>) -> Result<RunOutcome> {
    fs::create_dir_all(&config.out_dir)?;
    let mut manifest = Manifest {
        status: "running".into(),
        error: None,
        generations_completed: state.as_ref().map_or(0, |s| s.generation),
        mode: config.mode.to_string(),
        seed: config.seed,
        dataset: config.data.spec().label(),
    };
    write_json(&config.out_dir.join("manifest.json"), &manifest)?;
    let result = run_inner(config, state, &mut manifest);
    match &result {
        Ok(_) => manifest.status = "ok".into(),
        Err(e) => {
            manifest.status = "failed".into();
            manifest.error = Some(e.to_string());
        }
    }
    write_json(&config.out_dir.join("manifest.json"), &manifest)?;
    result
}

fn run_inner(config: &RunConfig, state: Option<EngineState>, manifest: &mut Manifest) -> Result<RunOutcome> {
    let out = &config.out_dir;
    fs::write(out.join("config.txt"), config.to_kv())?;
    let prepared = prepare(config)?;
    let engine_cfg = config.engine_config(prepared.dataset.sample_shape().to_vec())?;
    let ctx = RunContext { data: &prepared.dataset, reference: &prepared.reference, extractor: &prepared.extractor };

    let resumed = state.is_some();
    let mut state = match state {
        Some(s) => s,
        None => initialize(&engine_cfg, config.seed)?,
    };
    let csv_path = out.join("metrics.csv");
    let mut rows = if resumed { read_csv(&csv_path)? } else { Vec::new() };
    rows.retain(|r| r.generation <= state.generation);
    write_csv(&csv_path, &rows)?;
    let mut csv = csv::WriterBuilder::new()
        .has_headers(false)
        .from_writer(OpenOptions::new().append(true).open(&csv_path)?);
    let mut genomes = BufWriter::new(if resumed {
        OpenOptions::new().append(true).create(true).open(out.join("genomes.jsonl"))?
    } else {
        File::create(out.join("genomes.jsonl"))?
    });

    while state.generation < config.generations {
        let report = run_generation(&mut state, &engine_cfg, &ctx)?;
        let row = CsvRow::from_report(&report, config);
        csv.serialize(&row).map_err(csv_err)?;
        csv.flush()?;
        serde_json::to_writer(&mut genomes, &report).map_err(|e| Error::Io(e.to_string()))?;
        writeln!(genomes)?;
        rows.push(row);
        let g = state.generation;
        if config.sample_every > 0 && (g % config.sample_every == 0 || g == config.generations) {
            write_sample_grid(&state, config, &prepared.dataset)?;
        }
        if config.checkpoint_every > 0 && (g % config.checkpoint_every == 0 || g == config.generations) {
            let dir = out.join("checkpoints");
            fs::create_dir_all(&dir)?;
            let f = BufWriter::new(File::create(dir.join(format!("gen_{g:04}.ckpt")))?);
            write_checkpoint(&state, f)?;
        }
        manifest.generations_completed = g;
    }
    genomes.flush()?;

    let summary = Summary {
        mode: config.mode.to_string(),
        seed: config.seed,
        generations: state.generation,
        final_best_fid: rows.last().map(|r| r.best_fid),
        best_fid_per_generation: rows.iter().map(|r| r.best_fid).collect(),
        final_mean_d_trained_samples: rows.last().map(|r| r.mean_d_trained_samples),
    };
    write_json(&out.join("summary.json"), &summary)?;
    Ok(RunOutcome { rows, out_dir: out.clone() })
}

fn csv_err(e: csv::Error) -> Error {
    Error::Io(e.to_string())
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value).map_err(|e| Error::Io(e.to_string()))?;
    fs::write(path, text + "\n")?;
    Ok(())
}

/// Write the header and `rows`, replacing any existing file.
pub fn write_csv(path: &Path, rows: &[CsvRow]) -> Result<()> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_path(path).map_err(csv_err)?;
    w.write_record(CSV_COLUMNS).map_err(csv_err)?;
    for r in rows {
        w.serialize(r).map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

/// Read a metrics CSV, checking the header against the fixed schema.
pub fn read_csv(path: &Path) -> Result<Vec<CsvRow>> {
    let mut r = csv::Reader::from_path(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    let header = r.headers().map_err(csv_err)?;
    if header.iter().ne(CSV_COLUMNS.iter().copied()) {
        return Err(Error::Format { offset: 0, reason: format!("{}: unexpected CSV header", path.display()) });
    }
    r.deserialize()
        .map(|row| row.map_err(|e| Error::Format { offset: 0, reason: format!("{}: {e}", path.display()) }))
        .collect()
}

/// Encode a grayscale image as binary PGM (P5) with values in [-1, 1].
pub fn encode_pgm(width: usize, height: usize, pixels: &[f64]) -> Vec<u8> {
    let mut out = format!("P5\n{width} {height}\n255\n").into_bytes();
    out.extend(pixels.iter().map(|&v| (((v.clamp(-1.0, 1.0) + 1.0) * 127.5).round()) as u8));
    out
}

const GRID: usize = 4;

/// Tile `GRID x GRID` single-channel images with a one-pixel dark border.
pub fn tile_grid(images: &[f64], h: usize, w: usize) -> (usize, usize, Vec<f64>) {
    let (gw, gh) = (GRID * (w + 1) + 1, GRID * (h + 1) + 1);
    let mut px = vec![-1.0; gw * gh];
    for (k, img) in images.chunks(h * w).take(GRID * GRID).enumerate() {
        let (oy, ox) = ((k / GRID) * (h + 1) + 1, (k % GRID) * (w + 1) + 1);
        for y in 0..h {
            for x in 0..w {
                px[(oy + y) * gw + ox + x] = img[y * w + x];
            }
        }
    }
    (gw, gh, px)
}

fn write_sample_grid(state: &EngineState, config: &RunConfig, dataset: &Dataset) -> Result<()> {
    let [c, h, w] = match dataset.sample_shape() {
        &[c, h, w] => [c, h, w],
        _ => return Ok(()),
    };
    let best = state
        .generators
        .population
        .iter()
        .min_by(|a, b| a.fitness.total_cmp(&b.fitness))
        .expect("population is never empty");
    let mut rng = stream(config.seed, &[GRID_STREAM, state.generation as u64]);
    let samples = generate(&best.network, GRID * GRID, &mut rng)?;
    // first channel only
    let plane: Vec<f64> = samples.data().chunks(c * h * w).flat_map(|s| s[..h * w].iter().copied()).collect();
    let (gw, gh, px) = tile_grid(&plane, h, w);
    let dir = config.out_dir.join("samples");
    fs::create_dir_all(&dir)?;
    fs::write(dir.join(format!("gen_{:04}.pgm", state.generation)), encode_pgm(gw, gh, &px))?;
    Ok(())
}

/// Two-sided Mann-Whitney U test result.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MannWhitney {
    /// The smaller of the two U statistics.
    pub u: f64,
    /// U of the first group: pairs where it is larger, ties counting half.
    pub u_a: f64,
    pub z: f64,
    pub p_value: f64,
}

/// Mann-Whitney U with midranks for ties and a normal approximation with
/// tie-corrected variance and continuity correction.
pub fn mann_whitney_u(a: &[f64], b: &[f64]) -> Result<MannWhitney> {
    if a.len() < 2 || b.len() < 2 {
        return Err(Error::Usage(format!("need at least 2 values per group, got {} and {}", a.len(), b.len())));
    }
    if a.iter().chain(b).any(|v| v.is_nan()) {
        return Err(Error::Usage("NaN in comparison input".into()));
    }
    let (n1, n2) = (a.len() as f64, b.len() as f64);
    let mut all: Vec<(f64, bool)> = a.iter().map(|&v| (v, true)).chain(b.iter().map(|&v| (v, false))).collect();
    all.sort_by(|x, y| x.0.total_cmp(&y.0));
    let n = all.len();
    let mut rank_sum_a = 0.0;
    let mut tie_term = 0.0;
    let mut i = 0;
    while i < n {
        let mut j = i;
        while j + 1 < n && all[j + 1].0 == all[i].0 {
            j += 1;
        }
        let midrank = (i + j) as f64 / 2.0 + 1.0;
        let t = (j - i + 1) as f64;
        tie_term += t * t * t - t;
        rank_sum_a += all[i..=j].iter().filter(|x| x.1).count() as f64 * midrank;
        i = j + 1;
    }
    let u_a = rank_sum_a - n1 * (n1 + 1.0) / 2.0;
    let u_b = n1 * n2 - u_a;
    let mean = n1 * n2 / 2.0;
    let nf = n as f64;
    let var = n1 * n2 / 12.0 * ((nf + 1.0) - tie_term / (nf * (nf - 1.0)));
    let (z, p_value) = if var <= 0.0 {
        (0.0, 1.0)
    } else {
        let z = ((u_a - mean).abs() - 0.5).max(0.0) / var.sqrt();
        let normal = Normal::standard();
        (z, (2.0 * (1.0 - normal.cdf(z))).min(1.0))
    };
    Ok(MannWhitney { u: u_a.min(u_b), u_a, z, p_value })
}

/// Compare final best FID across two groups of run CSVs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    pub final_a: Vec<f64>,
    pub final_b: Vec<f64>,
    pub mean_a: f64,
    pub mean_b: f64,
    pub test: MannWhitney,
}

pub fn compare_runs(csv_a: &[PathBuf], csv_b: &[PathBuf]) -> Result<Comparison> {
    let finals = |paths: &[PathBuf]| -> Result<Vec<f64>> {
        paths
            .iter()
            .map(|p| {
                read_csv(p)?
                    .last()
                    .map(|r| r.best_fid)
                    .ok_or_else(|| Error::Usage(format!("{} has no generation rows", p.display())))
            })
            .collect()
    };
    let (final_a, final_b) = (finals(csv_a)?, finals(csv_b)?);
    compare_values(final_a, final_b)
}

pub fn compare_values(final_a: Vec<f64>, final_b: Vec<f64>) -> Result<Comparison> {
    let test = mann_whitney_u(&final_a, &final_b)?;
    let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
    Ok(Comparison { mean_a: mean(&final_a), mean_b: mean(&final_b), final_a, final_b, test })
}
