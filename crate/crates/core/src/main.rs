use std::path::PathBuf;
use std::process::{Command, ExitCode};

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand};

use gan_qd::config::{parse_data_kind, Preset, RunConfig};
use gan_qd::engine::Mode;
use gan_qd::genome::{parse_genome, UidAllocator};
use gan_qd::harness::{compare_runs, resume_experiment, run_experiment};
use gan_qd::phenotype::{infer_layers, IoShape};

#[derive(Parser)]
#[command(name = "gan-qd", version, about = "Coevolve GAN architectures with quality-diversity selection")]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Run one experiment.
    Run {
        #[command(flatten)]
        run: RunArgs,
        /// Continue from this checkpoint instead of starting fresh.
        #[arg(long)]
        resume: Option<PathBuf>,
    },
    /// Run every mode x seed combination as separate processes.
    Sweep {
        #[command(flatten)]
        run: RunArgs,
        /// Modes to run (comma separated).
        #[arg(long, value_delimiter = ',', default_value = "coegan,nslc,nsgc")]
        modes: Vec<Mode>,
        /// Seeds to run (comma separated).
        #[arg(long, value_delimiter = ',', default_value = "0,1,2,3,4")]
        seeds: Vec<u64>,
        /// Runs to execute at once.
        #[arg(long, default_value_t = 1)]
        jobs: usize,
    },
    /// Mann-Whitney U test on final best FID of two groups of runs.
    Compare {
        /// metrics.csv files of the first group.
        #[arg(long, num_args = 1.., required = true)]
        a: Vec<PathBuf>,
        /// metrics.csv files of the second group.
        #[arg(long, num_args = 1.., required = true)]
        b: Vec<PathBuf>,
    },
    /// Parse a genome string and print the layers it maps to.
    InspectGenome {
        /// e.g. `generator;deconv2d:relu:64;linear:tanh:32`
        genome: String,
        /// Sample shape, e.g. `1x8x8` or `2`.
        #[arg(long, default_value = "1x8x8")]
        sample_shape: String,
        #[arg(long, default_value_t = 16)]
        latent_dim: usize,
    },
}

#[derive(Args, Clone)]
struct RunArgs {
    /// Base settings: `full` or `desk`.
    #[arg(long, default_value = "desk")]
    preset: Preset,
    /// key = value file applied on top of the preset.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    mode: Option<Mode>,
    #[arg(long)]
    seed: Option<u64>,
    /// `shapes`, `mixture`, or a path to an IDX image file.
    #[arg(long)]
    dataset: Option<String>,
    #[arg(long)]
    generations: Option<u32>,
    #[arg(long)]
    out_dir: Option<PathBuf>,
    /// Worker threads for parallel bouts (default: all cores).
    #[arg(long)]
    workers: Option<usize>,
    /// Extra `key=value` overrides, applied last.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
}

impl RunArgs {
    fn config(&self) -> anyhow::Result<RunConfig> {
        let mut c = RunConfig::preset(self.preset);
        if let Some(p) = &self.config {
            c.apply_file(p)?;
        }
        if let Some(m) = self.mode {
            c.mode = m;
        }
        if let Some(s) = self.seed {
            c.seed = s;
        }
        if let Some(d) = &self.dataset {
            c.data.kind = parse_data_kind(d)?;
        }
        if let Some(g) = self.generations {
            c.generations = g;
        }
        if let Some(o) = &self.out_dir {
            c.out_dir = o.clone();
        }
        for kv in &self.overrides {
            let (k, v) = kv.split_once('=').with_context(|| format!("expected KEY=VALUE, got `{kv}`"))?;
            c.set(k, v)?;
        }
        Ok(c)
    }
}

fn init_workers(workers: Option<usize>) -> anyhow::Result<()> {
    if let Some(n) = workers {
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global()?;
    }
    Ok(())
}

fn main() -> ExitCode {
    match real_main() {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

fn real_main() -> anyhow::Result<ExitCode> {
    let cli = Cli::parse();
    match cli.command {
        Cmd::Run { run, resume } => {
            init_workers(run.workers)?;
            let config = run.config()?;
            let outcome = match resume {
                Some(ckpt) => resume_experiment(&config, &ckpt)?,
                None => run_experiment(&config)?,
            };
            match outcome.rows.last() {
                Some(r) => println!(
                    "{} seed {}: {} generations, final best FID {:.6}",
                    config.mode, config.seed, r.generation, r.best_fid
                ),
                None => println!("{} seed {}: no generations run", config.mode, config.seed),
            }
            println!("artifacts in {}", outcome.out_dir.display());
            Ok(ExitCode::SUCCESS)
        }
        Cmd::Sweep { run, modes, seeds, jobs } => sweep(&run, &modes, &seeds, jobs.max(1)),
        Cmd::Compare { a, b } => {
            let c = compare_runs(&a, &b)?;
            println!("group a: n={} mean final best FID {:.6}", c.final_a.len(), c.mean_a);
            println!("group b: n={} mean final best FID {:.6}", c.final_b.len(), c.mean_b);
            println!("U = {} (U_a = {}), z = {:.4}, p = {:.6}", c.test.u, c.test.u_a, c.test.z, c.test.p_value);
            Ok(ExitCode::SUCCESS)
        }
        Cmd::InspectGenome { genome, sample_shape, latent_dim } => {
            let shape = sample_shape
                .split('x')
                .map(|s| s.parse::<usize>())
                .collect::<Result<Vec<_>, _>>()
                .context("sample shape must look like 1x8x8")?;
            let g = parse_genome(&genome, &mut UidAllocator::new())?;
            println!("{g}");
            let layers = infer_layers(&g, &IoShape { sample_shape: shape, latent_dim })?;
            for (i, l) in layers.iter().enumerate() {
                println!("{i}: {:?} {:?} -> {:?} {}", l.kind, l.in_shape, l.out_shape(), l.activation);
            }
            Ok(ExitCode::SUCCESS)
        }
    }
}

fn sweep(run: &RunArgs, modes: &[Mode], seeds: &[u64], jobs: usize) -> anyhow::Result<ExitCode> {
    let base = run.config()?;
    let exe = std::env::current_exe()?;
    let mut pending: Vec<(Mode, u64)> = modes.iter().flat_map(|&m| seeds.iter().map(move |&s| (m, s))).collect();
    pending.reverse();
    let mut running = Vec::new();
    let mut failures = 0;
    loop {
        while running.len() < jobs {
            let Some((mode, seed)) = pending.pop() else { break };
            let dir = base.out_dir.join(format!("{mode}_seed{seed}"));
            let mut cmd = Command::new(&exe);
            cmd.arg("run").arg("--preset").arg(match run.preset {
                Preset::Full => "full",
                Preset::Desk => "desk",
            });
            if let Some(c) = &run.config {
                cmd.arg("--config").arg(c);
            }
            if let Some(d) = &run.dataset {
                cmd.arg("--dataset").arg(d);
            }
            if let Some(g) = run.generations {
                cmd.arg("--generations").arg(g.to_string());
            }
            if let Some(w) = run.workers {
                cmd.arg("--workers").arg(w.to_string());
            }
            for kv in &run.overrides {
                cmd.arg("--set").arg(kv);
            }
            cmd.arg("--mode").arg(mode.to_string()).arg("--seed").arg(seed.to_string()).arg("--out-dir").arg(&dir);
            running.push((mode, seed, cmd.spawn()?));
        }
        if running.is_empty() {
            break;
        }
        let (mode, seed, mut child) = running.remove(0);
        let status = child.wait()?;
        if !status.success() {
            eprintln!("{mode} seed {seed} failed with {status}");
            failures += 1;
        }
    }
    if failures > 0 {
        bail!("{failures} run(s) failed");
    }
    Ok(ExitCode::SUCCESS)
}
