//! The generation loop: cross-paired evaluation of parents and offspring,
//! survivor selection over parents plus offspring, archive updates and
//! reproduction, for both coevolving subpopulations.

use std::fmt;
use std::io::{BufRead, Write};
use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::genome::{mutate, GeneSpace, Genome, MutationRates, Role, UidAllocator};
use crate::metrics::{FeatureExtractor, ReferenceStats};
use crate::phenotype::{build_phenotype, transfer_weights, Individual, IoShape};
use crate::qd::{
    constrained_nondominated_sort, objectives, speciate, tournament_select, tournament_select_min, Archive,
    CompetitionMode, ObjectiveVector, RankedIndividual, Reference,
};
use crate::rng::{derive_seed, stream};
use crate::train::{evaluate_all_vs_all, BoutConfig, EvalContext};
use crate::WORST_FITNESS;

/// Selection strategy.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    /// Speciation with fitness sharing.
    Coegan,
    /// Novelty search with local competition.
    Nslc,
    /// Novelty search with global competition.
    Nsgc,
}

impl Mode {
    pub const ALL: [Mode; 3] = [Mode::Coegan, Mode::Nslc, Mode::Nsgc];

    pub fn competition(self) -> Option<CompetitionMode> {
        match self {
            Mode::Coegan => None,
            Mode::Nslc => Some(CompetitionMode::Local),
            Mode::Nsgc => Some(CompetitionMode::Global),
        }
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Mode::Coegan => "coegan",
            Mode::Nslc => "nslc",
            Mode::Nsgc => "nsgc",
        })
    }
}

impl FromStr for Mode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "coegan" => Ok(Mode::Coegan),
            "nslc" => Ok(Mode::Nslc),
            "nsgc" => Ok(Mode::Nsgc),
            _ => Err(Error::Config(format!("unknown mode `{s}` (expected coegan, nslc or nsgc)"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EngineConfig {
    pub mode: Mode,
    pub population_size: usize,
    pub rates: MutationRates,
    pub space: GeneSpace,
    pub tournament_k: usize,
    pub species: usize,
    pub neighborhood: usize,
    pub archive_probability: f64,
    pub bout: BoutConfig,
    pub fid_samples: usize,
    pub io: IoShape,
}

impl EngineConfig {
    pub fn validate(&self) -> Result<()> {
        let err = |m: String| Err(Error::Config(m));
        if self.population_size < 2 {
            return err(format!("population size {} must be at least 2", self.population_size));
        }
        self.space.validate()?;
        for (name, p) in [
            ("add rate", self.rates.add),
            ("remove rate", self.rates.remove),
            ("change rate", self.rates.change),
            ("archive probability", self.archive_probability),
        ] {
            if !(0.0..=1.0).contains(&p) {
                return err(format!("{name} {p} outside [0, 1]"));
            }
        }
        if self.tournament_k == 0 || self.tournament_k > self.population_size {
            return err(format!("tournament size {} for population {}", self.tournament_k, self.population_size));
        }
        if self.mode == Mode::Coegan && (self.species == 0 || self.species > 2 * self.population_size) {
            return err(format!("species count {} for population {}", self.species, self.population_size));
        }
        if self.neighborhood == 0 {
            return err("neighborhood size must be at least 1".into());
        }
        if self.bout.batch_size == 0 || self.bout.latent_dim == 0 {
            return err("batch size and latent dim must be positive".into());
        }
        if !(self.bout.learning_rate > 0.0 && self.bout.learning_rate.is_finite()) {
            return err(format!("learning rate {} must be positive", self.bout.learning_rate));
        }
        if self.fid_samples < 2 {
            return err(format!("FID sample count {} must be at least 2", self.fid_samples));
        }
        if self.io.sample_shape.is_empty() || self.io.sample_len() == 0 || self.io.latent_dim != self.bout.latent_dim {
            return err("sample shape must be non-empty and latent sizes must agree".into());
        }
        Ok(())
    }
}

/// One role's population, its pending offspring and its archive.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Subpopulation {
    pub population: Vec<Individual>,
    pub offspring: Vec<Individual>,
    pub archive: Archive,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EngineState {
    /// Generations completed so far.
    pub generation: u32,
    pub seed: u64,
    pub generators: Subpopulation,
    pub discriminators: Subpopulation,
    pub uids: UidAllocator,
    pub next_id: u64,
}

/// Summary of one role's survivors after selection.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PopulationReport {
    pub best_fitness: f64,
    /// Mean over survivors whose training did not fail; the worst-case
    /// sentinel when every survivor failed.
    pub mean_fitness: f64,
    pub mean_novelty: f64,
    pub archive_size: usize,
    pub best_trained_samples: u64,
    pub mean_trained_samples: f64,
    pub fitness: Vec<f64>,
    pub trained_samples: Vec<u64>,
    pub genomes: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenerationReport {
    /// 1-based index of the generation just completed.
    pub generation: u32,
    pub bouts: usize,
    pub generators: PopulationReport,
    pub discriminators: PopulationReport,
}

// stream tags
const INIT: u64 = 0;
const EVAL: u64 = 1;
const SELECT: u64 = 2;
const ARCHIVE: u64 = 3;
const REPRODUCE: u64 = 4;

fn role_tag(role: Role) -> u64 {
    match role {
        Role::Generator => 0,
        Role::Discriminator => 1,
    }
}

/// Maximum rebuild attempts before an offspring falls back to its parent's genome.
pub const MAX_REBUILDS: usize = 10;

/// Minimal random populations plus offspring mutated from copies of them.
pub fn initialize(config: &EngineConfig, seed: u64) -> Result<EngineState> {
    config.validate()?;
    let mut uids = UidAllocator::new();
    let mut next_id = 0u64;
    let mut roles = Vec::new();
    for role in [Role::Generator, Role::Discriminator] {
        let mut rng = stream(seed, &[INIT, role_tag(role)]);
        let mut population = Vec::with_capacity(config.population_size);
        while population.len() < config.population_size {
            let genome = Genome::random_minimal(role, &config.space, &mut rng, &mut uids);
            // a minimal genome can still be infeasible (e.g. a deconv for a
            // flat sample), so redraw until it builds
            if let Ok(net) = build_phenotype(&genome, &config.io, &mut rng) {
                population.push(Individual::new(next_id, genome, net));
                next_id += 1;
            }
        }
        let offspring = (0..config.population_size)
            .map(|k| {
                let mut rng = stream(seed, &[INIT, role_tag(role), 1, k as u64]);
                make_child(&population[k], config, &mut uids, &mut next_id, &mut rng)
            })
            .collect::<Result<Vec<_>>>()?;
        roles.push(Subpopulation { population, offspring, archive: Archive::new(config.archive_probability)? });
    }
    let discriminators = roles.pop().unwrap();
    let generators = roles.pop().unwrap();
    Ok(EngineState { generation: 0, seed, generators, discriminators, uids, next_id })
}

/// Mutate a copy of `parent` and carry its weights over. After
/// [`MAX_REBUILDS`] infeasible mutants the child keeps the parent genome.
fn make_child<R: Rng + ?Sized>(
    parent: &Individual,
    config: &EngineConfig,
    uids: &mut UidAllocator,
    next_id: &mut u64,
    rng: &mut R,
) -> Result<Individual> {
    let mut built = None;
    for _ in 0..MAX_REBUILDS {
        let genome = mutate(&parent.genome, rng, &config.rates, &config.space, uids);
        if let Ok(net) = transfer_weights(&parent.genome, &parent.network, &genome, &config.io, rng) {
            built = Some((genome, net));
            break;
        }
    }
    let (genome, network) = match built {
        Some(b) => b,
        None => {
            let genome = parent.genome.clone();
            let net = transfer_weights(&parent.genome, &parent.network, &genome, &config.io, rng)?;
            (genome, net)
        }
    };
    let id = *next_id;
    *next_id += 1;
    Ok(Individual::new(id, genome, network))
}

/// Shared, read-only inputs of a run.
pub struct RunContext<'a> {
    pub data: &'a Dataset,
    pub reference: &'a ReferenceStats,
    pub extractor: &'a FeatureExtractor,
}

/// Per-candidate selection data for one role's `P ∪ Q`.
struct Scored {
    objectives: Vec<ObjectiveVector>,
    /// Shared fitness in the speciation mode; raw fitness otherwise.
    score: Vec<f64>,
    rank: Vec<usize>,
}

/// Run one generation in place and report on the new survivors.
pub fn run_generation(state: &mut EngineState, config: &EngineConfig, ctx: &RunContext<'_>) -> Result<GenerationReport> {
    let gen = state.generation as u64;
    let eval_ctx = EvalContext {
        data: ctx.data,
        reference: ctx.reference,
        extractor: ctx.extractor,
        bout: config.bout,
        fid_samples: config.fid_samples,
    };
    for ind in all_members_mut(state) {
        ind.failed = false;
    }

    let (g, d) = (&mut state.generators, &mut state.discriminators);
    let e1 = evaluate_all_vs_all(&mut g.population, &mut d.offspring, &eval_ctx, derive_seed(state.seed, &[gen, EVAL, 0]))?;
    let e2 = evaluate_all_vs_all(&mut g.offspring, &mut d.population, &eval_ctx, derive_seed(state.seed, &[gen, EVAL, 1]))?;
    let bouts = e1.bouts() + e2.bouts();

    let mut reports = Vec::with_capacity(2);
    for role in [Role::Generator, Role::Discriminator] {
        let sub = match role {
            Role::Generator => &mut state.generators,
            Role::Discriminator => &mut state.discriminators,
        };
        let mut combined: Vec<Individual> = sub.population.drain(..).chain(sub.offspring.drain(..)).collect();
        for ind in combined.iter_mut() {
            if ind.failed {
                ind.fitness = WORST_FITNESS;
            }
        }
        let mut rng = stream(state.seed, &[gen, SELECT, role_tag(role)]);
        let scored = score(&combined, &sub.archive, config, &mut rng)?;
        for (ind, o) in combined.iter_mut().zip(&scored.objectives) {
            ind.novelty = o.novelty;
            ind.competition = o.competition as f64;
        }
        let keep = select_next_population(&scored, config.population_size, config.mode);

        let mut slots: Vec<Option<Individual>> = combined.into_iter().map(Some).collect();
        let survivors: Vec<Individual> = keep.iter().map(|&i| slots[i].take().unwrap()).collect();
        let survivor_scores: Vec<(ObjectiveVector, f64, usize)> =
            keep.iter().map(|&i| (scored.objectives[i], scored.score[i], scored.rank[i])).collect();

        if config.mode != Mode::Coegan {
            let mut rng = stream(state.seed, &[gen, ARCHIVE, role_tag(role)]);
            sub.archive.update(&survivors, &mut rng);
        }
        reports.push(population_report(&survivors, sub.archive.len()));

        let mut offspring = Vec::with_capacity(config.population_size);
        for k in 0..config.population_size {
            let mut rng = stream(state.seed, &[gen, REPRODUCE, role_tag(role), k as u64]);
            let winner = match config.mode {
                Mode::Coegan => {
                    let shared: Vec<f64> = survivor_scores.iter().map(|s| s.1).collect();
                    tournament_select_min(&shared, config.tournament_k, &mut rng)?
                }
                _ => {
                    let ranked: Vec<RankedIndividual> = survivor_scores
                        .iter()
                        .enumerate()
                        .map(|(index, &(objectives, fitness, rank))| RankedIndividual { index, objectives, fitness, rank })
                        .collect();
                    tournament_select(&ranked, config.tournament_k, &mut rng)?
                }
            };
            offspring.push(make_child(&survivors[winner], config, &mut state.uids, &mut state.next_id, &mut rng)?);
        }
        sub.population = survivors;
        for ind in sub.population.iter_mut() {
            ind.age += 1;
        }
        sub.offspring = offspring;
    }
    state.generation += 1;
    let discriminators = reports.pop().unwrap();
    let generators = reports.pop().unwrap();
    Ok(GenerationReport { generation: state.generation, bouts, generators, discriminators })
}

fn all_members_mut(state: &mut EngineState) -> impl Iterator<Item = &mut Individual> {
    let g = &mut state.generators;
    let d = &mut state.discriminators;
    g.population
        .iter_mut()
        .chain(g.offspring.iter_mut())
        .chain(d.population.iter_mut())
        .chain(d.offspring.iter_mut())
}

fn score<R: Rng + ?Sized>(combined: &[Individual], archive: &Archive, config: &EngineConfig, rng: &mut R) -> Result<Scored> {
    let fitness: Vec<f64> = combined.iter().map(|i| i.fitness).collect();
    match config.mode.competition() {
        None => {
            let genomes: Vec<&Genome> = combined.iter().map(|i| &i.genome).collect();
            let species = speciate(&genomes, &fitness, config.species.min(combined.len()), rng)?;
            Ok(Scored {
                objectives: vec![ObjectiveVector::MIN; combined.len()],
                score: species.shared_fitness,
                rank: vec![0; combined.len()],
            })
        }
        Some(mode) => {
            let mut objs = Vec::with_capacity(combined.len());
            for (i, ind) in combined.iter().enumerate() {
                if ind.failed {
                    objs.push(ObjectiveVector::MIN);
                    continue;
                }
                let reference: Vec<Reference> = combined
                    .iter()
                    .enumerate()
                    .filter(|&(j, _)| j != i)
                    .map(|(_, o)| Reference { genome: &o.genome, fitness: o.fitness })
                    .chain(archive.references())
                    .collect();
                objs.push(objectives(&ind.genome, ind.fitness, &reference, config.neighborhood, mode)?);
            }
            let fronts = constrained_nondominated_sort(&objs, &fitness);
            let mut rank = vec![0; combined.len()];
            for (r, front) in fronts.iter().enumerate() {
                for &i in front {
                    rank[i] = r;
                }
            }
            Ok(Scored { objectives: objs, score: fitness, rank })
        }
    }
}

/// Indices of the survivors, in selection order.
///
/// Novelty modes fill from successive constrained fronts and truncate the
/// overflowing front by descending novelty. The speciation mode keeps the
/// lowest shared fitness. Remaining ties keep the earlier index.
fn select_next_population(scored: &Scored, size: usize, mode: Mode) -> Vec<usize> {
    let n = scored.score.len();
    match mode {
        Mode::Coegan => {
            let mut order: Vec<usize> = (0..n).collect();
            order.sort_by(|&a, &b| scored.score[a].total_cmp(&scored.score[b]));
            order.truncate(size);
            order
        }
        _ => {
            let max_rank = scored.rank.iter().copied().max().unwrap_or(0);
            let mut keep = Vec::with_capacity(size);
            for r in 0..=max_rank {
                let mut front: Vec<usize> = (0..n).filter(|&i| scored.rank[i] == r).collect();
                if keep.len() + front.len() > size {
                    front.sort_by(|&a, &b| {
                        scored.objectives[b].novelty.total_cmp(&scored.objectives[a].novelty)
                    });
                    front.truncate(size - keep.len());
                }
                keep.extend(front);
                if keep.len() == size {
                    break;
                }
            }
            keep
        }
    }
}

/// Survivor selection exposed for callers that score populations
/// themselves: `fronts_rank[i]` is the constrained front of candidate `i`.
pub fn select_survivors(
    objectives: &[ObjectiveVector],
    score: &[f64],
    fronts_rank: &[usize],
    size: usize,
    mode: Mode,
) -> Result<Vec<usize>> {
    if objectives.len() != score.len() || score.len() != fronts_rank.len() {
        return Err(Error::Usage("selection inputs differ in length".into()));
    }
    if size > score.len() {
        return Err(Error::Usage(format!("cannot keep {size} of {} candidates", score.len())));
    }
    let scored = Scored { objectives: objectives.to_vec(), score: score.to_vec(), rank: fronts_rank.to_vec() };
    Ok(select_next_population(&scored, size, mode))
}

fn population_report(survivors: &[Individual], archive_size: usize) -> PopulationReport {
    let fitness: Vec<f64> = survivors.iter().map(|i| i.fitness).collect();
    let trained_samples: Vec<u64> = survivors.iter().map(|i| i.trained_samples).collect();
    let best = (0..survivors.len()).min_by(|&a, &b| fitness[a].total_cmp(&fitness[b])).unwrap();
    let ok: Vec<f64> = survivors.iter().filter(|i| !i.failed && i.fitness < WORST_FITNESS).map(|i| i.fitness).collect();
    let mean_fitness = if ok.is_empty() { WORST_FITNESS } else { ok.iter().sum::<f64>() / ok.len() as f64 };
    let n = survivors.len() as f64;
    PopulationReport {
        best_fitness: fitness[best],
        mean_fitness,
        mean_novelty: survivors.iter().map(|i| i.novelty).sum::<f64>() / n,
        archive_size,
        best_trained_samples: trained_samples[best],
        mean_trained_samples: trained_samples.iter().sum::<u64>() as f64 / n,
        genomes: survivors.iter().map(|i| i.genome.to_string()).collect(),
        fitness,
        trained_samples,
    }
}

/// First line of every checkpoint file.
pub const CHECKPOINT_HEADER: &str = "gan-qd checkpoint v1";

/// Write the full engine state: a header line, then one JSON document.
pub fn write_checkpoint<W: Write>(state: &EngineState, mut out: W) -> Result<()> {
    writeln!(out, "{CHECKPOINT_HEADER}")?;
    serde_json::to_writer(&mut out, state).map_err(|e| Error::Io(e.to_string()))?;
    writeln!(out)?;
    Ok(())
}

pub fn read_checkpoint<R: BufRead>(mut input: R) -> Result<EngineState> {
    let mut header = String::new();
    input.read_line(&mut header)?;
    if header.trim_end() != CHECKPOINT_HEADER {
        return Err(Error::Format { offset: 0, reason: format!("unexpected checkpoint header `{}`", header.trim_end()) });
    }
    serde_json::from_reader(input)
        .map_err(|e| Error::Format { offset: header.len(), reason: e.to_string() })
}
