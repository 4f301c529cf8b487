//! NSGA-II machinery and quality-diversity objectives.
//!
//! Both objectives (novelty, competition) are maximized; fitness is
//! minimized. Selection in the novelty modes uses feasibility-constrained
//! dominance and breaks ties on novelty alone (no crowding distance).

use rand::seq::index::sample;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::genome::{gene_edit_distance, Genome};
use crate::phenotype::Individual;
use crate::WORST_FITNESS;

/// Lower clamp applied to fitness before the feasibility test.
pub const FITNESS_FLOOR: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ObjectiveVector {
    pub novelty: f64,
    pub competition: u32,
}

impl ObjectiveVector {
    pub fn new(novelty: f64, competition: u32) -> Self {
        ObjectiveVector { novelty, competition }
    }

    /// Placeholder for individuals whose training failed.
    pub const MIN: ObjectiveVector = ObjectiveVector { novelty: 0.0, competition: 0 };
}

/// Pareto dominance with both objectives maximized.
pub fn dominates(a: &ObjectiveVector, b: &ObjectiveVector) -> bool {
    let ge = a.novelty >= b.novelty && a.competition >= b.competition;
    let gt = a.novelty > b.novelty || a.competition > b.competition;
    ge && gt
}

/// Partition `0..n` into successive nondominated fronts under `dom`,
/// where `dom(i, j)` means `i` dominates `j`.
///
/// If the relation has cycles, peeling stalls with no undominated member
/// left; the members with the fewest remaining dominators then form the
/// next front, so every index is still placed exactly once.
#[allow(clippy::needless_range_loop)]
pub fn nondominated_sort_by(n: usize, dom: impl Fn(usize, usize) -> bool) -> Vec<Vec<usize>> {
    let mut dominated_by: Vec<Vec<usize>> = vec![Vec::new(); n];
    let mut count = vec![0usize; n];
    for i in 0..n {
        for j in 0..n {
            if i != j && dom(i, j) {
                dominated_by[i].push(j);
                count[j] += 1;
            }
        }
    }
    let mut placed = vec![false; n];
    let mut remaining = n;
    let mut fronts = Vec::new();
    let mut current: Vec<usize> = (0..n).filter(|&i| count[i] == 0).collect();
    while remaining > 0 {
        if current.is_empty() {
            let min = (0..n).filter(|&i| !placed[i]).map(|i| count[i]).min().unwrap();
            current = (0..n).filter(|&i| !placed[i] && count[i] == min).collect();
        }
        for &i in &current {
            placed[i] = true;
        }
        remaining -= current.len();
        let mut next = Vec::new();
        for &i in &current {
            for &j in &dominated_by[i] {
                if placed[j] {
                    continue;
                }
                count[j] -= 1;
                if count[j] == 0 {
                    next.push(j);
                }
            }
        }
        next.sort_unstable();
        next.dedup();
        fronts.push(std::mem::replace(&mut current, next));
    }
    fronts
}

/// Deb's fast nondominated sort over objective vectors.
pub fn fast_nondominated_sort(objs: &[ObjectiveVector]) -> Vec<Vec<usize>> {
    nondominated_sort_by(objs.len(), |i, j| dominates(&objs[i], &objs[j]))
}

fn clamp_fitness(f: f64) -> f64 {
    f.max(FITNESS_FLOOR)
}

/// Whether a solution with fitness `f_other` is feasible when compared
/// against one with fitness `f_self`: `f_other < 2 * f_self`.
pub fn feasible_against(f_other: f64, f_self: f64) -> bool {
    if !f_other.is_finite() || f_other >= WORST_FITNESS {
        return false;
    }
    let f_self = if f_self.is_nan() { f64::INFINITY } else { clamp_fitness(f_self) };
    clamp_fitness(f_other) < 2.0 * f_self
}

/// `a` constrained-dominates `b`: `a` feasible and `b` not, or both
/// feasible and `a` dominates `b`.
pub fn constrained_dominates(a: &ObjectiveVector, b: &ObjectiveVector, fitness_a: f64, fitness_b: f64) -> bool {
    let a_ok = feasible_against(fitness_a, fitness_b);
    let b_ok = feasible_against(fitness_b, fitness_a);
    (a_ok && !b_ok) || (a_ok && b_ok && dominates(a, b))
}

/// Constrained nondominated fronts.
pub fn constrained_nondominated_sort(objs: &[ObjectiveVector], fitness: &[f64]) -> Vec<Vec<usize>> {
    nondominated_sort_by(objs.len(), |i, j| constrained_dominates(&objs[i], &objs[j], fitness[i], fitness[j]))
}

/// View of an individual as seen by selection.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RankedIndividual {
    pub index: usize,
    pub objectives: ObjectiveVector,
    pub fitness: f64,
    pub rank: usize,
}

/// Sample `k` distinct candidates and return the `index` of the winner:
/// constrained dominance first, then higher novelty, then a fair coin.
pub fn tournament_select<R: Rng + ?Sized>(pop: &[RankedIndividual], k: usize, rng: &mut R) -> Result<usize> {
    if pop.is_empty() {
        return Err(Error::Usage("tournament over an empty population".into()));
    }
    if k == 0 || k > pop.len() {
        return Err(Error::Usage(format!("tournament size {k} for population of {}", pop.len())));
    }
    let picks = sample(rng, pop.len(), k).into_vec();
    let mut best = &pop[picks[0]];
    let mut ties = 1u32;
    for &p in &picks[1..] {
        let c = &pop[p];
        if constrained_dominates(&c.objectives, &best.objectives, c.fitness, best.fitness) {
            best = c;
            ties = 1;
        } else if constrained_dominates(&best.objectives, &c.objectives, best.fitness, c.fitness) {
        } else if c.objectives.novelty > best.objectives.novelty {
            best = c;
            ties = 1;
        } else if c.objectives.novelty == best.objectives.novelty {
            ties += 1;
            if rng.random_range(0..ties) == 0 {
                best = c;
            }
        }
    }
    Ok(best.index)
}

/// Tournament on a minimized score (used with shared fitness). Returns a
/// position in `scores`.
pub fn tournament_select_min<R: Rng + ?Sized>(scores: &[f64], k: usize, rng: &mut R) -> Result<usize> {
    if scores.is_empty() {
        return Err(Error::Usage("tournament over an empty population".into()));
    }
    if k == 0 || k > scores.len() {
        return Err(Error::Usage(format!("tournament size {k} for population of {}", scores.len())));
    }
    let picks = sample(rng, scores.len(), k).into_vec();
    let mut best = picks[0];
    let mut ties = 1u32;
    for &p in &picks[1..] {
        if scores[p] < scores[best] {
            best = p;
            ties = 1;
        } else if scores[p] == scores[best] {
            ties += 1;
            if rng.random_range(0..ties) == 0 {
                best = p;
            }
        }
    }
    Ok(best)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum CompetitionMode {
    /// Neighborhood of the `n` nearest reference members.
    Local,
    /// Neighborhood is the whole reference set.
    Global,
}

/// A reference-set member: a genome and its (minimized) fitness.
#[derive(Debug, Clone, Copy)]
pub struct Reference<'a> {
    pub genome: &'a Genome,
    pub fitness: f64,
}

/// `(distance, fitness)` of every reference member, nearest first; equal
/// distances keep reference order.
pub fn neighbors(genome: &Genome, reference: &[Reference<'_>]) -> Result<Vec<(f64, f64)>> {
    let mut out = Vec::with_capacity(reference.len());
    for r in reference {
        if r.genome.role != genome.role {
            return Err(Error::Usage("reference set mixes roles".into()));
        }
        out.push((gene_edit_distance(&genome.genes, &r.genome.genes), r.fitness));
    }
    out.sort_by(|a, b| a.0.total_cmp(&b.0));
    Ok(out)
}

fn neighborhood(len: usize, n: usize, mode: CompetitionMode) -> usize {
    match mode {
        CompetitionMode::Local => n.min(len),
        CompetitionMode::Global => len,
    }
}

/// Mean of the `n` smallest distances (all of them if fewer); 0 when empty.
pub fn novelty_from_distances(distances: &[f64], n: usize) -> f64 {
    let mut d = distances.to_vec();
    d.sort_by(f64::total_cmp);
    let m = n.min(d.len());
    if m == 0 {
        return 0.0;
    }
    d[..m].iter().sum::<f64>() / m as f64
}

/// Count of neighborhood members with strictly worse (greater) fitness.
pub fn competition_from_neighbors(fitness: f64, sorted: &[(f64, f64)], n: usize, mode: CompetitionMode) -> u32 {
    let m = neighborhood(sorted.len(), n, mode);
    sorted[..m].iter().filter(|(_, f)| *f > fitness).count() as u32
}

/// Average genome distance to the `n` nearest reference members.
pub fn novelty(genome: &Genome, reference: &[Reference<'_>], n: usize) -> Result<f64> {
    if n == 0 {
        return Err(Error::Usage("neighborhood size must be at least 1".into()));
    }
    let d: Vec<f64> = neighbors(genome, reference)?.into_iter().map(|(d, _)| d).collect();
    Ok(novelty_from_distances(&d, n))
}

/// Number of neighbors this individual outperforms.
pub fn competition(
    genome: &Genome,
    fitness: f64,
    reference: &[Reference<'_>],
    n: usize,
    mode: CompetitionMode,
) -> Result<u32> {
    Ok(competition_from_neighbors(fitness, &neighbors(genome, reference)?, n, mode))
}

/// Both objectives in one pass. `Global` widens the neighborhood to the
/// whole reference set for novelty as well as competition.
pub fn objectives(
    genome: &Genome,
    fitness: f64,
    reference: &[Reference<'_>],
    n: usize,
    mode: CompetitionMode,
) -> Result<ObjectiveVector> {
    if n == 0 {
        return Err(Error::Usage("neighborhood size must be at least 1".into()));
    }
    let sorted = neighbors(genome, reference)?;
    let m = neighborhood(sorted.len(), n, mode);
    let novelty = if m == 0 { 0.0 } else { sorted[..m].iter().map(|(d, _)| d).sum::<f64>() / m as f64 };
    Ok(ObjectiveVector::new(novelty, competition_from_neighbors(fitness, &sorted, n, mode)))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArchiveEntry {
    pub genome: Genome,
    pub fitness: f64,
}

/// Append-only store of genome/fitness snapshots.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Archive {
    pub entries: Vec<ArchiveEntry>,
    pub probability: f64,
}

impl Archive {
    pub fn new(probability: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&probability) {
            return Err(Error::Config(format!("archive probability {probability} outside [0, 1]")));
        }
        Ok(Archive { entries: Vec::new(), probability })
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Independently snapshot each member with the archive's probability.
    pub fn update<R: Rng + ?Sized>(&mut self, population: &[Individual], rng: &mut R) {
        for ind in population {
            if rng.random_bool(self.probability) {
                self.entries.push(ArchiveEntry { genome: ind.genome.clone(), fitness: ind.fitness });
            }
        }
    }

    pub fn references(&self) -> impl Iterator<Item = Reference<'_>> {
        self.entries.iter().map(|e| Reference { genome: &e.genome, fitness: e.fitness })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Speciation {
    /// Species index of each member.
    pub assignment: Vec<usize>,
    /// Member index of each species' medoid.
    pub medoids: Vec<usize>,
    pub sizes: Vec<usize>,
    /// Raw fitness times species size (fitness is minimized).
    pub shared_fitness: Vec<f64>,
}

const KMEDOIDS_MAX_ITER: usize = 20;

/// Group genomes into exactly `n_species` clusters with k-medoids under
/// genome distance, then share fitness within each cluster.
#[allow(clippy::needless_range_loop)]
pub fn speciate<R: Rng + ?Sized>(
    genomes: &[&Genome],
    fitness: &[f64],
    n_species: usize,
    rng: &mut R,
) -> Result<Speciation> {
    let n = genomes.len();
    if n_species == 0 || n_species > n {
        return Err(Error::Usage(format!("{n_species} species for {n} individuals")));
    }
    if fitness.len() != n {
        return Err(Error::Usage("fitness and genome counts differ".into()));
    }
    let mut dist = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in 0..i {
            let d = gene_edit_distance(&genomes[i].genes, &genomes[j].genes);
            dist[i][j] = d;
            dist[j][i] = d;
        }
    }

    // farthest-first seeding from a random start
    let mut medoids = vec![rng.random_range(0..n)];
    while medoids.len() < n_species {
        let next = (0..n)
            .filter(|i| !medoids.contains(i))
            .map(|i| (i, medoids.iter().map(|&m| dist[i][m]).fold(f64::INFINITY, f64::min)))
            .fold(None, |best: Option<(usize, f64)>, (i, d)| match best {
                Some((_, bd)) if bd >= d => best,
                _ => Some((i, d)),
            })
            .unwrap()
            .0;
        medoids.push(next);
    }

    let assign = |medoids: &[usize]| -> Vec<usize> {
        (0..n)
            .map(|i| {
                if let Some(s) = medoids.iter().position(|&m| m == i) {
                    return s;
                }
                let mut best = 0;
                for s in 1..medoids.len() {
                    if dist[i][medoids[s]] < dist[i][medoids[best]] {
                        best = s;
                    }
                }
                best
            })
            .collect()
    };

    let mut assignment = assign(&medoids);
    for _ in 0..KMEDOIDS_MAX_ITER {
        let mut changed = false;
        for s in 0..n_species {
            let members: Vec<usize> = (0..n).filter(|&i| assignment[i] == s).collect();
            let cost = |c: usize| members.iter().map(|&m| dist[c][m]).sum::<f64>();
            let mut best = medoids[s];
            let mut best_cost = cost(best);
            for &c in &members {
                let cc = cost(c);
                if cc < best_cost {
                    best = c;
                    best_cost = cc;
                }
            }
            if best != medoids[s] {
                medoids[s] = best;
                changed = true;
            }
        }
        let next = assign(&medoids);
        if !changed && next == assignment {
            break;
        }
        assignment = next;
    }

    let mut sizes = vec![0usize; n_species];
    for &s in &assignment {
        sizes[s] += 1;
    }
    let shared_fitness = (0..n)
        .map(|i| {
            let f = fitness[i];
            if f >= WORST_FITNESS || !f.is_finite() {
                WORST_FITNESS
            } else {
                f * sizes[assignment[i]] as f64
            }
        })
        .collect();
    Ok(Speciation { assignment, medoids, sizes, shared_fitness })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::genome::{Gene, GeneKind, Role};
    use crate::nn::Activation;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn ov(n: f64, c: u32) -> ObjectiveVector {
        ObjectiveVector::new(n, c)
    }

    #[test]
    fn dominance_examples() {
        assert!(dominates(&ov(2.0, 2), &ov(1.0, 1)));
        assert!(!dominates(&ov(2.0, 1), &ov(1.0, 2)));
        assert!(!dominates(&ov(1.0, 2), &ov(2.0, 1)));
        assert!(!dominates(&ov(2.0, 2), &ov(2.0, 2)));
    }

    #[test]
    fn sort_examples() {
        let objs = [ov(2.0, 2), ov(1.0, 1), ov(2.0, 1), ov(1.0, 2)];
        assert_eq!(fast_nondominated_sort(&objs), vec![vec![0], vec![2, 3], vec![1]]);
        let same = [ov(1.0, 1); 4];
        assert_eq!(fast_nondominated_sort(&same), vec![vec![0, 1, 2, 3]]);
        let chain: Vec<_> = (0..5).map(|i| ov(i as f64, i)).collect();
        assert_eq!(fast_nondominated_sort(&chain), vec![vec![4], vec![3], vec![2], vec![1], vec![0]]);
    }

    #[test]
    fn constrained_examples() {
        // b unfeasible regardless of objectives
        assert!(constrained_dominates(&ov(0.0, 0), &ov(9.0, 9), 1.0, 2.5));
        assert!(!constrained_dominates(&ov(9.0, 9), &ov(0.0, 0), 2.5, 1.0));
        // both feasible: plain dominance
        assert!(constrained_dominates(&ov(2.0, 2), &ov(1.0, 1), 1.0, 1.5));
        assert!(!constrained_dominates(&ov(1.0, 1), &ov(2.0, 2), 1.0, 1.5));
        // equal everything
        assert!(!constrained_dominates(&ov(1.0, 1), &ov(1.0, 1), 1.0, 1.0));
        // sentinel and non-finite fitness are always unfeasible
        assert!(constrained_dominates(&ov(0.0, 0), &ov(5.0, 5), 3.0, WORST_FITNESS));
        assert!(constrained_dominates(&ov(0.0, 0), &ov(5.0, 5), 3.0, f64::NAN));
        assert!(constrained_dominates(&ov(0.0, 0), &ov(5.0, 5), 3.0, f64::INFINITY));
        // zero fitness is clamped, not a divide-by-zero style degeneracy
        assert!(!constrained_dominates(&ov(1.0, 1), &ov(1.0, 1), 0.0, 0.0));
    }

    #[test]
    fn cyclic_relation_still_places_everyone() {
        // 0 > 1 > 2 > 0
        let fronts = nondominated_sort_by(3, |i, j| (i + 1) % 3 == j);
        assert_eq!(fronts, vec![vec![0, 1, 2]]);
        let fronts = nondominated_sort_by(4, |i, j| i < 3 && (i + 1) % 3 == j && j != 3 || (i == 0 && j == 3));
        let total: usize = fronts.iter().map(Vec::len).sum();
        assert_eq!(total, 4);
    }

    fn ranked(index: usize, n: f64, c: u32, fitness: f64, rank: usize) -> RankedIndividual {
        RankedIndividual { index, objectives: ov(n, c), fitness, rank }
    }

    #[test]
    fn tournament_prefers_feasible() {
        let pop = [ranked(0, 0.1, 0, 1.0, 0), ranked(1, 5.0, 9, 10.0, 0)];
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        for _ in 0..200 {
            assert_eq!(tournament_select(&pop, 2, &mut rng).unwrap(), 0);
        }
    }

    #[test]
    fn tournament_ties_on_novelty_then_coin() {
        let pop = [ranked(0, 0.5, 1, 1.0, 0), ranked(1, 0.7, 0, 1.0, 0)];
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..100 {
            assert_eq!(tournament_select(&pop, 2, &mut rng).unwrap(), 1);
        }
        let same = [ranked(0, 0.5, 1, 1.0, 0), ranked(1, 0.5, 1, 1.0, 0)];
        let wins0 = (0..10_000).filter(|_| tournament_select(&same, 2, &mut rng).unwrap() == 0).count();
        assert!((4800..=5200).contains(&wins0), "{wins0}");
    }

    #[test]
    fn tournament_k1_is_uniform_and_errors() {
        let pop: Vec<_> = (0..4).map(|i| ranked(i, i as f64, i as u32, 1.0, 0)).collect();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let mut hits = [0usize; 4];
        for _ in 0..8000 {
            hits[tournament_select(&pop, 1, &mut rng).unwrap()] += 1;
        }
        assert!(hits.iter().all(|&h| (1800..=2200).contains(&h)), "{hits:?}");
        assert!(tournament_select(&[], 1, &mut rng).is_err());
        assert!(tournament_select(&pop, 5, &mut rng).is_err());
    }

    #[test]
    fn novelty_examples() {
        assert_eq!(novelty_from_distances(&[9.0, 1.0, 3.0, 2.0], 3), 2.0);
        assert_eq!(novelty_from_distances(&[0.4, 0.6], 5), 0.5);
        assert_eq!(novelty_from_distances(&[], 3), 0.0);
    }

    #[test]
    fn competition_examples() {
        let sorted = [(0.1, 0.5), (0.2, 2.0), (0.3, 3.0), (0.9, 9.0)];
        assert_eq!(competition_from_neighbors(1.0, &sorted, 3, CompetitionMode::Local), 2);
        assert_eq!(competition_from_neighbors(1.0, &sorted, 3, CompetitionMode::Global), 3);
        let nine: Vec<_> = (0..9).map(|i| (i as f64, 2.0 + i as f64)).collect();
        assert_eq!(competition_from_neighbors(1.0, &nine, 3, CompetitionMode::Global), 9);
        let tied = [(0.1, 1.0), (0.2, 1.0)];
        assert_eq!(competition_from_neighbors(1.0, &tied, 3, CompetitionMode::Local), 0);
        assert_eq!(competition_from_neighbors(1.0, &[], 3, CompetitionMode::Local), 0);
    }

    fn genome(uid: u64, kind: GeneKind, width: usize) -> Genome {
        Genome::new(Role::Discriminator, vec![Gene { uid, kind, activation: Activation::ReLU, width }])
    }

    #[test]
    fn duplicate_of_archive_has_zero_novelty() {
        let g = genome(1, GeneKind::Linear, 32);
        let copies: Vec<Genome> = (0..3).map(|i| genome(10 + i, GeneKind::Linear, 32)).collect();
        let other = genome(20, GeneKind::Conv2d, 64);
        let mut refs: Vec<Reference> = copies.iter().map(|c| Reference { genome: c, fitness: 1.0 }).collect();
        refs.push(Reference { genome: &other, fitness: 1.0 });
        assert_eq!(novelty(&g, &refs, 3).unwrap(), 0.0);
        assert!(novelty(&g, &refs, 4).unwrap() > 0.0);
        assert_eq!(novelty(&g, &[], 3).unwrap(), 0.0);
    }

    #[test]
    fn archive_probability_extremes() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let g = genome(1, GeneKind::Linear, 32);
        let net = crate::phenotype::build_phenotype(
            &g,
            &crate::phenotype::IoShape { sample_shape: vec![4], latent_dim: 2 },
            &mut rng,
        )
        .unwrap();
        let pop: Vec<Individual> = (0..10).map(|i| Individual::new(i, g.clone(), net.clone())).collect();
        let mut never = Archive::new(0.0).unwrap();
        never.update(&pop, &mut rng);
        assert!(never.is_empty());
        let mut always = Archive::new(1.0).unwrap();
        always.update(&pop, &mut rng);
        assert_eq!(always.len(), 10);
        assert!(Archive::new(1.5).is_err());
    }

    #[test]
    fn speciation_recovers_separated_clusters() {
        let mut gs = Vec::new();
        for i in 0..4 {
            gs.push(genome(i, GeneKind::Linear, 32 + i as usize));
        }
        for i in 4..7 {
            gs.push(genome(i, GeneKind::Conv2d, 32 + i as usize));
        }
        let refs: Vec<&Genome> = gs.iter().collect();
        let fitness = vec![1.0; 7];
        for seed in 0..20 {
            let s = speciate(&refs, &fitness, 2, &mut ChaCha8Rng::seed_from_u64(seed)).unwrap();
            let a = s.assignment[0];
            assert!(s.assignment[..4].iter().all(|&x| x == a));
            assert!(s.assignment[4..].iter().all(|&x| x != a));
            assert_eq!(s.shared_fitness[0], 4.0);
            assert_eq!(s.shared_fitness[6], 3.0);
        }
    }

    #[test]
    fn speciation_degenerate_and_errors() {
        let gs: Vec<Genome> = (0..5).map(|i| genome(i, GeneKind::Linear, 32)).collect();
        let refs: Vec<&Genome> = gs.iter().collect();
        let s = speciate(&refs, &[1.0; 5], 3, &mut ChaCha8Rng::seed_from_u64(0)).unwrap();
        assert_eq!(s.sizes.iter().sum::<usize>(), 5);
        assert_eq!(s.sizes.iter().filter(|&&n| n == 1).count(), 2);
        let again = speciate(&refs, &[1.0; 5], 3, &mut ChaCha8Rng::seed_from_u64(0)).unwrap();
        assert_eq!(s, again);

        let s = speciate(&refs, &[2.0; 5], 5, &mut ChaCha8Rng::seed_from_u64(0)).unwrap();
        assert_eq!(s.shared_fitness, vec![2.0; 5]);
        assert!(speciate(&refs, &[1.0; 5], 6, &mut ChaCha8Rng::seed_from_u64(0)).is_err());
    }
}
