//! Evolvable genotype: an ordered list of layer genes owned by a role.
//!
//! Text form, used for logs and `inspect-genome`:
//!
//! ```text
//! genome := role (';' gene)+
//! role   := "generator" | "discriminator" | "g" | "d"
//! gene   := kind ':' activation ':' width
//! kind   := "linear" | "conv2d" | "deconv2d"
//! activation := "relu" | "leakyrelu" | "elu" | "sigmoid" | "tanh"
//! width  := positive decimal integer
//! ```
//!
//! e.g. `generator;linear:relu:64;deconv2d:tanh:32`. Uids are not part of
//! the text form; parsed genomes receive fresh ones.

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::Activation;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Role {
    Generator,
    Discriminator,
}

impl Role {
    /// Gene kinds a genome of this role may contain.
    pub fn legal_kinds(self) -> [GeneKind; 2] {
        match self {
            Role::Generator => [GeneKind::Linear, GeneKind::Deconv2d],
            Role::Discriminator => [GeneKind::Linear, GeneKind::Conv2d],
        }
    }

    pub fn allows(self, kind: GeneKind) -> bool {
        self.legal_kinds().contains(&kind)
    }
}

impl fmt::Display for Role {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Role::Generator => "generator",
            Role::Discriminator => "discriminator",
        })
    }
}

impl FromStr for Role {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "generator" | "g" => Ok(Role::Generator),
            "discriminator" | "d" => Ok(Role::Discriminator),
            other => Err(Error::Usage(format!("unknown role '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum GeneKind {
    Linear,
    Conv2d,
    Deconv2d,
}

impl fmt::Display for GeneKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            GeneKind::Linear => "linear",
            GeneKind::Conv2d => "conv2d",
            GeneKind::Deconv2d => "deconv2d",
        })
    }
}

impl FromStr for GeneKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "linear" | "dense" => Ok(GeneKind::Linear),
            "conv2d" | "conv" => Ok(GeneKind::Conv2d),
            "deconv2d" | "deconv" => Ok(GeneKind::Deconv2d),
            other => Err(Error::Usage(format!("unknown gene kind '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Gene {
    pub uid: u64,
    pub kind: GeneKind,
    pub activation: Activation,
    /// Output features (linear) or output channels (convolutions).
    pub width: usize,
}

impl Gene {
    /// Same layer description, ignoring the uid.
    pub fn same_signature(&self, other: &Gene) -> bool {
        self.kind == other.kind && self.activation == other.activation && self.width == other.width
    }
}

/// Source of globally unique gene ids.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct UidAllocator {
    next: u64,
}

impl UidAllocator {
    pub fn new() -> Self {
        UidAllocator { next: 1 }
    }

    pub fn starting_at(next: u64) -> Self {
        UidAllocator { next }
    }

    pub fn next_uid(&mut self) -> u64 {
        let id = self.next;
        self.next += 1;
        id
    }

    pub fn peek(&self) -> u64 {
        self.next
    }
}

/// Bounds genes are drawn from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct GeneSpace {
    pub width_min: usize,
    pub width_max: usize,
    pub genome_limit: usize,
}

impl GeneSpace {
    pub fn validate(&self) -> Result<()> {
        if self.width_min == 0 || self.width_min > self.width_max {
            return Err(Error::Config(format!(
                "width range [{}, {}] is empty or starts at zero",
                self.width_min, self.width_max
            )));
        }
        if self.genome_limit < 1 {
            return Err(Error::Config("genome limit must be at least 1".into()));
        }
        Ok(())
    }

    pub fn random_width<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        rng.random_range(self.width_min..=self.width_max)
    }

    pub fn random_gene<R: Rng + ?Sized>(&self, role: Role, rng: &mut R, uids: &mut UidAllocator) -> Gene {
        let kinds = role.legal_kinds();
        let kind = kinds[rng.random_range(0..kinds.len())];
        let activation = Activation::EVOLVABLE[rng.random_range(0..Activation::EVOLVABLE.len())];
        let width = self.random_width(rng);
        Gene { uid: uids.next_uid(), kind, activation, width }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MutationRates {
    pub add: f64,
    pub remove: f64,
    pub change: f64,
}

impl MutationRates {
    pub const NONE: MutationRates = MutationRates { add: 0.0, remove: 0.0, change: 0.0 };
}

impl Default for MutationRates {
    fn default() -> Self {
        MutationRates { add: 0.3, remove: 0.1, change: 0.1 }
    }
}

/// Which operators actually modified the genome in one `mutate` call.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct MutationTrace {
    pub added: bool,
    pub removed: bool,
    pub changed: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Genome {
    pub role: Role,
    pub genes: Vec<Gene>,
}

impl Genome {
    pub fn new(role: Role, genes: Vec<Gene>) -> Self {
        Genome { role, genes }
    }

    /// A single random legal gene.
    pub fn random_minimal<R: Rng + ?Sized>(
        role: Role,
        space: &GeneSpace,
        rng: &mut R,
        uids: &mut UidAllocator,
    ) -> Self {
        Genome { role, genes: vec![space.random_gene(role, rng, uids)] }
    }

    pub fn len(&self) -> usize {
        self.genes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.genes.is_empty()
    }

    pub fn validate(&self, limit: usize) -> Result<()> {
        if self.genes.is_empty() || self.genes.len() > limit {
            return Err(Error::Config(format!(
                "genome length {} outside [1, {limit}]",
                self.genes.len()
            )));
        }
        if let Some(g) = self.genes.iter().find(|g| !self.role.allows(g.kind)) {
            return Err(Error::Config(format!("{} genome cannot hold a {} gene", self.role, g.kind)));
        }
        Ok(())
    }

    /// Structural equality: same role and gene sequence, uids ignored.
    pub fn same_architecture(&self, other: &Genome) -> bool {
        self.role == other.role
            && self.genes.len() == other.genes.len()
            && self.genes.iter().zip(&other.genes).all(|(a, b)| a.same_signature(b))
    }

    /// Replace every uid with a fresh one.
    pub fn with_fresh_uids(mut self, uids: &mut UidAllocator) -> Self {
        for g in &mut self.genes {
            g.uid = uids.next_uid();
        }
        self
    }
}

/// Apply add/remove/change, each rolled independently.
pub fn mutate<R: Rng + ?Sized>(
    genome: &Genome,
    rng: &mut R,
    rates: &MutationRates,
    space: &GeneSpace,
    uids: &mut UidAllocator,
) -> Genome {
    mutate_traced(genome, rng, rates, space, uids).0
}

pub fn mutate_traced<R: Rng + ?Sized>(
    genome: &Genome,
    rng: &mut R,
    rates: &MutationRates,
    space: &GeneSpace,
    uids: &mut UidAllocator,
) -> (Genome, MutationTrace) {
    let mut child = genome.clone();
    let mut trace = MutationTrace::default();

    if rng.random_bool(rates.add.clamp(0.0, 1.0)) && child.genes.len() < space.genome_limit {
        let gene = space.random_gene(child.role, rng, uids);
        let at = rng.random_range(0..=child.genes.len());
        child.genes.insert(at, gene);
        trace.added = true;
    }

    if rng.random_bool(rates.remove.clamp(0.0, 1.0)) && child.genes.len() > 1 {
        let at = rng.random_range(0..child.genes.len());
        child.genes.remove(at);
        trace.removed = true;
    }

    if rng.random_bool(rates.change.clamp(0.0, 1.0)) && !child.genes.is_empty() {
        let at = rng.random_range(0..child.genes.len());
        let gene = &mut child.genes[at];
        // 0: activation, 1: width, 2: both
        let what = rng.random_range(0..3);
        if what != 1 {
            gene.activation = Activation::EVOLVABLE[rng.random_range(0..Activation::EVOLVABLE.len())];
        }
        if what != 0 {
            let width = space.random_width(rng);
            if width != gene.width {
                gene.width = width;
                gene.uid = uids.next_uid();
            }
        }
        trace.changed = true;
    }

    (child, trace)
}

/// Cost of turning gene `a` into gene `b` in place.
pub fn substitution_cost(a: &Gene, b: &Gene) -> f64 {
    if a.kind != b.kind {
        1.0
    } else if a.activation != b.activation {
        0.5
    } else if a.width != b.width {
        0.25
    } else {
        0.0
    }
}

/// Normalized weighted edit distance between two genomes of the same role.
///
/// Insertions and deletions cost 1, substitutions follow
/// [`substitution_cost`], and the total is divided by the longer length.
pub fn genome_distance(a: &Genome, b: &Genome) -> Result<f64> {
    if a.role != b.role {
        return Err(Error::Usage(format!("distance between {} and {} genomes", a.role, b.role)));
    }
    Ok(gene_edit_distance(&a.genes, &b.genes))
}

pub(crate) fn gene_edit_distance(a: &[Gene], b: &[Gene]) -> f64 {
    let longest = a.len().max(b.len());
    if longest == 0 {
        return 0.0;
    }
    let mut prev: Vec<f64> = (0..=b.len()).map(|j| j as f64).collect();
    let mut cur = vec![0.0; b.len() + 1];
    for (i, ga) in a.iter().enumerate() {
        cur[0] = (i + 1) as f64;
        for (j, gb) in b.iter().enumerate() {
            let del = prev[j + 1] + 1.0;
            let ins = cur[j] + 1.0;
            let sub = prev[j] + substitution_cost(ga, gb);
            cur[j + 1] = del.min(ins).min(sub);
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    prev[b.len()] / longest as f64
}

impl fmt::Display for Genome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.role)?;
        for g in &self.genes {
            write!(f, ";{}:{}:{}", g.kind, g.activation, g.width)?;
        }
        Ok(())
    }
}

/// Parse the text form, assigning fresh uids.
pub fn parse_genome(text: &str, uids: &mut UidAllocator) -> Result<Genome> {
    let mut parts = text.trim().split(';');
    let role: Role = parts.next().unwrap_or("").parse()?;
    let mut genes = Vec::new();
    for (i, tok) in parts.enumerate() {
        let fields: Vec<&str> = tok.split(':').collect();
        if fields.len() != 3 {
            return Err(Error::Usage(format!("gene {i} '{tok}' is not kind:activation:width")));
        }
        let kind: GeneKind = fields[0].parse()?;
        let activation: Activation = fields[1].parse()?;
        if activation == Activation::None {
            return Err(Error::Usage(format!("gene {i} has no activation")));
        }
        let width: usize = fields[2]
            .trim()
            .parse()
            .map_err(|_| Error::Usage(format!("gene {i} width '{}' is not an integer", fields[2])))?;
        if width == 0 {
            return Err(Error::Usage(format!("gene {i} has zero width")));
        }
        if !role.allows(kind) {
            return Err(Error::Usage(format!("{role} genome cannot hold a {kind} gene")));
        }
        genes.push(Gene { uid: uids.next_uid(), kind, activation, width });
    }
    if genes.is_empty() {
        return Err(Error::Usage("genome has no genes".into()));
    }
    Ok(Genome { role, genes })
}
