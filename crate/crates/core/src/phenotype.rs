//! Mapping genomes onto networks, and carrying trained weights from a
//! parent to its mutated child.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::genome::{GeneKind, Genome, Role};
use crate::nn::{init_params, Activation, LayerHyper, LayerKind, LayerOptim, LayerSpec, TrainedNetwork};

/// Dataset sample shape and generator latent size.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct IoShape {
    /// Per-sample shape: `[c, h, w]` for images or `[d]` for flat vectors.
    pub sample_shape: Vec<usize>,
    pub latent_dim: usize,
}

impl IoShape {
    pub fn sample_len(&self) -> usize {
        self.sample_shape.iter().product()
    }

    /// Largest spatial extent a generator may reach before its output head.
    fn spatial_limit(&self) -> (usize, usize) {
        match self.sample_shape.as_slice() {
            [_, h, w] => (*h, *w),
            _ => (1, 1),
        }
    }
}

/// Identifies which gene a layer came from; the fixed output head has no gene.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum LayerKey {
    Gene(u64),
    Head,
}

pub fn layer_keys(genome: &Genome) -> Vec<LayerKey> {
    genome
        .genes
        .iter()
        .map(|g| LayerKey::Gene(g.uid))
        .chain(std::iter::once(LayerKey::Head))
        .collect()
}

/// Infer every layer's geometry left to right. Discriminators end in a
/// single-unit sigmoid head; generators end in a tanh projection onto the
/// sample shape.
pub fn infer_layers(genome: &Genome, io: &IoShape) -> Result<Vec<LayerSpec>> {
    if genome.genes.is_empty() {
        return Err(Error::InfeasiblePhenotype("empty genome".into()));
    }
    if io.sample_len() == 0 || io.latent_dim == 0 {
        return Err(Error::Config(format!("degenerate io shape {io:?}")));
    }
    let mut cur = match genome.role {
        Role::Discriminator => io.sample_shape.clone(),
        Role::Generator => vec![io.latent_dim],
    };
    let mut specs = Vec::with_capacity(genome.genes.len() + 1);
    for (i, gene) in genome.genes.iter().enumerate() {
        if !genome.role.allows(gene.kind) {
            return Err(Error::InfeasiblePhenotype(format!(
                "gene {i}: {} not allowed in a {}",
                gene.kind, genome.role
            )));
        }
        let (kind, hyper) = match gene.kind {
            GeneKind::Linear => (LayerKind::Dense, LayerHyper::dense(gene.width)),
            GeneKind::Conv2d => (LayerKind::Conv2d, LayerHyper::conv(gene.width)),
            GeneKind::Deconv2d => (LayerKind::Deconv2d, LayerHyper::deconv(gene.width)),
        };
        let spec = LayerSpec::new(kind, cur.clone(), hyper, gene.activation);
        let out = spec
            .out_shape()
            .map_err(|e| Error::InfeasiblePhenotype(format!("gene {i}: {e}")))?;
        if kind == LayerKind::Deconv2d {
            let (lh, lw) = io.spatial_limit();
            if out[1] > lh || out[2] > lw {
                return Err(Error::InfeasiblePhenotype(format!(
                    "gene {i}: transposed convolution grows to {}x{}, beyond the {lh}x{lw} sample",
                    out[1], out[2]
                )));
            }
        }
        specs.push(spec);
        cur = out;
    }
    let head = match genome.role {
        Role::Discriminator => LayerSpec::new(LayerKind::Dense, cur, LayerHyper::dense(1), Activation::Sigmoid),
        Role::Generator => {
            LayerSpec::new(LayerKind::Dense, cur, LayerHyper::dense(io.sample_len()), Activation::Tanh)
        }
    };
    specs.push(head);
    Ok(specs)
}

fn output_shape(role: Role, io: &IoShape) -> Vec<usize> {
    match role {
        Role::Discriminator => vec![1],
        Role::Generator => io.sample_shape.clone(),
    }
}

/// Build a freshly initialized network for `genome`.
pub fn build_phenotype<R: Rng + ?Sized>(genome: &Genome, io: &IoShape, rng: &mut R) -> Result<TrainedNetwork> {
    let layers = infer_layers(genome, io)?
        .into_iter()
        .map(|spec| init_params(spec, rng))
        .collect::<Result<Vec<_>>>()?;
    TrainedNetwork::new(layers, output_shape(genome.role, io))
}

/// Build the network for `child_genome`, copying weights, bias and Adam
/// state from `parent_network` (built from `parent_genome`) for every layer
/// whose gene uid survives and whose geometry is unchanged.
pub fn transfer_weights<R: Rng + ?Sized>(
    parent_genome: &Genome,
    parent_network: &TrainedNetwork,
    child_genome: &Genome,
    io: &IoShape,
    rng: &mut R,
) -> Result<TrainedNetwork> {
    let specs = infer_layers(child_genome, io)?;
    let parent_keys = layer_keys(parent_genome);
    let child_keys = layer_keys(child_genome);
    let mut layers = Vec::with_capacity(specs.len());
    let mut optim = Vec::with_capacity(specs.len());
    for (key, spec) in child_keys.iter().zip(specs) {
        let inherited = parent_keys
            .iter()
            .position(|k| k == key)
            .map(|i| (&parent_network.layers[i], &parent_network.optim[i]))
            .filter(|(p, _)| p.spec.same_geometry(&spec));
        match inherited {
            Some((p, o)) => {
                let mut layer = p.clone();
                layer.spec.activation = spec.activation;
                layers.push(layer);
                optim.push(o.clone());
            }
            None => {
                let layer = init_params(spec, rng)?;
                optim.push(LayerOptim::fresh(&layer));
                layers.push(layer);
            }
        }
    }
    let mut net = TrainedNetwork::new(layers, output_shape(child_genome.role, io))?;
    net.optim = optim;
    Ok(net)
}

/// One member of a coevolving population.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Individual {
    pub id: u64,
    pub genome: Genome,
    pub network: TrainedNetwork,
    /// Minimized: discriminator loss or generator FID.
    pub fitness: f64,
    pub novelty: f64,
    pub competition: f64,
    pub trained_samples: u64,
    /// Generations survived.
    pub age: u32,
    /// Set when training or evaluation produced non-finite values.
    pub failed: bool,
}

impl Individual {
    pub fn new(id: u64, genome: Genome, network: TrainedNetwork) -> Self {
        Individual {
            id,
            genome,
            network,
            fitness: f64::MAX,
            novelty: 0.0,
            competition: 0.0,
            trained_samples: 0,
            age: 0,
            failed: false,
        }
    }

    pub fn role(&self) -> Role {
        self.genome.role
    }
}
