use serde::{Deserialize, Serialize};

use super::adam::{adam_step, AdamState};
use super::layer::{LayerGrads, LayerParams};
use super::tensor::Tensor;
use crate::error::{Error, Result};

/// Optimizer moments for one layer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayerOptim {
    pub weights: AdamState,
    pub bias: AdamState,
}

impl LayerOptim {
    pub fn fresh(layer: &LayerParams) -> Self {
        LayerOptim {
            weights: AdamState::new(layer.weights.len()),
            bias: AdamState::new(layer.bias.len()),
        }
    }
}

/// A sequential network together with its optimizer state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainedNetwork {
    pub layers: Vec<LayerParams>,
    pub optim: Vec<LayerOptim>,
    /// Per-sample shape the final layer's output is reshaped into.
    pub output_shape: Vec<usize>,
}

/// Values recorded by [`TrainedNetwork::forward`] for the backward pass.
#[derive(Debug, Clone, Default)]
pub struct ForwardCache {
    inputs: Vec<Tensor>,
    pre: Vec<Tensor>,
    post: Vec<Tensor>,
}

impl ForwardCache {
    pub fn is_empty(&self) -> bool {
        self.inputs.is_empty()
    }

    /// Pre-activation values of the last layer.
    pub fn logits(&self) -> Option<&Tensor> {
        self.pre.last()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NetworkGrads {
    pub layers: Vec<LayerGrads>,
    pub input: Tensor,
}

impl TrainedNetwork {
    pub fn new(layers: Vec<LayerParams>, output_shape: Vec<usize>) -> Result<Self> {
        if layers.is_empty() {
            return Err(Error::Config("network has no layers".into()));
        }
        let last_len: usize = layers.last().unwrap().out_shape()?.iter().product();
        if last_len != output_shape.iter().product::<usize>() {
            return Err(Error::Config(format!(
                "final layer yields {last_len} values but output shape is {output_shape:?}"
            )));
        }
        for (i, pair) in layers.windows(2).enumerate() {
            let produced: usize = pair[0].out_shape()?.iter().product();
            if produced != pair[1].spec.in_len() {
                return Err(Error::Config(format!(
                    "layer {} expects {} inputs but layer {i} yields {produced}",
                    i + 1,
                    pair[1].spec.in_len()
                )));
            }
        }
        let optim = layers.iter().map(LayerOptim::fresh).collect();
        Ok(TrainedNetwork { layers, optim, output_shape })
    }

    pub fn input_len(&self) -> usize {
        self.layers[0].spec.in_len()
    }

    pub fn input_shape(&self) -> &[usize] {
        &self.layers[0].spec.in_shape
    }

    pub fn param_count(&self) -> usize {
        self.layers.iter().map(|l| l.weights.len() + l.bias.len()).sum()
    }

    /// Run the network on a batch, returning the output and the cache
    /// needed by [`TrainedNetwork::backward`].
    pub fn forward(&self, input: &Tensor) -> Result<(Tensor, ForwardCache)> {
        let mut cache = ForwardCache::default();
        let out = self.run(input, Some(&mut cache))?;
        Ok((out, cache))
    }

    /// Forward pass without keeping intermediates.
    pub fn predict(&self, input: &Tensor) -> Result<Tensor> {
        self.run(input, None)
    }

    fn run(&self, input: &Tensor, mut cache: Option<&mut ForwardCache>) -> Result<Tensor> {
        let n = input.batch();
        let mut x = input.clone();
        for (i, layer) in self.layers.iter().enumerate() {
            if x.row_len() != layer.spec.in_len() {
                return Err(Error::Config(format!(
                    "layer {i}: expected {} input values per sample, got {}",
                    layer.spec.in_len(),
                    x.row_len()
                )));
            }
            let z = layer.affine(&x).map_err(|e| Error::Config(format!("layer {i}: {e}")))?;
            let act = layer.spec.activation;
            let mut a = z.clone();
            for v in a.data_mut() {
                *v = act.eval(*v);
            }
            match cache.as_deref_mut() {
                Some(c) => {
                    c.inputs.push(x);
                    c.pre.push(z);
                    c.post.push(a.clone());
                }
                None => drop(z),
            }
            x = a;
        }
        let mut shape = vec![n];
        shape.extend_from_slice(&self.output_shape);
        x.reshape(shape)
    }

    fn check_cache(&self, cache: &ForwardCache) -> Result<()> {
        if cache.is_empty() {
            return Err(Error::Usage("backward called without a cached forward pass".into()));
        }
        if cache.inputs.len() != self.layers.len() {
            return Err(Error::Usage(format!(
                "cache holds {} layers, network has {}",
                cache.inputs.len(),
                self.layers.len()
            )));
        }
        Ok(())
    }

    /// Gradients of every parameter and of the input, given the gradient
    /// of some scalar loss w.r.t. the network output.
    pub fn backward(&self, cache: &ForwardCache, output_grad: &Tensor) -> Result<NetworkGrads> {
        self.check_cache(cache)?;
        let last = self.layers.len() - 1;
        let post = &cache.post[last];
        if output_grad.len() != post.len() {
            return Err(Error::Usage(format!(
                "output gradient has {} values, forward output had {}",
                output_grad.len(),
                post.len()
            )));
        }
        let act = self.layers[last].spec.activation;
        let mut gz = Tensor::zeros(post.shape().to_vec());
        for (((g, &z), &a), &go) in gz
            .data_mut()
            .iter_mut()
            .zip(cache.pre[last].data())
            .zip(post.data())
            .zip(output_grad.data())
        {
            *g = go * act.derivative(z, a);
        }
        self.backward_from(cache, gz, last)
    }

    /// Like [`TrainedNetwork::backward`] but starting from the gradient
    /// w.r.t. the final layer's pre-activation, skipping its nonlinearity.
    pub fn backward_logits(&self, cache: &ForwardCache, logit_grad: &Tensor) -> Result<NetworkGrads> {
        self.check_cache(cache)?;
        let last = self.layers.len() - 1;
        let pre = &cache.pre[last];
        if logit_grad.len() != pre.len() {
            return Err(Error::Usage(format!(
                "logit gradient has {} values, forward logits had {}",
                logit_grad.len(),
                pre.len()
            )));
        }
        let gz = logit_grad.clone().reshape(pre.shape().to_vec())?;
        self.backward_from(cache, gz, last)
    }

    fn backward_from(&self, cache: &ForwardCache, mut gz: Tensor, last: usize) -> Result<NetworkGrads> {
        let mut layer_grads = Vec::with_capacity(self.layers.len());
        let mut grad_in;
        let mut i = last;
        loop {
            let (g, gx) = self.layers[i].affine_backward(&cache.inputs[i], &gz)?;
            layer_grads.push(g);
            grad_in = gx;
            if i == 0 {
                break;
            }
            i -= 1;
            let act = self.layers[i].spec.activation;
            let mut next = Tensor::zeros(cache.post[i].shape().to_vec());
            for (((g, &z), &a), &go) in next
                .data_mut()
                .iter_mut()
                .zip(cache.pre[i].data())
                .zip(cache.post[i].data())
                .zip(grad_in.data())
            {
                *g = go * act.derivative(z, a);
            }
            gz = next;
        }
        layer_grads.reverse();
        Ok(NetworkGrads { layers: layer_grads, input: grad_in })
    }

    /// Apply one Adam step to every layer. Non-finite gradients anywhere
    /// abort the whole step before any parameter changes.
    pub fn apply_gradients(&mut self, grads: &NetworkGrads, learning_rate: f64) -> Result<()> {
        if grads.layers.len() != self.layers.len() {
            return Err(Error::Usage("gradient count does not match layer count".into()));
        }
        for (i, g) in grads.layers.iter().enumerate() {
            if g.weights.iter().chain(&g.bias).any(|v| !v.is_finite()) {
                return Err(Error::Divergence { layer: i, reason: "non-finite gradient".into() });
            }
        }
        for (i, ((layer, opt), g)) in
            self.layers.iter_mut().zip(&mut self.optim).zip(&grads.layers).enumerate()
        {
            adam_step(layer.weights.data_mut(), &g.weights, &mut opt.weights, learning_rate, i)?;
            adam_step(layer.bias.data_mut(), &g.bias, &mut opt.bias, learning_rate, i)?;
        }
        Ok(())
    }

    pub fn all_finite(&self) -> bool {
        self.layers.iter().all(|l| l.weights.all_finite() && l.bias.all_finite())
    }
}
