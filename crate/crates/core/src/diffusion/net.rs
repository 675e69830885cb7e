use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng;

/// A noisy (or clean) image grid tagged with its diffusion timestep.
#[derive(Debug, Clone, PartialEq)]
pub struct LatentState {
    pub values: Vec<f64>,
    pub height: usize,
    pub width: usize,
    pub t: usize,
}

impl LatentState {
    pub fn new(values: Vec<f64>, height: usize, width: usize, t: usize) -> Result<Self> {
        if values.len() != height * width {
            return Err(Error::contract(format!(
                "grid {height}x{width} needs {} values, got {}",
                height * width,
                values.len()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::contract("latent values must be finite"));
        }
        Ok(Self {
            values,
            height,
            width,
            t,
        })
    }

    /// Same grid shape, different values and timestep.
    pub(crate) fn with(&self, values: Vec<f64>, t: usize) -> Self {
        Self {
            values,
            height: self.height,
            width: self.width,
            t,
        }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Silu,
    Tanh,
}

impl Activation {
    fn apply(self, z: f64) -> f64 {
        match self {
            Activation::Silu => z / (1.0 + (-z).exp()),
            Activation::Tanh => z.tanh(),
        }
    }

    fn derivative(self, z: f64) -> f64 {
        match self {
            Activation::Silu => {
                let s = 1.0 / (1.0 + (-z).exp());
                s * (1.0 + z * (1.0 - s))
            }
            Activation::Tanh => {
                let t = z.tanh();
                1.0 - t * t
            }
        }
    }
}

/// Dense layer, weights stored row-major as `outputs x inputs`.
#[derive(Debug, Clone, PartialEq)]
pub struct Layer {
    pub inputs: usize,
    pub outputs: usize,
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
}

impl Layer {
    pub fn zeros(inputs: usize, outputs: usize) -> Self {
        Self {
            inputs,
            outputs,
            weights: vec![0.0; inputs * outputs],
            bias: vec![0.0; outputs],
        }
    }

    pub fn param_count(&self) -> usize {
        self.weights.len() + self.bias.len()
    }

    fn affine(&self, input: &[f64], out: &mut Vec<f64>) {
        out.clear();
        out.extend(
            self.weights
                .chunks_exact(self.inputs)
                .zip(&self.bias)
                .map(|(row, b)| b + dot(row, input)),
        );
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Gradient arrays laid out exactly like the network parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamGrads {
    pub layers: Vec<Layer>,
}

impl ParamGrads {
    pub fn zeros_like(net: &DenoiserNet) -> Self {
        Self {
            layers: net
                .layers
                .iter()
                .map(|l| Layer::zeros(l.inputs, l.outputs))
                .collect(),
        }
    }

    pub fn scale(&mut self, factor: f64) {
        for l in &mut self.layers {
            l.weights.iter_mut().chain(l.bias.iter_mut()).for_each(|g| *g *= factor);
        }
    }

    pub fn add_assign(&mut self, other: &ParamGrads) {
        for (a, b) in self.layers.iter_mut().zip(&other.layers) {
            a.weights.iter_mut().zip(&b.weights).for_each(|(x, y)| *x += y);
            a.bias.iter_mut().zip(&b.bias).for_each(|(x, y)| *x += y);
        }
    }

    /// L2 norm of each layer's (weights, bias) gradient.
    pub fn layer_norms(&self) -> Vec<f64> {
        self.layers
            .iter()
            .map(|l| {
                l.weights
                    .iter()
                    .chain(&l.bias)
                    .map(|g| g * g)
                    .sum::<f64>()
                    .sqrt()
            })
            .collect()
    }

    pub fn flatten(&self) -> Vec<f64> {
        flatten_layers(&self.layers)
    }
}

fn flatten_layers(layers: &[Layer]) -> Vec<f64> {
    layers
        .iter()
        .flat_map(|l| l.weights.iter().chain(&l.bias).copied())
        .collect()
}

/// Fully connected epsilon-prediction network.
///
/// Input is the flattened image followed by a sinusoidal embedding of `t / T`;
/// hidden layers use `activation`, the output layer is linear and has one unit
/// per pixel.
#[derive(Debug, Clone, PartialEq)]
pub struct DenoiserNet {
    pub pixels: usize,
    pub embed_width: usize,
    pub horizon: usize,
    pub activation: Activation,
    pub layers: Vec<Layer>,
}

/// Intermediate values kept from a forward pass for the backward pass.
#[derive(Debug, Clone)]
pub struct ForwardCache {
    /// `inputs[l]` is the input to layer `l`.
    inputs: Vec<Vec<f64>>,
    /// Pre-activations of the hidden layers.
    pre: Vec<Vec<f64>>,
    pub output: Vec<f64>,
}

impl DenoiserNet {
    /// Random initialisation with weights ~ N(0, 1/fan_in), zero biases. All
    /// parameters are rounded to f32 so that checkpoints store them exactly.
    pub fn new(
        pixels: usize,
        embed_width: usize,
        hidden: &[usize],
        activation: Activation,
        horizon: usize,
        seed: u64,
    ) -> Self {
        let mut net = Self::zeros(pixels, embed_width, hidden, activation, horizon);
        let mut rng = rng::stream(seed, rng::TAG_INIT);
        for layer in &mut net.layers {
            let scale = (1.0 / layer.inputs as f64).sqrt();
            let draws = rng::normal_vec(&mut rng, layer.weights.len());
            for (w, z) in layer.weights.iter_mut().zip(draws) {
                *w = ((z * scale) as f32) as f64;
            }
        }
        net
    }

    pub fn zeros(
        pixels: usize,
        embed_width: usize,
        hidden: &[usize],
        activation: Activation,
        horizon: usize,
    ) -> Self {
        let mut dims = vec![pixels + embed_width];
        dims.extend_from_slice(hidden);
        dims.push(pixels);
        let layers = dims.windows(2).map(|w| Layer::zeros(w[0], w[1])).collect();
        Self {
            pixels,
            embed_width,
            horizon,
            activation,
            layers,
        }
    }

    /// Builds a network from explicit layers, validating the shape chain.
    pub fn from_layers(
        pixels: usize,
        embed_width: usize,
        horizon: usize,
        activation: Activation,
        layers: Vec<Layer>,
    ) -> Result<Self> {
        let net = Self {
            pixels,
            embed_width,
            horizon,
            activation,
            layers,
        };
        net.validate()?;
        Ok(net)
    }

    pub fn validate(&self) -> Result<()> {
        let dims = self.layer_dims();
        if self.layers.is_empty() {
            return Err(Error::contract("network needs at least one layer"));
        }
        if dims[0] != self.pixels + self.embed_width || *dims.last().unwrap() != self.pixels {
            return Err(Error::contract(format!(
                "layer dims {dims:?} incompatible with {} pixels + {} embedding",
                self.pixels, self.embed_width
            )));
        }
        for (i, pair) in self.layers.windows(2).enumerate() {
            if pair[0].outputs != pair[1].inputs {
                return Err(Error::contract(format!("layer {i} output does not feed layer {}", i + 1)));
            }
        }
        for l in &self.layers {
            if l.weights.len() != l.inputs * l.outputs || l.bias.len() != l.outputs {
                return Err(Error::contract("layer parameter arrays have wrong length"));
            }
        }
        if self.params().iter().any(|p| !p.is_finite()) {
            return Err(Error::contract("network parameters must be finite"));
        }
        Ok(())
    }

    pub fn layer_dims(&self) -> Vec<usize> {
        let mut dims: Vec<usize> = self.layers.first().map(|l| vec![l.inputs]).unwrap_or_default();
        dims.extend(self.layers.iter().map(|l| l.outputs));
        dims
    }

    pub fn num_layers(&self) -> usize {
        self.layers.len()
    }

    pub fn param_count(&self) -> usize {
        self.layers.iter().map(Layer::param_count).sum()
    }

    /// Parameters in declaration order: per layer, weights row-major then bias.
    pub fn params(&self) -> Vec<f64> {
        flatten_layers(&self.layers)
    }

    pub fn set_params(&mut self, flat: &[f64]) -> Result<()> {
        if flat.len() != self.param_count() {
            return Err(Error::contract(format!(
                "expected {} parameters, got {}",
                self.param_count(),
                flat.len()
            )));
        }
        let mut it = flat.iter().copied();
        for l in &mut self.layers {
            l.weights.iter_mut().chain(l.bias.iter_mut()).for_each(|p| *p = it.next().unwrap());
        }
        Ok(())
    }

    /// Sinusoidal features of `t / T`, sines first then cosines.
    pub fn timestep_embedding(&self, t: usize) -> Vec<f64> {
        let half = self.embed_width / 2;
        let pos = 1000.0 * t as f64 / self.horizon.max(1) as f64;
        let mut emb = Vec::with_capacity(self.embed_width);
        let freq = |i: usize| (-(10000f64).ln() * i as f64 / half.max(1) as f64).exp();
        emb.extend((0..half).map(|i| (pos * freq(i)).sin()));
        emb.extend((0..half).map(|i| (pos * freq(i)).cos()));
        if self.embed_width % 2 == 1 {
            emb.push((pos / 10000f64).sin());
        }
        emb
    }

    fn input_vector(&self, x: &[f64], t: usize) -> Vec<f64> {
        let mut input = Vec::with_capacity(self.pixels + self.embed_width);
        input.extend_from_slice(x);
        input.extend(self.timestep_embedding(t));
        input
    }

    /// Forward pass retaining the intermediates needed for backpropagation.
    pub fn forward_cached(&self, x: &[f64], t: usize) -> ForwardCache {
        debug_assert_eq!(x.len(), self.pixels);
        let last = self.layers.len() - 1;
        let mut inputs = Vec::with_capacity(self.layers.len());
        let mut pre = Vec::with_capacity(last);
        let mut current = self.input_vector(x, t);
        let mut z = Vec::new();
        for (i, layer) in self.layers.iter().enumerate() {
            layer.affine(&current, &mut z);
            inputs.push(std::mem::take(&mut current));
            if i == last {
                break;
            }
            current = z.iter().map(|&v| self.activation.apply(v)).collect();
            pre.push(std::mem::take(&mut z));
        }
        ForwardCache {
            inputs,
            pre,
            output: z,
        }
    }

    /// Predicted noise for a grid at its timestep.
    pub fn predict_eps(&self, x: &LatentState) -> Result<Vec<f64>> {
        if x.len() != self.pixels {
            return Err(Error::contract(format!(
                "network expects {} pixels, got {}",
                self.pixels,
                x.len()
            )));
        }
        if x.values.iter().any(|v| !v.is_finite()) {
            return Err(Error::contract("input must be finite"));
        }
        Ok(self.eps(&x.values, x.t))
    }

    /// Unchecked forward pass.
    pub(crate) fn eps(&self, x: &[f64], t: usize) -> Vec<f64> {
        let last = self.layers.len() - 1;
        let mut current = self.input_vector(x, t);
        let mut z = Vec::new();
        for (i, layer) in self.layers.iter().enumerate() {
            layer.affine(&current, &mut z);
            if i == last {
                break;
            }
            current.clear();
            current.extend(z.iter().map(|&v| self.activation.apply(v)));
        }
        z
    }

    /// Accumulates `d loss / d params` into `grads` given `d loss / d output`.
    pub fn backward(&self, cache: &ForwardCache, d_output: &[f64], grads: &mut ParamGrads) {
        let mut delta = d_output.to_vec();
        for i in (0..self.layers.len()).rev() {
            let layer = &self.layers[i];
            let input = &cache.inputs[i];
            let g = &mut grads.layers[i];
            for (r, d) in delta.iter().enumerate() {
                g.bias[r] += d;
                if *d != 0.0 {
                    let row = &mut g.weights[r * layer.inputs..(r + 1) * layer.inputs];
                    row.iter_mut().zip(input).for_each(|(w, x)| *w += d * x);
                }
            }
            if i == 0 {
                break;
            }
            let mut next = vec![0.0; layer.inputs];
            for (r, d) in delta.iter().enumerate() {
                if *d != 0.0 {
                    let row = &layer.weights[r * layer.inputs..(r + 1) * layer.inputs];
                    next.iter_mut().zip(row).for_each(|(n, w)| *n += d * w);
                }
            }
            let pre = &cache.pre[i - 1];
            delta = next
                .iter()
                .zip(pre)
                .map(|(n, z)| n * self.activation.derivative(*z))
                .collect();
        }
    }
}
