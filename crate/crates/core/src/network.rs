// SPDX-License-Identifier: Apache-2.0

//! Small fully-connected feed-forward networks.
//!
//! A [`Network`] is a chain of dense layers, each computing
//! `activation(W x + b)`. Values are validated on construction (shape chaining
//! and finiteness) and are immutable afterwards; mutation operators build new
//! networks through [`Network::map_layers`].

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Linear,
    Relu,
    Sigmoid,
}

impl Activation {
    #[inline]
    pub fn apply(self, z: f64) -> f64 {
        match self {
            Activation::Linear => z,
            Activation::Relu => z.max(0.0),
            Activation::Sigmoid => 1.0 / (1.0 + (-z).exp()),
        }
    }
}

impl fmt::Display for Activation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Activation::Linear => "linear",
            Activation::Relu => "relu",
            Activation::Sigmoid => "sigmoid",
        })
    }
}

impl FromStr for Activation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "linear" => Ok(Activation::Linear),
            "relu" => Ok(Activation::Relu),
            "sigmoid" => Ok(Activation::Sigmoid),
            other => Err(Error::InvalidConfig(format!("unknown activation `{other}`"))),
        }
    }
}

/// Pre-activation of one neuron: `sum_i row[i] * x[i]`, accumulated left to
/// right, then `+ bias`.
///
/// Interval propagation in `verifier::ibp` repeats this exact accumulation
/// order with interval endpoints. Rounding is monotone, so the float bounds
/// enclose the float forward pass, not only the real-valued one.
#[inline]
pub(crate) fn pre_activation(row: &[f64], bias: f64, x: &[f64]) -> f64 {
    let mut acc = 0.0;
    for (w, xi) in row.iter().zip(x) {
        acc += w * xi;
    }
    acc + bias
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Layer {
    weights: Vec<Vec<f64>>,
    bias: Vec<f64>,
    activation: Activation,
}

impl Layer {
    /// Builds a layer; rows of `weights` are this layer's neurons.
    pub fn new(weights: Vec<Vec<f64>>, bias: Vec<f64>, activation: Activation) -> Result<Self> {
        let layer = Layer {
            weights,
            bias,
            activation,
        };
        layer.check(None)?;
        Ok(layer)
    }

    pub fn weights(&self) -> &[Vec<f64>] {
        &self.weights
    }

    pub fn bias(&self) -> &[f64] {
        &self.bias
    }

    pub fn activation(&self) -> Activation {
        self.activation
    }

    /// Neuron count.
    pub fn rows(&self) -> usize {
        self.weights.len()
    }

    /// Width of the previous layer.
    pub fn cols(&self) -> usize {
        self.weights.first().map_or(0, Vec::len)
    }

    pub(crate) fn weights_mut(&mut self) -> &mut Vec<Vec<f64>> {
        &mut self.weights
    }

    pub(crate) fn bias_mut(&mut self) -> &mut Vec<f64> {
        &mut self.bias
    }

    /// Applies the layer to `x`, which must have length `cols()`.
    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        self.weights
            .iter()
            .zip(&self.bias)
            .map(|(row, &b)| self.activation.apply(pre_activation(row, b, x)))
            .collect()
    }

    fn check(&self, index: Option<usize>) -> Result<()> {
        let at = index.map(|i| format!("layer {i}: ")).unwrap_or_default();
        if self.weights.is_empty() {
            return Err(Error::Shape(format!("{at}weight matrix has no rows")));
        }
        let cols = self.weights[0].len();
        if cols == 0 {
            return Err(Error::Shape(format!("{at}weight matrix has no columns")));
        }
        if let Some((r, row)) = self.weights.iter().enumerate().find(|(_, r)| r.len() != cols) {
            return Err(Error::Shape(format!(
                "{at}row {r} has {} columns, expected {cols}",
                row.len()
            )));
        }
        if self.bias.len() != self.weights.len() {
            return Err(Error::Shape(format!(
                "{at}bias length {} does not match {} weight rows",
                self.bias.len(),
                self.weights.len()
            )));
        }
        let finite = self.weights.iter().flatten().chain(&self.bias).all(|v| v.is_finite());
        if !finite {
            return Err(Error::Shape(format!("{at}non-finite parameter")));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Network {
    input_dim: usize,
    layers: Vec<Layer>,
    name: String,
}

impl Network {
    pub fn new(name: impl Into<String>, input_dim: usize, layers: Vec<Layer>) -> Result<Self> {
        let net = Network {
            input_dim,
            layers,
            name: name.into(),
        };
        net.validate()?;
        Ok(net)
    }

    pub fn input_dim(&self) -> usize {
        self.input_dim
    }

    pub fn output_dim(&self) -> usize {
        self.layers.last().map_or(0, Layer::rows)
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn with_name(mut self, name: impl Into<String>) -> Self {
        self.name = name.into();
        self
    }

    /// Total number of neurons over all layers.
    pub fn neuron_count(&self) -> usize {
        self.layers.iter().map(Layer::rows).sum()
    }

    /// Copies the network, edits its layers in place and re-validates.
    pub(crate) fn map_layers(&self, edit: impl FnOnce(&mut [Layer])) -> Result<Network> {
        let mut next = self.clone();
        edit(&mut next.layers);
        next.validate()?;
        Ok(next)
    }

    fn validate(&self) -> Result<()> {
        if self.input_dim == 0 {
            return Err(Error::Shape("input_dim must be positive".into()));
        }
        if self.layers.is_empty() {
            return Err(Error::Shape("network has no layers".into()));
        }
        let mut width = self.input_dim;
        for (i, layer) in self.layers.iter().enumerate() {
            layer.check(Some(i))?;
            if layer.cols() != width {
                return Err(Error::Shape(format!(
                    "layer {i} expects {} inputs but previous width is {width}",
                    layer.cols()
                )));
            }
            width = layer.rows();
        }
        Ok(())
    }

    pub fn forward(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.input_dim {
            return Err(Error::DimensionMismatch {
                expected: self.input_dim,
                actual: x.len(),
            });
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFiniteValue { layer: 0 });
        }
        let mut act = x.to_vec();
        for (i, layer) in self.layers.iter().enumerate() {
            act = layer.apply(&act);
            if act.iter().any(|v| !v.is_finite()) {
                return Err(Error::NonFiniteValue { layer: i });
            }
        }
        Ok(act)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("network serializes")
    }

    pub fn to_json_pretty(&self) -> String {
        serde_json::to_string_pretty(self).expect("network serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Self::from_json_at(text, "<model>")
    }

    fn from_json_at(text: &str, origin: &str) -> Result<Self> {
        let raw: RawNetwork = serde_json::from_str(text).map_err(|e| {
            Error::parse(format!("{origin}:{}:{}", e.line(), e.column()), e.to_string())
        })?;
        Network::new(raw.name, raw.input_dim, raw.layers)
    }

    pub fn from_value(value: serde_json::Value) -> Result<Self> {
        let raw: RawNetwork =
            serde_json::from_value(value).map_err(|e| Error::parse("<model>", e.to_string()))?;
        Network::new(raw.name, raw.input_dim, raw.layers)
    }
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawNetwork {
    input_dim: usize,
    layers: Vec<Layer>,
    #[serde(default)]
    name: String,
}

/// Index of the first maximal entry.
pub fn argmax_label(y: &[f64]) -> Result<usize> {
    if y.is_empty() {
        return Err(Error::EmptyVector);
    }
    let mut best = 0;
    for (i, &v) in y.iter().enumerate().skip(1) {
        if v > y[best] {
            best = i;
        }
    }
    Ok(best)
}

pub fn load_network(path: impl AsRef<Path>) -> Result<Network> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    Network::from_json_at(&text, &path.display().to_string())
}

pub fn save_network(net: &Network, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut text = net.to_json_pretty();
    text.push('\n');
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeedNetworkConfig {
    pub input_dim: usize,
    /// Width of every layer in order; the last entry is the output width.
    pub layer_sizes: Vec<usize>,
    pub hidden_activation: Activation,
    pub output_activation: Activation,
    /// Bias standard deviation; weights use `1/sqrt(fan_in)`.
    pub bias_std: f64,
}

impl SeedNetworkConfig {
    pub fn new(input_dim: usize, layer_sizes: Vec<usize>, hidden_activation: Activation) -> Self {
        SeedNetworkConfig {
            input_dim,
            layer_sizes,
            hidden_activation,
            output_activation: Activation::Linear,
            bias_std: 0.1,
        }
    }
}

/// Gaussian-initialised network, deterministic in `(config, rng_seed)`.
pub fn generate_seed_network(config: &SeedNetworkConfig, rng_seed: u64) -> Result<Network> {
    if config.input_dim == 0 {
        return Err(Error::InvalidConfig("input_dim must be positive".into()));
    }
    if config.layer_sizes.is_empty() {
        return Err(Error::InvalidConfig("at least one layer is required".into()));
    }
    if config.layer_sizes.contains(&0) {
        return Err(Error::InvalidConfig("layer widths must be positive".into()));
    }
    if !(config.bias_std.is_finite() && config.bias_std >= 0.0) {
        return Err(Error::InvalidConfig("bias_std must be finite and non-negative".into()));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
    let unit = Normal::new(0.0, 1.0).expect("unit normal");
    let mut fan_in = config.input_dim;
    let last = config.layer_sizes.len() - 1;
    let mut layers = Vec::with_capacity(config.layer_sizes.len());
    for (i, &width) in config.layer_sizes.iter().enumerate() {
        let scale = 1.0 / (fan_in as f64).sqrt();
        let weights = (0..width)
            .map(|_| (0..fan_in).map(|_| unit.sample(&mut rng) * scale).collect())
            .collect();
        let bias = (0..width).map(|_| unit.sample(&mut rng) * config.bias_std).collect();
        let activation = if i == last {
            config.output_activation
        } else {
            config.hidden_activation
        };
        layers.push(Layer::new(weights, bias, activation)?);
        fan_in = width;
    }
    Network::new(format!("seed-{rng_seed}"), config.input_dim, layers)
}
