//! Declarative layer stacks with static shape checking.

use rand::{Rng, RngCore};

use super::conv::same_padding;
use super::graph::{Graph, NodeId};
use super::optim::maxnorm_project;
use super::params::{ParamId, ParamStore};
use super::scalar::Scalar;
use super::tensor::Tensor;
use crate::error::{Error, Result};

/// Per-call forward state: training flag and the randomness source used by
/// dropout and phase shuffle.
pub struct Mode<'a> {
    pub training: bool,
    pub rng: &'a mut dyn RngCore,
}

impl<'a> Mode<'a> {
    pub fn train(rng: &'a mut dyn RngCore) -> Self {
        Self { training: true, rng }
    }

    pub fn eval(rng: &'a mut dyn RngCore) -> Self {
        Self { training: false, rng }
    }
}

/// Anything that maps a batch node to an output node on a graph.
pub trait Module<T: Scalar> {
    fn forward(&self, g: &mut Graph<T>, x: NodeId, mode: &mut Mode<'_>) -> Result<NodeId>;
}

#[derive(Debug, Clone, PartialEq)]
pub enum LayerSpec {
    /// `y = xW + b` on rank-1 samples; `max_norm` bounds each unit's incoming weights.
    Dense { units: usize, max_norm: Option<f64> },
    /// Strided "same"-padded 1-D convolution on `[len, channels]` samples.
    Conv1d { filters: usize, kernel: usize, stride: usize },
    /// Transposed 1-D convolution, output length `len · stride`.
    TConv1d { filters: usize, kernel: usize, stride: usize },
    /// Stride-1 "same" 2-D convolution on `[h, w, channels]` samples.
    Conv2d { filters: usize, kernel: (usize, usize) },
    MaxPool2d { pool: (usize, usize) },
    Relu,
    LeakyRelu { slope: f64 },
    Tanh,
    Softmax,
    Dropout { rate: f64 },
    Reshape { shape: Vec<usize> },
    PhaseShuffle { n: usize },
}

impl LayerSpec {
    /// Display name used for numbered layer labels (`Up_Conv_3`, ...).
    pub fn label(&self) -> &'static str {
        match self {
            LayerSpec::Dense { .. } => "Dense",
            LayerSpec::Conv1d { .. } | LayerSpec::Conv2d { .. } => "Conv",
            LayerSpec::TConv1d { .. } => "Up_Conv",
            LayerSpec::MaxPool2d { .. } => "MaxPool",
            LayerSpec::Relu => "ReLU",
            LayerSpec::LeakyRelu { .. } => "Leaky_ReLU",
            LayerSpec::Tanh => "Tanh",
            LayerSpec::Softmax => "Softmax",
            LayerSpec::Dropout { .. } => "Dropout",
            LayerSpec::Reshape { .. } => "Reshape",
            LayerSpec::PhaseShuffle { .. } => "Phase_Shuffle",
        }
    }

    /// Per-sample output shape, or an error if the layer cannot accept `input`.
    pub fn output_shape(&self, input: &[usize]) -> Result<Vec<usize>> {
        let bad = |why: &str| Err(Error::Dimension(format!("{} on input {input:?}: {why}", self.label())));
        match self {
            LayerSpec::Dense { units, max_norm } => {
                if input.len() != 1 || *units == 0 {
                    return bad("expects a flat input and at least one unit");
                }
                if matches!(max_norm, Some(c) if !(*c > 0.0)) {
                    return bad("max-norm bound must be positive");
                }
                Ok(vec![*units])
            }
            LayerSpec::Conv1d { filters, kernel, stride } => {
                if input.len() != 2 || *filters == 0 || *kernel == 0 || *stride == 0 || input[0] == 0 {
                    return bad("expects [len, channels] and positive geometry");
                }
                Ok(vec![input[0].div_ceil(*stride), *filters])
            }
            LayerSpec::TConv1d { filters, kernel, stride } => {
                if input.len() != 2 || *filters == 0 || *kernel == 0 || *stride == 0 {
                    return bad("expects [len, channels] and positive geometry");
                }
                Ok(vec![input[0] * stride, *filters])
            }
            LayerSpec::Conv2d { filters, kernel } => {
                if input.len() != 3 || *filters == 0 || kernel.0 == 0 || kernel.1 == 0 {
                    return bad("expects [h, w, channels] and positive geometry");
                }
                Ok(vec![input[0], input[1], *filters])
            }
            LayerSpec::MaxPool2d { pool } => {
                if input.len() != 3 || pool.0 == 0 || pool.1 == 0 || input[0] < pool.0 || input[1] < pool.1 {
                    return bad("pool window larger than input");
                }
                Ok(vec![input[0] / pool.0, input[1] / pool.1, input[2]])
            }
            LayerSpec::Relu | LayerSpec::Tanh => Ok(input.to_vec()),
            LayerSpec::LeakyRelu { slope } => {
                if !slope.is_finite() {
                    return bad("slope must be finite");
                }
                Ok(input.to_vec())
            }
            LayerSpec::Softmax => {
                if input.is_empty() {
                    return bad("rank-0 input");
                }
                Ok(input.to_vec())
            }
            LayerSpec::Dropout { rate } => {
                if !(0.0..1.0).contains(rate) {
                    return bad("rate must lie in [0, 1)");
                }
                Ok(input.to_vec())
            }
            LayerSpec::Reshape { shape } => {
                if shape.iter().product::<usize>() != input.iter().product::<usize>() {
                    return bad(&format!("cannot reshape into {shape:?}"));
                }
                Ok(shape.clone())
            }
            LayerSpec::PhaseShuffle { n } => {
                if input.len() != 2 || input[0] <= 2 * n {
                    return bad(&format!("length must exceed {}", 2 * n));
                }
                Ok(input.to_vec())
            }
        }
    }
}

#[derive(Debug, Clone)]
pub struct Layer {
    pub spec: LayerSpec,
    pub name: String,
    /// Per-sample output shape.
    pub output_shape: Vec<usize>,
    pub weight: Option<ParamId>,
    pub bias: Option<ParamId>,
}

/// A sequential stack of layers with its own parameters.
#[derive(Debug, Clone)]
pub struct Network<T: Scalar> {
    input_shape: Vec<usize>,
    layers: Vec<Layer>,
    params: ParamStore<T>,
}

fn glorot<T: Scalar, R: Rng + ?Sized>(shape: &[usize], fan_in: usize, fan_out: usize, rng: &mut R) -> Tensor<T> {
    let r = (6.0 / (fan_in + fan_out) as f64).sqrt();
    Tensor::from_fn(shape, |_| T::from_f64_lossy(rng.gen_range(-r..=r)))
}

impl<T: Scalar> Network<T> {
    /// Validate the whole stack and initialise parameters (Glorot-uniform
    /// weights, zero biases).
    pub fn build<R: Rng + ?Sized>(input_shape: &[usize], specs: Vec<LayerSpec>, rng: &mut R) -> Result<Self> {
        let mut params = ParamStore::new();
        let mut layers = Vec::with_capacity(specs.len());
        let mut shape = input_shape.to_vec();
        let mut counters: Vec<(&'static str, usize)> = Vec::new();
        for spec in specs {
            let out = spec.output_shape(&shape)?;
            let label = spec.label();
            let count = match counters.iter_mut().find(|(l, _)| *l == label) {
                Some((_, c)) => {
                    *c += 1;
                    *c
                }
                None => {
                    counters.push((label, 1));
                    1
                }
            };
            let name = format!("{label}_{count}");
            let (wshape, fan_in, fan_out, units): (Option<Vec<usize>>, usize, usize, usize) = match &spec {
                LayerSpec::Dense { units, .. } => (Some(vec![shape[0], *units]), shape[0], *units, *units),
                LayerSpec::Conv1d { filters, kernel, .. } | LayerSpec::TConv1d { filters, kernel, .. } => (
                    Some(vec![*kernel, shape[1], *filters]),
                    kernel * shape[1],
                    kernel * filters,
                    *filters,
                ),
                LayerSpec::Conv2d { filters, kernel } => (
                    Some(vec![kernel.0, kernel.1, shape[2], *filters]),
                    kernel.0 * kernel.1 * shape[2],
                    kernel.0 * kernel.1 * filters,
                    *filters,
                ),
                _ => (None, 0, 0, 0),
            };
            let (weight, bias) = match wshape {
                Some(ws) => {
                    let w = params.add(&format!("{}.weight", name.to_lowercase()), glorot(&ws, fan_in, fan_out, rng));
                    let b = params.add(&format!("{}.bias", name.to_lowercase()), Tensor::zeros(&[units]));
                    (Some(w), Some(b))
                }
                None => (None, None),
            };
            layers.push(Layer {
                spec,
                name,
                output_shape: out.clone(),
                weight,
                bias,
            });
            shape = out;
        }
        Ok(Self {
            input_shape: input_shape.to_vec(),
            layers,
            params,
        })
    }

    pub fn input_shape(&self) -> &[usize] {
        &self.input_shape
    }

    pub fn output_shape(&self) -> &[usize] {
        self.layers.last().map_or(&self.input_shape, |l| &l.output_shape)
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    pub fn params(&self) -> &ParamStore<T> {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut ParamStore<T> {
        &mut self.params
    }

    /// Apply every dense layer's max-norm constraint.
    pub fn apply_constraints(&mut self) -> Result<()> {
        for layer in &self.layers {
            if let (LayerSpec::Dense { max_norm: Some(c), .. }, Some(w)) = (&layer.spec, layer.weight) {
                maxnorm_project(self.params.value_mut(w), *c)?;
            }
        }
        Ok(())
    }

    fn apply(&self, g: &mut Graph<T>, layer: &Layer, x: NodeId, mode: &mut Mode<'_>) -> Result<NodeId> {
        let batch = g.shape(x)[0];
        let with_bias = |g: &mut Graph<T>, y: NodeId| -> Result<NodeId> {
            let b = g.param(&self.params, layer.bias.expect("parametric layer"));
            let shape = g.shape(y).to_vec();
            let bb = g.broadcast_to(b, &shape)?;
            g.add(y, bb)
        };
        let weight = |g: &mut Graph<T>| g.param(&self.params, layer.weight.expect("parametric layer"));
        match &layer.spec {
            LayerSpec::Dense { .. } => {
                let w = weight(g);
                let y = g.matmul(x, w)?;
                with_bias(g, y)
            }
            LayerSpec::Conv1d { kernel, stride, .. } => {
                let w = weight(g);
                let pad = same_padding(g.shape(x)[1], *kernel, *stride);
                let y = g.conv1d(x, w, *stride, pad)?;
                with_bias(g, y)
            }
            LayerSpec::TConv1d { stride, .. } => {
                let w = weight(g);
                let y = g.tconv1d(x, w, *stride)?;
                with_bias(g, y)
            }
            LayerSpec::Conv2d { .. } => {
                let w = weight(g);
                let y = g.conv2d_same(x, w)?;
                with_bias(g, y)
            }
            LayerSpec::MaxPool2d { pool } => g.maxpool2d(x, pool.0, pool.1),
            LayerSpec::Relu => Ok(g.relu(x)),
            LayerSpec::LeakyRelu { slope } => Ok(g.leaky_relu(x, T::from_f64_lossy(*slope))),
            LayerSpec::Tanh => Ok(g.tanh(x)),
            LayerSpec::Softmax => g.softmax(x),
            LayerSpec::Dropout { rate } => g.dropout(x, *rate, mode.training, &mut *mode.rng),
            LayerSpec::Reshape { shape } => {
                let mut s = vec![batch];
                s.extend_from_slice(shape);
                g.reshape(x, &s)
            }
            LayerSpec::PhaseShuffle { n } => {
                if mode.training {
                    g.phase_shuffle(x, *n, &mut *mode.rng)
                } else {
                    Ok(x)
                }
            }
        }
    }

    fn check_input(&self, g: &Graph<T>, x: NodeId) -> Result<()> {
        let s = g.shape(x);
        if s.is_empty() || s[1..] != self.input_shape[..] {
            return Err(Error::Dimension(format!(
                "network expects [batch, {:?}], got {s:?}",
                self.input_shape
            )));
        }
        Ok(())
    }

    /// Forward pass that also returns every layer's output node.
    pub fn forward_traced(&self, g: &mut Graph<T>, x: NodeId, mode: &mut Mode<'_>) -> Result<Vec<NodeId>> {
        self.check_input(g, x)?;
        let mut trace = Vec::with_capacity(self.layers.len());
        let mut h = x;
        for layer in &self.layers {
            h = self.apply(g, layer, h, mode)?;
            trace.push(h);
        }
        Ok(trace)
    }
}

impl<T: Scalar> Module<T> for Network<T> {
    fn forward(&self, g: &mut Graph<T>, x: NodeId, mode: &mut Mode<'_>) -> Result<NodeId> {
        Ok(self.forward_traced(g, x, mode)?.last().copied().unwrap_or(x))
    }
}
