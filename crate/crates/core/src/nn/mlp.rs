use ndarray::{Array1, Array2, ArrayView2, Axis, Zip};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{shape_err, Error, Result};

/// Parameter initialization law. Both scale with `1/sqrt(fan_in)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Init {
    /// `U(-1/sqrt(fan_in), 1/sqrt(fan_in))` for weights and biases.
    #[default]
    Uniform,
    /// `N(0, 1/fan_in)` for weights and biases.
    Normal,
}

impl std::str::FromStr for Init {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "uniform" => Ok(Init::Uniform),
            "normal" => Ok(Init::Normal),
            other => Err(Error::Parse(format!("unknown init {other:?}"))),
        }
    }
}

/// Affine map `z = W a + b` with `W` of shape `out x in`.
#[derive(Debug, Clone, PartialEq)]
pub struct Layer {
    pub weight: Array2<f64>,
    pub bias: Array1<f64>,
}

impl Layer {
    pub fn zeros(fan_in: usize, fan_out: usize) -> Self {
        Self {
            weight: Array2::zeros((fan_out, fan_in)),
            bias: Array1::zeros(fan_out),
        }
    }

    pub fn fan_in(&self) -> usize {
        self.weight.ncols()
    }

    pub fn fan_out(&self) -> usize {
        self.weight.nrows()
    }

    pub(crate) fn slices(&self) -> [&[f64]; 2] {
        [
            self.weight.as_slice().expect("standard layout"),
            self.bias.as_slice().expect("standard layout"),
        ]
    }

    pub(crate) fn slices_mut(&mut self) -> [&mut [f64]; 2] {
        [
            self.weight.as_slice_mut().expect("standard layout"),
            self.bias.as_slice_mut().expect("standard layout"),
        ]
    }

    fn same_shape(&self, other: &Layer) -> bool {
        self.weight.dim() == other.weight.dim() && self.bias.len() == other.bias.len()
    }
}

/// `L_M ∘ σ ∘ L_{M-1} ∘ ... ∘ σ ∘ L_1` with `σ = ReLU` and a linear output layer.
#[derive(Debug, Clone, PartialEq)]
pub struct Mlp {
    layers: Vec<Layer>,
    // bumped on every parameter mutation so stale caches can be detected
    version: u64,
}

/// Activations saved by [`Mlp::forward`]: the input of every layer.
#[derive(Debug, Clone)]
pub struct ForwardCache {
    version: u64,
    inputs: Vec<Array2<f64>>,
}

impl ForwardCache {
    pub fn batch_size(&self) -> usize {
        self.inputs[0].nrows()
    }
}

/// Parameter gradients, laid out like the network's layers.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub layers: Vec<Layer>,
}

impl Gradients {
    pub fn zeros_like(mlp: &Mlp) -> Self {
        Self {
            layers: mlp
                .layers
                .iter()
                .map(|l| Layer::zeros(l.fan_in(), l.fan_out()))
                .collect(),
        }
    }

    pub fn add_assign(&mut self, other: &Gradients) {
        for (a, b) in self.layers.iter_mut().zip(&other.layers) {
            a.weight += &b.weight;
            a.bias += &b.bias;
        }
    }

    pub fn is_finite(&self) -> bool {
        self.layers
            .iter()
            .all(|l| l.weight.iter().chain(l.bias.iter()).all(|v| v.is_finite()))
    }

    pub fn max_abs(&self) -> f64 {
        self.layers
            .iter()
            .flat_map(|l| l.weight.iter().chain(l.bias.iter()))
            .fold(0.0f64, |m, v| m.max(v.abs()))
    }
}

fn validate_widths(widths: &[usize]) -> Result<()> {
    if widths.len() < 2 || widths.contains(&0) {
        return Err(Error::Domain(format!(
            "network widths need at least two positive entries, got {widths:?}"
        )));
    }
    Ok(())
}

impl Mlp {
    /// Widths `[p_0, ..., p_M]`; the default architecture is
    /// `[input_dim, 100 x 9, 1]`, i.e. ten affine layers.
    pub fn new(widths: &[usize], init: Init, seed: u64) -> Result<Self> {
        validate_widths(widths)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let layers = widths
            .windows(2)
            .map(|w| {
                let (fan_in, fan_out) = (w[0], w[1]);
                let scale = 1.0 / (fan_in as f64).sqrt();
                let mut draw = || match init {
                    Init::Uniform => rng.random_range(-scale..scale),
                    Init::Normal => scale * rng.sample::<f64, _>(StandardNormal),
                };
                let weight = Array2::from_shape_simple_fn((fan_out, fan_in), &mut draw);
                let bias = Array1::from_shape_simple_fn(fan_out, &mut draw);
                Layer { weight, bias }
            })
            .collect();
        Ok(Self { layers, version: 0 })
    }

    pub fn zeros(widths: &[usize]) -> Result<Self> {
        validate_widths(widths)?;
        Ok(Self {
            layers: widths
                .windows(2)
                .map(|w| Layer::zeros(w[0], w[1]))
                .collect(),
            version: 0,
        })
    }

    pub fn from_layers(layers: Vec<Layer>) -> Result<Self> {
        if layers.is_empty() {
            return Err(Error::Domain("network needs at least one layer".into()));
        }
        for (i, l) in layers.iter().enumerate() {
            if l.bias.len() != l.fan_out() {
                return Err(shape_err(
                    l.fan_out(),
                    format!("bias of length {} in layer {i}", l.bias.len()),
                ));
            }
            if i > 0 && layers[i - 1].fan_out() != l.fan_in() {
                return Err(shape_err(
                    layers[i - 1].fan_out(),
                    format!("fan-in {} in layer {i}", l.fan_in()),
                ));
            }
            if l.weight.iter().chain(l.bias.iter()).any(|v| !v.is_finite()) {
                return Err(Error::NonFinite(format!("parameter in layer {i}")));
            }
        }
        let layers = layers
            .into_iter()
            .map(|l| Layer {
                weight: l.weight.as_standard_layout().into_owned(),
                bias: l.bias,
            })
            .collect();
        Ok(Self { layers, version: 0 })
    }

    /// Standard architecture: `depth` affine layers, hidden width `width`.
    pub fn standard_widths(input_dim: usize, width: usize, depth: usize) -> Vec<usize> {
        let mut w = vec![input_dim];
        w.extend(std::iter::repeat_n(width, depth.saturating_sub(1)));
        w.push(1);
        w
    }

    pub fn widths(&self) -> Vec<usize> {
        let mut w = vec![self.layers[0].fan_in()];
        w.extend(self.layers.iter().map(Layer::fan_out));
        w
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].fan_in()
    }

    pub fn output_dim(&self) -> usize {
        self.layers.last().map(Layer::fan_out).unwrap_or(0)
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    /// Mutable parameter access; invalidates outstanding forward caches.
    pub fn layers_mut(&mut self) -> &mut [Layer] {
        self.version += 1;
        &mut self.layers
    }

    pub fn parameter_count(&self) -> usize {
        self.layers
            .iter()
            .map(|l| l.weight.len() + l.bias.len())
            .sum()
    }

    fn check_input(&self, x: &ArrayView2<f64>) -> Result<()> {
        if x.ncols() != self.input_dim() {
            return Err(shape_err(
                format!("batch of width {}", self.input_dim()),
                format!("width {}", x.ncols()),
            ));
        }
        Ok(())
    }

    /// Batch forward pass, `B x p_0 -> B x p_M`, keeping what backward needs.
    pub fn forward(&self, x: ArrayView2<f64>) -> Result<(Array2<f64>, ForwardCache)> {
        self.check_input(&x)?;
        let mut inputs = Vec::with_capacity(self.layers.len());
        let mut a = x.to_owned();
        let last = self.layers.len() - 1;
        for (i, layer) in self.layers.iter().enumerate() {
            let mut z = a.dot(&layer.weight.t());
            z += &layer.bias;
            if i < last {
                z.mapv_inplace(|v| v.max(0.0));
            }
            inputs.push(a);
            a = z;
        }
        Ok((
            a,
            ForwardCache {
                version: self.version,
                inputs,
            },
        ))
    }

    /// Forward pass without retaining activations.
    pub fn predict(&self, x: ArrayView2<f64>) -> Result<Array2<f64>> {
        self.check_input(&x)?;
        let last = self.layers.len() - 1;
        let mut a = x.to_owned();
        for (i, layer) in self.layers.iter().enumerate() {
            let mut z = a.dot(&layer.weight.t());
            z += &layer.bias;
            if i < last {
                z.mapv_inplace(|v| v.max(0.0));
            }
            a = z;
        }
        Ok(a)
    }

    /// Reverse-mode gradients of `Σ_rows <grad_out_row, output_row>` given
    /// `grad_out = dLoss/dOutput` (`B x p_M`). ReLU'(0) is taken as 0.
    pub fn backward(&self, cache: &ForwardCache, grad_out: ArrayView2<f64>) -> Result<Gradients> {
        if cache.version != self.version || cache.inputs.len() != self.layers.len() {
            return Err(Error::StaleCache(
                "cache was produced by a different parameter state".into(),
            ));
        }
        if grad_out.dim() != (cache.batch_size(), self.output_dim()) {
            return Err(shape_err(
                format!("({}, {})", cache.batch_size(), self.output_dim()),
                format!("{:?}", grad_out.dim()),
            ));
        }
        let mut grads = Vec::with_capacity(self.layers.len());
        let mut delta = grad_out.to_owned();
        for (i, layer) in self.layers.iter().enumerate().rev() {
            let input = &cache.inputs[i];
            let weight = delta.t().dot(input);
            let bias = delta.sum_axis(Axis(0));
            grads.push(Layer { weight, bias });
            if i > 0 {
                let mut back = delta.dot(&layer.weight);
                Zip::from(&mut back).and(input).for_each(|d, &a| {
                    if a <= 0.0 {
                        *d = 0.0;
                    }
                });
                delta = back;
            }
        }
        grads.reverse();
        Ok(Gradients { layers: grads })
    }

    pub(crate) fn check_gradients(&self, grads: &Gradients) -> Result<()> {
        if grads.layers.len() != self.layers.len()
            || grads
                .layers
                .iter()
                .zip(&self.layers)
                .any(|(g, l)| !g.same_shape(l))
        {
            return Err(shape_err(
                format!("{:?}", self.widths()),
                "mismatched gradients",
            ));
        }
        Ok(())
    }
}
