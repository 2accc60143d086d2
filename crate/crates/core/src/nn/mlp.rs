//! Fully connected feed-forward networks with manual backpropagation.
//!
//! A [`Dense`] layer computes `y = act(x Wᵀ + b)` over a batch `x` whose rows
//! are samples; `W` is stored `(out_dim, in_dim)`. An [`Mlp`] chains layers.
//! Gradients are returned in a value of the same type as the parameters, so
//! optimizers and the gradient checker can walk both with
//! [`Parameters::param_slices`].

use rand::Rng;
use rand_distr::{Distribution, Uniform};
use serde::{Deserialize, Serialize};

use super::{Activation, Matrix, Parameters};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dense {
    pub weight: Matrix,
    pub bias: Vec<f64>,
    pub activation: Activation,
}

impl Dense {
    /// Glorot-uniform weights in `±sqrt(6 / (fan_in + fan_out))`, zero bias.
    pub fn glorot<R: Rng + ?Sized>(in_dim: usize, out_dim: usize, activation: Activation, rng: &mut R) -> Self {
        let limit = (6.0 / (in_dim + out_dim) as f64).sqrt();
        let dist = Uniform::new_inclusive(-limit, limit).expect("finite glorot limit");
        let data = (0..in_dim * out_dim).map(|_| dist.sample(rng)).collect();
        Self {
            weight: Matrix::from_vec(out_dim, in_dim, data).expect("sized buffer"),
            bias: vec![0.0; out_dim],
            activation,
        }
    }

    pub fn zeros(in_dim: usize, out_dim: usize, activation: Activation) -> Self {
        Self {
            weight: Matrix::zeros(out_dim, in_dim),
            bias: vec![0.0; out_dim],
            activation,
        }
    }

    pub fn new(weight: Matrix, bias: Vec<f64>, activation: Activation) -> Result<Self> {
        if bias.len() != weight.rows() {
            return Err(Error::Config(format!(
                "bias length {} does not match {} output units",
                bias.len(),
                weight.rows()
            )));
        }
        Ok(Self {
            weight,
            bias,
            activation,
        })
    }

    #[inline]
    pub fn in_dim(&self) -> usize {
        self.weight.cols()
    }

    #[inline]
    pub fn out_dim(&self) -> usize {
        self.weight.rows()
    }

    /// Returns `(pre_activation, output)`.
    pub fn forward(&self, input: &Matrix) -> (Matrix, Matrix) {
        let mut pre = input.matmul_t(&self.weight);
        pre.add_row_vector(&self.bias);
        let act = self.activation;
        let out = pre.map(|v| act.apply(v));
        (pre, out)
    }

    /// Given the layer input, its pre-activation and `dL/d(output)`, returns
    /// the parameter gradients and `dL/d(input)`.
    pub fn backward(&self, input: &Matrix, pre: &Matrix, upstream: &Matrix) -> (Dense, Matrix) {
        let act = self.activation;
        let delta = upstream.zip_map(pre, |g, z| g * act.derivative(z));
        let grad = Dense {
            weight: delta.t_matmul(input),
            bias: delta.column_sums(),
            activation: self.activation,
        };
        let input_grad = delta.matmul(&self.weight);
        (grad, input_grad)
    }
}

impl Dense {
    /// Appends `extra` output units with Glorot rows for the widened layer
    /// and zero bias. Existing rows are kept bit-for-bit.
    pub fn grow_output<R: Rng + ?Sized>(&mut self, extra: usize, rng: &mut R) {
        if extra == 0 {
            return;
        }
        let new_out = self.out_dim() + extra;
        let fresh = Dense::glorot(self.in_dim(), new_out, self.activation, rng);
        for r in self.out_dim()..new_out {
            self.weight.push_row(fresh.weight.row(r)).expect("same width");
        }
        self.bias.extend(std::iter::repeat_n(0.0, extra));
    }
}

impl Parameters for Dense {
    fn param_slices(&self) -> Vec<&[f64]> {
        vec![self.weight.as_slice(), &self.bias]
    }

    fn param_slices_mut(&mut self) -> Vec<&mut [f64]> {
        vec![self.weight.as_mut_slice(), &mut self.bias]
    }
}

/// A chain of dense layers.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Mlp {
    layers: Vec<Dense>,
    /// Bumped on every mutable parameter access so stale caches are caught.
    #[serde(skip)]
    version: u64,
}

impl PartialEq for Mlp {
    fn eq(&self, other: &Self) -> bool {
        self.layers == other.layers
    }
}

/// Intermediate values of one forward pass, consumed by [`Mlp::backward`].
#[derive(Debug, Clone)]
pub struct MlpCache {
    inputs: Vec<Matrix>,
    pre: Vec<Matrix>,
    version: u64,
}

impl MlpCache {
    /// Pre-activations of every layer, in order.
    pub fn pre_activations(&self) -> &[Matrix] {
        &self.pre
    }
}

impl Mlp {
    pub fn new(layers: Vec<Dense>) -> Result<Self> {
        if layers.is_empty() {
            return Err(Error::Config("an MLP needs at least one layer".into()));
        }
        for (i, pair) in layers.windows(2).enumerate() {
            if pair[0].out_dim() != pair[1].in_dim() {
                return Err(Error::Config(format!(
                    "layer {i} outputs {} units but layer {} expects {}",
                    pair[0].out_dim(),
                    i + 1,
                    pair[1].in_dim()
                )));
            }
        }
        Ok(Self { layers, version: 0 })
    }

    /// Glorot-initialised network with the given layer widths; `dims` holds
    /// the input width followed by each layer's output width.
    pub fn glorot<R: Rng + ?Sized>(dims: &[usize], activations: &[Activation], rng: &mut R) -> Result<Self> {
        if dims.len() != activations.len() + 1 || dims.contains(&0) {
            return Err(Error::Config(format!(
                "invalid layer spec: dims {dims:?}, {} activations",
                activations.len()
            )));
        }
        let layers = dims
            .windows(2)
            .zip(activations)
            .map(|(w, &act)| Dense::glorot(w[0], w[1], act, rng))
            .collect();
        Self::new(layers)
    }

    /// Same shapes and activations, all parameters zero.
    pub fn zeros_like(&self) -> Self {
        Self {
            layers: self
                .layers
                .iter()
                .map(|l| Dense::zeros(l.in_dim(), l.out_dim(), l.activation))
                .collect(),
            version: 0,
        }
    }

    pub fn layers(&self) -> &[Dense] {
        &self.layers
    }

    pub fn layers_mut(&mut self) -> &mut [Dense] {
        self.version += 1;
        &mut self.layers
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].in_dim()
    }

    pub fn output_dim(&self) -> usize {
        self.layers[self.layers.len() - 1].out_dim()
    }

    pub fn forward(&self, input: &Matrix) -> Result<(Matrix, MlpCache)> {
        if input.cols() != self.input_dim() {
            return Err(Error::Config(format!(
                "input has {} columns, network expects {}",
                input.cols(),
                self.input_dim()
            )));
        }
        let mut inputs = Vec::with_capacity(self.layers.len());
        let mut pre = Vec::with_capacity(self.layers.len());
        let mut x = input.clone();
        for layer in &self.layers {
            let (z, y) = layer.forward(&x);
            inputs.push(x);
            pre.push(z);
            x = y;
        }
        Ok((
            x,
            MlpCache {
                inputs,
                pre,
                version: self.version,
            },
        ))
    }

    /// Forward pass without keeping intermediates.
    pub fn predict(&self, input: &Matrix) -> Result<Matrix> {
        if input.cols() != self.input_dim() {
            return Err(Error::Config(format!(
                "input has {} columns, network expects {}",
                input.cols(),
                self.input_dim()
            )));
        }
        let mut x = input.clone();
        for layer in &self.layers {
            x = layer.forward(&x).1;
        }
        Ok(x)
    }

    /// Backpropagates `upstream = dL/d(output)`; returns parameter gradients
    /// (shaped like `self`) and `dL/d(input)`.
    pub fn backward(&self, cache: &MlpCache, upstream: &Matrix) -> Result<(Mlp, Matrix)> {
        if cache.version != self.version || cache.pre.len() != self.layers.len() {
            return Err(Error::Usage(
                "forward cache does not belong to the current parameters".into(),
            ));
        }
        let batch = cache.inputs[0].rows();
        if upstream.shape() != (batch, self.output_dim()) {
            return Err(Error::Usage(format!(
                "upstream gradient is {:?}, expected {:?}",
                upstream.shape(),
                (batch, self.output_dim())
            )));
        }
        for (layer, (x, z)) in self.layers.iter().zip(cache.inputs.iter().zip(&cache.pre)) {
            if x.cols() != layer.in_dim() || z.cols() != layer.out_dim() {
                return Err(Error::Usage("forward cache shapes do not match layers".into()));
            }
        }
        let mut grads = Vec::with_capacity(self.layers.len());
        let mut g = upstream.clone();
        for (i, layer) in self.layers.iter().enumerate().rev() {
            let (lg, ig) = layer.backward(&cache.inputs[i], &cache.pre[i], &g);
            grads.push(lg);
            g = ig;
        }
        grads.reverse();
        Ok((
            Mlp {
                layers: grads,
                version: 0,
            },
            g,
        ))
    }

    /// Appends `extra` freshly initialised output units to the last layer.
    /// Existing rows are kept bit-for-bit.
    pub fn grow_output<R: Rng + ?Sized>(&mut self, extra: usize, rng: &mut R) {
        if extra == 0 {
            return;
        }
        self.version += 1;
        self.layers.last_mut().expect("non-empty").grow_output(extra, rng);
    }

    pub fn is_finite(&self) -> bool {
        self.param_slices().iter().all(|s| s.iter().all(|v| v.is_finite()))
    }
}

impl Parameters for Mlp {
    fn param_slices(&self) -> Vec<&[f64]> {
        self.layers.iter().flat_map(|l| l.param_slices()).collect()
    }

    fn param_slices_mut(&mut self) -> Vec<&mut [f64]> {
        self.version += 1;
        self.layers.iter_mut().flat_map(|l| l.param_slices_mut()).collect()
    }
}
