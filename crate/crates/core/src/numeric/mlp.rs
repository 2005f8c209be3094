use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{DysError, Result};
use crate::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    #[default]
    Relu,
}

/// Fully connected layer, `y = W x + b` with `W` stored row-major `[out x in]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct Dense<T> {
    pub out_dim: usize,
    pub in_dim: usize,
    pub weights: Vec<T>,
    pub bias: Vec<T>,
}

impl<T: Scalar> Dense<T> {
    pub fn new(weights: Vec<Vec<T>>, bias: Vec<T>) -> Result<Self> {
        let out_dim = weights.len();
        let in_dim = weights.first().map_or(0, Vec::len);
        if bias.len() != out_dim {
            return Err(DysError::shape("dense bias", out_dim, bias.len()));
        }
        let mut flat = Vec::with_capacity(out_dim * in_dim);
        for row in weights {
            if row.len() != in_dim {
                return Err(DysError::shape("dense weight row", in_dim, row.len()));
            }
            flat.extend(row);
        }
        Ok(Dense {
            out_dim,
            in_dim,
            weights: flat,
            bias,
        })
    }

    pub fn zeros(out_dim: usize, in_dim: usize) -> Self {
        Dense {
            out_dim,
            in_dim,
            weights: vec![T::zero(); out_dim * in_dim],
            bias: vec![T::zero(); out_dim],
        }
    }

    /// Uniform `(-1/sqrt(in), 1/sqrt(in))` initialization for weights and bias.
    pub fn random<R: Rng + ?Sized>(out_dim: usize, in_dim: usize, rng: &mut R) -> Self {
        let bound = 1.0 / (in_dim.max(1) as f64).sqrt();
        let mut draw = || T::of(rng.random_range(-bound..bound));
        let weights = (0..out_dim * in_dim).map(|_| draw()).collect();
        let bias = (0..out_dim).map(|_| draw()).collect();
        Dense {
            out_dim,
            in_dim,
            weights,
            bias,
        }
    }

    #[inline]
    pub fn weight(&self, row: usize, col: usize) -> T {
        self.weights[row * self.in_dim + col]
    }

    fn apply(&self, x: &[T], out: &mut [T]) {
        for (r, o) in out.iter_mut().enumerate() {
            let row = &self.weights[r * self.in_dim..(r + 1) * self.in_dim];
            let mut acc = self.bias[r];
            for (w, xi) in row.iter().zip(x) {
                acc += *w * *xi;
            }
            *o = acc;
        }
    }
}

/// Multilayer perceptron with ReLU after every layer except the last.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct Mlp<T> {
    pub layers: Vec<Dense<T>>,
    #[serde(default)]
    pub activation: Activation,
}

/// Intermediate values of one forward pass, reused across calls to avoid
/// reallocation. `inputs[l]` is the input to layer `l`; `pre[l]` its
/// pre-activation output.
#[derive(Debug, Clone, Default)]
pub struct MlpTrace<T> {
    inputs: Vec<Vec<T>>,
    pre: Vec<Vec<T>>,
    delta: Vec<T>,
    scratch: Vec<T>,
}

impl<T: Scalar> MlpTrace<T> {
    pub fn output(&self) -> &[T] {
        self.pre.last().map_or(&[], Vec::as_slice)
    }
}

impl<T: Scalar> Mlp<T> {
    pub fn from_layers(layers: Vec<Dense<T>>) -> Result<Self> {
        if layers.is_empty() {
            return Err(DysError::param("layers", "network needs at least one layer"));
        }
        for pair in layers.windows(2) {
            if pair[0].out_dim != pair[1].in_dim {
                return Err(DysError::shape("layer chaining", pair[0].out_dim, pair[1].in_dim));
            }
        }
        for l in &layers {
            if l.weights.len() != l.out_dim * l.in_dim || l.bias.len() != l.out_dim {
                return Err(DysError::shape("layer storage", l.out_dim * l.in_dim, l.weights.len()));
            }
        }
        Ok(Mlp {
            layers,
            activation: Activation::Relu,
        })
    }

    /// Randomly initialized network with layer widths `sizes` (input first).
    pub fn random<R: Rng + ?Sized>(sizes: &[usize], rng: &mut R) -> Result<Self> {
        if sizes.len() < 2 || sizes.contains(&0) {
            return Err(DysError::param(
                "sizes",
                format!("need >= 2 positive widths, got {sizes:?}"),
            ));
        }
        let layers = sizes.windows(2).map(|w| Dense::random(w[1], w[0], rng)).collect();
        Self::from_layers(layers)
    }

    pub fn zeros_like(&self) -> Self {
        Mlp {
            layers: self.layers.iter().map(|l| Dense::zeros(l.out_dim, l.in_dim)).collect(),
            activation: self.activation,
        }
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].in_dim
    }

    pub fn output_dim(&self) -> usize {
        self.layers[self.layers.len() - 1].out_dim
    }

    pub fn num_params(&self) -> usize {
        self.layers.iter().map(|l| l.weights.len() + l.bias.len()).sum()
    }

    /// Parameter storage in a fixed order: per layer, weights then bias.
    pub fn param_slices(&self) -> Vec<&[T]> {
        self.layers
            .iter()
            .flat_map(|l| [l.weights.as_slice(), l.bias.as_slice()])
            .collect()
    }

    pub fn param_slices_mut(&mut self) -> Vec<&mut [T]> {
        self.layers
            .iter_mut()
            .flat_map(|l| [l.weights.as_mut_slice(), l.bias.as_mut_slice()])
            .collect()
    }

    pub fn flat_params(&self) -> Vec<T> {
        self.param_slices().concat()
    }

    pub fn set_flat_params(&mut self, flat: &[T]) -> Result<()> {
        if flat.len() != self.num_params() {
            return Err(DysError::shape("flat parameters", self.num_params(), flat.len()));
        }
        let mut offset = 0;
        for s in self.param_slices_mut() {
            s.copy_from_slice(&flat[offset..offset + s.len()]);
            offset += s.len();
        }
        Ok(())
    }

    pub fn scale(&mut self, factor: T) {
        for s in self.param_slices_mut() {
            s.iter_mut().for_each(|v| *v *= factor);
        }
    }

    /// Returns the final-layer pre-activation output.
    pub fn forward(&self, x: &[T]) -> Result<Vec<T>> {
        let mut trace = MlpTrace::default();
        self.forward_traced(x, &mut trace)?;
        Ok(trace.output().to_vec())
    }

    pub fn forward_traced(&self, x: &[T], trace: &mut MlpTrace<T>) -> Result<()> {
        if x.len() != self.input_dim() {
            return Err(DysError::shape("mlp input", self.input_dim(), x.len()));
        }
        let n = self.layers.len();
        trace.inputs.resize_with(n, Vec::new);
        trace.pre.resize_with(n, Vec::new);
        trace.inputs[0].clear();
        trace.inputs[0].extend_from_slice(x);
        for (l, layer) in self.layers.iter().enumerate() {
            trace.pre[l].resize(layer.out_dim, T::zero());
            layer.apply(&trace.inputs[l], &mut trace.pre[l]);
            if l + 1 < n {
                let next = &mut trace.inputs[l + 1];
                next.clear();
                next.extend(trace.pre[l].iter().map(|&z| relu(z)));
            }
        }
        Ok(())
    }

    /// Exact gradients of `upstream . forward(x)` with respect to every
    /// parameter and to the input.
    pub fn backward(&self, x: &[T], upstream: &[T]) -> Result<(Mlp<T>, Vec<T>)> {
        let mut trace = MlpTrace::default();
        self.forward_traced(x, &mut trace)?;
        let mut grads = self.zeros_like();
        let mut input_grad = vec![T::zero(); self.input_dim()];
        self.backward_traced(&mut trace, upstream, &mut grads, Some(&mut input_grad))?;
        Ok((grads, input_grad))
    }

    /// Accumulates parameter gradients into `grads` using a trace produced by
    /// [`Mlp::forward_traced`] on the same parameters.
    pub fn backward_traced(
        &self,
        trace: &mut MlpTrace<T>,
        upstream: &[T],
        grads: &mut Mlp<T>,
        input_grad: Option<&mut [T]>,
    ) -> Result<()> {
        if upstream.len() != self.output_dim() {
            return Err(DysError::shape(
                "mlp upstream gradient",
                self.output_dim(),
                upstream.len(),
            ));
        }
        let MlpTrace {
            inputs,
            pre,
            delta,
            scratch,
        } = trace;
        delta.clear();
        delta.extend_from_slice(upstream);
        for l in (0..self.layers.len()).rev() {
            let layer = &self.layers[l];
            let g = &mut grads.layers[l];
            let input = &inputs[l];
            for r in 0..layer.out_dim {
                let d = delta[r];
                if d == T::zero() {
                    continue;
                }
                g.bias[r] += d;
                let row = &mut g.weights[r * layer.in_dim..(r + 1) * layer.in_dim];
                for (w, xi) in row.iter_mut().zip(input) {
                    *w += d * *xi;
                }
            }
            if l == 0 && input_grad.is_none() {
                break;
            }
            scratch.clear();
            scratch.resize(layer.in_dim, T::zero());
            for r in 0..layer.out_dim {
                let d = delta[r];
                if d == T::zero() {
                    continue;
                }
                let row = &layer.weights[r * layer.in_dim..(r + 1) * layer.in_dim];
                for (s, w) in scratch.iter_mut().zip(row) {
                    *s += d * *w;
                }
            }
            if l > 0 {
                // subgradient of ReLU at 0 is 0
                for (s, z) in scratch.iter_mut().zip(&pre[l - 1]) {
                    if *z <= T::zero() {
                        *s = T::zero();
                    }
                }
            }
            std::mem::swap(delta, scratch);
        }
        if let Some(out) = input_grad {
            if out.len() != self.input_dim() {
                return Err(DysError::shape("mlp input gradient", self.input_dim(), out.len()));
            }
            out.copy_from_slice(delta);
        }
        Ok(())
    }
}

#[inline]
fn relu<T: Scalar>(z: T) -> T {
    if z > T::zero() {
        z
    } else {
        T::zero()
    }
}
