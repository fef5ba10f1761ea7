use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::loss::softmax_in_place;
use super::matrix::gemm;
use super::rng::SeededRng;
use crate::error::{check_len, Error, Result};
use crate::fmath;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Relu,
    Linear,
    Softmax,
}

/// Fully connected network.
///
/// Layer `l` maps `n_l` inputs to `n_{l+1}` outputs with a weight matrix stored
/// row-major as `n_l × n_{l+1}` (input index major), so a batch `X` (`B × n_l`)
/// propagates as `X·W + b`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DenseNet {
    pub layer_sizes: Vec<usize>,
    pub hidden_activation: Activation,
    pub output_activation: Activation,
    pub weights: Vec<Vec<f64>>,
    pub biases: Vec<Vec<f64>>,
}

/// Parameter gradients, shaped like the network's weights and biases.
#[derive(Debug, Clone, PartialEq)]
pub struct Grads {
    pub weights: Vec<Vec<f64>>,
    pub biases: Vec<Vec<f64>>,
}

impl Grads {
    pub fn zeros_like(net: &DenseNet) -> Self {
        Grads {
            weights: net.weights.iter().map(|w| vec![0.0; w.len()]).collect(),
            biases: net.biases.iter().map(|b| vec![0.0; b.len()]).collect(),
        }
    }

    /// Blocks in the same order as [`DenseNet::param_blocks_mut`].
    pub fn blocks(&self) -> Vec<&[f64]> {
        self.weights
            .iter()
            .zip(&self.biases)
            .flat_map(|(w, b)| [w.as_slice(), b.as_slice()])
            .collect()
    }

    pub fn flatten(&self) -> Vec<f64> {
        self.blocks().concat()
    }
}

/// Activations recorded by [`DenseNet::forward_batch`] for backpropagation.
#[derive(Debug, Clone)]
pub struct BatchTrace {
    pub batch: usize,
    /// `acts[0]` is the input, `acts[l+1]` the post-activation output of layer `l`.
    pub acts: Vec<Vec<f64>>,
}

impl BatchTrace {
    pub fn output(&self) -> &[f64] {
        self.acts.last().map(Vec::as_slice).unwrap_or(&[])
    }
}

impl DenseNet {
    /// Seeded fan-in uniform initialization: hidden layers draw from
    /// U(±sqrt(6/fan_in)), the output layer from U(±sqrt(3/fan_in)); biases start at 0.
    pub fn new(
        layer_sizes: &[usize],
        hidden_activation: Activation,
        output_activation: Activation,
        rng: &mut SeededRng,
    ) -> Result<Self> {
        if layer_sizes.len() < 2 || layer_sizes.iter().any(|&n| n == 0) {
            return Err(Error::InvalidArgument(alloc::format!(
                "layer sizes {layer_sizes:?} need at least two positive widths"
            )));
        }
        if hidden_activation == Activation::Softmax {
            return Err(Error::InvalidArgument("softmax is only valid on the output".into()));
        }
        let n_layers = layer_sizes.len() - 1;
        let mut weights = Vec::with_capacity(n_layers);
        let mut biases = Vec::with_capacity(n_layers);
        for l in 0..n_layers {
            let (fan_in, fan_out) = (layer_sizes[l], layer_sizes[l + 1]);
            let scale = if l + 1 == n_layers { 3.0 } else { 6.0 };
            let limit = fmath::sqrt(scale / fan_in as f64);
            weights.push(
                (0..fan_in * fan_out)
                    .map(|_| (2.0 * rng.uniform() - 1.0) * limit)
                    .collect(),
            );
            biases.push(vec![0.0; fan_out]);
        }
        Ok(DenseNet {
            layer_sizes: layer_sizes.to_vec(),
            hidden_activation,
            output_activation,
            weights,
            biases,
        })
    }

    /// Network with every weight and bias set to zero.
    pub fn zeros(
        layer_sizes: &[usize],
        hidden_activation: Activation,
        output_activation: Activation,
    ) -> Result<Self> {
        let mut rng = SeededRng::new(0);
        let mut net = Self::new(layer_sizes, hidden_activation, output_activation, &mut rng)?;
        for w in net.weights.iter_mut().chain(net.biases.iter_mut()) {
            w.iter_mut().for_each(|x| *x = 0.0);
        }
        Ok(net)
    }

    pub fn input_dim(&self) -> usize {
        self.layer_sizes[0]
    }

    pub fn output_dim(&self) -> usize {
        *self.layer_sizes.last().unwrap_or(&0)
    }

    pub fn n_layers(&self) -> usize {
        self.weights.len()
    }

    /// Σ_l (n_l·n_{l+1} + n_{l+1}).
    pub fn parameter_count(&self) -> usize {
        self.layer_sizes
            .windows(2)
            .map(|w| w[0] * w[1] + w[1])
            .sum()
    }

    /// Checks that stored arrays chain the declared layer widths.
    pub fn check_shapes(&self) -> Result<()> {
        let n_layers = self.layer_sizes.len().saturating_sub(1);
        if n_layers == 0 || self.weights.len() != n_layers || self.biases.len() != n_layers {
            return Err(Error::InvalidArgument("network layer count mismatch".into()));
        }
        for l in 0..n_layers {
            check_len(self.layer_sizes[l] * self.layer_sizes[l + 1], self.weights[l].len())?;
            check_len(self.layer_sizes[l + 1], self.biases[l].len())?;
        }
        Ok(())
    }

    /// Mutable parameter blocks ordered `W0, b0, W1, b1, ...`.
    pub fn param_blocks_mut(&mut self) -> Vec<&mut [f64]> {
        self.weights
            .iter_mut()
            .zip(self.biases.iter_mut())
            .flat_map(|(w, b)| [w.as_mut_slice(), b.as_mut_slice()])
            .collect()
    }

    pub fn block_sizes(&self) -> Vec<usize> {
        self.weights
            .iter()
            .zip(&self.biases)
            .flat_map(|(w, b)| [w.len(), b.len()])
            .collect()
    }

    /// Single-sample forward pass.
    pub fn forward(&self, input: &[f64]) -> Result<Vec<f64>> {
        let trace = self.forward_batch(input, 1)?;
        Ok(trace.acts.into_iter().last().unwrap_or_default())
    }

    /// Forward pass over `batch` row-major samples.
    pub fn forward_batch(&self, inputs: &[f64], batch: usize) -> Result<BatchTrace> {
        check_len(batch * self.input_dim(), inputs.len())?;
        let n_layers = self.n_layers();
        let mut acts = Vec::with_capacity(n_layers + 1);
        acts.push(inputs.to_vec());
        for l in 0..n_layers {
            let (n_in, n_out) = (self.layer_sizes[l], self.layer_sizes[l + 1]);
            let mut z = Vec::with_capacity(batch * n_out);
            for _ in 0..batch {
                z.extend_from_slice(&self.biases[l]);
            }
            gemm(batch, n_in, n_out, &acts[l], false, &self.weights[l], false, 1.0, &mut z);
            let act = if l + 1 == n_layers {
                self.output_activation
            } else {
                self.hidden_activation
            };
            match act {
                Activation::Relu => z.iter_mut().for_each(|x| *x = x.max(0.0)),
                Activation::Linear => {}
                Activation::Softmax => z.chunks_mut(n_out).for_each(softmax_in_place),
            }
            acts.push(z);
        }
        Ok(BatchTrace { batch, acts })
    }

    /// Backpropagates a gradient taken with respect to the last layer's
    /// pre-activation values (`B × n_out`). Returns parameter gradients summed
    /// over the batch and the gradient with respect to the inputs.
    pub fn backward_pre_activation(
        &self,
        trace: &BatchTrace,
        d_pre_out: &[f64],
    ) -> Result<(Grads, Vec<f64>)> {
        let batch = trace.batch;
        check_len(batch * self.output_dim(), d_pre_out.len())?;
        let n_layers = self.n_layers();
        let mut grads = Grads::zeros_like(self);
        let mut delta = d_pre_out.to_vec();
        for l in (0..n_layers).rev() {
            let (n_in, n_out) = (self.layer_sizes[l], self.layer_sizes[l + 1]);
            // dW = A_l^T · delta
            gemm(n_in, batch, n_out, &trace.acts[l], true, &delta, false, 0.0, &mut grads.weights[l]);
            let db = &mut grads.biases[l];
            for row in delta.chunks(n_out) {
                for (g, d) in db.iter_mut().zip(row) {
                    *g += d;
                }
            }
            // dA = delta · W^T
            let mut d_in = vec![0.0; batch * n_in];
            gemm(batch, n_out, n_in, &delta, false, &self.weights[l], true, 0.0, &mut d_in);
            if l > 0 {
                // hidden activation derivative at layer l-1's output
                if self.hidden_activation == Activation::Relu {
                    for (g, a) in d_in.iter_mut().zip(&trace.acts[l]) {
                        if *a <= 0.0 {
                            *g = 0.0;
                        }
                    }
                }
            }
            delta = d_in;
        }
        Ok((grads, delta))
    }

    /// Backpropagates a gradient taken with respect to the network outputs,
    /// going through the output activation's Jacobian.
    pub fn backward_batch(&self, trace: &BatchTrace, d_out: &[f64]) -> Result<(Grads, Vec<f64>)> {
        check_len(trace.batch * self.output_dim(), d_out.len())?;
        let out = trace.output();
        let n_out = self.output_dim();
        let d_pre: Vec<f64> = match self.output_activation {
            Activation::Linear => d_out.to_vec(),
            Activation::Relu => d_out
                .iter()
                .zip(out)
                .map(|(g, a)| if *a > 0.0 { *g } else { 0.0 })
                .collect(),
            Activation::Softmax => {
                let mut d = Vec::with_capacity(d_out.len());
                for (g, p) in d_out.chunks(n_out).zip(out.chunks(n_out)) {
                    let dot: f64 = g.iter().zip(p).map(|(a, b)| a * b).sum();
                    d.extend(g.iter().zip(p).map(|(gi, pi)| pi * (gi - dot)));
                }
                d
            }
        };
        self.backward_pre_activation(trace, &d_pre)
    }

    /// Single-sample backward pass: gradients of a scalar loss given
    /// `loss_grad = dL/d(output)`.
    pub fn backward(&self, input: &[f64], loss_grad: &[f64]) -> Result<Grads> {
        check_len(self.output_dim(), loss_grad.len())?;
        let trace = self.forward_batch(input, 1)?;
        Ok(self.backward_batch(&trace, loss_grad)?.0)
    }
}
