use alloc::vec::Vec;
use rand::Rng;

use crate::error::{check_dim, Error, Result};
use crate::linalg;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Activation {
    Relu,
    Linear,
}

impl Activation {
    #[inline]
    fn apply(self, v: f64) -> f64 {
        match self {
            Activation::Relu => v.max(0.0),
            Activation::Linear => v,
        }
    }
}

/// Fully connected layer `y = act(x · W + b)` with `W` stored `inputs × outputs`
/// row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseLayer {
    inputs: usize,
    outputs: usize,
    weights: Vec<f64>,
    bias: Vec<f64>,
    activation: Activation,
}

impl DenseLayer {
    pub fn new(
        inputs: usize,
        outputs: usize,
        weights: Vec<f64>,
        bias: Vec<f64>,
        activation: Activation,
    ) -> Result<Self> {
        if inputs == 0 || outputs == 0 {
            return Err(Error::EmptyInput("layer with zero width"));
        }
        check_dim("layer weights", inputs * outputs, weights.len())?;
        check_dim("layer bias", outputs, bias.len())?;
        if weights.iter().chain(&bias).any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("layer parameters"));
        }
        Ok(Self {
            inputs,
            outputs,
            weights,
            bias,
            activation,
        })
    }

    /// Glorot-uniform weights in `±sqrt(6 / (fan_in + fan_out))`, zero bias.
    pub fn glorot<R: Rng + ?Sized>(
        inputs: usize,
        outputs: usize,
        activation: Activation,
        rng: &mut R,
    ) -> Self {
        let limit = libm::sqrt(6.0 / (inputs + outputs) as f64);
        let weights = (0..inputs * outputs)
            .map(|_| rng.random_range(-limit..=limit))
            .collect();
        Self {
            inputs,
            outputs,
            weights,
            bias: alloc::vec![0.0; outputs],
            activation,
        }
    }

    #[inline]
    pub fn inputs(&self) -> usize {
        self.inputs
    }

    #[inline]
    pub fn outputs(&self) -> usize {
        self.outputs
    }

    #[inline]
    pub fn activation(&self) -> Activation {
        self.activation
    }

    #[inline]
    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    #[inline]
    pub fn bias(&self) -> &[f64] {
        &self.bias
    }

    pub(crate) fn params_mut(&mut self) -> [&mut [f64]; 2] {
        [&mut self.weights, &mut self.bias]
    }

    /// Returns `(pre_activation, output)` for `rows` stacked inputs.
    pub(crate) fn forward(&self, input: &[f64], rows: usize) -> (Vec<f64>, Vec<f64>) {
        let mut pre = Vec::with_capacity(rows * self.outputs);
        for _ in 0..rows {
            pre.extend_from_slice(&self.bias);
        }
        linalg::gemm_nn(
            rows,
            self.inputs,
            self.outputs,
            input,
            &self.weights,
            1.0,
            &mut pre,
        );
        let out = match self.activation {
            Activation::Linear => pre.clone(),
            act => pre.iter().map(|&v| act.apply(v)).collect(),
        };
        (pre, out)
    }

    /// Backpropagates `grad_out` (gradient w.r.t. this layer's output) and
    /// returns the layer gradients plus the gradient w.r.t. its input.
    pub(crate) fn backward(
        &self,
        input: &[f64],
        pre: &[f64],
        mut grad_out: Vec<f64>,
        rows: usize,
        need_input_grad: bool,
    ) -> (LayerGradients, Option<Vec<f64>>) {
        if self.activation == Activation::Relu {
            for (g, &p) in grad_out.iter_mut().zip(pre) {
                if p <= 0.0 {
                    *g = 0.0;
                }
            }
        }
        let mut weights = alloc::vec![0.0; self.inputs * self.outputs];
        linalg::gemm_tn(
            self.inputs,
            rows,
            self.outputs,
            input,
            &grad_out,
            0.0,
            &mut weights,
        );
        let mut bias = alloc::vec![0.0; self.outputs];
        for row in grad_out.chunks_exact(self.outputs) {
            for (b, g) in bias.iter_mut().zip(row) {
                *b += g;
            }
        }
        let grad_in = need_input_grad.then(|| {
            let mut gi = alloc::vec![0.0; rows * self.inputs];
            linalg::gemm_nt(
                rows,
                self.outputs,
                self.inputs,
                &grad_out,
                &self.weights,
                0.0,
                &mut gi,
            );
            gi
        });
        (LayerGradients { weights, bias }, grad_in)
    }
}

/// Gradients of one dense layer, laid out like its parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct LayerGradients {
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
}
