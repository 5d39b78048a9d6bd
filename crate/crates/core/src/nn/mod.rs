//! Dense autoencoders with hand-written backpropagation and Adam.

mod adam;
mod layer;
mod loss;

use alloc::vec::Vec;
use rand::Rng;

pub use adam::{AdamState, DEFAULT_BETA1, DEFAULT_BETA2, DEFAULT_EPSILON, DEFAULT_LEARNING_RATE};
pub use layer::{Activation, DenseLayer, LayerGradients};
pub use loss::{
    combined_loss, cross_entropy_loss, reconstruction_loss, soft_assignment, ClusterCenters,
    SoftAssignment, LOG_CLAMP,
};

use crate::error::{check_dim, Error, Result};
use crate::tensor::Tensor2;

/// Hidden widths of the encoder; the decoder mirrors them.
pub const DEFAULT_HIDDEN: [usize; 2] = [128, 64];

/// Which objective to differentiate.
#[derive(Debug, Clone, Copy)]
pub enum LossSpec<'a> {
    /// Squared reconstruction error only.
    Reconstruction,
    /// Reconstruction plus `lambda` times the cross-entropy between `target`
    /// (one-hot, instances × clusters) and the soft assignment to `centers`.
    Combined {
        centers: &'a ClusterCenters,
        target: &'a Tensor2,
        lambda: f64,
    },
}

/// Loss components reported by [`Autoencoder::loss_and_gradients`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossBreakdown {
    pub reconstruction: f64,
    pub cross_entropy: f64,
    pub total: f64,
}

/// Gradients for every layer (encoder first, then decoder) and, for the
/// combined loss, for the cluster centers.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub layers: Vec<LayerGradients>,
    pub centers: Option<Tensor2>,
}

impl Gradients {
    /// Network gradient slices in parameter order (weights then bias per layer).
    pub fn network_slices(&self) -> Vec<&[f64]> {
        self.layers
            .iter()
            .flat_map(|g| [g.weights.as_slice(), g.bias.as_slice()])
            .collect()
    }
}

/// One view's encoder/decoder pair and the optimizer state of its weights.
#[derive(Debug, Clone, PartialEq)]
pub struct Autoencoder {
    view_index: usize,
    encoder: Vec<DenseLayer>,
    decoder: Vec<DenseLayer>,
    optimizer: AdamState,
}

struct ForwardCache {
    /// `activations[0]` is the input; `activations[l + 1]` is layer `l`'s output.
    activations: Vec<Vec<f64>>,
    pre: Vec<Vec<f64>>,
}

impl Autoencoder {
    /// `input → hidden[0] → … → hidden[last]` encoder with a mirrored decoder.
    /// Hidden layers use ReLU; the embedding and reconstruction are linear.
    pub fn new<R: Rng + ?Sized>(
        view_index: usize,
        input_dim: usize,
        hidden: &[usize],
        learning_rate: f64,
        rng: &mut R,
    ) -> Result<Self> {
        if input_dim == 0 || hidden.is_empty() || hidden.contains(&0) {
            return Err(Error::Config(alloc::format!(
                "invalid autoencoder shape: input {input_dim}, hidden {hidden:?}"
            )));
        }
        let optimizer = AdamState::new(learning_rate)?;
        let mut widths = Vec::with_capacity(hidden.len() + 1);
        widths.push(input_dim);
        widths.extend_from_slice(hidden);
        let stack = |widths: &[usize], rng: &mut R| -> Vec<DenseLayer> {
            let last = widths.len() - 2;
            widths
                .windows(2)
                .enumerate()
                .map(|(i, w)| {
                    let act = if i == last {
                        Activation::Linear
                    } else {
                        Activation::Relu
                    };
                    DenseLayer::glorot(w[0], w[1], act, rng)
                })
                .collect()
        };
        let encoder = stack(&widths, rng);
        widths.reverse();
        let decoder = stack(&widths, rng);
        Ok(Self {
            view_index,
            encoder,
            decoder,
            optimizer,
        })
    }

    pub fn from_layers(
        view_index: usize,
        encoder: Vec<DenseLayer>,
        decoder: Vec<DenseLayer>,
        optimizer: AdamState,
    ) -> Result<Self> {
        if encoder.is_empty() || decoder.is_empty() {
            return Err(Error::EmptyInput("autoencoder without layers"));
        }
        for pair in encoder.windows(2).chain(decoder.windows(2)) {
            check_dim("layer chaining", pair[0].outputs(), pair[1].inputs())?;
        }
        let embed = encoder.last().map(DenseLayer::outputs).unwrap_or_default();
        check_dim("decoder input vs embedding", embed, decoder[0].inputs())?;
        let input = encoder[0].inputs();
        check_dim(
            "decoder output vs input",
            input,
            decoder.last().map(DenseLayer::outputs).unwrap_or_default(),
        )?;
        Ok(Self {
            view_index,
            encoder,
            decoder,
            optimizer,
        })
    }

    #[inline]
    pub fn view_index(&self) -> usize {
        self.view_index
    }

    pub fn input_dim(&self) -> usize {
        self.encoder[0].inputs()
    }

    pub fn embedding_dim(&self) -> usize {
        self.decoder[0].inputs()
    }

    pub fn encoder(&self) -> &[DenseLayer] {
        &self.encoder
    }

    pub fn decoder(&self) -> &[DenseLayer] {
        &self.decoder
    }

    pub fn optimizer(&self) -> &AdamState {
        &self.optimizer
    }

    pub fn parameter_count(&self) -> usize {
        self.layers()
            .map(|l| l.weights().len() + l.bias().len())
            .sum()
    }

    fn layers(&self) -> impl Iterator<Item = &DenseLayer> {
        self.encoder.iter().chain(&self.decoder)
    }

    /// Mutable parameter slices in the same order as [`Gradients::network_slices`].
    pub fn parameters_mut(&mut self) -> Vec<&mut [f64]> {
        self.encoder
            .iter_mut()
            .chain(self.decoder.iter_mut())
            .flat_map(|l| l.params_mut())
            .collect()
    }

    fn run(&self, x: &Tensor2) -> Result<ForwardCache> {
        check_dim("autoencoder input width", self.input_dim(), x.cols())?;
        let rows = x.rows();
        let n_layers = self.encoder.len() + self.decoder.len();
        let mut activations = Vec::with_capacity(n_layers + 1);
        let mut pre = Vec::with_capacity(n_layers);
        activations.push(x.as_slice().to_vec());
        for layer in self.layers() {
            let (p, out) = layer.forward(
                activations.last().map(Vec::as_slice).unwrap_or_default(),
                rows,
            );
            pre.push(p);
            activations.push(out);
        }
        Ok(ForwardCache { activations, pre })
    }

    /// Returns the embedding and the reconstruction of `x`.
    pub fn forward(&self, x: &Tensor2) -> Result<(Tensor2, Tensor2)> {
        let mut cache = self.run(x)?;
        let rows = x.rows();
        let xhat = Tensor2::from_raw(
            rows,
            self.input_dim(),
            cache.activations.pop().unwrap_or_default(),
        );
        let z = cache.activations.swap_remove(self.encoder.len());
        Ok((Tensor2::from_raw(rows, self.embedding_dim(), z), xhat))
    }

    pub fn embed(&self, x: &Tensor2) -> Result<Tensor2> {
        check_dim("autoencoder input width", self.input_dim(), x.cols())?;
        let mut act = x.as_slice().to_vec();
        for layer in &self.encoder {
            act = layer.forward(&act, x.rows()).1;
        }
        Ok(Tensor2::from_raw(x.rows(), self.embedding_dim(), act))
    }

    /// Evaluates `spec` on `x` and returns exact analytic gradients.
    pub fn loss_and_gradients(
        &self,
        x: &Tensor2,
        spec: &LossSpec<'_>,
    ) -> Result<(LossBreakdown, Gradients)> {
        let cache = self.run(x)?;
        let rows = x.rows();
        let n_enc = self.encoder.len();
        let xhat = cache
            .activations
            .last()
            .map(Vec::as_slice)
            .unwrap_or_default();

        let mut reconstruction = 0.0;
        let mut grad: Vec<f64> = xhat
            .iter()
            .zip(x.as_slice())
            .map(|(r, t)| {
                let d = r - t;
                reconstruction += d * d;
                2.0 * d
            })
            .collect();

        let (cross_entropy, mut grad_embedding, center_grads, lambda) = match *spec {
            LossSpec::Reconstruction => (0.0, None, None, 0.0),
            LossSpec::Combined {
                centers,
                target,
                lambda,
            } => {
                let z =
                    Tensor2::from_raw(rows, self.embedding_dim(), cache.activations[n_enc].clone());
                let (ce, gz, gc) = loss::cross_entropy_gradients(&z, centers, target)?;
                // Validates lambda.
                combined_loss(0.0, 0.0, lambda)?;
                let scale = |t: Tensor2| -> Vec<f64> {
                    t.into_vec().into_iter().map(|v| lambda * v).collect()
                };
                (
                    ce,
                    Some(scale(gz)),
                    Some(Tensor2::from_raw(gc.rows(), gc.cols(), scale(gc))),
                    lambda,
                )
            }
        };
        let total = combined_loss(reconstruction, cross_entropy, lambda)?;

        let all: Vec<&DenseLayer> = self.layers().collect();
        let mut layer_grads = Vec::with_capacity(all.len());
        for (l, layer) in all.iter().enumerate().rev() {
            // Gradient arriving at the embedding from the clustering term.
            if l + 1 == n_enc {
                if let Some(extra) = grad_embedding.take() {
                    for (g, e) in grad.iter_mut().zip(extra) {
                        *g += e;
                    }
                }
            }
            let (lg, gin) = layer.backward(&cache.activations[l], &cache.pre[l], grad, rows, l > 0);
            layer_grads.push(lg);
            grad = gin.unwrap_or_default();
        }
        layer_grads.reverse();
        Ok((
            LossBreakdown {
                reconstruction,
                cross_entropy,
                total,
            },
            Gradients {
                layers: layer_grads,
                centers: center_grads,
            },
        ))
    }

    /// Adam update of the network weights with its own optimizer state.
    pub fn apply_gradients(&mut self, grads: &Gradients) -> Result<()> {
        check_dim(
            "gradient layers",
            self.encoder.len() + self.decoder.len(),
            grads.layers.len(),
        )?;
        let slices = grads.network_slices();
        let Self {
            encoder,
            decoder,
            optimizer,
            ..
        } = self;
        let mut params: Vec<&mut [f64]> = encoder
            .iter_mut()
            .chain(decoder.iter_mut())
            .flat_map(|l| l.params_mut())
            .collect();
        optimizer.step(&mut params, &slices)
    }

    /// One full-batch training step; returns the loss before the update.
    pub fn train_step(&mut self, x: &Tensor2, spec: &LossSpec<'_>) -> Result<LossBreakdown> {
        let (loss, grads) = self.loss_and_gradients(x, spec)?;
        self.apply_gradients(&grads)?;
        Ok(loss)
    }
}
