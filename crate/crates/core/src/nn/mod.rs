//! Dense feed-forward classifier with manual backpropagation.
//!
//! Layers compute `activation(x · Wᵀ + b)` with `W` stored as
//! `(out_neurons, in_neurons)`. Hidden layers use ReLU or identity, the output
//! layer is always softmax and the loss is mean cross-entropy.
//!
//! Row `i` of the output layer's weight matrix holds the weights feeding the
//! output neuron of label `i` from the penultimate layer. Those rows, and
//! their per-round changes, are what the attacks in [`crate::attack`] read.

mod codec;
mod delta;

use std::path::Path;

use ndarray::{Array1, Array2, ArrayView2, Axis, Zip};
use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::{Distribution, Uniform};

use crate::data::LabeledDataset;
use crate::error::{Error, Result};

pub use delta::{delta, inputting_weight_updates, LayerUpdate, UpdateDelta};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Activation {
    Relu,
    Identity,
    /// Only valid on the output layer.
    Softmax,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DenseLayer {
    weights: Array2<f64>,
    bias: Array1<f64>,
    activation: Activation,
}

impl DenseLayer {
    pub fn new(weights: Array2<f64>, bias: Array1<f64>, activation: Activation) -> Result<Self> {
        if weights.nrows() == 0 || weights.ncols() == 0 {
            return Err(Error::InvalidArgument("layer dimensions must be > 0".into()));
        }
        if bias.len() != weights.nrows() {
            return Err(Error::shape("layer bias", weights.nrows(), bias.len()));
        }
        let layer = Self {
            weights,
            bias,
            activation,
        };
        if !layer.is_finite() {
            return Err(Error::InvalidArgument("layer parameters must be finite".into()));
        }
        Ok(layer)
    }

    pub fn weights(&self) -> &Array2<f64> {
        &self.weights
    }

    pub fn bias(&self) -> &Array1<f64> {
        &self.bias
    }

    pub fn activation(&self) -> Activation {
        self.activation
    }

    pub fn in_dim(&self) -> usize {
        self.weights.ncols()
    }

    pub fn out_dim(&self) -> usize {
        self.weights.nrows()
    }

    fn is_finite(&self) -> bool {
        self.weights.iter().chain(self.bias.iter()).all(|v| v.is_finite())
    }

    fn affine(&self, input: ArrayView2<'_, f64>) -> Array2<f64> {
        let mut z = input.dot(&self.weights.t());
        z += &self.bias;
        z
    }
}

/// Layer widths of a classifier, input first.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Architecture {
    pub input_dim: usize,
    pub hidden: Vec<usize>,
    pub classes: usize,
}

impl Architecture {
    pub fn new(input_dim: usize, hidden: Vec<usize>, classes: usize) -> Self {
        Self {
            input_dim,
            hidden,
            classes,
        }
    }

    /// Default small model: `input → 64 → 32 → classes`.
    pub fn desk(input_dim: usize, classes: usize) -> Self {
        Self::new(input_dim, vec![64, 32], classes)
    }

    /// MNIST MLP: `784 → 256 → 64 → 10`.
    pub fn mnist_mlp() -> Self {
        Self::new(784, vec![256, 64], 10)
    }

    fn dims(&self) -> Vec<(usize, usize)> {
        let mut widths = Vec::with_capacity(self.hidden.len() + 2);
        widths.push(self.input_dim);
        widths.extend_from_slice(&self.hidden);
        widths.push(self.classes);
        widths.windows(2).map(|w| (w[0], w[1])).collect()
    }
}

/// Local SGD hyper-parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainParams {
    pub lr: f64,
    pub epochs: usize,
    pub batch_size: usize,
}

impl TrainParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.lr.is_finite() && self.lr >= 0.0) {
            return Err(Error::InvalidArgument(format!(
                "learning rate must be finite and >= 0, got {}",
                self.lr
            )));
        }
        if self.epochs == 0 {
            return Err(Error::InvalidArgument("epochs must be >= 1".into()));
        }
        if self.batch_size == 0 {
            return Err(Error::InvalidArgument("batch size must be >= 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Network {
    layers: Vec<DenseLayer>,
}

/// Intermediate values kept for the backward pass.
struct Trace {
    /// Post-activation output of every hidden layer.
    hidden: Vec<Array2<f64>>,
    probs: Array2<f64>,
    /// Per-sample `ln p(label)`; only filled when labels were supplied.
    log_likelihood: Vec<f64>,
}

impl Network {
    pub fn new(layers: Vec<DenseLayer>) -> Result<Self> {
        let Some(last) = layers.last() else {
            return Err(Error::InvalidArgument("network needs at least one layer".into()));
        };
        if last.activation != Activation::Softmax {
            return Err(Error::InvalidArgument("output layer must use softmax".into()));
        }
        if last.out_dim() < 2 {
            return Err(Error::InvalidArgument("need at least two classes".into()));
        }
        for (i, pair) in layers.windows(2).enumerate() {
            if pair[0].activation == Activation::Softmax {
                return Err(Error::InvalidArgument(format!(
                    "softmax is only allowed on the output layer (layer {i})"
                )));
            }
            if pair[1].in_dim() != pair[0].out_dim() {
                return Err(Error::shape(
                    "adjacent layer widths",
                    pair[0].out_dim(),
                    pair[1].in_dim(),
                ));
            }
        }
        Ok(Self { layers })
    }

    /// Uniform `[-1/√fan_in, 1/√fan_in]` initialization of weights and biases.
    pub fn init<R: Rng + ?Sized>(arch: &Architecture, rng: &mut R) -> Result<Self> {
        Self::build(arch, |fan_in, rows, cols| {
            let limit = 1.0 / (fan_in as f64).sqrt();
            let dist = Uniform::new_inclusive(-limit, limit)
                .map_err(|e| Error::InvalidArgument(e.to_string()))?;
            let weights = Array2::from_shape_simple_fn((rows, cols), || dist.sample(rng));
            let bias = Array1::from_shape_simple_fn(rows, || dist.sample(rng));
            Ok((weights, bias))
        })
    }

    /// All-zero parameters; predicts the uniform distribution everywhere.
    pub fn zeros(arch: &Architecture) -> Result<Self> {
        Self::build(arch, |_, rows, cols| {
            Ok((Array2::zeros((rows, cols)), Array1::zeros(rows)))
        })
    }

    fn build(
        arch: &Architecture,
        mut make: impl FnMut(usize, usize, usize) -> Result<(Array2<f64>, Array1<f64>)>,
    ) -> Result<Self> {
        let dims = arch.dims();
        let last = dims.len() - 1;
        let layers = dims
            .into_iter()
            .enumerate()
            .map(|(i, (fan_in, fan_out))| {
                if fan_in == 0 || fan_out == 0 {
                    return Err(Error::InvalidArgument("layer widths must be > 0".into()));
                }
                let (weights, bias) = make(fan_in, fan_out, fan_in)?;
                let activation = if i == last {
                    Activation::Softmax
                } else {
                    Activation::Relu
                };
                DenseLayer::new(weights, bias, activation)
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(layers)
    }

    pub fn layers(&self) -> &[DenseLayer] {
        &self.layers
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].in_dim()
    }

    pub fn classes(&self) -> usize {
        self.output_layer().out_dim()
    }

    /// Width of the layer feeding the output layer.
    pub fn penultimate_width(&self) -> usize {
        self.output_layer().in_dim()
    }

    pub fn output_layer(&self) -> &DenseLayer {
        self.layers.last().expect("network has at least one layer")
    }

    pub fn parameter_count(&self) -> usize {
        self.layers
            .iter()
            .map(|l| l.weights.len() + l.bias.len())
            .sum()
    }

    pub fn is_finite(&self) -> bool {
        self.layers.iter().all(DenseLayer::is_finite)
    }

    fn check_batch(&self, batch: &ArrayView2<'_, f64>) -> Result<()> {
        if batch.ncols() != self.input_dim() {
            return Err(Error::shape("batch feature width", self.input_dim(), batch.ncols()));
        }
        Ok(())
    }

    fn check_labels(&self, batch: &ArrayView2<'_, f64>, labels: &[usize]) -> Result<()> {
        if labels.len() != batch.nrows() {
            return Err(Error::shape("label count", batch.nrows(), labels.len()));
        }
        let classes = self.classes();
        if let Some(&label) = labels.iter().find(|&&l| l >= classes) {
            return Err(Error::LabelOutOfRange { label, classes });
        }
        Ok(())
    }

    fn trace(&self, batch: ArrayView2<'_, f64>, labels: Option<&[usize]>) -> Trace {
        let (output, hidden_layers) = self.layers.split_last().expect("non-empty");
        let mut hidden: Vec<Array2<f64>> = Vec::with_capacity(hidden_layers.len());
        for layer in hidden_layers {
            let input = hidden.last().map_or(batch, |a| a.view());
            let mut z = layer.affine(input);
            if layer.activation == Activation::Relu {
                z.mapv_inplace(|v| v.max(0.0));
            }
            hidden.push(z);
        }
        let input = hidden.last().map_or(batch, |a| a.view());
        let mut probs = output.affine(input);
        let mut log_likelihood = Vec::new();
        for (i, mut row) in probs.axis_iter_mut(Axis(0)).enumerate() {
            let max = row.fold(f64::NEG_INFINITY, |m, &v| m.max(v));
            row.mapv_inplace(|v| v - max);
            let log_sum = row.fold(0.0, |s, &v| s + v.exp()).ln();
            if let Some(labels) = labels {
                log_likelihood.push(row[labels[i]] - log_sum);
            }
            row.mapv_inplace(|v| (v - log_sum).exp());
        }
        Trace {
            hidden,
            probs,
            log_likelihood,
        }
    }

    /// Class-probability rows for a batch of samples.
    pub fn forward(&self, batch: ArrayView2<'_, f64>) -> Result<Array2<f64>> {
        self.check_batch(&batch)?;
        Ok(self.trace(batch, None).probs)
    }

    /// Argmax predictions; ties resolve to the lowest label.
    pub fn predict(&self, batch: ArrayView2<'_, f64>) -> Result<Vec<usize>> {
        let probs = self.forward(batch)?;
        Ok(probs
            .axis_iter(Axis(0))
            .map(|row| {
                row.iter()
                    .enumerate()
                    .fold((0, f64::NEG_INFINITY), |best, (i, &p)| {
                        if p > best.1 {
                            (i, p)
                        } else {
                            best
                        }
                    })
                    .0
            })
            .collect())
    }

    /// Fraction of correctly classified samples.
    pub fn accuracy(&self, data: &LabeledDataset) -> Result<f64> {
        if data.is_empty() {
            return Err(Error::EmptyData);
        }
        let mut correct = 0usize;
        let features = data.features();
        for start in (0..data.len()).step_by(1024) {
            let end = (start + 1024).min(data.len());
            let chunk = features.slice(ndarray::s![start..end, ..]);
            let predicted = self.predict(chunk)?;
            correct += predicted
                .iter()
                .zip(&data.labels()[start..end])
                .filter(|(p, l)| p == l)
                .count();
        }
        Ok(correct as f64 / data.len() as f64)
    }

    /// Mean cross-entropy over the batch.
    pub fn loss(&self, batch: ArrayView2<'_, f64>, labels: &[usize]) -> Result<f64> {
        self.check_batch(&batch)?;
        self.check_labels(&batch, labels)?;
        if labels.is_empty() {
            return Err(Error::EmptyData);
        }
        let trace = self.trace(batch, Some(labels));
        Ok(-trace.log_likelihood.iter().sum::<f64>() / labels.len() as f64)
    }

    /// Mean cross-entropy and its gradient with respect to every parameter.
    pub fn loss_and_gradient(
        &self,
        batch: ArrayView2<'_, f64>,
        labels: &[usize],
    ) -> Result<(f64, UpdateDelta)> {
        self.check_batch(&batch)?;
        self.check_labels(&batch, labels)?;
        if labels.is_empty() {
            return Err(Error::EmptyData);
        }
        let n = labels.len() as f64;
        let trace = self.trace(batch, Some(labels));
        let loss = -trace.log_likelihood.iter().sum::<f64>() / n;

        // d(loss)/d(logits) = (p - onehot) / n
        let mut dz = trace.probs;
        for (row, &label) in dz.axis_iter_mut(Axis(0)).zip(labels) {
            let mut row = row;
            row[label] -= 1.0;
        }
        dz.mapv_inplace(|v| v / n);

        let mut grads: Vec<LayerUpdate> = Vec::with_capacity(self.layers.len());
        for l in (0..self.layers.len()).rev() {
            let input = if l == 0 {
                batch
            } else {
                trace.hidden[l - 1].view()
            };
            let weights = dz.t().dot(&input);
            let bias = dz.sum_axis(Axis(0));
            if l > 0 {
                let mut upstream = dz.dot(&self.layers[l].weights);
                if self.layers[l - 1].activation == Activation::Relu {
                    Zip::from(&mut upstream)
                        .and(&trace.hidden[l - 1])
                        .for_each(|g, &a| {
                            if a <= 0.0 {
                                *g = 0.0;
                            }
                        });
                }
                dz = upstream;
            }
            grads.push(LayerUpdate { weights, bias });
        }
        grads.reverse();
        Ok((loss, UpdateDelta::from_layers(grads)))
    }

    /// `self + update`, checked for shape.
    pub fn apply(&self, update: &UpdateDelta) -> Result<Network> {
        update.check_compatible(self)?;
        let mut next = self.clone();
        for (layer, u) in next.layers.iter_mut().zip(update.layers()) {
            layer.weights += &u.weights;
            layer.bias += &u.bias;
        }
        Ok(next)
    }

    fn sgd_step(&mut self, grads: &UpdateDelta, lr: f64) {
        for (layer, g) in self.layers.iter_mut().zip(grads.layers()) {
            layer.weights.scaled_add(-lr, &g.weights);
            layer.bias.scaled_add(-lr, &g.bias);
        }
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        codec::encode_network(self)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        codec::decode_network(bytes)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_bytes()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        Self::from_bytes(&bytes)
    }
}

/// Trains a copy of `net` with mini-batch SGD on `data`.
///
/// Samples are reshuffled every epoch from `rng`; the last partial batch is
/// kept. The input network is never modified.
pub fn train_local<R: Rng + ?Sized>(
    net: &Network,
    data: &LabeledDataset,
    params: &TrainParams,
    rng: &mut R,
) -> Result<Network> {
    params.validate()?;
    if data.is_empty() {
        return Err(Error::EmptyData);
    }
    if data.feature_dim() != net.input_dim() {
        return Err(Error::shape("training features", net.input_dim(), data.feature_dim()));
    }
    if data.classes() > net.classes() {
        return Err(Error::shape("class count", net.classes(), data.classes()));
    }

    let mut model = net.clone();
    let mut order: Vec<usize> = (0..data.len()).collect();
    let mut labels = Vec::with_capacity(params.batch_size);
    for epoch in 0..params.epochs {
        order.shuffle(rng);
        for (batch_index, chunk) in order.chunks(params.batch_size).enumerate() {
            let batch = data.features().select(Axis(0), chunk);
            labels.clear();
            labels.extend(chunk.iter().map(|&i| data.labels()[i]));
            let (loss, grads) = model.loss_and_gradient(batch.view(), &labels)?;
            if !loss.is_finite() {
                return Err(Error::NonFinite {
                    epoch,
                    batch: batch_index,
                });
            }
            model.sgd_step(&grads, params.lr);
            if !model.is_finite() {
                return Err(Error::NonFinite {
                    epoch,
                    batch: batch_index,
                });
            }
        }
    }
    Ok(model)
}
