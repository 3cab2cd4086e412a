use ndarray::{Array1, Array2};

use super::{codec, Network};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct LayerUpdate {
    pub weights: Array2<f64>,
    pub bias: Array1<f64>,
}

/// Parameter-wise difference between two networks of the same shape.
///
/// Also used for gradients, which share the layout.
#[derive(Debug, Clone, PartialEq)]
pub struct UpdateDelta {
    layers: Vec<LayerUpdate>,
}

impl UpdateDelta {
    pub fn from_layers(layers: Vec<LayerUpdate>) -> Self {
        Self { layers }
    }

    pub fn zeros_like(net: &Network) -> Self {
        Self {
            layers: net
                .layers()
                .iter()
                .map(|l| LayerUpdate {
                    weights: Array2::zeros(l.weights().raw_dim()),
                    bias: Array1::zeros(l.bias().len()),
                })
                .collect(),
        }
    }

    pub fn layers(&self) -> &[LayerUpdate] {
        &self.layers
    }

    pub fn layers_mut(&mut self) -> &mut [LayerUpdate] {
        &mut self.layers
    }

    pub fn output_layer(&self) -> &LayerUpdate {
        self.layers.last().expect("update has at least one layer")
    }

    pub fn output_layer_mut(&mut self) -> &mut LayerUpdate {
        self.layers.last_mut().expect("update has at least one layer")
    }

    /// Number of output rows, one per label.
    pub fn classes(&self) -> usize {
        self.output_layer().weights.nrows()
    }

    /// Change of the weights feeding the output neuron of `label`.
    pub fn inputting_weight_updates(&self, label: usize) -> Result<Array1<f64>> {
        let out = &self.output_layer().weights;
        if label >= out.nrows() {
            return Err(Error::LabelOutOfRange {
                label,
                classes: out.nrows(),
            });
        }
        Ok(out.row(label).to_owned())
    }

    pub fn check_compatible(&self, net: &Network) -> Result<()> {
        if self.layers.len() != net.layers().len() {
            return Err(Error::shape(
                "update layer count",
                net.layers().len(),
                self.layers.len(),
            ));
        }
        for (u, l) in self.layers.iter().zip(net.layers()) {
            if u.weights.dim() != l.weights().dim() || u.bias.len() != l.bias().len() {
                return Err(Error::shape(
                    "update layer shape",
                    format!("{:?}", l.weights().dim()),
                    format!("{:?}", u.weights.dim()),
                ));
            }
        }
        Ok(())
    }

    fn check_same_shape(&self, other: &UpdateDelta) -> Result<()> {
        let same = self.layers.len() == other.layers.len()
            && self
                .layers
                .iter()
                .zip(&other.layers)
                .all(|(a, b)| a.weights.dim() == b.weights.dim() && a.bias.len() == b.bias.len());
        if same {
            Ok(())
        } else {
            Err(Error::shape(
                "update shapes",
                format!("{} layers", self.layers.len()),
                format!("{} layers (or differing widths)", other.layers.len()),
            ))
        }
    }

    pub fn add_assign(&mut self, other: &UpdateDelta) -> Result<()> {
        self.scaled_add(1.0, other)
    }

    /// `self += factor * other`.
    pub fn scaled_add(&mut self, factor: f64, other: &UpdateDelta) -> Result<()> {
        self.check_same_shape(other)?;
        for (a, b) in self.layers.iter_mut().zip(&other.layers) {
            a.weights.scaled_add(factor, &b.weights);
            a.bias.scaled_add(factor, &b.bias);
        }
        Ok(())
    }

    pub fn scale(&mut self, factor: f64) {
        for l in &mut self.layers {
            l.weights.mapv_inplace(|v| v * factor);
            l.bias.mapv_inplace(|v| v * factor);
        }
    }

    pub fn values(&self) -> impl Iterator<Item = f64> + '_ {
        self.layers
            .iter()
            .flat_map(|l| l.weights.iter().chain(l.bias.iter()).copied())
    }

    pub fn is_zero(&self) -> bool {
        self.values().all(|v| v == 0.0)
    }

    pub fn max_abs(&self) -> f64 {
        self.values().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        codec::encode_update(self)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        codec::decode_update(bytes)
    }
}

/// Element-wise `after - before`.
pub fn delta(after: &Network, before: &Network) -> Result<UpdateDelta> {
    if after.layers().len() != before.layers().len() {
        return Err(Error::shape(
            "delta layer count",
            before.layers().len(),
            after.layers().len(),
        ));
    }
    let layers = after
        .layers()
        .iter()
        .zip(before.layers())
        .map(|(a, b)| {
            if a.weights().dim() != b.weights().dim() {
                return Err(Error::shape(
                    "delta layer shape",
                    format!("{:?}", b.weights().dim()),
                    format!("{:?}", a.weights().dim()),
                ));
            }
            Ok(LayerUpdate {
                weights: a.weights() - b.weights(),
                bias: a.bias() - b.bias(),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(UpdateDelta { layers })
}

pub fn inputting_weight_updates(update: &UpdateDelta, label: usize) -> Result<Array1<f64>> {
    update.inputting_weight_updates(label)
}
