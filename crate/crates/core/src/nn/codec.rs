//! Binary model format.
//!
//! ```text
//! magic    "FLNN"
//! version  u32 LE (1)
//! kind     u8   (0 = network, 1 = update)
//! layers   u32 LE
//! per layer:
//!   rows u32 LE, cols u32 LE, activation u8 (0 relu, 1 identity, 2 softmax, 255 none)
//!   rows*cols f64 LE weights, row-major
//!   rows f64 LE bias
//! ```
//!
//! Values are stored as raw IEEE-754 bits, so round trips are bit-exact.

use ndarray::{Array1, Array2};

use super::{Activation, DenseLayer, LayerUpdate, Network, UpdateDelta};
use crate::error::{Error, Result};

const MAGIC: &[u8; 4] = b"FLNN";
const VERSION: u32 = 1;
const KIND_NETWORK: u8 = 0;
const KIND_UPDATE: u8 = 1;
const NO_ACTIVATION: u8 = 255;

fn activation_tag(a: Activation) -> u8 {
    match a {
        Activation::Relu => 0,
        Activation::Identity => 1,
        Activation::Softmax => 2,
    }
}

fn activation_from_tag(tag: u8) -> Result<Activation> {
    match tag {
        0 => Ok(Activation::Relu),
        1 => Ok(Activation::Identity),
        2 => Ok(Activation::Softmax),
        other => Err(Error::Decode(format!("unknown activation tag {other}"))),
    }
}

fn encode<'a>(
    kind: u8,
    layers: impl ExactSizeIterator<Item = (u8, &'a Array2<f64>, &'a Array1<f64>)>,
) -> Vec<u8> {
    let mut out = Vec::new();
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.push(kind);
    out.extend_from_slice(&(layers.len() as u32).to_le_bytes());
    for (tag, weights, bias) in layers {
        out.extend_from_slice(&(weights.nrows() as u32).to_le_bytes());
        out.extend_from_slice(&(weights.ncols() as u32).to_le_bytes());
        out.push(tag);
        for v in weights.iter().chain(bias.iter()) {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    out
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|&e| e <= self.bytes.len())
            .ok_or_else(|| Error::Decode("unexpected end of data".into()))?;
        let slice = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(slice)
    }

    fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }

    fn f64s(&mut self, n: usize) -> Result<Vec<f64>> {
        let len = n
            .checked_mul(8)
            .ok_or_else(|| Error::Decode("layer too large".into()))?;
        Ok(self
            .take(len)?
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
            .collect())
    }
}

type RawLayer = (u8, Array2<f64>, Array1<f64>);

fn decode(bytes: &[u8], expected_kind: u8) -> Result<Vec<RawLayer>> {
    let mut r = Reader { bytes, pos: 0 };
    if r.take(4)? != MAGIC {
        return Err(Error::Decode("bad magic".into()));
    }
    let version = r.u32()?;
    if version != VERSION {
        return Err(Error::Decode(format!("unsupported version {version}")));
    }
    let kind = r.u8()?;
    if kind != expected_kind {
        return Err(Error::Decode(format!("unexpected payload kind {kind}")));
    }
    let count = r.u32()? as usize;
    let mut layers = Vec::with_capacity(count.min(64));
    for _ in 0..count {
        let rows = r.u32()? as usize;
        let cols = r.u32()? as usize;
        let tag = r.u8()?;
        let weights = Array2::from_shape_vec((rows, cols), r.f64s(rows * cols)?)
            .map_err(|e| Error::Decode(e.to_string()))?;
        let bias = Array1::from_vec(r.f64s(rows)?);
        layers.push((tag, weights, bias));
    }
    if r.pos != bytes.len() {
        return Err(Error::Decode("trailing bytes".into()));
    }
    Ok(layers)
}

pub(super) fn encode_network(net: &Network) -> Vec<u8> {
    encode(
        KIND_NETWORK,
        net.layers()
            .iter()
            .map(|l| (activation_tag(l.activation()), l.weights(), l.bias())),
    )
}

pub(super) fn decode_network(bytes: &[u8]) -> Result<Network> {
    let layers = decode(bytes, KIND_NETWORK)?
        .into_iter()
        .map(|(tag, w, b)| DenseLayer::new(w, b, activation_from_tag(tag)?))
        .collect::<Result<Vec<_>>>()?;
    Network::new(layers)
}

pub(super) fn encode_update(update: &UpdateDelta) -> Vec<u8> {
    encode(
        KIND_UPDATE,
        update
            .layers()
            .iter()
            .map(|l| (NO_ACTIVATION, &l.weights, &l.bias)),
    )
}

pub(super) fn decode_update(bytes: &[u8]) -> Result<UpdateDelta> {
    let layers = decode(bytes, KIND_UPDATE)?
        .into_iter()
        .map(|(_, weights, bias)| LayerUpdate { weights, bias })
        .collect();
    Ok(UpdateDelta::from_layers(layers))
}
