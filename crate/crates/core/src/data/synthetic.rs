use ndarray::Array2;
use rand::Rng;
use rand_distr::{Distribution, Normal};

use super::LabeledDataset;
use crate::error::{Error, Result};

/// `per_class` Gaussian samples around each class mean, class-major order.
///
/// Class `c` is centred on the scaled corner `(1 + c / dim) · e_(c mod dim)`,
/// so means are distinct even when `classes > dim`. `spread` is the
/// per-coordinate standard deviation.
pub fn gen_synthetic<R: Rng + ?Sized>(
    classes: usize,
    dim: usize,
    per_class: usize,
    spread: f64,
    rng: &mut R,
) -> Result<LabeledDataset> {
    if classes < 2 {
        return Err(Error::InvalidArgument("need at least 2 classes".into()));
    }
    if dim < 2 {
        return Err(Error::InvalidArgument("need at least 2 feature dimensions".into()));
    }
    if per_class == 0 {
        return Err(Error::InvalidArgument("per_class must be >= 1".into()));
    }
    if !(spread.is_finite() && spread > 0.0) {
        return Err(Error::InvalidArgument(format!("spread must be > 0, got {spread}")));
    }
    let noise = Normal::new(0.0, spread).map_err(|e| Error::InvalidArgument(e.to_string()))?;
    let n = classes * per_class;
    let mut features = Array2::zeros((n, dim));
    let mut labels = Vec::with_capacity(n);
    for (row, mut sample) in features.rows_mut().into_iter().enumerate() {
        let class = row / per_class;
        for v in sample.iter_mut() {
            *v = noise.sample(rng);
        }
        sample[class % dim] += 1.0 + (class / dim) as f64;
        labels.push(class);
    }
    LabeledDataset::new(features, labels, classes)
}
