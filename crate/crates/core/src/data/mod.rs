//! Labeled datasets: a synthetic Gaussian generator and an MNIST IDX loader.

mod mnist;
mod synthetic;

use ndarray::{Array2, Axis};

use crate::error::{Error, Result};

pub use mnist::{load_mnist, mnist_paths, MnistSplit};
pub use synthetic::gen_synthetic;

/// Feature rows with one label per row.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledDataset {
    features: Array2<f64>,
    labels: Vec<usize>,
    classes: usize,
}

impl LabeledDataset {
    pub fn new(features: Array2<f64>, labels: Vec<usize>, classes: usize) -> Result<Self> {
        if features.nrows() != labels.len() {
            return Err(Error::shape("dataset rows", features.nrows(), labels.len()));
        }
        if let Some(&label) = labels.iter().find(|&&l| l >= classes) {
            return Err(Error::LabelOutOfRange { label, classes });
        }
        Ok(Self {
            features,
            labels,
            classes,
        })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn feature_dim(&self) -> usize {
        self.features.ncols()
    }

    pub fn classes(&self) -> usize {
        self.classes
    }

    pub fn features(&self) -> &Array2<f64> {
        &self.features
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    /// Rows at `indices`, in that order. Indices may repeat.
    pub fn subset(&self, indices: &[usize]) -> LabeledDataset {
        LabeledDataset {
            features: self.features.select(Axis(0), indices),
            labels: indices.iter().map(|&i| self.labels[i]).collect(),
            classes: self.classes,
        }
    }

    pub fn class_counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.classes];
        for &l in &self.labels {
            counts[l] += 1;
        }
        counts
    }
}

/// Sample indices grouped by label, ascending within each group.
pub fn partition_by_class(data: &LabeledDataset) -> Vec<Vec<usize>> {
    let mut groups = vec![Vec::new(); data.classes];
    for (i, &l) in data.labels.iter().enumerate() {
        groups[l].push(i);
    }
    groups
}
