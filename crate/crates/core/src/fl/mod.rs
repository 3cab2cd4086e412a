//! Federated-averaging simulator.
//!
//! Clients hold label-skewed shards of a dataset. Each round a random subset
//! trains locally from the current global model and the server adds the mean
//! of their parameter deltas. Observers outside the simulator only ever see
//! consecutive global models; per-round ground truth is returned separately
//! in [`RoundTruth`] for evaluation.

mod allocation;
mod compress;
mod round;

use crate::error::{Error, Result};
use crate::nn::TrainParams;

pub use allocation::{
    allocate, allocate_planted, plant_groups, ClientShard, LabelAllocation, PlantedComposition,
};
pub use compress::compress_update;
pub use round::{run_round, select_clients, GlobalObservation, RoundOutcome, RoundTruth, Simulator};

#[derive(Debug, Clone, PartialEq)]
pub struct FlConfig {
    /// `N_p`.
    pub n_participants: usize,
    /// `P`, fraction of participants selected per round.
    pub selection_fraction: f64,
    pub local_batch_size: usize,
    pub local_lr: f64,
    pub local_epochs: usize,
    /// `N_L`, average number of main labels per client.
    pub avg_labels_per_client: f64,
    pub rounds: usize,
    pub seed: u64,
    /// Fraction of each output row's smallest-magnitude updates a client
    /// withholds before upload. Zero disables compression.
    pub compression_rate: f64,
    pub main_labels_choices: Vec<usize>,
    pub samples_per_main_label: usize,
    pub samples_per_minor_label: usize,
    /// Fall back to sampling with replacement when a class runs out.
    pub allow_replacement: bool,
}

impl Default for FlConfig {
    fn default() -> Self {
        Self {
            n_participants: 100,
            selection_fraction: 0.1,
            local_batch_size: 64,
            local_lr: 0.01,
            local_epochs: 3,
            avg_labels_per_client: 4.0,
            rounds: 100,
            seed: 0,
            compression_rate: 0.0,
            main_labels_choices: vec![3, 4, 5],
            samples_per_main_label: 64,
            samples_per_minor_label: 2,
            allow_replacement: false,
        }
    }
}

impl FlConfig {
    /// Clients per round: `round(N_p · P)`.
    pub fn selected_count(&self) -> usize {
        (self.n_participants as f64 * self.selection_fraction).round() as usize
    }

    pub fn train_params(&self) -> TrainParams {
        TrainParams {
            lr: self.local_lr,
            epochs: self.local_epochs,
            batch_size: self.local_batch_size,
        }
    }

    pub fn mean_main_labels(&self) -> f64 {
        if self.main_labels_choices.is_empty() {
            return 0.0;
        }
        self.main_labels_choices.iter().sum::<usize>() as f64 / self.main_labels_choices.len() as f64
    }

    pub fn validate(&self, classes: usize) -> Result<()> {
        let invalid = |msg: String| Err(Error::InvalidArgument(msg));
        if self.n_participants == 0 {
            return invalid("n_participants must be >= 1".into());
        }
        if !(self.selection_fraction > 0.0 && self.selection_fraction <= 1.0) {
            return invalid(format!(
                "selection_fraction must be in (0, 1], got {}",
                self.selection_fraction
            ));
        }
        if self.selected_count() == 0 {
            return invalid("round(n_participants * selection_fraction) must be >= 1".into());
        }
        if !(0.0..1.0).contains(&self.compression_rate) {
            return invalid(format!(
                "compression_rate must be in [0, 1), got {}",
                self.compression_rate
            ));
        }
        if self.main_labels_choices.is_empty() {
            return invalid("main_labels_choices must not be empty".into());
        }
        if let Some(&c) = self
            .main_labels_choices
            .iter()
            .find(|&&c| c == 0 || c > classes)
        {
            return invalid(format!("main label count {c} outside 1..={classes}"));
        }
        if self.samples_per_main_label == 0 {
            return invalid("samples_per_main_label must be >= 1".into());
        }
        if !(self.avg_labels_per_client.is_finite() && self.avg_labels_per_client > 0.0) {
            return invalid("avg_labels_per_client must be > 0".into());
        }
        self.train_params().validate()
    }
}
