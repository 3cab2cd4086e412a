//! Passive label-composition inference from consecutive global models.
//!
//! Nothing here reads simulator ground truth. Every attack is a function of
//! the two global models of a round, the attacker's priors about the
//! federation, its auxiliary data and a seed.

mod quantity;
mod sniff;
mod whole;

use ndarray::Array1;
use rayon::prelude::*;

use crate::cluster::{Cut, Linkage};
use crate::data::LabeledDataset;
use crate::error::{Error, Result};
use crate::nn::{delta, train_local, Network, TrainParams, UpdateDelta};
use crate::rng::{stream, Purpose};

pub use quantity::{quantity_infer, QuantityEstimate};
pub use sniff::{class_sniff, sniff_thresholds, Presence, SniffThresholds};
pub use whole::{ratio_vector, ratio_vectors, whole_determination, RATIO_CAP};

/// Below this magnitude a denominator counts as zero.
pub const DIVISION_GUARD: f64 = 1e-12;

/// What the attacker assumes about the federation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AttackPriors {
    pub n_participants: usize,
    pub selection_fraction: f64,
    /// Average number of labels a selected client trains on.
    pub labels_per_client: f64,
}

impl AttackPriors {
    /// Expected number of clients per round, `N_p · P`, kept real-valued.
    pub fn clients_per_round(&self) -> f64 {
        self.n_participants as f64 * self.selection_fraction
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AttackConfig {
    /// Relative margin above the sniffing threshold required for "present".
    pub margin: f64,
    /// Ratio filter `|w_n| / |w_p|` bound for quantity inference.
    pub ratio_threshold: f64,
    /// Abort when the candidates' standard deviation exceeds this fraction
    /// of the clients per round.
    pub abort_k: f64,
    pub linkage: Linkage,
    pub cut: Cut,
}

impl Default for AttackConfig {
    fn default() -> Self {
        Self {
            margin: 0.25,
            ratio_threshold: 0.5,
            abort_k: 0.2,
            linkage: Linkage::Complete,
            cut: Cut::Relative(0.5),
        }
    }
}

/// Samples the attacker holds, one dataset per label.
#[derive(Debug, Clone)]
pub struct AuxiliaryData {
    per_label: Vec<Option<LabeledDataset>>,
}

impl AuxiliaryData {
    pub fn new(per_label: Vec<Option<LabeledDataset>>) -> Self {
        Self { per_label }
    }

    /// Takes up to `per_label` samples of each class from `pool`, in pool
    /// order.
    pub fn from_pool(pool: &LabeledDataset, per_label: usize) -> Self {
        let by_class = crate::data::partition_by_class(pool);
        Self {
            per_label: by_class
                .iter()
                .map(|idx| {
                    let take = &idx[..idx.len().min(per_label)];
                    (!take.is_empty()).then(|| pool.subset(take))
                })
                .collect(),
        }
    }

    pub fn labels(&self) -> usize {
        self.per_label.len()
    }

    pub fn get(&self, label: usize) -> Result<&LabeledDataset> {
        self.per_label
            .get(label)
            .and_then(Option::as_ref)
            .filter(|d| !d.is_empty())
            .ok_or(Error::MissingAuxiliary(label))
    }
}

/// Single-label local updates computed on one global model.
#[derive(Debug, Clone, PartialEq)]
pub struct LocalDeltaBank {
    pub round: usize,
    deltas: Vec<UpdateDelta>,
}

impl LocalDeltaBank {
    pub fn from_deltas(round: usize, deltas: Vec<UpdateDelta>) -> Result<Self> {
        if deltas.len() < 2 {
            return Err(Error::InvalidArgument("a delta bank needs at least two labels".into()));
        }
        let classes = deltas[0].classes();
        let width = deltas[0].output_layer().weights.ncols();
        if deltas.len() != classes {
            return Err(Error::shape("delta bank labels", classes, deltas.len()));
        }
        for d in &deltas {
            let w = &d.output_layer().weights;
            if w.dim() != (classes, width) {
                return Err(Error::shape(
                    "delta bank output layer",
                    format!("{:?}", (classes, width)),
                    format!("{:?}", w.dim()),
                ));
            }
        }
        Ok(Self { round, deltas })
    }

    pub fn labels(&self) -> usize {
        self.deltas.len()
    }

    pub fn width(&self) -> usize {
        self.deltas[0].output_layer().weights.ncols()
    }

    pub fn delta(&self, label: usize) -> &UpdateDelta {
        &self.deltas[label]
    }

    pub fn deltas(&self) -> &[UpdateDelta] {
        &self.deltas
    }

    /// Change of the inputting weights of output `row` when training on
    /// `trained` alone.
    pub fn update(&self, trained: usize, row: usize) -> ndarray::ArrayView1<'_, f64> {
        self.deltas[trained].output_layer().weights.row(row)
    }

    /// Elementwise mean of `update(j, row)` over every `j != row`.
    pub fn cross_mean(&self, row: usize) -> Array1<f64> {
        let mut acc = Array1::zeros(self.width());
        for j in (0..self.labels()).filter(|&j| j != row) {
            acc += &self.update(j, row);
        }
        acc / (self.labels() - 1) as f64
    }
}

/// Trains a copy of `global` on each label's auxiliary data alone.
pub fn build_delta_bank(
    global: &Network,
    aux: &AuxiliaryData,
    params: &TrainParams,
    seed: u64,
    round: usize,
) -> Result<LocalDeltaBank> {
    let classes = global.classes();
    let deltas = (0..classes)
        .into_par_iter()
        .map(|label| {
            let data = aux.get(label)?;
            let mut rng = stream(seed, Purpose::AttackerTraining, round as u64, label as u64);
            let local = train_local(global, data, params, &mut rng)?;
            delta(&local, global)
        })
        .collect::<Result<Vec<_>>>()?;
    LocalDeltaBank::from_deltas(round, deltas)
}

/// Removes an attacking participant's own upload from the observed mean
/// update.
pub fn remove_own_contribution(
    observed: &UpdateDelta,
    own: &UpdateDelta,
    priors: &AttackPriors,
) -> Result<UpdateDelta> {
    let mut out = observed.clone();
    out.scaled_add(-1.0 / priors.clients_per_round(), own)?;
    Ok(out)
}

#[derive(Debug, Clone, PartialEq)]
pub struct LabelFinding {
    pub label: usize,
    pub presence: Presence,
    /// Only computed for labels sniffed as present.
    pub quantity: Option<QuantityEstimate>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AttackReport {
    pub round: usize,
    pub findings: Vec<LabelFinding>,
}

/// Class sniffing for every label, then quantity inference for each label
/// found present.
#[allow(clippy::too_many_arguments)]
pub fn attack_round(
    round: usize,
    before: &Network,
    after: &Network,
    aux: &AuxiliaryData,
    params: &TrainParams,
    priors: &AttackPriors,
    cfg: &AttackConfig,
    seed: u64,
    own_delta: Option<&UpdateDelta>,
) -> Result<AttackReport> {
    let mut observed = delta(after, before)?;
    if let Some(own) = own_delta {
        observed = remove_own_contribution(&observed, own, priors)?;
    }
    let bank = build_delta_bank(before, aux, params, seed, round)?;
    let th = sniff_thresholds(&bank, priors, cfg.margin)?;
    let findings = (0..bank.labels())
        .map(|label| {
            let presence = class_sniff(&observed, &th, label)?;
            let quantity = if presence.present {
                Some(quantity_infer(&observed, &bank, priors, label, cfg)?)
            } else {
                None
            };
            Ok(LabelFinding {
                label,
                presence,
                quantity,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(AttackReport { round, findings })
}
