use ndarray::Array1;

use super::{AttackPriors, LocalDeltaBank};
use crate::error::{Error, Result};
use crate::nn::UpdateDelta;

/// Per-label worst-case inputting-weight updates for one round.
///
/// Thresholds are on the scale of the summed update of a whole round's
/// clients; [`class_sniff`] rescales the observed mean update to match.
#[derive(Debug, Clone, PartialEq)]
pub struct SniffThresholds {
    pub round: usize,
    pub thresholds: Vec<Array1<f64>>,
    /// Clients per round, used to bring observed means to the threshold scale.
    pub clients_per_round: f64,
    pub margin: f64,
}

/// Threshold for label `i`: the update its inputting weights would receive
/// if every label trained in the round were some other label,
/// `N_p · P · N_L · mean_{j != i} update(j, i)` elementwise.
pub fn sniff_thresholds(bank: &LocalDeltaBank, priors: &AttackPriors, margin: f64) -> Result<SniffThresholds> {
    if bank.labels() < 2 {
        return Err(Error::InvalidArgument("thresholds need at least two labels".into()));
    }
    let scale = priors.clients_per_round() * priors.labels_per_client;
    Ok(SniffThresholds {
        round: bank.round,
        thresholds: (0..bank.labels()).map(|i| bank.cross_mean(i) * scale).collect(),
        clients_per_round: priors.clients_per_round(),
        margin,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Presence {
    pub present: bool,
    /// Observed update of the label's inputting weights, averaged over the
    /// row and scaled to a round total.
    pub score: f64,
    /// Mean of the label's threshold vector.
    pub threshold: f64,
}

/// Present iff `score > t + margin · |t|` with `t` the mean threshold.
pub fn class_sniff(global_delta: &UpdateDelta, th: &SniffThresholds, label: usize) -> Result<Presence> {
    let row = global_delta.inputting_weight_updates(label)?;
    let t_vec = th.thresholds.get(label).ok_or(Error::LabelOutOfRange {
        label,
        classes: th.thresholds.len(),
    })?;
    if row.len() != t_vec.len() {
        return Err(Error::shape("sniffed row", t_vec.len(), row.len()));
    }
    let score = th.clients_per_round * row.mean().unwrap_or(0.0);
    let threshold = t_vec.mean().unwrap_or(0.0);
    Ok(Presence {
        present: score > threshold + th.margin * threshold.abs(),
        score,
        threshold,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::{Architecture, LayerUpdate, Network};

    fn bank_with(cross: f64, own: f64) -> LocalDeltaBank {
        let net = Network::zeros(&Architecture::new(2, vec![3], 3)).unwrap();
        let deltas = (0..3)
            .map(|j| {
                let mut d = UpdateDelta::zeros_like(&net);
                for i in 0..3 {
                    let v = if i == j { own } else { cross };
                    d.output_layer_mut().weights.row_mut(i).fill(v);
                }
                d
            })
            .collect();
        LocalDeltaBank::from_deltas(0, deltas).unwrap()
    }

    fn priors() -> AttackPriors {
        AttackPriors {
            n_participants: 100,
            selection_fraction: 0.1,
            labels_per_client: 4.0,
        }
    }

    #[test]
    fn threshold_formula() {
        let th = sniff_thresholds(&bank_with(-0.25, 3.0), &priors(), 0.25).unwrap();
        for t in &th.thresholds {
            assert!(t.iter().all(|&v| (v + 10.0).abs() < 1e-12));
        }
    }

    #[test]
    fn zero_cross_updates_give_zero_thresholds() {
        let th = sniff_thresholds(&bank_with(0.0, 3.0), &priors(), 0.25).unwrap();
        assert!(th.thresholds.iter().flatten().all(|&v| v == 0.0));
    }

    #[test]
    fn thresholds_scale_linearly() {
        let a = sniff_thresholds(&bank_with(-0.25, 1.0), &priors(), 0.25).unwrap();
        let b = sniff_thresholds(&bank_with(-0.75, 1.0), &priors(), 0.25).unwrap();
        for (x, y) in a.thresholds.iter().flatten().zip(b.thresholds.iter().flatten()) {
            assert!((3.0 * x - y).abs() < 1e-12);
        }
    }

    #[test]
    fn boundary_is_absent() {
        let th = sniff_thresholds(&bank_with(-0.25, 3.0), &priors(), 0.25).unwrap();
        let net = Network::zeros(&Architecture::new(2, vec![3], 3)).unwrap();
        let mut d = UpdateDelta::zeros_like(&net);
        // Mean update whose round total lands exactly on the threshold.
        d.output_layer_mut().weights.row_mut(1).fill(-10.0 / 10.0);
        let p = class_sniff(&d, &th, 1).unwrap();
        assert!((p.score - p.threshold).abs() < 1e-12);
        assert!(!p.present);
        // Within the margin is still absent; beyond it is present.
        d.output_layer_mut().weights.row_mut(1).fill(-0.8);
        assert!(!class_sniff(&d, &th, 1).unwrap().present);
        d.output_layer_mut().weights.row_mut(1).fill(-0.7);
        assert!(class_sniff(&d, &th, 1).unwrap().present);
    }

    #[test]
    fn rejects_mismatched_rows() {
        let th = sniff_thresholds(&bank_with(-0.25, 3.0), &priors(), 0.25).unwrap();
        let d = UpdateDelta::from_layers(vec![LayerUpdate {
            weights: ndarray::Array2::zeros((3, 5)),
            bias: Array1::zeros(3),
        }]);
        assert!(class_sniff(&d, &th, 0).is_err());
        assert!(class_sniff(&d, &th, 7).is_err());
    }
}
