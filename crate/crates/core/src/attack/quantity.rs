use super::{AttackConfig, AttackPriors, LocalDeltaBank, DIVISION_GUARD};
use crate::error::{Error, Result};
use crate::nn::UpdateDelta;

#[derive(Debug, Clone, PartialEq)]
pub struct QuantityEstimate {
    pub label: usize,
    /// Mean of the surviving candidates; `None` when aborted.
    pub estimate: Option<f64>,
    /// Weight indices that passed both filters.
    pub survivors: Vec<usize>,
    /// Client-count candidate for each survivor, same order.
    pub candidates: Vec<f64>,
    /// Population standard deviation of `candidates` (0 when empty).
    pub stddev: f64,
    pub aborted: bool,
    /// Weights removed by the ratio filter or the division guard.
    pub ratio_filtered: usize,
    /// Weights whose candidate fell outside `[0, N_p · P]`.
    pub range_filtered: usize,
}

/// Estimates how many selected clients trained on `label` this round.
///
/// Per inputting weight of the label, with `w_p` its single-label update and
/// `w_n` the mean update it gets from other labels, the observed mean update
/// `g` is modelled as `(x·w_p + (s·N_L − x)·w_n) / s` for `s = N_p · P`, so
/// `x = s·(g − N_L·w_n) / (w_p − w_n)`. Weights with `|w_n| / |w_p|` above
/// the ratio threshold are skipped, candidates outside `[0, s]` discarded,
/// and the rest averaged. A spread above `abort_k · s` aborts.
pub fn quantity_infer(
    global_delta: &UpdateDelta,
    bank: &LocalDeltaBank,
    priors: &AttackPriors,
    label: usize,
    cfg: &AttackConfig,
) -> Result<QuantityEstimate> {
    if label >= bank.labels() {
        return Err(Error::LabelOutOfRange {
            label,
            classes: bank.labels(),
        });
    }
    let observed = global_delta.inputting_weight_updates(label)?;
    if observed.len() != bank.width() {
        return Err(Error::shape("observed row", bank.width(), observed.len()));
    }
    let s = priors.clients_per_round();
    let n_l = priors.labels_per_client;
    let w_p = bank.update(label, label);
    let w_n = bank.cross_mean(label);
    // Candidates equal to 0 or s are legitimate but rounding can push them
    // just outside.
    let slack = 1e-9 * s.max(1.0);

    let mut est = QuantityEstimate {
        label,
        estimate: None,
        survivors: Vec::new(),
        candidates: Vec::new(),
        stddev: 0.0,
        aborted: false,
        ratio_filtered: 0,
        range_filtered: 0,
    };
    for i in 0..observed.len() {
        let (p, n) = (w_p[i], w_n[i]);
        let denom = p - n;
        if p == 0.0 || n.abs() / p.abs() > cfg.ratio_threshold || denom.abs() < DIVISION_GUARD {
            est.ratio_filtered += 1;
            continue;
        }
        let x = s * (observed[i] - n_l * n) / denom;
        if !(x >= -slack && x <= s + slack) {
            est.range_filtered += 1;
            continue;
        }
        est.survivors.push(i);
        est.candidates.push(x);
    }

    if est.candidates.is_empty() {
        est.aborted = true;
        return Ok(est);
    }
    let m = est.candidates.len() as f64;
    let mean = est.candidates.iter().sum::<f64>() / m;
    est.stddev = (est.candidates.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / m).sqrt();
    est.aborted = est.stddev > cfg.abort_k * s;
    if !est.aborted {
        est.estimate = Some(mean);
    }
    Ok(est)
}
