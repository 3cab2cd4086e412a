use rand::seq::index;
use rayon::prelude::*;

use super::{compress_update, FlConfig, LabelAllocation};
use crate::data::LabeledDataset;
use crate::error::{Error, Result};
use crate::nn::{delta, train_local, Network, UpdateDelta};
use crate::rng::{stream, Purpose};

/// Clients taking part in `round`, ascending. Deterministic per
/// `(cfg.seed, round)`.
pub fn select_clients(cfg: &FlConfig, round: usize) -> Vec<usize> {
    let n = cfg.n_participants;
    let k = cfg.selected_count().min(n);
    let mut rng = stream(cfg.seed, Purpose::Selection, round as u64, 0);
    let mut ids = index::sample(&mut rng, n, k).into_vec();
    ids.sort_unstable();
    ids
}

/// What an outside observer of the server sees: two consecutive global
/// models.
#[derive(Debug, Clone, PartialEq)]
pub struct GlobalObservation {
    pub round: usize,
    pub before: Network,
    pub after: Network,
}

impl GlobalObservation {
    pub fn observed_delta(&self) -> Result<UpdateDelta> {
        delta(&self.after, &self.before)
    }
}

/// Ground truth for one round. Only evaluation code should read this.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RoundTruth {
    pub round: usize,
    pub selected: Vec<usize>,
    /// Per label, how many selected clients hold it as a main label.
    pub main_label_owners: Vec<usize>,
}

impl RoundTruth {
    pub fn present(&self, label: usize) -> bool {
        self.main_label_owners[label] > 0
    }
}

#[derive(Debug, Clone)]
pub struct RoundOutcome {
    pub observation: GlobalObservation,
    pub truth: RoundTruth,
    /// The delta the designated attacker uploaded, if it was selected.
    pub attacker_delta: Option<UpdateDelta>,
}

/// One FedAvg round: selected clients train from `global`, optionally
/// compress their deltas, and the server adds the mean delta.
///
/// Local training runs in parallel; deltas are summed in ascending client
/// order so the result does not depend on scheduling.
pub fn run_round(
    global: &Network,
    alloc: &LabelAllocation,
    data: &LabeledDataset,
    cfg: &FlConfig,
    round: usize,
    attacker: Option<usize>,
) -> Result<RoundOutcome> {
    if alloc.clients.len() != cfg.n_participants {
        return Err(Error::shape("allocation clients", cfg.n_participants, alloc.clients.len()));
    }
    let selected = select_clients(cfg, round);
    let params = cfg.train_params();
    let deltas = selected
        .par_iter()
        .map(|&client| {
            let wrap = |e| Error::Client {
                round,
                client,
                source: Box::new(e),
            };
            let shard = alloc.clients[client].dataset(data);
            let mut rng = stream(cfg.seed, Purpose::ClientTraining, round as u64, client as u64);
            let local = train_local(global, &shard, &params, &mut rng).map_err(wrap)?;
            let d = delta(&local, global).map_err(wrap)?;
            Ok(compress_update(&d, cfg.compression_rate))
        })
        .collect::<Result<Vec<_>>>()?;

    let mut sum = UpdateDelta::zeros_like(global);
    for d in &deltas {
        sum.add_assign(d)?;
    }
    sum.scale(1.0 / selected.len() as f64);
    let after = global.apply(&sum)?;

    let main_label_owners = (0..alloc.classes)
        .map(|label| alloc.main_owners(&selected, label))
        .collect();
    let attacker_delta = attacker
        .and_then(|a| selected.iter().position(|&c| c == a))
        .map(|pos| deltas[pos].clone());
    Ok(RoundOutcome {
        observation: GlobalObservation {
            round,
            before: global.clone(),
            after,
        },
        truth: RoundTruth {
            round,
            selected,
            main_label_owners,
        },
        attacker_delta,
    })
}

/// Stateful wrapper stepping a global model through successive rounds.
#[derive(Debug, Clone)]
pub struct Simulator<'a> {
    pub data: &'a LabeledDataset,
    pub allocation: LabelAllocation,
    pub config: FlConfig,
    pub global: Network,
    pub round: usize,
    /// A participant whose own upload is reported back each round.
    pub attacker: Option<usize>,
}

impl<'a> Simulator<'a> {
    pub fn new(
        data: &'a LabeledDataset,
        allocation: LabelAllocation,
        config: FlConfig,
        initial: Network,
    ) -> Result<Self> {
        config.validate(data.classes())?;
        if initial.classes() != data.classes() || initial.input_dim() != data.feature_dim() {
            return Err(Error::shape(
                "initial model",
                format!("{}->{}", data.feature_dim(), data.classes()),
                format!("{}->{}", initial.input_dim(), initial.classes()),
            ));
        }
        Ok(Self {
            data,
            allocation,
            config,
            global: initial,
            round: 0,
            attacker: None,
        })
    }

    pub fn step(&mut self) -> Result<RoundOutcome> {
        let outcome = run_round(
            &self.global,
            &self.allocation,
            self.data,
            &self.config,
            self.round,
            self.attacker,
        )?;
        self.global = outcome.observation.after.clone();
        self.round += 1;
        Ok(outcome)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn selection_size_and_determinism() {
        let cfg = FlConfig::default();
        let a = select_clients(&cfg, 3);
        assert_eq!(a.len(), 10);
        assert_eq!(a, select_clients(&cfg, 3));
        assert!(a.windows(2).all(|w| w[0] < w[1]));
        assert_ne!(a, select_clients(&cfg, 4));
    }

    #[test]
    fn full_selection_takes_everyone() {
        let cfg = FlConfig {
            n_participants: 7,
            selection_fraction: 1.0,
            ..FlConfig::default()
        };
        assert_eq!(select_clients(&cfg, 0), (0..7).collect::<Vec<_>>());
    }
}
