//! `sweep`: in-memory label inference over one varied hyper-parameter.

use std::fmt;
use std::str::FromStr;

use flinfer_core::eval::{quantity_success_rate, sniff_success_rate, QuantityRecord, SniffRecord};
use flinfer_core::experiment::{check_compatible, load_data, run_label_inference};
use log::info;

use crate::config::RunConfig;
use crate::error::{CliError, Result};
use crate::records::SweepRow;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Axis {
    BatchSize,
    LocalEpochs,
    SelectionFraction,
    NParticipants,
    CompressionRate,
}

impl Axis {
    /// The config key the axis varies.
    pub fn key(self) -> &'static str {
        match self {
            Axis::BatchSize => "local_batch_size",
            Axis::LocalEpochs => "local_epochs",
            Axis::SelectionFraction => "selection_fraction",
            Axis::NParticipants => "n_participants",
            Axis::CompressionRate => "compression_rate",
        }
    }
}

impl FromStr for Axis {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "batch_size" => Ok(Axis::BatchSize),
            "local_epochs" => Ok(Axis::LocalEpochs),
            "selection_fraction" => Ok(Axis::SelectionFraction),
            "n_participants" => Ok(Axis::NParticipants),
            "compression_rate" => Ok(Axis::CompressionRate),
            other => Err(format!(
                "unknown axis {other:?} (batch_size, local_epochs, selection_fraction, n_participants or compression_rate)"
            )),
        }
    }
}

impl fmt::Display for Axis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Axis::BatchSize => "batch_size",
            Axis::LocalEpochs => "local_epochs",
            Axis::SelectionFraction => "selection_fraction",
            Axis::NParticipants => "n_participants",
            Axis::CompressionRate => "compression_rate",
        })
    }
}

/// One row per value. Repeat `r` uses seed `base + r`; datasets are shared
/// across values of the same repeat.
pub fn sweep(base: &RunConfig, axis: Axis, values: &[String], repeats: usize) -> Result<Vec<SweepRow>> {
    if values.is_empty() {
        return Err(CliError::Config("sweep needs at least one value".into()));
    }
    if repeats == 0 {
        return Err(CliError::Config("repeats must be >= 1".into()));
    }
    let configs = values
        .iter()
        .map(|v| {
            let mut c = base.clone();
            c.set(axis.key(), v)
                .map_err(|e| CliError::Config(format!("sweep value: {e}")))?;
            Ok(c)
        })
        .collect::<Result<Vec<_>>>()?;
    let mut sniff: Vec<Vec<SniffRecord>> = vec![Vec::new(); values.len()];
    let mut quantity: Vec<Vec<QuantityRecord>> = vec![Vec::new(); values.len()];
    for r in 0..repeats {
        let seed = base.seed() + r as u64;
        let data = load_data(&base.source(), seed)?;
        for (i, c) in configs.iter().enumerate() {
            let mut exp = c.experiment.clone();
            exp.fl.seed = seed;
            check_compatible(&exp, &data)?;
            info!("{axis} = {} seed {seed}", values[i]);
            for rec in run_label_inference(&exp, &data)? {
                sniff[i].extend(rec.sniff);
                quantity[i].extend(rec.quantity);
            }
        }
    }
    Ok(configs
        .iter()
        .enumerate()
        .map(|(i, c)| {
            let s = sniff_success_rate(&sniff[i]);
            let q = quantity_success_rate(&quantity[i], &c.metric, c.experiment.priors().clients_per_round());
            SweepRow {
                seed: base.seed(),
                axis: axis.to_string(),
                value: values[i].clone(),
                repeats,
                rounds: c.experiment.fl.rounds,
                sniff_success: s.value(),
                sniff_n: s.denominator,
                quantity_success: q.success.value(),
                quantity_n: q.success.denominator,
                aborting: q.aborting.value(),
                aborting_n: q.aborting.denominator,
            }
        })
        .collect())
}
