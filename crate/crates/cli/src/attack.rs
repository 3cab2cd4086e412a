//! `attack`: replay the attacks over a simulated run directory.

use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use flinfer_core::cluster::Partition;
use flinfer_core::experiment::{load_data, Stage};
use flinfer_core::fl::RoundTruth;
use flinfer_core::nn::{Network, UpdateDelta};
use log::info;

use crate::config::RunConfig;
use crate::error::{CliError, Result};
use crate::records::{read_csv, write_csv, QuantityRow, RoundLogRow, SniffRow, TruthRow, WholeRow};
use crate::simulate::{attacker_delta_path, model_path, MANIFEST, PLANTED, ROUND_LOG, TRUTH};

pub const SNIFF_REPORT: &str = "sniff_report.csv";
pub const QUANTITY_REPORT: &str = "quantity_report.csv";
pub const WHOLE_REPORT: &str = "whole_report.csv";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AttackKind {
    Sniff,
    Quantity,
    Whole,
}

impl FromStr for AttackKind {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "sniff" => Ok(AttackKind::Sniff),
            "quantity" => Ok(AttackKind::Quantity),
            "whole" => Ok(AttackKind::Whole),
            other => Err(format!("unknown attack {other:?} (sniff, quantity or whole)")),
        }
    }
}

impl fmt::Display for AttackKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            AttackKind::Sniff => "sniff",
            AttackKind::Quantity => "quantity",
            AttackKind::Whole => "whole",
        })
    }
}

pub fn load_manifest(run_dir: &Path) -> Result<RunConfig> {
    RunConfig::load(&run_dir.join(MANIFEST))
}

/// Ground truth per round, rebuilt from the round log and truth table.
pub fn load_truths(run_dir: &Path, classes: usize) -> Result<Vec<RoundTruth>> {
    let log: Vec<RoundLogRow> = read_csv(&run_dir.join(ROUND_LOG))?;
    let truth: Vec<TruthRow> = read_csv(&run_dir.join(TRUTH))?;
    let mut owners: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for row in &truth {
        if row.label >= classes {
            return Err(CliError::Data(format!("truth label {} out of range", row.label)));
        }
        owners.entry(row.round).or_insert_with(|| vec![0; classes])[row.label] = row.owners;
    }
    log.iter()
        .map(|row| {
            Ok(RoundTruth {
                round: row.round,
                selected: row.selected()?,
                main_label_owners: owners
                    .remove(&row.round)
                    .ok_or_else(|| CliError::Data(format!("no truth rows for round {}", row.round)))?,
            })
        })
        .collect()
}

fn load_delta(path: &Path) -> Result<Option<UpdateDelta>> {
    if !path.exists() {
        return Ok(None);
    }
    let bytes = fs::read(path).map_err(|e| CliError::io(path, e))?;
    Ok(Some(UpdateDelta::from_bytes(&bytes)?))
}

/// Runs one attack over `run_dir` and writes its report there. Returns the
/// report path.
pub fn attack(run_dir: &Path, kind: AttackKind, cfg: &RunConfig) -> Result<PathBuf> {
    let seed = cfg.seed();
    let data = load_data(&cfg.source(), seed)?;
    let aux = cfg.experiment.auxiliary(&data);
    match kind {
        AttackKind::Sniff | AttackKind::Quantity => {
            let truths = load_truths(run_dir, data.train.classes())?;
            let mut sniff = Vec::new();
            let mut quantity = Vec::new();
            let mut before = Network::load(&model_path(run_dir, 0))?;
            for truth in &truths {
                let round = truth.round;
                let after = Network::load(&model_path(run_dir, round + 1))?;
                let own = load_delta(&attacker_delta_path(run_dir, round))?;
                let report = cfg.experiment.attack_models(round, &before, &after, own.as_ref(), &aux)?;
                for f in &report.findings {
                    sniff.push(SniffRow {
                        seed,
                        round,
                        label: f.label,
                        truth_present: truth.present(f.label),
                        detected: f.presence.present,
                        score: f.presence.score,
                        threshold: f.presence.threshold,
                    });
                    if let Some(q) = &f.quantity {
                        quantity.push(QuantityRow {
                            seed,
                            round,
                            label: f.label,
                            truth_count: truth.main_label_owners[f.label],
                            estimate: q.estimate,
                            stddev: q.stddev,
                            aborted: q.aborted,
                        });
                    }
                }
                info!("round {round} attacked");
                before = after;
            }
            if kind == AttackKind::Sniff {
                let path = run_dir.join(SNIFF_REPORT);
                write_csv(&path, &sniff)?;
                Ok(path)
            } else {
                let path = run_dir.join(QUANTITY_REPORT);
                write_csv(&path, &quantity)?;
                Ok(path)
            }
        }
        AttackKind::Whole => {
            let log: Vec<RoundLogRow> = read_csv(&run_dir.join(ROUND_LOG))?;
            let planted = load_planted(run_dir)?;
            let mut rows = Vec::new();
            for stage in [Stage::Middle, Stage::Late] {
                let fired = log.iter().find(|r| cfg.triggers.fires(stage, r.test_accuracy));
                let (round, accuracy, found) = match fired {
                    Some(r) => {
                        let global = Network::load(&model_path(run_dir, r.round + 1))?;
                        let found = cfg.experiment.whole_on(&global, r.round, &aux)?;
                        (Some(r.round), r.test_accuracy, Some(found))
                    }
                    None => (None, log.last().map_or(0.0, |r| r.test_accuracy), None),
                };
                let success = planted
                    .as_ref()
                    .map(|p| found.as_ref().is_some_and(|f| f == p));
                rows.push(WholeRow {
                    seed,
                    run: 0,
                    stage: stage.to_string(),
                    round,
                    test_accuracy: accuracy,
                    planted_partition: planted.as_ref().map(Partition::to_string).unwrap_or_default(),
                    found_partition: found.as_ref().map(Partition::to_string).unwrap_or_default(),
                    success,
                });
            }
            let path = run_dir.join(WHOLE_REPORT);
            write_csv(&path, &rows)?;
            Ok(path)
        }
    }
}

fn load_planted(run_dir: &Path) -> Result<Option<Partition>> {
    let path = run_dir.join(PLANTED);
    if !path.exists() {
        return Ok(None);
    }
    let text = fs::read_to_string(&path).map_err(|e| CliError::io(&path, e))?;
    Partition::from_str(text.trim())
        .map(Some)
        .map_err(|e| CliError::Data(format!("{}: {e}", path.display())))
}
