//! `simulate`: run the federated loop and persist everything the attacks
//! and the evaluation need.

use std::fs;
use std::path::{Path, PathBuf};

use flinfer_core::cluster::Partition;
use flinfer_core::experiment::{check_compatible, load_data, ExperimentData};
use flinfer_core::fl::Simulator;
use log::info;

use crate::config::{Allocation, RunConfig};
use crate::error::{CliError, Result};
use crate::records::{write_csv, RoundLogRow, TruthRow};

pub const MANIFEST: &str = "manifest.txt";
pub const ROUND_LOG: &str = "round_log.csv";
pub const TRUTH: &str = "truth.csv";
pub const PLANTED: &str = "planted.txt";
pub const MODELS: &str = "models";

/// Global model before round `round` (equivalently, after round `round - 1`).
pub fn model_path(run_dir: &Path, round: usize) -> PathBuf {
    run_dir.join(MODELS).join(format!("round_{round:04}.bin"))
}

/// The designated attacker's own upload in `round`, when it was selected.
pub fn attacker_delta_path(run_dir: &Path, round: usize) -> PathBuf {
    run_dir.join(MODELS).join(format!("attacker_round_{round:04}.bin"))
}

pub fn manifest_text(cfg: &RunConfig) -> String {
    format!(
        "# flinfer run manifest\n# crate version {}\n# data {}\n{}",
        env!("CARGO_PKG_VERSION"),
        cfg.source(),
        cfg.to_text()
    )
}

pub(crate) fn build_simulator<'a>(
    cfg: &RunConfig,
    data: &'a ExperimentData,
) -> Result<(Simulator<'a>, Option<Partition>)> {
    Ok(match cfg.allocation {
        Allocation::MainMinor => (cfg.experiment.simulator(data)?, None),
        Allocation::Planted { q } => {
            let (sim, planted) = cfg.experiment.planted_simulator(data, q)?;
            (sim, Some(planted))
        }
    })
}

fn write(path: &Path, bytes: &[u8]) -> Result<()> {
    fs::write(path, bytes).map_err(|e| CliError::io(path, e))
}

/// Runs `rounds` rounds and writes the run directory `out`.
pub fn simulate(cfg: &RunConfig, out: &Path) -> Result<()> {
    let seed = cfg.seed();
    let data = load_data(&cfg.source(), seed)?;
    check_compatible(&cfg.experiment, &data)?;
    let (mut sim, planted) = build_simulator(cfg, &data)?;

    let models = out.join(MODELS);
    fs::create_dir_all(&models).map_err(|e| CliError::io(&models, e))?;
    write(&out.join(MANIFEST), manifest_text(cfg).as_bytes())?;
    let planted_path = out.join(PLANTED);
    match &planted {
        Some(p) => write(&planted_path, format!("{p}\n").as_bytes())?,
        None if planted_path.exists() => fs::remove_file(&planted_path).map_err(|e| CliError::io(&planted_path, e))?,
        None => {}
    }

    write(&model_path(out, 0), &sim.global.to_bytes())?;
    let classes = data.train.classes();
    let mut log_rows = Vec::with_capacity(cfg.experiment.fl.rounds);
    let mut truth_rows = Vec::with_capacity(cfg.experiment.fl.rounds * classes);
    for _ in 0..cfg.experiment.fl.rounds {
        let outcome = sim.step()?;
        let round = outcome.truth.round;
        let accuracy = sim.global.accuracy(&data.test)?;
        info!("round {round}: test accuracy {accuracy:.4}");
        write(&model_path(out, round + 1), &sim.global.to_bytes())?;
        let own = attacker_delta_path(out, round);
        match &outcome.attacker_delta {
            Some(d) => write(&own, &d.to_bytes())?,
            None if own.exists() => fs::remove_file(&own).map_err(|e| CliError::io(&own, e))?,
            None => {}
        }
        log_rows.push(RoundLogRow {
            seed,
            round,
            selected_ids: outcome
                .truth
                .selected
                .iter()
                .map(usize::to_string)
                .collect::<Vec<_>>()
                .join(" "),
            test_accuracy: accuracy,
        });
        truth_rows.extend((0..classes).map(|label| TruthRow {
            seed,
            round,
            label,
            owners: outcome.truth.main_label_owners[label],
        }));
    }
    write_csv(&out.join(ROUND_LOG), &log_rows)?;
    write_csv(&out.join(TRUTH), &truth_rows)?;
    Ok(())
}
