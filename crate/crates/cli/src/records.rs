//! CSV row types shared by the commands.

use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::{CliError, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoundLogRow {
    pub seed: u64,
    pub round: usize,
    /// Selected client ids, space separated, ascending.
    pub selected_ids: String,
    pub test_accuracy: f64,
}

impl RoundLogRow {
    pub fn selected(&self) -> Result<Vec<usize>> {
        self.selected_ids
            .split_whitespace()
            .map(|s| {
                s.parse()
                    .map_err(|_| CliError::Data(format!("bad client id {s:?} in round {}", self.round)))
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TruthRow {
    pub seed: u64,
    pub round: usize,
    pub label: usize,
    /// Selected clients holding the label as a main label.
    pub owners: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SniffRow {
    pub seed: u64,
    pub round: usize,
    pub label: usize,
    pub truth_present: bool,
    pub detected: bool,
    pub score: f64,
    pub threshold: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuantityRow {
    pub seed: u64,
    pub round: usize,
    pub label: usize,
    pub truth_count: usize,
    pub estimate: Option<f64>,
    pub stddev: f64,
    pub aborted: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WholeRow {
    pub seed: u64,
    pub run: usize,
    pub stage: String,
    /// Round after which the attack ran; empty if the trigger never fired.
    pub round: Option<usize>,
    pub test_accuracy: f64,
    pub planted_partition: String,
    pub found_partition: String,
    /// Empty when the run had no planted partition.
    pub success: Option<bool>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub seed: u64,
    pub axis: String,
    pub value: String,
    pub repeats: usize,
    pub rounds: usize,
    pub sniff_success: Option<f64>,
    pub sniff_n: usize,
    pub quantity_success: Option<f64>,
    pub quantity_n: usize,
    pub aborting: Option<f64>,
    pub aborting_n: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub seed: u64,
    pub attack: String,
    /// Label id, or `all`.
    pub label: String,
    pub measure: String,
    pub numerator: usize,
    pub denominator: usize,
    pub rate: Option<f64>,
}

pub fn write_csv<T: Serialize>(path: &Path, rows: &[T]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| CliError::csv(path, e))?;
    for row in rows {
        w.serialize(row).map_err(|e| CliError::csv(path, e))?;
    }
    w.flush().map_err(|e| CliError::io(path, e))
}

pub fn read_csv<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>> {
    let mut r = csv::Reader::from_path(path).map_err(|e| CliError::csv(path, e))?;
    r.deserialize()
        .collect::<std::result::Result<Vec<T>, _>>()
        .map_err(|e| CliError::csv(path, e))
}
