//! `report`: summary tables over the attack reports in a run directory.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use flinfer_core::eval::{
    quantity_success_by_label, quantity_success_rate, render_table, sniff_success_by_label, sniff_success_rate,
    QuantityRecord, Rate, SniffRecord,
};

use crate::attack::{QUANTITY_REPORT, SNIFF_REPORT, WHOLE_REPORT};
use crate::config::RunConfig;
use crate::error::{CliError, Result};
use crate::records::{read_csv, write_csv, QuantityRow, SniffRow, SummaryRow, WholeRow};

pub const SUMMARY_CSV: &str = "summary.csv";
pub const SUMMARY_TXT: &str = "summary.txt";

fn cell(rate: Rate) -> String {
    match rate.value() {
        Some(v) => format!("{v:.3} ({}/{})", rate.numerator, rate.denominator),
        None => format!("- (0/{})", rate.denominator),
    }
}

fn summary_row(seed: u64, attack: &str, label: String, measure: &str, rate: Rate) -> SummaryRow {
    SummaryRow {
        seed,
        attack: attack.into(),
        label,
        measure: measure.into(),
        numerator: rate.numerator,
        denominator: rate.denominator,
        rate: rate.value(),
    }
}

fn read_optional<T: serde::de::DeserializeOwned>(path: &Path) -> Result<Option<Vec<T>>> {
    if path.exists() {
        read_csv(path).map(Some)
    } else {
        Ok(None)
    }
}

/// Writes `summary.csv` and `summary.txt` and returns the text. Output
/// depends only on the reports present and the metric settings.
pub fn report(run_dir: &Path, cfg: &RunConfig) -> Result<String> {
    let seed = cfg.seed();
    let sniff: Option<Vec<SniffRow>> = read_optional(&run_dir.join(SNIFF_REPORT))?;
    let quantity: Option<Vec<QuantityRow>> = read_optional(&run_dir.join(QUANTITY_REPORT))?;
    let whole: Option<Vec<WholeRow>> = read_optional(&run_dir.join(WHOLE_REPORT))?;
    if sniff.is_none() && quantity.is_none() && whole.is_none() {
        return Err(CliError::Data(format!(
            "no attack reports in {}; run `flinfer attack` first",
            run_dir.display()
        )));
    }

    let sniff: Vec<SniffRecord> = sniff
        .unwrap_or_default()
        .iter()
        .map(|r| SniffRecord {
            seed: r.seed,
            round: r.round,
            label: r.label,
            truth_present: r.truth_present,
            detected: r.detected,
        })
        .collect();
    let quantity: Vec<QuantityRecord> = quantity
        .unwrap_or_default()
        .iter()
        .map(|r| QuantityRecord {
            seed: r.seed,
            round: r.round,
            label: r.label,
            truth_count: r.truth_count,
            estimate: r.estimate,
            stddev: r.stddev,
            aborted: r.aborted,
        })
        .collect();
    let classes = sniff
        .iter()
        .map(|r| r.label + 1)
        .chain(quantity.iter().map(|r| r.label + 1))
        .max()
        .unwrap_or(0);
    let s = cfg.experiment.priors().clients_per_round();
    let mc = &cfg.metric;

    let mut rows = Vec::new();
    let mut table = Vec::new();
    if !sniff.is_empty() || !quantity.is_empty() {
        let sniff_by = sniff_success_by_label(&sniff, classes);
        let quantity_by = quantity_success_by_label(&quantity, mc, s, classes);
        for label in 0..classes {
            let (sr, qr) = (sniff_by[label], quantity_by[label]);
            rows.push(summary_row(seed, "sniff", label.to_string(), "success", sr));
            rows.push(summary_row(seed, "quantity", label.to_string(), "success", qr.success));
            rows.push(summary_row(seed, "quantity", label.to_string(), "aborting", qr.aborting));
            table.push(vec![label.to_string(), cell(sr), cell(qr.success), cell(qr.aborting)]);
        }
        let sr = sniff_success_rate(&sniff);
        let qr = quantity_success_rate(&quantity, mc, s);
        rows.push(summary_row(seed, "sniff", "all".into(), "success", sr));
        rows.push(summary_row(seed, "quantity", "all".into(), "success", qr.success));
        rows.push(summary_row(seed, "quantity", "all".into(), "aborting", qr.aborting));
        table.push(vec!["all".into(), cell(sr), cell(qr.success), cell(qr.aborting)]);
    }

    let mut text = String::new();
    let _ = writeln!(
        text,
        "seed {seed}, metric {} (alpha {}), aborted estimates {} the quantity success denominator",
        mc.mode,
        mc.alpha(s),
        if mc.aborts_in_denominator { "count in" } else { "are excluded from" }
    );
    if !table.is_empty() {
        text.push('\n');
        text.push_str(&render_table(&["label", "sniff", "quantity", "aborting"], &table));
    }
    if let Some(whole) = whole {
        let mut stage_rows = Vec::new();
        for w in &whole {
            let hit = Rate {
                numerator: usize::from(w.success == Some(true)),
                denominator: usize::from(w.success.is_some()),
            };
            rows.push(summary_row(w.seed, "whole", "all".into(), &format!("{}_success", w.stage), hit));
            stage_rows.push(vec![
                w.stage.clone(),
                w.round.map_or_else(|| "-".into(), |r| r.to_string()),
                format!("{:.3}", w.test_accuracy),
                w.planted_partition.clone(),
                w.found_partition.clone(),
                w.success.map_or_else(|| "-".into(), |b| b.to_string()),
            ]);
        }
        text.push('\n');
        text.push_str(&render_table(
            &["stage", "round", "accuracy", "planted", "found", "success"],
            &stage_rows,
        ));
    }

    write_csv(&run_dir.join(SUMMARY_CSV), &rows)?;
    let txt = run_dir.join(SUMMARY_TXT);
    fs::write(&txt, &text).map_err(|e| CliError::io(&txt, e))?;
    Ok(text)
}
