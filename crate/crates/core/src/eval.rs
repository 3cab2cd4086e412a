//! Success metrics joining attack output with simulator ground truth.

use std::fmt;
use std::str::FromStr;

use crate::attack::AttackReport;
use crate::cluster::Partition;
use crate::error::{Error, Result};
use crate::fl::RoundTruth;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum MetricMode {
    #[default]
    Absolute,
    Relative,
}

impl FromStr for MetricMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "abs" | "absolute" => Ok(MetricMode::Absolute),
            "rel" | "relative" => Ok(MetricMode::Relative),
            other => Err(Error::InvalidArgument(format!("unknown metric {other:?}"))),
        }
    }
}

impl fmt::Display for MetricMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            MetricMode::Absolute => "abs",
            MetricMode::Relative => "rel",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MetricConfig {
    pub mode: MetricMode,
    pub alpha_abs: f64,
    /// Relative bound as a fraction of the clients per round.
    pub alpha_rel_fraction: f64,
    /// Count aborted rounds as failures instead of leaving them out.
    pub aborts_in_denominator: bool,
}

impl Default for MetricConfig {
    fn default() -> Self {
        Self {
            mode: MetricMode::Absolute,
            alpha_abs: 1.0,
            alpha_rel_fraction: 0.05,
            aborts_in_denominator: false,
        }
    }
}

impl MetricConfig {
    pub fn alpha(&self, clients_per_round: f64) -> f64 {
        match self.mode {
            MetricMode::Absolute => self.alpha_abs,
            MetricMode::Relative => self.alpha_rel_fraction * clients_per_round,
        }
    }
}

/// A ratio reported together with its counts.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct Rate {
    pub numerator: usize,
    pub denominator: usize,
}

impl Rate {
    /// `None` when there was nothing to count.
    pub fn value(&self) -> Option<f64> {
        (self.denominator > 0).then(|| self.numerator as f64 / self.denominator as f64)
    }

    pub fn add(&mut self, hit: bool) {
        self.denominator += 1;
        self.numerator += usize::from(hit);
    }
}

impl fmt::Display for Rate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.value() {
            Some(v) => write!(f, "{:.4} ({}/{})", v, self.numerator, self.denominator),
            None => write!(f, "n/a (0/0)"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SniffRecord {
    pub seed: u64,
    pub round: usize,
    pub label: usize,
    pub truth_present: bool,
    pub detected: bool,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuantityRecord {
    pub seed: u64,
    pub round: usize,
    pub label: usize,
    pub truth_count: usize,
    pub estimate: Option<f64>,
    pub stddev: f64,
    pub aborted: bool,
}

pub fn sniff_records(report: &AttackReport, truth: &RoundTruth, seed: u64) -> Result<Vec<SniffRecord>> {
    check_rounds(report, truth)?;
    Ok(report
        .findings
        .iter()
        .map(|f| SniffRecord {
            seed,
            round: report.round,
            label: f.label,
            truth_present: truth.present(f.label),
            detected: f.presence.present,
        })
        .collect())
}

/// One record per label that quantity inference ran on.
pub fn quantity_records(report: &AttackReport, truth: &RoundTruth, seed: u64) -> Result<Vec<QuantityRecord>> {
    check_rounds(report, truth)?;
    Ok(report
        .findings
        .iter()
        .filter_map(|f| {
            f.quantity.as_ref().map(|q| QuantityRecord {
                seed,
                round: report.round,
                label: f.label,
                truth_count: truth.main_label_owners[f.label],
                estimate: q.estimate,
                stddev: q.stddev,
                aborted: q.aborted,
            })
        })
        .collect())
}

fn check_rounds(report: &AttackReport, truth: &RoundTruth) -> Result<()> {
    if report.round != truth.round {
        return Err(Error::InvalidArgument(format!(
            "report for round {} joined with truth for round {}",
            report.round, truth.round
        )));
    }
    Ok(())
}

/// Correct verdicts over all verdicts.
pub fn sniff_success_rate(records: &[SniffRecord]) -> Rate {
    let mut r = Rate::default();
    for rec in records {
        r.add(rec.truth_present == rec.detected);
    }
    r
}

/// Sniffing success per label, indexed by label.
pub fn sniff_success_by_label(records: &[SniffRecord], classes: usize) -> Vec<Rate> {
    let mut rates = vec![Rate::default(); classes];
    for rec in records {
        rates[rec.label].add(rec.truth_present == rec.detected);
    }
    rates
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct QuantityRates {
    pub success: Rate,
    pub aborting: Rate,
}

pub fn quantity_hit(rec: &QuantityRecord, alpha: f64) -> bool {
    rec.estimate
        .is_some_and(|e| (e - rec.truth_count as f64).abs() <= alpha)
}

/// Success over non-aborted records (unless configured otherwise) and the
/// share of aborted records.
pub fn quantity_success_rate(records: &[QuantityRecord], mc: &MetricConfig, clients_per_round: f64) -> QuantityRates {
    let alpha = mc.alpha(clients_per_round);
    let mut rates = QuantityRates::default();
    for rec in records {
        rates.aborting.add(rec.aborted);
        if !rec.aborted || mc.aborts_in_denominator {
            rates.success.add(quantity_hit(rec, alpha));
        }
    }
    rates
}

pub fn quantity_success_by_label(
    records: &[QuantityRecord],
    mc: &MetricConfig,
    clients_per_round: f64,
    classes: usize,
) -> Vec<QuantityRates> {
    (0..classes)
        .map(|l| {
            let subset: Vec<QuantityRecord> = records.iter().filter(|r| r.label == l).copied().collect();
            quantity_success_rate(&subset, mc, clients_per_round)
        })
        .collect()
}

/// Partitions compared as sets of sets, including the number of groups.
pub fn whole_success(found: &Partition, planted: &Partition) -> bool {
    found == planted
}

/// Renders rows as a space-aligned plain-text table.
pub fn render_table(headers: &[&str], rows: &[Vec<String>]) -> String {
    let mut widths: Vec<usize> = headers.iter().map(|h| h.len()).collect();
    for row in rows {
        for (w, cell) in widths.iter_mut().zip(row) {
            *w = (*w).max(cell.len());
        }
    }
    let line = |cells: Vec<&str>| {
        cells
            .iter()
            .zip(&widths)
            .map(|(c, w)| format!("{c:<w$}"))
            .collect::<Vec<_>>()
            .join("  ")
            .trim_end()
            .to_string()
    };
    let mut out = line(headers.to_vec());
    out.push('\n');
    let rule: Vec<String> = widths.iter().map(|w| "-".repeat(*w)).collect();
    out.push_str(&line(rule.iter().map(String::as_str).collect()));
    out.push('\n');
    for row in rows {
        out.push_str(&line(row.iter().map(String::as_str).collect()));
        out.push('\n');
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sniff(round: usize, truth: bool, detected: bool) -> SniffRecord {
        SniffRecord {
            seed: 0,
            round,
            label: round % 2,
            truth_present: truth,
            detected,
        }
    }

    fn qty(truth: usize, estimate: Option<f64>) -> QuantityRecord {
        QuantityRecord {
            seed: 0,
            round: 0,
            label: 0,
            truth_count: truth,
            estimate,
            stddev: 0.0,
            aborted: estimate.is_none(),
        }
    }

    #[test]
    fn sniff_rates() {
        let all_right = [sniff(0, true, true), sniff(1, false, false)];
        assert_eq!(sniff_success_rate(&all_right).value(), Some(1.0));
        let all_wrong = [sniff(0, true, false), sniff(1, false, true)];
        assert_eq!(sniff_success_rate(&all_wrong).value(), Some(0.0));
        let log = [
            sniff(0, true, true),
            sniff(0, false, false),
            sniff(1, true, true),
            sniff(1, true, false),
            sniff(2, false, false),
            sniff(2, true, true),
        ];
        let r = sniff_success_rate(&log);
        assert_eq!((r.numerator, r.denominator), (5, 6));
        assert!((r.value().unwrap() - 0.8333).abs() < 1e-4);
    }

    #[test]
    fn quantity_rates() {
        let mc = MetricConfig::default();
        let exact = [qty(3, Some(3.0)), qty(1, Some(1.0))];
        let r = quantity_success_rate(&exact, &mc, 10.0);
        assert_eq!((r.success.value(), r.aborting.value()), (Some(1.0), Some(0.0)));

        let aborted = [qty(3, None), qty(2, None)];
        let r = quantity_success_rate(&aborted, &mc, 10.0);
        assert_eq!((r.success.value(), r.aborting.value()), (None, Some(1.0)));

        let mut log: Vec<_> = (0..9).map(|i| qty(i % 5, Some((i % 5) as f64 + 0.9))).collect();
        log.push(qty(4, None));
        let r = quantity_success_rate(&log, &mc, 10.0);
        assert_eq!((r.success.numerator, r.success.denominator), (9, 9));
        assert_eq!(r.aborting.value(), Some(0.1));

        let strict = MetricConfig {
            aborts_in_denominator: true,
            ..mc
        };
        assert_eq!(quantity_success_rate(&log, &strict, 10.0).success.value(), Some(0.9));
    }

    #[test]
    fn relative_alpha() {
        let mc = MetricConfig {
            mode: MetricMode::Relative,
            ..MetricConfig::default()
        };
        assert!((mc.alpha(40.0) - 2.0).abs() < 1e-12);
        let log = [qty(10, Some(11.5))];
        assert_eq!(quantity_success_rate(&log, &mc, 40.0).success.value(), Some(1.0));
        assert_eq!(quantity_success_rate(&log, &MetricConfig::default(), 40.0).success.value(), Some(0.0));
    }

    #[test]
    fn whole_partitions() {
        let planted = Partition::new(vec![vec![0, 3], vec![1, 2], vec![4]]);
        assert!(whole_success(&Partition::new(vec![vec![4], vec![2, 1], vec![3, 0]]), &planted));
        assert!(!whole_success(&Partition::new(vec![vec![0, 3, 4], vec![1, 2]]), &planted));
        assert!(!whole_success(&Partition::new(vec![vec![0], vec![3], vec![1, 2], vec![4]]), &planted));
    }

    #[test]
    fn table_alignment() {
        let t = render_table(&["a", "value"], &[vec!["long-cell".into(), "1".into()]]);
        assert_eq!(t, "a          value\n---------  -----\nlong-cell  1\n");
    }
}
