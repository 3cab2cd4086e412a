//! Flat `key = value` run configuration.
//!
//! Keys mirror the simulator and attack field names. Blank lines and text
//! after `#` are ignored; unknown or repeated keys are errors.

use std::collections::HashSet;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use flinfer_core::cluster::{Cut, Linkage};
use flinfer_core::eval::{MetricConfig, MetricMode};
use flinfer_core::experiment::{DataSource, ExperimentConfig, StageTriggers};

use crate::error::{CliError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DatasetKind {
    Synthetic,
    Mnist,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Allocation {
    /// Clients draw 3–5 main labels plus a few samples of the others.
    MainMinor,
    /// Three label groups with `q`, `q/4` and `q/5` samples per label.
    Planted { q: usize },
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticParams {
    pub classes: usize,
    pub dim: usize,
    pub per_class: usize,
    pub holdout_per_class: usize,
    pub spread: f64,
}

impl Default for SyntheticParams {
    fn default() -> Self {
        match DataSource::default() {
            DataSource::Synthetic {
                classes,
                dim,
                per_class,
                holdout_per_class,
                spread,
            } => Self {
                classes,
                dim,
                per_class,
                holdout_per_class,
                spread,
            },
            DataSource::Mnist { .. } => unreachable!("default data source is synthetic"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub dataset: DatasetKind,
    pub mnist_dir: PathBuf,
    pub synthetic: SyntheticParams,
    pub experiment: ExperimentConfig,
    pub metric: MetricConfig,
    pub allocation: Allocation,
    pub triggers: StageTriggers,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            dataset: DatasetKind::Synthetic,
            mnist_dir: PathBuf::from("data/mnist"),
            synthetic: SyntheticParams::default(),
            experiment: ExperimentConfig::default(),
            metric: MetricConfig::default(),
            allocation: Allocation::MainMinor,
            triggers: StageTriggers::default(),
        }
    }
}

/// Every accepted key, in the order [`RunConfig::to_text`] writes them.
pub const KEYS: &[&str] = &[
    "dataset",
    "mnist_dir",
    "synthetic_classes",
    "synthetic_dim",
    "synthetic_per_class",
    "synthetic_holdout_per_class",
    "synthetic_spread",
    "hidden_layers",
    "n_participants",
    "selection_fraction",
    "local_batch_size",
    "local_lr",
    "local_epochs",
    "avg_labels_per_client",
    "rounds",
    "seed",
    "compression_rate",
    "main_labels_choices",
    "samples_per_main_label",
    "samples_per_minor_label",
    "allow_replacement",
    "allocation",
    "planted_q",
    "aux_per_label",
    "attacker",
    "margin",
    "ratio_threshold",
    "abort_k",
    "linkage",
    "cut",
    "metric",
    "alpha_abs",
    "alpha_rel_fraction",
    "aborts_in_denominator",
    "middle_accuracy",
    "late_accuracy",
];

fn parse<T: FromStr>(key: &str, value: &str) -> std::result::Result<T, String> {
    value
        .parse()
        .map_err(|_| format!("cannot parse {value:?} as the value of {key}"))
}

fn parse_list(key: &str, value: &str) -> std::result::Result<Vec<usize>, String> {
    if value.is_empty() {
        return Ok(Vec::new());
    }
    value.split(',').map(|v| parse(key, v.trim())).collect()
}

fn join(values: &[usize]) -> String {
    values.iter().map(usize::to_string).collect::<Vec<_>>().join(",")
}

impl RunConfig {
    pub fn source(&self) -> DataSource {
        match self.dataset {
            DatasetKind::Mnist => DataSource::Mnist {
                dir: self.mnist_dir.clone(),
            },
            DatasetKind::Synthetic => {
                let s = &self.synthetic;
                DataSource::Synthetic {
                    classes: s.classes,
                    dim: s.dim,
                    per_class: s.per_class,
                    holdout_per_class: s.holdout_per_class,
                    spread: s.spread,
                }
            }
        }
    }

    pub fn seed(&self) -> u64 {
        self.experiment.fl.seed
    }

    /// Sets one key from its textual value.
    pub fn set(&mut self, key: &str, value: &str) -> std::result::Result<(), String> {
        let fl = &mut self.experiment.fl;
        let atk = &mut self.experiment.attack;
        match key {
            "dataset" => {
                self.dataset = match value {
                    "synthetic" => DatasetKind::Synthetic,
                    "mnist" => DatasetKind::Mnist,
                    other => return Err(format!("unknown dataset {other:?} (synthetic or mnist)")),
                }
            }
            "mnist_dir" => self.mnist_dir = PathBuf::from(value),
            "synthetic_classes" => self.synthetic.classes = parse(key, value)?,
            "synthetic_dim" => self.synthetic.dim = parse(key, value)?,
            "synthetic_per_class" => self.synthetic.per_class = parse(key, value)?,
            "synthetic_holdout_per_class" => self.synthetic.holdout_per_class = parse(key, value)?,
            "synthetic_spread" => self.synthetic.spread = parse(key, value)?,
            "hidden_layers" => self.experiment.hidden = parse_list(key, value)?,
            "n_participants" => fl.n_participants = parse(key, value)?,
            "selection_fraction" => fl.selection_fraction = parse(key, value)?,
            "local_batch_size" => fl.local_batch_size = parse(key, value)?,
            "local_lr" => fl.local_lr = parse(key, value)?,
            "local_epochs" => fl.local_epochs = parse(key, value)?,
            "avg_labels_per_client" => fl.avg_labels_per_client = parse(key, value)?,
            "rounds" => fl.rounds = parse(key, value)?,
            "seed" => fl.seed = parse(key, value)?,
            "compression_rate" => fl.compression_rate = parse(key, value)?,
            "main_labels_choices" => fl.main_labels_choices = parse_list(key, value)?,
            "samples_per_main_label" => fl.samples_per_main_label = parse(key, value)?,
            "samples_per_minor_label" => fl.samples_per_minor_label = parse(key, value)?,
            "allow_replacement" => fl.allow_replacement = parse(key, value)?,
            "allocation" => {
                self.allocation = match value {
                    "main_minor" => Allocation::MainMinor,
                    "planted" => Allocation::Planted {
                        q: match self.allocation {
                            Allocation::Planted { q } => q,
                            Allocation::MainMinor => 2000,
                        },
                    },
                    other => return Err(format!("unknown allocation {other:?} (main_minor or planted)")),
                }
            }
            "planted_q" => {
                let q = parse(key, value)?;
                if let Allocation::Planted { q: current } = &mut self.allocation {
                    *current = q;
                } else {
                    self.allocation = Allocation::Planted { q };
                }
            }
            "aux_per_label" => self.experiment.aux_per_label = parse(key, value)?,
            "attacker" => {
                self.experiment.attacker = match value {
                    "none" => None,
                    v => Some(parse(key, v)?),
                }
            }
            "margin" => atk.margin = parse(key, value)?,
            "ratio_threshold" => atk.ratio_threshold = parse(key, value)?,
            "abort_k" => atk.abort_k = parse(key, value)?,
            "linkage" => atk.linkage = Linkage::from_str(value).map_err(|e| e.to_string())?,
            "cut" => atk.cut = Cut::from_str(value).map_err(|e| e.to_string())?,
            "metric" => self.metric.mode = MetricMode::from_str(value).map_err(|e| e.to_string())?,
            "alpha_abs" => self.metric.alpha_abs = parse(key, value)?,
            "alpha_rel_fraction" => self.metric.alpha_rel_fraction = parse(key, value)?,
            "aborts_in_denominator" => self.metric.aborts_in_denominator = parse(key, value)?,
            "middle_accuracy" => self.triggers.middle = parse(key, value)?,
            "late_accuracy" => self.triggers.late = parse(key, value)?,
            other => return Err(format!("unknown key {other:?}")),
        }
        Ok(())
    }

    /// Value of `key` as it would appear in a config file.
    pub fn get(&self, key: &str) -> Option<String> {
        let fl = &self.experiment.fl;
        let atk = &self.experiment.attack;
        Some(match key {
            "dataset" => match self.dataset {
                DatasetKind::Synthetic => "synthetic".into(),
                DatasetKind::Mnist => "mnist".into(),
            },
            "mnist_dir" => self.mnist_dir.display().to_string(),
            "synthetic_classes" => self.synthetic.classes.to_string(),
            "synthetic_dim" => self.synthetic.dim.to_string(),
            "synthetic_per_class" => self.synthetic.per_class.to_string(),
            "synthetic_holdout_per_class" => self.synthetic.holdout_per_class.to_string(),
            "synthetic_spread" => self.synthetic.spread.to_string(),
            "hidden_layers" => join(&self.experiment.hidden),
            "n_participants" => fl.n_participants.to_string(),
            "selection_fraction" => fl.selection_fraction.to_string(),
            "local_batch_size" => fl.local_batch_size.to_string(),
            "local_lr" => fl.local_lr.to_string(),
            "local_epochs" => fl.local_epochs.to_string(),
            "avg_labels_per_client" => fl.avg_labels_per_client.to_string(),
            "rounds" => fl.rounds.to_string(),
            "seed" => fl.seed.to_string(),
            "compression_rate" => fl.compression_rate.to_string(),
            "main_labels_choices" => join(&fl.main_labels_choices),
            "samples_per_main_label" => fl.samples_per_main_label.to_string(),
            "samples_per_minor_label" => fl.samples_per_minor_label.to_string(),
            "allow_replacement" => fl.allow_replacement.to_string(),
            "allocation" => match self.allocation {
                Allocation::MainMinor => "main_minor".into(),
                Allocation::Planted { .. } => "planted".into(),
            },
            "planted_q" => match self.allocation {
                Allocation::Planted { q } => q.to_string(),
                Allocation::MainMinor => return None,
            },
            "aux_per_label" => self.experiment.aux_per_label.to_string(),
            "attacker" => self
                .experiment
                .attacker
                .map_or_else(|| "none".into(), |a| a.to_string()),
            "margin" => atk.margin.to_string(),
            "ratio_threshold" => atk.ratio_threshold.to_string(),
            "abort_k" => atk.abort_k.to_string(),
            "linkage" => atk.linkage.to_string(),
            "cut" => atk.cut.to_string(),
            "metric" => self.metric.mode.to_string(),
            "alpha_abs" => self.metric.alpha_abs.to_string(),
            "alpha_rel_fraction" => self.metric.alpha_rel_fraction.to_string(),
            "aborts_in_denominator" => self.metric.aborts_in_denominator.to_string(),
            "middle_accuracy" => self.triggers.middle.to_string(),
            "late_accuracy" => self.triggers.late.to_string(),
            _ => return None,
        })
    }

    pub fn parse_text(text: &str, origin: &Path) -> Result<Self> {
        let mut cfg = RunConfig::default();
        let mut seen = HashSet::new();
        for (i, raw) in text.lines().enumerate() {
            let line_error = |reason: String| CliError::ConfigLine {
                path: origin.to_path_buf(),
                line: i + 1,
                reason,
            };
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                return Err(line_error(format!("expected key = value, found {line:?}")));
            };
            let (key, value) = (key.trim(), value.trim());
            if !seen.insert(key.to_string()) {
                return Err(line_error(format!("duplicate key {key:?}")));
            }
            cfg.set(key, value).map_err(line_error)?;
        }
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        Self::parse_text(&text, path)
    }

    /// Canonical listing of every key; parses back to an equal config.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for key in KEYS {
            if let Some(v) = self.get(key) {
                let _ = writeln!(out, "{key} = {v}");
            }
        }
        out
    }
}
