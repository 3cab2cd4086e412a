//! Command-line driver: simulate federated runs, replay the attacks over
//! them and summarise the results.

pub mod attack;
pub mod config;
pub mod error;
pub mod records;
pub mod report;
pub mod simulate;
pub mod sweep;

use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use flinfer_core::cluster::{Cut, Linkage};
use flinfer_core::eval::{render_table, MetricMode};

pub use attack::AttackKind;
pub use config::RunConfig;
pub use error::{CliError, Result};
pub use sweep::Axis;

#[derive(Debug, Parser)]
#[command(name = "flinfer", version, about = "Label-composition inference against federated averaging")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run the federated simulation and write a run directory.
    Simulate {
        config: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        /// Defaults to runs/<config stem>-seed<seed>.
        #[arg(long)]
        out_dir: Option<PathBuf>,
    },
    /// Run an attack over a run directory and write its report CSV there.
    Attack {
        run_dir: PathBuf,
        kind: AttackKind,
        #[command(flatten)]
        flags: AttackFlags,
    },
    /// Vary one hyper-parameter and summarise label inference per value.
    Sweep {
        config: PathBuf,
        #[arg(long)]
        axis: Axis,
        /// Comma-separated values.
        #[arg(long, value_delimiter = ',', required = true)]
        values: Vec<String>,
        #[arg(long, default_value_t = 1)]
        repeats: usize,
        #[arg(long)]
        seed: Option<u64>,
        /// Directory for sweep_<axis>.csv; defaults to the current directory.
        #[arg(long)]
        out_dir: Option<PathBuf>,
        #[command(flatten)]
        flags: AttackFlags,
    },
    /// Write summary.csv and summary.txt from a run directory's reports.
    Report {
        run_dir: PathBuf,
        #[arg(long)]
        metric: Option<MetricMode>,
    },
}

/// Attack and metric settings that override the config or manifest.
#[derive(Debug, Clone, Default, Args)]
pub struct AttackFlags {
    #[arg(long)]
    pub metric: Option<MetricMode>,
    #[arg(long)]
    pub margin: Option<f64>,
    /// Ratio threshold of the quantity filter.
    #[arg(long = "th-r")]
    pub th_r: Option<f64>,
    #[arg(long)]
    pub abort_k: Option<f64>,
    #[arg(long)]
    pub linkage: Option<Linkage>,
    /// Fraction of the largest merge distance, or `abs:<distance>`.
    #[arg(long)]
    pub cut: Option<Cut>,
}

impl AttackFlags {
    pub fn apply(&self, cfg: &mut RunConfig) {
        let atk = &mut cfg.experiment.attack;
        if let Some(m) = self.metric {
            cfg.metric.mode = m;
        }
        if let Some(v) = self.margin {
            atk.margin = v;
        }
        if let Some(v) = self.th_r {
            atk.ratio_threshold = v;
        }
        if let Some(v) = self.abort_k {
            atk.abort_k = v;
        }
        if let Some(v) = self.linkage {
            atk.linkage = v;
        }
        if let Some(v) = self.cut {
            atk.cut = v;
        }
    }
}

fn default_run_dir(config: &Path, seed: u64) -> PathBuf {
    let stem = config
        .file_stem()
        .map_or_else(|| "run".into(), |s| s.to_string_lossy().into_owned());
    PathBuf::from("runs").join(format!("{stem}-seed{seed}"))
}

/// Executes one command and returns what it prints on success.
pub fn run(cli: Cli) -> Result<String> {
    match cli.command {
        Command::Simulate { config, seed, out_dir } => {
            let mut cfg = RunConfig::load(&config)?;
            if let Some(s) = seed {
                cfg.experiment.fl.seed = s;
            }
            let out = out_dir.unwrap_or_else(|| default_run_dir(&config, cfg.seed()));
            simulate::simulate(&cfg, &out)?;
            Ok(format!("{}\n", out.display()))
        }
        Command::Attack { run_dir, kind, flags } => {
            let mut cfg = attack::load_manifest(&run_dir)?;
            flags.apply(&mut cfg);
            let path = attack::attack(&run_dir, kind, &cfg)?;
            Ok(format!("{}\n", path.display()))
        }
        Command::Sweep {
            config,
            axis,
            values,
            repeats,
            seed,
            out_dir,
            flags,
        } => {
            let mut cfg = RunConfig::load(&config)?;
            if let Some(s) = seed {
                cfg.experiment.fl.seed = s;
            }
            flags.apply(&mut cfg);
            let rows = sweep::sweep(&cfg, axis, &values, repeats)?;
            let dir = out_dir.unwrap_or_else(|| PathBuf::from("."));
            std::fs::create_dir_all(&dir).map_err(|e| CliError::io(&dir, e))?;
            records::write_csv(&dir.join(format!("sweep_{axis}.csv")), &rows)?;
            let fmt = |v: Option<f64>| v.map_or_else(|| "-".into(), |v| format!("{v:.3}"));
            let table: Vec<Vec<String>> = rows
                .iter()
                .map(|r| {
                    vec![
                        r.value.clone(),
                        fmt(r.sniff_success),
                        fmt(r.quantity_success),
                        fmt(r.aborting),
                        r.quantity_n.to_string(),
                    ]
                })
                .collect();
            Ok(render_table(
                &[&axis.to_string(), "sniff", "quantity", "aborting", "estimates"],
                &table,
            ))
        }
        Command::Report { run_dir, metric } => {
            let mut cfg = attack::load_manifest(&run_dir)?;
            if let Some(m) = metric {
                cfg.metric.mode = m;
            }
            report::report(&run_dir, &cfg)
        }
    }
}
