//! End-to-end runs wiring the simulator, the attacks and the metrics.

use std::fmt;
use std::path::PathBuf;

use crate::attack::{
    attack_round, build_delta_bank, whole_determination, AttackConfig, AttackPriors, AttackReport, AuxiliaryData,
};
use crate::cluster::Partition;
use crate::data::{gen_synthetic, load_mnist, mnist_paths, LabeledDataset, MnistSplit};
use crate::error::{Error, Result};
use crate::eval::{quantity_records, sniff_records, QuantityRecord, SniffRecord};
use crate::fl::{allocate, allocate_planted, plant_groups, FlConfig, RoundOutcome, Simulator};
use crate::nn::{Architecture, Network, UpdateDelta};
use crate::rng::{stream, Purpose};

#[derive(Debug, Clone, PartialEq)]
pub enum DataSource {
    Synthetic {
        classes: usize,
        dim: usize,
        per_class: usize,
        /// Samples per class in each of the auxiliary pool and test set.
        holdout_per_class: usize,
        spread: f64,
    },
    /// Directory holding the four upstream IDX files.
    Mnist { dir: PathBuf },
}

impl Default for DataSource {
    fn default() -> Self {
        DataSource::Synthetic {
            classes: 10,
            dim: 20,
            per_class: 4000,
            holdout_per_class: 200,
            spread: 0.3,
        }
    }
}

impl fmt::Display for DataSource {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DataSource::Synthetic {
                classes,
                dim,
                per_class,
                spread,
                ..
            } => write!(f, "synthetic(k={classes},dim={dim},n={per_class},spread={spread})"),
            DataSource::Mnist { .. } => f.write_str("mnist"),
        }
    }
}

/// Client training data plus held-out samples for the attacker and for
/// accuracy measurements.
#[derive(Debug, Clone)]
pub struct ExperimentData {
    pub train: LabeledDataset,
    pub aux_pool: LabeledDataset,
    pub test: LabeledDataset,
}

/// Loads or generates the data. For MNIST the attacker's pool is the first
/// half of the test split and accuracy is measured on the second half.
pub fn load_data(source: &DataSource, seed: u64) -> Result<ExperimentData> {
    match source {
        DataSource::Synthetic {
            classes,
            dim,
            per_class,
            holdout_per_class,
            spread,
        } => {
            let gen = |n, part| gen_synthetic(*classes, *dim, n, *spread, &mut stream(seed, Purpose::Dataset, part, 0));
            Ok(ExperimentData {
                train: gen(*per_class, 0)?,
                aux_pool: gen(*holdout_per_class, 1)?,
                test: gen(*holdout_per_class, 2)?,
            })
        }
        DataSource::Mnist { dir } => {
            let (images, labels) = mnist_paths(dir, MnistSplit::Train);
            let train = load_mnist(&images, &labels)?;
            let (images, labels) = mnist_paths(dir, MnistSplit::Test);
            let held = load_mnist(&images, &labels)?;
            let half = held.len() / 2;
            let first: Vec<usize> = (0..half).collect();
            let second: Vec<usize> = (half..held.len()).collect();
            Ok(ExperimentData {
                train,
                aux_pool: held.subset(&first),
                test: held.subset(&second),
            })
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub fl: FlConfig,
    pub hidden: Vec<usize>,
    /// Auxiliary samples per label held by the attacker.
    pub aux_per_label: usize,
    pub attack: AttackConfig,
    /// Participant whose own upload is subtracted before analysis.
    pub attacker: Option<usize>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        let fl = FlConfig::default();
        Self {
            aux_per_label: fl.samples_per_main_label,
            fl,
            hidden: vec![64, 32],
            attack: AttackConfig::default(),
            attacker: None,
        }
    }
}

impl ExperimentConfig {
    pub fn priors(&self) -> AttackPriors {
        AttackPriors {
            n_participants: self.fl.n_participants,
            selection_fraction: self.fl.selection_fraction,
            labels_per_client: self.fl.avg_labels_per_client,
        }
    }

    pub fn architecture(&self, data: &ExperimentData) -> Architecture {
        Architecture::new(data.train.feature_dim(), self.hidden.clone(), data.train.classes())
    }

    pub fn initial_model(&self, data: &ExperimentData) -> Result<Network> {
        Network::init(&self.architecture(data), &mut stream(self.fl.seed, Purpose::Init, 0, 0))
    }

    pub fn auxiliary(&self, data: &ExperimentData) -> AuxiliaryData {
        AuxiliaryData::from_pool(&data.aux_pool, self.aux_per_label)
    }

    /// Simulator over the main/minor label allocation.
    pub fn simulator<'a>(&self, data: &'a ExperimentData) -> Result<Simulator<'a>> {
        let alloc = allocate(&data.train, &self.fl, &mut stream(self.fl.seed, Purpose::Allocation, 0, 0))?;
        let mut sim = Simulator::new(&data.train, alloc, self.fl.clone(), self.initial_model(data)?)?;
        sim.attacker = self.attacker;
        Ok(sim)
    }

    /// Simulator over three planted groups with `q`, `q/4` and `q/5`
    /// samples per label, and the planted label partition.
    pub fn planted_simulator<'a>(&self, data: &'a ExperimentData, q: usize) -> Result<(Simulator<'a>, Partition)> {
        let seed = self.fl.seed;
        let composition = plant_groups(data.train.classes(), q, &mut stream(seed, Purpose::Planting, 0, 0))?;
        let alloc = allocate_planted(
            &data.train,
            &composition,
            self.fl.n_participants,
            self.fl.allow_replacement,
            &mut stream(seed, Purpose::Allocation, 0, 0),
        )?;
        let mut sim = Simulator::new(&data.train, alloc, self.fl.clone(), self.initial_model(data)?)?;
        sim.attacker = self.attacker;
        Ok((sim, Partition::new(composition.groups)))
    }

    /// Sniffing and quantity inference on one observed round.
    pub fn attack(&self, outcome: &RoundOutcome, aux: &AuxiliaryData) -> Result<AttackReport> {
        let obs = &outcome.observation;
        self.attack_models(obs.round, &obs.before, &obs.after, outcome.attacker_delta.as_ref(), aux)
    }

    /// Sniffing and quantity inference from two consecutive global models.
    pub fn attack_models(
        &self,
        round: usize,
        before: &Network,
        after: &Network,
        own_delta: Option<&UpdateDelta>,
        aux: &AuxiliaryData,
    ) -> Result<AttackReport> {
        attack_round(
            round,
            before,
            after,
            aux,
            &self.fl.train_params(),
            &self.priors(),
            &self.attack,
            self.fl.seed,
            own_delta,
        )
    }

    /// Whole determination on the global model reached after `round`.
    pub fn whole_on(&self, global: &Network, round: usize, aux: &AuxiliaryData) -> Result<Partition> {
        let bank = build_delta_bank(global, aux, &self.fl.train_params(), self.fl.seed, round + 1)?;
        whole_determination(&bank, self.attack.linkage, self.attack.cut)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RoundRecord {
    pub round: usize,
    pub selected: Vec<usize>,
    pub test_accuracy: f64,
    pub sniff: Vec<SniffRecord>,
    pub quantity: Vec<QuantityRecord>,
}

/// Runs `cfg.fl.rounds` rounds, attacking every one.
pub fn run_label_inference(cfg: &ExperimentConfig, data: &ExperimentData) -> Result<Vec<RoundRecord>> {
    let aux = cfg.auxiliary(data);
    let mut sim = cfg.simulator(data)?;
    let mut records = Vec::with_capacity(cfg.fl.rounds);
    for _ in 0..cfg.fl.rounds {
        let outcome = sim.step()?;
        let report = cfg.attack(&outcome, &aux)?;
        let seed = cfg.fl.seed;
        records.push(RoundRecord {
            round: outcome.truth.round,
            selected: outcome.truth.selected.clone(),
            test_accuracy: sim.global.accuracy(&data.test)?,
            sniff: sniff_records(&report, &outcome.truth, seed)?,
            quantity: quantity_records(&report, &outcome.truth, seed)?,
        });
    }
    Ok(records)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Stage {
    Middle,
    Late,
}

impl std::str::FromStr for Stage {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "middle" => Ok(Stage::Middle),
            "late" => Ok(Stage::Late),
            other => Err(Error::InvalidArgument(format!("unknown stage {other:?}"))),
        }
    }
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Stage::Middle => "middle",
            Stage::Late => "late",
        })
    }
}

/// Test-accuracy levels at which whole determination is launched.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StageTriggers {
    /// First round with accuracy at or above this.
    pub middle: f64,
    /// First round with accuracy strictly above this.
    pub late: f64,
}

impl StageTriggers {
    pub fn fires(&self, stage: Stage, accuracy: f64) -> bool {
        match stage {
            Stage::Middle => accuracy >= self.middle,
            Stage::Late => accuracy > self.late,
        }
    }
}

impl Default for StageTriggers {
    fn default() -> Self {
        Self {
            middle: 0.5,
            late: 0.85,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct WholeConfig {
    pub experiment: ExperimentConfig,
    /// Per-label sample count of the largest planted group.
    pub q: usize,
    pub triggers: StageTriggers,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StageResult {
    pub stage: Stage,
    /// Round after which the attack ran; `None` if the trigger never fired.
    pub round: Option<usize>,
    pub test_accuracy: f64,
    pub found: Option<Partition>,
    pub success: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct WholeRun {
    pub seed: u64,
    pub planted: Partition,
    pub stages: Vec<StageResult>,
}

/// Trains on a planted three-group composition for up to `fl.rounds`
/// rounds and runs whole determination on the global model when each
/// stage trigger first fires.
pub fn run_whole_determination(cfg: &WholeConfig, data: &ExperimentData) -> Result<WholeRun> {
    let exp = &cfg.experiment;
    let seed = exp.fl.seed;
    let (mut sim, planted) = exp.planted_simulator(data, cfg.q)?;
    let aux = exp.auxiliary(data);
    let mut pending = vec![Stage::Middle, Stage::Late];
    let mut stages = Vec::new();
    let mut accuracy = 0.0;
    for _ in 0..exp.fl.rounds {
        if pending.is_empty() {
            break;
        }
        let outcome = sim.step()?;
        accuracy = sim.global.accuracy(&data.test)?;
        let fired: Vec<Stage> = pending
            .iter()
            .copied()
            .filter(|&s| cfg.triggers.fires(s, accuracy))
            .collect();
        if fired.is_empty() {
            continue;
        }
        let round = outcome.truth.round;
        let found = exp.whole_on(&sim.global, round, &aux)?;
        for stage in fired {
            pending.retain(|s| *s != stage);
            stages.push(StageResult {
                stage,
                round: Some(round),
                test_accuracy: accuracy,
                success: found == planted,
                found: Some(found.clone()),
            });
        }
    }
    for stage in pending {
        stages.push(StageResult {
            stage,
            round: None,
            test_accuracy: accuracy,
            found: None,
            success: false,
        });
    }
    stages.sort_by_key(|s| s.stage);
    Ok(WholeRun { seed, planted, stages })
}

/// Checks a dataset is usable with a configuration before a long run.
pub fn check_compatible(cfg: &ExperimentConfig, data: &ExperimentData) -> Result<()> {
    cfg.fl.validate(data.train.classes())?;
    if cfg.aux_per_label == 0 {
        return Err(Error::InvalidArgument("aux_per_label must be >= 1".into()));
    }
    let aux = cfg.auxiliary(data);
    for label in 0..data.train.classes() {
        aux.get(label)?;
    }
    Ok(())
}
