//! Training strategies and the occlusion / pepper-noise evaluation grid
//! on the four-quarter MNIST setting.

use std::fmt::Write as _;
use std::path::Path;

use log::info;

use super::idx::MnistFiles;
use super::mnist::{occlude_dataset, pepper_dataset, quarter_dataset, subsets, QUARTERS};
use crate::error::{invalid, Result};
use crate::network::{ForwardOptions, ParameterGroups, Params, Topology};
use crate::numerics::SeededRng;
use crate::training::{
    evaluate, fuse_train, initialize_shared, pretrain_all, SharedInit, StageKind, StageOutcome, StagePlan,
    StageSpec, TrainLog, TrainingConfig,
};
use crate::training::Dataset;

#[derive(Debug, Clone, PartialEq)]
pub struct MnistExperimentConfig {
    /// Optimizer settings; dropout and ModDrop fields are overridden by the flags below.
    pub training: TrainingConfig,
    pub pretrain: bool,
    pub input_dropout: bool,
    pub moddrop: bool,
    /// Start the shared layers as the geometric mean of the pretrained heads.
    pub shared_init: bool,
    pub input_keep: f64,
    pub moddrop_keep: f64,
    pub pretrain_epochs: usize,
    pub frozen_epochs: usize,
    pub relaxed_epochs: usize,
    /// Trailing training images held out for early stopping.
    pub validation_size: usize,
    /// Use only the first `n` training images (before the validation split).
    pub train_limit: Option<usize>,
    pub test_limit: Option<usize>,
    pub noise_rate: f64,
}

impl Default for MnistExperimentConfig {
    fn default() -> Self {
        Self {
            training: TrainingConfig {
                lr_decay: 0.955,
                batch_size: 32,
                patience: 40,
                l2: 5e-6,
                ..TrainingConfig::default()
            },
            pretrain: true,
            input_dropout: true,
            moddrop: false,
            shared_init: true,
            input_keep: 0.8,
            moddrop_keep: 0.9,
            pretrain_epochs: 30,
            frozen_epochs: 5,
            relaxed_epochs: 80,
            validation_size: 5_000,
            train_limit: None,
            test_limit: None,
            noise_rate: 0.5,
        }
    }
}

impl MnistExperimentConfig {
    /// Effective training settings for this strategy.
    pub fn training_config(&self) -> TrainingConfig {
        let mut t = self.training.clone();
        t.input_keep = if self.input_dropout { self.input_keep } else { 1.0 };
        t.moddrop_keep = vec![self.moddrop_keep; QUARTERS];
        t
    }

    pub fn stage_plan(&self) -> StagePlan {
        let mut stages = Vec::new();
        if self.pretrain {
            stages.push(StageSpec::new(StageKind::Pretrain, self.pretrain_epochs, false));
        }
        if self.pretrain && self.shared_init {
            stages.push(StageSpec::new(StageKind::FuseFrozen, self.frozen_epochs, false));
        }
        stages.push(StageSpec::new(StageKind::FuseRelaxed, self.relaxed_epochs, self.moddrop));
        StagePlan::new(stages).expect("stages are built in order")
    }

    /// How the shared layers start once the paths are trained.
    pub fn init_mode(&self) -> SharedInit {
        if self.pretrain && self.shared_init {
            SharedInit::FromHeads
        } else {
            SharedInit::Random
        }
    }

    /// Table-style label such as `pretrain+dropout+moddrop`.
    pub fn strategy_name(&self) -> String {
        let parts: Vec<&str> = [
            (self.pretrain, "pretrain"),
            (self.input_dropout, "dropout"),
            (self.moddrop, "moddrop"),
        ]
        .iter()
        .filter(|(on, _)| *on)
        .map(|(_, n)| *n)
        .collect();
        if parts.is_empty() {
            "plain".to_owned()
        } else {
            parts.join("+")
        }
    }
}

/// Train / validation / test splits in quarter form.
#[derive(Debug, Clone)]
pub struct MnistData {
    pub train: Dataset,
    pub val: Dataset,
    pub test: Dataset,
}

impl MnistData {
    pub fn load(dir: &Path, cfg: &MnistExperimentConfig) -> Result<Self> {
        let (train, test) = MnistFiles::in_dir(dir).load()?;
        let n = cfg.train_limit.unwrap_or(train.labels.len()).min(train.labels.len());
        if cfg.validation_size == 0 || cfg.validation_size >= n {
            return Err(invalid(format!(
                "validation size {} must be in 1..{n}",
                cfg.validation_size
            )));
        }
        let split = n - cfg.validation_size;
        let t = cfg.test_limit.unwrap_or(test.labels.len()).min(test.labels.len());
        Ok(Self {
            train: quarter_dataset(&train, 0..split)?,
            val: quarter_dataset(&train, split..n)?,
            test: quarter_dataset(&test, 0..t)?,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Perturbation {
    Missing,
    Pepper,
}

/// One row of the robustness grid: `segments` quarters perturbed, error
/// averaged over every choice of those quarters.
#[derive(Debug, Clone, PartialEq)]
pub struct GridRow {
    pub kind: Perturbation,
    pub segments: usize,
    pub error_rate: f64,
    pub subset_error_rates: Vec<f64>,
}

impl GridRow {
    pub fn label(&self) -> String {
        match (self.kind, self.segments) {
            (Perturbation::Missing, 0) => "all segments visible".to_owned(),
            (Perturbation::Missing, 1) => "1 segment covered".to_owned(),
            (Perturbation::Missing, m) => format!("{m} segments covered"),
            (Perturbation::Pepper, 0) => "all clean".to_owned(),
            (Perturbation::Pepper, 1) => "1 corrupted segment".to_owned(),
            (Perturbation::Pepper, m) if m == QUARTERS => "all segments corrupted".to_owned(),
            (Perturbation::Pepper, m) => format!("{m} corrupted segments"),
        }
    }
}

/// Missing-segment rows for 0..=3 quarters and pepper rows for 0..=4.
pub fn robustness_grid(
    params: &Params,
    topology: &Topology,
    test: &Dataset,
    opts: &ForwardOptions,
    noise_rate: f64,
    seed: u64,
) -> Result<Vec<GridRow>> {
    let clean = evaluate(params, topology, test, opts)?.error_rate();
    let mut rows = Vec::new();
    for m in 0..QUARTERS {
        let rates = if m == 0 {
            vec![clean]
        } else {
            subsets(QUARTERS, m)
                .iter()
                .map(|s| Ok(evaluate(params, topology, &occlude_dataset(test, s)?, opts)?.error_rate()))
                .collect::<Result<Vec<_>>>()?
        };
        rows.push(grid_row(Perturbation::Missing, m, rates));
    }
    for m in 0..=QUARTERS {
        let rates = if m == 0 {
            vec![clean]
        } else {
            subsets(QUARTERS, m)
                .iter()
                .map(|s| {
                    let key: Vec<u64> = std::iter::once(7).chain(s.iter().map(|&q| q as u64)).collect();
                    let mut rng = SeededRng::stream(seed, &key);
                    let noisy = pepper_dataset(test, s, noise_rate, &mut rng)?;
                    Ok(evaluate(params, topology, &noisy, opts)?.error_rate())
                })
                .collect::<Result<Vec<_>>>()?
        };
        rows.push(grid_row(Perturbation::Pepper, m, rates));
    }
    Ok(rows)
}

fn grid_row(kind: Perturbation, segments: usize, rates: Vec<f64>) -> GridRow {
    GridRow {
        kind,
        segments,
        error_rate: rates.iter().sum::<f64>() / rates.len() as f64,
        subset_error_rates: rates,
    }
}

/// Outcome of training and evaluating one strategy.
#[derive(Debug, Clone)]
pub struct MnistRun {
    pub strategy: String,
    pub params: Params,
    pub test_errors: usize,
    pub test_count: usize,
    pub grid: Vec<GridRow>,
    pub fusion: Vec<StageOutcome>,
}

pub fn mnist_topology() -> Topology {
    Topology::mnist_quarters()
}

/// Trains one strategy and evaluates it on the clean and perturbed test sets.
pub fn run_mnist_experiment(cfg: &MnistExperimentConfig, data: &MnistData, log: &mut TrainLog) -> Result<MnistRun> {
    let topology = mnist_topology();
    let tcfg = cfg.training_config();
    let plan = cfg.stage_plan();
    let (mut params, _, pre_log) = pretrain_all(&topology, &data.train, &data.val, &tcfg, &plan)?;
    log.extend(pre_log);
    initialize_shared(&mut params, &topology, cfg.init_mode(), tcfg.seed)?;
    let (params, fusion) = fuse_train(params, &topology, &data.train, &data.val, &tcfg, &plan, log)?;
    finish_run(cfg.strategy_name(), params, fusion, &topology, data, &tcfg, cfg.noise_rate)
}

fn finish_run(
    strategy: String,
    params: Params,
    fusion: Vec<StageOutcome>,
    topology: &Topology,
    data: &MnistData,
    tcfg: &TrainingConfig,
    noise_rate: f64,
) -> Result<MnistRun> {
    let opts = ForwardOptions::eval(tcfg.input_keep, tcfg.hidden_keep);
    let clean = evaluate(&params, topology, &data.test, &opts)?;
    info!("{strategy}: {} test errors of {}", clean.errors, clean.count);
    let grid = robustness_grid(&params, topology, &data.test, &opts, noise_rate, tcfg.seed)?;
    Ok(MnistRun {
        strategy,
        params,
        test_errors: clean.errors,
        test_count: clean.count,
        grid,
        fusion,
    })
}

/// Dropout-only and dropout+ModDrop models sharing pretraining and the
/// frozen-gate stage; they differ only in the relaxed stage.
#[derive(Debug, Clone)]
pub struct RobustnessComparison {
    pub dropout: MnistRun,
    pub moddrop: MnistRun,
}

pub fn run_robustness_comparison(
    cfg: &MnistExperimentConfig,
    data: &MnistData,
    log: &mut TrainLog,
) -> Result<RobustnessComparison> {
    let topology = mnist_topology();
    let base = MnistExperimentConfig {
        pretrain: true,
        shared_init: true,
        input_dropout: true,
        moddrop: false,
        ..cfg.clone()
    };
    let tcfg = base.training_config();
    let plan = base.stage_plan();
    let (mut params, _, pre_log) = pretrain_all(&topology, &data.train, &data.val, &tcfg, &plan)?;
    log.extend(pre_log);
    initialize_shared(&mut params, &topology, SharedInit::FromHeads, tcfg.seed)?;
    let frozen = StagePlan::new(vec![StageSpec::new(StageKind::FuseFrozen, base.frozen_epochs, false)])?;
    let (params, frozen_outcome) = fuse_train(params, &topology, &data.train, &data.val, &tcfg, &frozen, log)?;

    let branch = |moddrop: bool, log: &mut TrainLog| -> Result<MnistRun> {
        let c = MnistExperimentConfig { moddrop, ..base.clone() };
        let relaxed = StagePlan::new(vec![StageSpec::new(StageKind::FuseRelaxed, c.relaxed_epochs, moddrop)])?;
        let (p, mut outcomes) = fuse_train(params.clone(), &topology, &data.train, &data.val, &tcfg, &relaxed, log)?;
        outcomes.splice(0..0, frozen_outcome.iter().copied());
        finish_run(c.strategy_name(), p, outcomes, &topology, data, &tcfg, c.noise_rate)
    };
    let dropout = branch(false, log)?;
    let moddrop = branch(true, log)?;
    Ok(RobustnessComparison { dropout, moddrop })
}

/// Table of clean test errors per strategy.
pub fn strategy_table(runs: &[MnistRun]) -> String {
    let mut s = String::from("strategy\terrors\ttest_count\terror_pct\tparameters\n");
    for r in runs {
        let params = r.params.parameter_count() - r.params.paths.iter().map(|p| p.head.weights.as_slice().len() + p.head.bias.len()).sum::<usize>();
        let _ = writeln!(
            s,
            "{}\t{}\t{}\t{:.2}\t{}",
            r.strategy,
            r.test_errors,
            r.test_count,
            100.0 * r.test_errors as f64 / r.test_count.max(1) as f64,
            params
        );
    }
    s
}

/// Robustness grids side by side, one column per named run, error rates
/// in percent.
pub fn grid_report(columns: &[(&str, &[GridRow])]) -> String {
    let mut s = String::from("section\trow");
    for (name, _) in columns {
        let _ = write!(s, "\t{name}");
    }
    s.push('\n');
    let Some((_, first)) = columns.first() else {
        return s;
    };
    for (i, row) in first.iter().enumerate() {
        let section = match row.kind {
            Perturbation::Missing => "missing",
            Perturbation::Pepper => "pepper",
        };
        let _ = write!(s, "{section}\t{}", row.label());
        for (_, grid) in columns {
            let _ = write!(s, "\t{:.2}", 100.0 * grid[i].error_rate);
        }
        s.push('\n');
    }
    s
}

pub fn grid_table(c: &RobustnessComparison) -> String {
    grid_report(&[("dropout", &c.dropout.grid), ("dropout+moddrop", &c.moddrop.grid)])
}
