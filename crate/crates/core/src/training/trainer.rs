use std::fmt::Write as _;
use std::io::Write as _;
use std::path::Path;

use log::info;

use super::backprop::{backward, backward_single, mean_cross_entropy};
use super::config::{StageKind, StagePlan, StageSpec, TrainingConfig};
use super::dropout::{apply_input_dropout_batch, apply_moddrop_batch, hidden_masks};
use super::sgd::sgd_step;
use crate::error::{invalid, Error, Result, Shape};
use crate::network::{
    argmax, forward_batch, forward_single_batch, init_shared_from_pretrained, Batch, Dense,
    ForwardOptions, Params, PathParams, Topology,
};
use crate::numerics::{Matrix, SeededRng};

const EVAL_CHUNK: usize = 512;

/// Labelled multi-modal examples stored column-wise per modality.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    /// One `len x d_k` matrix per modality.
    pub inputs: Vec<Matrix>,
    /// `present[k][i]`: modality `k` of example `i` is available.
    pub present: Vec<Vec<bool>>,
    pub labels: Vec<usize>,
}

impl Dataset {
    pub fn new(inputs: Vec<Matrix>, labels: Vec<usize>) -> Result<Self> {
        let present = inputs.iter().map(|_| vec![true; labels.len()]).collect();
        let d = Self {
            inputs,
            present,
            labels,
        };
        d.check()?;
        Ok(d)
    }

    fn check(&self) -> Result<()> {
        if self.inputs.is_empty() {
            return Err(invalid("dataset has no modalities"));
        }
        let n = self.labels.len();
        for (k, x) in self.inputs.iter().enumerate() {
            if x.rows() != n || self.present.get(k).map_or(true, |p| p.len() != n) {
                return Err(Error::ShapeMismatch {
                    op: "dataset",
                    left: x.shape(),
                    right: Shape(n, x.cols()),
                });
            }
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn modalities(&self) -> usize {
        self.inputs.len()
    }

    /// Marks modality `k` of example `i` absent and zeroes it.
    pub fn mark_absent(&mut self, k: usize, i: usize) {
        self.present[k][i] = false;
        self.inputs[k].row_mut(i).fill(0.0);
    }

    /// Rows `idx` in the given order.
    pub fn batch(&self, idx: &[usize]) -> Batch {
        let inputs = self
            .inputs
            .iter()
            .map(|x| gather_rows(x, idx))
            .collect();
        let present = self
            .present
            .iter()
            .map(|p| idx.iter().map(|&i| p[i]).collect())
            .collect();
        Batch {
            inputs,
            present,
            labels: idx.iter().map(|&i| self.labels[i]).collect(),
        }
    }

    pub fn subset(&self, idx: &[usize]) -> Dataset {
        let b = self.batch(idx);
        Dataset {
            inputs: b.inputs,
            present: b.present,
            labels: b.labels,
        }
    }
}

fn gather_rows(x: &Matrix, idx: &[usize]) -> Matrix {
    let mut out = Matrix::zeros(idx.len(), x.cols());
    for (r, &i) in idx.iter().enumerate() {
        out.row_mut(r).copy_from_slice(x.row(i));
    }
    out
}

/// Mean cross-entropy and error count over a dataset.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Evaluation {
    pub loss: f64,
    pub errors: usize,
    pub count: usize,
}

impl Evaluation {
    pub fn error_rate(&self) -> f64 {
        self.errors as f64 / self.count.max(1) as f64
    }
}

/// Class posteriors of the full network for every example.
pub fn predict(params: &Params, topology: &Topology, data: &Dataset, opts: &ForwardOptions) -> Result<Matrix> {
    let mut out = Matrix::zeros(data.len(), topology.classes());
    let idx: Vec<usize> = (0..data.len()).collect();
    for chunk in idx.chunks(EVAL_CHUNK) {
        let trace = forward_batch(&data.batch(chunk), params, topology, opts, None)?;
        out.set_block(chunk[0], 0, &trace.posteriors);
    }
    Ok(out)
}

/// Class posteriors of path `k` through its own head.
pub fn predict_single(
    k: usize,
    params: &Params,
    topology: &Topology,
    data: &Dataset,
    opts: &ForwardOptions,
) -> Result<Matrix> {
    let x = data
        .inputs
        .get(k)
        .ok_or_else(|| invalid(format!("dataset has no modality {k}")))?;
    let mut out = Matrix::zeros(data.len(), topology.classes());
    let idx: Vec<usize> = (0..data.len()).collect();
    for chunk in idx.chunks(EVAL_CHUNK) {
        let input = gather_rows(x, chunk);
        let trace = forward_single_batch(k, &input, params, topology, opts, None)?;
        out.set_block(chunk[0], 0, &trace.posteriors);
    }
    Ok(out)
}

/// Loss and errors of a posterior matrix against labels.
pub fn score_posteriors(posteriors: &Matrix, labels: &[usize]) -> Result<Evaluation> {
    let loss = mean_cross_entropy(posteriors, labels)?;
    let errors = labels
        .iter()
        .enumerate()
        .filter(|&(r, &y)| argmax(posteriors.row(r)) != y)
        .count();
    Ok(Evaluation {
        loss,
        errors,
        count: labels.len(),
    })
}

pub fn evaluate(params: &Params, topology: &Topology, data: &Dataset, opts: &ForwardOptions) -> Result<Evaluation> {
    score_posteriors(&predict(params, topology, data, opts)?, &data.labels)
}

pub fn evaluate_single(
    k: usize,
    params: &Params,
    topology: &Topology,
    data: &Dataset,
    opts: &ForwardOptions,
) -> Result<Evaluation> {
    score_posteriors(&predict_single(k, params, topology, data, opts)?, &data.labels)
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpochRecord {
    pub epoch: usize,
    pub stage: String,
    pub train_loss: f64,
    pub val_loss: f64,
    pub val_errors: usize,
}

/// Per-epoch training history, serialized as tab-separated text.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct TrainLog {
    pub records: Vec<EpochRecord>,
}

impl TrainLog {
    pub const HEADER: &'static str = "epoch\tstage\ttrain_loss\tval_loss\tval_errors";

    pub fn to_tsv(&self) -> String {
        let mut s = String::from(Self::HEADER);
        s.push('\n');
        for r in &self.records {
            let _ = writeln!(
                s,
                "{}\t{}\t{:.6}\t{:.6}\t{}",
                r.epoch, r.stage, r.train_loss, r.val_loss, r.val_errors
            );
        }
        s
    }

    pub fn write_tsv(&self, path: &Path) -> Result<()> {
        let mut f = std::fs::File::create(path)?;
        f.write_all(self.to_tsv().as_bytes())?;
        Ok(())
    }

    pub fn extend(&mut self, other: TrainLog) {
        self.records.extend(other.records);
    }
}

/// Validation statistics of one stage. `initial` is measured before the
/// first update and competes with every epoch for `best`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StageOutcome {
    pub initial: Evaluation,
    pub best: Evaluation,
    pub best_epoch: usize,
    pub epochs_run: usize,
}

/// Runs epochs until `max_epochs` or `patience` epochs without a lower
/// validation loss, leaving the best state in `state`.
fn run_epochs<S: Clone>(
    state: &mut S,
    cfg: &TrainingConfig,
    max_epochs: usize,
    stage: &str,
    log: &mut TrainLog,
    mut train_epoch: impl FnMut(&mut S, usize, f64) -> Result<f64>,
    mut validate: impl FnMut(&S) -> Result<Evaluation>,
) -> Result<StageOutcome> {
    let initial = validate(state)?;
    let mut best = initial;
    let mut best_state = state.clone();
    let mut best_epoch = 0;
    let mut lr = cfg.learning_rate;
    let mut epochs_run = 0;
    for epoch in 1..=max_epochs {
        let train_loss = train_epoch(state, epoch, lr)?;
        let val = validate(state)?;
        epochs_run = epoch;
        info!(
            "{stage} epoch {epoch}: train {train_loss:.4} val {:.4} errors {}",
            val.loss, val.errors
        );
        log.records.push(EpochRecord {
            epoch,
            stage: stage.to_owned(),
            train_loss,
            val_loss: val.loss,
            val_errors: val.errors,
        });
        if !train_loss.is_finite() {
            break;
        }
        if val.loss < best.loss {
            best = val;
            best_epoch = epoch;
            best_state = state.clone();
        } else if epoch - best_epoch >= cfg.patience {
            break;
        }
        lr *= cfg.lr_decay;
    }
    *state = best_state;
    Ok(StageOutcome {
        initial,
        best,
        best_epoch,
        epochs_run,
    })
}

fn shuffled(n: usize, rng: &mut SeededRng) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..n).collect();
    rng.shuffle(&mut idx);
    idx
}

fn eval_options(cfg: &TrainingConfig) -> ForwardOptions {
    ForwardOptions::eval(cfg.input_keep, cfg.hidden_keep)
}

// Stream tags keep every stage's draws independent.
const TAG_INIT: u64 = 1;
const TAG_PRETRAIN: u64 = 2;
const TAG_FUSION: u64 = 3;

/// Trains path `k` with its own softmax head on the examples where
/// modality `k` is present. Starts from `params.paths[k]` and returns the
/// best-validation path.
pub fn pretrain_modality(
    k: usize,
    params: &Params,
    topology: &Topology,
    train: &Dataset,
    val: &Dataset,
    cfg: &TrainingConfig,
    max_epochs: usize,
    log: &mut TrainLog,
) -> Result<(PathParams, StageOutcome)> {
    cfg.validate()?;
    topology.path(k)?;
    let rows = |d: &Dataset| -> Result<Dataset> {
        let p = d
            .present
            .get(k)
            .ok_or_else(|| invalid(format!("dataset has no modality {k}")))?;
        Ok(d.subset(&(0..d.len()).filter(|&i| p[i]).collect::<Vec<_>>()))
    };
    let train = rows(train)?;
    let val = rows(val)?;
    if train.is_empty() || val.is_empty() {
        return Err(invalid(format!("no examples with modality {k} to pretrain on")));
    }
    let opts = eval_options(cfg);
    let stage = format!("{}{k}", StageKind::Pretrain);
    let mut work = params.clone();
    let outcome = run_epochs(
        &mut work,
        cfg,
        max_epochs,
        &stage,
        log,
        |p, epoch, lr| {
            let order = shuffled(train.len(), &mut SeededRng::stream(cfg.seed, &[TAG_PRETRAIN, k as u64, epoch as u64]));
            let mut total = 0.0;
            for (b, chunk) in order.chunks(cfg.batch_size).enumerate() {
                let mut rng = SeededRng::stream(cfg.seed, &[TAG_PRETRAIN, k as u64, epoch as u64, b as u64 + 1]);
                let mut batch = train.batch(chunk);
                apply_input_dropout_batch(&mut batch, cfg.input_keep, &mut rng)?;
                let masks = if cfg.hidden_keep < 1.0 {
                    Some(hidden_masks(&p.paths[k], chunk.len(), cfg.hidden_keep, &mut rng)?)
                } else {
                    None
                };
                let trace = forward_single_batch(
                    k,
                    &batch.inputs[k],
                    p,
                    topology,
                    &ForwardOptions::train(),
                    masks.as_deref(),
                )?;
                total += mean_cross_entropy(&trace.posteriors, &batch.labels)? * chunk.len() as f64;
                let g = backward_single(&trace, &batch.labels, p, cfg.l2)?;
                sgd_step(&mut p.paths[k], &g, lr)?;
            }
            Ok(total / train.len() as f64)
        },
        |p| evaluate_single(k, p, topology, &val, &opts),
    )?;
    Ok((work.paths.swap_remove(k), outcome))
}

/// One fusion stage over the whole network. The gate is set from the
/// stage kind; ModDrop draws an independent δ pattern per example.
pub fn train_stage(
    params: &mut Params,
    topology: &Topology,
    train: &Dataset,
    val: &Dataset,
    cfg: &TrainingConfig,
    stage: &StageSpec,
    log: &mut TrainLog,
) -> Result<StageOutcome> {
    cfg.validate()?;
    if stage.kind == StageKind::Pretrain {
        return Err(invalid("pretraining runs per path, not through train_stage"));
    }
    if train.is_empty() || val.is_empty() {
        return Err(invalid("fusion needs non-empty training and validation sets"));
    }
    let keep: Vec<f64> = (0..topology.modalities()).map(|k| cfg.modality_keep(k)).collect();
    if stage.moddrop && !cfg.moddrop_keep.is_empty() && cfg.moddrop_keep.len() != keep.len() {
        return Err(invalid(format!(
            "{} ModDrop probabilities for {} modalities",
            cfg.moddrop_keep.len(),
            keep.len()
        )));
    }
    params.shared.set_gamma(stage.gamma())?;
    let opts = eval_options(cfg);
    let tag = stage.kind as u64;
    run_epochs(
        params,
        cfg,
        stage.epochs.min(cfg.max_epochs),
        &stage.kind.to_string(),
        log,
        |p, epoch, lr| {
            let order = shuffled(train.len(), &mut SeededRng::stream(cfg.seed, &[TAG_FUSION, tag, epoch as u64]));
            let mut total = 0.0;
            for (b, chunk) in order.chunks(cfg.batch_size).enumerate() {
                let mut rng = SeededRng::stream(cfg.seed, &[TAG_FUSION, tag, epoch as u64, b as u64 + 1]);
                let mut batch = train.batch(chunk);
                if stage.moddrop {
                    apply_moddrop_batch(&mut batch, &keep, &mut rng)?;
                }
                apply_input_dropout_batch(&mut batch, cfg.input_keep, &mut rng)?;
                let masks = if cfg.hidden_keep < 1.0 {
                    Some(
                        p.paths
                            .iter()
                            .map(|path| hidden_masks(path, chunk.len(), cfg.hidden_keep, &mut rng))
                            .collect::<Result<Vec<_>>>()?,
                    )
                } else {
                    None
                };
                let trace = forward_batch(&batch, p, topology, &ForwardOptions::train(), masks.as_deref())?;
                total += mean_cross_entropy(&trace.posteriors, &batch.labels)? * chunk.len() as f64;
                let g = backward(&trace, &batch.labels, p, topology, cfg.l2)?;
                sgd_step(p, &g, lr)?;
            }
            Ok(total / train.len() as f64)
        },
        |p| evaluate(p, topology, val, &opts),
    )
}

/// Runs the fusion stages of `plan` in order on params whose shared
/// layers were initialized from the pretrained heads.
pub fn fuse_train(
    params: Params,
    topology: &Topology,
    train: &Dataset,
    val: &Dataset,
    cfg: &TrainingConfig,
    plan: &StagePlan,
    log: &mut TrainLog,
) -> Result<(Params, Vec<StageOutcome>)> {
    params.validate(topology)?;
    let mut params = params;
    let mut outcomes = Vec::new();
    for stage in plan.fusion_stages() {
        outcomes.push(train_stage(&mut params, topology, train, val, cfg, stage, log)?);
    }
    Ok((params, outcomes))
}

/// Everything a full staged run produces.
#[derive(Debug, Clone)]
pub struct TrainedModel {
    pub params: Params,
    /// Parameters right after pretraining and fusion initialization.
    pub initial_fusion: Params,
    pub pretrain: Vec<StageOutcome>,
    pub fusion: Vec<StageOutcome>,
    pub log: TrainLog,
}

/// How the shared layers start once the paths are ready.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SharedInit {
    /// Transplant the path heads so the network starts as their geometric mean.
    FromHeads,
    /// Glorot-initialized shared layers with the gate open.
    Random,
}

/// Fresh initialization and per-path pretraining (when the plan has a
/// pretraining stage). Returns the parameters, pretraining outcomes and log.
pub fn pretrain_all(
    topology: &Topology,
    train: &Dataset,
    val: &Dataset,
    cfg: &TrainingConfig,
    plan: &StagePlan,
) -> Result<(Params, Vec<StageOutcome>, TrainLog)> {
    cfg.validate()?;
    let mut params = Params::random(topology, &mut SeededRng::stream(cfg.seed, &[TAG_INIT]));
    let mut log = TrainLog::default();
    let mut outcomes = Vec::new();
    if let Some(epochs) = plan.pretrain_epochs() {
        for k in 0..topology.modalities() {
            let (path, outcome) =
                pretrain_modality(k, &params, topology, train, val, cfg, epochs.min(cfg.max_epochs), &mut log)?;
            params.paths[k] = path;
            outcomes.push(outcome);
        }
    }
    Ok((params, outcomes, log))
}

/// Replaces the shared layers of `params` according to `init`.
pub fn initialize_shared(params: &mut Params, topology: &Topology, init: SharedInit, seed: u64) -> Result<()> {
    params.shared = match init {
        SharedInit::FromHeads => {
            let heads: Vec<&Dense> = params.paths.iter().map(|p| &p.head).collect();
            init_shared_from_pretrained(&heads, topology)?
        }
        SharedInit::Random => {
            crate::network::SharedParams::random(topology, &mut SeededRng::stream(seed, &[TAG_INIT, 1]))
        }
    };
    Ok(())
}

/// Pretraining, shared-layer initialization from the heads and the fusion
/// stages of `plan`. Without a pretraining stage the random paths and
/// heads are used as they are.
pub fn train_staged(
    topology: &Topology,
    train: &Dataset,
    val: &Dataset,
    cfg: &TrainingConfig,
    plan: &StagePlan,
) -> Result<TrainedModel> {
    train_staged_with(topology, train, val, cfg, plan, SharedInit::FromHeads)
}

pub fn train_staged_with(
    topology: &Topology,
    train: &Dataset,
    val: &Dataset,
    cfg: &TrainingConfig,
    plan: &StagePlan,
    init: SharedInit,
) -> Result<TrainedModel> {
    let (mut params, pretrain, mut log) = pretrain_all(topology, train, val, cfg, plan)?;
    initialize_shared(&mut params, topology, init, cfg.seed)?;
    let initial_fusion = params.clone();
    let (params, fusion) = fuse_train(params, topology, train, val, cfg, plan, &mut log)?;
    Ok(TrainedModel {
        params,
        initial_fusion,
        pretrain,
        fusion,
        log,
    })
}
