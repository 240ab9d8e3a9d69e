use std::fmt;

use crate::error::{check_probability, invalid, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct TrainingConfig {
    pub learning_rate: f64,
    /// Multiplies the learning rate after every epoch.
    pub lr_decay: f64,
    pub batch_size: usize,
    pub max_epochs: usize,
    /// Epochs without validation improvement before a stage stops.
    pub patience: usize,
    /// Weight of the squared L2 norm of all weight matrices.
    pub l2: f64,
    /// Probability that an input unit is kept.
    pub input_keep: f64,
    /// Probability that a path hidden unit is kept. 1 disables hidden dropout.
    pub hidden_keep: f64,
    /// Per-modality probability that a modality is kept by ModDrop.
    pub moddrop_keep: Vec<f64>,
    pub seed: u64,
}

impl Default for TrainingConfig {
    fn default() -> Self {
        Self {
            learning_rate: 0.1,
            lr_decay: 0.95,
            batch_size: 64,
            max_epochs: 100,
            patience: 15,
            l2: 1e-4,
            input_keep: 1.0,
            hidden_keep: 1.0,
            moddrop_keep: Vec::new(),
            seed: 0,
        }
    }
}

impl TrainingConfig {
    pub fn validate(&self) -> Result<()> {
        check_probability("input_keep", self.input_keep)?;
        check_probability("hidden_keep", self.hidden_keep)?;
        for &p in &self.moddrop_keep {
            check_probability("moddrop_keep", p)?;
        }
        if !(self.l2 >= 0.0) {
            return Err(invalid(format!("l2 weight must be >= 0, got {}", self.l2)));
        }
        if self.patience < 1 {
            return Err(invalid("patience must be at least 1"));
        }
        if self.batch_size == 0 {
            return Err(invalid("batch size must be positive"));
        }
        if !(self.learning_rate >= 0.0) || !(self.lr_decay > 0.0) {
            return Err(invalid("learning rate must be >= 0 and decay > 0"));
        }
        Ok(())
    }

    /// Keep probability of modality `k` (1 when unspecified).
    pub fn modality_keep(&self, k: usize) -> f64 {
        self.moddrop_keep.get(k).copied().unwrap_or(1.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum StageKind {
    Pretrain,
    /// Gate closed: only diagonal blocks of W1 carry signal.
    FuseFrozen,
    /// Gate open: all of W1 trains, ModDrop may be active.
    FuseRelaxed,
}

impl fmt::Display for StageKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Pretrain => "pretrain",
            Self::FuseFrozen => "fuse_frozen",
            Self::FuseRelaxed => "fuse_relaxed",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StageSpec {
    pub kind: StageKind,
    pub epochs: usize,
    pub moddrop: bool,
}

impl StageSpec {
    pub fn new(kind: StageKind, epochs: usize, moddrop: bool) -> Self {
        Self {
            kind,
            epochs,
            moddrop,
        }
    }

    pub fn gamma(&self) -> f64 {
        match self.kind {
            StageKind::FuseRelaxed => 1.0,
            _ => 0.0,
        }
    }
}

/// Ordered training stages: pretraining, then frozen-gate fusion, then
/// relaxed fusion. Each kind may appear at most once.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StagePlan {
    stages: Vec<StageSpec>,
}

impl StagePlan {
    pub fn new(stages: Vec<StageSpec>) -> Result<Self> {
        for w in stages.windows(2) {
            if w[0].kind >= w[1].kind {
                return Err(invalid(format!(
                    "stage `{}` cannot follow `{}`",
                    w[1].kind, w[0].kind
                )));
            }
        }
        if stages
            .iter()
            .any(|s| s.kind == StageKind::Pretrain && s.moddrop)
        {
            return Err(invalid("ModDrop has no meaning while paths are pretrained alone"));
        }
        Ok(Self { stages })
    }

    /// Pretraining, a frozen-gate fusion stage, and a relaxed stage that
    /// optionally runs ModDrop.
    pub fn standard(pretrain: usize, frozen: usize, relaxed: usize, moddrop: bool) -> Self {
        Self::new(vec![
            StageSpec::new(StageKind::Pretrain, pretrain, false),
            StageSpec::new(StageKind::FuseFrozen, frozen, false),
            StageSpec::new(StageKind::FuseRelaxed, relaxed, moddrop),
        ])
        .expect("ordered")
    }

    pub fn stages(&self) -> &[StageSpec] {
        &self.stages
    }

    pub fn fusion_stages(&self) -> impl Iterator<Item = &StageSpec> {
        self.stages.iter().filter(|s| s.kind != StageKind::Pretrain)
    }

    pub fn pretrain_epochs(&self) -> Option<usize> {
        self.stages
            .iter()
            .find(|s| s.kind == StageKind::Pretrain)
            .map(|s| s.epochs)
    }
}
