//! Staged optimization: per-path pretraining, gated fusion training with
//! input dropout and ModDrop, and a toy oracle for the ModDrop gradient.

mod backprop;
mod config;
mod dropout;
pub mod oracle;
mod sgd;
mod trainer;

pub use backprop::{
    active_modalities, backward, backward_single, cross_entropy_loss, fused_loss, fused_weight_penalty,
    path_weight_penalty, single_loss,
};
pub use config::{StageKind, StagePlan, StageSpec, TrainingConfig};
pub use dropout::{apply_input_dropout, apply_input_dropout_batch, apply_moddrop, apply_moddrop_batch, hidden_masks};
pub use oracle::{moddrop_gradient_expectation_check, DerivationOracleConfig, OracleReport};
pub use sgd::sgd_step;
pub use trainer::{
    evaluate, evaluate_single, fuse_train, initialize_shared, predict, predict_single, pretrain_all, pretrain_modality,
    score_posteriors, train_stage, train_staged, train_staged_with, Dataset, EpochRecord, Evaluation, StageOutcome, SharedInit, TrainLog, TrainedModel,
};

#[cfg(test)]
mod tests;
