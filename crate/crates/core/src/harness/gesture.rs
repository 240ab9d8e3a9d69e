//! End-to-end gesture spotting on synthetic skeleton streams: pose
//! descriptors, one classifier per temporal stride, score aggregation,
//! and optional boundary refinement by a motion detector.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use crate::error::{invalid, Result};
use crate::numerics::{Matrix, SeededRng};
use crate::skeleton::{describe_sequence, dynamic_pose_matrix, DescriptorConfig, FeatureStandardizer, SkeletonTree};
use crate::temporal::{
    frame_labels, generate_synthetic_sequence, mean_jaccard, per_class_jaccard, refine_boundaries,
    segments_from_labels, switch_points, ClassifierConfig, HeldOut, MotionClassifier, PoseClassifier, ScaleScores,
    ScoreSequence, SegmentLabeling, SyntheticConfig, SyntheticSequence,
};

#[derive(Debug, Clone, PartialEq)]
pub struct GesturePipelineConfig {
    pub synthetic: SyntheticConfig,
    pub train_sequences: usize,
    pub test_sequences: usize,
    pub strides: Vec<usize>,
    /// Fusion weight of each stride.
    pub scale_weights: Vec<f64>,
    pub descriptor: DescriptorConfig,
    pub gesture: ClassifierConfig,
    pub motion: ClassifierConfig,
    /// Largest boundary move during refinement, in frames.
    pub vicinity: usize,
    /// Predicted segments shorter than this are discarded.
    pub min_segment_frames: usize,
    /// Training uses every n-th dynamic pose.
    pub train_subsample: usize,
    pub seed: u64,
}

impl Default for GesturePipelineConfig {
    fn default() -> Self {
        let base = ClassifierConfig::default();
        Self {
            synthetic: SyntheticConfig::default(),
            train_sequences: 6,
            test_sequences: 3,
            strides: vec![2, 3, 4],
            scale_weights: vec![1.0; 3],
            descriptor: DescriptorConfig::default(),
            gesture: ClassifierConfig {
                hidden: 64,
                epochs: 15,
                ..base.clone()
            },
            motion: ClassifierConfig { epochs: 8, ..base },
            vicinity: 10,
            min_segment_frames: 5,
            train_subsample: 2,
            seed: 1,
        }
    }
}

impl GesturePipelineConfig {
    pub fn validate(&self) -> Result<()> {
        self.synthetic.validate()?;
        if self.strides.is_empty() || self.strides.len() != self.scale_weights.len() {
            return Err(invalid("need one fusion weight per stride"));
        }
        if self.train_sequences == 0 || self.test_sequences == 0 || self.train_subsample == 0 {
            return Err(invalid("sequence counts and subsampling must be positive"));
        }
        Ok(())
    }
}

const TAG_TRAIN: u64 = 10;
const TAG_TEST: u64 = 11;
const TAG_CLASSIFIER: u64 = 12;
const TAG_MOTION: u64 = 13;

pub fn synthetic_split(cfg: &GesturePipelineConfig) -> Result<(Vec<SyntheticSequence>, Vec<SyntheticSequence>)> {
    let make = |tag: u64, prefix: &str, n: usize| -> Result<Vec<SyntheticSequence>> {
        (0..n)
            .map(|i| {
                let seed = SeededRng::stream(cfg.seed, &[tag, i as u64]).next_u64();
                generate_synthetic_sequence(seed, &format!("{prefix}{i:03}"), &cfg.synthetic)
            })
            .collect()
    };
    Ok((
        make(TAG_TRAIN, "train", cfg.train_sequences)?,
        make(TAG_TEST, "test", cfg.test_sequences)?,
    ))
}

/// Trained components of the pipeline.
#[derive(Debug, Clone, PartialEq)]
pub struct GestureModel {
    pub tree: SkeletonTree,
    pub standardizer: FeatureStandardizer,
    pub scales: Vec<(usize, f64, PoseClassifier)>,
    pub motion: MotionClassifier,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainingSummary {
    pub scale_accuracy: Vec<(usize, HeldOut)>,
    pub motion_accuracy: HeldOut,
}

/// Standardized per-frame descriptors of one sequence.
fn descriptors(seq: &SyntheticSequence, tree: &SkeletonTree, st: &FeatureStandardizer, cfg: &DescriptorConfig) -> Result<Matrix> {
    st.apply_matrix(&describe_sequence(&seq.frames, tree, cfg)?)
}

fn stack(parts: Vec<Matrix>) -> Result<Matrix> {
    let cols = parts.first().map_or(0, |m| m.cols());
    let rows: usize = parts.iter().map(|m| m.rows()).sum();
    let mut data = Vec::with_capacity(rows * cols);
    for m in parts {
        data.extend(m.into_vec());
    }
    Matrix::from_vec(rows, cols, data)
}

/// Dynamic poses of every sequence at `stride`, every `every`-th pose,
/// with the label of the pose's last frame.
fn pose_set(
    descs: &[Matrix],
    classes: &[Vec<usize>],
    stride: usize,
    every: usize,
) -> Result<(Matrix, Vec<usize>)> {
    let mut parts = Vec::new();
    let mut labels = Vec::new();
    for (d, c) in descs.iter().zip(classes) {
        let (poses, frames) = dynamic_pose_matrix(d, stride)?;
        let keep: Vec<usize> = (0..frames.len()).step_by(every).collect();
        let mut m = Matrix::zeros(keep.len(), poses.cols());
        for (r, &i) in keep.iter().enumerate() {
            m.row_mut(r).copy_from_slice(poses.row(i));
            labels.push(c[frames[i]]);
        }
        parts.push(m);
    }
    Ok((stack(parts)?, labels))
}

pub fn train_gesture_model(train: &[SyntheticSequence], cfg: &GesturePipelineConfig) -> Result<(GestureModel, TrainingSummary)> {
    cfg.validate()?;
    let frames: Vec<_> = train.iter().flat_map(|s| s.frames.iter().copied()).collect();
    let tree = SkeletonTree::estimate(&frames)?;
    let raw: Vec<Matrix> = train
        .iter()
        .map(|s| describe_sequence(&s.frames, &tree, &cfg.descriptor))
        .collect::<Result<_>>()?;
    let standardizer = FeatureStandardizer::fitted(&stack(raw.clone())?)?;
    let descs: Vec<Matrix> = raw.iter().map(|m| standardizer.apply_matrix(m)).collect::<Result<_>>()?;
    let classes: Vec<Vec<usize>> = train.iter().map(|s| s.frame_classes()).collect();

    let mut scales = Vec::new();
    let mut scale_accuracy = Vec::new();
    for (&stride, &weight) in cfg.strides.iter().zip(&cfg.scale_weights) {
        let (x, y) = pose_set(&descs, &classes, stride, cfg.train_subsample)?;
        let mut ccfg = cfg.gesture.clone();
        ccfg.training.seed = SeededRng::stream(cfg.seed, &[TAG_CLASSIFIER, stride as u64]).next_u64();
        let (clf, held) = PoseClassifier::train(&x, &y, cfg.synthetic.classes + 1, &ccfg)?;
        scales.push((stride, weight, clf));
        scale_accuracy.push((stride, held));
    }

    let (x, y) = pose_set(&descs, &classes, 1, cfg.train_subsample)?;
    let active: Vec<bool> = y.iter().map(|&c| c != 0).collect();
    let mut mcfg = cfg.motion.clone();
    mcfg.training.seed = SeededRng::stream(cfg.seed, &[TAG_MOTION]).next_u64();
    let (motion, motion_accuracy) = MotionClassifier::train(&x, &active, &mcfg)?;
    Ok((
        GestureModel {
            tree,
            standardizer,
            scales,
            motion,
        },
        TrainingSummary {
            scale_accuracy,
            motion_accuracy,
        },
    ))
}

/// Gesture segments found in one sequence, without and with boundary
/// refinement.
#[derive(Debug, Clone, PartialEq)]
pub struct SequencePrediction {
    pub plain: SegmentLabeling,
    pub refined: SegmentLabeling,
}

pub fn predict_sequence(
    model: &GestureModel,
    seq: &SyntheticSequence,
    cfg: &GesturePipelineConfig,
) -> Result<SequencePrediction> {
    let descs = descriptors(seq, &model.tree, &model.standardizer, &cfg.descriptor)?;
    let frames = descs.rows();
    let mut scales = Vec::new();
    for (stride, weight, clf) in &model.scales {
        let (poses, idx) = dynamic_pose_matrix(&descs, *stride)?;
        let first = idx.first().copied().unwrap_or(frames);
        scales.push(ScaleScores::new(*stride, *weight, first, clf.posteriors(&poses)?)?);
    }
    let labels = frame_labels(&ScoreSequence::new(frames, scales)?)?;
    let segments: Vec<_> = segments_from_labels(&labels, 0)
        .into_iter()
        .filter(|s| s.frames() >= cfg.min_segment_frames)
        .collect();

    let (poses, idx) = dynamic_pose_matrix(&descs, 1)?;
    let mut active = vec![false; frames];
    for (&t, a) in idx.iter().zip(model.motion.activity(&poses)?) {
        active[t] = a;
    }
    let refined = refine_boundaries(&segments, &switch_points(&active), cfg.vicinity);
    let id = seq.truth.sequence.clone();
    Ok(SequencePrediction {
        plain: SegmentLabeling::new(id.clone(), segments),
        refined: SegmentLabeling::new(id, refined),
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct JaccardSummary {
    pub mean: f64,
    pub per_class: BTreeMap<usize, f64>,
}

impl JaccardSummary {
    fn of(truth: &[SegmentLabeling], predicted: &[SegmentLabeling]) -> Result<Self> {
        Ok(Self {
            mean: mean_jaccard(truth, predicted)?,
            per_class: per_class_jaccard(truth, predicted)?,
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GestureReport {
    pub seed: u64,
    pub training: TrainingSummary,
    pub without_localization: JaccardSummary,
    pub with_localization: JaccardSummary,
    pub predictions: Vec<SequencePrediction>,
    /// Ground truth of the test sequences, in prediction order.
    pub truth: Vec<SegmentLabeling>,
}

impl GestureReport {
    /// Tab-separated report: held-out accuracies, then per-class and mean
    /// Jaccard index without and with localization.
    pub fn to_tsv(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "# gesture pipeline, seed {}", self.seed);
        let _ = writeln!(out, "classifier\theld_out_accuracy");
        for (stride, h) in &self.training.scale_accuracy {
            let _ = writeln!(out, "stride{stride}\t{:.4}", h.accuracy());
        }
        let _ = writeln!(out, "motion\t{:.4}", self.training.motion_accuracy.accuracy());
        let _ = writeln!(out, "class\twithout_localization\twith_localization");
        let keys: std::collections::BTreeSet<_> = self
            .without_localization
            .per_class
            .keys()
            .chain(self.with_localization.per_class.keys())
            .collect();
        let cell = |m: &BTreeMap<usize, f64>, k: &usize| m.get(k).map_or("-".to_string(), |v| format!("{v:.4}"));
        for k in keys {
            let _ = writeln!(
                out,
                "{k}\t{}\t{}",
                cell(&self.without_localization.per_class, k),
                cell(&self.with_localization.per_class, k)
            );
        }
        let _ = writeln!(
            out,
            "mean\t{:.4}\t{:.4}",
            self.without_localization.mean, self.with_localization.mean
        );
        out
    }
}

pub fn run_gesture_pipeline(cfg: &GesturePipelineConfig) -> Result<GestureReport> {
    let (train, test) = synthetic_split(cfg)?;
    let (model, training) = train_gesture_model(&train, cfg)?;
    let predictions: Vec<_> = test
        .iter()
        .map(|s| predict_sequence(&model, s, cfg))
        .collect::<Result<_>>()?;
    let truth: Vec<_> = test.iter().map(|s| s.truth.clone()).collect();
    let plain: Vec<_> = predictions.iter().map(|p| p.plain.clone()).collect();
    let refined: Vec<_> = predictions.iter().map(|p| p.refined.clone()).collect();
    Ok(GestureReport {
        seed: cfg.seed,
        training,
        without_localization: JaccardSummary::of(&truth, &plain)?,
        with_localization: JaccardSummary::of(&truth, &refined)?,
        predictions,
        truth,
    })
}
