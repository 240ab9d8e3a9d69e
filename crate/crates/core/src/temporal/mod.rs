//! Multi-scale score aggregation, motion-based gesture localization,
//! Jaccard evaluation and a synthetic gesture stream generator.

mod classifier;
mod jaccard;
mod localize;
mod scores;
mod synthetic;

pub use classifier::{ClassifierConfig, HeldOut, MotionClassifier, PoseClassifier};
pub use jaccard::{
    format_labelings, jaccard_index, jaccard_pairs, mean_jaccard, parse_labelings, per_class_jaccard,
    segments_from_labels, Segment, SegmentLabeling,
};
pub use localize::{refine_boundaries, switch_points};
pub use scores::{aggregate_scores, frame_labels, ScaleScores, ScoreSequence};
pub use synthetic::{
    generate_synthetic_sequence, gesture_templates, GestureTemplate, HandUse, SyntheticConfig, SyntheticSequence,
};
