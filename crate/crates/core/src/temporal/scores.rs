use crate::error::{invalid, Result};
use crate::network::argmax;
use crate::numerics::Matrix;

/// Scores of the classifier working at one temporal stride. Row `r` holds
/// the class scores of the dynamic pose ending at frame `first_frame + r`.
#[derive(Debug, Clone, PartialEq)]
pub struct ScaleScores {
    pub stride: usize,
    pub weight: f64,
    pub first_frame: usize,
    pub scores: Matrix,
}

impl ScaleScores {
    pub fn new(stride: usize, weight: f64, first_frame: usize, scores: Matrix) -> Result<Self> {
        if stride == 0 {
            return Err(invalid("stride must be positive"));
        }
        if !weight.is_finite() || !scores.is_finite() {
            return Err(invalid("scores and weights must be finite"));
        }
        Ok(Self {
            stride,
            weight,
            first_frame,
            scores,
        })
    }

    fn at(&self, frame: usize) -> Option<&[f64]> {
        let r = frame.checked_sub(self.first_frame)?;
        (r < self.scores.rows()).then(|| self.scores.row(r))
    }
}

/// Per-frame class scores of several temporal scales over one sequence.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoreSequence {
    frames: usize,
    classes: usize,
    scales: Vec<ScaleScores>,
}

impl ScoreSequence {
    pub fn new(frames: usize, scales: Vec<ScaleScores>) -> Result<Self> {
        let classes = scales.first().map_or(0, |s| s.scores.cols());
        if classes == 0 {
            return Err(invalid("score sequence needs at least one scale with classes"));
        }
        for s in &scales {
            if s.scores.cols() != classes {
                return Err(invalid("all scales must score the same classes"));
            }
            if s.first_frame + s.scores.rows() > frames {
                return Err(invalid(format!("scale {} scores frames beyond the sequence", s.stride)));
            }
        }
        Ok(Self { frames, classes, scales })
    }

    pub fn frames(&self) -> usize {
        self.frames
    }

    pub fn classes(&self) -> usize {
        self.classes
    }

    pub fn scales(&self) -> &[ScaleScores] {
        &self.scales
    }
}

/// `o(t) = Σ_s μ_s Σ_{j=-4s..0} o_s(t+j)`. Frames without a score at some
/// scale (too early in the sequence) are skipped.
pub fn aggregate_scores(seq: &ScoreSequence, t: usize) -> Result<Vec<f64>> {
    if t >= seq.frames {
        return Err(invalid(format!("frame {t} beyond a sequence of {}", seq.frames)));
    }
    let mut out = vec![0.0; seq.classes];
    for scale in &seq.scales {
        let mut window = vec![0.0; seq.classes];
        for f in t.saturating_sub(4 * scale.stride)..=t {
            if let Some(row) = scale.at(f) {
                window.iter_mut().zip(row).for_each(|(w, &v)| *w += v);
            }
        }
        out.iter_mut().zip(&window).for_each(|(o, &w)| *o += scale.weight * w);
    }
    Ok(out)
}

/// Arg-max class of the aggregated scores at every frame.
pub fn frame_labels(seq: &ScoreSequence) -> Result<Vec<usize>> {
    (0..seq.frames).map(|t| Ok(argmax(&aggregate_scores(seq, t)?))).collect()
}
