use std::f64::consts::PI;

use super::jaccard::{Segment, SegmentLabeling};
use crate::error::{invalid, Result};
use crate::numerics::SeededRng;
use crate::skeleton::{Joint, SkeletonFrame, Vec3, JOINTS};

/// Rest pose in meters (y up, x towards the subject's left), arms down.
const REST: [[f64; 3]; JOINTS] = [
    [0.0, 0.0, 0.0],
    [0.0, 0.5, 0.0],
    [0.0, 0.75, 0.02],
    [0.18, 0.48, 0.0],
    [0.21, 0.21, 0.02],
    [0.22, -0.04, 0.06],
    [-0.18, 0.48, 0.0],
    [-0.21, 0.21, 0.02],
    [-0.22, -0.04, 0.06],
    [0.1, -0.03, 0.0],
    [-0.1, -0.03, 0.0],
];

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticConfig {
    /// Number of gesture classes, labelled `1..=classes`.
    pub classes: usize,
    pub gestures_per_sequence: usize,
    /// Inclusive range of rest frames before each gesture and at the end.
    pub rest_frames: (usize, usize),
    pub gesture_frames: (usize, usize),
    /// Standard deviation of per-coordinate jitter in meters.
    pub noise: f64,
    /// Seed of the gesture templates, shared by every generated sequence.
    pub template_seed: u64,
}

impl Default for SyntheticConfig {
    fn default() -> Self {
        Self {
            classes: 4,
            gestures_per_sequence: 6,
            rest_frames: (20, 35),
            gesture_frames: (28, 40),
            noise: 0.004,
            template_seed: 7,
        }
    }
}

impl SyntheticConfig {
    pub fn validate(&self) -> Result<()> {
        let ordered = |(lo, hi): (usize, usize)| lo <= hi;
        if self.classes == 0 || self.gestures_per_sequence == 0 {
            return Err(invalid("synthetic data needs at least one class and one gesture"));
        }
        if !ordered(self.rest_frames) || !ordered(self.gesture_frames) || self.gesture_frames.0 < 3 {
            return Err(invalid("frame ranges must be ordered and gestures at least 3 frames long"));
        }
        if !(self.noise >= 0.0) {
            return Err(invalid("noise must be non-negative"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HandUse {
    Left,
    Right,
    Both,
}

/// Hand trajectory of one gesture class: the hand rises by `lift` and
/// oscillates `cycles` times in the plane of `sweep_a` and `sweep_b`, all
/// under an envelope that starts and ends at the rest pose.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GestureTemplate {
    pub hands: HandUse,
    pub lift: Vec3,
    pub sweep_a: Vec3,
    pub sweep_b: Vec3,
    pub cycles: f64,
}

impl GestureTemplate {
    /// Hand offset from rest at phase `u` in [0, 1].
    pub fn offset(&self, u: f64) -> Vec3 {
        let env = (PI * u).sin();
        let w = 2.0 * PI * self.cycles * u;
        (self.lift + self.sweep_a * w.sin() + self.sweep_b * (1.0 - w.cos())) * env
    }
}

fn unit(rng: &mut SeededRng) -> Vec3 {
    loop {
        let v = Vec3::new(rng.normal(), rng.normal(), rng.normal());
        if v.norm() > 1e-3 {
            return v.normalize();
        }
    }
}

/// Templates cycle through right, left and both hands; templates that use
/// the same hands lift them further outwards, one 0.3 m step per cycle.
pub fn gesture_templates(cfg: &SyntheticConfig) -> Vec<GestureTemplate> {
    let mut rng = SeededRng::stream(cfg.template_seed, &[1]);
    (0..cfg.classes)
        .map(|c| GestureTemplate {
            hands: [HandUse::Right, HandUse::Left, HandUse::Both][c % 3],
            lift: Vec3::new(
                0.3 * (c / 3) as f64 + rng.uniform(-0.05, 0.05),
                rng.uniform(0.25, 0.6),
                rng.uniform(0.15, 0.35),
            ),
            sweep_a: unit(&mut rng) * rng.uniform(0.08, 0.15),
            sweep_b: unit(&mut rng) * rng.uniform(0.04, 0.08),
            cycles: 1.0 + rng.below(3) as f64,
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticSequence {
    pub frames: Vec<SkeletonFrame>,
    pub truth: SegmentLabeling,
}

impl SyntheticSequence {
    /// Per-frame class, 0 outside gestures.
    pub fn frame_classes(&self) -> Vec<usize> {
        let mut out = vec![0; self.frames.len()];
        for s in &self.truth.segments {
            out[s.start..=s.end].iter_mut().for_each(|c| *c = s.class);
        }
        out
    }
}

fn range(rng: &mut SeededRng, (lo, hi): (usize, usize)) -> usize {
    lo + rng.below(hi - lo + 1)
}

/// Rest, then alternating gestures and rest, for one subject whose size,
/// position and gesture amplitude vary with the seed.
pub fn generate_synthetic_sequence(seed: u64, id: &str, cfg: &SyntheticConfig) -> Result<SyntheticSequence> {
    cfg.validate()?;
    let templates = gesture_templates(cfg);
    let mut rng = SeededRng::new(seed);
    let scale = rng.uniform(0.9, 1.1);
    let origin = Vec3::new(rng.uniform(-0.5, 0.5), rng.uniform(0.6, 1.0), rng.uniform(2.0, 3.0));
    let rest: [Vec3; JOINTS] = std::array::from_fn(|j| Vec3::from(REST[j]) * scale + origin);

    let mut offsets: Vec<(Vec3, Vec3)> = Vec::new();
    let mut segments = Vec::new();
    let rest_block = |rng: &mut SeededRng, offsets: &mut Vec<(Vec3, Vec3)>| {
        let n = range(rng, cfg.rest_frames);
        offsets.extend(std::iter::repeat((Vec3::zeros(), Vec3::zeros())).take(n));
    };
    rest_block(&mut rng, &mut offsets);
    for _ in 0..cfg.gestures_per_sequence {
        let class = rng.below(cfg.classes);
        let t = &templates[class];
        let len = range(&mut rng, cfg.gesture_frames);
        let amp = rng.uniform(0.85, 1.15) * scale;
        let start = offsets.len();
        for i in 0..len {
            let u = (i + 1) as f64 / (len + 1) as f64;
            let o = t.offset(u) * amp;
            let mirrored = Vec3::new(-o.x, o.y, o.z);
            offsets.push(match t.hands {
                HandUse::Left => (o, Vec3::zeros()),
                HandUse::Right => (Vec3::zeros(), mirrored),
                HandUse::Both => (o, mirrored),
            });
        }
        segments.push(Segment {
            class: class + 1,
            start,
            end: start + len - 1,
        });
        rest_block(&mut rng, &mut offsets);
    }

    let mut frames = Vec::with_capacity(offsets.len());
    for (left, right) in offsets {
        let mut joints = rest;
        joints[Joint::HandLeft.index()] += left;
        joints[Joint::ElbowLeft.index()] += left * 0.5;
        joints[Joint::HandRight.index()] += right;
        joints[Joint::ElbowRight.index()] += right * 0.5;
        if cfg.noise > 0.0 {
            for j in joints.iter_mut() {
                *j += Vec3::new(rng.normal(), rng.normal(), rng.normal()) * cfg.noise;
            }
        }
        frames.push(SkeletonFrame::new(joints)?);
    }
    Ok(SyntheticSequence {
        frames,
        truth: SegmentLabeling::new(id, segments),
    })
}
