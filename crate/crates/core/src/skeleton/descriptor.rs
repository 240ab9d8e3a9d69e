use super::angles::{azimuth_angles, bending_angles, inclination_angles, pairwise_distances, torso_basis};
use super::frame::{Joint, SkeletonFrame, Vec3, JOINTS};
use super::tree::{normalize_skeleton, SkeletonTree};
use crate::error::{invalid, Result};
use crate::numerics::{gaussian_smooth_temporal, Matrix};

const COORDS: usize = 3 * JOINTS;
const INCLINATIONS: usize = 9;
const AZIMUTHS: usize = 9;
const BENDINGS: usize = JOINTS;
const DISTANCES: usize = JOINTS * (JOINTS - 1) / 2;

/// Positions, velocities, accelerations, inclination, azimuth and bending
/// angles, pairwise distances.
pub const DESCRIPTOR_LEN: usize = 3 * COORDS + INCLINATIONS + AZIMUTHS + BENDINGS + DISTANCES;
pub const DYNAMIC_FRAMES: usize = 5;
pub const DYNAMIC_POSE_LEN: usize = DYNAMIC_FRAMES * DESCRIPTOR_LEN;
pub const MAX_STRIDE: usize = 4;

const _: () = assert!(DESCRIPTOR_LEN == 183);
const _: () = assert!(DYNAMIC_POSE_LEN == 915);

/// Offsets of the blocks inside a descriptor.
pub mod layout {
    use super::*;
    pub const POSITIONS: std::ops::Range<usize> = 0..COORDS;
    pub const VELOCITIES: std::ops::Range<usize> = COORDS..2 * COORDS;
    pub const ACCELERATIONS: std::ops::Range<usize> = 2 * COORDS..3 * COORDS;
    pub const INCLINATION: std::ops::Range<usize> = 3 * COORDS..3 * COORDS + INCLINATIONS;
    pub const AZIMUTH: std::ops::Range<usize> = INCLINATION.end..INCLINATION.end + AZIMUTHS;
    pub const BENDING: std::ops::Range<usize> = AZIMUTH.end..AZIMUTH.end + BENDINGS;
    pub const DISTANCE: std::ops::Range<usize> = BENDING.end..BENDING.end + DISTANCES;
}

#[derive(Debug, Clone, PartialEq)]
pub struct PoseDescriptor {
    pub values: Vec<f64>,
    /// Angles computed from a zero-length vector (set to 0).
    pub degenerate_angles: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DescriptorConfig {
    pub smoothing_sigma: f64,
    /// Odd number of taps.
    pub smoothing_window: usize,
}

impl Default for DescriptorConfig {
    fn default() -> Self {
        Self {
            smoothing_sigma: 1.0,
            smoothing_window: 5,
        }
    }
}

/// First and second time derivatives of a `T x d` sequence, `T >= 3`.
/// Central differences inside; at the ends velocity is one-sided and
/// acceleration reuses the nearest interior stencil.
pub fn joint_dynamics(positions: &Matrix) -> Result<(Matrix, Matrix)> {
    let t_len = positions.rows();
    if t_len < 3 {
        return Err(invalid(format!("derivatives need at least 3 frames, got {t_len}")));
    }
    let (rows, cols) = (t_len, positions.cols());
    let x = |t: usize, c: usize| positions[(t, c)];
    let mut vel = Matrix::zeros(rows, cols);
    let mut acc = Matrix::zeros(rows, cols);
    for c in 0..cols {
        vel[(0, c)] = x(1, c) - x(0, c);
        vel[(t_len - 1, c)] = x(t_len - 1, c) - x(t_len - 2, c);
        acc[(0, c)] = x(2, c) - 2.0 * x(1, c) + x(0, c);
        acc[(t_len - 1, c)] = x(t_len - 1, c) - 2.0 * x(t_len - 2, c) + x(t_len - 3, c);
        for t in 1..t_len - 1 {
            vel[(t, c)] = (x(t + 1, c) - x(t - 1, c)) / 2.0;
            acc[(t, c)] = x(t + 1, c) - 2.0 * x(t, c) + x(t - 1, c);
        }
    }
    Ok((vel, acc))
}

/// Descriptor of one normalized (and smoothed) frame given its joint
/// velocities and accelerations.
pub fn assemble_descriptor(frame: &SkeletonFrame, velocity: &[f64], acceleration: &[f64]) -> Result<PoseDescriptor> {
    if velocity.len() != COORDS || acceleration.len() != COORDS {
        return Err(invalid("velocity and acceleration need 33 values each"));
    }
    let basis = torso_basis(frame)?;
    let angles = [
        inclination_angles(frame),
        azimuth_angles(frame, &basis),
        bending_angles(frame, &basis),
    ];
    let mut values = Vec::with_capacity(DESCRIPTOR_LEN);
    values.extend(frame.to_flat());
    values.extend_from_slice(velocity);
    values.extend_from_slice(acceleration);
    let mut degenerate_angles = 0;
    for a in &angles {
        values.extend_from_slice(&a.values);
        degenerate_angles += a.degenerate.iter().filter(|&&d| d).count();
    }
    values.extend(pairwise_distances(frame));
    debug_assert_eq!(values.len(), DESCRIPTOR_LEN);
    Ok(PoseDescriptor {
        values,
        degenerate_angles,
    })
}

/// Normalized and temporally smoothed joint positions, `T x 33`.
pub fn smoothed_positions(frames: &[SkeletonFrame], tree: &SkeletonTree, cfg: &DescriptorConfig) -> Result<Matrix> {
    let mut flat = Vec::with_capacity(frames.len() * COORDS);
    for f in frames {
        flat.extend(normalize_skeleton(f, tree)?.to_flat());
    }
    let positions = Matrix::from_vec(frames.len(), COORDS, flat)?;
    gaussian_smooth_temporal(&positions, cfg.smoothing_sigma, cfg.smoothing_window)
}

/// Per-frame descriptors of a whole sequence, `T x 183`.
pub fn describe_sequence(frames: &[SkeletonFrame], tree: &SkeletonTree, cfg: &DescriptorConfig) -> Result<Matrix> {
    if frames.len() < 3 {
        return Err(invalid(format!("a sequence needs at least 3 frames, got {}", frames.len())));
    }
    let positions = smoothed_positions(frames, tree, cfg)?;
    let (vel, acc) = joint_dynamics(&positions)?;
    let mut out = Matrix::zeros(frames.len(), DESCRIPTOR_LEN);
    for t in 0..frames.len() {
        let frame = SkeletonFrame::from_flat(positions.row(t))?;
        let d = assemble_descriptor(&frame, vel.row(t), acc.row(t))?;
        out.row_mut(t).copy_from_slice(&d.values);
    }
    Ok(out)
}

/// Frames sampled by a dynamic pose ending at `t`, oldest first.
pub fn dynamic_frames(t: usize, stride: usize) -> Result<[usize; DYNAMIC_FRAMES]> {
    if !(1..=MAX_STRIDE).contains(&stride) {
        return Err(invalid(format!("stride must be in 1..={MAX_STRIDE}, got {stride}")));
    }
    let span = (DYNAMIC_FRAMES - 1) * stride;
    if t < span {
        return Err(invalid(format!("frame {t} has less than {span} frames of history")));
    }
    Ok(std::array::from_fn(|i| t - span + i * stride))
}

/// Descriptors at `t-4s, t-3s, ..., t` concatenated.
pub fn make_dynamic_pose(descriptors: &Matrix, t: usize, stride: usize) -> Result<Vec<f64>> {
    if descriptors.cols() != DESCRIPTOR_LEN {
        return Err(invalid(format!("descriptors have {} columns, expected {DESCRIPTOR_LEN}", descriptors.cols())));
    }
    if t >= descriptors.rows() {
        return Err(invalid(format!("frame {t} beyond a sequence of {}", descriptors.rows())));
    }
    let mut out = Vec::with_capacity(DYNAMIC_POSE_LEN);
    for f in dynamic_frames(t, stride)? {
        out.extend_from_slice(descriptors.row(f));
    }
    Ok(out)
}

/// Dynamic poses for every frame with enough history, with their frame index.
pub fn dynamic_pose_matrix(descriptors: &Matrix, stride: usize) -> Result<(Matrix, Vec<usize>)> {
    let first = (DYNAMIC_FRAMES - 1) * stride;
    let frames: Vec<usize> = (first..descriptors.rows()).collect();
    let mut out = Matrix::zeros(frames.len(), DYNAMIC_POSE_LEN);
    for (r, &t) in frames.iter().enumerate() {
        out.row_mut(r).copy_from_slice(&make_dynamic_pose(descriptors, t, stride)?);
    }
    Ok((out, frames))
}

/// Trajectory length of a hand in the image plane: sum of |dx| + |dy|
/// between consecutive samples.
pub fn active_hand_delta(track: &[Vec3]) -> f64 {
    track
        .windows(2)
        .map(|w| (w[1].x - w[0].x).abs() + (w[1].y - w[0].y).abs())
        .sum()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Hand {
    Left,
    Right,
}

/// Hand that moved more over the sampled frames; a tie goes to the right.
pub fn active_hand(frames: &[SkeletonFrame], t: usize, stride: usize) -> Result<Hand> {
    let idx = dynamic_frames(t, stride)?;
    if t >= frames.len() {
        return Err(invalid(format!("frame {t} beyond a sequence of {}", frames.len())));
    }
    let track = |j: Joint| idx.map(|i| frames[i].joint(j));
    let left = active_hand_delta(&track(Joint::HandLeft));
    let right = active_hand_delta(&track(Joint::HandRight));
    Ok(if left > right { Hand::Left } else { Hand::Right })
}
