use super::frame::{Joint, SkeletonFrame, Vec3, JOINTS};
use crate::error::{invalid, Error, Result};

/// Parent-to-child segments in root-to-leaf order.
pub const BONES: [(Joint, Joint); 10] = [
    (Joint::HipCenter, Joint::ShoulderCenter),
    (Joint::ShoulderCenter, Joint::Head),
    (Joint::ShoulderCenter, Joint::ShoulderLeft),
    (Joint::ShoulderLeft, Joint::ElbowLeft),
    (Joint::ElbowLeft, Joint::HandLeft),
    (Joint::ShoulderCenter, Joint::ShoulderRight),
    (Joint::ShoulderRight, Joint::ElbowRight),
    (Joint::ElbowRight, Joint::HandRight),
    (Joint::HipCenter, Joint::HipLeft),
    (Joint::HipCenter, Joint::HipRight),
];

/// Skeleton tree rooted at the hip centre with a target length per bone.
#[derive(Debug, Clone, PartialEq)]
pub struct SkeletonTree {
    lengths: [f64; BONES.len()],
}

impl SkeletonTree {
    pub fn new(lengths: [f64; BONES.len()]) -> Result<Self> {
        if lengths.iter().any(|&l| !(l > 0.0) || !l.is_finite()) {
            return Err(invalid("bone lengths must be positive and finite"));
        }
        Ok(Self { lengths })
    }

    /// Adult proportions in meters.
    pub fn standard() -> Self {
        Self::new([0.50, 0.25, 0.18, 0.28, 0.26, 0.18, 0.28, 0.26, 0.10, 0.10]).expect("positive")
    }

    /// Average length of every bone over the given frames.
    pub fn estimate(frames: &[SkeletonFrame]) -> Result<Self> {
        if frames.is_empty() {
            return Err(invalid("cannot estimate bone lengths from zero frames"));
        }
        let mut lengths = [0.0; BONES.len()];
        for f in frames {
            for (l, &(p, c)) in lengths.iter_mut().zip(&BONES) {
                *l += (f.joint(c) - f.joint(p)).norm();
            }
        }
        Self::new(lengths.map(|l| l / frames.len() as f64))
    }

    pub fn lengths(&self) -> &[f64; BONES.len()] {
        &self.lengths
    }

    pub fn parent(joint: Joint) -> Option<Joint> {
        BONES.iter().find(|&&(_, c)| c == joint).map(|&(p, _)| p)
    }
}

/// Subtracts the hip centre, then walks the tree from the root and sets
/// every bone to its target length along its original direction; each
/// child moves with its re-scaled parent.
pub fn normalize_skeleton(frame: &SkeletonFrame, tree: &SkeletonTree) -> Result<SkeletonFrame> {
    // The root lands on the origin, which subtracts the hip centre.
    let mut out = [Vec3::zeros(); JOINTS];
    for (&(p, c), &len) in BONES.iter().zip(tree.lengths()) {
        let dir = frame.joint(c) - frame.joint(p);
        let norm = dir.norm();
        if !(norm > 0.0) {
            return Err(Error::Degenerate(format!("bone {p}->{c} has zero length")));
        }
        out[c.index()] = out[p.index()] + dir * (len / norm);
    }
    SkeletonFrame::new(out)
}
