use std::fmt;

use nalgebra::Vector3;

use crate::error::{invalid, Error, Result};

pub type Vec3 = Vector3<f64>;

pub const JOINTS: usize = 11;

/// Upper-body joints in storage order. Frame files list them in this
/// order, x y z each.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Joint {
    HipCenter,
    ShoulderCenter,
    Head,
    ShoulderLeft,
    ElbowLeft,
    HandLeft,
    ShoulderRight,
    ElbowRight,
    HandRight,
    HipLeft,
    HipRight,
}

impl Joint {
    pub const ALL: [Joint; JOINTS] = [
        Joint::HipCenter,
        Joint::ShoulderCenter,
        Joint::Head,
        Joint::ShoulderLeft,
        Joint::ElbowLeft,
        Joint::HandLeft,
        Joint::ShoulderRight,
        Joint::ElbowRight,
        Joint::HandRight,
        Joint::HipLeft,
        Joint::HipRight,
    ];

    pub fn index(self) -> usize {
        self as usize
    }
}

impl fmt::Display for Joint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SkeletonFrame {
    pub joints: [Vec3; JOINTS],
}

impl SkeletonFrame {
    pub fn new(joints: [Vec3; JOINTS]) -> Result<Self> {
        if joints.iter().any(|j| !j.iter().all(|v| v.is_finite())) {
            return Err(invalid("skeleton coordinates must be finite"));
        }
        Ok(Self { joints })
    }

    /// From 33 reals: x, y, z of each joint in storage order.
    pub fn from_flat(values: &[f64]) -> Result<Self> {
        if values.len() != 3 * JOINTS {
            return Err(invalid(format!("a frame has 33 coordinates, got {}", values.len())));
        }
        Self::new(std::array::from_fn(|j| Vec3::new(values[3 * j], values[3 * j + 1], values[3 * j + 2])))
    }

    pub fn to_flat(&self) -> Vec<f64> {
        self.joints.iter().flat_map(|j| [j.x, j.y, j.z]).collect()
    }

    pub fn joint(&self, j: Joint) -> Vec3 {
        self.joints[j.index()]
    }

    pub fn translated(&self, offset: Vec3) -> Self {
        Self {
            joints: self.joints.map(|j| j + offset),
        }
    }
}

/// Parses one frame per line of 33 whitespace-separated reals. Blank lines
/// and lines starting with `#` are skipped.
pub fn parse_frames(text: &str) -> Result<Vec<SkeletonFrame>> {
    let mut frames = Vec::new();
    for (n, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let values = line
            .split_whitespace()
            .map(|t| t.parse::<f64>())
            .collect::<std::result::Result<Vec<_>, _>>()
            .map_err(|e| Error::Parse { line: n + 1, detail: e.to_string() })?;
        frames.push(SkeletonFrame::from_flat(&values).map_err(|e| Error::Parse { line: n + 1, detail: e.to_string() })?);
    }
    Ok(frames)
}

pub fn format_frames(frames: &[SkeletonFrame]) -> String {
    let mut s = String::new();
    for f in frames {
        let line: Vec<String> = f.to_flat().iter().map(|v| format!("{v:?}")).collect();
        s.push_str(&line.join(" "));
        s.push('\n');
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn text_round_trip() {
        let values: Vec<f64> = (0..33).map(|i| i as f64 * 0.1 - 1.0).collect();
        let f = SkeletonFrame::from_flat(&values).unwrap();
        let text = format!("# header\n{}\n", format_frames(&[f, f]));
        assert_eq!(parse_frames(&text).unwrap(), vec![f, f]);
        assert!(parse_frames("1 2 3").is_err());
        assert!(parse_frames(&"x ".repeat(33)).is_err());
    }

    #[test]
    fn joint_order() {
        assert_eq!(Joint::ALL.len(), JOINTS);
        for (i, j) in Joint::ALL.iter().enumerate() {
            assert_eq!(j.index(), i);
        }
    }
}
