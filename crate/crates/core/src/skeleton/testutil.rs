use super::frame::{SkeletonFrame, Vec3, JOINTS};
use crate::numerics::SeededRng;

/// Rest pose in meters, storage order, y up and x towards the subject's left.
const REST: [[f64; 3]; JOINTS] = [
    [0.0, 0.0, 0.0],
    [0.0, 0.5, 0.0],
    [0.0, 0.75, 0.02],
    [0.18, 0.48, 0.0],
    [0.22, 0.2, 0.05],
    [0.2, 0.0, 0.15],
    [-0.18, 0.48, 0.0],
    [-0.22, 0.2, 0.05],
    [-0.2, 0.0, 0.15],
    [0.1, -0.03, 0.0],
    [-0.1, -0.03, 0.0],
];

/// Upright skeleton at a random position with jittered joints; arms move
/// more than the torso, which stays well conditioned. Coordinates lie on a
/// 1/1024 grid so translations by small integers are exact.
pub(crate) fn random_frame(rng: &mut SeededRng) -> SkeletonFrame {
    let offset = Vec3::new(rng.uniform(-1.0, 1.0), rng.uniform(-0.5, 0.5), rng.uniform(1.5, 3.0));
    let joints = std::array::from_fn(|j| {
        let spread = if matches!(j, 4 | 5 | 7 | 8) { 0.12 } else { 0.03 };
        let r = REST[j];
        let p = Vec3::new(
            r[0] + rng.uniform(-spread, spread),
            r[1] + rng.uniform(-spread, spread),
            r[2] + rng.uniform(-spread, spread),
        ) + offset;
        p.map(|v| (v * 1024.0).round() / 1024.0)
    });
    SkeletonFrame::new(joints).expect("finite")
}

/// `len` frames of a smoothly moving skeleton.
pub(crate) fn random_sequence(rng: &mut SeededRng, len: usize) -> Vec<SkeletonFrame> {
    let base = random_frame(rng);
    let phase: Vec<f64> = (0..JOINTS * 3).map(|_| rng.uniform(0.0, 6.28)).collect();
    (0..len)
        .map(|t| {
            let mut f = base;
            for (j, p) in f.joints.iter_mut().enumerate() {
                let amp = if matches!(j, 4 | 5 | 7 | 8) { 0.1 } else { 0.01 };
                for c in 0..3 {
                    let v = p[c] + amp * (0.2 * t as f64 + phase[3 * j + c]).sin();
                    p[c] = (v * 1024.0).round() / 1024.0;
                }
            }
            f
        })
        .collect()
}
