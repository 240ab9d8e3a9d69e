use nalgebra::{Matrix3, SymmetricEigen};

use super::frame::{Joint, SkeletonFrame, Vec3, JOINTS};
use crate::error::{Error, Result};

const TINY: f64 = 1e-12;

/// Joint triples `(a, b, c)`: the angle sits at `b` between `a` and `c`.
/// The first seven follow anatomical connections, the last two are the
/// virtual hand-elbow-shoulder-centre angles.
pub const TRIPLES: [(Joint, Joint, Joint); 9] = [
    (Joint::HipCenter, Joint::ShoulderCenter, Joint::Head),
    (Joint::HipCenter, Joint::ShoulderCenter, Joint::ShoulderLeft),
    (Joint::HipCenter, Joint::ShoulderCenter, Joint::ShoulderRight),
    (Joint::ShoulderCenter, Joint::ShoulderLeft, Joint::ElbowLeft),
    (Joint::ShoulderCenter, Joint::ShoulderRight, Joint::ElbowRight),
    (Joint::ShoulderLeft, Joint::ElbowLeft, Joint::HandLeft),
    (Joint::ShoulderRight, Joint::ElbowRight, Joint::HandRight),
    (Joint::HandLeft, Joint::ElbowLeft, Joint::ShoulderCenter),
    (Joint::HandRight, Joint::ElbowRight, Joint::ShoulderCenter),
];

/// Angle values with a flag for each one computed from a degenerate
/// (zero-length) vector and therefore set to 0.
#[derive(Debug, Clone, PartialEq)]
pub struct Angles {
    pub values: Vec<f64>,
    pub degenerate: Vec<bool>,
}

impl Angles {
    fn with_capacity(n: usize) -> Self {
        Self {
            values: Vec::with_capacity(n),
            degenerate: Vec::with_capacity(n),
        }
    }

    fn push(&mut self, v: Option<f64>) {
        self.values.push(v.unwrap_or(0.0));
        self.degenerate.push(v.is_none());
    }

    pub fn any_degenerate(&self) -> bool {
        self.degenerate.iter().any(|&d| d)
    }
}

/// Angle in [0, π] between two vectors, `None` if either is ~zero.
pub fn angle_between(u: &Vec3, v: &Vec3) -> Option<f64> {
    let (nu, nv) = (u.norm(), v.norm());
    if nu < TINY || nv < TINY {
        return None;
    }
    Some((u.dot(v) / (nu * nv)).clamp(-1.0, 1.0).acos())
}

pub fn inclination_angles(frame: &SkeletonFrame) -> Angles {
    let mut out = Angles::with_capacity(TRIPLES.len());
    for &(a, b, c) in &TRIPLES {
        let mid = frame.joint(b);
        out.push(angle_between(&(frame.joint(a) - mid), &(frame.joint(c) - mid)));
    }
    out
}

/// Orthonormal body frame from PCA of the torso joints.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TorsoBasis {
    /// Largest-variance axis, oriented towards the shoulders.
    pub up: Vec3,
    /// Second axis, oriented from the right shoulder to the left.
    pub left: Vec3,
    /// Smallest-variance axis: the torso normal, oriented along up × left.
    pub normal: Vec3,
}

/// Head, shoulder centre, both shoulders, hip centre and the midpoint of
/// the hips.
pub fn torso_points(frame: &SkeletonFrame) -> [Vec3; 6] {
    [
        frame.joint(Joint::Head),
        frame.joint(Joint::ShoulderCenter),
        frame.joint(Joint::ShoulderLeft),
        frame.joint(Joint::ShoulderRight),
        frame.joint(Joint::HipCenter),
        (frame.joint(Joint::HipLeft) + frame.joint(Joint::HipRight)) / 2.0,
    ]
}

fn orient(v: Vec3, reference: &Vec3) -> Vec3 {
    if v.dot(reference) < 0.0 {
        -v
    } else {
        v
    }
}

pub fn torso_basis(frame: &SkeletonFrame) -> Result<TorsoBasis> {
    let pts = torso_points(frame);
    let mean = pts.iter().fold(Vec3::zeros(), |acc, p| acc + p) / pts.len() as f64;
    let mut cov = Matrix3::zeros();
    for p in &pts {
        let d = p - mean;
        cov += d * d.transpose();
    }
    cov /= pts.len() as f64;
    let eig = SymmetricEigen::new(cov);
    let mut order = [0usize, 1, 2];
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let largest = eig.eigenvalues[order[0]];
    if !(largest > TINY) || eig.eigenvalues[order[1]] <= TINY * largest {
        return Err(Error::Degenerate("torso joints do not span a plane".into()));
    }
    let axis = |i: usize| -> Vec3 { eig.eigenvectors.column(order[i]).into_owned() };
    let up_ref = frame.joint(Joint::ShoulderCenter) - frame.joint(Joint::HipCenter);
    let left_ref = frame.joint(Joint::ShoulderLeft) - frame.joint(Joint::ShoulderRight);
    let up = orient(axis(0), &up_ref);
    let left = orient(axis(1), &left_ref);
    let normal = orient(axis(2), &up.cross(&left));
    Ok(TorsoBasis { up, left, normal })
}

/// Component of `v` orthogonal to the unit vector `axis`.
fn reject(v: &Vec3, axis: &Vec3) -> Vec3 {
    v - axis * v.dot(axis)
}

/// Signed angle in (-π, π] from `reference` to `child`, both projected on
/// the plane perpendicular to `parent`, measured counter-clockwise about
/// `parent`. Falls back to `fallback` when `reference` is parallel to the
/// parent bone.
pub fn azimuth(parent: &Vec3, child: &Vec3, reference: &Vec3, fallback: &Vec3) -> Option<f64> {
    let pn = parent.norm();
    if pn < TINY {
        return None;
    }
    let axis = parent / pn;
    let c = reject(child, &axis);
    let mut r = reject(reference, &axis);
    if r.norm() < TINY {
        r = reject(fallback, &axis);
    }
    if c.norm() < TINY || r.norm() < TINY {
        return None;
    }
    let a = axis.dot(&r.cross(&c)).atan2(r.dot(&c));
    Some(if a <= -std::f64::consts::PI { std::f64::consts::PI } else { a })
}

/// For each triple, the parent bone runs `a -> b` and the child bone
/// `b -> c`; the reference is the torso normal.
pub fn azimuth_angles(frame: &SkeletonFrame, basis: &TorsoBasis) -> Angles {
    let mut out = Angles::with_capacity(TRIPLES.len());
    for &(a, b, c) in &TRIPLES {
        let parent = frame.joint(b) - frame.joint(a);
        let child = frame.joint(c) - frame.joint(b);
        out.push(azimuth(&parent, &child, &basis.normal, &basis.up));
    }
    out
}

/// Angle between the torso normal and each root-relative joint position.
pub fn bending_angles(frame: &SkeletonFrame, basis: &TorsoBasis) -> Angles {
    let root = frame.joint(Joint::HipCenter);
    let mut out = Angles::with_capacity(JOINTS);
    for j in &frame.joints {
        out.push(angle_between(&basis.normal, &(j - root)));
    }
    out
}

/// Distances between all joint pairs `(i, j)`, `i < j`, in lexicographic order.
pub fn pairwise_distances(frame: &SkeletonFrame) -> Vec<f64> {
    let mut out = Vec::with_capacity(JOINTS * (JOINTS - 1) / 2);
    for i in 0..JOINTS {
        for j in i + 1..JOINTS {
            out.push((frame.joints[i] - frame.joints[j]).norm());
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::SeededRng;
    use crate::skeleton::testutil::random_frame;
    use std::f64::consts::{FRAC_PI_2, PI};

    fn with(frame: &SkeletonFrame, j: Joint, v: Vec3) -> SkeletonFrame {
        let mut f = *frame;
        f.joints[j.index()] = v;
        f
    }

    #[test]
    fn inclination_special_cases() {
        let base = random_frame(&mut SeededRng::new(1));
        let sh = base.joint(Joint::ShoulderLeft);
        let el = base.joint(Joint::ElbowLeft);
        // Hand continuing the upper arm: straight elbow.
        let straight = with(&base, Joint::HandLeft, el + (el - sh));
        assert!((inclination_angles(&straight).values[5] - PI).abs() < 1e-12);
        let upper = el - sh;
        let perp = upper.cross(&Vec3::new(0.3, 0.1, 1.0)).normalize();
        let bent = with(&base, Joint::HandLeft, el + perp * 0.2);
        assert!((inclination_angles(&bent).values[5] - FRAC_PI_2).abs() < 1e-12);
    }

    #[test]
    fn inclination_matches_dot_product_oracle() {
        let mut rng = SeededRng::new(2);
        for _ in 0..20 {
            let f = random_frame(&mut rng);
            let a = inclination_angles(&f);
            assert!(!a.any_degenerate());
            for (v, &(x, y, z)) in a.values.iter().zip(&TRIPLES) {
                let u = f.joint(x) - f.joint(y);
                let w = f.joint(z) - f.joint(y);
                let oracle = (u.dot(&w) / (u.norm() * w.norm())).acos();
                assert!((v - oracle).abs() < 1e-12);
                assert!((0.0..=PI).contains(v));
            }
        }
    }

    #[test]
    fn degenerate_angle_is_zero_and_flagged() {
        let base = random_frame(&mut SeededRng::new(3));
        let f = with(&base, Joint::Head, base.joint(Joint::ShoulderCenter));
        let a = inclination_angles(&f);
        assert_eq!(a.values[0], 0.0);
        assert!(a.degenerate[0]);
    }

    #[test]
    fn torso_basis_is_oriented_orthonormal() {
        let mut rng = SeededRng::new(4);
        for _ in 0..20 {
            let f = random_frame(&mut rng);
            let b = torso_basis(&f).unwrap();
            for v in [b.up, b.left, b.normal] {
                assert!((v.norm() - 1.0).abs() < 1e-12);
            }
            assert!(b.up.dot(&b.left).abs() < 1e-12 && b.up.dot(&b.normal).abs() < 1e-12);
            assert!(b.up.dot(&(f.joint(Joint::ShoulderCenter) - f.joint(Joint::HipCenter))) > 0.0);
            assert!(b.normal.dot(&b.up.cross(&b.left)) > 0.0);
        }
    }

    #[test]
    fn collinear_torso_is_rejected() {
        let joints = std::array::from_fn(|i| Vec3::new(0.0, i as f64 * 0.1, 0.0));
        let f = SkeletonFrame::new(joints).unwrap();
        assert!(torso_basis(&f).is_err());
    }

    #[test]
    fn azimuth_special_cases() {
        let parent = Vec3::new(0.0, 0.0, 1.0);
        let reference = Vec3::new(1.0, 0.0, 0.5);
        let up = Vec3::new(0.0, 1.0, 0.0);
        let same = azimuth(&parent, &Vec3::new(2.0, 0.0, -3.0), &reference, &up).unwrap();
        assert!(same.abs() < 1e-12);
        let opposite = azimuth(&parent, &Vec3::new(-2.0, 0.0, 1.0), &reference, &up).unwrap();
        assert_eq!(opposite, PI);
        let quarter = azimuth(&parent, &Vec3::new(0.0, 1.0, 0.0), &reference, &up).unwrap();
        assert!((quarter - FRAC_PI_2).abs() < 1e-12);
        // Reference along the parent bone: fall back to the second vector.
        let fb = azimuth(&parent, &Vec3::new(0.0, 1.0, 0.0), &parent, &up).unwrap();
        assert!(fb.abs() < 1e-12);
    }

    #[test]
    fn azimuth_matches_projection_oracle() {
        let mut rng = SeededRng::new(5);
        for _ in 0..20 {
            let f = random_frame(&mut rng);
            let b = torso_basis(&f).unwrap();
            let a = azimuth_angles(&f, &b);
            for (v, &(x, y, z)) in a.values.iter().zip(&TRIPLES) {
                let p = (f.joint(y) - f.joint(x)).normalize();
                let c = f.joint(z) - f.joint(y);
                let cp = c - p * c.dot(&p);
                let rp = b.normal - p * b.normal.dot(&p);
                let (cp, rp) = (cp.normalize(), rp.normalize());
                let e2 = p.cross(&rp);
                let oracle = cp.dot(&e2).atan2(cp.dot(&rp));
                assert!((v - oracle).abs() < 1e-12, "{v} vs {oracle}");
                assert!(*v > -PI && *v <= PI);
            }
        }
    }

    #[test]
    fn bending_special_cases_and_oracle() {
        let mut rng = SeededRng::new(6);
        let f = random_frame(&mut rng);
        let b = torso_basis(&f).unwrap();
        let root = f.joint(Joint::HipCenter);
        let along = with(&f, Joint::HandLeft, root + b.normal * 0.4);
        assert!(bending_angles(&along, &b).values[Joint::HandLeft.index()].abs() < 1e-7);
        let planar = with(&f, Joint::HandLeft, root + b.up * 0.3 + b.left * 0.2);
        assert!((bending_angles(&planar, &b).values[Joint::HandLeft.index()] - FRAC_PI_2).abs() < 1e-12);
        let a = bending_angles(&f, &b);
        assert!(a.degenerate[Joint::HipCenter.index()]);
        for (i, v) in a.values.iter().enumerate().skip(1) {
            let p = f.joints[i] - root;
            let oracle = (b.normal.dot(&p) / p.norm()).acos();
            assert!((v - oracle).abs() < 1e-12);
        }
    }

    #[test]
    fn pairwise_distance_cases() {
        let f = random_frame(&mut SeededRng::new(7));
        assert_eq!(pairwise_distances(&f).len(), 55);
        let mut g = f;
        g.joints[1] = g.joints[0];
        g.joints[2] = g.joints[0] + Vec3::new(0.0, 1.0, 0.0);
        let d = pairwise_distances(&g);
        assert_eq!(d[0], 0.0);
        assert_eq!(d[1], 1.0);
    }
}
