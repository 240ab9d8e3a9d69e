//! Articulated pose descriptor: skeleton normalization, joint dynamics,
//! angles and distances, dynamic poses over several frames, the active
//! hand rule and feature standardization.
//!
//! Joints are stored in the order HipCenter, ShoulderCenter, Head,
//! ShoulderLeft, ElbowLeft, HandLeft, ShoulderRight, ElbowRight, HandRight,
//! HipLeft, HipRight. A frame file holds one frame per line with the 33
//! coordinates in that order.

mod angles;
mod descriptor;
mod frame;
mod standardize;
mod tree;

pub use angles::{
    angle_between, azimuth, azimuth_angles, bending_angles, inclination_angles, pairwise_distances, torso_basis,
    torso_points, Angles, TorsoBasis, TRIPLES,
};
pub use descriptor::{
    active_hand, active_hand_delta, assemble_descriptor, describe_sequence, dynamic_frames, dynamic_pose_matrix,
    joint_dynamics, layout, make_dynamic_pose, smoothed_positions, DescriptorConfig, Hand, PoseDescriptor,
    DESCRIPTOR_LEN, DYNAMIC_FRAMES, DYNAMIC_POSE_LEN, MAX_STRIDE,
};
pub use frame::{format_frames, parse_frames, Joint, SkeletonFrame, Vec3, JOINTS};
pub use standardize::FeatureStandardizer;
pub use tree::{normalize_skeleton, SkeletonTree, BONES};

#[cfg(test)]
pub(crate) mod testutil;
