//! Linear algebra, nonlinearities, seeded randomness and temporal smoothing.

mod matrix;
mod rng;
mod smooth;

pub use matrix::{apply_softmax_rows, apply_tanh, softmax, softmax_in_place, Matrix};
pub use rng::{bernoulli_mask, SeededRng};
pub use smooth::{gaussian_kernel, gaussian_smooth_temporal};
