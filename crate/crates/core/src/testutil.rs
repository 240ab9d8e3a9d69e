use crate::network::{Batch, ModalitySample, ParameterGroups, Params, PathSpec, SharedActivation, Topology};
use crate::numerics::{Matrix, SeededRng};
use crate::training::Dataset;

pub fn tiny_topology(k: usize, classes: usize, act: SharedActivation) -> Topology {
    let paths = (0..k)
        .map(|i| PathSpec::new(2 + i % 3, vec![3 + i % 2]))
        .collect();
    Topology::new(paths, classes, act).unwrap()
}

/// Random parameters with every entry drawn from U(-scale, scale).
pub fn random_params(t: &Topology, rng: &mut SeededRng, scale: f64) -> Params {
    let mut p = Params::zeros(t);
    p.for_each_group_mut(&mut |_, v| v.iter_mut().for_each(|x| *x = rng.uniform(-scale, scale)));
    p
}

pub fn random_sample(t: &Topology, rng: &mut SeededRng) -> ModalitySample {
    let features = t
        .input_dims()
        .into_iter()
        .map(|d| (0..d).map(|_| rng.uniform(-1.0, 1.0)).collect())
        .collect();
    ModalitySample::new(features, Some(rng.below(t.classes())))
}

pub fn random_batch(t: &Topology, rng: &mut SeededRng, size: usize) -> Batch {
    let samples: Vec<_> = (0..size).map(|_| random_sample(t, rng)).collect();
    Batch::from_samples(&samples).unwrap()
}

/// Noisy class-conditional data: every modality sees a class centre in
/// {-1, 1}^d plus Gaussian noise of the given scale.
pub fn toy_dataset(t: &Topology, n: usize, noise: f64, seed: u64) -> Dataset {
    let mut centres_rng = SeededRng::new(0xC0FFEE);
    let centres: Vec<Vec<Vec<f64>>> = t
        .input_dims()
        .into_iter()
        .map(|d| {
            (0..t.classes())
                .map(|_| (0..d).map(|_| if centres_rng.bernoulli(0.5) { 1.0 } else { -1.0 }).collect())
                .collect()
        })
        .collect();
    let mut rng = SeededRng::new(seed);
    let labels: Vec<usize> = (0..n).map(|_| rng.below(t.classes())).collect();
    let inputs = centres
        .iter()
        .map(|c| {
            let d = c[0].len();
            let mut m = Matrix::zeros(n, d);
            for (i, &y) in labels.iter().enumerate() {
                for (v, &mu) in m.row_mut(i).iter_mut().zip(&c[y]) {
                    *v = mu + noise * rng.normal();
                }
            }
            m
        })
        .collect();
    Dataset::new(inputs, labels).unwrap()
}
