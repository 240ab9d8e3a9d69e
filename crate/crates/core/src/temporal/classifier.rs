use crate::error::{invalid, Result};
use crate::network::{argmax, forward_single_batch, ForwardOptions, Params, PathSpec, SharedActivation, Topology};
use crate::numerics::{Matrix, SeededRng};
use crate::training::{pretrain_modality, Dataset, TrainLog, TrainingConfig};

const CHUNK: usize = 512;
/// Every n-th example is held out for early stopping and accuracy.
const HOLD_OUT_EVERY: usize = 5;

#[derive(Debug, Clone, PartialEq)]
pub struct ClassifierConfig {
    pub hidden: usize,
    pub epochs: usize,
    pub training: TrainingConfig,
}

impl Default for ClassifierConfig {
    fn default() -> Self {
        Self {
            hidden: 300,
            epochs: 20,
            training: TrainingConfig {
                learning_rate: 0.05,
                patience: 5,
                l2: 0.0,
                ..TrainingConfig::default()
            },
        }
    }
}

/// One hidden tanh layer and a softmax over dynamic-pose inputs.
#[derive(Debug, Clone, PartialEq)]
pub struct PoseClassifier {
    topology: Topology,
    params: Params,
    input_keep: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HeldOut {
    pub correct: usize,
    pub count: usize,
}

impl HeldOut {
    pub fn accuracy(&self) -> f64 {
        self.correct as f64 / self.count.max(1) as f64
    }
}

impl PoseClassifier {
    pub fn topology_for(input_dim: usize, hidden: usize, classes: usize) -> Result<Topology> {
        Topology::new(vec![PathSpec::new(input_dim, vec![hidden])], classes, SharedActivation::Tanh)
    }

    pub fn from_parts(topology: Topology, params: Params, input_keep: f64) -> Result<Self> {
        params.validate(&topology)?;
        if topology.modalities() != 1 || topology.paths()[0].hidden.len() != 1 {
            return Err(invalid("a pose classifier has one path with one hidden layer"));
        }
        Ok(Self {
            topology,
            params,
            input_keep,
        })
    }

    /// Trains on `inputs` with every fifth row held out, and reports the
    /// held-out accuracy.
    pub fn train(inputs: &Matrix, labels: &[usize], classes: usize, cfg: &ClassifierConfig) -> Result<(Self, HeldOut)> {
        if inputs.rows() != labels.len() {
            return Err(invalid("one label per input row is required"));
        }
        if let Some(&bad) = labels.iter().find(|&&y| y >= classes) {
            return Err(invalid(format!("label {bad} out of range for {classes} classes")));
        }
        let (train_idx, val_idx): (Vec<usize>, Vec<usize>) =
            (0..labels.len()).partition(|i| i % HOLD_OUT_EVERY != HOLD_OUT_EVERY - 1);
        if train_idx.is_empty() || val_idx.is_empty() {
            return Err(invalid("too few examples to train a classifier"));
        }
        let all = Dataset::new(vec![inputs.clone()], labels.to_vec())?;
        let (train, val) = (all.subset(&train_idx), all.subset(&val_idx));
        let topology = Self::topology_for(inputs.cols(), cfg.hidden, classes)?;
        let mut params = Params::random(&topology, &mut SeededRng::stream(cfg.training.seed, &[1]));
        let mut log = TrainLog::default();
        let (path, _) = pretrain_modality(0, &params, &topology, &train, &val, &cfg.training, cfg.epochs, &mut log)?;
        params.paths[0] = path;
        let model = Self::from_parts(topology, params, cfg.training.input_keep)?;
        let predicted = model.predict(&val.inputs[0])?;
        let correct = predicted.iter().zip(&val.labels).filter(|(p, y)| p == y).count();
        Ok((
            model,
            HeldOut {
                correct,
                count: val.len(),
            },
        ))
    }

    pub fn topology(&self) -> &Topology {
        &self.topology
    }

    pub fn params(&self) -> &Params {
        &self.params
    }

    pub fn input_keep(&self) -> f64 {
        self.input_keep
    }

    pub fn classes(&self) -> usize {
        self.topology.classes()
    }

    pub fn posteriors(&self, inputs: &Matrix) -> Result<Matrix> {
        let opts = ForwardOptions::eval(self.input_keep, 1.0);
        let mut out = Matrix::zeros(inputs.rows(), self.classes());
        let mut r0 = 0;
        while r0 < inputs.rows() {
            let n = CHUNK.min(inputs.rows() - r0);
            let x = inputs.block(r0, 0, n, inputs.cols());
            let trace = forward_single_batch(0, &x, &self.params, &self.topology, &opts, None)?;
            out.set_block(r0, 0, &trace.posteriors);
            r0 += n;
        }
        Ok(out)
    }

    pub fn predict(&self, inputs: &Matrix) -> Result<Vec<usize>> {
        let p = self.posteriors(inputs)?;
        Ok((0..p.rows()).map(|r| argmax(p.row(r))).collect())
    }
}

/// Binary rest/activity detector on stride-1 dynamic poses.
#[derive(Debug, Clone, PartialEq)]
pub struct MotionClassifier {
    inner: PoseClassifier,
}

impl MotionClassifier {
    pub fn train(inputs: &Matrix, active: &[bool], cfg: &ClassifierConfig) -> Result<(Self, HeldOut)> {
        if active.iter().all(|&a| a) || !active.iter().any(|&a| a) {
            return Err(invalid("motion training data must contain both rest and activity"));
        }
        let labels: Vec<usize> = active.iter().map(|&a| a as usize).collect();
        let (inner, held) = PoseClassifier::train(inputs, &labels, 2, cfg)?;
        Ok((Self { inner }, held))
    }

    pub fn from_classifier(inner: PoseClassifier) -> Result<Self> {
        if inner.classes() != 2 {
            return Err(invalid("a motion classifier has two classes"));
        }
        Ok(Self { inner })
    }

    pub fn classifier(&self) -> &PoseClassifier {
        &self.inner
    }

    /// Rest and activity probabilities per row.
    pub fn posteriors(&self, inputs: &Matrix) -> Result<Matrix> {
        self.inner.posteriors(inputs)
    }

    pub fn activity(&self, inputs: &Matrix) -> Result<Vec<bool>> {
        Ok(self.inner.predict(inputs)?.into_iter().map(|c| c == 1).collect())
    }
}
