use super::{Params, PathParams, Topology};
use crate::error::{check_probability, invalid, Error, Result, Shape};
use crate::numerics::{apply_softmax_rows, Matrix};

/// Per-modality feature vectors of one example with its presence mask.
#[derive(Debug, Clone, PartialEq)]
pub struct ModalitySample {
    pub features: Vec<Vec<f64>>,
    pub present: Vec<bool>,
    pub label: Option<usize>,
}

impl ModalitySample {
    pub fn new(features: Vec<Vec<f64>>, label: Option<usize>) -> Self {
        let present = vec![true; features.len()];
        Self {
            features,
            present,
            label,
        }
    }

    pub fn modalities(&self) -> usize {
        self.features.len()
    }

    /// Marks modality `k` absent and zeroes its features.
    pub fn drop_modality(&mut self, k: usize) {
        self.present[k] = false;
        self.features[k].fill(0.0);
    }
}

/// Row-stacked examples: one `B x d_k` matrix per modality.
#[derive(Debug, Clone, PartialEq)]
pub struct Batch {
    pub inputs: Vec<Matrix>,
    /// `present[k][b]`: modality `k` of example `b` is available.
    pub present: Vec<Vec<bool>>,
    pub labels: Vec<usize>,
}

impl Batch {
    pub fn from_samples(samples: &[ModalitySample]) -> Result<Self> {
        let first = samples
            .first()
            .ok_or_else(|| invalid("cannot build a batch from zero samples"))?;
        let k_count = first.modalities();
        let mut inputs = Vec::with_capacity(k_count);
        let mut present = vec![Vec::with_capacity(samples.len()); k_count];
        for k in 0..k_count {
            let dim = first.features[k].len();
            let mut m = Matrix::zeros(samples.len(), dim);
            for (b, s) in samples.iter().enumerate() {
                if s.modalities() != k_count || s.present.len() != k_count {
                    return Err(invalid(format!("sample {b}: expected {k_count} modalities")));
                }
                if s.features[k].len() != dim {
                    return Err(Error::ShapeMismatch {
                        op: "batch",
                        left: Shape(b, s.features[k].len()),
                        right: Shape(0, dim),
                    });
                }
                if s.present[k] {
                    m.row_mut(b).copy_from_slice(&s.features[k]);
                }
                present[k].push(s.present[k]);
            }
            inputs.push(m);
        }
        let labels = samples.iter().map(|s| s.label.unwrap_or(0)).collect();
        Ok(Self {
            inputs,
            present,
            labels,
        })
    }

    pub fn len(&self) -> usize {
        self.inputs.first().map_or(0, Matrix::rows)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn check(&self, topology: &Topology) -> Result<()> {
        if self.inputs.len() != topology.modalities() || self.present.len() != topology.modalities() {
            return Err(invalid(format!(
                "batch has {} modalities, topology expects {}",
                self.inputs.len(),
                topology.modalities()
            )));
        }
        let b = self.len();
        for (k, (x, dim)) in self.inputs.iter().zip(topology.input_dims()).enumerate() {
            if x.cols() != dim || x.rows() != b || self.present[k].len() != b {
                return Err(Error::ShapeMismatch {
                    op: "batch input",
                    left: x.shape(),
                    right: Shape(b, dim),
                });
            }
        }
        if self.labels.len() != b {
            return Err(invalid("label count differs from batch size"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Train,
    Eval,
}

/// How a forward pass treats dropout.
///
/// In `Train` mode inputs are used as given (the caller has already
/// applied input dropout) and hidden activations are multiplied by the
/// supplied masks. In `Eval` mode inputs are scaled by `input_keep` and
/// hidden activations by `hidden_keep`, the expectation of the
/// corresponding training-time masks.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ForwardOptions {
    pub mode: Mode,
    pub input_keep: f64,
    pub hidden_keep: f64,
}

impl ForwardOptions {
    pub fn train() -> Self {
        Self {
            mode: Mode::Train,
            input_keep: 1.0,
            hidden_keep: 1.0,
        }
    }

    pub fn eval(input_keep: f64, hidden_keep: f64) -> Self {
        Self {
            mode: Mode::Eval,
            input_keep,
            hidden_keep,
        }
    }

    fn check(&self) -> Result<()> {
        check_probability("input_keep", self.input_keep)?;
        check_probability("hidden_keep", self.hidden_keep)
    }
}

impl Default for ForwardOptions {
    fn default() -> Self {
        Self::eval(1.0, 1.0)
    }
}

/// Activations of one path for a batch.
#[derive(Debug, Clone)]
pub struct PathTrace {
    /// Input actually fed to the first layer.
    pub input: Matrix,
    /// Output of every tanh layer after masking or scaling.
    pub activations: Vec<Matrix>,
    /// Train-mode hidden dropout masks, one per layer when used.
    pub hidden_masks: Option<Vec<Matrix>>,
}

impl PathTrace {
    pub fn output(&self) -> &Matrix {
        self.activations.last().expect("paths have at least one layer")
    }
}

#[derive(Debug, Clone)]
pub struct ForwardTrace {
    pub mode: Mode,
    pub paths: Vec<PathTrace>,
    pub present: Vec<Vec<bool>>,
    /// Path outputs multiplied by the presence mask: the inputs of W1.
    pub gated: Vec<Matrix>,
    /// Shared hidden activations, `B x K·N`.
    pub shared: Matrix,
    pub posteriors: Matrix,
    pub gamma: f64,
}

/// Path `k` run on its own through its pretraining head.
#[derive(Debug, Clone)]
pub struct SingleTrace {
    pub modality: usize,
    pub mode: Mode,
    pub path: PathTrace,
    pub posteriors: Matrix,
}

pub(crate) fn forward_path(
    path: &PathParams,
    input: &Matrix,
    opts: &ForwardOptions,
    hidden_masks: Option<&[Matrix]>,
) -> Result<PathTrace> {
    opts.check()?;
    let mut x = input.clone();
    if opts.mode == Mode::Eval && opts.input_keep != 1.0 {
        x.scale(opts.input_keep);
    }
    if let Some(masks) = hidden_masks {
        if opts.mode != Mode::Train || masks.len() != path.layers.len() {
            return Err(invalid("hidden masks must be train-mode, one per path layer"));
        }
    }
    let mut activations: Vec<Matrix> = Vec::with_capacity(path.layers.len());
    for (l, layer) in path.layers.iter().enumerate() {
        let prev = activations.last().unwrap_or(&x);
        let mut a = layer.forward(prev)?.map(f64::tanh);
        match (opts.mode, hidden_masks) {
            (Mode::Train, Some(masks)) => {
                let m = &masks[l];
                if m.shape() != a.shape() {
                    return Err(Error::ShapeMismatch {
                        op: "hidden mask",
                        left: m.shape(),
                        right: a.shape(),
                    });
                }
                for (v, &keep) in a.as_mut_slice().iter_mut().zip(m.as_slice()) {
                    *v *= keep;
                }
            }
            (Mode::Eval, _) if opts.hidden_keep != 1.0 => a.scale(opts.hidden_keep),
            _ => {}
        }
        activations.push(a);
    }
    Ok(PathTrace {
        input: x,
        activations,
        hidden_masks: hidden_masks.map(<[Matrix]>::to_vec),
    })
}

/// Batched forward pass through all paths, the gated shared layer and the
/// softmax output.
///
/// Shared unit `l` of modality block `k` receives the diagonal-block term
/// from modality `k` plus γ times the off-diagonal terms from every other
/// modality, in increasing modality order, plus its bias.
pub fn forward_batch(
    batch: &Batch,
    params: &Params,
    topology: &Topology,
    opts: &ForwardOptions,
    hidden_masks: Option<&[Vec<Matrix>]>,
) -> Result<ForwardTrace> {
    batch.check(topology)?;
    params.validate(topology)?;
    let k_count = topology.modalities();
    let n = topology.classes();
    let b = batch.len();
    let offsets = topology.fused_offsets();

    let mut paths = Vec::with_capacity(k_count);
    let mut gated = Vec::with_capacity(k_count);
    for k in 0..k_count {
        let mut input = batch.inputs[k].clone();
        for (r, &on) in batch.present[k].iter().enumerate() {
            if !on {
                input.row_mut(r).fill(0.0);
            }
        }
        let masks = hidden_masks.map(|m| m[k].as_slice());
        let trace = forward_path(&params.paths[k], &input, opts, masks)?;
        let mut g = trace.output().clone();
        for (r, &on) in batch.present[k].iter().enumerate() {
            if !on {
                g.row_mut(r).fill(0.0);
            }
        }
        paths.push(trace);
        gated.push(g);
    }

    let shared_params = &params.shared;
    let gamma = shared_params.gamma();
    let act = topology.shared_activation();
    let mut shared = Matrix::zeros(b, topology.shared_units());
    for k in 0..k_count {
        let cols = k * n;
        let diag_block = shared_params
            .w1
            .block(offsets[k], cols, topology.paths()[k].output_dim(), n);
        let diag = gated[k].matmul(&diag_block)?;
        let mut off = Matrix::zeros(b, n);
        if gamma != 0.0 {
            for m in (0..k_count).filter(|&m| m != k) {
                let block = shared_params
                    .w1
                    .block(offsets[m], cols, topology.paths()[m].output_dim(), n);
                gated[m].matmul_acc(&block, &mut off)?;
            }
        }
        for r in 0..b {
            let out = &mut shared.row_mut(r)[cols..cols + n];
            for (l, o) in out.iter_mut().enumerate() {
                let pre = diag[(r, l)] + gamma * off[(r, l)] + shared_params.b1[cols + l];
                *o = act.apply(pre);
            }
        }
    }

    let mut logits = shared.matmul(&shared_params.w2)?;
    logits.add_row_vector(&shared_params.b2);
    let posteriors = apply_softmax_rows(&logits);
    Ok(ForwardTrace {
        mode: opts.mode,
        paths,
        present: batch.present.clone(),
        gated,
        shared,
        posteriors,
        gamma,
    })
}

/// Single-example forward pass returning the class posterior.
pub fn forward(
    sample: &ModalitySample,
    params: &Params,
    topology: &Topology,
    opts: &ForwardOptions,
) -> Result<(Vec<f64>, ForwardTrace)> {
    let batch = Batch::from_samples(std::slice::from_ref(sample))?;
    let trace = forward_batch(&batch, params, topology, opts, None)?;
    Ok((trace.posteriors.row(0).to_vec(), trace))
}

/// Runs path `k` and its own softmax head on a `B x d_k` input.
pub fn forward_single_batch(
    k: usize,
    input: &Matrix,
    params: &Params,
    topology: &Topology,
    opts: &ForwardOptions,
    hidden_masks: Option<&[Matrix]>,
) -> Result<SingleTrace> {
    let spec = topology.path(k)?;
    let path = params
        .paths
        .get(k)
        .ok_or_else(|| invalid(format!("no parameters for path {k}")))?;
    if input.cols() != spec.input_dim {
        return Err(Error::ShapeMismatch {
            op: "single-modality input",
            left: input.shape(),
            right: Shape(input.rows(), spec.input_dim),
        });
    }
    let trace = forward_path(path, input, opts, hidden_masks)?;
    let logits = path.head.forward(trace.output())?;
    Ok(SingleTrace {
        modality: k,
        mode: opts.mode,
        path: trace,
        posteriors: apply_softmax_rows(&logits),
    })
}

/// Posterior of modality `k` alone; other modalities are ignored.
pub fn forward_single_modality(
    k: usize,
    sample: &ModalitySample,
    params: &Params,
    topology: &Topology,
    opts: &ForwardOptions,
) -> Result<Vec<f64>> {
    let features = sample
        .features
        .get(k)
        .ok_or_else(|| invalid(format!("sample has no modality {k}")))?;
    let x = Matrix::row_vector(features);
    let t = forward_single_batch(k, &x, params, topology, opts, None)?;
    Ok(t.posteriors.row(0).to_vec())
}

pub fn argmax(v: &[f64]) -> usize {
    let mut best = 0;
    for (i, &x) in v.iter().enumerate() {
        if x > v[best] {
            best = i;
        }
    }
    best
}
