//! Loss functions and exact gradients for the fused network and for single
//! pretraining paths.

use crate::error::{invalid, Result};
use crate::numerics::Matrix;
use crate::network::{
    forward_batch, forward_single_batch, Batch, ForwardOptions, ForwardTrace, Gradients,
    Mode, Params, PathParams, PathTrace, SingleTrace, Topology,
};

const PROB_FLOOR: f64 = 1e-300;

/// `-ln p[label]`, with `p` floored at 1e-300.
pub fn cross_entropy_loss(posterior: &[f64], label: usize) -> Result<f64> {
    let p = posterior
        .get(label)
        .ok_or_else(|| invalid(format!("label {label} out of range for {} classes", posterior.len())))?;
    Ok(-p.max(PROB_FLOOR).ln())
}

pub(crate) fn mean_cross_entropy(posteriors: &Matrix, labels: &[usize]) -> Result<f64> {
    if labels.len() != posteriors.rows() {
        return Err(invalid("label count differs from posterior rows"));
    }
    let mut sum = 0.0;
    for (r, &y) in labels.iter().enumerate() {
        sum += cross_entropy_loss(posteriors.row(r), y)?;
    }
    Ok(sum / labels.len().max(1) as f64)
}

/// W1 as seen by the forward pass: off-diagonal blocks scaled by γ.
fn effective_w1(params: &Params, topology: &Topology) -> Matrix {
    let gamma = params.shared.gamma();
    let mut w = params.shared.w1.clone();
    if gamma != 1.0 {
        let n = topology.classes();
        let offsets = topology.fused_offsets();
        for (m, &off) in offsets.iter().enumerate() {
            let f_m = topology.paths()[m].output_dim();
            for r in off..off + f_m {
                let row = w.row_mut(r);
                for (c, v) in row.iter_mut().enumerate() {
                    if c / n != m {
                        *v *= gamma;
                    }
                }
            }
        }
    }
    w
}

/// Sum of squared weights of the sub-network that ran: layers of active
/// paths, the W1 rows fed by active paths (off-diagonal blocks scaled by
/// γ) and W2. Biases and the pretraining heads are excluded.
pub fn fused_weight_penalty(params: &Params, topology: &Topology, active: &[bool]) -> f64 {
    let paths: f64 = params
        .paths
        .iter()
        .zip(active)
        .filter(|(_, &on)| on)
        .flat_map(|(p, _)| p.layers.iter())
        .map(|l| l.weights.sum_squares())
        .sum();
    let w1 = effective_w1(params, topology);
    let offsets = topology.fused_offsets();
    let mut w1_sum = 0.0;
    for (m, &off) in offsets.iter().enumerate() {
        if active[m] {
            for r in off..off + topology.paths()[m].output_dim() {
                w1_sum += w1.row(r).iter().map(|v| v * v).sum::<f64>();
            }
        }
    }
    paths + w1_sum + params.shared.w2.sum_squares()
}

/// Modalities present in at least one example of the batch.
pub fn active_modalities(present: &[Vec<bool>]) -> Vec<bool> {
    present.iter().map(|p| p.iter().any(|&on| on)).collect()
}

/// Sum of squared weights of one path and its head.
pub fn path_weight_penalty(path: &PathParams) -> f64 {
    path.layers
        .iter()
        .map(|l| l.weights.sum_squares())
        .sum::<f64>()
        + path.head.weights.sum_squares()
}

/// Mean cross-entropy over the batch plus `l2` times the weight penalty.
pub fn fused_loss(
    batch: &Batch,
    params: &Params,
    topology: &Topology,
    opts: &ForwardOptions,
    hidden_masks: Option<&[Vec<Matrix>]>,
    l2: f64,
) -> Result<f64> {
    let trace = forward_batch(batch, params, topology, opts, hidden_masks)?;
    let active = active_modalities(&batch.present);
    Ok(mean_cross_entropy(&trace.posteriors, &batch.labels)?
        + l2 * fused_weight_penalty(params, topology, &active))
}

/// Pretraining objective of path `k`.
pub fn single_loss(
    k: usize,
    input: &Matrix,
    labels: &[usize],
    params: &Params,
    topology: &Topology,
    opts: &ForwardOptions,
    hidden_masks: Option<&[Matrix]>,
    l2: f64,
) -> Result<f64> {
    let trace = forward_single_batch(k, input, params, topology, opts, hidden_masks)?;
    Ok(mean_cross_entropy(&trace.posteriors, labels)? + l2 * path_weight_penalty(&params.paths[k]))
}

/// `(P - Y) / B` for softmax outputs and one-hot targets.
fn softmax_ce_delta(posteriors: &Matrix, labels: &[usize]) -> Result<Matrix> {
    if labels.len() != posteriors.rows() {
        return Err(invalid("label count differs from posterior rows"));
    }
    let b = labels.len() as f64;
    let mut d = posteriors.clone();
    for (r, &y) in labels.iter().enumerate() {
        if y >= d.cols() {
            return Err(invalid(format!("label {y} out of range for {} classes", d.cols())));
        }
        d[(r, y)] -= 1.0;
    }
    d.scale(1.0 / b);
    Ok(d)
}

/// Backpropagates `d_out` (gradient w.r.t. the path output) through the
/// tanh layers of one path. Head gradients are left at zero.
fn backward_path(path: &PathParams, trace: &PathTrace, d_out: Matrix, l2: f64) -> Result<PathParams> {
    let mut grads = path.zeros_like();
    let mut d_a = d_out;
    for l in (0..path.layers.len()).rev() {
        let a = &trace.activations[l];
        let mut dz = d_a;
        for (g, &y) in dz.as_mut_slice().iter_mut().zip(a.as_slice()) {
            *g *= 1.0 - y * y;
        }
        if let Some(masks) = &trace.hidden_masks {
            for (g, &m) in dz.as_mut_slice().iter_mut().zip(masks[l].as_slice()) {
                *g *= m;
            }
        }
        let prev = if l == 0 { &trace.input } else { &trace.activations[l - 1] };
        let layer = &path.layers[l];
        let g = &mut grads.layers[l];
        prev.t_matmul_acc(&dz, &mut g.weights)?;
        g.weights.add_scaled(&layer.weights, 2.0 * l2)?;
        g.bias = dz.column_sums();
        d_a = if l > 0 {
            dz.matmul(&layer.weights.transpose())?
        } else {
            Matrix::zeros(0, 0)
        };
    }
    Ok(grads)
}

/// Exact gradient of [`fused_loss`] for a train-mode trace.
///
/// Off-diagonal blocks of W1 receive γ times their data gradient and
/// `2·l2·γ²·W` from the penalty, so a closed gate yields exactly zero.
/// A modality absent from the whole batch gets zero gradients on its path
/// and on its rows of W1.
pub fn backward(
    trace: &ForwardTrace,
    labels: &[usize],
    params: &Params,
    topology: &Topology,
    l2: f64,
) -> Result<Gradients> {
    if trace.mode != Mode::Train {
        return Err(invalid("backward needs a train-mode trace"));
    }
    params.validate(topology)?;
    if trace.paths.len() != topology.modalities()
        || trace.shared.cols() != topology.shared_units()
        || trace.gamma != params.shared.gamma()
    {
        return Err(invalid("trace does not match the parameters"));
    }
    let n = topology.classes();
    let b = trace.shared.rows();
    let gamma = params.shared.gamma();
    let mut grads = params.zeros_like();

    let d_logits = softmax_ce_delta(&trace.posteriors, labels)?;
    let shared = &params.shared;
    trace.shared.t_matmul_acc(&d_logits, &mut grads.shared.w2)?;
    grads.shared.w2.add_scaled(&shared.w2, 2.0 * l2)?;
    grads.shared.b2 = d_logits.column_sums();

    let mut d_pre = d_logits.matmul(&shared.w2.transpose())?;
    let act = topology.shared_activation();
    for (g, &h) in d_pre.as_mut_slice().iter_mut().zip(trace.shared.as_slice()) {
        *g *= act.derivative_from_output(h);
    }
    grads.shared.b1 = d_pre.column_sums();

    // Concatenated W1 inputs, B x F.
    let offsets = topology.fused_offsets();
    let mut fused = Matrix::zeros(b, topology.fused_dim());
    for (m, g) in trace.gated.iter().enumerate() {
        for r in 0..b {
            fused.row_mut(r)[offsets[m]..offsets[m] + g.cols()].copy_from_slice(g.row(r));
        }
    }
    let active = active_modalities(&trace.present);
    let w1_eff = effective_w1(params, topology);
    let mut g_w1 = Matrix::zeros(topology.fused_dim(), topology.shared_units());
    fused.t_matmul_acc(&d_pre, &mut g_w1)?;
    for (m, &off) in offsets.iter().enumerate() {
        let f_m = topology.paths()[m].output_dim();
        let penalty = if active[m] { 2.0 * l2 } else { 0.0 };
        for r in off..off + f_m {
            let g_row = g_w1.row_mut(r);
            let w_row = w1_eff.row(r);
            for (c, (g, &w)) in g_row.iter_mut().zip(w_row).enumerate() {
                let scale = if c / n == m { 1.0 } else { gamma };
                // w already carries one factor of γ.
                *g = scale * (*g + penalty * w);
            }
        }
    }
    grads.shared.w1 = g_w1;

    let d_fused = d_pre.matmul(&w1_eff.transpose())?;
    for (m, path) in params.paths.iter().enumerate() {
        let f_m = topology.paths()[m].output_dim();
        let mut d_out = d_fused.block(0, offsets[m], b, f_m);
        for (r, &on) in trace.present[m].iter().enumerate() {
            if !on {
                d_out.row_mut(r).fill(0.0);
            }
        }
        if active[m] {
            grads.paths[m].layers = backward_path(path, &trace.paths[m], d_out, l2)?.layers;
        }
    }
    Ok(grads)
}

/// Exact gradient of [`single_loss`] for path `trace.modality`. Only that
/// path's layers and head are non-zero.
pub fn backward_single(
    trace: &SingleTrace,
    labels: &[usize],
    params: &Params,
    l2: f64,
) -> Result<PathParams> {
    if trace.mode != Mode::Train {
        return Err(invalid("backward needs a train-mode trace"));
    }
    let path = params
        .paths
        .get(trace.modality)
        .ok_or_else(|| invalid("trace modality out of range"))?;
    let d_logits = softmax_ce_delta(&trace.posteriors, labels)?;
    let out = trace.path.output();
    let mut head_w = Matrix::zeros(path.head.fan_in(), path.head.fan_out());
    out.t_matmul_acc(&d_logits, &mut head_w)?;
    head_w.add_scaled(&path.head.weights, 2.0 * l2)?;
    let head_b = d_logits.column_sums();
    let d_out = d_logits.matmul(&path.head.weights.transpose())?;
    let mut grads = backward_path(path, &trace.path, d_out, l2)?;
    grads.head.weights = head_w;
    grads.head.bias = head_b;
    Ok(grads)
}
