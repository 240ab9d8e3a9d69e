use super::{Dense, SharedParams, Topology};
use crate::error::{invalid, Result};
use crate::numerics::softmax_in_place;

const LOG_FLOOR: f64 = 1e-300;

/// Builds shared layers that start out fusing the pretrained paths.
///
/// Each diagonal block of W1 receives the corresponding path's pretrained
/// head, off-diagonal blocks are zero and gated off, and every N x N block
/// of W2 is `I / K`. With a linear shared layer the output is then exactly
/// the normalized geometric mean of the per-path posteriors.
pub fn init_shared_from_pretrained(heads: &[&Dense], topology: &Topology) -> Result<SharedParams> {
    let k_count = topology.modalities();
    let n = topology.classes();
    if heads.len() != k_count {
        return Err(invalid(format!(
            "expected {k_count} pretrained heads, got {}",
            heads.len()
        )));
    }
    let mut shared = SharedParams::zeros(topology);
    let offsets = topology.fused_offsets();
    for (k, head) in heads.iter().enumerate() {
        let f_k = topology.paths()[k].output_dim();
        if head.fan_in() != f_k || head.fan_out() != n || head.bias.len() != n {
            return Err(invalid(format!(
                "head {k} is {}x{}, expected {f_k}x{n}",
                head.fan_in(),
                head.fan_out()
            )));
        }
        shared.w1.set_block(offsets[k], k * n, &head.weights);
        shared.b1[k * n..(k + 1) * n].copy_from_slice(&head.bias);
        for j in 0..n {
            shared.w2[(k * n + j, j)] = 1.0 / k_count as f64;
        }
    }
    shared.set_gamma(0.0)?;
    Ok(shared)
}

/// Normalized geometric mean of K class distributions:
/// `out_j ∝ (Π_k p_j^(k))^(1/K)`, computed as a softmax of mean log
/// probabilities. Probabilities are floored at 1e-300 before the log.
pub fn geometric_mean_fusion(posteriors: &[Vec<f64>]) -> Result<Vec<f64>> {
    let first = posteriors
        .first()
        .ok_or_else(|| invalid("geometric mean of zero distributions"))?;
    let n = first.len();
    for (k, p) in posteriors.iter().enumerate() {
        if p.len() != n {
            return Err(invalid(format!("distribution {k} has length {}, expected {n}", p.len())));
        }
        let sum: f64 = p.iter().sum();
        if p.iter().any(|&v| !(v >= 0.0)) || (sum - 1.0).abs() > 1e-9 {
            return Err(invalid(format!("input {k} is not a probability distribution")));
        }
    }
    let k_count = posteriors.len() as f64;
    let mut scores: Vec<f64> = (0..n)
        .map(|j| {
            posteriors
                .iter()
                .map(|p| p[j].max(LOG_FLOOR).ln())
                .sum::<f64>()
                / k_count
        })
        .collect();
    softmax_in_place(&mut scores);
    Ok(scores)
}
