//! Toy single-layer sigmoid network used to check the ModDrop gradient
//! expansion against exact enumeration of every δ pattern.
//!
//! The network has one output `o = σ(λ s)` with `s = Σ_k δ_k Σ_i w_i^k x_i^k`
//! and a binary cross-entropy error, so `∂E/∂w_i^k = -λ δ_k x_i^k (y - o)`.

use crate::error::{check_probability, invalid, Result};

pub const MAX_MODALITIES: usize = 3;
pub const MAX_INPUTS: usize = 4;

#[derive(Debug, Clone, PartialEq)]
pub struct DerivationOracleConfig {
    /// Sigmoid steepness.
    pub lambda: f64,
    /// Inputs per modality.
    pub dims: Vec<usize>,
    /// Keep probability of each modality.
    pub keep: Vec<f64>,
}

impl DerivationOracleConfig {
    pub fn validate(&self) -> Result<()> {
        if self.dims.is_empty() || self.dims.len() > MAX_MODALITIES {
            return Err(invalid(format!(
                "enumeration needs 1..={MAX_MODALITIES} modalities, got {}",
                self.dims.len()
            )));
        }
        if self.dims.iter().any(|&d| d == 0 || d > MAX_INPUTS) {
            return Err(invalid(format!("each modality needs 1..={MAX_INPUTS} inputs")));
        }
        if self.keep.len() != self.dims.len() {
            return Err(invalid("one keep probability per modality is required"));
        }
        for &p in &self.keep {
            check_probability("keep", p)?;
        }
        if !(self.lambda > 0.0) {
            return Err(invalid("lambda must be positive"));
        }
        Ok(())
    }
}

/// Per-modality weights or inputs of the toy network.
pub type Blocks = Vec<Vec<f64>>;

fn sigmoid(lambda: f64, s: f64) -> f64 {
    1.0 / (1.0 + (-lambda * s).exp())
}

/// `Σ_i w_i^k x_i^k` for every modality.
fn partial_sums(w: &Blocks, x: &Blocks) -> Vec<f64> {
    w.iter()
        .zip(x)
        .map(|(wk, xk)| wk.iter().zip(xk).map(|(a, b)| a * b).sum())
        .collect()
}

fn check_shapes(cfg: &DerivationOracleConfig, w: &Blocks, x: &Blocks) -> Result<()> {
    cfg.validate()?;
    let ok = |b: &Blocks| b.len() == cfg.dims.len() && b.iter().zip(&cfg.dims).all(|(v, &d)| v.len() == d);
    if !ok(w) || !ok(x) {
        return Err(invalid("weights and inputs must match the oracle dimensions"));
    }
    Ok(())
}

/// Gradient of the error for one δ realization.
pub fn realization_gradient(lambda: f64, w: &Blocks, x: &Blocks, y: f64, delta: &[bool]) -> Blocks {
    let sums = partial_sums(w, x);
    let s: f64 = sums.iter().zip(delta).filter(|(_, &d)| d).map(|(v, _)| v).sum();
    let r = -lambda * (y - sigmoid(lambda, s));
    x.iter()
        .zip(delta)
        .map(|(xk, &d)| xk.iter().map(|&v| if d { r * v } else { 0.0 }).collect())
        .collect()
}

/// Exact `E[∂Ẽ/∂w]` by enumerating all 2^K δ patterns.
pub fn exact_expected_gradient(cfg: &DerivationOracleConfig, w: &Blocks, x: &Blocks, y: f64) -> Result<Blocks> {
    check_shapes(cfg, w, x)?;
    let k_count = cfg.dims.len();
    let mut out: Blocks = cfg.dims.iter().map(|&d| vec![0.0; d]).collect();
    for pattern in 0..1usize << k_count {
        let delta: Vec<bool> = (0..k_count).map(|k| pattern >> k & 1 == 1).collect();
        let prob: f64 = delta
            .iter()
            .zip(&cfg.keep)
            .map(|(&d, &p)| if d { p } else { 1.0 - p })
            .product();
        if prob == 0.0 {
            continue;
        }
        let g = realization_gradient(cfg.lambda, w, x, y, &delta);
        for (o, gk) in out.iter_mut().zip(&g) {
            for (a, b) in o.iter_mut().zip(gk) {
                *a += prob * b;
            }
        }
    }
    Ok(out)
}

/// First-order expansion split into its two terms:
/// `p_k ∂E_Σ/∂w_i^k` and the cross-modality term
/// `-λ σ'(s) x_i^k p_k Σ_{m≠k} (1 - p_m) Σ_j w_j^m x_j^m`,
/// with `σ'(s) = λ o (1 - o)` evaluated at the complete-network input.
pub fn approximate_expected_gradient(
    cfg: &DerivationOracleConfig,
    w: &Blocks,
    x: &Blocks,
    y: f64,
) -> Result<(Blocks, Blocks)> {
    check_shapes(cfg, w, x)?;
    let lambda = cfg.lambda;
    let sums = partial_sums(w, x);
    let s: f64 = sums.iter().sum();
    let o = sigmoid(lambda, s);
    let slope = lambda * o * (1.0 - o);
    let full = realization_gradient(lambda, w, x, y, &vec![true; cfg.dims.len()]);
    let mut main = Blocks::new();
    let mut cross = Blocks::new();
    for (k, xk) in x.iter().enumerate() {
        let p = cfg.keep[k];
        let others: f64 = (0..cfg.dims.len())
            .filter(|&m| m != k)
            .map(|m| (1.0 - cfg.keep[m]) * sums[m])
            .sum();
        main.push(full[k].iter().map(|g| p * g).collect());
        cross.push(xk.iter().map(|&xi| -lambda * slope * xi * p * others).collect());
    }
    Ok((main, cross))
}

fn flatten(b: &Blocks) -> impl Iterator<Item = f64> + '_ {
    b.iter().flatten().copied()
}

fn norm(b: &Blocks) -> f64 {
    flatten(b).map(|v| v * v).sum::<f64>().sqrt()
}

fn add(a: &Blocks, b: &Blocks) -> Blocks {
    a.iter()
        .zip(b)
        .map(|(x, y)| x.iter().zip(y).map(|(p, q)| p + q).collect())
        .collect()
}

fn mean_into(acc: &mut Blocks, g: &Blocks, n: f64) {
    for (a, b) in acc.iter_mut().zip(g) {
        for (p, q) in a.iter_mut().zip(b) {
            *p += q / n;
        }
    }
}

/// Batch-averaged comparison of the exact and approximate expectations.
#[derive(Debug, Clone, PartialEq)]
pub struct OracleReport {
    pub exact: Blocks,
    pub approximate: Blocks,
    pub cross_term: Blocks,
    /// `‖approximate - exact‖ / ‖exact‖`.
    pub relative_deviation: f64,
    /// `‖cross_term‖ / ‖approximate‖`.
    pub cross_fraction: f64,
}

/// Averages exact and first-order expected gradients over `(x, y)` pairs.
pub fn moddrop_gradient_expectation_check(
    cfg: &DerivationOracleConfig,
    w: &Blocks,
    samples: &[(Blocks, f64)],
) -> Result<OracleReport> {
    cfg.validate()?;
    if samples.is_empty() {
        return Err(invalid("oracle needs at least one sample"));
    }
    let zero: Blocks = cfg.dims.iter().map(|&d| vec![0.0; d]).collect();
    let n = samples.len() as f64;
    let (mut exact, mut main, mut cross) = (zero.clone(), zero.clone(), zero);
    for (x, y) in samples {
        mean_into(&mut exact, &exact_expected_gradient(cfg, w, x, *y)?, n);
        let (m, c) = approximate_expected_gradient(cfg, w, x, *y)?;
        mean_into(&mut main, &m, n);
        mean_into(&mut cross, &c, n);
    }
    let approximate = add(&main, &cross);
    let diff: f64 = flatten(&approximate)
        .zip(flatten(&exact))
        .map(|(a, e)| (a - e) * (a - e))
        .sum::<f64>()
        .sqrt();
    let exact_norm = norm(&exact);
    Ok(OracleReport {
        relative_deviation: if exact_norm > 0.0 { diff / exact_norm } else { diff },
        cross_fraction: norm(&cross) / norm(&approximate).max(f64::MIN_POSITIVE),
        exact,
        approximate,
        cross_term: cross,
    })
}

/// Gradient descent on the exact expected ModDrop gradient averaged over
/// `samples`. Returns the final weights.
pub fn train_on_expectation(
    cfg: &DerivationOracleConfig,
    w: &Blocks,
    samples: &[(Blocks, f64)],
    learning_rate: f64,
    steps: usize,
) -> Result<Blocks> {
    let mut w = w.clone();
    let n = samples.len() as f64;
    for _ in 0..steps {
        let mut g: Blocks = cfg.dims.iter().map(|&d| vec![0.0; d]).collect();
        for (x, y) in samples {
            mean_into(&mut g, &exact_expected_gradient(cfg, &w, x, *y)?, n);
        }
        for (wk, gk) in w.iter_mut().zip(&g) {
            for (a, b) in wk.iter_mut().zip(gk) {
                *a -= learning_rate * b;
            }
        }
    }
    Ok(w)
}
