use std::fmt;
use std::str::FromStr;

use crate::error::{invalid, Error, Result};

/// Activation of the shared fusion layer.
///
/// `Linear` makes the freshly initialized network an exact normalized
/// geometric mean of the per-modality posteriors; `Tanh` only approximates
/// it (same argmax in the vast majority of cases).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SharedActivation {
    Tanh,
    Linear,
}

impl SharedActivation {
    pub fn apply(self, x: f64) -> f64 {
        match self {
            Self::Tanh => x.tanh(),
            Self::Linear => x,
        }
    }

    /// Derivative expressed through the activation value `y = f(x)`.
    pub fn derivative_from_output(self, y: f64) -> f64 {
        match self {
            Self::Tanh => 1.0 - y * y,
            Self::Linear => 1.0,
        }
    }
}

impl fmt::Display for SharedActivation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Tanh => "tanh",
            Self::Linear => "linear",
        })
    }
}

impl FromStr for SharedActivation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "tanh" => Ok(Self::Tanh),
            "linear" => Ok(Self::Linear),
            other => Err(invalid(format!("unknown shared activation `{other}`"))),
        }
    }
}

/// One modality-specific path: an input followed by tanh layers.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PathSpec {
    pub input_dim: usize,
    pub hidden: Vec<usize>,
}

impl PathSpec {
    pub fn new(input_dim: usize, hidden: Vec<usize>) -> Self {
        Self { input_dim, hidden }
    }

    /// Width of the layer feeding the shared layer (F_k).
    pub fn output_dim(&self) -> usize {
        *self.hidden.last().expect("validated non-empty")
    }

    /// `(fan_in, fan_out)` of every path layer in order.
    pub fn layer_shapes(&self) -> Vec<(usize, usize)> {
        let mut prev = self.input_dim;
        self.hidden
            .iter()
            .map(|&h| {
                let s = (prev, h);
                prev = h;
                s
            })
            .collect()
    }
}

/// K modality paths feeding a shared hidden layer of K·N units and an
/// N-way softmax output.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Topology {
    paths: Vec<PathSpec>,
    classes: usize,
    shared_activation: SharedActivation,
}

impl Topology {
    pub fn new(
        paths: Vec<PathSpec>,
        classes: usize,
        shared_activation: SharedActivation,
    ) -> Result<Self> {
        if paths.is_empty() {
            return Err(invalid("topology needs at least one modality path"));
        }
        if classes < 2 {
            return Err(invalid(format!("need at least 2 classes, got {classes}")));
        }
        for (k, p) in paths.iter().enumerate() {
            if p.input_dim == 0 || p.hidden.is_empty() || p.hidden.contains(&0) {
                return Err(invalid(format!(
                    "path {k}: input and every hidden layer must be non-empty"
                )));
            }
        }
        Ok(Self {
            paths,
            classes,
            shared_activation,
        })
    }

    /// Four 14x14 image quarters, one 125-unit layer each, ten classes.
    pub fn mnist_quarters() -> Self {
        Self::new(
            vec![PathSpec::new(196, vec![125]); 4],
            10,
            SharedActivation::Tanh,
        )
        .expect("static topology")
    }

    /// Single mocap path with 700-700-350 fully connected layers.
    pub fn mocap(input_dim: usize, classes: usize) -> Result<Self> {
        Self::new(
            vec![PathSpec::new(input_dim, vec![700, 700, 350])],
            classes,
            SharedActivation::Tanh,
        )
    }

    pub fn with_shared_activation(mut self, act: SharedActivation) -> Self {
        self.shared_activation = act;
        self
    }

    pub fn modalities(&self) -> usize {
        self.paths.len()
    }

    pub fn classes(&self) -> usize {
        self.classes
    }

    pub fn paths(&self) -> &[PathSpec] {
        &self.paths
    }

    pub fn path(&self, k: usize) -> Result<&PathSpec> {
        self.paths
            .get(k)
            .ok_or_else(|| invalid(format!("modality {k} out of range (K = {})", self.paths.len())))
    }

    pub fn shared_activation(&self) -> SharedActivation {
        self.shared_activation
    }

    pub fn shared_units(&self) -> usize {
        self.paths.len() * self.classes
    }

    /// F = Σ F_k, the row count of W1.
    pub fn fused_dim(&self) -> usize {
        self.paths.iter().map(PathSpec::output_dim).sum()
    }

    /// Row offset of each modality's block inside W1.
    pub fn fused_offsets(&self) -> Vec<usize> {
        let mut off = 0;
        self.paths
            .iter()
            .map(|p| {
                let o = off;
                off += p.output_dim();
                o
            })
            .collect()
    }

    pub fn input_dims(&self) -> Vec<usize> {
        self.paths.iter().map(|p| p.input_dim).collect()
    }

    /// Compact description such as `196x4-125x4-40-10`.
    pub fn describe(&self) -> String {
        let mut parts = vec![grouped(self.paths.iter().map(|p| p.input_dim))];
        let depth = self.paths.iter().map(|p| p.hidden.len()).max().unwrap_or(0);
        for l in 0..depth {
            parts.push(grouped(
                self.paths.iter().filter_map(|p| p.hidden.get(l).copied()),
            ));
        }
        parts.push(self.shared_units().to_string());
        parts.push(self.classes.to_string());
        parts.join("-")
    }
}

fn grouped(dims: impl Iterator<Item = usize>) -> String {
    let dims: Vec<usize> = dims.collect();
    if dims.len() > 1 && dims.iter().all(|&d| d == dims[0]) {
        format!("{}x{}", dims[0], dims.len())
    } else {
        dims.iter()
            .map(usize::to_string)
            .collect::<Vec<_>>()
            .join("+")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mnist_shape() {
        let t = Topology::mnist_quarters();
        assert_eq!(t.shared_units(), 40);
        assert_eq!(t.fused_dim(), 500);
        assert_eq!(t.fused_offsets(), vec![0, 125, 250, 375]);
        assert_eq!(t.describe(), "196x4-125x4-40-10");
    }

    #[test]
    fn mocap_defaults() {
        let t = Topology::mocap(183, 21).unwrap();
        assert_eq!(t.path(0).unwrap().layer_shapes(), vec![(183, 700), (700, 700), (700, 350)]);
        assert!(t.path(1).is_err());
    }

    #[test]
    fn rejects_empty() {
        assert!(Topology::new(vec![], 3, SharedActivation::Tanh).is_err());
        assert!(Topology::new(vec![PathSpec::new(3, vec![])], 3, SharedActivation::Tanh).is_err());
        assert!(Topology::new(vec![PathSpec::new(3, vec![2])], 1, SharedActivation::Tanh).is_err());
    }
}
