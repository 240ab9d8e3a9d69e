use super::Topology;
use crate::error::{invalid, Error, Result, Shape};
use crate::numerics::{Matrix, SeededRng};

/// Named flat views over every parameter array, in a fixed order.
pub trait ParameterGroups {
    fn for_each_group(&self, f: &mut dyn FnMut(&str, &[f64]));
    fn for_each_group_mut(&mut self, f: &mut dyn FnMut(&str, &mut [f64]));

    fn parameter_count(&self) -> usize {
        let mut n = 0;
        self.for_each_group(&mut |_, v| n += v.len());
        n
    }

    fn is_finite(&self) -> bool {
        let mut ok = true;
        self.for_each_group(&mut |_, v| ok &= v.iter().all(|x| x.is_finite()));
        ok
    }
}

/// Fully connected layer computing `x · W + b` for row-major batches.
#[derive(Debug, Clone, PartialEq)]
pub struct Dense {
    pub weights: Matrix,
    pub bias: Vec<f64>,
}

impl Dense {
    pub fn zeros(fan_in: usize, fan_out: usize) -> Self {
        Self {
            weights: Matrix::zeros(fan_in, fan_out),
            bias: vec![0.0; fan_out],
        }
    }

    /// Glorot-uniform weights, zero bias.
    pub fn glorot(fan_in: usize, fan_out: usize, rng: &mut SeededRng) -> Self {
        let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
        let data = (0..fan_in * fan_out)
            .map(|_| rng.uniform(-limit, limit))
            .collect();
        Self {
            weights: Matrix::from_vec(fan_in, fan_out, data).expect("sized"),
            bias: vec![0.0; fan_out],
        }
    }

    pub fn fan_in(&self) -> usize {
        self.weights.rows()
    }

    pub fn fan_out(&self) -> usize {
        self.weights.cols()
    }

    pub fn forward(&self, x: &Matrix) -> Result<Matrix> {
        let mut out = x.matmul(&self.weights)?;
        out.add_row_vector(&self.bias);
        Ok(out)
    }

    fn expect_shape(&self, fan_in: usize, fan_out: usize, what: &str) -> Result<()> {
        if self.weights.shape() != Shape(fan_in, fan_out) || self.bias.len() != fan_out {
            return Err(invalid(format!(
                "{what}: expected {fan_in}x{fan_out} weights, found {} (bias {})",
                self.weights.shape(),
                self.bias.len()
            )));
        }
        Ok(())
    }
}

/// Layers of one modality path plus the N-way head used while it is
/// pretrained on its own.
#[derive(Debug, Clone, PartialEq)]
pub struct PathParams {
    pub layers: Vec<Dense>,
    pub head: Dense,
}

impl PathParams {
    pub fn zeros(spec: &super::PathSpec, classes: usize) -> Self {
        Self {
            layers: spec
                .layer_shapes()
                .into_iter()
                .map(|(i, o)| Dense::zeros(i, o))
                .collect(),
            head: Dense::zeros(spec.output_dim(), classes),
        }
    }

    pub fn random(spec: &super::PathSpec, classes: usize, rng: &mut SeededRng) -> Self {
        let layers = spec
            .layer_shapes()
            .into_iter()
            .map(|(i, o)| Dense::glorot(i, o, rng))
            .collect();
        Self {
            layers,
            head: Dense::glorot(spec.output_dim(), classes, rng),
        }
    }

    fn visit(&self, prefix: &str, f: &mut dyn FnMut(&str, &[f64])) {
        for (l, layer) in self.layers.iter().enumerate() {
            f(&format!("{prefix}layer{l}.weights"), layer.weights.as_slice());
            f(&format!("{prefix}layer{l}.bias"), &layer.bias);
        }
        f(&format!("{prefix}head.weights"), self.head.weights.as_slice());
        f(&format!("{prefix}head.bias"), &self.head.bias);
    }

    fn visit_mut(&mut self, prefix: &str, f: &mut dyn FnMut(&str, &mut [f64])) {
        for (l, layer) in self.layers.iter_mut().enumerate() {
            f(&format!("{prefix}layer{l}.weights"), layer.weights.as_mut_slice());
            f(&format!("{prefix}layer{l}.bias"), &mut layer.bias);
        }
        f(&format!("{prefix}head.weights"), self.head.weights.as_mut_slice());
        f(&format!("{prefix}head.bias"), &mut self.head.bias);
    }

    pub fn zeros_like(&self) -> Self {
        let mut z = self.clone();
        z.for_each_group_mut(&mut |_, v| v.fill(0.0));
        z
    }
}

impl ParameterGroups for PathParams {
    fn for_each_group(&self, f: &mut dyn FnMut(&str, &[f64])) {
        self.visit("", f);
    }

    fn for_each_group_mut(&mut self, f: &mut dyn FnMut(&str, &mut [f64])) {
        self.visit_mut("", f);
    }
}

/// Parameters of the shared hidden layer (W1, b1), the output layer
/// (W2, b2) and the gate on the off-diagonal blocks of W1.
#[derive(Debug, Clone, PartialEq)]
pub struct SharedParams {
    pub w1: Matrix,
    pub b1: Vec<f64>,
    pub w2: Matrix,
    pub b2: Vec<f64>,
    gamma: f64,
}

impl SharedParams {
    pub fn zeros(topology: &Topology) -> Self {
        let units = topology.shared_units();
        Self {
            w1: Matrix::zeros(topology.fused_dim(), units),
            b1: vec![0.0; units],
            w2: Matrix::zeros(units, topology.classes()),
            b2: vec![0.0; topology.classes()],
            gamma: 1.0,
        }
    }

    /// Unstructured Glorot initialization with the gate open.
    pub fn random(topology: &Topology, rng: &mut SeededRng) -> Self {
        let l1 = Dense::glorot(topology.fused_dim(), topology.shared_units(), rng);
        let l2 = Dense::glorot(topology.shared_units(), topology.classes(), rng);
        Self {
            w1: l1.weights,
            b1: l1.bias,
            w2: l2.weights,
            b2: l2.bias,
            gamma: 1.0,
        }
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    /// Opens (1) or closes (0) the off-diagonal blocks of W1. Stored
    /// weights are untouched.
    pub fn set_gamma(&mut self, value: f64) -> Result<()> {
        if value != 0.0 && value != 1.0 {
            return Err(invalid(format!("gamma must be 0 or 1, got {value}")));
        }
        self.gamma = value;
        Ok(())
    }
}

/// Whether W1 entry `(row, col)` lies in an off-diagonal modality block.
pub fn is_off_diagonal(topology: &Topology, row: usize, col: usize) -> bool {
    let offsets = topology.fused_offsets();
    let row_block = offsets.iter().rposition(|&o| o <= row).expect("row in range");
    col / topology.classes() != row_block
}

#[derive(Debug, Clone, PartialEq)]
pub struct Params {
    pub paths: Vec<PathParams>,
    pub shared: SharedParams,
}

/// Gradients share the parameter layout.
pub type Gradients = Params;

impl Params {
    pub fn zeros(topology: &Topology) -> Self {
        Self {
            paths: topology
                .paths()
                .iter()
                .map(|p| PathParams::zeros(p, topology.classes()))
                .collect(),
            shared: SharedParams::zeros(topology),
        }
    }

    /// Random paths, heads and shared layers; the gate is open.
    pub fn random(topology: &Topology, rng: &mut SeededRng) -> Self {
        let paths = topology
            .paths()
            .iter()
            .map(|p| PathParams::random(p, topology.classes(), rng))
            .collect();
        Self {
            paths,
            shared: SharedParams::random(topology, rng),
        }
    }

    /// Zero-valued copy with the same layout (gate preserved).
    pub fn zeros_like(&self) -> Self {
        let mut z = self.clone();
        z.for_each_group_mut(&mut |_, v| v.fill(0.0));
        z
    }

    pub fn validate(&self, topology: &Topology) -> Result<()> {
        if self.paths.len() != topology.modalities() {
            return Err(invalid(format!(
                "parameters hold {} paths, topology has {}",
                self.paths.len(),
                topology.modalities()
            )));
        }
        for (k, (p, spec)) in self.paths.iter().zip(topology.paths()).enumerate() {
            let shapes = spec.layer_shapes();
            if p.layers.len() != shapes.len() {
                return Err(invalid(format!("path {k}: wrong layer count")));
            }
            for (l, (layer, (i, o))) in p.layers.iter().zip(shapes).enumerate() {
                layer.expect_shape(i, o, &format!("path {k} layer {l}"))?;
            }
            p.head
                .expect_shape(spec.output_dim(), topology.classes(), &format!("path {k} head"))?;
        }
        let s = &self.shared;
        let want_w1 = Shape(topology.fused_dim(), topology.shared_units());
        if s.w1.shape() != want_w1 || s.b1.len() != topology.shared_units() {
            return Err(Error::ShapeMismatch {
                op: "shared W1",
                left: s.w1.shape(),
                right: want_w1,
            });
        }
        let want_w2 = Shape(topology.shared_units(), topology.classes());
        if s.w2.shape() != want_w2 || s.b2.len() != topology.classes() {
            return Err(Error::ShapeMismatch {
                op: "shared W2",
                left: s.w2.shape(),
                right: want_w2,
            });
        }
        Ok(())
    }
}

impl ParameterGroups for Params {
    /// Declaration order: for each path its layers (weights, bias) and head
    /// (weights, bias), then W1, b1, W2, b2.
    fn for_each_group(&self, f: &mut dyn FnMut(&str, &[f64])) {
        for (k, p) in self.paths.iter().enumerate() {
            p.visit(&format!("path{k}."), f);
        }
        f("shared.w1", self.shared.w1.as_slice());
        f("shared.b1", &self.shared.b1);
        f("shared.w2", self.shared.w2.as_slice());
        f("shared.b2", &self.shared.b2);
    }

    fn for_each_group_mut(&mut self, f: &mut dyn FnMut(&str, &mut [f64])) {
        for (k, p) in self.paths.iter_mut().enumerate() {
            p.visit_mut(&format!("path{k}."), f);
        }
        f("shared.w1", self.shared.w1.as_mut_slice());
        f("shared.b1", &mut self.shared.b1);
        f("shared.w2", self.shared.w2.as_mut_slice());
        f("shared.b2", &mut self.shared.b2);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mnist_parameter_count_without_heads() {
        let t = Topology::mnist_quarters();
        let p = Params::zeros(&t);
        let heads: usize = p
            .paths
            .iter()
            .map(|h| h.head.weights.as_slice().len() + h.head.bias.len())
            .sum();
        // 4·(196·125+125) + 500·40+40 + 40·10+10
        assert_eq!(p.parameter_count() - heads, 118_950);
        p.validate(&t).unwrap();
    }

    #[test]
    fn gamma_only_binary() {
        let t = Topology::mnist_quarters();
        let mut s = SharedParams::zeros(&t);
        s.w1[(0, 15)] = 2.5;
        s.set_gamma(0.0).unwrap();
        assert_eq!(s.gamma(), 0.0);
        assert!(s.set_gamma(0.5).is_err());
        s.set_gamma(1.0).unwrap();
        assert_eq!(s.w1[(0, 15)], 2.5);
    }

    #[test]
    fn off_diagonal_lookup() {
        let t = Topology::mnist_quarters();
        assert!(!is_off_diagonal(&t, 0, 0));
        assert!(!is_off_diagonal(&t, 124, 9));
        assert!(is_off_diagonal(&t, 124, 10));
        assert!(!is_off_diagonal(&t, 125, 10));
        assert!(!is_off_diagonal(&t, 499, 39));
    }
}
