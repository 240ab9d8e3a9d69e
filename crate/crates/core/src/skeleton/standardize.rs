use crate::error::{invalid, Result};
use crate::numerics::Matrix;

/// Per-feature zero-mean, unit-variance scaling fitted on training rows.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct FeatureStandardizer {
    fitted: Option<Fitted>,
}

#[derive(Debug, Clone, PartialEq)]
struct Fitted {
    mean: Vec<f64>,
    std: Vec<f64>,
    constant: Vec<bool>,
}

impl FeatureStandardizer {
    pub fn new() -> Self {
        Self::default()
    }

    /// Fits on the rows of `data`. Features with zero (population)
    /// variance keep std = 1 and are flagged.
    pub fn fit(&mut self, data: &Matrix) -> Result<()> {
        if data.rows() == 0 {
            return Err(invalid("cannot fit a standardizer on zero rows"));
        }
        let n = data.rows() as f64;
        let mean: Vec<f64> = data.column_sums().iter().map(|s| s / n).collect();
        let mut var = vec![0.0; data.cols()];
        for r in 0..data.rows() {
            for ((v, &x), &m) in var.iter_mut().zip(data.row(r)).zip(&mean) {
                *v += (x - m) * (x - m);
            }
        }
        let constant: Vec<bool> = var.iter().map(|&v| !(v / n > 0.0)).collect();
        let std = var
            .iter()
            .zip(&constant)
            .map(|(&v, &c)| if c { 1.0 } else { (v / n).sqrt() })
            .collect();
        self.fitted = Some(Fitted { mean, std, constant });
        Ok(())
    }

    pub fn fitted(data: &Matrix) -> Result<Self> {
        let mut s = Self::new();
        s.fit(data)?;
        Ok(s)
    }

    pub fn from_parts(mean: Vec<f64>, std: Vec<f64>) -> Result<Self> {
        if mean.len() != std.len() {
            return Err(invalid("mean and std lengths differ"));
        }
        if std.iter().any(|&s| !(s > 0.0) || !s.is_finite()) {
            return Err(invalid("standard deviations must be positive and finite"));
        }
        let constant = vec![false; mean.len()];
        Ok(Self {
            fitted: Some(Fitted { mean, std, constant }),
        })
    }

    fn state(&self) -> Result<&Fitted> {
        self.fitted
            .as_ref()
            .ok_or_else(|| invalid("standardizer applied before it was fitted"))
    }

    pub fn mean(&self) -> Result<&[f64]> {
        Ok(&self.state()?.mean)
    }

    pub fn std(&self) -> Result<&[f64]> {
        Ok(&self.state()?.std)
    }

    /// Indices of features that were constant during fitting.
    pub fn constant_features(&self) -> Result<Vec<usize>> {
        Ok(self.state()?.constant.iter().enumerate().filter(|(_, &c)| c).map(|(i, _)| i).collect())
    }

    pub fn apply(&self, row: &[f64]) -> Result<Vec<f64>> {
        let s = self.state()?;
        if row.len() != s.mean.len() {
            return Err(invalid(format!("expected {} features, got {}", s.mean.len(), row.len())));
        }
        Ok(row
            .iter()
            .zip(&s.mean)
            .zip(&s.std)
            .map(|((x, m), sd)| (x - m) / sd)
            .collect())
    }

    pub fn apply_matrix(&self, data: &Matrix) -> Result<Matrix> {
        let mut out = Matrix::zeros(data.rows(), data.cols());
        for r in 0..data.rows() {
            out.row_mut(r).copy_from_slice(&self.apply(data.row(r))?);
        }
        Ok(out)
    }
}
