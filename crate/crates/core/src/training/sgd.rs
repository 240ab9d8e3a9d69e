use crate::error::{invalid, Result};
use crate::network::ParameterGroups;

/// Plain gradient descent: `w <- w - lr * g` over every parameter group.
/// The two structures must have identical group layouts.
pub fn sgd_step<P: ParameterGroups>(params: &mut P, grads: &P, learning_rate: f64) -> Result<()> {
    let mut flat: Vec<(String, Vec<f64>)> = Vec::new();
    grads.for_each_group(&mut |name, g| flat.push((name.to_owned(), g.to_vec())));
    let mut idx = 0;
    let mut mismatch = None;
    params.for_each_group_mut(&mut |name, w| {
        match flat.get(idx) {
            Some((gname, g)) if gname == name && g.len() == w.len() => {
                if learning_rate != 0.0 {
                    for (wi, gi) in w.iter_mut().zip(g) {
                        *wi -= learning_rate * gi;
                    }
                }
            }
            _ if mismatch.is_none() => mismatch = Some(name.to_owned()),
            _ => {}
        }
        idx += 1;
    });
    if let Some(name) = mismatch {
        return Err(invalid(format!("gradient layout differs at `{name}`")));
    }
    if idx != flat.len() {
        return Err(invalid("gradient has extra parameter groups"));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::{Dense, Params, PathParams, PathSpec};
    use crate::numerics::Matrix;

    fn dense(w: Vec<f64>, b: Vec<f64>, rows: usize, cols: usize) -> PathParams {
        PathParams {
            layers: vec![],
            head: Dense {
                weights: Matrix::from_vec(rows, cols, w).unwrap(),
                bias: b,
            },
        }
    }

    #[test]
    fn scalar_step() {
        let mut p = dense(vec![1.0], vec![0.0], 1, 1);
        let g = dense(vec![2.0], vec![0.0], 1, 1);
        sgd_step(&mut p, &g, 0.1).unwrap();
        assert!((p.head.weights[(0, 0)] - 0.8).abs() < 1e-15);
    }

    #[test]
    fn two_by_two_matches_hand_computation() {
        let mut p = dense(vec![1.0, -2.0, 0.5, 3.0], vec![0.1, -0.1], 2, 2);
        let g = dense(vec![0.5, 1.0, -1.0, 2.0], vec![1.0, -2.0], 2, 2);
        sgd_step(&mut p, &g, 0.5).unwrap();
        assert_eq!(p.head.weights.as_slice(), &[0.75, -2.5, 1.0, 2.0]);
        assert!((p.head.bias[0] + 0.4).abs() < 1e-15 && (p.head.bias[1] - 0.9).abs() < 1e-15);
    }

    #[test]
    fn zero_gradient_keeps_params() {
        let t = crate::network::Topology::new(
            vec![PathSpec::new(3, vec![4]), PathSpec::new(2, vec![2])],
            3,
            crate::network::SharedActivation::Tanh,
        )
        .unwrap();
        let mut rng = crate::numerics::SeededRng::new(1);
        let mut p = Params::random(&t, &mut rng);
        let before = p.clone();
        let zero = p.zeros_like();
        sgd_step(&mut p, &zero, 0.3).unwrap();
        assert_eq!(p, before);
    }

    #[test]
    fn layout_mismatch_is_rejected() {
        let mut p = dense(vec![1.0], vec![0.0], 1, 1);
        let g = dense(vec![1.0, 2.0], vec![0.0, 0.0], 1, 2);
        assert!(sgd_step(&mut p, &g, 0.1).is_err());
    }
}
