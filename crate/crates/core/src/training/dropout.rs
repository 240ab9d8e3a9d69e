use crate::error::{check_probability, invalid, Result};
use crate::network::{Batch, ModalitySample, PathParams};
use crate::numerics::{Matrix, SeededRng};

/// Zeroes each entry independently with probability `1 - keep`.
pub fn apply_input_dropout(values: &mut [f64], keep: f64, rng: &mut SeededRng) -> Result<()> {
    check_probability("input_keep", keep)?;
    if keep == 1.0 {
        return Ok(());
    }
    for v in values {
        if !rng.bernoulli(keep) {
            *v = 0.0;
        }
    }
    Ok(())
}

/// Input dropout over every modality of a batch.
pub fn apply_input_dropout_batch(batch: &mut Batch, keep: f64, rng: &mut SeededRng) -> Result<()> {
    for x in &mut batch.inputs {
        apply_input_dropout(x.as_mut_slice(), keep, rng)?;
    }
    Ok(())
}

/// Drops whole modalities of one sample: modality `k` survives with
/// probability `keep[k]`. Returns the drawn δ pattern, which is also
/// folded into the sample's presence mask.
pub fn apply_moddrop(sample: &mut ModalitySample, keep: &[f64], rng: &mut SeededRng) -> Result<Vec<bool>> {
    if keep.len() != sample.modalities() {
        return Err(invalid(format!(
            "{} keep probabilities for {} modalities",
            keep.len(),
            sample.modalities()
        )));
    }
    let mut delta = Vec::with_capacity(keep.len());
    for (k, &p) in keep.iter().enumerate() {
        check_probability("moddrop_keep", p)?;
        let on = rng.bernoulli(p);
        if !on {
            sample.drop_modality(k);
        }
        delta.push(on);
    }
    Ok(delta)
}

/// Per-sample ModDrop over a batch. Each row gets its own δ pattern.
pub fn apply_moddrop_batch(batch: &mut Batch, keep: &[f64], rng: &mut SeededRng) -> Result<()> {
    if keep.len() != batch.inputs.len() {
        return Err(invalid("one keep probability per modality is required"));
    }
    for &p in keep {
        check_probability("moddrop_keep", p)?;
    }
    for b in 0..batch.len() {
        for (k, &p) in keep.iter().enumerate() {
            if !rng.bernoulli(p) {
                batch.present[k][b] = false;
                batch.inputs[k].row_mut(b).fill(0.0);
            }
        }
    }
    Ok(())
}

/// 0/1 masks for the tanh layers of one path, `rows` examples each.
pub fn hidden_masks(path: &PathParams, rows: usize, keep: f64, rng: &mut SeededRng) -> Result<Vec<Matrix>> {
    check_probability("hidden_keep", keep)?;
    Ok(path
        .layers
        .iter()
        .map(|l| {
            let mut m = Matrix::zeros(rows, l.fan_out());
            for v in m.as_mut_slice() {
                *v = if rng.bernoulli(keep) { 1.0 } else { 0.0 };
            }
            m
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn keep_one_is_identity_and_zero_clears() {
        let mut rng = SeededRng::new(1);
        let orig: Vec<f64> = (0..50).map(|i| i as f64 + 1.0).collect();
        let mut v = orig.clone();
        apply_input_dropout(&mut v, 1.0, &mut rng).unwrap();
        assert_eq!(v, orig);
        apply_input_dropout(&mut v, 0.0, &mut rng).unwrap();
        assert!(v.iter().all(|&x| x == 0.0));
        assert!(apply_input_dropout(&mut v, 1.5, &mut rng).is_err());
    }

    #[test]
    fn input_keep_fraction_concentrates() {
        let mut rng = SeededRng::new(2);
        let mut v = vec![1.0; 100_000];
        apply_input_dropout(&mut v, 0.8, &mut rng).unwrap();
        let kept = v.iter().filter(|&&x| x != 0.0).count() as f64 / v.len() as f64;
        assert!((0.79..=0.81).contains(&kept), "{kept}");
    }

    #[test]
    fn moddrop_keep_one_drops_nothing() {
        let mut rng = SeededRng::new(3);
        let mut s = ModalitySample::new(vec![vec![1.0; 3]; 4], Some(0));
        let delta = apply_moddrop(&mut s, &[1.0; 4], &mut rng).unwrap();
        assert!(delta.iter().all(|&d| d));
        assert!(s.present.iter().all(|&d| d));
        assert!(apply_moddrop(&mut s, &[1.0; 3], &mut rng).is_err());
    }

    #[test]
    fn moddrop_drop_fraction_concentrates() {
        let mut rng = SeededRng::new(4);
        let n = 100_000;
        let samples = vec![ModalitySample::new(vec![vec![1.0; 2]; 4], Some(0)); n];
        let mut batch = Batch::from_samples(&samples).unwrap();
        apply_moddrop_batch(&mut batch, &[0.9; 4], &mut rng).unwrap();
        for k in 0..4 {
            let dropped = batch.present[k].iter().filter(|&&p| !p).count() as f64 / n as f64;
            assert!((0.09..=0.11).contains(&dropped), "modality {k}: {dropped}");
            for b in 0..n {
                if !batch.present[k][b] {
                    assert!(batch.inputs[k].row(b).iter().all(|&x| x == 0.0));
                }
            }
        }
    }

    #[test]
    fn dropped_sample_is_zeroed_and_marked() {
        let mut rng = SeededRng::new(5);
        let mut s = ModalitySample::new(vec![vec![2.0; 3], vec![1.0; 2]], Some(1));
        let delta = apply_moddrop(&mut s, &[0.0, 1.0], &mut rng).unwrap();
        assert_eq!(delta, vec![false, true]);
        assert_eq!(s.features[0], vec![0.0; 3]);
        assert_eq!(s.present, vec![false, true]);
    }
}
