use super::Matrix;
use crate::error::{invalid, Result};

/// Normalized Gaussian taps for offsets `-(window/2) ..= window/2`.
pub fn gaussian_kernel(sigma: f64, window: usize) -> Result<Vec<f64>> {
    if window % 2 == 0 {
        return Err(invalid(format!("smoothing window must be odd, got {window}")));
    }
    if !(sigma > 0.0) {
        return Err(invalid(format!("smoothing sigma must be positive, got {sigma}")));
    }
    let half = (window / 2) as isize;
    let mut taps: Vec<f64> = (-half..=half)
        .map(|o| (-((o * o) as f64) / (2.0 * sigma * sigma)).exp())
        .collect();
    let sum: f64 = taps.iter().sum();
    taps.iter_mut().for_each(|t| *t /= sum);
    Ok(taps)
}

/// Smooths each column of a `T x d` sequence along time.
///
/// Near the ends, taps falling outside the sequence are dropped and the
/// remaining ones renormalized.
pub fn gaussian_smooth_temporal(seq: &Matrix, sigma: f64, window: usize) -> Result<Matrix> {
    let taps = gaussian_kernel(sigma, window)?;
    if seq.rows() == 0 {
        return Err(invalid("cannot smooth an empty sequence"));
    }
    let t_len = seq.rows() as isize;
    let half = (window / 2) as isize;
    let mut out = Matrix::zeros(seq.rows(), seq.cols());
    for t in 0..t_len {
        let mut norm = 0.0;
        let centre = seq.row(t as usize);
        let row = out.row_mut(t as usize);
        for (i, &w) in taps.iter().enumerate() {
            let src = t + i as isize - half;
            if src < 0 || src >= t_len {
                continue;
            }
            norm += w;
            for ((o, &v), &c) in row.iter_mut().zip(seq.row(src as usize)).zip(centre) {
                *o += w * (v - c);
            }
        }
        // Weighted deviations from the centre sample keep constant
        // signals exactly constant.
        for (o, &c) in row.iter_mut().zip(centre) {
            *o = c + *o / norm;
        }
    }
    Ok(out)
}
