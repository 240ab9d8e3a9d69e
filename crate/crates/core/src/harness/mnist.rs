//! The MNIST "four quarters" setting: each 14x14 quarter of a digit is
//! treated as a separate modality.

use crate::error::{check_probability, invalid, Result};
use crate::numerics::{Matrix, SeededRng};
use crate::training::Dataset;

use super::idx::LabelledImages;

pub const SIDE: usize = 28;
pub const HALF: usize = 14;
pub const QUARTER_LEN: usize = HALF * HALF;
pub const QUARTERS: usize = 4;

/// Quarter order: top-left, top-right, bottom-left, bottom-right.
pub const QUARTER_NAMES: [&str; QUARTERS] = ["TL", "TR", "BL", "BR"];

#[derive(Debug, Clone, PartialEq)]
pub struct QuarteredImage {
    pub quarters: [Vec<f64>; QUARTERS],
    pub label: usize,
}

/// Quarter index and offset within it of pixel `(r, c)`.
fn locate(r: usize, c: usize) -> (usize, usize) {
    ((r / HALF) * 2 + c / HALF, (r % HALF) * HALF + c % HALF)
}

pub fn quarter_split(image: &[f64], label: usize) -> Result<QuarteredImage> {
    if image.len() != SIDE * SIDE {
        return Err(invalid(format!("expected a 28x28 image, got {} pixels", image.len())));
    }
    let mut quarters: [Vec<f64>; QUARTERS] = std::array::from_fn(|_| vec![0.0; QUARTER_LEN]);
    for r in 0..SIDE {
        for c in 0..SIDE {
            let (q, i) = locate(r, c);
            quarters[q][i] = image[r * SIDE + c];
        }
    }
    Ok(QuarteredImage { quarters, label })
}

pub fn reassemble(q: &QuarteredImage) -> Vec<f64> {
    let mut image = vec![0.0; SIDE * SIDE];
    for r in 0..SIDE {
        for c in 0..SIDE {
            let (k, i) = locate(r, c);
            image[r * SIDE + c] = q.quarters[k][i];
        }
    }
    image
}

fn check_segments(segments: &[usize]) -> Result<()> {
    match segments.iter().find(|&&s| s >= QUARTERS) {
        Some(s) => Err(invalid(format!("segment {s} out of range 0..4"))),
        None => Ok(()),
    }
}

/// Replaces the listed quarters with zeros.
pub fn occlude(q: &QuarteredImage, segments: &[usize]) -> Result<QuarteredImage> {
    check_segments(segments)?;
    let mut out = q.clone();
    for &s in segments {
        out.quarters[s].fill(0.0);
    }
    Ok(out)
}

/// Sets each pixel of the listed quarters to 0 with probability `rate`.
pub fn pepper_noise(q: &QuarteredImage, segments: &[usize], rate: f64, rng: &mut SeededRng) -> Result<QuarteredImage> {
    check_segments(segments)?;
    check_probability("pepper rate", rate)?;
    let mut out = q.clone();
    for &s in segments {
        pepper_slice(&mut out.quarters[s], rate, rng);
    }
    Ok(out)
}

fn pepper_slice(values: &mut [f64], rate: f64, rng: &mut SeededRng) {
    for v in values {
        if rng.bernoulli(rate) {
            *v = 0.0;
        }
    }
}

/// Splits rows `range` of a 28x28 image set into a four-modality dataset.
pub fn quarter_dataset(images: &LabelledImages, range: std::ops::Range<usize>) -> Result<Dataset> {
    if images.rows != SIDE || images.cols != SIDE {
        return Err(invalid(format!("expected 28x28 images, got {}x{}", images.rows, images.cols)));
    }
    if range.end > images.labels.len() {
        return Err(invalid("image range out of bounds"));
    }
    let n = range.len();
    let mut inputs: Vec<Matrix> = (0..QUARTERS).map(|_| Matrix::zeros(n, QUARTER_LEN)).collect();
    for (row, i) in range.clone().enumerate() {
        let img = images.images.row(i);
        for r in 0..SIDE {
            for c in 0..SIDE {
                let (q, j) = locate(r, c);
                inputs[q][(row, j)] = img[r * SIDE + c];
            }
        }
    }
    Dataset::new(inputs, images.labels[range].to_vec())
}

/// Test-time occlusion: the listed quarters are zeroed and marked absent.
pub fn occlude_dataset(data: &Dataset, segments: &[usize]) -> Result<Dataset> {
    check_segments(segments)?;
    let mut out = data.clone();
    for &s in segments {
        for i in 0..out.len() {
            out.mark_absent(s, i);
        }
    }
    Ok(out)
}

/// Pepper noise on the listed quarters of every example; quarters stay present.
pub fn pepper_dataset(data: &Dataset, segments: &[usize], rate: f64, rng: &mut SeededRng) -> Result<Dataset> {
    check_segments(segments)?;
    check_probability("pepper rate", rate)?;
    let mut out = data.clone();
    for &s in segments {
        pepper_slice(out.inputs[s].as_mut_slice(), rate, rng);
    }
    Ok(out)
}

/// All `m`-element subsets of `0..n` in lexicographic order.
pub fn subsets(n: usize, m: usize) -> Vec<Vec<usize>> {
    fn go(start: usize, n: usize, m: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == m {
            out.push(cur.clone());
            return;
        }
        for i in start..n {
            cur.push(i);
            go(i + 1, n, m, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    go(0, n, m, &mut Vec::new(), &mut out);
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn random_image(rng: &mut SeededRng) -> Vec<f64> {
        (0..SIDE * SIDE).map(|_| rng.below(256) as f64 / 255.0).collect()
    }

    #[test]
    fn corners_land_in_expected_quarters() {
        let mut img = vec![0.0; SIDE * SIDE];
        img[0] = 1.0;
        img[27] = 2.0;
        img[28 * 14] = 3.0;
        img[28 * 28 - 1] = 4.0;
        let q = quarter_split(&img, 0).unwrap();
        assert_eq!(q.quarters[0][0], 1.0);
        assert_eq!(q.quarters[1][13], 2.0);
        assert_eq!(q.quarters[2][0], 3.0);
        assert_eq!(q.quarters[3][195], 4.0);
        assert!(q.quarters.iter().all(|v| v.len() == 196));
    }

    #[test]
    fn reassembly_is_identity() {
        let mut rng = SeededRng::new(1);
        for _ in 0..100 {
            let img = random_image(&mut rng);
            assert_eq!(reassemble(&quarter_split(&img, 3).unwrap()), img);
        }
        assert!(quarter_split(&[0.0; 10], 0).is_err());
    }

    #[test]
    fn occlusion_cases() {
        let mut rng = SeededRng::new(2);
        let q = quarter_split(&random_image(&mut rng), 1).unwrap();
        assert_eq!(occlude(&q, &[]).unwrap(), q);
        let all = occlude(&q, &[0, 1, 2, 3]).unwrap();
        assert!(all.quarters.iter().flatten().all(|&v| v == 0.0));
        assert!(occlude(&q, &[4]).is_err());
    }

    #[test]
    fn pepper_cases() {
        let mut rng = SeededRng::new(3);
        let q = quarter_split(&vec![1.0; SIDE * SIDE], 1).unwrap();
        assert_eq!(pepper_noise(&q, &[0, 1], 0.0, &mut rng).unwrap(), q);
        let full = pepper_noise(&q, &[2], 1.0, &mut rng).unwrap();
        assert!(full.quarters[2].iter().all(|&v| v == 0.0));
        assert_eq!(full.quarters[0], q.quarters[0]);
        let mut pixels = vec![1.0; 100_000];
        pepper_slice(&mut pixels, 0.5, &mut rng);
        let zeroed = pixels.iter().filter(|&&v| v == 0.0).count() as f64 / 1e5;
        assert!((0.49..=0.51).contains(&zeroed), "{zeroed}");
    }

    #[test]
    fn subset_counts() {
        assert_eq!(subsets(4, 0), vec![Vec::<usize>::new()]);
        assert_eq!(subsets(4, 1).len(), 4);
        assert_eq!(subsets(4, 2).len(), 6);
        assert_eq!(subsets(4, 3).len(), 4);
        assert_eq!(subsets(4, 4), vec![vec![0, 1, 2, 3]]);
    }
}
