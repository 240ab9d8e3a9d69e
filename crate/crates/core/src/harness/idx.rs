//! Reader and writer for the IDX files MNIST ships in.

use std::path::Path;

use crate::error::{Error, Result};
use crate::numerics::Matrix;

const IMAGE_MAGIC: u32 = 0x0000_0803;
const LABEL_MAGIC: u32 = 0x0000_0801;

/// Raw unsigned-byte images, row-major, `count` images of `rows x cols`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IdxImages {
    pub rows: usize,
    pub cols: usize,
    pub pixels: Vec<u8>,
}

impl IdxImages {
    pub fn count(&self) -> usize {
        self.pixels.len() / (self.rows * self.cols).max(1)
    }

    pub fn image(&self, i: usize) -> &[u8] {
        let n = self.rows * self.cols;
        &self.pixels[i * n..(i + 1) * n]
    }

    /// One image per row with pixels scaled to [0, 1].
    pub fn to_unit_matrix(&self) -> Matrix {
        let data = self.pixels.iter().map(|&p| f64::from(p) / 255.0).collect();
        Matrix::from_vec(self.count(), self.rows * self.cols, data).expect("consistent size")
    }
}

fn format_error(path: &str, offset: usize, detail: impl Into<String>) -> Error {
    Error::Format {
        path: path.to_owned(),
        offset: offset as u64,
        detail: detail.into(),
    }
}

fn read_u32(bytes: &[u8], offset: usize, path: &str) -> Result<u32> {
    bytes
        .get(offset..offset + 4)
        .map(|b| u32::from_be_bytes([b[0], b[1], b[2], b[3]]))
        .ok_or_else(|| {
            format_error(
                path,
                bytes.len(),
                format!("header truncated: expected at least {} bytes, found {}", offset + 4, bytes.len()),
            )
        })
}

fn parse<'a>(bytes: &'a [u8], magic: u32, path: &str) -> Result<(Vec<usize>, &'a [u8])> {
    let found = read_u32(bytes, 0, path)?;
    if found != magic {
        return Err(format_error(
            path,
            0,
            format!("bad magic number {found:#010x}, expected {magic:#010x}"),
        ));
    }
    let ndim = (magic & 0xff) as usize;
    let dims = (0..ndim)
        .map(|d| read_u32(bytes, 4 + 4 * d, path).map(|v| v as usize))
        .collect::<Result<Vec<_>>>()?;
    let header = 4 + 4 * ndim;
    let expected = header + dims.iter().product::<usize>();
    if bytes.len() != expected {
        return Err(format_error(
            path,
            bytes.len().min(expected),
            format!("expected {expected} bytes, found {}", bytes.len()),
        ));
    }
    Ok((dims, &bytes[header..]))
}

pub fn parse_idx_images(bytes: &[u8], path: &str) -> Result<IdxImages> {
    let (dims, data) = parse(bytes, IMAGE_MAGIC, path)?;
    Ok(IdxImages {
        rows: dims[1],
        cols: dims[2],
        pixels: data.to_vec(),
    })
}

pub fn parse_idx_labels(bytes: &[u8], path: &str) -> Result<Vec<u8>> {
    let (_, data) = parse(bytes, LABEL_MAGIC, path)?;
    Ok(data.to_vec())
}

pub fn encode_idx_images(images: &IdxImages) -> Vec<u8> {
    let mut out = Vec::with_capacity(16 + images.pixels.len());
    for v in [IMAGE_MAGIC, images.count() as u32, images.rows as u32, images.cols as u32] {
        out.extend_from_slice(&v.to_be_bytes());
    }
    out.extend_from_slice(&images.pixels);
    out
}

pub fn encode_idx_labels(labels: &[u8]) -> Vec<u8> {
    let mut out = Vec::with_capacity(8 + labels.len());
    out.extend_from_slice(&LABEL_MAGIC.to_be_bytes());
    out.extend_from_slice(&(labels.len() as u32).to_be_bytes());
    out.extend_from_slice(labels);
    out
}

pub fn read_idx_images(path: &Path) -> Result<IdxImages> {
    parse_idx_images(&std::fs::read(path)?, &path.display().to_string())
}

pub fn read_idx_labels(path: &Path) -> Result<Vec<u8>> {
    parse_idx_labels(&std::fs::read(path)?, &path.display().to_string())
}

/// Images scaled to [0, 1] with their labels.
#[derive(Debug, Clone, PartialEq)]
pub struct LabelledImages {
    pub rows: usize,
    pub cols: usize,
    /// One image per row.
    pub images: Matrix,
    pub labels: Vec<usize>,
}

/// Loads an image file and its label file, checking that counts agree.
pub fn load_idx(images: &Path, labels: &Path) -> Result<LabelledImages> {
    let imgs = read_idx_images(images)?;
    let lbls = read_idx_labels(labels)?;
    if lbls.len() != imgs.count() {
        return Err(format_error(
            &labels.display().to_string(),
            4,
            format!("{} labels for {} images", lbls.len(), imgs.count()),
        ));
    }
    Ok(LabelledImages {
        rows: imgs.rows,
        cols: imgs.cols,
        images: imgs.to_unit_matrix(),
        labels: lbls.into_iter().map(usize::from).collect(),
    })
}

/// The four standard MNIST files inside `dir`.
pub struct MnistFiles {
    pub train_images: std::path::PathBuf,
    pub train_labels: std::path::PathBuf,
    pub test_images: std::path::PathBuf,
    pub test_labels: std::path::PathBuf,
}

impl MnistFiles {
    pub fn in_dir(dir: &Path) -> Self {
        Self {
            train_images: dir.join("train-images-idx3-ubyte"),
            train_labels: dir.join("train-labels-idx1-ubyte"),
            test_images: dir.join("t10k-images-idx3-ubyte"),
            test_labels: dir.join("t10k-labels-idx1-ubyte"),
        }
    }

    pub fn load(&self) -> Result<(LabelledImages, LabelledImages)> {
        Ok((
            load_idx(&self.train_images, &self.train_labels)?,
            load_idx(&self.test_images, &self.test_labels)?,
        ))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> IdxImages {
        IdxImages {
            rows: 2,
            cols: 3,
            pixels: (0..12).map(|v| (v * 20) as u8).collect(),
        }
    }

    #[test]
    fn images_round_trip() {
        let bytes = encode_idx_images(&sample());
        let back = parse_idx_images(&bytes, "mem").unwrap();
        assert_eq!(back, sample());
        assert_eq!(back.count(), 2);
        assert_eq!(encode_idx_images(&back), bytes);
    }

    #[test]
    fn labels_round_trip() {
        let bytes = encode_idx_labels(&[3, 1, 4]);
        assert_eq!(parse_idx_labels(&bytes, "mem").unwrap(), vec![3, 1, 4]);
    }

    #[test]
    fn truncation_names_byte_counts() {
        let mut bytes = encode_idx_images(&sample());
        bytes.truncate(bytes.len() - 5);
        let err = parse_idx_images(&bytes, "mem").unwrap_err().to_string();
        assert!(err.contains("expected 28 bytes, found 23"), "{err}");
        let err = parse_idx_images(&bytes[..6], "mem").unwrap_err().to_string();
        assert!(err.contains("header truncated"), "{err}");
    }

    #[test]
    fn bad_magic_is_rejected_at_offset_zero() {
        let bytes = encode_idx_labels(&[1]);
        match parse_idx_images(&bytes, "mem") {
            Err(Error::Format { offset, .. }) => assert_eq!(offset, 0),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn pixels_scale_to_unit_interval() {
        let m = sample().to_unit_matrix();
        assert_eq!(m.shape(), crate::error::Shape(2, 6));
        assert_eq!(m[(0, 0)], 0.0);
        assert!((m[(1, 5)] - 220.0 / 255.0).abs() < 1e-15);
    }
}
