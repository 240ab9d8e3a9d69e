//! Model and matrix files.
//!
//! Both formats are a UTF-8 header of `key value` lines closed by a line
//! `end`, followed by a payload of little-endian IEEE-754 f64 values.
//! A model header reads:
//!
//! ```text
//! moddrop-model
//! version 1
//! classes 10
//! shared_activation tanh
//! path 196 125                       one per modality: input width, hidden widths
//! gamma 1
//! input_keep 0.8
//! group path0.layer0.weights 24500   one per parameter group, payload order
//! ...
//! checksum 3f1c09a2                  CRC-32 of the payload, hex
//! end
//! ```
//!
//! A matrix file has the magic `moddrop-matrix` and the keys `version`,
//! `rows`, `cols` and `checksum`; the payload is row-major.

use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};
use crate::network::{ParameterGroups, Params, PathSpec, SharedActivation, Topology};
use crate::numerics::Matrix;

pub const MODEL_MAGIC: &str = "moddrop-model";
pub const MATRIX_MAGIC: &str = "moddrop-matrix";
pub const FORMAT_VERSION: u32 = 1;

/// Network with the input keep probability used to scale inputs at
/// evaluation time.
#[derive(Debug, Clone, PartialEq)]
pub struct SavedModel {
    pub topology: Topology,
    pub params: Params,
    pub input_keep: f64,
}

fn header_err(field: &str, detail: impl Into<String>) -> Error {
    Error::ModelHeader {
        field: field.to_string(),
        detail: detail.into(),
    }
}

fn payload_bytes(values: &[f64], out: &mut Vec<u8>) {
    for v in values {
        out.extend_from_slice(&v.to_le_bytes());
    }
}

pub fn encode_model(model: &SavedModel) -> Result<Vec<u8>> {
    model.params.validate(&model.topology)?;
    let t = &model.topology;
    let mut payload = Vec::with_capacity(model.params.parameter_count() * 8);
    let mut groups = String::new();
    model.params.for_each_group(&mut |name, v| {
        let _ = writeln!(groups, "group {name} {}", v.len());
        payload_bytes(v, &mut payload);
    });
    let mut h = String::new();
    let _ = writeln!(h, "{MODEL_MAGIC}\nversion {FORMAT_VERSION}");
    let _ = writeln!(h, "classes {}\nshared_activation {}", t.classes(), t.shared_activation());
    for p in t.paths() {
        let hidden: Vec<String> = p.hidden.iter().map(|n| n.to_string()).collect();
        let _ = writeln!(h, "path {} {}", p.input_dim, hidden.join(" "));
    }
    let _ = writeln!(h, "gamma {}\ninput_keep {}", model.params.shared.gamma(), model.input_keep);
    h.push_str(&groups);
    let _ = writeln!(h, "checksum {:08x}\nend", crc32fast::hash(&payload));
    let mut out = h.into_bytes();
    out.extend_from_slice(&payload);
    Ok(out)
}

/// Header lines and the payload that follows them.
struct Sections<'a> {
    lines: std::iter::Peekable<std::vec::IntoIter<&'a str>>,
    payload: &'a [u8],
}

impl<'a> Sections<'a> {
    fn split(bytes: &'a [u8], magic: &str) -> Result<Self> {
        let end = bytes
            .windows(5)
            .position(|w| w == b"\nend\n")
            .ok_or_else(|| header_err("end", "header terminator not found"))?;
        let text = std::str::from_utf8(&bytes[..end]).map_err(|_| header_err("header", "not valid UTF-8"))?;
        let mut lines: Vec<&str> = text.lines().collect();
        if lines.first() != Some(&magic) {
            return Err(header_err("magic", format!("expected `{magic}`")));
        }
        lines.remove(0);
        let mut s = Self {
            lines: lines.into_iter().peekable(),
            payload: &bytes[end + 5..],
        };
        let version: u32 = s.value("version")?;
        if version != FORMAT_VERSION {
            return Err(header_err("version", format!("unsupported version {version}, expected {FORMAT_VERSION}")));
        }
        Ok(s)
    }

    /// The words after `key` on the next line.
    fn words(&mut self, key: &str) -> Result<Vec<&'a str>> {
        let line = self.lines.next().ok_or_else(|| header_err(key, "missing"))?;
        let mut words = line.split_whitespace();
        if words.next() != Some(key) {
            return Err(header_err(key, format!("expected `{key}`, found `{line}`")));
        }
        Ok(words.collect())
    }

    fn value<T: std::str::FromStr>(&mut self, key: &str) -> Result<T> {
        let words = self.words(key)?;
        match words.as_slice() {
            [v] => v.parse().map_err(|_| header_err(key, format!("cannot parse `{v}`"))),
            _ => Err(header_err(key, "expected exactly one value")),
        }
    }

    fn next_is(&mut self, key: &str) -> bool {
        self.lines.peek().is_some_and(|l| l.split_whitespace().next() == Some(key))
    }

    fn finish(mut self, expected_values: usize) -> Result<Vec<f64>> {
        let checksum = self.words("checksum")?;
        let stored = match checksum.as_slice() {
            [v] => u32::from_str_radix(v, 16).map_err(|_| header_err("checksum", format!("cannot parse `{v}`")))?,
            _ => return Err(header_err("checksum", "expected exactly one value")),
        };
        if let Some(extra) = self.lines.next() {
            return Err(header_err("end", format!("unexpected line `{extra}`")));
        }
        if self.payload.len() != expected_values * 8 {
            return Err(header_err(
                "payload",
                format!("expected {} bytes, found {}", expected_values * 8, self.payload.len()),
            ));
        }
        if crc32fast::hash(self.payload) != stored {
            return Err(header_err("checksum", "payload does not match the stored checksum"));
        }
        Ok(self
            .payload
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
            .collect())
    }
}

pub fn decode_model(bytes: &[u8]) -> Result<SavedModel> {
    let mut s = Sections::split(bytes, MODEL_MAGIC)?;
    let classes: usize = s.value("classes")?;
    let activation: SharedActivation = s.value("shared_activation")?;
    let mut paths = Vec::new();
    while s.next_is("path") {
        let dims = s
            .words("path")?
            .iter()
            .map(|w| w.parse::<usize>())
            .collect::<std::result::Result<Vec<_>, _>>()
            .map_err(|_| header_err("path", "widths must be integers"))?;
        match dims.split_first() {
            Some((&input, hidden)) if !hidden.is_empty() => paths.push(PathSpec::new(input, hidden.to_vec())),
            _ => return Err(header_err("path", "need an input width and at least one hidden width")),
        }
    }
    let topology = Topology::new(paths, classes, activation).map_err(|e| header_err("path", e.to_string()))?;
    let gamma: f64 = s.value("gamma")?;
    let input_keep: f64 = s.value("input_keep")?;
    if !(0.0..=1.0).contains(&input_keep) {
        return Err(header_err("input_keep", format!("{input_keep} is not a probability")));
    }
    let mut params = Params::zeros(&topology);
    params.shared.set_gamma(gamma).map_err(|e| header_err("gamma", e.to_string()))?;

    let mut expected = Vec::new();
    params.for_each_group(&mut |name, v| expected.push((name.to_string(), v.len())));
    for (name, len) in &expected {
        let words = s.words("group")?;
        if words.as_slice() != [name.as_str(), len.to_string().as_str()] {
            return Err(header_err("group", format!("expected `{name} {len}`, found `{}`", words.join(" "))));
        }
    }
    let total = expected.iter().map(|e| e.1).sum();
    let values = s.finish(total)?;
    let mut offset = 0;
    params.for_each_group_mut(&mut |_, v| {
        v.copy_from_slice(&values[offset..offset + v.len()]);
        offset += v.len();
    });
    Ok(SavedModel {
        topology,
        params,
        input_keep,
    })
}

pub fn save_model(model: &SavedModel, path: &Path) -> Result<()> {
    std::fs::write(path, encode_model(model)?)?;
    Ok(())
}

pub fn load_model(path: &Path) -> Result<SavedModel> {
    decode_model(&std::fs::read(path)?)
}

pub fn encode_matrix(m: &Matrix) -> Vec<u8> {
    let mut payload = Vec::with_capacity(m.as_slice().len() * 8);
    payload_bytes(m.as_slice(), &mut payload);
    let mut out = format!(
        "{MATRIX_MAGIC}\nversion {FORMAT_VERSION}\nrows {}\ncols {}\nchecksum {:08x}\nend\n",
        m.rows(),
        m.cols(),
        crc32fast::hash(&payload)
    )
    .into_bytes();
    out.extend_from_slice(&payload);
    out
}

pub fn decode_matrix(bytes: &[u8]) -> Result<Matrix> {
    let mut s = Sections::split(bytes, MATRIX_MAGIC)?;
    let rows: usize = s.value("rows")?;
    let cols: usize = s.value("cols")?;
    let n = rows
        .checked_mul(cols)
        .ok_or_else(|| header_err("cols", "matrix size overflows"))?;
    Matrix::from_vec(rows, cols, s.finish(n)?)
}

pub fn save_matrix(m: &Matrix, path: &Path) -> Result<()> {
    std::fs::write(path, encode_matrix(m))?;
    Ok(())
}

pub fn load_matrix(path: &Path) -> Result<Matrix> {
    decode_matrix(&std::fs::read(path)?)
}
