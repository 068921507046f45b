//! Dataset ingestion, label export and checkpoint persistence.

mod blobs;
pub mod checkpoint;
mod idx;
mod table;

use std::fs;
use std::io::Write;
use std::path::Path;

use crate::backbone::Shape;
use crate::error::{Error, Result};

pub use blobs::gen_blobs;
pub use checkpoint::{load_checkpoint, save_checkpoint, Checkpoint, Progress};
pub use idx::{load_idx, IDX_IMAGES_MAGIC, IDX_LABELS_MAGIC};
pub use table::{load_csv, parse_csv};

/// Raw sample storage. Byte pixels are scaled by `1/255` on access.
#[derive(Debug, Clone, PartialEq)]
pub enum Pixels {
    Bytes(Vec<u8>),
    Floats(Vec<f64>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    name: String,
    shape: Shape,
    len: usize,
    pixels: Pixels,
    labels: Option<Vec<usize>>,
}

impl Dataset {
    pub fn new(
        name: impl Into<String>,
        shape: Shape,
        pixels: Pixels,
        labels: Option<Vec<usize>>,
    ) -> Result<Self> {
        if shape.is_empty() {
            return Err(Error::invalid(format!(
                "dataset sample shape {shape} is empty"
            )));
        }
        let total = match &pixels {
            Pixels::Bytes(b) => b.len(),
            Pixels::Floats(f) => f.len(),
        };
        if total % shape.len() != 0 {
            return Err(Error::Consistency(format!(
                "{total} values do not divide into samples of shape {shape}"
            )));
        }
        if let Pixels::Floats(f) = &pixels {
            if f.iter().any(|v| !v.is_finite()) {
                return Err(Error::NonFinite("dataset samples"));
            }
        }
        let len = total / shape.len();
        if let Some(l) = &labels {
            if l.len() != len {
                return Err(Error::Consistency(format!(
                    "{} labels for {len} samples",
                    l.len()
                )));
            }
        }
        Ok(Self {
            name: name.into(),
            shape,
            len,
            pixels,
            labels,
        })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn shape(&self) -> Shape {
        self.shape
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn labels(&self) -> Option<&[usize]> {
        self.labels.as_deref()
    }

    pub fn pixels(&self) -> &Pixels {
        &self.pixels
    }

    /// Sample `i` as floats; byte data is divided by 255.
    pub fn sample(&self, i: usize) -> Vec<f64> {
        let d = self.shape.len();
        match &self.pixels {
            Pixels::Bytes(b) => b[i * d..(i + 1) * d]
                .iter()
                .map(|&p| p as f64 / 255.0)
                .collect(),
            Pixels::Floats(f) => f[i * d..(i + 1) * d].to_vec(),
        }
    }

    /// Keeps the first `n` samples.
    pub fn truncate(&mut self, n: usize) {
        if n >= self.len {
            return;
        }
        let d = self.shape.len();
        match &mut self.pixels {
            Pixels::Bytes(b) => b.truncate(n * d),
            Pixels::Floats(f) => f.truncate(n * d),
        }
        if let Some(l) = &mut self.labels {
            l.truncate(n);
        }
        self.len = n;
    }
}

/// Writes via a temporary file in the same directory, then renames it over
/// `path`, so readers never observe a partial file.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = path
        .parent()
        .filter(|p| !p.as_os_str().is_empty())
        .unwrap_or(Path::new("."));
    let file_name = path
        .file_name()
        .ok_or_else(|| Error::invalid(format!("not a file path: {}", path.display())))?
        .to_string_lossy();
    let tmp = dir.join(format!(".{file_name}.tmp-{}", std::process::id()));
    let write = || -> std::io::Result<()> {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
        fs::rename(&tmp, path)
    };
    write().map_err(|e| {
        let _ = fs::remove_file(&tmp);
        Error::io(path, e)
    })
}

/// `index,label` per line.
pub fn format_labels(labels: &[usize]) -> String {
    let mut out = String::with_capacity(labels.len() * 8);
    for (i, l) in labels.iter().enumerate() {
        out.push_str(&format!("{i},{l}\n"));
    }
    out
}

pub fn write_labels(path: &Path, labels: &[usize]) -> Result<()> {
    write_atomic(path, format_labels(labels).as_bytes())
}

/// Reads an `index,label` file. Indices must run 0, 1, 2, ... in order.
pub fn read_labels(path: &Path) -> Result<Vec<usize>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_labels(&text)
}

pub fn parse_labels(text: &str) -> Result<Vec<usize>> {
    let mut labels = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() {
            continue;
        }
        let bad = |message: String| Error::Parse {
            line: i + 1,
            message,
        };
        let (idx, label) = line
            .split_once(',')
            .ok_or_else(|| bad(format!("expected `index,label`, got `{line}`")))?;
        let idx: usize = idx
            .trim()
            .parse()
            .map_err(|e| bad(format!("bad index: {e}")))?;
        if idx != labels.len() {
            return Err(bad(format!("expected index {}, got {idx}", labels.len())));
        }
        labels.push(
            label
                .trim()
                .parse()
                .map_err(|e| bad(format!("bad label: {e}")))?,
        );
    }
    Ok(labels)
}
