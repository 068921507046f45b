//! Binary checkpoints.
//!
//! Layout (all integers little-endian):
//!
//! ```text
//! "DRIFTCLU"          8-byte magic
//! version             u32
//! payload             sequence of sections, each `u64 length` + bytes
//! crc                 u32, CRC-32 (IEEE) of the payload
//! ```
//!
//! Sections, in order:
//!
//! | # | content                                                        |
//! |---|----------------------------------------------------------------|
//! | 0 | canonical config text (UTF-8 `key=value` lines)                |
//! | 1 | head learning rate, f64                                        |
//! | 2 | hidden-layer weights (matrix)                                  |
//! | 3 | output-layer weights (matrix)                                  |
//! | 4 | last hidden-layer gradient (matrix, 0x0 when absent)           |
//! | 5 | last output-layer gradient (matrix, 0x0 when absent)           |
//! | 6 | centroids (matrix, k x dim)                                    |
//! | 7 | centroid counts: u64 k, then k x u64                           |
//! | 8 | rng: u64 seed, 4 x u64 state                                   |
//! | 9 | progress: epochs, batches, fine-tunes, has-fine-tuned (u64s), |
//! |   | u64 n + n x (u64 sample, u64 label) queued items,              |
//! |   | u64 m + m x f64 per-epoch NMI                                  |
//! | 10| pre-pass hidden weights (matrix, 0x0 when absent)             |
//! | 11| pre-pass output weights (matrix, 0x0 when absent)             |
//!
//! A matrix is `u64 rows, u64 cols` followed by `rows * cols` f64 values in
//! row-major order.

use std::fs;
use std::path::Path;

use super::write_atomic;
use crate::clustering::CentroidBank;
use crate::error::{Error, Result};
use crate::head::{FeatureHead, Gradients};
use crate::rng::SeededRng;
use crate::tensor::{DenseMatrix, DenseVector};

pub const MAGIC: &[u8; 8] = b"DRIFTCLU";
pub const FORMAT_VERSION: u32 = 1;
const SECTION_COUNT: usize = 12;

/// Trainer progress at an epoch boundary.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Progress {
    pub epochs_done: u64,
    pub batches_done: u64,
    pub finetunes: u64,
    pub has_finetuned: bool,
    /// Queued `(sample index, pseudo-label)` pairs.
    pub buffer: Vec<(usize, usize)>,
    pub nmi_history: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub format_version: u32,
    pub config_text: String,
    pub head: FeatureHead,
    pub bank: CentroidBank,
    pub rng: SeededRng,
    pub progress: Progress,
    /// Head before the most recent fine-tune pass (full-pass rollback only).
    pub pass_snapshot: Option<FeatureHead>,
}

struct Writer {
    buf: Vec<u8>,
}

impl Writer {
    fn u64(&mut self, v: u64) {
        self.buf.extend_from_slice(&v.to_le_bytes());
    }

    fn f64(&mut self, v: f64) {
        self.buf.extend_from_slice(&v.to_le_bytes());
    }

    fn matrix(&mut self, m: Option<&DenseMatrix>) {
        match m {
            Some(m) => {
                self.u64(m.rows() as u64);
                self.u64(m.cols() as u64);
                m.as_slice().iter().for_each(|&v| self.f64(v));
            }
            None => {
                self.u64(0);
                self.u64(0);
            }
        }
    }
}

fn section(payload: &mut Vec<u8>, fill: impl FnOnce(&mut Writer)) {
    let mut w = Writer { buf: Vec::new() };
    fill(&mut w);
    payload.extend_from_slice(&(w.buf.len() as u64).to_le_bytes());
    payload.extend_from_slice(&w.buf);
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
    what: &'static str,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|&e| e <= self.bytes.len())
            .ok_or_else(|| {
                Error::Format(format!("checkpoint section `{}` is truncated", self.what))
            })?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn usize(&mut self) -> Result<usize> {
        usize::try_from(self.u64()?).map_err(|_| Error::Format("value exceeds usize".into()))
    }

    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn matrix(&mut self) -> Result<Option<DenseMatrix>> {
        let rows = self.usize()?;
        let cols = self.usize()?;
        if rows == 0 && cols == 0 {
            return Ok(None);
        }
        let n = rows
            .checked_mul(cols)
            .filter(|n| {
                n.checked_mul(8)
                    .is_some_and(|b| b <= self.bytes.len() - self.pos)
            })
            .ok_or_else(|| {
                Error::Format(format!("checkpoint section `{}` is truncated", self.what))
            })?;
        let data = (0..n).map(|_| self.f64()).collect::<Result<Vec<_>>>()?;
        DenseMatrix::new(rows, cols, data).map(Some)
    }

    fn required_matrix(&mut self) -> Result<DenseMatrix> {
        self.matrix()?
            .ok_or_else(|| Error::Format(format!("checkpoint section `{}` is empty", self.what)))
    }

    fn finish(&self) -> Result<()> {
        if self.pos == self.bytes.len() {
            Ok(())
        } else {
            Err(Error::Format(format!(
                "checkpoint section `{}` has {} unexpected trailing bytes",
                self.what,
                self.bytes.len() - self.pos
            )))
        }
    }
}

pub fn encode_checkpoint(ck: &Checkpoint) -> Vec<u8> {
    let mut payload = Vec::new();
    section(&mut payload, |w| {
        w.buf.extend_from_slice(ck.config_text.as_bytes())
    });
    section(&mut payload, |w| w.f64(ck.head.eta()));
    section(&mut payload, |w| w.matrix(Some(ck.head.w_fc9())));
    section(&mut payload, |w| w.matrix(Some(ck.head.w_out())));
    section(&mut payload, |w| {
        w.matrix(ck.head.last_delta().map(|d| &d.fc9))
    });
    section(&mut payload, |w| {
        w.matrix(ck.head.last_delta().map(|d| &d.out))
    });
    section(&mut payload, |w| {
        let centroids =
            DenseMatrix::from_fn(ck.bank.k(), ck.bank.dim(), |r, c| ck.bank.centroids()[r][c]);
        w.matrix(Some(&centroids));
    });
    section(&mut payload, |w| {
        w.u64(ck.bank.k() as u64);
        ck.bank.counts().iter().for_each(|&c| w.u64(c));
    });
    section(&mut payload, |w| {
        w.u64(ck.rng.seed());
        ck.rng.state().iter().for_each(|&s| w.u64(s));
    });
    section(&mut payload, |w| {
        let p = &ck.progress;
        w.u64(p.epochs_done);
        w.u64(p.batches_done);
        w.u64(p.finetunes);
        w.u64(p.has_finetuned as u64);
        w.u64(p.buffer.len() as u64);
        for &(s, l) in &p.buffer {
            w.u64(s as u64);
            w.u64(l as u64);
        }
        w.u64(p.nmi_history.len() as u64);
        p.nmi_history.iter().for_each(|&v| w.f64(v));
    });
    section(&mut payload, |w| {
        w.matrix(ck.pass_snapshot.as_ref().map(|h| h.w_fc9()))
    });
    section(&mut payload, |w| {
        w.matrix(ck.pass_snapshot.as_ref().map(|h| h.w_out()))
    });

    let mut out = Vec::with_capacity(payload.len() + 16);
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&ck.format_version.to_le_bytes());
    out.extend_from_slice(&payload);
    out.extend_from_slice(&crc32fast::hash(&payload).to_le_bytes());
    out
}

pub fn decode_checkpoint(bytes: &[u8]) -> Result<Checkpoint> {
    if bytes.len() < 16 {
        return Err(Error::Truncated {
            expected: 16,
            actual: bytes.len() as u64,
        });
    }
    if &bytes[..8] != MAGIC {
        return Err(Error::Format(format!(
            "bad checkpoint magic {:?}",
            &bytes[..8]
        )));
    }
    let version = u32::from_le_bytes(bytes[8..12].try_into().unwrap());
    if version != FORMAT_VERSION {
        return Err(Error::Version {
            found: version,
            expected: FORMAT_VERSION,
        });
    }
    let payload = &bytes[12..bytes.len() - 4];
    let stored = u32::from_le_bytes(bytes[bytes.len() - 4..].try_into().unwrap());
    let computed = crc32fast::hash(payload);
    if stored != computed {
        return Err(Error::Corruption { stored, computed });
    }

    const NAMES: [&str; SECTION_COUNT] = [
        "config",
        "eta",
        "w_fc9",
        "w_out",
        "delta_fc9",
        "delta_out",
        "centroids",
        "counts",
        "rng",
        "progress",
        "snapshot_fc9",
        "snapshot_out",
    ];
    let mut outer = Reader {
        bytes: payload,
        pos: 0,
        what: "payload",
    };
    let mut sections = Vec::with_capacity(SECTION_COUNT);
    for name in NAMES {
        outer.what = name;
        let len = outer.usize()?;
        sections.push(Reader {
            bytes: outer.take(len)?,
            pos: 0,
            what: name,
        });
    }
    outer.what = "payload";
    outer.finish()?;
    let mut s = sections.into_iter();
    let mut next = || s.next().unwrap();

    let config_text = {
        let r = next();
        String::from_utf8(r.bytes.to_vec())
            .map_err(|_| Error::Format("config section is not UTF-8".into()))?
    };
    let eta = {
        let mut r = next();
        let v = r.f64()?;
        r.finish()?;
        v
    };
    let mut single_matrix = |required: bool| -> Result<Option<DenseMatrix>> {
        let mut r = next();
        let m = if required {
            Some(r.required_matrix()?)
        } else {
            r.matrix()?
        };
        r.finish()?;
        Ok(m)
    };
    let w_fc9 = single_matrix(true)?.unwrap();
    let w_out = single_matrix(true)?.unwrap();
    let delta = match (single_matrix(false)?, single_matrix(false)?) {
        (Some(fc9), Some(out)) => Some(Gradients { fc9, out }),
        (None, None) => None,
        _ => {
            return Err(Error::Format(
                "checkpoint has only one of the two gradient matrices".into(),
            ))
        }
    };
    let centroids = single_matrix(true)?.unwrap();
    let head = FeatureHead::from_parts(w_fc9, w_out, eta, delta)?;

    let counts = {
        let mut r = next();
        let k = r.usize()?;
        let counts = (0..k).map(|_| r.u64()).collect::<Result<Vec<_>>>()?;
        r.finish()?;
        counts
    };
    let bank = CentroidBank::new(
        (0..centroids.rows())
            .map(|i| DenseVector::new(centroids.row(i).to_vec()))
            .collect::<Result<Vec<_>>>()?,
        counts,
    )?;

    let rng = {
        let mut r = next();
        let seed = r.u64()?;
        let state = [r.u64()?, r.u64()?, r.u64()?, r.u64()?];
        r.finish()?;
        SeededRng::from_state(seed, state)
            .ok_or_else(|| Error::Format("all-zero rng state".into()))?
    };

    let progress = {
        let mut r = next();
        let epochs_done = r.u64()?;
        let batches_done = r.u64()?;
        let finetunes = r.u64()?;
        let has_finetuned = match r.u64()? {
            0 => false,
            1 => true,
            v => {
                return Err(Error::Format(format!(
                    "bad boolean {v} in progress section"
                )))
            }
        };
        let n = r.usize()?;
        let mut buffer = Vec::new();
        for _ in 0..n {
            buffer.push((r.usize()?, r.usize()?));
        }
        let m = r.usize()?;
        let nmi_history = (0..m).map(|_| r.f64()).collect::<Result<Vec<_>>>()?;
        r.finish()?;
        Progress {
            epochs_done,
            batches_done,
            finetunes,
            has_finetuned,
            buffer,
            nmi_history,
        }
    };

    let pass_snapshot = {
        let mut a = next();
        let mut b = next();
        let (fa, fb) = (a.matrix()?, b.matrix()?);
        a.finish()?;
        b.finish()?;
        match (fa, fb) {
            (Some(fc9), Some(out)) => Some(FeatureHead::new(fc9, out, eta)?),
            (None, None) => None,
            _ => {
                return Err(Error::Format(
                    "checkpoint has a partial weight snapshot".into(),
                ))
            }
        }
    };

    Ok(Checkpoint {
        format_version: version,
        config_text,
        head,
        bank,
        rng,
        progress,
        pass_snapshot,
    })
}

pub fn save_checkpoint(path: &Path, ck: &Checkpoint) -> Result<()> {
    write_atomic(path, &encode_checkpoint(ck))
}

pub fn load_checkpoint(path: &Path) -> Result<Checkpoint> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_checkpoint(&bytes)
}
