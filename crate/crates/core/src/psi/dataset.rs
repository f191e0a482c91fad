//! `PSID` dataset files and CSV export.
//!
//! Layout (little-endian): magic `PSID`, `u16` version, `u32` H, `u32` W,
//! `u8` K, `u32` count, then `count × H·W` normalised `f32` phases.

use std::fs;
use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};

use super::generate::PhaseShiftSample;
use super::quantize::QuantizationSpec;

const MAGIC: &[u8; 4] = b"PSID";
const VERSION: u16 = 1;
const HEADER_LEN: usize = 4 + 2 + 4 + 4 + 1 + 4;

/// Samples of one size and bit depth. The header fields are kept even
/// when there are no samples.
#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    pub h: usize,
    pub w: usize,
    pub quant: QuantizationSpec,
    pub samples: Vec<PhaseShiftSample>,
}

impl Dataset {
    pub fn new(h: usize, w: usize, quant: QuantizationSpec, samples: Vec<PhaseShiftSample>) -> Result<Self> {
        if let Some(s) = samples.iter().find(|s| (s.h, s.w, s.quant) != (h, w, quant)) {
            return Err(Error::Config(format!(
                "sample of size {}x{} at {} bits does not fit a {h}x{w} {}-bit dataset",
                s.h, s.w, s.quant.bits, quant.bits
            )));
        }
        Ok(Dataset { h, w, quant, samples })
    }
}

pub fn encode_dataset(data: &Dataset) -> Vec<u8> {
    let (h, w) = (data.h, data.w);
    let mut out = Vec::with_capacity(HEADER_LEN + data.samples.len() * h * w * 4);
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&(h as u32).to_le_bytes());
    out.extend_from_slice(&(w as u32).to_le_bytes());
    out.push(data.quant.bits);
    out.extend_from_slice(&(data.samples.len() as u32).to_le_bytes());
    for s in &data.samples {
        for v in s.normalized() {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    out
}

pub fn save_dataset(data: &Dataset, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, encode_dataset(data)).map_err(|e| Error::io(path, e))
}

pub fn decode_dataset(bytes: &[u8], path: &Path) -> Result<Dataset> {
    let bad = |detail: String| Error::format(path, detail);
    if bytes.len() < HEADER_LEN {
        return Err(bad("truncated header".into()));
    }
    if &bytes[..4] != MAGIC {
        return Err(bad("bad magic (expected PSID)".into()));
    }
    let u32_at = |i: usize| u32::from_le_bytes(bytes[i..i + 4].try_into().unwrap()) as usize;
    let version = u16::from_le_bytes([bytes[4], bytes[5]]);
    if version != VERSION {
        return Err(bad(format!("unsupported version {version}")));
    }
    let (h, w, bits, count) = (u32_at(6), u32_at(10), bytes[14], u32_at(15));
    if h == 0 || w == 0 || !(1..=16).contains(&bits) {
        return Err(bad(format!("invalid header: H={h} W={w} K={bits}")));
    }
    let quant = QuantizationSpec::new(bits);
    let expected = HEADER_LEN + count * h * w * 4;
    if bytes.len() != expected {
        return Err(bad(format!("expected {expected} bytes for {count} samples, found {}", bytes.len())));
    }
    let mut values = bytes[HEADER_LEN..]
        .chunks_exact(4)
        .map(|b| f32::from_le_bytes(b.try_into().unwrap()));
    let samples = (0..count)
        .map(|n| {
            let indices = (0..h * w)
                .map(|e| {
                    let v = values.next().expect("length checked");
                    quant.index_of_normalized(v).ok_or_else(|| {
                        bad(format!("sample {n} element {e}: {v} is not on the {bits}-bit grid"))
                    })
                })
                .collect::<Result<Vec<u32>>>()?;
            Ok(PhaseShiftSample { h, w, quant, indices, meta: None })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(Dataset { h, w, quant, samples })
}

pub fn load_dataset(path: impl AsRef<Path>) -> Result<Dataset> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_dataset(&bytes, path)
}

/// One row per sample: the sample seed (blank if unknown), then the
/// normalised phases in row-major order.
pub fn write_csv<W: Write>(samples: &[PhaseShiftSample], mut out: W) -> std::io::Result<()> {
    let hw = samples.first().map_or(0, |s| s.indices.len());
    write!(out, "seed")?;
    for i in 0..hw {
        write!(out, ",v{i}")?;
    }
    writeln!(out)?;
    for s in samples {
        if let Some(meta) = s.meta {
            write!(out, "{}", meta.seed)?;
        }
        for v in s.normalized() {
            write!(out, ",{v}")?;
        }
        writeln!(out)?;
    }
    Ok(())
}
