//! `MCRW` weight files.
//!
//! Layout (little-endian): magic `MCRW`, `u16` version, `u32` length plus
//! UTF-8 config record, then per tensor: `u16` name length, name, `u8`
//! dtype (0 = f32), `u8` rank, `rank × u32` dims, row-major payload.

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::tensor::{ParameterSet, Scalar, Tensor};

use super::{param_specs, Model, ModelConfig};

const MAGIC: &[u8; 4] = b"MCRW";
const VERSION: u16 = 1;
const DTYPE_F32: u8 = 0;

pub fn encode_weights<T: Scalar>(model: &Model<T>) -> Vec<u8> {
    let mut out = Vec::new();
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    let record = model.config().to_record();
    out.extend_from_slice(&(record.len() as u32).to_le_bytes());
    out.extend_from_slice(record.as_bytes());
    for p in model.params().iter() {
        out.extend_from_slice(&(p.name.len() as u16).to_le_bytes());
        out.extend_from_slice(p.name.as_bytes());
        out.push(DTYPE_F32);
        out.push(p.value.rank() as u8);
        for &d in p.value.shape() {
            out.extend_from_slice(&(d as u32).to_le_bytes());
        }
        for &v in p.value.data() {
            out.extend_from_slice(&(v.as_f64() as f32).to_le_bytes());
        }
    }
    out
}

pub fn save_weights<T: Scalar>(model: &Model<T>, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, encode_weights(model)).map_err(|e| Error::io(path, e))
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
    path: &'a Path,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize, what: &str) -> Result<&'a [u8]> {
        if self.buf.len() - self.pos < n {
            return Err(Error::format(self.path, format!("truncated while reading {what}")));
        }
        let s = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u8(&mut self, what: &str) -> Result<u8> {
        Ok(self.take(1, what)?[0])
    }

    fn u16(&mut self, what: &str) -> Result<u16> {
        Ok(u16::from_le_bytes(self.take(2, what)?.try_into().unwrap()))
    }

    fn u32(&mut self, what: &str) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4, what)?.try_into().unwrap()))
    }

    fn done(&self) -> bool {
        self.pos == self.buf.len()
    }
}

type NamedTensors = Vec<(String, Tensor<f32>)>;

/// Parses a weight file into its config record and raw tensors.
fn parse(bytes: &[u8], path: &Path) -> Result<(ModelConfig, NamedTensors)> {
    let mut r = Reader { buf: bytes, pos: 0, path };
    if r.take(4, "magic").ok() != Some(MAGIC.as_slice()) {
        return Err(Error::format(path, "bad magic (expected MCRW)"));
    }
    let version = r.u16("version")?;
    if version != VERSION {
        return Err(Error::format(path, format!("unsupported version {version}")));
    }
    let len = r.u32("config length")? as usize;
    let record = std::str::from_utf8(r.take(len, "config record")?)
        .map_err(|_| Error::format(path, "config record is not UTF-8"))?;
    let config = ModelConfig::from_record(record)
        .map_err(|e| Error::format(path, format!("config record: {e}")))?;

    let mut tensors = Vec::new();
    while !r.done() {
        let n = r.u16("tensor name length")? as usize;
        let name = std::str::from_utf8(r.take(n, "tensor name")?)
            .map_err(|_| Error::format(path, "tensor name is not UTF-8"))?
            .to_string();
        let dtype = r.u8("dtype")?;
        if dtype != DTYPE_F32 {
            return Err(Error::format(path, format!("tensor `{name}` has unsupported dtype {dtype}")));
        }
        let rank = r.u8("rank")? as usize;
        let mut dims = Vec::with_capacity(rank);
        for _ in 0..rank {
            dims.push(r.u32("dims")? as usize);
        }
        let numel: usize = dims.iter().product();
        let payload = r
            .take(numel * 4, &format!("payload of `{name}`"))
            .map_err(|_| Error::format(path, format!("tensor `{name}` payload truncated")))?;
        let data = payload
            .chunks_exact(4)
            .map(|b| f32::from_le_bytes(b.try_into().unwrap()))
            .collect();
        let t = Tensor::new(dims, data)
            .map_err(|e| Error::format(path, format!("tensor `{name}`: {e}")))?;
        tensors.push((name, t));
    }
    Ok((config, tensors))
}

fn assemble<T: Scalar>(config: &ModelConfig, tensors: NamedTensors, path: &Path) -> Result<Model<T>> {
    let specs = param_specs(config);
    let mut params = ParameterSet::new();
    for s in &specs {
        let found = tensors
            .iter()
            .find(|(n, _)| n == &s.name)
            .ok_or_else(|| Error::format(path, format!("missing tensor `{}`", s.name)))?;
        if found.1.shape() != s.shape.as_slice() {
            return Err(Error::ShapeMismatch {
                name: s.name.clone(),
                expected: s.shape.clone(),
                found: found.1.shape().to_vec(),
            });
        }
        params.push(s.name.clone(), found.1.cast())?;
    }
    if let Some((extra, _)) = tensors.iter().find(|(n, _)| params.slot(n).is_none()) {
        return Err(Error::format(path, format!("unexpected tensor `{extra}`")));
    }
    Model::from_params(config.clone(), params)
}

pub fn load_weights(path: impl AsRef<Path>) -> Result<Model<f32>> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    let (config, tensors) = parse(&bytes, path)?;
    assemble(&config, tensors, path)
}

/// Loads into an expected architecture. Tensors are checked against the
/// inventory of `expected` first, so a mismatch reports the offending
/// tensor with expected and found dims.
pub fn load_weights_as(path: impl AsRef<Path>, expected: &ModelConfig) -> Result<Model<f32>> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    let (config, tensors) = parse(&bytes, path)?;
    let mismatch = || {
        let found = config.to_record();
        let want = expected.to_record();
        let diff: Vec<String> = found
            .lines()
            .zip(want.lines())
            .filter(|(a, b)| a != b)
            .map(|(a, b)| format!("{b} expected, file has {a}"))
            .collect();
        Error::Config(format!("{} was saved with a different model config: {}", path.display(), diff.join("; ")))
    };
    match assemble(expected, tensors, path) {
        Err(e @ Error::ShapeMismatch { .. }) => Err(e),
        Err(_) if &config != expected => Err(mismatch()),
        Err(e) => Err(e),
        Ok(_) if &config != expected => Err(mismatch()),
        Ok(model) => Ok(model),
    }
}
