//! Model file, little-endian:
//!
//! ```text
//! magic "MDVQMODL" | version u32 | dims 9 x u32
//!   (L, N_S, N_D, N_M, H_S, H_D, N_M', head1, head2)
//! per tensor, in TENSOR_NAMES order: len u32 | len x f32
//! ```

use std::io::{Read, Write};
use std::path::Path;

use super::{ModelDims, ModelError, ModelParams, TENSOR_NAMES};

pub const MODEL_MAGIC: &[u8; 8] = b"MDVQMODL";
pub const MODEL_VERSION: u32 = 1;

/// Serialize `params`; values are narrowed to `f32`.
pub fn write_model<W: Write>(params: &ModelParams, mut w: W) -> Result<(), ModelError> {
    let mut buf = Vec::with_capacity(48 + 4 * params.parameter_count() + 4 * TENSOR_NAMES.len());
    buf.extend_from_slice(MODEL_MAGIC);
    buf.extend_from_slice(&MODEL_VERSION.to_le_bytes());
    for d in params.dims.as_array() {
        let d = u32::try_from(d).map_err(|_| ModelError::Format(format!("width {d} does not fit in u32")))?;
        buf.extend_from_slice(&d.to_le_bytes());
    }
    for t in params.tensors() {
        buf.extend_from_slice(&(t.len() as u32).to_le_bytes());
        for &v in t {
            buf.extend_from_slice(&(v as f32).to_le_bytes());
        }
    }
    w.write_all(&buf)?;
    Ok(())
}

fn take<'a>(bytes: &mut &'a [u8], n: usize, what: &str) -> Result<&'a [u8], ModelError> {
    if bytes.len() < n {
        return Err(ModelError::Format(format!("truncated while reading {what}")));
    }
    let (head, rest) = bytes.split_at(n);
    *bytes = rest;
    Ok(head)
}

fn take_u32(bytes: &mut &[u8], what: &str) -> Result<u32, ModelError> {
    Ok(u32::from_le_bytes(take(bytes, 4, what)?.try_into().expect("4 bytes")))
}

pub fn read_model<R: Read>(mut r: R) -> Result<ModelParams, ModelError> {
    let mut all = Vec::new();
    r.read_to_end(&mut all)?;
    let mut bytes = all.as_slice();
    if take(&mut bytes, 8, "magic")? != MODEL_MAGIC {
        return Err(ModelError::Format("bad magic, not a model file".into()));
    }
    let version = take_u32(&mut bytes, "version")?;
    if version != MODEL_VERSION {
        return Err(ModelError::Format(format!(
            "unsupported version {version}, expected {MODEL_VERSION}"
        )));
    }
    let mut d = [0usize; 9];
    for v in d.iter_mut() {
        *v = take_u32(&mut bytes, "dims")? as usize;
    }
    let dims = ModelDims {
        l: d[0],
        n_s: d[1],
        n_d: d[2],
        n_m: d[3],
        h_s: d[4],
        h_d: d[5],
        n_m_out: d[6],
        head1: d[7],
        head2: d[8],
    };
    dims.validate().map_err(|e| ModelError::Format(e.to_string()))?;
    let mut params = ModelParams::zeros(dims);
    for (t, name) in params.tensors_mut().into_iter().zip(TENSOR_NAMES) {
        let len = take_u32(&mut bytes, name)? as usize;
        if len != t.len() {
            return Err(ModelError::Format(format!(
                "tensor {name} has {len} values, dims imply {}",
                t.len()
            )));
        }
        let raw = take(&mut bytes, 4 * len, name)?;
        for (v, c) in t.iter_mut().zip(raw.chunks_exact(4)) {
            *v = f32::from_le_bytes(c.try_into().expect("4 bytes")) as f64;
        }
    }
    if !bytes.is_empty() {
        return Err(ModelError::Format(format!("{} trailing bytes", bytes.len())));
    }
    Ok(params)
}

pub fn save_model(params: &ModelParams, path: impl AsRef<Path>) -> Result<(), ModelError> {
    let f = std::fs::File::create(path)?;
    write_model(params, std::io::BufWriter::new(f))
}

pub fn load_model(path: impl AsRef<Path>) -> Result<ModelParams, ModelError> {
    read_model(std::fs::File::open(path)?)
}
