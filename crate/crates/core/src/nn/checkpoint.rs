//! Binary parameter checkpoints.
//!
//! Layout (little-endian):
//!
//! ```text
//! magic    8 bytes  "CUBECKPT"
//! version  u8
//! bytes    u8       element width: 4 (f32) or 8 (f64)
//! hash     u64      FNV-1a of the metadata text
//! meta     u32 length + UTF-8 text (architecture config)
//! count    u32
//! entries  count × { u32 name length, name, u32 rank, rank × u64 dims, values }
//! ```

use std::fs;
use std::io::{self, Read, Write};
use std::path::Path;

use super::params::Params;
use super::real::Real;
use super::tensor::Tensor;
use super::NnError;

pub const CHECKPOINT_MAGIC: &[u8; 8] = b"CUBECKPT";
pub const CHECKPOINT_VERSION: u8 = 1;

pub fn fnv1a64(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf29ce484222325;
    for &b in bytes {
        h ^= b as u64;
        h = h.wrapping_mul(0x100000001b3);
    }
    h
}

pub fn write_checkpoint<F: Real, W: Write>(mut w: W, params: &Params<F>, meta: &str) -> io::Result<()> {
    w.write_all(CHECKPOINT_MAGIC)?;
    w.write_all(&[CHECKPOINT_VERSION, F::BYTES])?;
    w.write_all(&fnv1a64(meta.as_bytes()).to_le_bytes())?;
    w.write_all(&(meta.len() as u32).to_le_bytes())?;
    w.write_all(meta.as_bytes())?;
    w.write_all(&(params.len() as u32).to_le_bytes())?;
    let mut buf = Vec::new();
    for (name, t) in params.iter() {
        w.write_all(&(name.len() as u32).to_le_bytes())?;
        w.write_all(name.as_bytes())?;
        w.write_all(&(t.shape().len() as u32).to_le_bytes())?;
        for &d in t.shape() {
            w.write_all(&(d as u64).to_le_bytes())?;
        }
        buf.clear();
        for &x in t.data() {
            x.to_le_bytes_vec(&mut buf);
        }
        w.write_all(&buf)?;
    }
    w.flush()
}

pub fn save_checkpoint<F: Real>(path: &Path, params: &Params<F>, meta: &str) -> Result<(), NnError> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent)?;
    }
    let f = fs::File::create(path)?;
    write_checkpoint(io::BufWriter::new(f), params, meta)?;
    Ok(())
}

struct Cursor<'a>(&'a [u8]);

impl Cursor<'_> {
    fn take(&mut self, n: usize) -> Result<&[u8], NnError> {
        if self.0.len() < n {
            return Err(NnError::Checkpoint("truncated".into()));
        }
        let (head, tail) = self.0.split_at(n);
        self.0 = tail;
        Ok(head)
    }

    fn u32(&mut self) -> Result<u32, NnError> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }

    fn u64(&mut self) -> Result<u64, NnError> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }
}

/// Parses a checkpoint, converting stored values to `F`. Returns the
/// parameters and the metadata text.
pub fn read_checkpoint<F: Real>(bytes: &[u8]) -> Result<(Params<F>, String), NnError> {
    let mut c = Cursor(bytes);
    if c.take(8)? != CHECKPOINT_MAGIC {
        return Err(NnError::Checkpoint("bad magic".into()));
    }
    let head = c.take(2)?;
    let (version, width) = (head[0], head[1]);
    if version != CHECKPOINT_VERSION {
        return Err(NnError::Checkpoint(format!("unsupported version {version}")));
    }
    if width != 4 && width != 8 {
        return Err(NnError::Checkpoint(format!("bad element width {width}")));
    }
    let hash = c.u64()?;
    let meta_len = c.u32()? as usize;
    let meta = String::from_utf8(c.take(meta_len)?.to_vec())
        .map_err(|_| NnError::Checkpoint("metadata is not UTF-8".into()))?;
    if fnv1a64(meta.as_bytes()) != hash {
        return Err(NnError::Checkpoint("metadata hash mismatch".into()));
    }
    let count = c.u32()?;
    let mut params = Params::new();
    for _ in 0..count {
        let name_len = c.u32()? as usize;
        let name = String::from_utf8(c.take(name_len)?.to_vec())
            .map_err(|_| NnError::Checkpoint("parameter name is not UTF-8".into()))?;
        let rank = c.u32()? as usize;
        let shape: Vec<usize> = (0..rank).map(|_| c.u64().map(|d| d as usize)).collect::<Result<_, _>>()?;
        let n: usize = shape.iter().product();
        let raw = c.take(n * width as usize)?;
        let data: Vec<F> = raw
            .chunks_exact(width as usize)
            .map(|b| {
                if width == 4 {
                    F::from_f64(f32::from_le_slice(b) as f64)
                } else {
                    F::from_f64(f64::from_le_slice(b))
                }
            })
            .collect();
        params.add(name, Tensor::new(&shape, data)?);
    }
    if !c.0.is_empty() {
        return Err(NnError::Checkpoint("trailing bytes".into()));
    }
    Ok((params, meta))
}

pub fn load_checkpoint<F: Real>(path: &Path) -> Result<(Params<F>, String), NnError> {
    let mut bytes = Vec::new();
    fs::File::open(path)?.read_to_end(&mut bytes)?;
    read_checkpoint(&bytes)
}

/// Copies values from `loaded` into `target` by name, checking shapes.
pub fn assign_by_name<F: Real>(target: &mut Params<F>, loaded: &Params<F>) -> Result<(), NnError> {
    if target.len() != loaded.len() {
        return Err(NnError::Checkpoint(format!(
            "checkpoint has {} tensors, model has {}",
            loaded.len(),
            target.len()
        )));
    }
    for id in target.ids().collect::<Vec<_>>() {
        let name = target.name(id).to_string();
        let src = loaded
            .find(&name)
            .ok_or_else(|| NnError::Checkpoint(format!("missing tensor {name}")))?;
        let src = loaded.get(src);
        if src.shape() != target.get(id).shape() {
            return Err(NnError::Checkpoint(format!(
                "tensor {name} has shape {:?}, expected {:?}",
                src.shape(),
                target.get(id).shape()
            )));
        }
        *target.get_mut(id) = src.clone();
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_and_precision_conversion() {
        let mut p: Params<f32> = Params::new();
        p.add("a.w", Tensor::new(&[2, 3], vec![1.0, -2.5, 3.25, 0.0, 1e-3, 7.0]).unwrap());
        p.add("a.b", Tensor::new(&[3], vec![0.5, 0.25, -0.125]).unwrap());
        let mut buf = Vec::new();
        write_checkpoint(&mut buf, &p, "variant = \"fc\"").unwrap();
        let (q, meta) = read_checkpoint::<f32>(&buf).unwrap();
        assert_eq!(q, p);
        assert_eq!(meta, "variant = \"fc\"");
        let (q64, _) = read_checkpoint::<f64>(&buf).unwrap();
        assert_eq!(q64.cast::<f32>(), p);

        let mut bad = buf.clone();
        bad[20] ^= 1;
        assert!(read_checkpoint::<f32>(&bad).is_err());
        assert!(read_checkpoint::<f32>(&buf[..buf.len() - 1]).is_err());
    }
}
