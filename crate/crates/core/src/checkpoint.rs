//! Binary parameter files.
//!
//! Layout, all integers little-endian:
//!
//! ```text
//! "FSPM"  u32 version  u32 kernel_count
//! per kernel: u32 out  u32 in  u32 kh  u32 kw  f64 weights[out·in·kh·kw]
//! optional optimizer block:
//! "ADAM"  u64 t  u64 len  f64 m[len]  f64 v[len]
//! ```
//!
//! Kernels are stored decoder layers first, then meta, smoothing and
//! projection kernels.

use std::path::Path;

use crate::error::{Error, Result};
use crate::stylizer::StylizerParams;
use crate::tensor::Kernel;
use crate::trainer::AdamState;

const MAGIC: &[u8; 4] = b"FSPM";
const ADAM_MAGIC: &[u8; 4] = b"ADAM";
const VERSION: u32 = 1;

fn put_u32(buf: &mut Vec<u8>, v: usize) {
    buf.extend_from_slice(&(v as u32).to_le_bytes());
}

fn put_f64s(buf: &mut Vec<u8>, vs: &[f64]) {
    for v in vs {
        buf.extend_from_slice(&v.to_le_bytes());
    }
}

pub fn encode_params(params: &StylizerParams) -> Vec<u8> {
    let mut buf = Vec::new();
    buf.extend_from_slice(MAGIC);
    put_u32(&mut buf, VERSION as usize);
    let kernels: Vec<&Kernel> = params.kernels().collect();
    put_u32(&mut buf, kernels.len());
    for k in kernels {
        let (o, i, kh, kw) = k.dims();
        for d in [o, i, kh, kw] {
            put_u32(&mut buf, d);
        }
        put_f64s(&mut buf, k.weights());
    }
    buf
}

pub fn encode_checkpoint(params: &StylizerParams, adam: &AdamState) -> Vec<u8> {
    let mut buf = encode_params(params);
    buf.extend_from_slice(ADAM_MAGIC);
    buf.extend_from_slice(&adam.t.to_le_bytes());
    buf.extend_from_slice(&(adam.m.len() as u64).to_le_bytes());
    put_f64s(&mut buf, &adam.m);
    put_f64s(&mut buf, &adam.v);
    buf
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> std::result::Result<&'a [u8], String> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|&e| e <= self.bytes.len())
            .ok_or_else(|| format!("truncated at byte {}", self.pos))?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u32(&mut self) -> std::result::Result<usize, String> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()) as usize)
    }

    fn u64(&mut self) -> std::result::Result<u64, String> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn f64s(&mut self, n: usize) -> std::result::Result<Vec<f64>, String> {
        let len = n.checked_mul(8).ok_or("length overflow")?;
        Ok(self
            .take(len)?
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect())
    }

    fn at_end(&self) -> bool {
        self.pos == self.bytes.len()
    }
}

fn decode_inner(bytes: &[u8]) -> std::result::Result<(StylizerParams, Option<AdamState>), String> {
    let mut r = Reader { bytes, pos: 0 };
    if r.take(4)? != MAGIC {
        return Err("not a parameter file".into());
    }
    let version = r.u32()?;
    if version != VERSION as usize {
        return Err(format!("unsupported version {version}"));
    }
    let count = r.u32()?;
    if count < 4 {
        return Err(format!("expected at least 4 kernels, found {count}"));
    }
    let mut kernels = Vec::with_capacity(count);
    for _ in 0..count {
        let (o, i, kh, kw) = (r.u32()?, r.u32()?, r.u32()?, r.u32()?);
        let n = o
            .checked_mul(i)
            .and_then(|v| v.checked_mul(kh))
            .and_then(|v| v.checked_mul(kw))
            .ok_or("kernel size overflow")?;
        let w = r.f64s(n)?;
        kernels.push(Kernel::new(o, i, kh, kw, w).map_err(|e| e.to_string())?);
    }
    let projection = kernels.pop().unwrap();
    let smooth = kernels.pop().unwrap();
    let meta = kernels.pop().unwrap();
    let params = StylizerParams {
        decoder: kernels,
        meta,
        smooth,
        projection,
    };
    params.validate().map_err(|e| e.to_string())?;

    if r.at_end() {
        return Ok((params, None));
    }
    if r.take(4)? != ADAM_MAGIC {
        return Err("unexpected trailing data".into());
    }
    let t = r.u64()?;
    let len = r.u64()? as usize;
    if len != params.num_parameters() {
        return Err(format!(
            "optimizer state has {len} entries for {} parameters",
            params.num_parameters()
        ));
    }
    let m = r.f64s(len)?;
    let v = r.f64s(len)?;
    if !r.at_end() {
        return Err("unexpected trailing data".into());
    }
    Ok((params, Some(AdamState { m, v, t })))
}

pub fn decode(bytes: &[u8]) -> Result<(StylizerParams, Option<AdamState>)> {
    decode_inner(bytes).map_err(Error::Input)
}

pub fn save_params(path: impl AsRef<Path>, params: &StylizerParams) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, encode_params(params)).map_err(|e| Error::io(path, e))
}

pub fn save_checkpoint(path: impl AsRef<Path>, params: &StylizerParams, adam: &AdamState) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, encode_checkpoint(params, adam)).map_err(|e| Error::io(path, e))
}

/// Reads a parameter file or checkpoint; any optimizer block is dropped.
pub fn load_params(path: impl AsRef<Path>) -> Result<StylizerParams> {
    Ok(load_checkpoint(path)?.0)
}

pub fn load_checkpoint(path: impl AsRef<Path>) -> Result<(StylizerParams, Option<AdamState>)> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_inner(&bytes).map_err(|reason| Error::format(path, reason))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn params_roundtrip_bit_exact() {
        let p = StylizerParams::init(3, 15);
        let (back, adam) = decode(&encode_params(&p)).unwrap();
        assert!(adam.is_none());
        let a = p.flatten();
        let b = back.flatten();
        assert!(a.iter().zip(&b).all(|(x, y)| x.to_bits() == y.to_bits()));
    }

    #[test]
    fn checkpoint_roundtrip() {
        let p = StylizerParams::init(4, 15);
        let n = p.num_parameters();
        let adam = AdamState {
            m: (0..n).map(|i| i as f64 * 0.5).collect(),
            v: vec![0.25; n],
            t: 17,
        };
        let (_, back) = decode(&encode_checkpoint(&p, &adam)).unwrap();
        assert_eq!(back.unwrap(), adam);
    }

    #[test]
    fn header_and_truncation() {
        let bytes = encode_params(&StylizerParams::init(0, 15));
        assert_eq!(&bytes[..4], b"FSPM");
        assert_eq!(u32::from_le_bytes(bytes[4..8].try_into().unwrap()), 1);
        assert!(decode(&bytes[..bytes.len() - 1]).is_err());
        let mut bad = bytes.clone();
        bad[0] = b'X';
        assert!(decode(&bad).is_err());
        let mut trailing = bytes;
        trailing.push(0);
        assert!(decode(&trailing).is_err());
    }
}
