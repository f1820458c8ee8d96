//! Flat binary weight format shared by every checkpoint.
//!
//! ```text
//! magic      4 bytes  "GDQW"
//! version    u16 LE   (1)
//! groups     u16 LE
//! per group: u32 LE layer count, then per layer
//!            u32 LE out, u32 LE in, u8 activation (0 relu, 1 tanh, 2 linear)
//! payload    every layer in order: weights (row-major, out x in) then bias,
//!            all f64 LE
//! ```
//!
//! A model made of several networks (trunk, value stream, advantage streams)
//! is stored as one group per network.

use alloc::format;
use alloc::vec::Vec;

use super::{Activation, DenseLayer, Matrix, Mlp};
use crate::{Error, Result};

pub const MAGIC: &[u8; 4] = b"GDQW";
pub const VERSION: u16 = 1;

pub fn encode(groups: &[&Mlp]) -> Vec<u8> {
    let mut out = Vec::new();
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&(groups.len() as u16).to_le_bytes());
    for net in groups {
        out.extend_from_slice(&(net.layers().len() as u32).to_le_bytes());
        for l in net.layers() {
            out.extend_from_slice(&(l.out_dim() as u32).to_le_bytes());
            out.extend_from_slice(&(l.in_dim() as u32).to_le_bytes());
            out.push(l.activation.code());
        }
    }
    for net in groups {
        for l in net.layers() {
            for v in l.weights.as_slice().iter().chain(&l.bias) {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
    }
    out
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.bytes.len());
        let end = end.ok_or_else(|| Error::Codec(format!("truncated at byte {}", self.pos)))?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u16(&mut self) -> Result<u16> {
        Ok(u16::from_le_bytes(self.take(2)?.try_into().unwrap()))
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
}

pub fn decode(bytes: &[u8]) -> Result<Vec<Mlp>> {
    let mut r = Reader { bytes, pos: 0 };
    if r.take(4)? != MAGIC {
        return Err(Error::Codec("bad magic".into()));
    }
    let version = r.u16()?;
    if version != VERSION {
        return Err(Error::Codec(format!("unsupported version {version}")));
    }
    let n_groups = r.u16()? as usize;
    let mut shapes = Vec::with_capacity(n_groups);
    for _ in 0..n_groups {
        let n_layers = r.u32()? as usize;
        let mut group = Vec::new();
        for _ in 0..n_layers {
            let out = r.u32()? as usize;
            let inp = r.u32()? as usize;
            let code = r.take(1)?[0];
            let act = Activation::from_code(code)
                .ok_or_else(|| Error::Codec(format!("unknown activation code {code}")))?;
            group.push((out, inp, act));
        }
        shapes.push(group);
    }
    let mut nets = Vec::with_capacity(n_groups);
    for group in shapes {
        let mut layers = Vec::with_capacity(group.len());
        for (out, inp, activation) in group {
            let n = out
                .checked_mul(inp)
                .ok_or_else(|| Error::Codec("layer too large".into()))?;
            let weights = (0..n).map(|_| r.f64()).collect::<Result<Vec<_>>>()?;
            let bias = (0..out).map(|_| r.f64()).collect::<Result<Vec<_>>>()?;
            layers.push(DenseLayer {
                weights: Matrix::from_vec(out, inp, weights)?,
                bias,
                activation,
            });
        }
        nets.push(Mlp::from_layers(layers).map_err(|e| Error::Codec(format!("{e}")))?);
    }
    if r.pos != bytes.len() {
        return Err(Error::Codec(format!(
            "{} trailing bytes",
            bytes.len() - r.pos
        )));
    }
    Ok(nets)
}
