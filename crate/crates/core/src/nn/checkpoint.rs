//! Binary network checkpoints.
//!
//! Layout: `b"DPG1"`, a version byte, the layer count as `u32`, then for each
//! layer `in_size: u32`, `out_size: u32`, an activation tag byte, the weights
//! and the biases as `f64`. All integers and floats are little-endian.

use super::network::{Activation, DenseLayer, Network};
use crate::error::{Error, Result};

pub const MAGIC: &[u8; 4] = b"DPG1";
pub const VERSION: u8 = 1;

pub fn encode(net: &Network) -> Vec<u8> {
    let mut out = Vec::with_capacity(9 + net.param_count() * 8 + net.layers().len() * 9);
    out.extend_from_slice(MAGIC);
    out.push(VERSION);
    out.extend_from_slice(&(net.layers().len() as u32).to_le_bytes());
    for l in net.layers() {
        out.extend_from_slice(&(l.in_size as u32).to_le_bytes());
        out.extend_from_slice(&(l.out_size as u32).to_le_bytes());
        out.push(l.activation.tag());
        for v in l.weight.iter().chain(&l.bias) {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    out
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize, what: &str) -> Result<&'a [u8]> {
        if self.buf.len() - self.pos < n {
            return Err(Error::Format {
                offset: self.pos,
                msg: format!("truncated while reading {what}"),
            });
        }
        let s = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u32(&mut self, what: &str) -> Result<usize> {
        let b = self.take(4, what)?;
        Ok(u32::from_le_bytes(b.try_into().unwrap()) as usize)
    }

    fn f64s(&mut self, n: usize, what: &str) -> Result<Vec<f64>> {
        let bytes = self.take(
            n.checked_mul(8).ok_or_else(|| Error::Format {
                offset: self.pos,
                msg: format!("{what} size overflows"),
            })?,
            what,
        )?;
        Ok(bytes
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect())
    }
}

pub fn decode(buf: &[u8]) -> Result<Network> {
    let mut r = Reader { buf, pos: 0 };
    if r.take(4, "magic")? != MAGIC {
        return Err(Error::Format {
            offset: 0,
            msg: "bad magic, expected DPG1".into(),
        });
    }
    let version = r.take(1, "version")?[0];
    if version != VERSION {
        return Err(Error::Format {
            offset: 4,
            msg: format!("unsupported version {version}"),
        });
    }
    let count = r.u32("layer count")?;
    if count == 0 {
        return Err(Error::Format {
            offset: 5,
            msg: "zero layers".into(),
        });
    }
    let mut layers = Vec::new();
    for i in 0..count {
        let start = r.pos;
        let in_size = r.u32("in_size")?;
        let out_size = r.u32("out_size")?;
        let tag_at = r.pos;
        let tag = r.take(1, "activation tag")?[0];
        let activation = Activation::from_tag(tag).ok_or(Error::Format {
            offset: tag_at,
            msg: format!("unknown activation tag {tag} in layer {i}"),
        })?;
        let weight = r.f64s(in_size.saturating_mul(out_size), "weights")?;
        let bias = r.f64s(out_size, "biases")?;
        let layer = DenseLayer::new(in_size, out_size, weight, bias, activation).map_err(|e| {
            Error::Format {
                offset: start,
                msg: e.to_string(),
            }
        })?;
        layers.push(layer);
    }
    if r.pos != buf.len() {
        return Err(Error::Format {
            offset: r.pos,
            msg: "trailing bytes".into(),
        });
    }
    Network::from_layers(layers).map_err(|e| Error::Format {
        offset: 9,
        msg: e.to_string(),
    })
}

pub fn save(net: &Network, path: &std::path::Path) -> Result<()> {
    std::fs::write(path, encode(net)).map_err(|e| Error::io(path, e))
}

pub fn load(path: &std::path::Path) -> Result<Network> {
    let buf = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    decode(&buf)
}
