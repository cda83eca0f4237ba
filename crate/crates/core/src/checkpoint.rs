//! Binary parameter checkpoints.
//!
//! Layout, all integers and floats little-endian:
//!
//! ```text
//! magic    8 bytes  "GSAGCNP\0"
//! version  u32      1
//! layers   u32
//! per layer: d_in u32, d_out u32, d_att u32,
//!            then f64 values of w, wl, wr, wh, wg (row-major) and gamma
//! ```

use std::path::Path;

use crate::error::{Error, Result};
use crate::gnn::GsaLayerParams;
use crate::numkernel::Mat;

pub const MAGIC: &[u8; 8] = b"GSAGCNP\0";
pub const VERSION: u32 = 1;
const HEADER: usize = 16;

pub fn encode(params: &[GsaLayerParams]) -> Vec<u8> {
    let floats: usize = params.iter().map(GsaLayerParams::len).sum();
    let mut out = Vec::with_capacity(HEADER + 12 * params.len() + 8 * floats);
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&(params.len() as u32).to_le_bytes());
    for p in params {
        for d in [p.d_in(), p.d_out(), p.d_att()] {
            out.extend_from_slice(&(d as u32).to_le_bytes());
        }
        for m in p.mats() {
            for v in m.as_slice() {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        out.extend_from_slice(&p.gamma.to_le_bytes());
    }
    out
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize, what: &str) -> Result<&'a [u8]> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|&e| e <= self.buf.len())
            .ok_or_else(|| Error::Format(format!("checkpoint truncated while reading {what} at byte {}", self.pos)))?;
        let s = &self.buf[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u32(&mut self, what: &str) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4, what)?.try_into().expect("4 bytes")))
    }

    fn f64(&mut self, what: &str) -> Result<f64> {
        let v = f64::from_le_bytes(self.take(8, what)?.try_into().expect("8 bytes"));
        if !v.is_finite() {
            return Err(Error::Format(format!("non-finite value in {what}")));
        }
        Ok(v)
    }

    fn remaining(&self) -> usize {
        self.buf.len() - self.pos
    }

    fn mat(&mut self, rows: usize, cols: usize, what: &str) -> Result<Mat> {
        let count = rows
            .checked_mul(cols)
            .filter(|c| c.checked_mul(8).is_some_and(|b| b <= self.remaining()))
            .ok_or_else(|| Error::Format(format!("{what} of {rows}x{cols} exceeds the remaining bytes")))?;
        let data = (0..count).map(|_| self.f64(what)).collect::<Result<Vec<_>>>()?;
        Mat::from_vec(rows, cols, data)
    }
}

pub fn decode(bytes: &[u8]) -> Result<Vec<GsaLayerParams>> {
    let mut r = Reader { buf: bytes, pos: 0 };
    if r.take(8, "magic")? != MAGIC {
        return Err(Error::Format("not a parameter checkpoint (bad magic)".into()));
    }
    let version = r.u32("version")?;
    if version != VERSION {
        return Err(Error::Format(format!("unsupported checkpoint version {version}")));
    }
    let layers = r.u32("layer count")? as usize;
    if layers == 0 {
        return Err(Error::Format("checkpoint has no layers".into()));
    }
    let mut out = Vec::with_capacity(layers.min(r.remaining() / 12));
    for l in 0..layers {
        let d_in = r.u32("d_in")? as usize;
        let d_out = r.u32("d_out")? as usize;
        let d_att = r.u32("d_att")? as usize;
        if d_in == 0 || d_out == 0 || d_att == 0 {
            return Err(Error::Format(format!("layer {l} has a zero dimension")));
        }
        let p = GsaLayerParams {
            w: r.mat(d_in, d_out, "w")?,
            wl: r.mat(d_in, d_att, "wl")?,
            wr: r.mat(d_in, d_att, "wr")?,
            wh: r.mat(d_in, d_att, "wh")?,
            wg: r.mat(d_att, d_in, "wg")?,
            gamma: r.f64("gamma")?,
        };
        p.validate()
            .map_err(|e| Error::Format(format!("layer {l}: {e}")))?;
        if let Some(prev) = out.last().map(|q: &GsaLayerParams| q.d_out()) {
            if prev != d_in {
                return Err(Error::Format(format!(
                    "layer {l} takes width {d_in} but the previous layer emits {prev}"
                )));
            }
        }
        out.push(p);
    }
    if r.remaining() != 0 {
        return Err(Error::Format(format!("{} trailing bytes after the last layer", r.remaining())));
    }
    Ok(out)
}

pub fn save(path: &Path, params: &[GsaLayerParams]) -> Result<()> {
    std::fs::write(path, encode(params))?;
    Ok(())
}

pub fn load(path: &Path) -> Result<Vec<GsaLayerParams>> {
    decode(&std::fs::read(path)?)
}
