//! Single-file tensor container used for checkpoints and weight files.
//!
//! ```text
//! magic      8 bytes  "SRTGARCH"
//! version    u32 LE   (1)
//! header_len u32 LE
//! header     header_len bytes of UTF-8 JSON
//! count      u32 LE   number of array records
//! records    count × {
//!     name_len u32 LE, name UTF-8,
//!     dtype    u8 (0 = f32, 1 = f64),
//!     ndim     u32 LE, dims ndim × u64 LE,
//!     data     product(dims) little-endian elements
//! }
//! ```

use std::collections::BTreeMap;
use std::io::{Read, Write};
use std::path::Path;

use srtgan_core::{DType, Tensor};

use crate::error::{Error, Result};

pub const MAGIC: &[u8; 8] = b"SRTGARCH";
pub const VERSION: u32 = 1;

/// A JSON header plus named `f32` arrays.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Archive {
    pub header: serde_json::Value,
    pub arrays: BTreeMap<String, Tensor<f32>>,
}

fn put_u32(out: &mut Vec<u8>, v: u32) {
    out.extend_from_slice(&v.to_le_bytes());
}

impl Archive {
    pub fn to_bytes(&self) -> Vec<u8> {
        let header = serde_json::to_vec(&self.header).expect("JSON value serialises");
        let mut out = Vec::with_capacity(64 + self.arrays.values().map(|t| 4 * t.len() + 64).sum::<usize>());
        out.extend_from_slice(MAGIC);
        put_u32(&mut out, VERSION);
        put_u32(&mut out, header.len() as u32);
        out.extend_from_slice(&header);
        put_u32(&mut out, self.arrays.len() as u32);
        for (name, t) in &self.arrays {
            put_u32(&mut out, name.len() as u32);
            out.extend_from_slice(name.as_bytes());
            out.push(0);
            put_u32(&mut out, t.shape().len() as u32);
            for &d in t.shape() {
                out.extend_from_slice(&(d as u64).to_le_bytes());
            }
            for v in t.data() {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> std::result::Result<Self, String> {
        let mut r = Reader { bytes, pos: 0 };
        if r.take(8)? != MAGIC {
            return Err(String::from("not an srtgan archive (bad magic)"));
        }
        let version = r.u32()?;
        if version != VERSION {
            return Err(format!("unsupported archive version {version}, expected {VERSION}"));
        }
        let hlen = r.u32()? as usize;
        let header = serde_json::from_slice(r.take(hlen)?).map_err(|e| format!("bad header: {e}"))?;
        let count = r.u32()?;
        let mut arrays = BTreeMap::new();
        for _ in 0..count {
            let nlen = r.u32()? as usize;
            let name = String::from_utf8(r.take(nlen)?.to_vec()).map_err(|_| String::from("array name is not UTF-8"))?;
            let dtype = match r.take(1)?[0] {
                0 => DType::F32,
                1 => DType::F64,
                t => return Err(format!("array `{name}`: unknown dtype tag {t}")),
            };
            let ndim = r.u32()? as usize;
            let mut dims = Vec::with_capacity(ndim);
            for _ in 0..ndim {
                dims.push(u64::from_le_bytes(r.take(8)?.try_into().unwrap()) as usize);
            }
            let n = dims
                .iter()
                .try_fold(1usize, |a, &d| a.checked_mul(d))
                .ok_or_else(|| format!("array `{name}`: dims overflow"))?;
            let raw = r.take(n.checked_mul(dtype.size_of()).ok_or("size overflow")?)?;
            let data: Vec<f32> = match dtype {
                DType::F32 => raw.chunks_exact(4).map(|c| f32::from_le_bytes(c.try_into().unwrap())).collect(),
                DType::F64 => raw
                    .chunks_exact(8)
                    .map(|c| f64::from_le_bytes(c.try_into().unwrap()) as f32)
                    .collect(),
            };
            let t = Tensor::from_vec(&dims, data).map_err(|e| format!("array `{name}`: {e}"))?;
            if arrays.insert(name.clone(), t).is_some() {
                return Err(format!("duplicate array `{name}`"));
            }
        }
        if r.pos != bytes.len() {
            return Err(format!("{} trailing bytes", bytes.len() - r.pos));
        }
        Ok(Archive { header, arrays })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        // Write-then-rename so an interrupted save never leaves a torn file.
        let tmp = path.with_extension("partial");
        let mut f = std::fs::File::create(&tmp).map_err(|e| Error::io(&tmp, e))?;
        f.write_all(&self.to_bytes()).map_err(|e| Error::io(&tmp, e))?;
        f.sync_all().map_err(|e| Error::io(&tmp, e))?;
        std::fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let mut bytes = Vec::new();
        std::fs::File::open(path)
            .and_then(|mut f| f.read_to_end(&mut bytes))
            .map_err(|e| Error::io(path, e))?;
        Archive::from_bytes(&bytes).map_err(|m| Error::format(path, m))
    }
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> std::result::Result<&'a [u8], String> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.bytes.len());
        let end = end.ok_or_else(|| format!("truncated at byte {}", self.pos))?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u32(&mut self) -> std::result::Result<u32, String> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }
}
