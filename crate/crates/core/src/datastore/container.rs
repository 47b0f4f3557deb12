//! Layout (all integers little-endian):
//!
//! ```text
//! "CCRS" | version u32 | kind str | n_meta u32 | (key str, value str)*
//!        | n_tensors u32 | (name str, rank u32, dims u64*rank, f64*Π dims)*
//! ```
//!
//! where `str` is a u32 byte length followed by UTF-8.

use std::fs;
use std::path::Path;

use ndarray::{Array0, Array1, Array2, Array4, ArrayD, IxDyn};

use crate::error::{Error, Result};

pub const MAGIC: &[u8; 4] = b"CCRS";
pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Container {
    pub kind: String,
    pub meta: Vec<(String, String)>,
    pub tensors: Vec<(String, ArrayD<f64>)>,
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|&e| e <= self.buf.len())
            .ok_or_else(|| Error::Corrupt(format!("container truncated at byte {}", self.pos)))?;
        let s = &self.buf[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }

    fn string(&mut self) -> Result<String> {
        let n = self.u32()? as usize;
        String::from_utf8(self.take(n)?.to_vec()).map_err(|_| Error::Corrupt("metadata is not UTF-8".into()))
    }
}

fn put_str(out: &mut Vec<u8>, s: &str) {
    out.extend((s.len() as u32).to_le_bytes());
    out.extend(s.as_bytes());
}

impl Container {
    pub fn new(kind: &str) -> Self {
        Self {
            kind: kind.to_string(),
            ..Self::default()
        }
    }

    pub fn set(&mut self, key: impl Into<String>, value: impl ToString) {
        self.meta.push((key.into(), value.to_string()));
    }

    pub fn put(&mut self, name: impl Into<String>, t: ArrayD<f64>) {
        self.tensors.push((name.into(), t));
    }

    pub fn put_scalar(&mut self, name: impl Into<String>, x: f64) {
        self.put(name, Array0::from_elem((), x).into_dyn());
    }

    pub fn put_vec(&mut self, name: impl Into<String>, x: &[f64]) {
        self.put(name, Array1::from_vec(x.to_vec()).into_dyn());
    }

    pub fn get(&self, key: &str) -> Result<&str> {
        self.meta
            .iter()
            .find(|(k, _)| k == key)
            .map(|(_, v)| v.as_str())
            .ok_or_else(|| Error::Corrupt(format!("missing metadata `{key}`")))
    }

    pub fn get_opt(&self, key: &str) -> Option<&str> {
        self.meta.iter().find(|(k, _)| k == key).map(|(_, v)| v.as_str())
    }

    pub fn parse<T: std::str::FromStr>(&self, key: &str) -> Result<T> {
        let v = self.get(key)?;
        v.parse()
            .map_err(|_| Error::Corrupt(format!("metadata `{key}` has unparsable value `{v}`")))
    }

    pub fn has_tensor(&self, name: &str) -> bool {
        self.tensors.iter().any(|(k, _)| k == name)
    }

    pub fn tensor(&self, name: &str) -> Result<&ArrayD<f64>> {
        self.tensors
            .iter()
            .find(|(k, _)| k == name)
            .map(|(_, t)| t)
            .ok_or_else(|| Error::Corrupt(format!("missing tensor `{name}`")))
    }

    pub fn scalar(&self, name: &str) -> Result<f64> {
        let t = self.tensor(name)?;
        if t.ndim() != 0 {
            return Err(Error::Corrupt(format!("tensor `{name}` is not a scalar")));
        }
        Ok(t[IxDyn(&[])])
    }

    pub fn vec(&self, name: &str) -> Result<Vec<f64>> {
        Ok(self.array1(name)?.to_vec())
    }

    pub fn array1(&self, name: &str) -> Result<Array1<f64>> {
        self.shaped(name)
    }

    pub fn array2(&self, name: &str) -> Result<Array2<f64>> {
        self.shaped(name)
    }

    pub fn array4(&self, name: &str) -> Result<Array4<f64>> {
        self.shaped(name)
    }

    fn shaped<D: ndarray::Dimension>(&self, name: &str) -> Result<ndarray::Array<f64, D>> {
        self.tensor(name)?
            .clone()
            .into_dimensionality()
            .map_err(|_| Error::Corrupt(format!("tensor `{name}` has the wrong rank")))
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        out.extend(MAGIC);
        out.extend(FORMAT_VERSION.to_le_bytes());
        put_str(&mut out, &self.kind);
        out.extend((self.meta.len() as u32).to_le_bytes());
        for (k, v) in &self.meta {
            put_str(&mut out, k);
            put_str(&mut out, v);
        }
        out.extend((self.tensors.len() as u32).to_le_bytes());
        for (name, t) in &self.tensors {
            put_str(&mut out, name);
            out.extend((t.ndim() as u32).to_le_bytes());
            for &d in t.shape() {
                out.extend((d as u64).to_le_bytes());
            }
            for x in t.as_standard_layout().iter() {
                out.extend(x.to_le_bytes());
            }
        }
        out
    }

    pub fn from_bytes(buf: &[u8]) -> Result<Self> {
        let mut r = Reader { buf, pos: 0 };
        if r.take(4).map_err(|_| Error::Corrupt("file shorter than the magic bytes".into()))? != MAGIC {
            return Err(Error::Corrupt("bad magic bytes".into()));
        }
        let version = r.u32()?;
        if version != FORMAT_VERSION {
            return Err(Error::VersionMismatch {
                found: version,
                expected: FORMAT_VERSION,
            });
        }
        let kind = r.string()?;
        let n_meta = r.u32()? as usize;
        let mut meta = Vec::with_capacity(n_meta.min(1 << 16));
        for _ in 0..n_meta {
            meta.push((r.string()?, r.string()?));
        }
        let n_t = r.u32()? as usize;
        let mut tensors = Vec::with_capacity(n_t.min(1 << 16));
        for _ in 0..n_t {
            let name = r.string()?;
            let rank = r.u32()? as usize;
            if rank > 8 {
                return Err(Error::Corrupt(format!("tensor `{name}` claims rank {rank}")));
            }
            let mut dims = Vec::with_capacity(rank);
            for _ in 0..rank {
                dims.push(r.u64()? as usize);
            }
            let n = dims
                .iter()
                .try_fold(1usize, |acc, &d| acc.checked_mul(d))
                .and_then(|n| n.checked_mul(8))
                .ok_or_else(|| Error::Corrupt(format!("tensor `{name}` shape overflows")))?;
            let bytes = r.take(n)?;
            let data: Vec<f64> = bytes
                .chunks_exact(8)
                .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
                .collect();
            let t = ArrayD::from_shape_vec(IxDyn(&dims), data).expect("length matches shape");
            tensors.push((name, t));
        }
        if r.pos != buf.len() {
            return Err(Error::Corrupt(format!("{} trailing bytes after the last tensor", buf.len() - r.pos)));
        }
        Ok(Self { kind, meta, tensors })
    }

    pub fn expect_kind(&self, kind: &str) -> Result<()> {
        if self.kind != kind {
            return Err(Error::Corrupt(format!("container holds `{}`, expected `{kind}`", self.kind)));
        }
        Ok(())
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        fs::write(path, self.to_bytes())?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_bytes(&fs::read(path)?)
    }
}
