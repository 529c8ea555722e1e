//! Versioned binary model container.
//!
//! Layout (all integers little-endian):
//!
//! ```text
//! "CSPC"  u32 version  u8 kind
//! u32 len, pipeline JSON (UTF-8)
//! u32 array count, then per array:
//!     u32 len, name (UTF-8)  u8 dtype (0x01 = f64)  u8 rank  u64 dims[rank]  f64 data[]
//! u32 CRC-32 of every preceding byte
//! ```

use crate::error::{Error, Result};

pub const MAGIC: &[u8; 4] = b"CSPC";
pub const FORMAT_VERSION: u32 = 1;
const DTYPE_F64: u8 = 0x01;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ModelKind {
    Plsr = 1,
    Cubist = 2,
    Lssvm = 3,
    Mlp = 4,
    Cnn = 5,
}

impl ModelKind {
    pub fn from_tag(tag: u8) -> Result<Self> {
        Ok(match tag {
            1 => ModelKind::Plsr,
            2 => ModelKind::Cubist,
            3 => ModelKind::Lssvm,
            4 => ModelKind::Mlp,
            5 => ModelKind::Cnn,
            other => return Err(Error::KindMismatch(format!("unknown model kind tag {other}"))),
        })
    }

    pub fn tag(self) -> u8 {
        self as u8
    }

    pub fn name(self) -> &'static str {
        match self {
            ModelKind::Plsr => "plsr",
            ModelKind::Cubist => "cubist",
            ModelKind::Lssvm => "lssvm",
            ModelKind::Mlp => "mlp",
            ModelKind::Cnn => "cnn",
        }
    }

    pub fn parse(name: &str) -> Result<Self> {
        Ok(match name.to_ascii_lowercase().as_str() {
            "plsr" | "pls" => ModelKind::Plsr,
            "cubist" => ModelKind::Cubist,
            "lssvm" | "svm" => ModelKind::Lssvm,
            "mlp" => ModelKind::Mlp,
            "cnn" => ModelKind::Cnn,
            other => return Err(Error::InvalidParams(format!("unknown model kind {other:?}"))),
        })
    }
}

impl std::fmt::Display for ModelKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NamedArray {
    pub name: String,
    pub dims: Vec<usize>,
    pub data: Vec<f64>,
}

impl NamedArray {
    pub fn new(name: impl Into<String>, dims: Vec<usize>, data: Vec<f64>) -> Result<Self> {
        let name = name.into();
        if dims.iter().product::<usize>() != data.len() {
            return Err(Error::Container(format!("array {name:?}: dims {dims:?} do not match {} values", data.len())));
        }
        if dims.len() > u8::MAX as usize {
            return Err(Error::Container(format!("array {name:?}: rank {} too large", dims.len())));
        }
        Ok(Self { name, dims, data })
    }

    pub fn vector(name: impl Into<String>, data: Vec<f64>) -> Self {
        let n = data.len();
        Self { name: name.into(), dims: vec![n], data }
    }

    pub fn scalar(name: impl Into<String>, v: f64) -> Self {
        Self::vector(name, vec![v])
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Container {
    pub kind: ModelKind,
    pub pipeline_json: String,
    pub arrays: Vec<NamedArray>,
}

fn put_u32(out: &mut Vec<u8>, v: usize, what: &str) -> Result<()> {
    let v = u32::try_from(v).map_err(|_| Error::Container(format!("{what} length {v} exceeds u32")))?;
    out.extend_from_slice(&v.to_le_bytes());
    Ok(())
}

impl Container {
    pub fn get(&self, name: &str) -> Result<&NamedArray> {
        self.arrays
            .iter()
            .find(|a| a.name == name)
            .ok_or_else(|| Error::Container(format!("missing array {name:?}")))
    }

    pub fn has(&self, name: &str) -> bool {
        self.arrays.iter().any(|a| a.name == name)
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let mut out = Vec::new();
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
        out.push(self.kind.tag());
        put_u32(&mut out, self.pipeline_json.len(), "pipeline")?;
        out.extend_from_slice(self.pipeline_json.as_bytes());
        put_u32(&mut out, self.arrays.len(), "array count")?;
        for a in &self.arrays {
            put_u32(&mut out, a.name.len(), "name")?;
            out.extend_from_slice(a.name.as_bytes());
            out.push(DTYPE_F64);
            out.push(a.dims.len() as u8);
            for &d in &a.dims {
                out.extend_from_slice(&(d as u64).to_le_bytes());
            }
            for v in &a.data {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        let crc = crc32fast::hash(&out);
        out.extend_from_slice(&crc.to_le_bytes());
        Ok(out)
    }

    /// Parse a container. The version is checked before the checksum so that
    /// files from a newer writer report as unsupported rather than corrupt.
    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        if bytes.len() < 4 + 4 + 1 + 4 + 4 + 4 || &bytes[..4] != MAGIC {
            return Err(Error::Container("not a model container (bad magic or truncated)".into()));
        }
        let version = u32::from_le_bytes(bytes[4..8].try_into().expect("4 bytes"));
        if version != FORMAT_VERSION {
            return Err(Error::UnsupportedVersion(version));
        }
        let (body, tail) = bytes.split_at(bytes.len() - 4);
        let stored = u32::from_le_bytes(tail.try_into().expect("4 bytes"));
        let computed = crc32fast::hash(body);
        if stored != computed {
            return Err(Error::CrcMismatch { stored, computed });
        }
        let mut r = Reader { buf: body, pos: 8 };
        let kind = ModelKind::from_tag(r.u8()?)?;
        let len = r.u32()? as usize;
        let pipeline_json = String::from_utf8(r.take(len)?.to_vec())
            .map_err(|_| Error::Container("pipeline blob is not UTF-8".into()))?;
        let count = r.u32()? as usize;
        let mut arrays = Vec::with_capacity(count.min(1024));
        for _ in 0..count {
            let len = r.u32()? as usize;
            let name = String::from_utf8(r.take(len)?.to_vec())
                .map_err(|_| Error::Container("array name is not UTF-8".into()))?;
            let dtype = r.u8()?;
            if dtype != DTYPE_F64 {
                return Err(Error::Container(format!("array {name:?}: unknown dtype {dtype:#04x}")));
            }
            let rank = r.u8()? as usize;
            let mut dims = Vec::with_capacity(rank);
            let mut total: usize = 1;
            for _ in 0..rank {
                let d = usize::try_from(r.u64()?).map_err(|_| Error::Container("dimension overflow".into()))?;
                total = total.checked_mul(d).ok_or_else(|| Error::Container("dimension overflow".into()))?;
                dims.push(d);
            }
            let raw = r.take(total.checked_mul(8).ok_or_else(|| Error::Container("dimension overflow".into()))?)?;
            let data = raw.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes"))).collect();
            arrays.push(NamedArray { name, dims, data });
        }
        if r.pos != body.len() {
            return Err(Error::Container(format!("{} trailing bytes before checksum", body.len() - r.pos)));
        }
        Ok(Self { kind, pipeline_json, arrays })
    }
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.buf.len());
        let end = end.ok_or_else(|| Error::Container("truncated container".into()))?;
        let s = &self.buf[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> Container {
        Container {
            kind: ModelKind::Plsr,
            pipeline_json: "{\"steps\":[]}".into(),
            arrays: vec![
                NamedArray::new("a", vec![2, 3], vec![1.0, 2.0, 3.0, 4.0, 5.0, -0.0]).unwrap(),
                NamedArray::scalar("b", f64::MIN_POSITIVE),
            ],
        }
    }

    #[test]
    fn round_trip() {
        let c = sample();
        let bytes = c.to_bytes().unwrap();
        assert_eq!(&bytes[..4], b"CSPC");
        assert_eq!(bytes[8], 1);
        assert_eq!(Container::from_bytes(&bytes).unwrap(), c);
    }

    #[test]
    fn corrupt_and_version() {
        let mut bytes = sample().to_bytes().unwrap();
        let n = bytes.len();
        bytes[n - 10] ^= 0x01;
        assert!(matches!(Container::from_bytes(&bytes), Err(Error::CrcMismatch { .. })));
        let mut bytes = sample().to_bytes().unwrap();
        bytes[4..8].copy_from_slice(&999u32.to_le_bytes());
        assert!(matches!(Container::from_bytes(&bytes), Err(Error::UnsupportedVersion(999))));
    }
}
