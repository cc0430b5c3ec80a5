//! Binary checkpoint container.
//!
//! Layout (all integers little-endian):
//!
//! ```text
//! magic   4 bytes  "MVGN"
//! u16     format version (currently 1)
//! u16     role count
//! role:
//!   u16      role-name length, then that many UTF-8 bytes
//!   u8       frozen flag (0 or 1)
//!   u32      tensor count
//!   tensor:
//!     u16      tensor-name length, then that many UTF-8 bytes
//!     u8       rank (>= 1)
//!     u32*rank dims (each >= 1)
//!     f32*n    row-major data, n = product(dims)
//! u32     CRC32 (IEEE) over every preceding byte
//! ```
//!
//! A "role" is one network's weights (e.g. `backbone-generator`,
//! `plugin`); the frozen flag travels with the weights so a loaded model
//! knows whether it may be trained. Reading validates magic, version,
//! bounds, UTF-8 and the trailing CRC, so a corrupted file is rejected
//! rather than half-loaded.

use std::fs;
use std::path::Path;

use crate::params::ParamSet;
use crate::tensor::Tensor;
use crate::{Error, Result};

pub const MAGIC: [u8; 4] = *b"MVGN";
pub const FORMAT_VERSION: u16 = 1;

#[derive(Clone, Debug, PartialEq)]
pub struct Role {
    pub name: String,
    pub frozen: bool,
    pub tensors: Vec<(String, Tensor<f32>)>,
}

impl Role {
    /// Snapshot a parameter set under a role name.
    pub fn from_params(name: impl Into<String>, frozen: bool, params: &ParamSet<f32>) -> Self {
        Role {
            name: name.into(),
            frozen,
            tensors: params.iter().map(|p| (p.name.clone(), p.tensor.clone())).collect(),
        }
    }

    /// Rebuild a parameter set; trainability mirrors the frozen flag.
    pub fn to_params(&self) -> ParamSet<f32> {
        let mut ps = ParamSet::new();
        for (name, t) in &self.tensors {
            ps.push(name.clone(), t.clone());
        }
        ps.set_trainable(!self.frozen);
        ps
    }

    pub fn tensor(&self, name: &str) -> Option<&Tensor<f32>> {
        self.tensors.iter().find(|(n, _)| n == name).map(|(_, t)| t)
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct Checkpoint {
    pub roles: Vec<Role>,
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize, what: &str) -> Result<&'a [u8]> {
        if self.pos + n > self.buf.len() {
            return Err(Error::Format(format!(
                "checkpoint truncated reading {what}: need {n} bytes at offset {}, file has {}",
                self.pos,
                self.buf.len()
            )));
        }
        let s = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u8(&mut self, what: &str) -> Result<u8> {
        Ok(self.take(1, what)?[0])
    }

    fn u16(&mut self, what: &str) -> Result<u16> {
        let b = self.take(2, what)?;
        Ok(u16::from_le_bytes([b[0], b[1]]))
    }

    fn u32(&mut self, what: &str) -> Result<u32> {
        let b = self.take(4, what)?;
        Ok(u32::from_le_bytes([b[0], b[1], b[2], b[3]]))
    }

    fn string(&mut self, what: &str) -> Result<String> {
        let len = self.u16(what)? as usize;
        let bytes = self.take(len, what)?;
        String::from_utf8(bytes.to_vec())
            .map_err(|_| Error::Format(format!("checkpoint {what} is not valid UTF-8")))
    }
}

impl Checkpoint {
    pub fn new() -> Self {
        Checkpoint { roles: Vec::new() }
    }

    pub fn push_role(&mut self, role: Role) {
        self.roles.push(role);
    }

    pub fn role(&self, name: &str) -> Option<&Role> {
        self.roles.iter().find(|r| r.name == name)
    }

    /// Role lookup that reports which roles exist on failure.
    pub fn require_role(&self, name: &str) -> Result<&Role> {
        self.role(name).ok_or_else(|| {
            let have: Vec<&str> = self.roles.iter().map(|r| r.name.as_str()).collect();
            Error::Format(format!("checkpoint has no role '{name}' (present: {have:?})"))
        })
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let mut out = Vec::new();
        out.extend_from_slice(&MAGIC);
        out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
        let nroles = u16::try_from(self.roles.len())
            .map_err(|_| Error::Format(format!("too many roles ({}) for format", self.roles.len())))?;
        out.extend_from_slice(&nroles.to_le_bytes());
        for role in &self.roles {
            write_string(&mut out, &role.name, "role name")?;
            out.push(role.frozen as u8);
            let nt = u32::try_from(role.tensors.len())
                .map_err(|_| Error::Format("too many tensors for format".into()))?;
            out.extend_from_slice(&nt.to_le_bytes());
            for (name, t) in &role.tensors {
                write_string(&mut out, name, "tensor name")?;
                let rank = u8::try_from(t.shape().len())
                    .map_err(|_| Error::Format(format!("tensor '{name}' rank exceeds format limit")))?;
                out.push(rank);
                for &d in t.shape() {
                    let d32 = u32::try_from(d)
                        .map_err(|_| Error::Format(format!("tensor '{name}' dim {d} exceeds format limit")))?;
                    out.extend_from_slice(&d32.to_le_bytes());
                }
                for &v in t.data() {
                    out.extend_from_slice(&v.to_le_bytes());
                }
            }
        }
        let crc = crc32fast::hash(&out);
        out.extend_from_slice(&crc.to_le_bytes());
        Ok(out)
    }

    pub fn from_bytes(buf: &[u8]) -> Result<Self> {
        if buf.len() < MAGIC.len() + 2 + 2 + 4 {
            return Err(Error::Format(format!("checkpoint too short ({} bytes)", buf.len())));
        }
        let (payload, crc_bytes) = buf.split_at(buf.len() - 4);
        let stored = u32::from_le_bytes([crc_bytes[0], crc_bytes[1], crc_bytes[2], crc_bytes[3]]);
        let computed = crc32fast::hash(payload);
        if stored != computed {
            return Err(Error::Format(format!(
                "checkpoint CRC mismatch: stored {stored:#010x}, computed {computed:#010x}"
            )));
        }
        let mut r = Reader { buf: payload, pos: 0 };
        let magic = r.take(4, "magic")?;
        if magic != MAGIC {
            return Err(Error::Format(format!("bad magic {magic:02x?}, expected {MAGIC:02x?}")));
        }
        let version = r.u16("version")?;
        if version != FORMAT_VERSION {
            return Err(Error::Format(format!(
                "unsupported checkpoint version {version}, this build reads {FORMAT_VERSION}"
            )));
        }
        let nroles = r.u16("role count")? as usize;
        let mut roles = Vec::with_capacity(nroles);
        for _ in 0..nroles {
            let name = r.string("role name")?;
            let frozen = match r.u8("frozen flag")? {
                0 => false,
                1 => true,
                x => return Err(Error::Format(format!("role '{name}': invalid frozen flag {x}"))),
            };
            let nt = r.u32("tensor count")? as usize;
            let mut tensors = Vec::with_capacity(nt);
            for _ in 0..nt {
                let tname = r.string("tensor name")?;
                let rank = r.u8("rank")? as usize;
                if rank == 0 {
                    return Err(Error::Format(format!("tensor '{tname}': rank 0 is invalid")));
                }
                let mut shape = Vec::with_capacity(rank);
                for _ in 0..rank {
                    let d = r.u32("dim")? as usize;
                    if d == 0 {
                        return Err(Error::Format(format!("tensor '{tname}': zero extent")));
                    }
                    shape.push(d);
                }
                let n: usize = shape.iter().product();
                let raw = r.take(4 * n, "tensor data")?;
                let mut data = Vec::with_capacity(n);
                for c in raw.chunks_exact(4) {
                    data.push(f32::from_le_bytes([c[0], c[1], c[2], c[3]]));
                }
                tensors.push((tname, Tensor::new(&shape, data)?));
            }
            roles.push(Role { name, frozen, tensors });
        }
        if r.pos != payload.len() {
            return Err(Error::Format(format!(
                "checkpoint has {} trailing bytes after last role",
                payload.len() - r.pos
            )));
        }
        Ok(Checkpoint { roles })
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        let bytes = self.to_bytes()?;
        fs::write(path, bytes).map_err(|e| Error::io(path, e))
    }

    pub fn read(path: &Path) -> Result<Self> {
        let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
        Self::from_bytes(&bytes).map_err(|e| match e {
            Error::Format(m) => Error::Format(format!("{}: {m}", path.display())),
            other => other,
        })
    }
}

fn write_string(out: &mut Vec<u8>, s: &str, what: &str) -> Result<()> {
    let len = u16::try_from(s.len())
        .map_err(|_| Error::Format(format!("{what} '{s}' exceeds format length limit")))?;
    out.extend_from_slice(&len.to_le_bytes());
    out.extend_from_slice(s.as_bytes());
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> Checkpoint {
        let mut w = Tensor::<f32>::randn(&[3, 4], 1).unwrap();
        // exercise special values
        w.data_mut()[0] = 0.0;
        w.data_mut()[1] = -0.0;
        w.data_mut()[2] = f32::MIN_POSITIVE / 2.0; // subnormal
        let b = Tensor::<f32>::randn(&[4], 2).unwrap();
        let mut ck = Checkpoint::new();
        ck.push_role(Role {
            name: "backbone-generator".into(),
            frozen: true,
            tensors: vec![("w".into(), w), ("b".into(), b)],
        });
        ck.push_role(Role { name: "plugin".into(), frozen: false, tensors: vec![] });
        ck
    }

    #[test]
    fn roundtrip_is_bit_exact() {
        let ck = sample();
        let bytes = ck.to_bytes().unwrap();
        let back = Checkpoint::from_bytes(&bytes).unwrap();
        assert_eq!(ck.roles.len(), back.roles.len());
        for (a, b) in ck.roles.iter().zip(&back.roles) {
            assert_eq!(a.name, b.name);
            assert_eq!(a.frozen, b.frozen);
            for ((na, ta), (nb, tb)) in a.tensors.iter().zip(&b.tensors) {
                assert_eq!(na, nb);
                assert_eq!(ta.shape(), tb.shape());
                for (x, y) in ta.data().iter().zip(tb.data()) {
                    assert_eq!(x.to_bits(), y.to_bits());
                }
            }
        }
    }

    #[test]
    fn every_corrupted_byte_is_detected() {
        let bytes = sample().to_bytes().unwrap();
        // Flipping any single byte must fail (CRC, magic, or structure).
        for i in (0..bytes.len()).step_by(7) {
            let mut bad = bytes.clone();
            bad[i] ^= 0x40;
            assert!(Checkpoint::from_bytes(&bad).is_err(), "corruption at byte {i} accepted");
        }
    }

    #[test]
    fn truncation_is_detected() {
        let bytes = sample().to_bytes().unwrap();
        for cut in [1, 4, 17, bytes.len() / 2, bytes.len() - 1] {
            assert!(Checkpoint::from_bytes(&bytes[..cut]).is_err(), "truncation to {cut} accepted");
        }
    }

    #[test]
    fn wrong_version_is_rejected() {
        let mut bytes = sample().to_bytes().unwrap();
        bytes[4] = 9; // version field
        let n = bytes.len();
        let crc = crc32fast::hash(&bytes[..n - 4]);
        bytes[n - 4..].copy_from_slice(&crc.to_le_bytes());
        let err = Checkpoint::from_bytes(&bytes).unwrap_err();
        assert!(err.to_string().contains("version"), "{err}");
    }

    #[test]
    fn params_roundtrip_keeps_freeze_semantics() {
        let mut ps = ParamSet::<f32>::new();
        ps.push("w", Tensor::randn(&[2, 2], 3).unwrap());
        let role = Role::from_params("backbone-generator", true, &ps);
        let back = role.to_params();
        assert!(!back.trainable());
        assert_eq!(ps.checksum(), back.checksum());
    }

    #[test]
    fn file_roundtrip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.ckpt");
        let ck = sample();
        ck.write(&path).unwrap();
        let back = Checkpoint::read(&path).unwrap();
        assert_eq!(ck.to_bytes().unwrap(), back.to_bytes().unwrap());
    }

    #[test]
    fn missing_role_is_reported_with_inventory() {
        let ck = sample();
        let err = ck.require_role("video-disc").unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("video-disc") && msg.contains("backbone-generator"), "{msg}");
    }
}
