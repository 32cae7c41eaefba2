//! Binary checkpoint files.
//!
//! Little-endian layout:
//!
//! ```text
//! magic     b"CGCK"
//! version   u16 (= 1)
//! role      u8   0 generator-G, 1 generator-F, 2 discriminator-X,
//!                3 discriminator-Y, 4 crop-mapper
//! epoch     u32
//! count     u32  number of tensors
//! manifest  count × (ndim u8, ndim × u32 dims)
//! values    Σ product(dims) × f64
//! metadata  u32 byte length, then UTF-8 "key=value\n" lines
//! ```
//!
//! Tensors are the network's parameters followed by the running mean and
//! variance of each batch-norm layer.

use std::collections::BTreeMap;
use std::path::Path;

use crate::binio::ByteReader;
use crate::error::{Error, Result};
use crate::networks::{build, Network, Role};
use crate::tensor::Tensor;

const MAGIC: &[u8; 4] = b"CGCK";
const VERSION: u16 = 1;

#[derive(Clone, Debug, PartialEq)]
pub struct Checkpoint {
    pub network: Network,
    pub epoch: u32,
    pub metadata: BTreeMap<String, String>,
}

impl Checkpoint {
    pub fn new(network: Network, epoch: u32) -> Self {
        Checkpoint {
            network,
            epoch,
            metadata: BTreeMap::new(),
        }
    }

    pub fn with_meta(mut self, key: &str, value: impl ToString) -> Self {
        self.metadata.insert(key.to_owned(), value.to_string());
        self
    }

    pub fn role(&self) -> Role {
        self.network.role()
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let tensors = self.network.state_tensors();
        let mut out = Vec::new();
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&VERSION.to_le_bytes());
        out.push(self.network.role().code());
        out.extend_from_slice(&self.epoch.to_le_bytes());
        out.extend_from_slice(&(tensors.len() as u32).to_le_bytes());
        for t in &tensors {
            out.push(t.shape().len() as u8);
            for &d in t.shape() {
                out.extend_from_slice(&(d as u32).to_le_bytes());
            }
        }
        for v in tensors.iter().flat_map(|t| t.data()) {
            out.extend_from_slice(&v.to_le_bytes());
        }
        let mut meta = String::new();
        for (k, v) in &self.metadata {
            if k.contains(['=', '\n']) || v.contains('\n') {
                return Err(Error::usage(format!("metadata entry {k:?} cannot be encoded")));
            }
            meta.push_str(k);
            meta.push('=');
            meta.push_str(v);
            meta.push('\n');
        }
        out.extend_from_slice(&(meta.len() as u32).to_le_bytes());
        out.extend_from_slice(meta.as_bytes());
        Ok(out)
    }

    pub fn from_bytes(buf: &[u8]) -> Result<Self> {
        let mut r = ByteReader::new(buf);
        if r.bytes(4, "magic")? != MAGIC {
            return Err(Error::format(0, "not a checkpoint file (bad magic)"));
        }
        let version = r.u16("version")?;
        if version != VERSION {
            return Err(Error::format(4, format!("unsupported checkpoint version {version}")));
        }
        let code = r.u8("role")?;
        let role = Role::from_code(code).ok_or_else(|| Error::format(6, format!("unknown role code {code}")))?;
        let epoch = r.u32("epoch")?;
        let manifest_at = r.offset();
        let count = r.u32("tensor count")? as usize;
        let mut network = build(role, 0);
        let expected = network.state_tensors();
        if count != expected.len() {
            return Err(Error::format(
                manifest_at,
                format!("{role} stores {} tensors, manifest lists {count}", expected.len()),
            ));
        }
        let mut shapes = Vec::with_capacity(count);
        for want in &expected {
            let at = r.offset();
            let ndim = r.u8("tensor rank")? as usize;
            let mut dims = Vec::with_capacity(ndim);
            for _ in 0..ndim {
                dims.push(r.u32("tensor dimension")? as usize);
            }
            if dims != want.shape() {
                return Err(Error::format(
                    at,
                    format!("manifest shape {dims:?} does not match {role} tensor {:?}", want.shape()),
                ));
            }
            shapes.push(dims);
        }
        let mut tensors = Vec::with_capacity(count);
        for dims in shapes {
            let n: usize = dims.iter().product();
            let mut data = Vec::with_capacity(n);
            for _ in 0..n {
                data.push(r.f64("parameter value")?);
            }
            tensors.push(Tensor::new(dims, data)?);
        }
        let meta_len = r.u32("metadata length")? as usize;
        let at = r.offset();
        let meta_bytes = r.bytes(meta_len, "metadata")?;
        let meta = std::str::from_utf8(meta_bytes).map_err(|e| Error::format(at, format!("metadata is not UTF-8: {e}")))?;
        let mut metadata = BTreeMap::new();
        for line in meta.lines() {
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::format(at, format!("metadata line {line:?} lacks '='")))?;
            metadata.insert(k.to_owned(), v.to_owned());
        }
        r.expect_end()?;
        network.set_state_tensors(tensors)?;
        Ok(Checkpoint {
            network,
            epoch,
            metadata,
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_bytes()?)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_bytes(&std::fs::read(path)?)
    }

    /// Loads a checkpoint and checks it holds the expected role.
    pub fn load_role(path: &Path, role: Role) -> Result<Self> {
        let ck = Self::load(path)?;
        if ck.role() != role {
            return Err(Error::usage(format!(
                "{} holds a {} network, expected {role}",
                path.display(),
                ck.role()
            )));
        }
        Ok(ck)
    }
}
