//! Binary parameter files.
//!
//! Layout (all integers and floats little-endian):
//!
//! ```text
//! magic    8 bytes  "CURACKPT"
//! version  u32      1
//! kind     u32      see `CheckpointKind`
//! n_sizes  u32
//! sizes    n_sizes × u32     layer-size manifest
//! n_params u64
//! n_extra  u64
//! params   n_params × f64    declaration order
//! extra    n_extra × f64     kind-specific trailer
//! ```

use std::io::{Read, Write};
use std::path::Path;

use crate::error::{CuraError, Result};
use crate::nn::adam::Adam;
use crate::nn::gaussian::GaussianPolicy;
use crate::nn::mlp::Mlp;

pub const MAGIC: &[u8; 8] = b"CURACKPT";
pub const VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CheckpointKind {
    Mlp = 0,
    GaussianPolicy = 1,
    MapEncoder = 2,
    Adam = 3,
}

impl CheckpointKind {
    fn from_u32(v: u32) -> Result<Self> {
        Ok(match v {
            0 => CheckpointKind::Mlp,
            1 => CheckpointKind::GaussianPolicy,
            2 => CheckpointKind::MapEncoder,
            3 => CheckpointKind::Adam,
            _ => return Err(CuraError::Checkpoint(format!("unknown kind tag {v}"))),
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub kind: CheckpointKind,
    pub sizes: Vec<usize>,
    pub params: Vec<f64>,
    pub extra: Vec<f64>,
}

impl Checkpoint {
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(40 + 8 * (self.params.len() + self.extra.len()));
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&VERSION.to_le_bytes());
        out.extend_from_slice(&(self.kind as u32).to_le_bytes());
        out.extend_from_slice(&(self.sizes.len() as u32).to_le_bytes());
        for &s in &self.sizes {
            out.extend_from_slice(&(s as u32).to_le_bytes());
        }
        out.extend_from_slice(&(self.params.len() as u64).to_le_bytes());
        out.extend_from_slice(&(self.extra.len() as u64).to_le_bytes());
        for v in self.params.iter().chain(&self.extra) {
            out.extend_from_slice(&v.to_le_bytes());
        }
        out
    }

    pub fn from_bytes(mut bytes: &[u8]) -> Result<Self> {
        let bad = |m: &str| CuraError::Checkpoint(m.to_string());
        let mut magic = [0u8; 8];
        bytes.read_exact(&mut magic).map_err(|_| bad("truncated header"))?;
        if &magic != MAGIC {
            return Err(bad("bad magic"));
        }
        let version = read_u32(&mut bytes)?;
        if version != VERSION {
            return Err(CuraError::Checkpoint(format!("unsupported version {version}")));
        }
        let kind = CheckpointKind::from_u32(read_u32(&mut bytes)?)?;
        let n_sizes = read_u32(&mut bytes)? as usize;
        let sizes = (0..n_sizes)
            .map(|_| read_u32(&mut bytes).map(|s| s as usize))
            .collect::<Result<Vec<_>>>()?;
        let n_params = read_u64(&mut bytes)? as usize;
        let n_extra = read_u64(&mut bytes)? as usize;
        if bytes.len() != 8 * (n_params + n_extra) {
            return Err(bad("payload length does not match header"));
        }
        let mut floats = bytes
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()));
        let params = floats.by_ref().take(n_params).collect();
        let extra = floats.collect();
        Ok(Checkpoint {
            kind,
            sizes,
            params,
            extra,
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut f = std::fs::File::create(path).map_err(|e| CuraError::io(path, e))?;
        f.write_all(&self.to_bytes()).map_err(|e| CuraError::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let bytes = std::fs::read(path).map_err(|e| CuraError::io(path, e))?;
        Checkpoint::from_bytes(&bytes)
    }

    pub fn expect_kind(self, kind: CheckpointKind) -> Result<Self> {
        if self.kind != kind {
            return Err(CuraError::Checkpoint(format!(
                "expected {kind:?} checkpoint, found {:?}",
                self.kind
            )));
        }
        Ok(self)
    }
}

fn read_u32(bytes: &mut &[u8]) -> Result<u32> {
    let mut b = [0u8; 4];
    bytes
        .read_exact(&mut b)
        .map_err(|_| CuraError::Checkpoint("truncated header".into()))?;
    Ok(u32::from_le_bytes(b))
}

fn read_u64(bytes: &mut &[u8]) -> Result<u64> {
    let mut b = [0u8; 8];
    bytes
        .read_exact(&mut b)
        .map_err(|_| CuraError::Checkpoint("truncated header".into()))?;
    Ok(u64::from_le_bytes(b))
}

impl From<&Mlp> for Checkpoint {
    fn from(net: &Mlp) -> Self {
        Checkpoint {
            kind: CheckpointKind::Mlp,
            sizes: net.layer_sizes().to_vec(),
            params: net.params().to_vec(),
            extra: vec![],
        }
    }
}

impl From<&GaussianPolicy> for Checkpoint {
    fn from(p: &GaussianPolicy) -> Self {
        Checkpoint {
            kind: CheckpointKind::GaussianPolicy,
            sizes: p.net.layer_sizes().to_vec(),
            params: p.net.params().to_vec(),
            extra: p.log_std.clone(),
        }
    }
}

impl From<&Adam> for Checkpoint {
    /// Moments are stored as `m ++ v`; the trailer holds `[step, lr, β1, β2, ε]`.
    fn from(a: &Adam) -> Self {
        let mut params = a.m.clone();
        params.extend_from_slice(&a.v);
        Checkpoint {
            kind: CheckpointKind::Adam,
            sizes: vec![a.m.len()],
            params,
            extra: vec![a.step as f64, a.lr, a.beta1, a.beta2, a.eps],
        }
    }
}

impl Checkpoint {
    pub fn into_mlp(self) -> Result<Mlp> {
        let ck = self.expect_kind(CheckpointKind::Mlp)?;
        Mlp::from_params(&ck.sizes, ck.params)
    }

    pub fn into_policy(self) -> Result<GaussianPolicy> {
        let ck = self.expect_kind(CheckpointKind::GaussianPolicy)?;
        let net = Mlp::from_params(&ck.sizes, ck.params)?;
        if ck.extra.len() != net.output_dim() {
            return Err(CuraError::Checkpoint("log_std length mismatch".into()));
        }
        Ok(GaussianPolicy {
            net,
            log_std: ck.extra,
        })
    }

    pub fn into_adam(self) -> Result<Adam> {
        let ck = self.expect_kind(CheckpointKind::Adam)?;
        let n = *ck.sizes.first().ok_or_else(|| CuraError::Checkpoint("missing size".into()))?;
        if ck.params.len() != 2 * n || ck.extra.len() != 5 {
            return Err(CuraError::Checkpoint("adam payload mismatch".into()));
        }
        let (m, v) = ck.params.split_at(n);
        Ok(Adam {
            step: ck.extra[0] as u64,
            lr: ck.extra[1],
            beta1: ck.extra[2],
            beta2: ck.extra[3],
            eps: ck.extra[4],
            m: m.to_vec(),
            v: v.to_vec(),
        })
    }
}
