//! Flat binary checkpoints.
//!
//! Layout: the 8 ASCII bytes `GANLAB01`, a little-endian `u64` value count,
//! then that many little-endian `f64`s. The shape registry (and reference
//! batch, if any) lives in a JSON sidecar at `<path>.json`.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{NetParams, ParamShape};
use crate::error::{Error, Result};
use crate::ndcore::Matrix;

pub const MAGIC: &[u8; 8] = b"GANLAB01";

#[derive(Serialize, Deserialize)]
struct Sidecar {
    registry: Vec<ParamShape>,
    reference: Option<Matrix>,
}

pub fn sidecar_path(path: &Path) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".json");
    PathBuf::from(s)
}

impl NetParams {
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(16 + 8 * self.theta.len());
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&(self.theta.len() as u64).to_le_bytes());
        for v in &self.theta {
            out.extend_from_slice(&v.to_le_bytes());
        }
        out
    }

    pub fn theta_from_bytes(bytes: &[u8]) -> std::result::Result<Vec<f64>, String> {
        if bytes.len() < 16 || &bytes[..8] != MAGIC {
            return Err("missing GANLAB01 header".into());
        }
        let n = u64::from_le_bytes(bytes[8..16].try_into().expect("8 bytes")) as usize;
        let body = &bytes[16..];
        if body.len() != n * 8 {
            return Err(format!("header declares {n} values but body holds {} bytes", body.len()));
        }
        Ok(body
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
            .collect())
    }

    /// Writes the binary file and its JSON sidecar.
    pub fn save(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_bytes())?;
        let sidecar = Sidecar {
            registry: self.registry.clone(),
            reference: self.reference.clone(),
        };
        fs::write(sidecar_path(path), serde_json::to_vec_pretty(&sidecar)?)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let bytes = fs::read(path)?;
        let theta = Self::theta_from_bytes(&bytes).map_err(|detail| Error::Checkpoint {
            path: path.to_owned(),
            detail,
        })?;
        let sidecar: Sidecar = serde_json::from_slice(&fs::read(sidecar_path(path))?)?;
        let mut params = NetParams::new(theta, sidecar.registry).map_err(|e| Error::Checkpoint {
            path: path.to_owned(),
            detail: e.to_string(),
        })?;
        params.reference = sidecar.reference;
        Ok(params)
    }
}
