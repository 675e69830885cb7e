//! Binary checkpoint format.
//!
//! Layout (little-endian): magic `CMKM`, format version `u32`, manifest length
//! `u32`, JSON manifest, then every parameter as `f32` in declaration order
//! (per layer: weights row-major, then bias).

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::net::{Activation, DenoiserNet, Layer};
use super::schedule::ScheduleParams;
use super::train::{ModelCheckpoint, TrainingMeta};
use crate::error::{Error, Result};

pub const CHECKPOINT_MAGIC: &[u8; 4] = b"CMKM";
pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckpointManifest {
    pub layer_dims: Vec<usize>,
    pub pixels: usize,
    pub embed_width: usize,
    pub horizon: usize,
    pub activation: Activation,
    pub schedule: ScheduleParams,
    pub training_meta: TrainingMeta,
    pub seed: u64,
}

impl ModelCheckpoint {
    pub fn manifest(&self) -> CheckpointManifest {
        CheckpointManifest {
            layer_dims: self.net.layer_dims(),
            pixels: self.net.pixels,
            embed_width: self.net.embed_width,
            horizon: self.net.horizon,
            activation: self.net.activation,
            schedule: self.schedule.params(),
            training_meta: self.meta,
            seed: self.meta.seed,
        }
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let manifest = serde_json::to_vec(&self.manifest())?;
        let params = self.net.params();
        let mut out = Vec::with_capacity(12 + manifest.len() + 4 * params.len());
        out.extend_from_slice(CHECKPOINT_MAGIC);
        out.extend_from_slice(&CHECKPOINT_VERSION.to_le_bytes());
        out.extend_from_slice(&(manifest.len() as u32).to_le_bytes());
        out.extend_from_slice(&manifest);
        for p in params {
            out.extend_from_slice(&(p as f32).to_le_bytes());
        }
        Ok(out)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let header = |msg: &str| Error::format(None, format!("checkpoint: {msg}"));
        if bytes.len() < 12 || &bytes[..4] != CHECKPOINT_MAGIC {
            return Err(header("bad magic"));
        }
        let version = u32::from_le_bytes(bytes[4..8].try_into().unwrap());
        if version != CHECKPOINT_VERSION {
            return Err(header(&format!("unsupported version {version}")));
        }
        let len = u32::from_le_bytes(bytes[8..12].try_into().unwrap()) as usize;
        let body = bytes.get(12..12 + len).ok_or_else(|| header("truncated manifest"))?;
        let manifest: CheckpointManifest = serde_json::from_slice(body)?;

        let dims = &manifest.layer_dims;
        if dims.len() < 2 {
            return Err(header("manifest needs at least two layer dims"));
        }
        let mut net = DenoiserNet::from_layers(
            manifest.pixels,
            manifest.embed_width,
            manifest.horizon,
            manifest.activation,
            dims.windows(2).map(|w| Layer::zeros(w[0], w[1])).collect(),
        )?;
        let payload = &bytes[12 + len..];
        if payload.len() != 4 * net.param_count() {
            return Err(header(&format!(
                "payload holds {} bytes, manifest implies {}",
                payload.len(),
                4 * net.param_count()
            )));
        }
        let params: Vec<f64> = payload
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().unwrap()) as f64)
            .collect();
        net.set_params(&params)?;
        net.validate()?;
        Ok(Self {
            net,
            schedule: manifest.schedule.build()?,
            meta: manifest.training_meta,
        })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        fs::write(path, self.to_bytes()?)?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_bytes(&fs::read(path)?)
    }
}
