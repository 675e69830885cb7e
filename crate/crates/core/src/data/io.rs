//! On-disk dataset layout.
//!
//! A dataset directory holds `samples.bin` (magic `CMKD`, version, `n`, `H`,
//! `W` as little-endian `u32`, then `n*H*W` row-major `f32`), a JSON sidecar
//! `samples.json` describing where each id lives, and `splits.csv` with one
//! `id,split,role` row per (sample, role).

use std::collections::HashMap;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::generate::{DistributionSpec, ImageSample, ImageShape};
use super::split::{BenchmarkSplit, Role};
use crate::error::{Error, Result};

pub const DATASET_MAGIC: &[u8; 4] = b"CMKD";
pub const DATASET_VERSION: u32 = 1;
pub const SAMPLES_FILE: &str = "samples.bin";
pub const SIDECAR_FILE: &str = "samples.json";
pub const SPLITS_FILE: &str = "splits.csv";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SidecarEntry {
    pub id: u64,
    /// Index of the image within `samples.bin`.
    pub offset: u64,
    pub source: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetSidecar {
    pub member_spec: DistributionSpec,
    pub nonmember_spec: DistributionSpec,
    pub seed: u64,
    pub height: usize,
    pub width: usize,
    pub entries: Vec<SidecarEntry>,
}

pub fn encode_images(samples: &[&ImageSample], shape: ImageShape) -> Result<Vec<u8>> {
    let mut out = Vec::with_capacity(20 + samples.len() * shape.pixels() * 4);
    out.extend_from_slice(DATASET_MAGIC);
    for v in [DATASET_VERSION, samples.len() as u32, shape.height as u32, shape.width as u32] {
        out.extend_from_slice(&v.to_le_bytes());
    }
    for s in samples {
        if s.pixels.len() != shape.pixels() {
            return Err(Error::contract(format!("sample {} has the wrong pixel count", s.id)));
        }
        for p in &s.pixels {
            out.extend_from_slice(&(*p as f32).to_le_bytes());
        }
    }
    Ok(out)
}

/// Decodes `samples.bin` into its shape and per-image pixel vectors.
pub fn decode_images(bytes: &[u8]) -> Result<(ImageShape, Vec<Vec<f64>>)> {
    let bad = |msg: &str| Error::format(None, format!("dataset: {msg}"));
    if bytes.len() < 20 || &bytes[..4] != DATASET_MAGIC {
        return Err(bad("bad magic"));
    }
    let word = |i: usize| u32::from_le_bytes(bytes[4 + 4 * i..8 + 4 * i].try_into().unwrap()) as usize;
    if word(0) as u32 != DATASET_VERSION {
        return Err(bad(&format!("unsupported version {}", word(0))));
    }
    let (n, h, w) = (word(1), word(2), word(3));
    let shape = ImageShape { height: h, width: w };
    let payload = &bytes[20..];
    if payload.len() != n * h * w * 4 {
        return Err(bad("payload length does not match header"));
    }
    let images = if h * w == 0 {
        vec![Vec::new(); n]
    } else {
        payload
            .chunks_exact(h * w * 4)
            .map(|img| {
                img.chunks_exact(4)
                    .map(|c| f32::from_le_bytes(c.try_into().unwrap()) as f64)
                    .collect()
            })
            .collect()
    };
    Ok((shape, images))
}

pub fn splits_csv(split: &BenchmarkSplit) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["id", "split", "role"])?;
    for role in Role::ALL {
        for s in split.role_samples(role) {
            w.write_record([s.id.to_string().as_str(), role.split_name(), role.as_str()])?;
        }
    }
    w.into_inner().map_err(|e| Error::Io(e.into_error()))
}

/// Writes the three dataset files into `dir`, creating it if needed.
pub fn save_split(
    dir: impl AsRef<Path>,
    split: &BenchmarkSplit,
    member_spec: &DistributionSpec,
    nonmember_spec: &DistributionSpec,
) -> Result<()> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir)?;
    let samples = split.unique_samples();
    fs::write(dir.join(SAMPLES_FILE), encode_images(&samples, split.shape)?)?;
    let sidecar = DatasetSidecar {
        member_spec: member_spec.clone(),
        nonmember_spec: nonmember_spec.clone(),
        seed: split.seed,
        height: split.shape.height,
        width: split.shape.width,
        entries: samples
            .iter()
            .enumerate()
            .map(|(i, s)| SidecarEntry {
                id: s.id,
                offset: i as u64,
                source: s.source.clone(),
            })
            .collect(),
    };
    fs::write(dir.join(SIDECAR_FILE), serde_json::to_vec_pretty(&sidecar)?)?;
    fs::write(dir.join(SPLITS_FILE), splits_csv(split)?)?;
    Ok(())
}

/// Reads a dataset directory back into a split plus its sidecar.
pub fn load_split(dir: impl AsRef<Path>) -> Result<(BenchmarkSplit, DatasetSidecar)> {
    let dir = dir.as_ref();
    let (shape, images) = decode_images(&fs::read(dir.join(SAMPLES_FILE))?)?;
    let sidecar: DatasetSidecar = serde_json::from_slice(&fs::read(dir.join(SIDECAR_FILE))?)?;
    if shape.height != sidecar.height || shape.width != sidecar.width {
        return Err(Error::format(None, "sidecar shape disagrees with samples.bin"));
    }
    let mut by_id = HashMap::new();
    for e in &sidecar.entries {
        let pixels = images
            .get(e.offset as usize)
            .ok_or_else(|| Error::format(None, format!("offset {} out of range", e.offset)))?;
        by_id.insert(
            e.id,
            ImageSample {
                id: e.id,
                pixels: pixels.clone(),
                source: e.source.clone(),
            },
        );
    }

    let mut split = BenchmarkSplit {
        train_set: Vec::new(),
        members_val: Vec::new(),
        nonmembers_val: Vec::new(),
        members_test: Vec::new(),
        nonmembers_test: Vec::new(),
        shape,
        seed: sidecar.seed,
    };
    let mut reader = csv::Reader::from_path(dir.join(SPLITS_FILE))?;
    for (i, record) in reader.records().enumerate() {
        let line = i + 2;
        let record = record?;
        if record.len() != 3 {
            return Err(Error::format(Some(line), "expected id,split,role"));
        }
        let id: u64 = record[0]
            .parse()
            .map_err(|_| Error::format(Some(line), format!("bad id '{}'", &record[0])))?;
        let role = Role::parse(&record[2])
            .ok_or_else(|| Error::format(Some(line), format!("unknown role '{}'", &record[2])))?;
        if record[1] != *role.split_name() {
            return Err(Error::format(Some(line), "split column disagrees with role"));
        }
        let sample = by_id
            .get(&id)
            .ok_or_else(|| Error::format(Some(line), format!("id {id} missing from sidecar")))?
            .clone();
        match role {
            Role::Train => split.train_set.push(sample),
            Role::MemberVal => split.members_val.push(sample),
            Role::NonmemberVal => split.nonmembers_val.push(sample),
            Role::MemberTest => split.members_test.push(sample),
            Role::NonmemberTest => split.nonmembers_test.push(sample),
        }
    }
    split.validate()?;
    Ok((split, sidecar))
}
