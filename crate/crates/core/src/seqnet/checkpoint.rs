//! Binary checkpoints: a magic tag, a format version, a JSON header that
//! describes dimensions and training settings, then every tensor as raw
//! little-endian `f64`. Reloaded parameters are bit-identical.

use std::io::{Read, Write};
use std::path::Path;

use serde::{de::DeserializeOwned, Deserialize, Serialize};

use super::params::{ModelDims, ModelParams, TENSOR_NAMES};
use super::{SeqError, TrainConfig};

pub const CHECKPOINT_MAGIC: &[u8; 4] = b"JRSQ";
pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TensorInfo {
    pub name: String,
    pub len: usize,
}

fn err(e: impl std::fmt::Display) -> SeqError {
    SeqError::Checkpoint(e.to_string())
}

/// Writes `header` and `tensors` under the given magic tag.
pub(crate) fn write_container<H: Serialize>(
    path: &Path,
    magic: &[u8; 4],
    header: &H,
    tensors: &[&[f64]],
) -> Result<(), SeqError> {
    let header = serde_json::to_vec(header).map_err(err)?;
    let total: usize = tensors.iter().map(|t| t.len()).sum();
    let mut buf = Vec::with_capacity(12 + header.len() + 8 * total);
    buf.extend_from_slice(magic);
    buf.extend_from_slice(&CHECKPOINT_VERSION.to_le_bytes());
    buf.extend_from_slice(&(header.len() as u32).to_le_bytes());
    buf.extend_from_slice(&header);
    for t in tensors {
        for v in *t {
            buf.extend_from_slice(&v.to_le_bytes());
        }
    }
    let mut f = std::fs::File::create(path).map_err(|e| err(format!("{}: {e}", path.display())))?;
    f.write_all(&buf).map_err(err)
}

pub(crate) fn read_container<H: DeserializeOwned>(
    path: &Path,
    magic: &[u8; 4],
) -> Result<(H, Vec<f64>), SeqError> {
    let mut bytes = Vec::new();
    std::fs::File::open(path)
        .and_then(|mut f| f.read_to_end(&mut bytes))
        .map_err(|e| err(format!("{}: {e}", path.display())))?;
    if bytes.len() < 12 || &bytes[0..4] != magic {
        return Err(err("bad magic"));
    }
    let version = u32::from_le_bytes(bytes[4..8].try_into().unwrap());
    if version != CHECKPOINT_VERSION {
        return Err(err(format!("unsupported version {version}")));
    }
    let hlen = u32::from_le_bytes(bytes[8..12].try_into().unwrap()) as usize;
    let body = bytes.get(12..12 + hlen).ok_or_else(|| err("truncated header"))?;
    let header = serde_json::from_slice(body).map_err(err)?;
    let raw = &bytes[12 + hlen..];
    if raw.len() % 8 != 0 {
        return Err(err("truncated tensor data"));
    }
    let values = raw
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect();
    Ok((header, values))
}

/// Fills `targets` in order from `values`, checking the header's lengths.
pub(crate) fn scatter(
    tensors: &[TensorInfo],
    values: &[f64],
    mut targets: Vec<&mut [f64]>,
) -> Result<(), SeqError> {
    if tensors.len() != targets.len() {
        return Err(err("tensor count mismatch"));
    }
    let mut offset = 0;
    for (info, target) in tensors.iter().zip(targets.iter_mut()) {
        if info.len != target.len() {
            return Err(err(format!("tensor {} has length {}, expected {}", info.name, info.len, target.len())));
        }
        let src = values.get(offset..offset + info.len).ok_or_else(|| err("truncated tensor data"))?;
        target.copy_from_slice(src);
        offset += info.len;
    }
    if offset != values.len() {
        return Err(err("trailing tensor data"));
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct Header {
    kind: String,
    dims: ModelDims,
    dropout: f64,
    append_competency: bool,
    seed: u64,
    train_config: TrainConfig,
    tensors: Vec<TensorInfo>,
}

/// Trained parameters together with what is needed to reproduce inputs.
#[derive(Debug, Clone, PartialEq)]
pub struct ProgressionModel {
    pub params: ModelParams,
    pub append_competency: bool,
    pub seed: u64,
    pub train_config: TrainConfig,
}

impl ProgressionModel {
    pub fn save(&self, path: &Path) -> Result<(), SeqError> {
        let tensors = self.params.tensors();
        let header = Header {
            kind: "bilstm-attention".into(),
            dims: self.params.dims,
            dropout: self.params.dropout,
            append_competency: self.append_competency,
            seed: self.seed,
            train_config: self.train_config.clone(),
            tensors: TENSOR_NAMES
                .iter()
                .zip(&tensors)
                .map(|(n, t)| TensorInfo {
                    name: n.to_string(),
                    len: t.len(),
                })
                .collect(),
        };
        write_container(path, CHECKPOINT_MAGIC, &header, &tensors)
    }

    pub fn load(path: &Path) -> Result<Self, SeqError> {
        let (header, values): (Header, Vec<f64>) = read_container(path, CHECKPOINT_MAGIC)?;
        if header.kind != "bilstm-attention" {
            return Err(err(format!("unexpected model kind {}", header.kind)));
        }
        let mut params = ModelParams::zeros(header.dims, header.dropout);
        scatter(&header.tensors, &values, params.tensors_mut())?;
        Ok(ProgressionModel {
            params,
            append_competency: header.append_competency,
            seed: header.seed,
            train_config: header.train_config,
        })
    }
}
