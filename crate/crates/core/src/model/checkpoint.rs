//! Versioned JSON checkpoints: schema hash, training config, and every
//! parameter tensor with its shape. Loading rejects schema mismatches.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{io_err, Error, Result};
use crate::graph::AttributeSchema;
use crate::model::params::ModelParams;
use crate::numerics::{DenseMatrix, Rng};
use crate::training::TrainConfig;

const CHECKPOINT_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
pub struct Checkpoint {
    pub version: u32,
    pub schema_hash: String,
    pub config: TrainConfig,
    pub n_features: usize,
    tensors: Vec<TensorEntry>,
}

#[derive(Serialize, Deserialize)]
struct TensorEntry {
    name: String,
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

pub fn save_checkpoint(
    path: &Path,
    params: &ModelParams,
    config: &TrainConfig,
    schema: &AttributeSchema,
) -> Result<()> {
    let checkpoint = Checkpoint {
        version: CHECKPOINT_VERSION,
        schema_hash: format!("{:016x}", schema.content_hash()),
        config: config.clone(),
        n_features: params.n_features,
        tensors: params
            .tensors()
            .into_iter()
            .map(|(name, t)| TensorEntry {
                name: name.to_string(),
                rows: t.rows(),
                cols: t.cols(),
                data: t.data().to_vec(),
            })
            .collect(),
    };
    let json = serde_json::to_string(&checkpoint)
        .map_err(|e| Error::Numerical(format!("checkpoint serialization failed: {e}")))?;
    fs::write(path, json).map_err(io_err(path))?;
    Ok(())
}

pub fn load_checkpoint(
    path: &Path,
    schema: &AttributeSchema,
) -> Result<(ModelParams, TrainConfig)> {
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    let checkpoint: Checkpoint = serde_json::from_str(&text).map_err(|e| Error::Parse {
        path: path.to_path_buf(),
        line: e.line(),
        message: e.to_string(),
    })?;
    if checkpoint.version != CHECKPOINT_VERSION {
        return Err(Error::Schema(format!(
            "checkpoint version {} is not supported (expected {})",
            checkpoint.version, CHECKPOINT_VERSION
        )));
    }
    let expected_hash = format!("{:016x}", schema.content_hash());
    if checkpoint.schema_hash != expected_hash {
        return Err(Error::Schema(format!(
            "checkpoint was trained under schema {} but the loaded schema hashes to {}",
            checkpoint.schema_hash, expected_hash
        )));
    }
    if checkpoint.n_features != schema.n_labels() {
        return Err(Error::Schema(format!(
            "checkpoint has {} feature columns but the schema defines {}",
            checkpoint.n_features,
            schema.n_labels()
        )));
    }

    let mut by_name = std::collections::BTreeMap::new();
    for entry in checkpoint.tensors {
        let tensor = DenseMatrix::new(entry.rows, entry.cols, entry.data)?;
        if by_name.insert(entry.name.clone(), tensor).is_some() {
            return Err(Error::Schema(format!(
                "duplicate tensor '{}' in checkpoint",
                entry.name
            )));
        }
    }

    // Start from a correctly shaped parameter set, then overwrite each slot.
    let mut params = ModelParams::init(
        checkpoint.config.dims,
        checkpoint.n_features,
        &mut Rng::new(0),
    );
    for (name, slot) in params.tensors_mut() {
        let tensor = by_name
            .remove(name)
            .ok_or_else(|| Error::Schema(format!("checkpoint is missing tensor '{name}'")))?;
        if tensor.shape() != slot.shape() {
            return Err(Error::Schema(format!(
                "tensor '{}' has shape {:?} but the config implies {:?}",
                name,
                tensor.shape(),
                slot.shape()
            )));
        }
        *slot = tensor;
    }
    if let Some(stray) = by_name.keys().next() {
        return Err(Error::Schema(format!(
            "unknown tensor '{stray}' in checkpoint"
        )));
    }
    Ok((params, checkpoint.config))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::Dims;

    fn temp_path(name: &str) -> std::path::PathBuf {
        let dir = std::env::temp_dir().join(format!("attrinfer-ckpt-{}", std::process::id()));
        fs::create_dir_all(&dir).unwrap();
        dir.join(name)
    }

    #[test]
    fn round_trips_bitwise() {
        let schema = AttributeSchema::from_counts(&[("a", 2), ("b", 3)]).unwrap();
        let config = TrainConfig {
            dims: Dims {
                latent: 4,
                mlp_hidden: 5,
                gcn_hidden: 6,
                decoder_hidden: 7,
            },
            seed: 42,
            ..TrainConfig::default()
        };
        let params = ModelParams::init(config.dims, schema.n_labels(), &mut Rng::new(42));
        let path = temp_path("rt.json");
        save_checkpoint(&path, &params, &config, &schema).unwrap();
        let (loaded, loaded_config) = load_checkpoint(&path, &schema).unwrap();
        assert_eq!(loaded.fingerprint(), params.fingerprint());
        assert_eq!(loaded_config, config);
    }

    #[test]
    fn rejects_schema_mismatch() {
        let schema = AttributeSchema::from_counts(&[("a", 2), ("b", 3)]).unwrap();
        let other = AttributeSchema::from_counts(&[("a", 2), ("b", 4)]).unwrap();
        let config = TrainConfig {
            dims: Dims {
                latent: 4,
                mlp_hidden: 5,
                gcn_hidden: 6,
                decoder_hidden: 7,
            },
            ..TrainConfig::default()
        };
        let params = ModelParams::init(config.dims, schema.n_labels(), &mut Rng::new(1));
        let path = temp_path("mismatch.json");
        save_checkpoint(&path, &params, &config, &schema).unwrap();
        match load_checkpoint(&path, &other) {
            Err(Error::Schema(msg)) => assert!(msg.contains("schema"), "{msg}"),
            other => panic!("expected schema error, got {other:?}"),
        }
    }
}
