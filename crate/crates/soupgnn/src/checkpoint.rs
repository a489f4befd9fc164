//! Checkpoint directory: `header.json` plus `params.bin`, the tensors as
//! row-major little-endian floats (width given by `dtype`) in manifest order.

use std::path::Path;

use serde::{Deserialize, Serialize};
use soupgnn_core::nn::{Hyperparams, ModelArch, ModelParams};
use soupgnn_core::soup::Ingredient;
use soupgnn_core::Real;

use crate::error::{self, IoError};

/// Element type of a checkpoint and of the run that produced it.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Precision {
    #[default]
    F32,
    F64,
}

impl Precision {
    pub fn of<T: Real>() -> Self {
        if core::mem::size_of::<T>() == 8 {
            Precision::F64
        } else {
            Precision::F32
        }
    }

    fn width(self) -> usize {
        match self {
            Precision::F32 => 4,
            Precision::F64 => 8,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TensorEntry {
    pub name: String,
    pub shape: Vec<usize>,
    /// Byte offset into `params.bin`.
    pub offset: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CheckpointHeader {
    pub arch: ModelArch,
    pub dtype: Precision,
    /// Absent for soups, which blend several training configurations.
    pub hyper: Option<Hyperparams>,
    pub init_seed: u64,
    pub init_fingerprint: String,
    pub val_acc: f64,
    pub tensors: Vec<TensorEntry>,
}

/// Parameters are held widened to f64; narrowing back to `dtype` is exact.
#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub header: CheckpointHeader,
    pub params: ModelParams<f64>,
}

impl Checkpoint {
    pub fn new<T: Real>(
        params: &ModelParams<T>,
        hyper: Option<Hyperparams>,
        init_seed: u64,
        init_fingerprint: String,
        val_acc: f64,
    ) -> Self {
        let dtype = Precision::of::<T>();
        let mut offset = 0;
        let tensors = params
            .manifest()
            .into_iter()
            .map(|(name, shape)| {
                let e = TensorEntry {
                    name,
                    offset,
                    shape: shape.clone(),
                };
                offset += shape.iter().product::<usize>() * dtype.width();
                e
            })
            .collect();
        Self {
            header: CheckpointHeader {
                arch: params.arch.clone(),
                dtype,
                hyper,
                init_seed,
                init_fingerprint,
                val_acc,
                tensors,
            },
            params: params.cast(),
        }
    }

    pub fn from_ingredient<T: Real>(ing: &Ingredient<T>, init_seed: u64) -> Self {
        Self::new(
            &ing.params,
            Some(ing.hyper.clone()),
            init_seed,
            ing.init_fingerprint.clone(),
            ing.val_acc,
        )
    }

    pub fn params_as<T: Real>(&self) -> ModelParams<T> {
        self.params.cast()
    }

    pub fn into_ingredient<T: Real>(self, id: usize) -> Ingredient<T> {
        Ingredient {
            id,
            params: self.params.cast(),
            hyper: self.header.hyper.unwrap_or_default(),
            val_acc: self.header.val_acc,
            init_fingerprint: self.header.init_fingerprint,
        }
    }

    pub fn save(&self, dir: &Path) -> Result<(), IoError> {
        error::create_dir(dir)?;
        error::write_json(&dir.join("header.json"), &self.header)?;
        let values = self.params.tensors().flatten();
        let bytes: Vec<u8> = match self.header.dtype {
            Precision::F32 => values.flat_map(|&v| (v as f32).to_le_bytes()).collect(),
            Precision::F64 => values.flat_map(|v| v.to_le_bytes()).collect(),
        };
        error::write(&dir.join("params.bin"), bytes)
    }

    pub fn load(dir: &Path) -> Result<Self, IoError> {
        let header_path = dir.join("header.json");
        let header: CheckpointHeader = error::read_json(&header_path)?;
        header.arch.validate().map_err(|source| IoError::Invalid {
            path: header_path.clone(),
            source,
        })?;
        let width = header.dtype.width();
        let expected = ModelParams::<f64>::zeros(&header.arch).manifest();
        let mut offset = 0;
        for (entry, (name, shape)) in header.tensors.iter().zip(&expected) {
            if &entry.name != name || &entry.shape != shape || entry.offset != offset {
                return Err(IoError::format(
                    &header_path,
                    format!(
                        "corrupt checkpoint: tensor {} does not match the architecture",
                        entry.name
                    ),
                ));
            }
            offset += shape.iter().product::<usize>() * width;
        }
        if header.tensors.len() != expected.len() {
            return Err(IoError::format(
                &header_path,
                "corrupt checkpoint: wrong tensor count",
            ));
        }
        let bin = dir.join("params.bin");
        let bytes = error::read(&bin)?;
        if bytes.len() != offset {
            return Err(IoError::format(
                &bin,
                format!(
                    "corrupt checkpoint: expected {offset} bytes, found {}",
                    bytes.len()
                ),
            ));
        }
        let flat: Vec<f64> = match header.dtype {
            Precision::F32 => bytes
                .chunks_exact(4)
                .map(|c| f32::from_le_bytes(c.try_into().unwrap()) as f64)
                .collect(),
            Precision::F64 => bytes
                .chunks_exact(8)
                .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
                .collect(),
        };
        let mut values = flat.into_iter();
        let tensors: Vec<Vec<f64>> = expected
            .iter()
            .map(|(_, shape)| values.by_ref().take(shape.iter().product()).collect())
            .collect();
        let params = ModelParams::from_tensors(&header.arch, tensors).map_err(|source| {
            IoError::Invalid {
                path: bin.clone(),
                source,
            }
        })?;
        if !params.is_finite() {
            return Err(IoError::format(
                &bin,
                "corrupt checkpoint: non-finite parameter",
            ));
        }
        Ok(Self { header, params })
    }
}
