//! Named parameter tensors and the checkpoint file format.

use std::collections::HashMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{MotionError, Result};
use crate::numkernel::Tensor;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NamedTensor {
    pub name: String,
    pub shape: Vec<usize>,
    pub data: Vec<f64>,
}

/// Ordered collection of named parameters.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ParamStore {
    names: Vec<String>,
    tensors: Vec<Tensor>,
    index: HashMap<String, usize>,
}

impl ParamStore {
    pub fn new() -> Self {
        ParamStore::default()
    }

    pub fn insert(&mut self, name: impl Into<String>, t: Tensor) -> usize {
        let name = name.into();
        assert!(!self.index.contains_key(&name), "duplicate parameter {name}");
        self.index.insert(name.clone(), self.names.len());
        self.names.push(name);
        self.tensors.push(t);
        self.names.len() - 1
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    pub fn name(&self, i: usize) -> &str {
        &self.names[i]
    }

    pub fn get(&self, i: usize) -> &Tensor {
        &self.tensors[i]
    }

    pub fn get_mut(&mut self, i: usize) -> &mut Tensor {
        &mut self.tensors[i]
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.index.get(name).copied()
    }

    pub fn by_name(&self, name: &str) -> Option<&Tensor> {
        self.index_of(name).map(|i| &self.tensors[i])
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &Tensor)> {
        self.names.iter().map(String::as_str).zip(&self.tensors)
    }

    pub fn scalar_count(&self) -> usize {
        self.tensors.iter().map(Tensor::len).sum()
    }

    pub fn all_finite(&self) -> bool {
        self.tensors.iter().all(Tensor::all_finite)
    }

    pub fn to_named(&self) -> Vec<NamedTensor> {
        self.iter()
            .map(|(n, t)| NamedTensor {
                name: n.to_string(),
                shape: t.shape().to_vec(),
                data: t.data().to_vec(),
            })
            .collect()
    }

    /// Copies values from `named` into this store. Every stored parameter
    /// must be present with the same shape, and nothing extra.
    pub fn load_named(&mut self, named: &[NamedTensor]) -> Result<()> {
        if named.len() != self.len() {
            return Err(MotionError::Checkpoint(format!(
                "checkpoint has {} tensors, configuration expects {}",
                named.len(),
                self.len()
            )));
        }
        for nt in named {
            let i = self
                .index_of(&nt.name)
                .ok_or_else(|| MotionError::Checkpoint(format!("unexpected parameter {}", nt.name)))?;
            if self.tensors[i].shape() != nt.shape.as_slice() {
                return Err(MotionError::Checkpoint(format!(
                    "parameter {} has shape {:?}, configuration expects {:?}",
                    nt.name,
                    nt.shape,
                    self.tensors[i].shape()
                )));
            }
            self.tensors[i] = Tensor::new(nt.shape.clone(), nt.data.clone())
                .map_err(|e| MotionError::Checkpoint(format!("parameter {}: {e}", nt.name)))?;
        }
        Ok(())
    }
}

pub const CHECKPOINT_FORMAT: &str = "phasemotion-checkpoint";
pub const CHECKPOINT_VERSION: u32 = 1;

/// Adam moments saved alongside parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimizerState {
    pub step: u64,
    pub first_moment: Vec<NamedTensor>,
    pub second_moment: Vec<NamedTensor>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckpointFile {
    pub format: String,
    pub version: u32,
    pub config: super::ModelConfig,
    pub skeleton: serde_json::Value,
    pub params: Vec<NamedTensor>,
    #[serde(default)]
    pub optimizer: Option<OptimizerState>,
}

impl CheckpointFile {
    pub fn read(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| MotionError::io(path, e))?;
        let ck: CheckpointFile =
            serde_json::from_str(&text).map_err(|e| MotionError::Checkpoint(format!("{}: {e}", path.display())))?;
        if ck.format != CHECKPOINT_FORMAT || ck.version != CHECKPOINT_VERSION {
            return Err(MotionError::Checkpoint(format!(
                "{} is {} v{}, expected {CHECKPOINT_FORMAT} v{CHECKPOINT_VERSION}",
                path.display(),
                ck.format,
                ck.version
            )));
        }
        Ok(ck)
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string(self)?;
        std::fs::write(path, text).map_err(|e| MotionError::io(path, e))
    }
}
