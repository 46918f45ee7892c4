use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use base64::engine::general_purpose::STANDARD;
use base64::Engine;
use serde::{Deserialize, Serialize};

use super::{ParamStore, Tensor};
use crate::error::{Error, Result};

pub const CHECKPOINT_VERSION: &str = "ckpt.v1";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EncodedTensor {
    pub shape: Vec<usize>,
    /// Base64 of the little-endian float64 values in row-major order.
    pub data: String,
}

impl EncodedTensor {
    pub fn encode(t: &Tensor) -> Self {
        let bytes: Vec<u8> = t.data.iter().flat_map(|v| v.to_le_bytes()).collect();
        EncodedTensor {
            shape: t.shape.clone(),
            data: STANDARD.encode(bytes),
        }
    }

    pub fn decode(&self) -> Result<Tensor> {
        let bytes = STANDARD
            .decode(&self.data)
            .map_err(|e| Error::Schema(format!("bad tensor payload: {e}")))?;
        if bytes.len() % 8 != 0 {
            return Err(Error::Schema("tensor payload is not a multiple of 8 bytes".into()));
        }
        let data = bytes
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk")))
            .collect();
        Tensor::new(self.shape.clone(), data)
            .map_err(|_| Error::Schema("tensor payload does not match its shape".into()))
    }
}

/// Serialized parameters plus the configuration that produced them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub version: String,
    pub config: serde_json::Value,
    #[serde(default)]
    pub vocab: serde_json::Value,
    pub params: BTreeMap<String, EncodedTensor>,
}

impl Checkpoint {
    pub fn from_store(
        store: &ParamStore,
        config: serde_json::Value,
        vocab: serde_json::Value,
    ) -> Self {
        Checkpoint {
            version: CHECKPOINT_VERSION.to_string(),
            config,
            vocab,
            params: store
                .iter()
                .map(|p| (p.name.clone(), EncodedTensor::encode(&p.value)))
                .collect(),
        }
    }

    /// Overwrites every parameter of `store`; names and shapes must match.
    pub fn restore_into(&self, store: &mut ParamStore) -> Result<()> {
        if self.params.len() != store.len() {
            return Err(Error::Schema(format!(
                "checkpoint has {} parameters, model expects {}",
                self.params.len(),
                store.len()
            )));
        }
        for p in store.iter_mut() {
            let enc = self
                .params
                .get(&p.name)
                .ok_or_else(|| Error::Schema(format!("checkpoint lacks parameter `{}`", p.name)))?;
            let t = enc.decode()?;
            if t.shape != p.value.shape {
                return Err(Error::shape("restore", &p.value.shape, &t.shape));
            }
            p.value = t;
            p.grad = None;
        }
        Ok(())
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
            fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
        }
        fs::write(path, self.to_json()? + "\n").map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        if !path.is_file() {
            return Err(Error::NotFound(path.to_path_buf()));
        }
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let ck: Checkpoint = serde_json::from_str(&text)?;
        if ck.version != CHECKPOINT_VERSION {
            return Err(Error::Schema(format!(
                "unsupported checkpoint version `{}`, expected {CHECKPOINT_VERSION}",
                ck.version
            )));
        }
        Ok(ck)
    }
}
