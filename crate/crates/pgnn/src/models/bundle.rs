//! Model bundles and the weight-file format.
//!
//! Layout: magic `PGNN`, u32 version, u32 config-blob length + JSON config
//! blob, u32 tensor count, then per tensor: u32 name length, UTF-8 name,
//! u32 ndim, u32 dims..., little-endian f32 data. Tensors cover trainable
//! parameters and running statistics, so a round trip reproduces eval-mode
//! forwards bit-exactly.

use super::inverse::{InverseNet, InverseNetConfig};
use super::regressor::{RegressorConfig, RegressorNet};
use crate::error::{Error, Result};
use crate::nn::{Mode, Module, ParamStore, Scalar, SlotKind, Tensor4};
use serde::{Deserialize, Serialize};
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

pub const WEIGHT_MAGIC: &[u8; 4] = b"PGNN";
pub const WEIGHT_VERSION: u32 = 1;

/// Which architecture a bundle holds, with its hyperparameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ModelConfig {
    Inverse(InverseNetConfig),
    Regressor(RegressorConfig),
}

enum NetKind<S: Scalar> {
    Inverse(Box<InverseNet<S>>),
    Regressor(Box<RegressorNet<S>>),
}

/// A network plus its configuration and training-mode flag.
pub struct ModelBundle<S: Scalar> {
    pub config: ModelConfig,
    net: NetKind<S>,
    training: bool,
}

impl<S: Scalar> ModelBundle<S> {
    pub fn build_inverse(cfg: &InverseNetConfig, seed: u64) -> Result<Self> {
        Ok(ModelBundle {
            config: ModelConfig::Inverse(*cfg),
            net: NetKind::Inverse(Box::new(InverseNet::build(cfg, seed)?)),
            training: true,
        })
    }

    pub fn build_regressor(cfg: &RegressorConfig, seed: u64) -> Result<Self> {
        Ok(ModelBundle {
            config: ModelConfig::Regressor(*cfg),
            net: NetKind::Regressor(Box::new(RegressorNet::build(cfg, seed)?)),
            training: true,
        })
    }

    fn build_from_config(config: &ModelConfig) -> Result<Self> {
        match config {
            ModelConfig::Inverse(c) => Self::build_inverse(c, 0),
            ModelConfig::Regressor(c) => Self::build_regressor(c, 0),
        }
    }

    pub fn set_training(&mut self, training: bool) {
        self.training = training;
    }

    pub fn is_training(&self) -> bool {
        self.training
    }

    fn mode(&self) -> Mode {
        if self.training {
            Mode::Train
        } else {
            Mode::Eval
        }
    }

    pub fn module_mut(&mut self) -> &mut dyn Module<S> {
        match &mut self.net {
            NetKind::Inverse(n) => n.as_mut(),
            NetKind::Regressor(n) => n.as_mut(),
        }
    }

    /// Forward pass in the bundle's current mode.
    pub fn forward(&mut self, x: &Tensor4<S>) -> Result<Tensor4<S>> {
        let mode = self.mode();
        self.module_mut().forward(x, mode)
    }

    pub fn backward(&mut self, grad: &Tensor4<S>) -> Tensor4<S> {
        self.module_mut().backward(grad)
    }

    pub fn zero_grad(&mut self) {
        self.module_mut().zero_grad();
    }

    pub fn export_store(&mut self) -> Result<ParamStore<S>> {
        ParamStore::export(self.module_mut())
    }

    pub fn import_store(&mut self, store: &ParamStore<S>) -> Result<()> {
        store.import_into(self.module_mut())
    }
}

fn write_u32(w: &mut impl Write, v: u32) -> Result<()> {
    w.write_all(&v.to_le_bytes())?;
    Ok(())
}

/// Serializes a bundle's config and every tensor (parameters and running
/// statistics) to `path`.
pub fn save_model(bundle: &mut ModelBundle<f32>, path: &Path) -> Result<()> {
    let store = bundle.export_store()?;
    let mut w = BufWriter::new(std::fs::File::create(path)?);
    w.write_all(WEIGHT_MAGIC)?;
    write_u32(&mut w, WEIGHT_VERSION)?;
    let config_blob = serde_json::to_vec(&bundle.config)?;
    write_u32(&mut w, config_blob.len() as u32)?;
    w.write_all(&config_blob)?;
    write_u32(&mut w, store.len() as u32)?;
    for (name, _kind, dims, value) in store.iter_values() {
        write_u32(&mut w, name.len() as u32)?;
        w.write_all(name.as_bytes())?;
        write_u32(&mut w, dims.len() as u32)?;
        for &d in dims {
            write_u32(&mut w, d as u32)?;
        }
        for &v in value {
            w.write_all(&v.to_le_bytes())?;
        }
    }
    w.flush()?;
    Ok(())
}

struct FileReader<R> {
    inner: R,
}

impl<R: Read> FileReader<R> {
    fn bytes(&mut self, n: usize) -> Result<Vec<u8>> {
        let mut buf = vec![0u8; n];
        self.inner.read_exact(&mut buf).map_err(|e| {
            if e.kind() == std::io::ErrorKind::UnexpectedEof {
                Error::Format("weight file truncated".into())
            } else {
                Error::Io(e)
            }
        })?;
        Ok(buf)
    }

    fn u32(&mut self) -> Result<u32> {
        let b = self.bytes(4)?;
        Ok(u32::from_le_bytes([b[0], b[1], b[2], b[3]]))
    }
}

/// Reads a weight file back into a freshly built bundle in eval mode.
pub fn load_model(path: &Path) -> Result<ModelBundle<f32>> {
    let mut r = FileReader {
        inner: BufReader::new(std::fs::File::open(path)?),
    };
    let magic = r.bytes(4)?;
    if magic != WEIGHT_MAGIC {
        return Err(Error::Format(format!(
            "{} is not a model file (bad magic)",
            path.display()
        )));
    }
    let version = r.u32()?;
    if version != WEIGHT_VERSION {
        return Err(Error::UnsupportedSchema {
            found: version,
            supported: WEIGHT_VERSION,
        });
    }
    let config_len = r.u32()? as usize;
    let config_blob = r.bytes(config_len)?;
    let config: ModelConfig = serde_json::from_slice(&config_blob)?;

    let mut bundle = ModelBundle::build_from_config(&config)?;
    let template = bundle.export_store()?;

    let tensor_count = r.u32()? as usize;
    let mut store = ParamStore::new();
    for _ in 0..tensor_count {
        let name_len = r.u32()? as usize;
        let name = String::from_utf8(r.bytes(name_len)?)
            .map_err(|_| Error::Format("tensor name is not UTF-8".into()))?;
        let ndim = r.u32()? as usize;
        let mut dims = Vec::with_capacity(ndim);
        for _ in 0..ndim {
            dims.push(r.u32()? as usize);
        }
        let len: usize = dims.iter().product();
        let raw = r.bytes(len * 4)?;
        let value: Vec<f32> = raw
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
            .collect();
        let kind = template
            .kind(&name)
            .ok_or_else(|| Error::Format(format!("weight file has unknown tensor {name}")))?;
        let grad = match kind {
            SlotKind::Trainable => vec![0.0; len],
            SlotKind::Stats => vec![],
        };
        store.insert(&name, kind, dims, value, grad)?;
    }
    bundle.import_store(&store)?;
    bundle.set_training(false);
    Ok(bundle)
}
