//! Single-file JSON checkpoints: config, vocabulary and every tensor.
//!
//! Floats are written in shortest round-trip form and parsed exactly, so
//! save → load → save reproduces the same bytes.

use std::fs;
use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::encoder::Vocab;
use crate::error::{Error, Result};
use crate::model::Model;
use crate::numerics::Tensor2;
use crate::training::TrainConfig;

pub const FORMAT_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StoredTensor {
    pub name: String,
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Checkpoint {
    pub format_version: u32,
    pub config: TrainConfig,
    pub vocab: Vocab,
    pub tensors: Vec<StoredTensor>,
}

impl Checkpoint {
    pub fn from_model(model: &Model) -> Self {
        Checkpoint {
            format_version: FORMAT_VERSION,
            config: model.config.clone(),
            vocab: model.vocab.clone(),
            tensors: model
                .params
                .params()
                .iter()
                .map(|p| StoredTensor {
                    name: p.name.clone(),
                    rows: p.value.rows(),
                    cols: p.value.cols(),
                    data: p.value.data().to_vec(),
                })
                .collect(),
        }
    }

    pub fn into_model(self) -> Result<Model> {
        if self.format_version != FORMAT_VERSION {
            return Err(Error::Checkpoint(format!(
                "unsupported format_version {} (expected {FORMAT_VERSION})",
                self.format_version
            )));
        }
        let tensors = self
            .tensors
            .into_iter()
            .map(|t| {
                if t.data.len() != t.rows * t.cols {
                    return Err(Error::Checkpoint(format!(
                        "tensor `{}` declares {}x{} but holds {} values",
                        t.name,
                        t.rows,
                        t.cols,
                        t.data.len()
                    )));
                }
                Ok((t.name, Tensor2::from_vec(t.rows, t.cols, t.data)))
            })
            .collect::<Result<Vec<_>>>()?;
        Model::from_tensors(self.config, self.vocab, tensors)
    }

    pub fn to_writer<W: Write>(&self, mut writer: W) -> Result<()> {
        serde_json::to_writer(&mut writer, self)?;
        writer.write_all(b"\n")?;
        Ok(())
    }

    pub fn from_reader<R: Read>(reader: R) -> Result<Self> {
        serde_json::from_reader(reader).map_err(|e| Error::Checkpoint(e.to_string()))
    }
}

pub fn to_bytes(model: &Model) -> Result<Vec<u8>> {
    let mut out = Vec::new();
    Checkpoint::from_model(model).to_writer(&mut out)?;
    Ok(out)
}

pub fn from_bytes(bytes: &[u8]) -> Result<Model> {
    Checkpoint::from_reader(bytes)?.into_model()
}

pub fn save(model: &Model, path: &Path) -> Result<()> {
    fs::write(path, to_bytes(model)?)?;
    Ok(())
}

pub fn load(path: &Path) -> Result<Model> {
    from_bytes(&fs::read(path)?)
}
