//! Model checkpoints: a self-describing binary container with a JSON
//! header (model config, parameter names and shapes, dtype, batch-norm
//! statistics) followed by raw little-endian f64 parameter data.

use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::classify::{ClassifierConfig, ClassifierModel};
use crate::error::{Error, Result};
use crate::generate::{GeneratorConfig, GeneratorModel};
use crate::linalg::Matrix;
use crate::params::{ParamId, ParamStore};

const MAGIC: &[u8; 4] = b"RGCN";
const FORMAT_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct ParamMeta {
    name: String,
    rows: usize,
    cols: usize,
    trainable: bool,
}

#[derive(Serialize, Deserialize)]
struct Header {
    format_version: u32,
    dtype: String,
    kind: String,
    config: serde_json::Value,
    params: Vec<ParamMeta>,
    bn_running_mean: Vec<f64>,
    bn_running_var: Vec<f64>,
}

fn write_container(path: &Path, header: &Header, store: &ParamStore) -> Result<()> {
    let header_json = serde_json::to_vec(header)
        .map_err(|e| Error::Contract(format!("header serialization failed: {e}")))?;
    let mut file = std::fs::File::create(path)?;
    file.write_all(MAGIC)?;
    file.write_all(&(header_json.len() as u32).to_le_bytes())?;
    file.write_all(&header_json)?;
    for p in store.iter() {
        for v in p.value.data() {
            file.write_all(&v.to_le_bytes())?;
        }
    }
    Ok(())
}

fn read_container(path: &Path) -> Result<(Header, Vec<Matrix>)> {
    let mut file = std::fs::File::open(path)?;
    let mut magic = [0u8; 4];
    file.read_exact(&mut magic)?;
    if &magic != MAGIC {
        return Err(Error::Ingestion(format!(
            "{} is not a checkpoint (bad magic)",
            path.display()
        )));
    }
    let mut len = [0u8; 4];
    file.read_exact(&mut len)?;
    let mut header_json = vec![0u8; u32::from_le_bytes(len) as usize];
    file.read_exact(&mut header_json)?;
    let header: Header = serde_json::from_slice(&header_json)
        .map_err(|e| Error::Ingestion(format!("bad checkpoint header: {e}")))?;
    if header.format_version != FORMAT_VERSION {
        return Err(Error::Ingestion(format!(
            "unsupported checkpoint version {}",
            header.format_version
        )));
    }
    if header.dtype != "f64le" {
        return Err(Error::Ingestion(format!("unsupported dtype {}", header.dtype)));
    }
    let mut matrices = Vec::with_capacity(header.params.len());
    for meta in &header.params {
        let count = meta.rows * meta.cols;
        let mut bytes = vec![0u8; count * 8];
        file.read_exact(&mut bytes)?;
        let data: Vec<f64> = bytes
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect();
        matrices.push(Matrix::from_vec(meta.rows, meta.cols, data)?);
    }
    Ok((header, matrices))
}

fn header_for(kind: &str, config: serde_json::Value, store: &ParamStore, bn: (&[f64], &[f64])) -> Header {
    Header {
        format_version: FORMAT_VERSION,
        dtype: "f64le".to_string(),
        kind: kind.to_string(),
        config,
        params: store
            .iter()
            .map(|p| ParamMeta {
                name: p.name.clone(),
                rows: p.value.rows(),
                cols: p.value.cols(),
                trainable: p.trainable,
            })
            .collect(),
        bn_running_mean: bn.0.to_vec(),
        bn_running_var: bn.1.to_vec(),
    }
}

fn restore_store(store: &mut ParamStore, header: &Header, matrices: Vec<Matrix>) -> Result<()> {
    if header.params.len() != store.len() {
        return Err(Error::Ingestion(format!(
            "checkpoint has {} parameters, model expects {}",
            header.params.len(),
            store.len()
        )));
    }
    for (i, (meta, m)) in header.params.iter().zip(matrices).enumerate() {
        let id = ParamId(i);
        let current = store.get(id);
        if current.shape() != m.shape() {
            return Err(Error::Ingestion(format!(
                "parameter {} has shape {}, model expects {}",
                meta.name,
                m.shape_string(),
                current.shape_string()
            )));
        }
        *store.get_mut(id) = m;
    }
    Ok(())
}

pub fn save_classifier(model: &ClassifierModel, path: impl AsRef<Path>) -> Result<()> {
    let config = serde_json::to_value(&model.cfg)
        .map_err(|e| Error::Contract(format!("config serialization failed: {e}")))?;
    let header = header_for("classifier", config, &model.store, model.bn_state());
    write_container(path.as_ref(), &header, &model.store)
}

pub fn load_classifier(path: impl AsRef<Path>) -> Result<ClassifierModel> {
    let (header, matrices) = read_container(path.as_ref())?;
    if header.kind != "classifier" {
        return Err(Error::Ingestion(format!(
            "checkpoint holds a {}, not a classifier",
            header.kind
        )));
    }
    let cfg: ClassifierConfig = serde_json::from_value(header.config.clone())
        .map_err(|e| Error::Ingestion(format!("bad classifier config: {e}")))?;
    let mut model = ClassifierModel::new(cfg)?;
    restore_store(&mut model.store, &header, matrices)?;
    model.set_bn_state(header.bn_running_mean, header.bn_running_var)?;
    Ok(model)
}

pub fn save_generator(model: &GeneratorModel, path: impl AsRef<Path>) -> Result<()> {
    let config = serde_json::to_value(&model.cfg)
        .map_err(|e| Error::Contract(format!("config serialization failed: {e}")))?;
    let header = header_for("generator", config, &model.store, model.bn_state());
    write_container(path.as_ref(), &header, &model.store)
}

pub fn load_generator(path: impl AsRef<Path>) -> Result<GeneratorModel> {
    let (header, matrices) = read_container(path.as_ref())?;
    if header.kind != "generator" {
        return Err(Error::Ingestion(format!(
            "checkpoint holds a {}, not a generator",
            header.kind
        )));
    }
    let cfg: GeneratorConfig = serde_json::from_value(header.config.clone())
        .map_err(|e| Error::Ingestion(format!("bad generator config: {e}")))?;
    let mut model = GeneratorModel::new(cfg)?;
    restore_store(&mut model.store, &header, matrices)?;
    model.set_bn_state(header.bn_running_mean, header.bn_running_var)?;
    Ok(model)
}
