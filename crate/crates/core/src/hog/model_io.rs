use std::fs;
use std::path::Path;

use base64::engine::general_purpose::STANDARD as B64;
use base64::Engine;
use serde::{Deserialize, Serialize};

use super::descriptor::HogConfig;
use super::svm::HogSvmModel;
use crate::error::{Error, Result};

const HOG_FORMAT_VERSION: u32 = 1;

/// JSON header carrying the config and bias; weights travel as base64 of
/// little-endian `f32`s, guarded by a CRC32.
#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct HogFile {
    version: u32,
    config: HogConfig,
    bias: f64,
    weight_count: usize,
    weights_crc32: u32,
    weights_f32le_base64: String,
}

pub fn hog_model_to_json(model: &HogSvmModel) -> String {
    let bytes: Vec<u8> = model.weights.iter().flat_map(|w| w.to_le_bytes()).collect();
    let file = HogFile {
        version: HOG_FORMAT_VERSION,
        config: model.config,
        bias: model.bias,
        weight_count: model.weights.len(),
        weights_crc32: crc32fast::hash(&bytes),
        weights_f32le_base64: B64.encode(&bytes),
    };
    serde_json::to_string_pretty(&file).expect("hog model serialises")
}

pub fn hog_model_from_json(text: &str) -> Result<HogSvmModel> {
    let file: HogFile = serde_json::from_str(text).map_err(|e| Error::format(format!("hog model json: {e}")))?;
    if file.version != HOG_FORMAT_VERSION {
        return Err(Error::format(format!("unsupported hog model version {}", file.version)));
    }
    let bytes = B64
        .decode(file.weights_f32le_base64.as_bytes())
        .map_err(|e| Error::format(format!("weight payload: {e}")))?;
    if bytes.len() != file.weight_count * 4 {
        return Err(Error::format(format!(
            "weight payload has {} bytes, header says {} weights",
            bytes.len(),
            file.weight_count
        )));
    }
    if crc32fast::hash(&bytes) != file.weights_crc32 {
        return Err(Error::format("weight checksum mismatch"));
    }
    let weights = bytes.chunks_exact(4).map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]])).collect();
    HogSvmModel::new(file.config, weights, file.bias).map_err(|e| Error::format(format!("invalid hog model: {e}")))
}

pub fn save_hog_model(model: &HogSvmModel, path: impl AsRef<Path>) -> Result<()> {
    fs::write(path, hog_model_to_json(model))?;
    Ok(())
}

pub fn load_hog_model(path: impl AsRef<Path>) -> Result<HogSvmModel> {
    let bytes = fs::read(path)?;
    let text = std::str::from_utf8(&bytes).map_err(|_| Error::format("hog model is not UTF-8"))?;
    hog_model_from_json(text)
}
