//! Versioned on-disk model format: a self-describing JSON document holding
//! the stage-1 classifier, the per-group learners, and the feature schema.

use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::ensemble::WeightedEnsemble;
use crate::error::{Error, Result};

pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ModelFile {
    pub format_version: u32,
    pub feature_names: Vec<String>,
    pub model: WeightedEnsemble,
}

impl ModelFile {
    pub fn new(model: WeightedEnsemble, feature_names: Vec<String>) -> Result<Self> {
        if feature_names.len() != model.n_features() {
            return Err(Error::DimensionMismatch {
                expected: model.n_features(),
                actual: feature_names.len(),
            });
        }
        Ok(Self {
            format_version: FORMAT_VERSION,
            feature_names,
            model,
        })
    }
}

pub fn save_model<W: Write>(file: &ModelFile, writer: W) -> Result<()> {
    serde_json::to_writer_pretty(writer, file)
        .map_err(|e| Error::ModelFormat(format!("serialize: {e}")))
}

pub fn load_model<R: Read>(reader: R) -> Result<ModelFile> {
    let file: ModelFile =
        serde_json::from_reader(reader).map_err(|e| Error::ModelFormat(format!("parse: {e}")))?;
    if file.format_version != FORMAT_VERSION {
        return Err(Error::ModelFormat(format!(
            "unsupported format version {}; this build reads version {FORMAT_VERSION}",
            file.format_version
        )));
    }
    if file.feature_names.len() != file.model.n_features() {
        return Err(Error::ModelFormat(format!(
            "feature name list ({}) does not match the model width ({})",
            file.feature_names.len(),
            file.model.n_features()
        )));
    }
    Ok(file)
}

pub fn save_model_file(file: &ModelFile, path: &Path) -> Result<()> {
    save_model(file, std::fs::File::create(path)?)
}

pub fn load_model_file(path: &Path) -> Result<ModelFile> {
    load_model(std::fs::File::open(path)?)
}
