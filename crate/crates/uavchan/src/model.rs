//! Model files: one JSON document holding every weight array (row-major) and
//! scaler limit, tagged with `format_version`.

use std::fs;
use std::path::Path;

use uavchan_core::genmodel::FORMAT_VERSION;
use uavchan_core::GenerativeModel;

use crate::error::{io_err, Error, Result};

pub fn model_to_json(model: &GenerativeModel) -> Result<String> {
    serde_json::to_string(model).map_err(|source| Error::Json {
        path: "<model>".into(),
        source,
    })
}

/// Parses and validates a model. The version is checked before the schema so an
/// old or future file is refused by version rather than by field mismatch.
pub fn model_from_json(text: &str, origin: &Path) -> Result<GenerativeModel> {
    let json_err = |source| Error::Json {
        path: origin.to_path_buf(),
        source,
    };
    let value: serde_json::Value = serde_json::from_str(text).map_err(json_err)?;
    let found = value
        .get("format_version")
        .and_then(|v| v.as_u64())
        .ok_or_else(|| Error::Invalid(format!("{}: no format_version field", origin.display())))?;
    if found != FORMAT_VERSION as u64 {
        return Err(uavchan_core::Error::VersionMismatch {
            expected: FORMAT_VERSION,
            found: found.min(u32::MAX as u64) as u32,
        }
        .into());
    }
    let model: GenerativeModel = serde_json::from_value(value).map_err(json_err)?;
    model.validate()?;
    Ok(model)
}

pub fn save_model(model: &GenerativeModel, path: &Path) -> Result<()> {
    let mut text = model_to_json(model)?;
    text.push('\n');
    fs::write(path, text).map_err(io_err(path))
}

pub fn load_model(path: &Path) -> Result<GenerativeModel> {
    model_from_json(&fs::read_to_string(path).map_err(io_err(path))?, path)
}
