//! Versioned JSON persistence for fitted ensembles.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::boost_dynamic::EnsembleDynamic;
use crate::boost_static::EnsembleStatic;
use crate::error::{BoostError, Result};

pub const STATIC_VERSION: &str = "boostr-static-v1";
pub const DYNAMIC_VERSION: &str = "boostr-dynamic-v1";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "version")]
pub enum Model {
    #[serde(rename = "boostr-static-v1")]
    Static(EnsembleStatic),
    #[serde(rename = "boostr-dynamic-v1")]
    Dynamic(EnsembleDynamic),
}

impl Model {
    pub fn version(&self) -> &'static str {
        match self {
            Model::Static(_) => STATIC_VERSION,
            Model::Dynamic(_) => DYNAMIC_VERSION,
        }
    }

    pub fn p(&self) -> usize {
        match self {
            Model::Static(m) => m.p,
            Model::Dynamic(m) => m.p,
        }
    }

    pub fn n_trees(&self) -> usize {
        match self {
            Model::Static(m) => m.trees.len(),
            Model::Dynamic(m) => m.trees.len(),
        }
    }

    pub fn feature_importance(&self, standardize: bool) -> Vec<f64> {
        match self {
            Model::Static(m) => m.feature_importance(standardize),
            Model::Dynamic(m) => m.feature_importance(standardize),
        }
    }

    pub fn to_json(&self) -> Result<String> {
        check_finite(self)?;
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let value: serde_json::Value = serde_json::from_str(text)?;
        match value.get("version").and_then(|v| v.as_str()) {
            Some(STATIC_VERSION) | Some(DYNAMIC_VERSION) => {}
            Some(other) => return Err(BoostError::ModelFormat(format!("unknown version {other:?}"))),
            None => return Err(BoostError::ModelFormat("missing version field".into())),
        }
        serde_json::from_value(value).map_err(|e| BoostError::ModelFormat(e.to_string()))
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut text = self.to_json()?;
        text.push('\n');
        fs::write(path, text).map_err(|source| BoostError::Io {
            path: path.to_path_buf(),
            source,
        })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|source| BoostError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_json(&text)
    }
}

// JSON has no encoding for non-finite reals.
fn check_finite(model: &Model) -> Result<()> {
    let value = serde_json::to_value(model)?;
    if has_null(&value) {
        return Err(BoostError::ModelFormat("model holds non-finite values".into()));
    }
    Ok(())
}

fn has_null(v: &serde_json::Value) -> bool {
    match v {
        serde_json::Value::Null => true,
        serde_json::Value::Array(xs) => xs.iter().any(has_null),
        serde_json::Value::Object(m) => m.values().any(has_null),
        _ => false,
    }
}
