//! The articulation JSON contract: `{"joints": [...], "links": {name: "category[SEG]"}}`.

mod assemble;
mod json;
mod mock;
mod prediction;

use std::path::PathBuf;

use thiserror::Error;

use crate::urdf::UrdfError;

pub use assemble::{assemble_unchecked, assemble_urdf, AssembleOptions};
pub use mock::{mock_predict, NoiseSpec};
pub use prediction::{
    parse_prediction, parse_prediction_with, ArticulationPrediction, LinkEntry, ParseOptions,
    ParsedPrediction, PredictedJoint, BASE_LINK, SEG_MARKER,
};

#[derive(Debug, Error)]
pub enum SchemaError {
    #[error("invalid JSON at line {line}, column {column}: {message}")]
    JsonSyntax {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("schema violation at {path}: {message}")]
    SchemaViolation { path: String, message: String },
    #[error("consistency violation at {path}: {message}")]
    ConsistencyViolation { path: String, message: String },
    #[error("missing mesh for link {link:?}: {}", path.display())]
    MissingMesh { link: String, path: PathBuf },
    #[error(transparent)]
    Tree(#[from] UrdfError),
}

impl SchemaError {
    /// JSON path (or file path) of the offending element.
    pub fn path(&self) -> String {
        match self {
            SchemaError::JsonSyntax { line, column, .. } => format!("$ (line {line}, column {column})"),
            SchemaError::SchemaViolation { path, .. }
            | SchemaError::ConsistencyViolation { path, .. } => path.clone(),
            SchemaError::MissingMesh { path, .. } => path.display().to_string(),
            SchemaError::Tree(_) => "$".into(),
        }
    }
}
