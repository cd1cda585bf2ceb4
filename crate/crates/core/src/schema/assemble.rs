use std::path::Path;

use super::prediction::{ArticulationPrediction, BASE_LINK};
use super::SchemaError;
use crate::urdf::{LinkSpec, UrdfModel};

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct AssembleOptions {
    pub model_name: String,
    /// Emit mesh references even when `<mesh_dir>/<link>.obj` does not exist.
    pub allow_missing_mesh: bool,
    /// Directory string written into `<mesh filename>`; defaults to `mesh_dir`.
    pub filename_prefix: Option<String>,
}

impl Default for AssembleOptions {
    fn default() -> Self {
        AssembleOptions {
            model_name: "object".into(),
            allow_missing_mesh: false,
            filename_prefix: None,
        }
    }
}

/// Builds a URDF model from a prediction: `base` plus every predicted link,
/// each referencing `<mesh_dir>/<link>.obj`, joints copied verbatim and
/// placeholder inertials injected.
pub fn assemble_urdf(
    pred: &ArticulationPrediction,
    mesh_dir: &Path,
    options: &AssembleOptions,
) -> Result<UrdfModel, SchemaError> {
    let model = assemble_unchecked(pred, mesh_dir, options)?;
    model.validate()?;
    Ok(model)
}

/// [`assemble_urdf`] without the final model validation.
pub fn assemble_unchecked(
    pred: &ArticulationPrediction,
    mesh_dir: &Path,
    options: &AssembleOptions,
) -> Result<UrdfModel, SchemaError> {
    let mut names: Vec<&str> = Vec::with_capacity(pred.links.len() + 1);
    if pred.link(BASE_LINK).is_none() {
        names.push(BASE_LINK);
    }
    names.extend(pred.links.iter().map(|l| l.link_name.as_str()));

    let prefix = options
        .filename_prefix
        .clone()
        .unwrap_or_else(|| mesh_dir.to_string_lossy().into_owned());
    let mut model = UrdfModel::new(options.model_name.clone());
    for name in names {
        let file = format!("{name}.obj");
        let on_disk = mesh_dir.join(&file);
        if !options.allow_missing_mesh && !on_disk.is_file() {
            return Err(SchemaError::MissingMesh {
                link: name.to_string(),
                path: on_disk,
            });
        }
        let filename = if prefix.is_empty() {
            file
        } else {
            format!("{}/{file}", prefix.trim_end_matches('/'))
        };
        model.links.push(LinkSpec::with_mesh(name, filename));
    }
    model.joints = pred.joints.clone();
    Ok(model)
}
