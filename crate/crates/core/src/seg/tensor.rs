//! JSON tensor container: `{"shape": [rows, cols], "data": [row-major]}`.
//!
//! Decoder parameters are stored as `{"w_query": T, "w_key": T, "threshold": x}`,
//! point features as a single M×p tensor, and token states as
//! `{"tokens": [{"part": name, "h_seg": [...], "h_category": [...]}]}`.

use std::fs;
use std::path::Path;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::{PointFeatures, SegDecoderParams, SegError, SegTokenPair, DEFAULT_THRESHOLD};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Tensor {
    pub shape: Vec<usize>,
    pub data: Vec<f64>,
}

impl Tensor {
    pub fn from_matrix(m: &DMatrix<f64>) -> Tensor {
        let (r, c) = m.shape();
        let data = (0..r).flat_map(|i| (0..c).map(move |j| m[(i, j)])).collect();
        Tensor {
            shape: vec![r, c],
            data,
        }
    }

    pub fn to_matrix(&self) -> Result<DMatrix<f64>, SegError> {
        let [r, c] = self.shape[..] else {
            return Err(SegError::Tensor(format!(
                "expected a rank-2 tensor, got shape {:?}",
                self.shape
            )));
        };
        if r * c != self.data.len() {
            return Err(SegError::Tensor(format!(
                "shape {:?} needs {} values, found {}",
                self.shape,
                r * c,
                self.data.len()
            )));
        }
        Ok(DMatrix::from_row_slice(r, c, &self.data))
    }
}

#[derive(Serialize, Deserialize)]
struct ParamsFile {
    w_query: Tensor,
    w_key: Tensor,
    #[serde(default = "default_threshold")]
    threshold: f64,
}

fn default_threshold() -> f64 {
    DEFAULT_THRESHOLD
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TokenEntry {
    pub part: String,
    pub h_seg: Vec<f64>,
    pub h_category: Vec<f64>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct TokenFile {
    pub tokens: Vec<TokenEntry>,
}

impl TokenFile {
    pub fn from_pairs(pairs: &[(String, SegTokenPair)]) -> TokenFile {
        TokenFile {
            tokens: pairs
                .iter()
                .map(|(name, p)| TokenEntry {
                    part: name.clone(),
                    h_seg: p.h_seg.iter().copied().collect(),
                    h_category: p.h_category.iter().copied().collect(),
                })
                .collect(),
        }
    }

    pub fn into_pairs(self) -> Vec<(String, SegTokenPair)> {
        self.tokens
            .into_iter()
            .map(|t| (t.part, SegTokenPair::new(t.h_seg, t.h_category)))
            .collect()
    }
}

fn read(path: &Path) -> Result<String, SegError> {
    fs::read_to_string(path).map_err(|source| SegError::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn write(path: &Path, value: &impl Serialize) -> Result<(), SegError> {
    let text = serde_json::to_string(value).map_err(|e| SegError::Tensor(e.to_string()))?;
    fs::write(path, text).map_err(|source| SegError::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn decode<T: for<'de> Deserialize<'de>>(text: &str) -> Result<T, SegError> {
    serde_json::from_str(text).map_err(|e| SegError::Tensor(e.to_string()))
}

pub fn load_params(path: &Path) -> Result<SegDecoderParams, SegError> {
    let f: ParamsFile = decode(&read(path)?)?;
    SegDecoderParams::new(f.w_query.to_matrix()?, f.w_key.to_matrix()?, f.threshold)
}

pub fn save_params(params: &SegDecoderParams, path: &Path) -> Result<(), SegError> {
    write(
        path,
        &ParamsFile {
            w_query: Tensor::from_matrix(&params.w_query),
            w_key: Tensor::from_matrix(&params.w_key),
            threshold: params.threshold,
        },
    )
}

pub fn load_features(path: &Path) -> Result<PointFeatures, SegError> {
    let t: Tensor = decode(&read(path)?)?;
    let m = t.to_matrix()?;
    if !m.iter().all(|x| x.is_finite()) {
        return Err(SegError::Tensor("features must be finite".into()));
    }
    Ok(PointFeatures::new(m))
}

pub fn save_features(feats: &PointFeatures, path: &Path) -> Result<(), SegError> {
    write(path, &Tensor::from_matrix(&feats.features))
}

pub fn load_tokens(path: &Path) -> Result<Vec<(String, SegTokenPair)>, SegError> {
    let f: TokenFile = decode(&read(path)?)?;
    Ok(f.into_pairs())
}

pub fn save_tokens(tokens: &[(String, SegTokenPair)], path: &Path) -> Result<(), SegError> {
    write(path, &TokenFile::from_pairs(tokens))
}
