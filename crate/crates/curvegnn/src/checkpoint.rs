//! Parameter checkpoints: a JSON object of named arrays with shapes.
//!
//! ```json
//! { "gnn.layer0.w_self": { "shape": [4, 16], "data": [ ... ] }, ... }
//! ```
//!
//! Keys are sorted, so files are byte-stable for a fixed parameter set.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::autodiff::Tensor;

#[derive(Debug, Error)]
pub enum CheckpointError {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed checkpoint {path}: {source}")]
    Json {
        path: String,
        #[source]
        source: serde_json::Error,
    },
    #[error("array `{name}` has {len} values but shape {shape:?}")]
    ShapeMismatch {
        name: String,
        len: usize,
        shape: Vec<usize>,
    },
}

#[derive(Serialize, Deserialize)]
struct NamedArray {
    shape: Vec<usize>,
    data: Vec<f64>,
}

pub fn save_checkpoint<'a>(
    path: impl AsRef<Path>,
    params: impl IntoIterator<Item = (String, &'a Tensor)>,
) -> Result<(), CheckpointError> {
    let map: BTreeMap<String, NamedArray> = params
        .into_iter()
        .map(|(name, t)| {
            (
                name,
                NamedArray {
                    shape: t.shape().to_vec(),
                    data: t.data().to_vec(),
                },
            )
        })
        .collect();
    let text = serde_json::to_string_pretty(&map).expect("serializable");
    std::fs::write(path.as_ref(), text).map_err(|source| CheckpointError::Io {
        path: path.as_ref().display().to_string(),
        source,
    })
}

pub fn load_checkpoint(
    path: impl AsRef<Path>,
) -> Result<BTreeMap<String, Tensor>, CheckpointError> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|source| CheckpointError::Io {
        path: path.display().to_string(),
        source,
    })?;
    let map: BTreeMap<String, NamedArray> =
        serde_json::from_str(&text).map_err(|source| CheckpointError::Json {
            path: path.display().to_string(),
            source,
        })?;
    let mut out = BTreeMap::new();
    for (name, arr) in map {
        let numel: usize = arr.shape.iter().product();
        if numel != arr.data.len() {
            return Err(CheckpointError::ShapeMismatch {
                name,
                len: arr.data.len(),
                shape: arr.shape,
            });
        }
        let tensor = match arr.shape.len() {
            0 => Tensor::scalar(arr.data[0]),
            1 => Tensor::vector(arr.data),
            2 => Tensor::matrix(arr.shape[0], arr.shape[1], arr.data),
            _ => {
                return Err(CheckpointError::ShapeMismatch {
                    name,
                    len: arr.data.len(),
                    shape: arr.shape,
                })
            }
        };
        out.insert(name, tensor);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn checkpoint_round_trip() {
        let dir = std::env::temp_dir().join(format!("curvegnn-ckpt-{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("params.json");
        let w = Tensor::matrix(2, 2, vec![1.0, -2.0, 0.5, 4.0]);
        let b = Tensor::vector(vec![0.1, 0.2]);
        save_checkpoint(&path, [("w".to_string(), &w), ("b".to_string(), &b)]).unwrap();
        let loaded = load_checkpoint(&path).unwrap();
        assert_eq!(loaded["w"], w);
        assert_eq!(loaded["b"], b);
        std::fs::remove_dir_all(&dir).unwrap();
    }
}
