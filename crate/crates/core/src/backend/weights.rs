//! Safetensors weight store.

use std::collections::HashMap;
use std::path::{Path, PathBuf};

use ndarray::{Array1, Array2};
use safetensors::{Dtype, SafeTensors};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Named tensors converted to the engine scalar type.
pub(crate) struct WeightStore<F> {
    path: PathBuf,
    tensors: HashMap<String, (Vec<usize>, Vec<F>)>,
}

impl<F: Scalar> WeightStore<F> {
    pub fn from_bytes(path: &Path, bytes: &[u8]) -> Result<Self> {
        let format = |reason: String| Error::Format {
            path: path.to_path_buf(),
            reason,
        };
        let st = SafeTensors::deserialize(bytes).map_err(|e| format(e.to_string()))?;
        let mut tensors = HashMap::new();
        for (name, view) in st.tensors() {
            let data = view.data();
            let values: Vec<F> = match view.dtype() {
                Dtype::F32 => data
                    .chunks_exact(4)
                    .map(|c| F::lit(f32::from_le_bytes([c[0], c[1], c[2], c[3]]) as f64))
                    .collect(),
                Dtype::F64 => data
                    .chunks_exact(8)
                    .map(|c| {
                        let mut b = [0u8; 8];
                        b.copy_from_slice(c);
                        F::lit(f64::from_le_bytes(b))
                    })
                    .collect(),
                other => return Err(format(format!("tensor {name} has unsupported dtype {other:?}"))),
            };
            tensors.insert(name, (view.shape().to_vec(), values));
        }
        Ok(Self {
            path: path.to_path_buf(),
            tensors,
        })
    }

    /// Finds `name`, trying each prefix in turn (`""`, `"bert."`, ...).
    fn lookup(&self, prefixes: &[&str], name: &str) -> Result<&(Vec<usize>, Vec<F>)> {
        prefixes
            .iter()
            .find_map(|p| self.tensors.get(&format!("{p}{name}")))
            .ok_or_else(|| Error::Format {
                path: self.path.clone(),
                reason: format!("missing tensor {name}"),
            })
    }

    pub fn vector(&self, prefixes: &[&str], name: &str, len: usize) -> Result<Array1<F>> {
        let (shape, data) = self.lookup(prefixes, name)?;
        if shape.as_slice() != [len] {
            return Err(self.shape_error(name, shape, &[len]));
        }
        Ok(Array1::from(data.clone()))
    }

    pub fn matrix(&self, prefixes: &[&str], name: &str, rows: usize, cols: usize) -> Result<Array2<F>> {
        let (shape, data) = self.lookup(prefixes, name)?;
        if shape.as_slice() != [rows, cols] {
            return Err(self.shape_error(name, shape, &[rows, cols]));
        }
        Ok(Array2::from_shape_vec((rows, cols), data.clone()).expect("shape checked"))
    }

    /// Loads a `[out, in]` linear weight and returns it as `[in, out]`.
    pub fn linear_t(&self, prefixes: &[&str], name: &str, out_dim: usize, in_dim: usize) -> Result<Array2<F>> {
        Ok(self
            .matrix(prefixes, name, out_dim, in_dim)?
            .reversed_axes()
            .as_standard_layout()
            .into_owned())
    }

    fn shape_error(&self, name: &str, got: &[usize], want: &[usize]) -> Error {
        Error::Format {
            path: self.path.clone(),
            reason: format!("tensor {name} has shape {got:?}, expected {want:?}"),
        }
    }
}
