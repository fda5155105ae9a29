use crate::error::{Error, Result};

/// Dense row-major tensor of f64 values.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor {
    pub shape: Vec<usize>,
    pub data: Vec<f64>,
}

impl Tensor {
    pub fn zeros(shape: &[usize]) -> Tensor {
        Tensor {
            shape: shape.to_vec(),
            data: vec![0.0; shape.iter().product()],
        }
    }

    pub fn from_data(shape: &[usize], data: Vec<f64>) -> Result<Tensor> {
        if data.len() != shape.iter().product::<usize>() {
            return Err(Error::domain(format!(
                "tensor data length {} does not match shape {:?}",
                data.len(),
                shape
            )));
        }
        Ok(Tensor {
            shape: shape.to_vec(),
            data,
        })
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    /// Debug-mode finiteness check; returns the tensor for chaining.
    pub fn assert_finite(&self, context: &str) -> &Tensor {
        debug_assert!(
            self.data.iter().all(|v| v.is_finite()),
            "non-finite value after {context}"
        );
        self
    }
}
