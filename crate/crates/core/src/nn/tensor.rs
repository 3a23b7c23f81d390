use crate::error::{Error, Result};

/// Named f32 tensor with row-major data.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor {
    pub name: String,
    pub dims: Vec<usize>,
    pub data: Vec<f32>,
}

impl Tensor {
    pub fn zeros(name: impl Into<String>, dims: Vec<usize>) -> Self {
        let len = dims.iter().product();
        Self {
            name: name.into(),
            dims,
            data: vec![0.0; len],
        }
    }

    pub fn new(name: impl Into<String>, dims: Vec<usize>, data: Vec<f32>) -> Result<Self> {
        let t = Self {
            name: name.into(),
            dims,
            data,
        };
        t.validate()?;
        Ok(t)
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn validate(&self) -> Result<()> {
        let expected: usize = self.dims.iter().product();
        if self.data.len() != expected {
            return Err(Error::format(format!(
                "tensor '{}': data length {} does not match dims {:?}",
                self.name,
                self.data.len(),
                self.dims
            )));
        }
        if self.dims.iter().any(|&d| d == 0) {
            return Err(Error::format(format!(
                "tensor '{}': zero-sized dimension",
                self.name
            )));
        }
        if !self.data.iter().all(|v| v.is_finite()) {
            return Err(Error::format(format!(
                "tensor '{}': non-finite values",
                self.name
            )));
        }
        Ok(())
    }
}
