//! Flat f64 master-parameter store used during training, mirroring the
//! f32 [`ModelWeights`] tensor layout name for name.

use std::ops::Range;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::nn::{ModelSpec, ModelWeights, Tensor};

#[derive(Debug, Clone)]
pub struct Segment {
    pub name: String,
    pub range: Range<usize>,
    pub dims: Vec<usize>,
}

/// All trainable parameters as one contiguous f64 vector plus a named
/// segment registry in canonical layout order.
#[derive(Debug, Clone)]
pub struct Params {
    spec: ModelSpec,
    data: Vec<f64>,
    segments: Vec<Segment>,
}

impl Params {
    fn build(spec: ModelSpec) -> (Vec<Segment>, usize) {
        let mut segments = Vec::new();
        let mut offset = 0usize;
        for (name, dims) in spec.tensor_layout() {
            let len: usize = dims.iter().product();
            segments.push(Segment {
                name,
                range: offset..offset + len,
                dims,
            });
            offset += len;
        }
        (segments, offset)
    }

    pub fn zeros(spec: ModelSpec) -> Result<Self> {
        spec.validate()?;
        let (segments, total) = Self::build(spec);
        Ok(Self {
            spec,
            data: vec![0.0; total],
            segments,
        })
    }

    /// Seeded initialization: uniform(-1/sqrt(H), 1/sqrt(H)) per layer
    /// (head bound uses its fan-in), then forget-gate biases set to +1.0.
    pub fn init(spec: ModelSpec, seed: u64) -> Result<Self> {
        let mut p = Self::zeros(spec)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for seg in &p.segments {
            let bound = if seg.name.ends_with("head.w") || seg.name.ends_with("head.b") {
                // fan-in of the linear head is the 2H bidirectional width
                1.0 / (seg.dims.last().copied().unwrap_or(1) as f64).sqrt()
            } else {
                // LSTM tensors are (4H x D), (4H x H), or (4H)
                1.0 / ((seg.dims[0] / 4) as f64).sqrt()
            };
            for v in &mut p.data[seg.range.clone()] {
                *v = rng.gen_range(-bound..bound);
            }
        }
        // Forget-gate bias +1.0 stabilizes early backpropagation through time.
        let bias_names: Vec<String> = p
            .segments
            .iter()
            .filter(|s| s.name.ends_with(".b") && s.name.contains(".l"))
            .map(|s| s.name.clone())
            .collect();
        for name in bias_names {
            let range = p.seg_range(&name)?;
            let h = (range.end - range.start) / 4;
            for v in &mut p.data[range.start + h..range.start + 2 * h] {
                *v = 1.0;
            }
        }
        Ok(p)
    }

    pub fn spec(&self) -> &ModelSpec {
        &self.spec
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn segments(&self) -> &[Segment] {
        &self.segments
    }

    pub fn seg_range(&self, name: &str) -> Result<Range<usize>> {
        self.segments
            .iter()
            .find(|s| s.name == name)
            .map(|s| s.range.clone())
            .ok_or_else(|| Error::invalid_input(format!("unknown parameter segment '{name}'")))
    }

    /// Casts the f64 master copy down to the f32 serialization container.
    pub fn to_weights(&self) -> Result<ModelWeights> {
        let tensors = self
            .segments
            .iter()
            .map(|seg| Tensor {
                name: seg.name.clone(),
                dims: seg.dims.clone(),
                data: self.data[seg.range.clone()].iter().map(|v| *v as f32).collect(),
            })
            .collect();
        ModelWeights::from_tensors(self.spec, tensors)
    }

    pub fn from_weights(weights: &ModelWeights) -> Result<Self> {
        let mut p = Self::zeros(*weights.spec())?;
        for seg in p.segments.clone() {
            let t = weights.tensor(&seg.name)?;
            for (dst, src) in p.data[seg.range.clone()].iter_mut().zip(&t.data) {
                *dst = *src as f64;
            }
        }
        Ok(p)
    }
}
