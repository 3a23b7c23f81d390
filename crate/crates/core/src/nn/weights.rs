//! Weight container and its binary file format.
//!
//! File layout (all integers little-endian):
//!
//! ```text
//! "SPWV" | version u32 | tensor count u32 | records... | crc32 u32
//! record: name_len u16 | name utf-8 | rank u8 | dims u32 x rank | f32 payload
//! ```
//!
//! The first record is a meta tensor named `spec` encoding the
//! architecture; the remaining records are the named parameter tensors in
//! canonical layout order. The trailing CRC32 covers every preceding byte.

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::nn::tensor::Tensor;
use crate::nn::ModelSpec;

const MAGIC: &[u8; 4] = b"SPWV";
const FORMAT_VERSION: u32 = 1;
const SPEC_TENSOR: &str = "spec";

/// All parameters for both networks plus the architecture header.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelWeights {
    spec: ModelSpec,
    tensors: Vec<Tensor>,
}

impl ModelWeights {
    /// Zero-initialized weights in canonical layout order.
    pub fn zeros(spec: ModelSpec) -> Result<Self> {
        spec.validate()?;
        let tensors = spec
            .tensor_layout()
            .into_iter()
            .map(|(name, dims)| Tensor::zeros(name, dims))
            .collect();
        Ok(Self { spec, tensors })
    }

    /// Builds from named tensors, enforcing that every name in the spec
    /// layout is present exactly once with the right shape.
    pub fn from_tensors(spec: ModelSpec, mut tensors: Vec<Tensor>) -> Result<Self> {
        spec.validate()?;
        let layout = spec.tensor_layout();
        if tensors.len() != layout.len() {
            return Err(Error::format(format!(
                "expected {} tensors, got {}",
                layout.len(),
                tensors.len()
            )));
        }
        // Detect duplicates before reordering.
        let mut names: Vec<&str> = tensors.iter().map(|t| t.name.as_str()).collect();
        names.sort_unstable();
        if names.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::format("duplicate tensor name"));
        }
        let mut ordered = Vec::with_capacity(layout.len());
        for (name, dims) in &layout {
            let idx = tensors
                .iter()
                .position(|t| &t.name == name)
                .ok_or_else(|| Error::format(format!("missing tensor '{name}'")))?;
            let t = tensors.swap_remove(idx);
            if &t.dims != dims {
                return Err(Error::format(format!(
                    "tensor '{name}': dims {:?} do not match expected {:?}",
                    t.dims, dims
                )));
            }
            t.validate()?;
            ordered.push(t);
        }
        Ok(Self {
            spec,
            tensors: ordered,
        })
    }

    pub fn spec(&self) -> &ModelSpec {
        &self.spec
    }

    pub fn tensors(&self) -> &[Tensor] {
        &self.tensors
    }

    pub fn tensor(&self, name: &str) -> Result<&Tensor> {
        self.tensors
            .iter()
            .find(|t| t.name == name)
            .ok_or_else(|| Error::format(format!("missing tensor '{name}'")))
    }

    pub fn param_count(&self) -> usize {
        self.tensors.iter().map(Tensor::len).sum()
    }

    /// Serializes to the weight file format described in the module docs.
    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        fs::write(path, self.to_bytes())?;
        Ok(())
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut buf = Vec::new();
        buf.extend_from_slice(MAGIC);
        buf.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
        buf.extend_from_slice(&(1 + self.tensors.len() as u32).to_le_bytes());
        write_record(&mut buf, &spec_meta_tensor(&self.spec));
        for t in &self.tensors {
            write_record(&mut buf, t);
        }
        let crc = crc32fast::hash(&buf);
        buf.extend_from_slice(&crc.to_le_bytes());
        buf
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_bytes(&fs::read(path)?)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        if bytes.len() < 16 {
            return Err(Error::format("weight file truncated"));
        }
        let (body, crc_bytes) = bytes.split_at(bytes.len() - 4);
        let stored_crc = u32::from_le_bytes(crc_bytes.try_into().unwrap());
        if crc32fast::hash(body) != stored_crc {
            return Err(Error::format("weight file CRC mismatch"));
        }

        let mut cursor = Cursor { buf: body, pos: 0 };
        if cursor.take(4)? != MAGIC {
            return Err(Error::format("bad magic bytes (not a weight file)"));
        }
        let version = cursor.u32()?;
        if version > FORMAT_VERSION {
            return Err(Error::format(format!(
                "unsupported weight format version {version} (reader supports {FORMAT_VERSION})"
            )));
        }
        let count = cursor.u32()? as usize;
        if count < 2 {
            return Err(Error::format("weight file has no parameter tensors"));
        }
        let mut records = Vec::with_capacity(count);
        for _ in 0..count {
            records.push(read_record(&mut cursor)?);
        }
        if cursor.pos != body.len() {
            return Err(Error::format("trailing bytes after final tensor"));
        }

        let meta = records.remove(0);
        if meta.name != SPEC_TENSOR {
            return Err(Error::format("first record must be the 'spec' meta tensor"));
        }
        let spec = spec_from_meta(&meta)?;
        let weights = Self::from_tensors(spec, records)?;
        if weights.spec.is_standard_shape() {
            let total = weights.param_count();
            if !(40_000..=50_000).contains(&total) {
                return Err(Error::format(format!(
                    "parameter count {total} outside the expected [40k, 50k] band"
                )));
            }
        }
        Ok(weights)
    }
}

fn spec_meta_tensor(spec: &ModelSpec) -> Tensor {
    Tensor {
        name: SPEC_TENSOR.to_string(),
        dims: vec![8],
        data: vec![
            spec.input_dim as f32,
            spec.corrector_layers as f32,
            spec.corrector_hidden as f32,
            spec.estimator_layers as f32,
            spec.estimator_hidden as f32,
            spec.window_len as f32,
            spec.output_frame_lag as f32,
            if spec.ablate_uwb { 1.0 } else { 0.0 },
        ],
    }
}

fn spec_from_meta(meta: &Tensor) -> Result<ModelSpec> {
    if meta.data.len() != 8 {
        return Err(Error::format("malformed 'spec' meta tensor"));
    }
    let as_usize = |v: f32| -> Result<usize> {
        if v < 0.0 || v.fract() != 0.0 || v > 1e6 {
            return Err(Error::format("non-integral value in 'spec' meta tensor"));
        }
        Ok(v as usize)
    };
    let spec = ModelSpec {
        input_dim: as_usize(meta.data[0])?,
        corrector_layers: as_usize(meta.data[1])?,
        corrector_hidden: as_usize(meta.data[2])?,
        estimator_layers: as_usize(meta.data[3])?,
        estimator_hidden: as_usize(meta.data[4])?,
        window_len: as_usize(meta.data[5])?,
        output_frame_lag: as_usize(meta.data[6])?,
        ablate_uwb: meta.data[7] != 0.0,
    };
    spec.validate()?;
    Ok(spec)
}

fn write_record(buf: &mut Vec<u8>, t: &Tensor) {
    buf.extend_from_slice(&(t.name.len() as u16).to_le_bytes());
    buf.extend_from_slice(t.name.as_bytes());
    buf.push(t.dims.len() as u8);
    for d in &t.dims {
        buf.extend_from_slice(&(*d as u32).to_le_bytes());
    }
    for v in &t.data {
        buf.extend_from_slice(&v.to_le_bytes());
    }
}

struct Cursor<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.pos + n > self.buf.len() {
            return Err(Error::format("weight file truncated"));
        }
        let s = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u16(&mut self) -> Result<u16> {
        Ok(u16::from_le_bytes(self.take(2)?.try_into().unwrap()))
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }
}

fn read_record(cursor: &mut Cursor) -> Result<Tensor> {
    let name_len = cursor.u16()? as usize;
    let name = std::str::from_utf8(cursor.take(name_len)?)
        .map_err(|_| Error::format("tensor name is not UTF-8"))?
        .to_string();
    let rank = cursor.take(1)?[0] as usize;
    let mut dims = Vec::with_capacity(rank);
    for _ in 0..rank {
        dims.push(cursor.u32()? as usize);
    }
    let len: usize = dims.iter().product();
    let payload = cursor.take(len * 4)?;
    let data = payload
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
        .collect();
    Ok(Tensor { name, dims, data })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_weights(seed: u64) -> ModelWeights {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let spec = ModelSpec::default();
        let tensors = spec
            .tensor_layout()
            .into_iter()
            .map(|(name, dims)| {
                let len = dims.iter().product();
                Tensor {
                    name,
                    dims,
                    data: (0..len).map(|_| rng.gen_range(-0.5..0.5)).collect(),
                }
            })
            .collect();
        ModelWeights::from_tensors(spec, tensors).unwrap()
    }

    #[test]
    fn save_load_round_trip_is_bit_exact() {
        let w = random_weights(1);
        let bytes = w.to_bytes();
        let loaded = ModelWeights::from_bytes(&bytes).unwrap();
        assert_eq!(w, loaded);
        assert_eq!(loaded.to_bytes(), bytes);
    }

    #[test]
    fn file_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.spw");
        let w = random_weights(2);
        w.save(&path).unwrap();
        assert_eq!(ModelWeights::load(&path).unwrap(), w);
    }

    #[test]
    fn corrupted_magic_rejected() {
        let mut bytes = random_weights(3).to_bytes();
        bytes[0] = b'X';
        // Recompute the CRC so the magic check itself is exercised.
        let n = bytes.len();
        let crc = crc32fast::hash(&bytes[..n - 4]);
        bytes[n - 4..].copy_from_slice(&crc.to_le_bytes());
        let err = ModelWeights::from_bytes(&bytes).unwrap_err();
        assert!(err.to_string().contains("magic"), "{err}");
    }

    #[test]
    fn corrupted_payload_fails_crc() {
        let mut bytes = random_weights(4).to_bytes();
        let mid = bytes.len() / 2;
        bytes[mid] ^= 0xff;
        let err = ModelWeights::from_bytes(&bytes).unwrap_err();
        assert!(err.to_string().contains("CRC"), "{err}");
    }

    #[test]
    fn truncation_rejected() {
        let bytes = random_weights(5).to_bytes();
        assert!(ModelWeights::from_bytes(&bytes[..bytes.len() - 9]).is_err());
    }

    #[test]
    fn higher_version_rejected() {
        let mut bytes = random_weights(6).to_bytes();
        bytes[4..8].copy_from_slice(&2u32.to_le_bytes());
        let n = bytes.len();
        let crc = crc32fast::hash(&bytes[..n - 4]);
        bytes[n - 4..].copy_from_slice(&crc.to_le_bytes());
        let err = ModelWeights::from_bytes(&bytes).unwrap_err();
        assert!(err.to_string().contains("version"), "{err}");
    }

    #[test]
    fn duplicate_tensor_names_rejected() {
        let spec = ModelSpec::default();
        let mut tensors: Vec<Tensor> = spec
            .tensor_layout()
            .into_iter()
            .map(|(name, dims)| Tensor::zeros(name, dims))
            .collect();
        tensors[1] = tensors[0].clone();
        assert!(ModelWeights::from_tensors(spec, tensors).is_err());
    }

    #[test]
    fn tensor_count_mismatch_rejected() {
        let spec = ModelSpec::default();
        let mut tensors: Vec<Tensor> = spec
            .tensor_layout()
            .into_iter()
            .map(|(name, dims)| Tensor::zeros(name, dims))
            .collect();
        tensors.pop();
        assert!(ModelWeights::from_tensors(spec, tensors).is_err());
    }

    #[test]
    fn parameter_count_matches_spec_accounting() {
        let w = ModelWeights::zeros(ModelSpec::default()).unwrap();
        assert_eq!(w.param_count(), ModelSpec::default().param_count());
        assert!((40_000..=50_000).contains(&w.param_count()));
    }
}
