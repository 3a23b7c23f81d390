//! f32 inference path: window in, corrected UWB sequence and pose sequence
//! out. Pure per window — no state carries across calls.

use crate::error::{Error, Result};
use crate::nn::weights::ModelWeights;
use crate::nn::{ModelSpec, POSE_DIM};
use crate::pipeline::FEATURE_DIM;

/// Outputs of one window pass.
#[derive(Debug, Clone, PartialEq)]
pub struct WindowOutput {
    /// Corrected normalized UWB distance per frame; `None` for the
    /// IMU-only (ablated) model.
    pub corrected: Option<Vec<f64>>,
    /// Normalized pose (9 values) per frame.
    pub poses: Vec<[f64; POSE_DIM]>,
}

struct LstmDir {
    w_in: Vec<f32>, // 4H x D, row-major
    w_h: Vec<f32>,  // 4H x H
    b: Vec<f32>,    // 4H
    input: usize,
    hidden: usize,
}

struct Net {
    layers: Vec<[LstmDir; 2]>,
    head_w: Vec<f32>, // K x 2H
    head_b: Vec<f32>, // K
    hidden: usize,
    out_dim: usize,
}

/// Immutable, thread-shareable inference weights for both networks.
pub struct InferenceModel {
    spec: ModelSpec,
    corrector: Option<Net>,
    estimator: Net,
}

impl InferenceModel {
    pub fn new(weights: &ModelWeights) -> Result<Self> {
        let spec = *weights.spec();
        let corrector = if spec.ablate_uwb {
            None
        } else {
            Some(build_net(
                weights,
                "corrector",
                spec.input_dim,
                spec.corrector_hidden,
                spec.corrector_layers,
                1,
            )?)
        };
        let estimator = build_net(
            weights,
            "estimator",
            spec.input_dim,
            spec.estimator_hidden,
            spec.estimator_layers,
            POSE_DIM,
        )?;
        Ok(Self {
            spec,
            corrector,
            estimator,
        })
    }

    pub fn spec(&self) -> &ModelSpec {
        &self.spec
    }

    /// Corrected normalized UWB distances for a feature window of any
    /// length >= 1.
    pub fn correct(&self, rows: &[[f64; FEATURE_DIM]]) -> Result<Vec<f64>> {
        let net = self
            .corrector
            .as_ref()
            .ok_or_else(|| Error::invalid_input("ablated model has no UWB corrector"))?;
        if rows.is_empty() {
            return Err(Error::invalid_input("empty feature window"));
        }
        let seq = rows_to_f32(rows);
        let out = net.forward(&seq, rows.len());
        Ok(out.iter().map(|v| *v as f64).collect())
    }

    /// Pose sequence for a window whose UWB channel has already been
    /// replaced with corrected values.
    pub fn estimate(&self, rows: &[[f64; FEATURE_DIM]]) -> Result<Vec<[f64; POSE_DIM]>> {
        if self.spec.ablate_uwb {
            return Err(Error::invalid_input(
                "ablated model estimates from 24-dim input; use infer_window",
            ));
        }
        if rows.is_empty() {
            return Err(Error::invalid_input("empty feature window"));
        }
        let seq = rows_to_f32(rows);
        Ok(self.run_estimator(&seq, rows.len()))
    }

    /// Full pass: corrector (unless ablated), channel splice, estimator.
    pub fn infer_window(&self, rows: &[[f64; FEATURE_DIM]]) -> Result<WindowOutput> {
        if rows.is_empty() {
            return Err(Error::invalid_input("empty feature window"));
        }
        let t = rows.len();
        if self.spec.ablate_uwb {
            // Drop the UWB channel entirely.
            let mut seq = Vec::with_capacity(t * (FEATURE_DIM - 1));
            for r in rows {
                seq.extend(r[1..].iter().map(|v| *v as f32));
            }
            let poses = self.run_estimator(&seq, t);
            return Ok(WindowOutput {
                corrected: None,
                poses,
            });
        }

        let net = self.corrector.as_ref().expect("non-ablated model");
        let mut seq = rows_to_f32(rows);
        let corrected = net.forward(&seq, t);
        for (k, c) in corrected.iter().enumerate() {
            seq[k * FEATURE_DIM] = *c;
        }
        let poses = self.run_estimator(&seq, t);
        Ok(WindowOutput {
            corrected: Some(corrected.iter().map(|v| *v as f64).collect()),
            poses,
        })
    }

    fn run_estimator(&self, seq: &[f32], t: usize) -> Vec<[f64; POSE_DIM]> {
        let flat = self.estimator.forward(seq, t);
        flat.chunks_exact(POSE_DIM)
            .map(|c| {
                let mut row = [0.0; POSE_DIM];
                for (o, v) in row.iter_mut().zip(c) {
                    *o = *v as f64;
                }
                row
            })
            .collect()
    }
}

fn rows_to_f32(rows: &[[f64; FEATURE_DIM]]) -> Vec<f32> {
    let mut seq = Vec::with_capacity(rows.len() * FEATURE_DIM);
    for r in rows {
        seq.extend(r.iter().map(|v| *v as f32));
    }
    seq
}

fn build_net(
    weights: &ModelWeights,
    net: &str,
    input_dim: usize,
    hidden: usize,
    layers: usize,
    out_dim: usize,
) -> Result<Net> {
    let mut built = Vec::with_capacity(layers);
    for layer in 0..layers {
        let d = if layer == 0 { input_dim } else { 2 * hidden };
        let dir = |dir: &str| -> Result<LstmDir> {
            Ok(LstmDir {
                w_in: weights.tensor(&format!("{net}.l{layer}.{dir}.w_in"))?.data.clone(),
                w_h: weights.tensor(&format!("{net}.l{layer}.{dir}.w_h"))?.data.clone(),
                b: weights.tensor(&format!("{net}.l{layer}.{dir}.b"))?.data.clone(),
                input: d,
                hidden,
            })
        };
        built.push([dir("fwd")?, dir("bwd")?]);
    }
    Ok(Net {
        layers: built,
        head_w: weights.tensor(&format!("{net}.head.w"))?.data.clone(),
        head_b: weights.tensor(&format!("{net}.head.b"))?.data.clone(),
        hidden,
        out_dim,
    })
}

impl Net {
    /// Forward pass over a (t x input) sequence; returns (t x out_dim).
    fn forward(&self, seq: &[f32], t: usize) -> Vec<f32> {
        let mut current = seq.to_vec();
        let mut next = vec![0.0f32; t * 2 * self.hidden];
        for layer in &self.layers {
            next.iter_mut().for_each(|v| *v = 0.0);
            run_direction(&layer[0], &current, t, &mut next, 0, false);
            run_direction(&layer[1], &current, t, &mut next, self.hidden, true);
            std::mem::swap(&mut current, &mut next);
            if next.len() != t * 2 * self.hidden {
                next = vec![0.0f32; t * 2 * self.hidden];
            }
        }
        // Per-timestep linear head.
        let d = 2 * self.hidden;
        let mut out = vec![0.0f32; t * self.out_dim];
        for k in 0..t {
            let x = &current[k * d..(k + 1) * d];
            let o = &mut out[k * self.out_dim..(k + 1) * self.out_dim];
            for (row, ov) in o.iter_mut().enumerate() {
                let w = &self.head_w[row * d..(row + 1) * d];
                let mut acc = self.head_b[row];
                for (wv, xv) in w.iter().zip(x) {
                    acc += wv * xv;
                }
                *ov = acc;
            }
        }
        out
    }
}

/// Runs one LSTM direction over the sequence, writing hidden states into
/// the `offset` half of each output row (row width 2H).
fn run_direction(
    dir: &LstmDir,
    seq: &[f32],
    t: usize,
    out: &mut [f32],
    offset: usize,
    reverse: bool,
) {
    let h_sz = dir.hidden;
    let d = dir.input;
    let mut h = vec![0.0f32; h_sz];
    let mut c = vec![0.0f32; h_sz];
    let mut pre = vec![0.0f32; 4 * h_sz];

    let steps: Box<dyn Iterator<Item = usize>> = if reverse {
        Box::new((0..t).rev())
    } else {
        Box::new(0..t)
    };
    for k in steps {
        let x = &seq[k * d..(k + 1) * d];
        for (row, pv) in pre.iter_mut().enumerate() {
            let w = &dir.w_in[row * d..(row + 1) * d];
            let mut acc = dir.b[row];
            for (wv, xv) in w.iter().zip(x) {
                acc += wv * xv;
            }
            let wh = &dir.w_h[row * h_sz..(row + 1) * h_sz];
            for (wv, hv) in wh.iter().zip(&h) {
                acc += wv * hv;
            }
            *pv = acc;
        }
        for j in 0..h_sz {
            let i_gate = sigmoid32(pre[j]);
            let f_gate = sigmoid32(pre[h_sz + j]);
            let g_gate = pre[2 * h_sz + j].tanh();
            let o_gate = sigmoid32(pre[3 * h_sz + j]);
            c[j] = f_gate * c[j] + i_gate * g_gate;
            h[j] = o_gate * c[j].tanh();
        }
        out[k * 2 * h_sz + offset..k * 2 * h_sz + offset + h_sz].copy_from_slice(&h);
    }
}

fn sigmoid32(x: f32) -> f32 {
    1.0 / (1.0 + (-x).exp())
}
