//! From-scratch bidirectional LSTM inference for the two networks — the
//! UWB corrector (2x8) and the pose estimator (2x32) — plus the weight
//! container with bit-exact serialization.
//!
//! Conventions:
//! - Gate order is [input, forget, cell, output] with a single bias vector
//!   per gate set: `pre = W_in x + W_h h + b`.
//! - Windows are self-contained: hidden and cell states start at zero for
//!   every window, and no state carries across windows.
//! - Weights are stored and inference runs in f32; training keeps f64
//!   master copies (see `train`).

mod infer;
mod tensor;
mod weights;

pub use infer::InferenceModel;
pub use tensor::Tensor;
pub use weights::ModelWeights;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::pipeline::{FEATURE_DIM, OUTPUT_FRAME_LAG, WINDOW_LEN};

/// Pose output width: three joints times three coordinates.
pub const POSE_DIM: usize = 9;

/// Architecture description for both networks. The default is the shipped
/// configuration; tests use smaller variants.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelSpec {
    /// Feature width fed to the first layer (24 when `ablate_uwb`).
    pub input_dim: usize,
    pub corrector_layers: usize,
    pub corrector_hidden: usize,
    pub estimator_layers: usize,
    pub estimator_hidden: usize,
    pub window_len: usize,
    /// Output frames lag the newest frame by this many steps.
    pub output_frame_lag: usize,
    /// IMU-only variant: the UWB channel is removed and no corrector runs.
    pub ablate_uwb: bool,
}

impl Default for ModelSpec {
    fn default() -> Self {
        Self {
            input_dim: FEATURE_DIM,
            corrector_layers: 2,
            corrector_hidden: 8,
            estimator_layers: 2,
            estimator_hidden: 32,
            window_len: WINDOW_LEN,
            output_frame_lag: OUTPUT_FRAME_LAG,
            ablate_uwb: false,
        }
    }
}

impl ModelSpec {
    /// The IMU-only ablation: identical architecture, UWB channel removed.
    pub fn ablated() -> Self {
        Self {
            input_dim: FEATURE_DIM - 1,
            ablate_uwb: true,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.input_dim == 0
            || self.estimator_layers == 0
            || self.estimator_hidden == 0
            || self.window_len == 0
        {
            return Err(Error::invalid_input("model dimensions must be positive"));
        }
        if !self.ablate_uwb && (self.corrector_layers == 0 || self.corrector_hidden == 0) {
            return Err(Error::invalid_input("corrector dimensions must be positive"));
        }
        if self.ablate_uwb && self.input_dim != FEATURE_DIM - 1 {
            return Err(Error::invalid_input(
                "ablated models take 24-dimensional input",
            ));
        }
        if self.output_frame_lag >= self.window_len {
            return Err(Error::invalid_input(
                "output frame lag must be smaller than the window length",
            ));
        }
        Ok(())
    }

    /// Index of the emitted output frame within a full window.
    pub fn output_index(&self) -> usize {
        self.window_len - 1 - self.output_frame_lag
    }

    /// Canonical tensor name/shape layout, in serialization order.
    pub fn tensor_layout(&self) -> Vec<(String, Vec<usize>)> {
        let mut out = Vec::new();
        if !self.ablate_uwb {
            push_net_layout(
                &mut out,
                "corrector",
                self.input_dim,
                self.corrector_hidden,
                self.corrector_layers,
                1,
            );
        }
        push_net_layout(
            &mut out,
            "estimator",
            self.input_dim,
            self.estimator_hidden,
            self.estimator_layers,
            POSE_DIM,
        );
        out
    }

    /// Total parameter count over both networks.
    pub fn param_count(&self) -> usize {
        self.tensor_layout()
            .iter()
            .map(|(_, dims)| dims.iter().product::<usize>())
            .sum()
    }

    /// True for the shipped architecture shape (any input variant).
    pub fn is_standard_shape(&self) -> bool {
        self.corrector_layers == 2
            && self.corrector_hidden == 8
            && self.estimator_layers == 2
            && self.estimator_hidden == 32
            && self.window_len == WINDOW_LEN
    }
}

fn push_net_layout(
    out: &mut Vec<(String, Vec<usize>)>,
    net: &str,
    input_dim: usize,
    hidden: usize,
    layers: usize,
    head_out: usize,
) {
    for layer in 0..layers {
        let d = if layer == 0 { input_dim } else { 2 * hidden };
        for dir in ["fwd", "bwd"] {
            out.push((format!("{net}.l{layer}.{dir}.w_in"), vec![4 * hidden, d]));
            out.push((format!("{net}.l{layer}.{dir}.w_h"), vec![4 * hidden, hidden]));
            out.push((format!("{net}.l{layer}.{dir}.b"), vec![4 * hidden]));
        }
    }
    out.push((format!("{net}.head.w"), vec![head_out, 2 * hidden]));
    out.push((format!("{net}.head.b"), vec![head_out]));
}

/// Reference LSTM cell in f64: standard gate equations, shape-checked.
///
/// `w_in` is (4H x D) row-major, `w_h` (4H x H), `b` (4H); returns the new
/// hidden and cell states.
pub fn lstm_cell(
    x: &[f64],
    h: &[f64],
    c: &[f64],
    w_in: &[f64],
    w_h: &[f64],
    b: &[f64],
) -> Result<(Vec<f64>, Vec<f64>)> {
    let hidden = h.len();
    let input = x.len();
    if c.len() != hidden
        || b.len() != 4 * hidden
        || w_in.len() != 4 * hidden * input
        || w_h.len() != 4 * hidden * hidden
    {
        return Err(Error::invalid_input("LSTM cell shape mismatch"));
    }
    let mut pre = b.to_vec();
    for (row, pre_v) in pre.iter_mut().enumerate() {
        let w_row = &w_in[row * input..(row + 1) * input];
        let mut acc = 0.0;
        for (w, xv) in w_row.iter().zip(x) {
            acc += w * xv;
        }
        let h_row = &w_h[row * hidden..(row + 1) * hidden];
        for (w, hv) in h_row.iter().zip(h) {
            acc += w * hv;
        }
        *pre_v += acc;
    }
    let mut h_new = vec![0.0; hidden];
    let mut c_new = vec![0.0; hidden];
    for j in 0..hidden {
        let i_gate = sigmoid(pre[j]);
        let f_gate = sigmoid(pre[hidden + j]);
        let g_gate = pre[2 * hidden + j].tanh();
        let o_gate = sigmoid(pre[3 * hidden + j]);
        c_new[j] = f_gate * c[j] + i_gate * g_gate;
        h_new[j] = o_gate * c_new[j].tanh();
    }
    Ok((h_new, c_new))
}

pub(crate) fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// Picks the emitted frame of a full-window output sequence: index
/// `window_len - 1 - lag` (the 120th of 125 frames, 200 ms behind the
/// newest at 25 Hz).
pub fn select_output_frame<'a, T>(seq: &'a [T], spec: &ModelSpec) -> Result<&'a T> {
    if seq.len() != spec.window_len {
        return Err(Error::invalid_input(format!(
            "expected a {}-frame sequence, got {}",
            spec.window_len,
            seq.len()
        )));
    }
    Ok(&seq[spec.output_index()])
}
