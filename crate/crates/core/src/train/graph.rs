//! Forward and reverse passes for the chained corrector -> estimator
//! system. The backward pass produces exact reverse-mode gradients of the
//! summed loss for every parameter, including the end-to-end path through
//! the corrected-UWB channel spliced into the estimator input.

use std::ops::Range;

use crate::error::{Error, Result};
use crate::nn::POSE_DIM;
use crate::pipeline::FEATURE_DIM;
use crate::train::params::Params;
use crate::train::{mpjpe_loss, mse_loss, LossBreakdown};

/// Parameter ranges for one LSTM direction.
struct DirRef {
    w_in: Range<usize>,
    w_h: Range<usize>,
    b: Range<usize>,
    input: usize,
    hidden: usize,
}

/// Parameter ranges for one network (layers + linear head).
struct NetRef {
    layers: Vec<[DirRef; 2]>,
    head_w: Range<usize>,
    head_b: Range<usize>,
    hidden: usize,
    out: usize,
}

/// Resolved parameter ranges for the full system.
pub(crate) struct GraphRefs {
    corrector: Option<NetRef>,
    estimator: NetRef,
}

impl GraphRefs {
    pub(crate) fn new(params: &Params) -> Result<Self> {
        let spec = *params.spec();
        let net_ref = |name: &str, hidden: usize, layers: usize, out: usize| -> Result<NetRef> {
            let mut layer_refs = Vec::with_capacity(layers);
            for l in 0..layers {
                let input = if l == 0 { spec.input_dim } else { 2 * hidden };
                let dir = |d: &str| -> Result<DirRef> {
                    Ok(DirRef {
                        w_in: params.seg_range(&format!("{name}.l{l}.{d}.w_in"))?,
                        w_h: params.seg_range(&format!("{name}.l{l}.{d}.w_h"))?,
                        b: params.seg_range(&format!("{name}.l{l}.{d}.b"))?,
                        input,
                        hidden,
                    })
                };
                layer_refs.push([dir("fwd")?, dir("bwd")?]);
            }
            Ok(NetRef {
                layers: layer_refs,
                head_w: params.seg_range(&format!("{name}.head.w"))?,
                head_b: params.seg_range(&format!("{name}.head.b"))?,
                hidden,
                out,
            })
        };
        let corrector = if spec.ablate_uwb {
            None
        } else {
            Some(net_ref(
                "corrector",
                spec.corrector_hidden,
                spec.corrector_layers,
                1,
            )?)
        };
        let estimator = net_ref("estimator", spec.estimator_hidden, spec.estimator_layers, POSE_DIM)?;
        Ok(Self {
            corrector,
            estimator,
        })
    }
}

/// Per-direction forward activations cached for the reverse pass.
/// All buffers are (t x hidden), indexed by time (not processing order).
struct DirCache {
    i: Vec<f64>,
    f: Vec<f64>,
    g: Vec<f64>,
    o: Vec<f64>,
    c: Vec<f64>,
    tanh_c: Vec<f64>,
    h: Vec<f64>,
}

struct NetCache {
    /// Input sequence of each layer (layer 0 = the network input).
    layer_inputs: Vec<Vec<f64>>,
    dirs: Vec<[DirCache; 2]>,
    /// Output of the last bidirectional layer (t x 2H), fed to the head.
    head_in: Vec<f64>,
    /// Head output (t x out).
    out: Vec<f64>,
}

/// Everything the reverse pass needs from one window's forward pass.
pub(crate) struct FullCache {
    corr: Option<NetCache>,
    est: NetCache,
    t: usize,
}

impl FullCache {
    pub(crate) fn corrector_out(&self) -> Option<&[f64]> {
        self.corr.as_ref().map(|c| c.out.as_slice())
    }

    pub(crate) fn estimator_out(&self) -> &[f64] {
        &self.est.out
    }
}

/// Targets for one window: normalized true distance (t) and normalized
/// ground-truth pose (t x 9).
pub(crate) struct WindowTargets<'a> {
    pub uwb: &'a [f64],
    pub pose: &'a [f64],
}

/// Forward pass over one (t x 25) feature window, returning the loss
/// breakdown and the caches for [`backward_window`].
pub(crate) fn forward_window(
    params: &Params,
    refs: &GraphRefs,
    window: &[f64],
    t: usize,
    targets: &WindowTargets,
) -> Result<(LossBreakdown, FullCache)> {
    if window.len() != t * FEATURE_DIM {
        return Err(Error::invalid_input("window is not t x 25"));
    }
    if targets.uwb.len() != t || targets.pose.len() != t * POSE_DIM {
        return Err(Error::invalid_input("target shapes do not match the window"));
    }
    let p = params.as_slice();

    let (corr, est_input) = if let Some(corr_ref) = &refs.corrector {
        let corr_cache = forward_net(p, corr_ref, window.to_vec(), t);
        let mut est_input = window.to_vec();
        for k in 0..t {
            est_input[k * FEATURE_DIM] = corr_cache.out[k];
        }
        (Some(corr_cache), est_input)
    } else {
        // IMU-only: drop the UWB channel.
        let d = FEATURE_DIM - 1;
        let mut est_input = Vec::with_capacity(t * d);
        for k in 0..t {
            est_input.extend_from_slice(&window[k * FEATURE_DIM + 1..(k + 1) * FEATURE_DIM]);
        }
        (None, est_input)
    };

    let est = forward_net(p, &refs.estimator, est_input, t);

    let uwb_mse = match &corr {
        Some(c) => mse_loss(&c.out, targets.uwb)?,
        None => 0.0,
    };
    let pose_mpjpe = mpjpe_loss(&est.out, targets.pose)?;
    Ok((
        LossBreakdown::new(uwb_mse, pose_mpjpe),
        FullCache { corr, est, t },
    ))
}

/// Reverse pass accumulating gradients of the summed loss into `grads`.
///
/// `detach_corrector` cuts the estimator-to-corrector path through the
/// spliced channel, leaving only the direct MSE gradient on the corrector.
pub(crate) fn backward_window(
    params: &Params,
    refs: &GraphRefs,
    cache: &FullCache,
    targets: &WindowTargets,
    grads: &mut [f64],
    detach_corrector: bool,
) {
    let p = params.as_slice();
    let t = cache.t;

    // d(total)/d(estimator output) from the MPJPE term.
    let mut d_est_out = vec![0.0; t * POSE_DIM];
    mpjpe_grad(&cache.est.out, targets.pose, &mut d_est_out);

    let want_d_input = refs.corrector.is_some() && !detach_corrector;
    let d_est_input = backward_net(p, &refs.estimator, &cache.est, &d_est_out, grads, want_d_input);

    if let (Some(corr_ref), Some(corr_cache)) = (&refs.corrector, &cache.corr) {
        // Direct MSE gradient plus, unless detached, the estimator's
        // gradient on the spliced channel.
        let mut d_corr_out = vec![0.0; t];
        let scale = 2.0 / t as f64;
        for k in 0..t {
            d_corr_out[k] = scale * (corr_cache.out[k] - targets.uwb[k]);
        }
        if let Some(d_in) = &d_est_input {
            for k in 0..t {
                d_corr_out[k] += d_in[k * FEATURE_DIM];
            }
        }
        backward_net(p, corr_ref, corr_cache, &d_corr_out, grads, false);
    }
}

/// Gradient of the MPJPE loss with respect to the predictions.
fn mpjpe_grad(pred: &[f64], target: &[f64], d_pred: &mut [f64]) {
    let frames = pred.len() / POSE_DIM;
    let denom = (frames * 3) as f64;
    for (j, ((p, tgt), d)) in pred
        .chunks_exact(3)
        .zip(target.chunks_exact(3))
        .zip(d_pred.chunks_exact_mut(3))
        .enumerate()
    {
        let _ = j;
        let e = [p[0] - tgt[0], p[1] - tgt[1], p[2] - tgt[2]];
        let n = (e[0] * e[0] + e[1] * e[1] + e[2] * e[2]).sqrt();
        if n > 0.0 {
            for (dv, ev) in d.iter_mut().zip(&e) {
                *dv = ev / (n * denom);
            }
        }
    }
}

fn forward_net(p: &[f64], net: &NetRef, input: Vec<f64>, t: usize) -> NetCache {
    let h2 = 2 * net.hidden;
    let mut layer_inputs = Vec::with_capacity(net.layers.len());
    let mut dirs = Vec::with_capacity(net.layers.len());
    let mut current = input;
    for layer in &net.layers {
        let fwd = forward_dir(p, &layer[0], &current, t, false);
        let bwd = forward_dir(p, &layer[1], &current, t, true);
        let h = net.hidden;
        let mut out = vec![0.0; t * h2];
        for k in 0..t {
            out[k * h2..k * h2 + h].copy_from_slice(&fwd.h[k * h..(k + 1) * h]);
            out[k * h2 + h..(k + 1) * h2].copy_from_slice(&bwd.h[k * h..(k + 1) * h]);
        }
        layer_inputs.push(std::mem::replace(&mut current, out));
        dirs.push([fwd, bwd]);
    }

    let head_in = current;
    let hw = &p[net.head_w.clone()];
    let hb = &p[net.head_b.clone()];
    let mut out = vec![0.0; t * net.out];
    for k in 0..t {
        let x = &head_in[k * h2..(k + 1) * h2];
        for row in 0..net.out {
            let w = &hw[row * h2..(row + 1) * h2];
            let mut acc = hb[row];
            for (wv, xv) in w.iter().zip(x) {
                acc += wv * xv;
            }
            out[k * net.out + row] = acc;
        }
    }
    NetCache {
        layer_inputs,
        dirs,
        head_in,
        out,
    }
}

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

fn forward_dir(p: &[f64], d: &DirRef, input: &[f64], t: usize, reverse: bool) -> DirCache {
    let h_sz = d.hidden;
    let din = d.input;
    let w_in = &p[d.w_in.clone()];
    let w_h = &p[d.w_h.clone()];
    let b = &p[d.b.clone()];

    let mut cache = DirCache {
        i: vec![0.0; t * h_sz],
        f: vec![0.0; t * h_sz],
        g: vec![0.0; t * h_sz],
        o: vec![0.0; t * h_sz],
        c: vec![0.0; t * h_sz],
        tanh_c: vec![0.0; t * h_sz],
        h: vec![0.0; t * h_sz],
    };
    let mut h_prev = vec![0.0; h_sz];
    let mut c_prev = vec![0.0; h_sz];
    let mut pre = vec![0.0; 4 * h_sz];

    for s in 0..t {
        let k = if reverse { t - 1 - s } else { s };
        let x = &input[k * din..(k + 1) * din];
        for (row, pv) in pre.iter_mut().enumerate() {
            let w = &w_in[row * din..(row + 1) * din];
            let mut acc = b[row];
            for (wv, xv) in w.iter().zip(x) {
                acc += wv * xv;
            }
            let wh = &w_h[row * h_sz..(row + 1) * h_sz];
            for (wv, hv) in wh.iter().zip(&h_prev) {
                acc += wv * hv;
            }
            *pv = acc;
        }
        let base = k * h_sz;
        for j in 0..h_sz {
            let i_g = sigmoid(pre[j]);
            let f_g = sigmoid(pre[h_sz + j]);
            let g_g = pre[2 * h_sz + j].tanh();
            let o_g = sigmoid(pre[3 * h_sz + j]);
            let c = f_g * c_prev[j] + i_g * g_g;
            let tc = c.tanh();
            let hh = o_g * tc;
            cache.i[base + j] = i_g;
            cache.f[base + j] = f_g;
            cache.g[base + j] = g_g;
            cache.o[base + j] = o_g;
            cache.c[base + j] = c;
            cache.tanh_c[base + j] = tc;
            cache.h[base + j] = hh;
            c_prev[j] = c;
            h_prev[j] = hh;
        }
    }
    cache
}

/// Reverse pass over one network. Returns the gradient with respect to
/// the network input sequence when `want_d_input`.
fn backward_net(
    p: &[f64],
    net: &NetRef,
    cache: &NetCache,
    d_out: &[f64],
    grads: &mut [f64],
    want_d_input: bool,
) -> Option<Vec<f64>> {
    let h2 = 2 * net.hidden;
    let t = d_out.len() / net.out;

    // Head: bias/weight gradients and the gradient on its input.
    let mut d_head_in = vec![0.0; t * h2];
    for k in 0..t {
        let x = &cache.head_in[k * h2..(k + 1) * h2];
        for row in 0..net.out {
            let g = d_out[k * net.out + row];
            if g == 0.0 {
                continue;
            }
            grads[net.head_b.start + row] += g;
            let gw_base = net.head_w.start + row * h2;
            let gw = &mut grads[gw_base..gw_base + h2];
            for (gv, xv) in gw.iter_mut().zip(x) {
                *gv += g * xv;
            }
            let w = &p[net.head_w.start + row * h2..net.head_w.start + (row + 1) * h2];
            let dh = &mut d_head_in[k * h2..(k + 1) * h2];
            for (dv, wv) in dh.iter_mut().zip(w) {
                *dv += g * wv;
            }
        }
    }

    let mut d_layer_out = d_head_in;
    for (li, layer) in net.layers.iter().enumerate().rev() {
        let din = layer[0].input;
        let input = &cache.layer_inputs[li];
        let mut d_input = vec![0.0; t * din];
        let h = net.hidden;
        for (diri, dir_ref) in layer.iter().enumerate() {
            let mut d_h = vec![0.0; t * h];
            for k in 0..t {
                d_h[k * h..(k + 1) * h]
                    .copy_from_slice(&d_layer_out[k * h2 + diri * h..k * h2 + (diri + 1) * h]);
            }
            backward_dir(
                p,
                dir_ref,
                &cache.dirs[li][diri],
                input,
                &d_h,
                diri == 1,
                grads,
                &mut d_input,
            );
        }
        if li == 0 {
            return want_d_input.then_some(d_input);
        }
        d_layer_out = d_input;
    }
    None
}

#[allow(clippy::too_many_arguments)]
fn backward_dir(
    p: &[f64],
    d: &DirRef,
    cache: &DirCache,
    input: &[f64],
    d_h_ext: &[f64],
    reverse: bool,
    grads: &mut [f64],
    d_input: &mut [f64],
) {
    let h_sz = d.hidden;
    let din = d.input;
    let t = d_h_ext.len() / h_sz;
    let w_in = &p[d.w_in.clone()];
    let w_h = &p[d.w_h.clone()];

    let mut dh_carry = vec![0.0; h_sz];
    let mut dc_carry = vec![0.0; h_sz];
    let mut da = vec![0.0; 4 * h_sz];

    // Walk the processing order backwards; `k` is the time index of
    // processing step `s`.
    for s in (0..t).rev() {
        let k = if reverse { t - 1 - s } else { s };
        let prev_k = if s > 0 {
            Some(if reverse { t - s } else { s - 1 })
        } else {
            None
        };
        let base = k * h_sz;
        for j in 0..h_sz {
            let i_g = cache.i[base + j];
            let f_g = cache.f[base + j];
            let g_g = cache.g[base + j];
            let o_g = cache.o[base + j];
            let tc = cache.tanh_c[base + j];
            let dh = d_h_ext[base + j] + dh_carry[j];
            let d_o = dh * tc;
            let dc = dc_carry[j] + dh * o_g * (1.0 - tc * tc);
            let c_prev = match prev_k {
                Some(pk) => cache.c[pk * h_sz + j],
                None => 0.0,
            };
            let d_i = dc * g_g;
            let d_g = dc * i_g;
            let d_f = dc * c_prev;
            dc_carry[j] = dc * f_g;
            da[j] = d_i * i_g * (1.0 - i_g);
            da[h_sz + j] = d_f * f_g * (1.0 - f_g);
            da[2 * h_sz + j] = d_g * (1.0 - g_g * g_g);
            da[3 * h_sz + j] = d_o * o_g * (1.0 - o_g);
        }

        for (gb, dav) in grads[d.b.clone()].iter_mut().zip(&da) {
            *gb += dav;
        }

        let x = &input[k * din..(k + 1) * din];
        let dx = &mut d_input[k * din..(k + 1) * din];
        for (row, &dav) in da.iter().enumerate() {
            let gw_base = d.w_in.start + row * din;
            let gw = &mut grads[gw_base..gw_base + din];
            for (gv, xv) in gw.iter_mut().zip(x) {
                *gv += dav * xv;
            }
            let w = &w_in[row * din..(row + 1) * din];
            for (dv, wv) in dx.iter_mut().zip(w) {
                *dv += dav * wv;
            }
        }

        dh_carry.iter_mut().for_each(|v| *v = 0.0);
        if let Some(pk) = prev_k {
            let h_prev = &cache.h[pk * h_sz..(pk + 1) * h_sz];
            for (row, &dav) in da.iter().enumerate() {
                let gw_base = d.w_h.start + row * h_sz;
                let gw = &mut grads[gw_base..gw_base + h_sz];
                for (gv, hv) in gw.iter_mut().zip(h_prev) {
                    *gv += dav * hv;
                }
                let w = &w_h[row * h_sz..(row + 1) * h_sz];
                for (dv, wv) in dh_carry.iter_mut().zip(w) {
                    *dv += dav * wv;
                }
            }
        }
    }
}
