//! End-to-end training of the corrector + estimator system: BPTT through
//! both networks, Adam, the summed MSE + MPJPE loss, and gradient
//! verification against finite differences.

mod graph;
mod params;

pub use params::Params;

use rayon::prelude::*;
use std::collections::BTreeSet;
use std::io::Write;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::calib::CalibrationState;
use crate::error::{Error, Result};
use crate::kinematics::{device_distance, normalize_pose};
use crate::math::Vec3;
use crate::nn::{ModelSpec, ModelWeights, POSE_DIM};
use crate::pipeline::{session_features, ACCEL_SCALE, FEATURE_DIM, WINDOW_LEN};
use crate::sim::{
    calibration_capture, generate_session, SensorNoiseConfig, SessionRecording, SyntheticSubject,
};

use graph::{backward_window, forward_window, FullCache, GraphRefs, WindowTargets};

// ---------------------------------------------------------------------------
// Configuration and loss bookkeeping
// ---------------------------------------------------------------------------

/// Training hyperparameters. Defaults follow the shipped configuration:
/// Adam at 3e-4 over non-overlapping 125-frame windows.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub adam_beta1: f64,
    pub adam_beta2: f64,
    pub adam_eps: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub accel_scale: f64,
    pub window_len: usize,
    pub seed: u64,
    /// Global-norm gradient clip; guards long-window BPTT against blowups.
    pub grad_clip_norm: f64,
    /// Train the IMU-only variant (UWB channel removed, no corrector).
    pub ablate_uwb: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            learning_rate: 3e-4,
            adam_beta1: 0.9,
            adam_beta2: 0.999,
            adam_eps: 1e-8,
            epochs: 10,
            batch_size: 16,
            accel_scale: ACCEL_SCALE,
            window_len: WINDOW_LEN,
            seed: 0,
            grad_clip_norm: 1.0,
            ablate_uwb: false,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.learning_rate <= 0.0 {
            return Err(Error::invalid_input("learning rate must be positive"));
        }
        if !(0.0..1.0).contains(&self.adam_beta1) || !(0.0..1.0).contains(&self.adam_beta2) {
            return Err(Error::invalid_input("Adam betas must be in [0, 1)"));
        }
        if self.epochs == 0 || self.batch_size == 0 {
            return Err(Error::invalid_input("epochs and batch size must be positive"));
        }
        Ok(())
    }

    pub fn model_spec(&self) -> ModelSpec {
        if self.ablate_uwb {
            ModelSpec::ablated()
        } else {
            ModelSpec::default()
        }
    }
}

/// Loss components for one window or one epoch; `total` is their sum.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossBreakdown {
    pub uwb_mse: f64,
    pub pose_mpjpe: f64,
    pub total: f64,
}

impl LossBreakdown {
    pub fn new(uwb_mse: f64, pose_mpjpe: f64) -> Self {
        Self {
            uwb_mse,
            pose_mpjpe,
            total: uwb_mse + pose_mpjpe,
        }
    }
}

/// Mean squared error over all elements.
pub fn mse_loss(pred: &[f64], target: &[f64]) -> Result<f64> {
    if pred.len() != target.len() || pred.is_empty() {
        return Err(Error::invalid_input(
            "MSE inputs must be equal-length and non-empty",
        ));
    }
    let sum: f64 = pred
        .iter()
        .zip(target)
        .map(|(p, t)| (p - t) * (p - t))
        .sum();
    Ok(sum / pred.len() as f64)
}

/// Mean per-joint position error over (t x 9) sequences: the Euclidean
/// norm of each joint's 3D error, averaged over frames and joints.
pub fn mpjpe_loss(pred: &[f64], target: &[f64]) -> Result<f64> {
    if pred.len() != target.len() || pred.is_empty() || pred.len() % POSE_DIM != 0 {
        return Err(Error::invalid_input(
            "MPJPE inputs must be matching t x 9 sequences",
        ));
    }
    let mut sum = 0.0;
    for (p, t) in pred.chunks_exact(3).zip(target.chunks_exact(3)) {
        let dx = p[0] - t[0];
        let dy = p[1] - t[1];
        let dz = p[2] - t[2];
        sum += (dx * dx + dy * dy + dz * dz).sqrt();
    }
    Ok(sum / (pred.len() / 3) as f64)
}

// ---------------------------------------------------------------------------
// Adam
// ---------------------------------------------------------------------------

/// Per-parameter first/second moment estimates plus the step counter.
#[derive(Debug, Clone)]
pub struct AdamState {
    m: Vec<f64>,
    v: Vec<f64>,
    pub step: u64,
}

impl AdamState {
    pub fn new(n_params: usize) -> Self {
        Self {
            m: vec![0.0; n_params],
            v: vec![0.0; n_params],
            step: 0,
        }
    }
}

/// One bias-corrected Adam update in place.
pub fn adam_step(
    params: &mut [f64],
    grads: &[f64],
    state: &mut AdamState,
    cfg: &TrainConfig,
) -> Result<()> {
    if params.len() != grads.len() || params.len() != state.m.len() {
        return Err(Error::invalid_input("Adam shape mismatch"));
    }
    state.step += 1;
    let t = state.step as i32;
    let b1 = cfg.adam_beta1;
    let b2 = cfg.adam_beta2;
    let bc1 = 1.0 - b1.powi(t);
    let bc2 = 1.0 - b2.powi(t);
    for i in 0..params.len() {
        let g = grads[i];
        state.m[i] = b1 * state.m[i] + (1.0 - b1) * g;
        state.v[i] = b2 * state.v[i] + (1.0 - b2) * g * g;
        let m_hat = state.m[i] / bc1;
        let v_hat = state.v[i] / bc2;
        params[i] -= cfg.learning_rate * m_hat / (v_hat.sqrt() + cfg.adam_eps);
    }
    Ok(())
}

/// Scales gradients so their global L2 norm is at most `max_norm`;
/// returns the pre-clip norm.
pub fn clip_global_norm(grads: &mut [f64], max_norm: f64) -> f64 {
    let norm = grads.iter().map(|g| g * g).sum::<f64>().sqrt();
    if norm > max_norm && norm > 0.0 {
        let scale = max_norm / norm;
        for g in grads.iter_mut() {
            *g *= scale;
        }
    }
    norm
}

// ---------------------------------------------------------------------------
// Corpus and training windows
// ---------------------------------------------------------------------------

/// A recorded session paired with the calibration that applies to it.
#[derive(Debug, Clone)]
pub struct SessionData {
    pub recording: SessionRecording,
    pub calibration: CalibrationState,
}

/// One non-overlapping 125-frame training window with its targets:
/// normalized true device distance and normalized ground-truth pose.
#[derive(Debug, Clone)]
pub struct TrainingWindow {
    pub subject_id: String,
    pub arm_span: f64,
    pub start_frame: usize,
    /// Flattened (125 x 25) feature rows.
    pub features: Vec<f64>,
    pub uwb_target: Vec<f64>,
    pub pose_target: Vec<f64>,
}

/// Tiles every session into consecutive disjoint 125-frame windows.
/// Remainder frames are dropped; sessions shorter than one window are
/// skipped with a warning.
pub fn make_training_windows(sessions: &[SessionData]) -> Result<Vec<TrainingWindow>> {
    let mut out = Vec::new();
    for s in sessions {
        let n = s.recording.frames.len();
        if n < WINDOW_LEN {
            eprintln!(
                "warning: session for {} has {} frames (< {}), skipping",
                s.recording.subject.id, n, WINDOW_LEN
            );
            continue;
        }
        let feats = session_features(&s.recording, &s.calibration)?;
        let model = &s.recording.subject.arm_model;
        let span = model.arm_span;
        let uwb_true: Vec<f64> = s
            .recording
            .frames
            .iter()
            .map(|f| device_distance(&f.gt_pose, Vec3::zero(), model) / span)
            .collect();
        let pose_norm: Result<Vec<[f64; 9]>> = s
            .recording
            .frames
            .iter()
            .map(|f| normalize_pose(&f.gt_pose, span))
            .collect();
        let pose_norm = pose_norm?;

        for start in (0..=n - WINDOW_LEN).step_by(WINDOW_LEN) {
            let mut features = Vec::with_capacity(WINDOW_LEN * FEATURE_DIM);
            let mut pose_target = Vec::with_capacity(WINDOW_LEN * POSE_DIM);
            for k in start..start + WINDOW_LEN {
                features.extend_from_slice(&feats[k].features);
                pose_target.extend_from_slice(&pose_norm[k]);
            }
            out.push(TrainingWindow {
                subject_id: s.recording.subject.id.clone(),
                arm_span: span,
                start_frame: start,
                features,
                uwb_target: uwb_true[start..start + WINDOW_LEN].to_vec(),
                pose_target,
            });
        }
    }
    Ok(out)
}

/// Generates a synthetic corpus: one session (and calibration) per
/// subject, all derived deterministically from the master seed.
pub fn synth_corpus(
    n_subjects: usize,
    minutes: f64,
    master_seed: u64,
    noise: &SensorNoiseConfig,
) -> Result<Vec<SessionData>> {
    (0..n_subjects)
        .map(|i| {
            let subject = SyntheticSubject::generate(i, master_seed);
            let session_seed = master_seed
                .wrapping_mul(0x9e37_79b9_7f4a_7c15)
                .wrapping_add(i as u64);
            let obs = calibration_capture(&subject, noise, session_seed);
            let calibration = CalibrationState::calibrate(&obs)?;
            let recording = generate_session(&subject, noise, minutes * 60.0, session_seed)?;
            Ok(SessionData {
                recording,
                calibration,
            })
        })
        .collect()
}

// ---------------------------------------------------------------------------
// Trainer
// ---------------------------------------------------------------------------

/// Per-epoch running statistics; `val_mpjpe_cm` is the held-out MPJPE in
/// centimeters after denormalization.
#[derive(Debug, Clone, Copy)]
pub struct EpochStats {
    pub epoch: usize,
    pub uwb_mse: f64,
    pub pose_mpjpe: f64,
    pub total: f64,
    pub val_mpjpe_cm: f64,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    /// Best-validation weights (f32 serialization container).
    pub weights: ModelWeights,
    pub history: Vec<EpochStats>,
    pub best_epoch: usize,
}

/// End-to-end training over a session corpus.
///
/// One subject is held out for validation (windows of a single-subject
/// corpus are split 80/20 instead); the weights returned are the best
/// validation snapshot. Batch gradients are averaged in fixed window
/// order, so results are identical regardless of worker-thread count.
pub fn train(corpus: &[SessionData], cfg: &TrainConfig) -> Result<TrainOutcome> {
    cfg.validate()?;
    if corpus.is_empty() {
        return Err(Error::invalid_input("empty training corpus"));
    }
    let windows = make_training_windows(corpus)?;
    if windows.is_empty() {
        return Err(Error::data("corpus contains no full training window"));
    }
    let all: Vec<usize> = (0..windows.len()).collect();
    let (train_idx, val_idx) = split_validation(&windows, &all);
    train_on_windows(&windows, &train_idx, &val_idx, cfg)
}

/// Splits a window-index subset into training and validation: the last
/// subject (by id) is held out when the subset spans several subjects,
/// otherwise the last 20% of windows.
pub(crate) fn split_validation(
    windows: &[TrainingWindow],
    subset: &[usize],
) -> (Vec<usize>, Vec<usize>) {
    let subjects: BTreeSet<&str> = subset
        .iter()
        .map(|&i| windows[i].subject_id.as_str())
        .collect();
    if subjects.len() >= 2 {
        let val_subject = *subjects.iter().next_back().expect("non-empty");
        let (val, train): (Vec<usize>, Vec<usize>) = subset
            .iter()
            .copied()
            .partition(|&i| windows[i].subject_id == val_subject);
        (train, val)
    } else {
        let n_val = (subset.len() / 5).clamp(1, subset.len());
        let split = subset.len() - n_val;
        if split == 0 {
            // Degenerate single-window subset: validate on the training set.
            (subset.to_vec(), subset.to_vec())
        } else {
            (subset[..split].to_vec(), subset[split..].to_vec())
        }
    }
}

/// Core loop shared by `train` and the cross-validation driver.
pub(crate) fn train_on_windows(
    windows: &[TrainingWindow],
    train_idx: &[usize],
    val_idx: &[usize],
    cfg: &TrainConfig,
) -> Result<TrainOutcome> {
    cfg.validate()?;
    if train_idx.is_empty() {
        return Err(Error::data("no training windows"));
    }
    let spec = cfg.model_spec();
    let mut params = Params::init(spec, cfg.seed)?;
    let refs = GraphRefs::new(&params)?;
    let mut adam = AdamState::new(params.len());
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ 0x7472_6169_6e5f_7368);

    let mut order: Vec<usize> = train_idx.to_vec();
    let mut history = Vec::with_capacity(cfg.epochs);
    let mut best: Option<(f64, Params, usize)> = None;

    for epoch in 0..cfg.epochs {
        order.shuffle(&mut rng);
        let mut sums = (0.0f64, 0.0f64, 0.0f64);
        let mut n_seen = 0usize;
        for batch in order.chunks(cfg.batch_size) {
            let results: Result<Vec<(LossBreakdown, Vec<f64>)>> = batch
                .par_iter()
                .map(|&wi| {
                    let w = &windows[wi];
                    let targets = WindowTargets {
                        uwb: &w.uwb_target,
                        pose: &w.pose_target,
                    };
                    let (loss, cache) =
                        forward_window(&params, &refs, &w.features, WINDOW_LEN, &targets)?;
                    let mut grads = vec![0.0; params.len()];
                    backward_window(&params, &refs, &cache, &targets, &mut grads, false);
                    Ok((loss, grads))
                })
                .collect();
            let results = results?;

            let mut grads = vec![0.0; params.len()];
            for (_, g) in &results {
                for (a, b) in grads.iter_mut().zip(g) {
                    *a += b;
                }
            }
            let scale = 1.0 / results.len() as f64;
            grads.iter_mut().for_each(|v| *v *= scale);

            for (loss, _) in &results {
                sums.0 += loss.uwb_mse;
                sums.1 += loss.pose_mpjpe;
                sums.2 += loss.total;
            }
            n_seen += results.len();

            if !sums.2.is_finite() || grads.iter().any(|g| !g.is_finite()) {
                return Err(Error::numerical(format!(
                    "training diverged (non-finite loss/gradient) at epoch {epoch}"
                )));
            }
            clip_global_norm(&mut grads, cfg.grad_clip_norm);
            adam_step(params.as_mut_slice(), &grads, &mut adam, cfg)?;
        }

        let val_mpjpe_cm = validation_mpjpe_cm(&params, &refs, windows, val_idx)?;
        history.push(EpochStats {
            epoch,
            uwb_mse: sums.0 / n_seen as f64,
            pose_mpjpe: sums.1 / n_seen as f64,
            total: sums.2 / n_seen as f64,
            val_mpjpe_cm,
        });
        let is_better = best
            .as_ref()
            .map(|(b, _, _)| val_mpjpe_cm < *b)
            .unwrap_or(true);
        if is_better {
            best = Some((val_mpjpe_cm, params.clone(), epoch));
        }
    }

    let (_, best_params, best_epoch) = best.expect("at least one epoch ran");
    Ok(TrainOutcome {
        weights: best_params.to_weights()?,
        history,
        best_epoch,
    })
}

fn validation_mpjpe_cm(
    params: &Params,
    refs: &GraphRefs,
    windows: &[TrainingWindow],
    val_idx: &[usize],
) -> Result<f64> {
    if val_idx.is_empty() {
        return Ok(f64::NAN);
    }
    let losses: Result<Vec<f64>> = val_idx
        .par_iter()
        .map(|&wi| {
            let w = &windows[wi];
            let targets = WindowTargets {
                uwb: &w.uwb_target,
                pose: &w.pose_target,
            };
            let (loss, _) = forward_window(params, refs, &w.features, WINDOW_LEN, &targets)?;
            Ok(loss.pose_mpjpe * w.arm_span * 100.0)
        })
        .collect();
    let losses = losses?;
    Ok(losses.iter().sum::<f64>() / losses.len() as f64)
}

/// Writes the loss history as CSV: epoch, uwb_mse, pose_mpjpe, total,
/// val_mpjpe_cm.
pub fn write_loss_csv(history: &[EpochStats], path: impl AsRef<Path>) -> Result<()> {
    let mut f = std::fs::File::create(path)?;
    writeln!(f, "epoch,uwb_mse,pose_mpjpe,total,val_mpjpe_cm")?;
    for h in history {
        writeln!(
            f,
            "{},{},{},{},{}",
            h.epoch, h.uwb_mse, h.pose_mpjpe, h.total, h.val_mpjpe_cm
        )?;
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// Gradient verification
// ---------------------------------------------------------------------------

/// Result of comparing analytic gradients against central finite
/// differences on one random window.
#[derive(Debug, Clone, Copy)]
pub struct GradCheckReport {
    pub checked: usize,
    pub within_tol: usize,
    pub worst_rel_err: f64,
}

/// Compares every parameter's analytic gradient against a central finite
/// difference of the total loss on one random window of length `t`.
///
/// Relative error uses `|ga - gn| / max(|ga| + |gn|, 1e-3)`, which turns
/// into an absolute criterion for near-zero gradients (where the finite
/// difference itself is noise-limited).
pub fn finite_difference_check(
    spec: ModelSpec,
    t: usize,
    seed: u64,
    step: f64,
    tol: f64,
) -> Result<GradCheckReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let params = Params::init(spec, rng.gen())?;
    let refs = GraphRefs::new(&params)?;

    let window: Vec<f64> = (0..t * FEATURE_DIM)
        .map(|_| rng.gen_range(-1.0..1.0))
        .collect();
    let uwb: Vec<f64> = (0..t).map(|_| rng.gen_range(0.0..1.2)).collect();
    let pose: Vec<f64> = (0..t * POSE_DIM).map(|_| rng.gen_range(-0.5..0.5)).collect();
    let targets = WindowTargets {
        uwb: &uwb,
        pose: &pose,
    };

    let (_, cache) = forward_window(&params, &refs, &window, t, &targets)?;
    let mut analytic = vec![0.0; params.len()];
    backward_window(&params, &refs, &cache, &targets, &mut analytic, false);

    let n = params.len();
    let reports: Result<Vec<(bool, f64)>> = (0..n)
        .into_par_iter()
        .map(|i| {
            let mut p = params.clone();
            p.as_mut_slice()[i] += step;
            let (up, _) = forward_window(&p, &refs, &window, t, &targets)?;
            p.as_mut_slice()[i] -= 2.0 * step;
            let (down, _) = forward_window(&p, &refs, &window, t, &targets)?;
            let numeric = (up.total - down.total) / (2.0 * step);
            let ga = analytic[i];
            let rel = (ga - numeric).abs() / (ga.abs() + numeric.abs()).max(1e-3);
            Ok((rel <= tol, rel))
        })
        .collect();
    let reports = reports?;
    let within = reports.iter().filter(|(ok, _)| *ok).count();
    let worst = reports.iter().map(|(_, r)| *r).fold(0.0f64, f64::max);
    Ok(GradCheckReport {
        checked: n,
        within_tol: within,
        worst_rel_err: worst,
    })
}

/// Forward-only evaluation of one window with the f64 training graph;
/// returns the losses, the estimator output, and the corrector output.
pub fn forward_losses(
    params: &Params,
    window: &[f64],
    t: usize,
    uwb_target: &[f64],
    pose_target: &[f64],
) -> Result<(LossBreakdown, Vec<f64>, Option<Vec<f64>>)> {
    let refs = GraphRefs::new(params)?;
    let targets = WindowTargets {
        uwb: uwb_target,
        pose: pose_target,
    };
    let (loss, cache) = forward_window(params, &refs, window, t, &targets)?;
    Ok((
        loss,
        cache.estimator_out().to_vec(),
        cache.corrector_out().map(|c| c.to_vec()),
    ))
}

/// Analytic gradients for one window (test/diagnostic helper).
pub fn window_gradients(
    params: &Params,
    window: &[f64],
    t: usize,
    uwb_target: &[f64],
    pose_target: &[f64],
    detach_corrector: bool,
) -> Result<(LossBreakdown, Vec<f64>)> {
    let refs = GraphRefs::new(params)?;
    let targets = WindowTargets {
        uwb: uwb_target,
        pose: pose_target,
    };
    let (loss, cache): (LossBreakdown, FullCache) =
        forward_window(params, &refs, window, t, &targets)?;
    let mut grads = vec![0.0; params.len()];
    backward_window(params, &refs, &cache, &targets, &mut grads, detach_corrector);
    Ok((loss, grads))
}
