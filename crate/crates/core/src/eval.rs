//! Evaluation machinery: per-joint error statistics, CDFs, UWB correction
//! gains, spatial max-error heatmaps, leave-one-subject-out cross
//! validation, and the UWB ablation.

use rayon::prelude::*;
use serde::Serialize;
use std::collections::BTreeSet;

use crate::error::{Error, Result};
use crate::kinematics::{denormalize_pose, device_distance, ArmPose};
use crate::math::Vec3;
use crate::nn::{InferenceModel, POSE_DIM};
use crate::pipeline::{session_features, FEATURE_DIM, WINDOW_LEN};
use crate::train::{
    make_training_windows, split_validation, train_on_windows, SessionData, TrainConfig,
    TrainOutcome, TrainingWindow,
};

// ---------------------------------------------------------------------------
// Error statistics
// ---------------------------------------------------------------------------

pub const JOINT_NAMES: [&str; 3] = ["shoulder", "elbow", "wrist"];

/// Per-frame per-joint Euclidean errors in centimeters.
///
/// `pred_norm` are the model's normalized 9-value poses (already selected
/// at the lagged output frame); `gt` the lag-matched ground-truth poses.
pub fn joint_errors(
    pred_norm: &[[f64; POSE_DIM]],
    gt: &[ArmPose],
    arm_span: f64,
) -> Result<Vec<[f64; 3]>> {
    if pred_norm.len() != gt.len() {
        return Err(Error::invalid_input(
            "prediction and ground-truth sequences differ in length",
        ));
    }
    pred_norm
        .iter()
        .zip(gt)
        .map(|(p, g)| {
            let pose = denormalize_pose(p, arm_span)?;
            Ok([
                (pose.shoulder - g.shoulder).norm() * 100.0,
                (pose.elbow - g.elbow).norm() * 100.0,
                (pose.wrist - g.wrist).norm() * 100.0,
            ])
        })
        .collect()
}

/// Median with linear interpolation between the middle order statistics.
pub fn median(values: &[f64]) -> Result<f64> {
    if values.is_empty() {
        return Err(Error::invalid_input("median of empty input"));
    }
    let mut v = values.to_vec();
    v.sort_by(|a, b| a.partial_cmp(b).expect("non-NaN"));
    let n = v.len();
    Ok(if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    })
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct JointStats {
    pub median_cm: f64,
    pub mean_cm: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct SubjectStats {
    pub subject_id: String,
    pub joint_median_cm: [f64; 3],
    pub elbow_wrist_median_avg_cm: f64,
    pub n_frames: usize,
}

/// Per-joint error statistics over an evaluation run.
#[derive(Debug, Clone, Serialize)]
pub struct MetricsReport {
    /// shoulder, elbow, wrist.
    pub per_joint: [JointStats; 3],
    /// Mean of the elbow and wrist medians (the headline metric).
    pub elbow_wrist_median_avg_cm: f64,
    /// Median over elbow+wrist samples pooled together (auxiliary view).
    pub pooled_elbow_wrist_median_cm: f64,
    /// Classic MPJPE: mean Euclidean error over frames and all joints.
    pub mpjpe_cm: f64,
    /// Mean absolute per-axis error over frames, joints, and axes.
    pub mae_cm: f64,
    pub per_subject: Vec<SubjectStats>,
    pub n_frames: usize,
}

/// Builds a [`MetricsReport`] from per-subject groups of
/// (Euclidean joint errors, signed per-axis errors).
pub fn summarize_groups(groups: &[(String, Vec<[f64; 3]>, Vec<[f64; 9]>)]) -> Result<MetricsReport> {
    let all: Vec<[f64; 3]> = groups.iter().flat_map(|(_, e, _)| e.iter().copied()).collect();
    if all.is_empty() {
        return Err(Error::invalid_input("no errors to summarize"));
    }
    let joint_column = |j: usize| -> Vec<f64> { all.iter().map(|e| e[j]).collect() };
    let mut per_joint = Vec::with_capacity(3);
    for j in 0..3 {
        let col = joint_column(j);
        per_joint.push(JointStats {
            median_cm: median(&col)?,
            mean_cm: col.iter().sum::<f64>() / col.len() as f64,
        });
    }
    let per_joint: [JointStats; 3] = [per_joint[0], per_joint[1], per_joint[2]];

    let pooled_ew: Vec<f64> = all.iter().flat_map(|e| [e[1], e[2]]).collect();
    let mpjpe_cm =
        all.iter().map(|e| e[0] + e[1] + e[2]).sum::<f64>() / (3 * all.len()) as f64;

    let components: Vec<f64> = groups
        .iter()
        .flat_map(|(_, _, c)| c.iter().flat_map(|row| row.iter().map(|v| v.abs())))
        .collect();
    let mae_cm = if components.is_empty() {
        f64::NAN
    } else {
        components.iter().sum::<f64>() / components.len() as f64
    };

    let per_subject = groups
        .iter()
        .filter(|(_, e, _)| !e.is_empty())
        .map(|(id, errs, _)| {
            let med = |j: usize| median(&errs.iter().map(|e| e[j]).collect::<Vec<_>>());
            let joint_median_cm = [med(0)?, med(1)?, med(2)?];
            Ok(SubjectStats {
                subject_id: id.clone(),
                joint_median_cm,
                elbow_wrist_median_avg_cm: 0.5 * (joint_median_cm[1] + joint_median_cm[2]),
                n_frames: errs.len(),
            })
        })
        .collect::<Result<Vec<_>>>()?;

    Ok(MetricsReport {
        elbow_wrist_median_avg_cm: 0.5 * (per_joint[1].median_cm + per_joint[2].median_cm),
        pooled_elbow_wrist_median_cm: median(&pooled_ew)?,
        per_joint,
        mpjpe_cm,
        mae_cm,
        per_subject,
        n_frames: all.len(),
    })
}

/// Summarizes a single anonymous group of Euclidean joint errors.
pub fn summarize(errors: &[[f64; 3]]) -> Result<MetricsReport> {
    summarize_groups(&[("all".to_string(), errors.to_vec(), Vec::new())])
}

// ---------------------------------------------------------------------------
// UWB gain, scatter fit, CDF
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, Serialize)]
pub struct UwbGain {
    pub raw_mae_cm: f64,
    pub corrected_mae_cm: f64,
    pub reduction_pct: f64,
}

/// Mean absolute error of the raw and corrected streams against the true
/// distance (all meters in, centimeters out) and the percent reduction.
pub fn uwb_gain(raw: &[f64], corrected: &[f64], true_dist: &[f64]) -> Result<UwbGain> {
    if raw.len() != corrected.len() || raw.len() != true_dist.len() || raw.is_empty() {
        return Err(Error::invalid_input("UWB streams must be aligned and non-empty"));
    }
    let mae = |xs: &[f64]| -> f64 {
        xs.iter()
            .zip(true_dist)
            .map(|(x, t)| (x - t).abs())
            .sum::<f64>()
            / xs.len() as f64
            * 100.0
    };
    let raw_mae_cm = mae(raw);
    let corrected_mae_cm = mae(corrected);
    let reduction_pct = if raw_mae_cm > 0.0 {
        (1.0 - corrected_mae_cm / raw_mae_cm) * 100.0
    } else {
        0.0
    };
    Ok(UwbGain {
        raw_mae_cm,
        corrected_mae_cm,
        reduction_pct,
    })
}

/// Ordinary least squares of y against x; returns (slope, intercept, R^2)
/// with R^2 clamped into [0, 1].
pub fn fit_scatter(x: &[f64], y: &[f64]) -> Result<(f64, f64, f64)> {
    if x.len() != y.len() || x.len() < 2 {
        return Err(Error::invalid_input("scatter fit needs >= 2 aligned points"));
    }
    let n = x.len() as f64;
    let mean_x = x.iter().sum::<f64>() / n;
    let mean_y = y.iter().sum::<f64>() / n;
    let var_x: f64 = x.iter().map(|v| (v - mean_x) * (v - mean_x)).sum();
    if var_x < 1e-15 {
        return Err(Error::invalid_input("degenerate scatter: x has zero variance"));
    }
    let cov: f64 = x
        .iter()
        .zip(y)
        .map(|(a, b)| (a - mean_x) * (b - mean_y))
        .sum();
    let slope = cov / var_x;
    let intercept = mean_y - slope * mean_x;
    let ss_tot: f64 = y.iter().map(|v| (v - mean_y) * (v - mean_y)).sum();
    let ss_res: f64 = x
        .iter()
        .zip(y)
        .map(|(a, b)| {
            let r = b - (slope * a + intercept);
            r * r
        })
        .sum();
    let r2 = if ss_tot < 1e-15 {
        1.0
    } else {
        (1.0 - ss_res / ss_tot).clamp(0.0, 1.0)
    };
    Ok((slope, intercept, r2))
}

/// Empirical CDF of error values.
#[derive(Debug, Clone, Serialize)]
pub struct CdfCurve {
    pub values_cm: Vec<f64>,
    pub fractions: Vec<f64>,
}

impl CdfCurve {
    pub fn from_errors(errors: &[f64]) -> Result<Self> {
        if errors.is_empty() {
            return Err(Error::invalid_input("CDF of empty input"));
        }
        let mut values_cm = errors.to_vec();
        values_cm.sort_by(|a, b| a.partial_cmp(b).expect("non-NaN"));
        let n = values_cm.len();
        let fractions = (1..=n).map(|i| i as f64 / n as f64).collect();
        Ok(Self {
            values_cm,
            fractions,
        })
    }
}

// ---------------------------------------------------------------------------
// Heatmaps
// ---------------------------------------------------------------------------

/// Axis-aligned 3D grid configuration around the shoulder.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct GridConfig {
    pub min: Vec3,
    pub cell_size: f64,
    pub dims: [usize; 3],
}

impl Default for GridConfig {
    /// 10 cm cells over [-1, 1]^3 m around the shoulder.
    fn default() -> Self {
        Self {
            min: Vec3::new(-1.0, -1.0, -1.0),
            cell_size: 0.1,
            dims: [20, 20, 20],
        }
    }
}

/// Per-cell maximum absolute error (meters) over a 3D volume, with 2D
/// max projections. Empty cells hold NaN.
#[derive(Debug, Clone, Serialize)]
pub struct HeatmapGrid {
    pub config: GridConfig,
    pub cells: Vec<f64>,
}

impl HeatmapGrid {
    pub fn cell(&self, ix: usize, iy: usize, iz: usize) -> f64 {
        let [_, ny, nz] = self.config.dims;
        self.cells[(ix * ny + iy) * nz + iz]
    }

    /// Max-projection collapsing the given axis (0 = x: side view,
    /// 1 = y: frontal view, 2 = z: top-down view). Returns (rows, cols,
    /// row-major values).
    pub fn project(&self, axis: usize) -> (usize, usize, Vec<f64>) {
        let [nx, ny, nz] = self.config.dims;
        let (rows, cols) = match axis {
            0 => (ny, nz),
            1 => (nx, nz),
            _ => (nx, ny),
        };
        let mut out = vec![f64::NAN; rows * cols];
        for ix in 0..nx {
            for iy in 0..ny {
                for iz in 0..nz {
                    let v = self.cell(ix, iy, iz);
                    if v.is_nan() {
                        continue;
                    }
                    let idx = match axis {
                        0 => iy * cols + iz,
                        1 => ix * cols + iz,
                        _ => ix * cols + iy,
                    };
                    if out[idx].is_nan() || v > out[idx] {
                        out[idx] = v;
                    }
                }
            }
        }
        (rows, cols, out)
    }
}

/// Builds a max-error heatmap from positions and their absolute errors
/// (both in meters). Out-of-bounds positions clamp to boundary cells.
pub fn build_heatmap(positions: &[Vec3], errors: &[f64], config: GridConfig) -> Result<HeatmapGrid> {
    if positions.len() != errors.len() {
        return Err(Error::invalid_input("positions and errors differ in length"));
    }
    let [nx, ny, nz] = config.dims;
    let mut cells = vec![f64::NAN; nx * ny * nz];
    let index = |v: f64, min: f64, n: usize| -> usize {
        (((v - min) / config.cell_size).floor() as isize).clamp(0, n as isize - 1) as usize
    };
    for (p, &e) in positions.iter().zip(errors) {
        let ix = index(p.x, config.min.x, nx);
        let iy = index(p.y, config.min.y, ny);
        let iz = index(p.z, config.min.z, nz);
        let cell = &mut cells[(ix * ny + iy) * nz + iz];
        if cell.is_nan() || e.abs() > *cell {
            *cell = e.abs();
        }
    }
    Ok(HeatmapGrid { config, cells })
}

// ---------------------------------------------------------------------------
// Streaming evaluation of trained models
// ---------------------------------------------------------------------------

/// One emitted prediction during a streaming replay (stride-1 overlapped
/// windows, output taken at the lagged frame).
#[derive(Debug, Clone)]
pub struct FrameEval {
    /// Index of the frame the prediction refers to.
    pub frame: usize,
    pub joint_err_cm: [f64; 3],
    pub component_err_cm: [f64; 9],
    /// Ground-truth wrist position (for spatial heatmaps).
    pub gt_wrist: Vec3,
    pub raw_m: f64,
    pub corrected_m: f64,
    pub true_m: f64,
}

#[derive(Debug, Clone)]
pub struct SessionEval {
    pub subject_id: String,
    pub arm_span: f64,
    pub frames: Vec<FrameEval>,
}

/// Replays sessions through the model with windows overlapping by all but
/// one frame, emitting one lag-matched prediction per full window.
pub fn evaluate_sessions(model: &InferenceModel, sessions: &[SessionData]) -> Result<Vec<SessionEval>> {
    let lag_index = model.spec().output_index();
    sessions
        .iter()
        .map(|s| {
            let feats = session_features(&s.recording, &s.calibration)?;
            let rows: Vec<[f64; FEATURE_DIM]> = feats.iter().map(|f| f.features).collect();
            let model_ref = &s.recording.subject.arm_model;
            let span = model_ref.arm_span;
            if rows.len() < WINDOW_LEN {
                return Ok(SessionEval {
                    subject_id: s.recording.subject.id.clone(),
                    arm_span: span,
                    frames: Vec::new(),
                });
            }
            let frames: Result<Vec<FrameEval>> = (0..=rows.len() - WINDOW_LEN)
                .into_par_iter()
                .map(|start| {
                    let window = &rows[start..start + WINDOW_LEN];
                    let out = model.infer_window(window)?;
                    let k = start + lag_index;
                    let gt = &s.recording.frames[k].gt_pose;
                    let pred = denormalize_pose(&out.poses[lag_index], span)?;
                    let joint_err_cm = [
                        (pred.shoulder - gt.shoulder).norm() * 100.0,
                        (pred.elbow - gt.elbow).norm() * 100.0,
                        (pred.wrist - gt.wrist).norm() * 100.0,
                    ];
                    let mut component_err_cm = [0.0; 9];
                    let p9 = pred.to_nine();
                    let g9 = gt.to_nine();
                    for (c, (a, b)) in component_err_cm.iter_mut().zip(p9.iter().zip(&g9)) {
                        *c = (a - b) * 100.0;
                    }
                    let corrected_m = out
                        .corrected
                        .as_ref()
                        .map(|c| c[lag_index] * span)
                        .unwrap_or(f64::NAN);
                    Ok(FrameEval {
                        frame: k,
                        joint_err_cm,
                        component_err_cm,
                        gt_wrist: gt.wrist,
                        raw_m: s.recording.frames[k].uwb_raw,
                        corrected_m,
                        true_m: device_distance(gt, Vec3::zero(), model_ref),
                    })
                })
                .collect();
            Ok(SessionEval {
                subject_id: s.recording.subject.id.clone(),
                arm_span: span,
                frames: frames?,
            })
        })
        .collect()
}

/// Builds the metrics report from streaming evaluations, grouped by
/// subject.
pub fn metrics_from_evals(evals: &[SessionEval]) -> Result<MetricsReport> {
    let groups: Vec<(String, Vec<[f64; 3]>, Vec<[f64; 9]>)> = evals
        .iter()
        .map(|e| {
            (
                e.subject_id.clone(),
                e.frames.iter().map(|f| f.joint_err_cm).collect(),
                e.frames.iter().map(|f| f.component_err_cm).collect(),
            )
        })
        .collect();
    summarize_groups(&groups)
}

/// Aggregates the raw/corrected/true distance streams of evaluations.
pub fn uwb_gain_from_evals(evals: &[SessionEval]) -> Result<UwbGain> {
    let mut raw = Vec::new();
    let mut corrected = Vec::new();
    let mut truth = Vec::new();
    for e in evals {
        for f in &e.frames {
            if f.corrected_m.is_nan() {
                continue;
            }
            raw.push(f.raw_m);
            corrected.push(f.corrected_m);
            truth.push(f.true_m);
        }
    }
    uwb_gain(&raw, &corrected, &truth)
}

// ---------------------------------------------------------------------------
// Cross validation and ablation
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Serialize)]
pub struct FoldReport {
    pub held_out: String,
    pub metrics: MetricsReport,
    pub uwb: Option<UwbGain>,
    pub best_epoch: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct LosoOutcome {
    pub folds: Vec<FoldReport>,
    pub mean_ew_median_cm: f64,
    pub sd_ew_median_cm: f64,
    pub mean_raw_mae_cm: f64,
    pub mean_corrected_mae_cm: f64,
    pub mean_uwb_reduction_pct: f64,
}

/// Leave-one-subject-out cross validation: N folds, each trained without
/// one subject and evaluated on it with streaming replay.
pub fn run_loso_cv(corpus: &[SessionData], cfg: &TrainConfig) -> Result<LosoOutcome> {
    let subjects: BTreeSet<String> = corpus
        .iter()
        .map(|s| s.recording.subject.id.clone())
        .collect();
    if subjects.len() < 2 {
        return Err(Error::invalid_input(
            "cross validation needs at least 2 subjects",
        ));
    }
    let windows = make_training_windows(corpus)?;
    let mut folds = Vec::new();
    for held_out in &subjects {
        let outcome = train_fold(&windows, held_out, cfg)?;
        let test_sessions: Vec<SessionData> = corpus
            .iter()
            .filter(|s| &s.recording.subject.id == held_out)
            .cloned()
            .collect();
        let model = InferenceModel::new(&outcome.weights)?;
        let evals = evaluate_sessions(&model, &test_sessions)?;
        let metrics = metrics_from_evals(&evals)?;
        let uwb = if cfg.ablate_uwb {
            None
        } else {
            Some(uwb_gain_from_evals(&evals)?)
        };
        folds.push(FoldReport {
            held_out: held_out.clone(),
            metrics,
            uwb,
            best_epoch: outcome.best_epoch,
        });
    }

    let ew: Vec<f64> = folds
        .iter()
        .map(|f| f.metrics.elbow_wrist_median_avg_cm)
        .collect();
    let mean = ew.iter().sum::<f64>() / ew.len() as f64;
    let sd = (ew.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / ew.len() as f64).sqrt();
    let mean_of = |f: &dyn Fn(&FoldReport) -> f64| -> f64 {
        let vals: Vec<f64> = folds.iter().map(f).filter(|v| v.is_finite()).collect();
        if vals.is_empty() {
            f64::NAN
        } else {
            vals.iter().sum::<f64>() / vals.len() as f64
        }
    };
    Ok(LosoOutcome {
        mean_ew_median_cm: mean,
        sd_ew_median_cm: sd,
        mean_raw_mae_cm: mean_of(&|f| f.uwb.map(|u| u.raw_mae_cm).unwrap_or(f64::NAN)),
        mean_corrected_mae_cm: mean_of(&|f| f.uwb.map(|u| u.corrected_mae_cm).unwrap_or(f64::NAN)),
        mean_uwb_reduction_pct: mean_of(&|f| f.uwb.map(|u| u.reduction_pct).unwrap_or(f64::NAN)),
        folds,
    })
}

/// Trains one fold: the held-out subject's windows are excluded entirely;
/// one remaining subject (or window tail) becomes the inner validation
/// split.
fn train_fold(
    windows: &[TrainingWindow],
    held_out: &str,
    cfg: &TrainConfig,
) -> Result<TrainOutcome> {
    let candidate: Vec<usize> = (0..windows.len())
        .filter(|&i| windows[i].subject_id != held_out)
        .collect();
    if candidate.is_empty() {
        return Err(Error::data("fold has no training windows"));
    }
    debug_assert!(candidate.iter().all(|&i| windows[i].subject_id != held_out));
    let (train_idx, val_idx) = split_validation(windows, &candidate);
    train_on_windows(windows, &train_idx, &val_idx, cfg)
}

#[derive(Debug, Clone, Serialize)]
pub struct AblationOutcome {
    pub full: LosoOutcome,
    pub imu_only: LosoOutcome,
}

/// Paired ablation: the complete UWB+IMU system versus an IMU-only
/// estimator (UWB channel removed, no corrector), trained and evaluated
/// under identical folds and seeds.
pub fn run_ablation(corpus: &[SessionData], cfg: &TrainConfig) -> Result<AblationOutcome> {
    let full_cfg = TrainConfig {
        ablate_uwb: false,
        ..*cfg
    };
    let imu_cfg = TrainConfig {
        ablate_uwb: true,
        ..*cfg
    };
    Ok(AblationOutcome {
        full: run_loso_cv(corpus, &full_cfg)?,
        imu_only: run_loso_cv(corpus, &imu_cfg)?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn joint_errors_cases() {
        let gt = ArmPose {
            shoulder: Vec3::zero(),
            elbow: Vec3::new(0.2, 0.0, -0.2),
            wrist: Vec3::new(0.4, 0.1, -0.3),
        };
        let span = 1.7;
        let exact: [f64; 9] = {
            let mut v = gt.to_nine();
            v.iter_mut().for_each(|c| *c /= span);
            v
        };
        let errs = joint_errors(&[exact], &[gt], span).unwrap();
        assert!(errs[0].iter().all(|e| e.abs() < 1e-9));

        // Wrist offset by (0.03, 0.04, 0) m: a 5 cm 3-4-5 error.
        let mut off = exact;
        off[6] += 0.03 / span;
        off[7] += 0.04 / span;
        let errs = joint_errors(&[off], &[gt], span).unwrap();
        assert_relative_eq!(errs[0][2], 5.0, epsilon = 1e-9);
        assert!(errs[0][0] < 1e-9 && errs[0][1] < 1e-9);

        assert!(joint_errors(&[exact], &[], span).is_err());
    }

    #[test]
    fn joint_errors_match_naive_loop() {
        let mut rng = ChaCha8Rng::seed_from_u64(61);
        let span = 1.8;
        for _ in 0..100 {
            let gt = ArmPose {
                shoulder: Vec3::zero(),
                elbow: Vec3::new(rng.gen_range(-0.4..0.4), rng.gen_range(-0.4..0.4), rng.gen_range(-0.4..0.4)),
                wrist: Vec3::new(rng.gen_range(-0.6..0.6), rng.gen_range(-0.6..0.6), rng.gen_range(-0.6..0.6)),
            };
            let mut pred = [0.0; 9];
            for v in &mut pred {
                *v = rng.gen_range(-0.4..0.4);
            }
            let errs = joint_errors(&[pred], &[gt], span).unwrap()[0];
            let g9 = gt.to_nine();
            for j in 0..3 {
                let mut sq = 0.0;
                for a in 0..3 {
                    let d = pred[j * 3 + a] * span - g9[j * 3 + a];
                    sq += d * d;
                }
                assert_relative_eq!(errs[j], sq.sqrt() * 100.0, epsilon = 1e-9);
            }
        }
    }

    #[test]
    fn median_convention_interpolates_middle_pair() {
        assert_eq!(median(&[5.0, 5.0, 5.0]).unwrap(), 5.0);
        assert_eq!(median(&[4.0, 2.0, 1.0, 3.0]).unwrap(), 2.5);
        assert_eq!(median(&[3.0, 1.0, 2.0]).unwrap(), 2.0);
        assert!(median(&[]).is_err());
    }

    #[test]
    fn median_matches_sort_based_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(62);
        for _ in 0..200 {
            let n = rng.gen_range(1..40);
            let vals: Vec<f64> = (0..n).map(|_| rng.gen_range(0.0..50.0)).collect();
            let mut sorted = vals.clone();
            sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
            let oracle = if n % 2 == 1 {
                sorted[n / 2]
            } else {
                (sorted[n / 2 - 1] + sorted[n / 2]) / 2.0
            };
            assert_relative_eq!(median(&vals).unwrap(), oracle, epsilon = 1e-12);
        }
    }

    #[test]
    fn summarize_constant_errors() {
        let errors = vec![[5.0, 5.0, 5.0]; 10];
        let r = summarize(&errors).unwrap();
        for j in 0..3 {
            assert_eq!(r.per_joint[j].median_cm, 5.0);
            assert_eq!(r.per_joint[j].mean_cm, 5.0);
        }
        assert_eq!(r.elbow_wrist_median_avg_cm, 5.0);
        assert_eq!(r.mpjpe_cm, 5.0);
        assert!(summarize(&[]).is_err());
    }

    #[test]
    fn elbow_wrist_average_is_mean_of_medians() {
        let mut rng = ChaCha8Rng::seed_from_u64(63);
        let errors: Vec<[f64; 3]> = (0..101)
            .map(|_| {
                [
                    rng.gen_range(0.0..1.0),
                    rng.gen_range(0.0..20.0),
                    rng.gen_range(0.0..30.0),
                ]
            })
            .collect();
        let r = summarize(&errors).unwrap();
        assert_relative_eq!(
            r.elbow_wrist_median_avg_cm,
            0.5 * (r.per_joint[1].median_cm + r.per_joint[2].median_cm),
            epsilon = 1e-12
        );
    }

    #[test]
    fn uwb_gain_cases() {
        let truth = vec![0.5, 0.6, 0.7];
        let raw = vec![0.8, 0.9, 1.0];
        let g = uwb_gain(&raw, &truth, &truth).unwrap();
        assert_relative_eq!(g.reduction_pct, 100.0);
        assert_relative_eq!(g.raw_mae_cm, 30.0, epsilon = 1e-9);

        let g = uwb_gain(&raw, &raw, &truth).unwrap();
        assert_relative_eq!(g.reduction_pct, 0.0);
        assert!(uwb_gain(&raw, &raw, &truth[..2]).is_err());
    }

    #[test]
    fn fit_scatter_cases() {
        let x = vec![0.1, 0.4, 0.8, 1.2];
        let (slope, intercept, r2) = fit_scatter(&x, &x).unwrap();
        assert_relative_eq!(slope, 1.0, epsilon = 1e-12);
        assert_relative_eq!(intercept, 0.0, epsilon = 1e-12);
        assert_relative_eq!(r2, 1.0, epsilon = 1e-12);

        assert!(fit_scatter(&[1.0, 1.0, 1.0], &[0.1, 0.2, 0.3]).is_err());
        assert!(fit_scatter(&[1.0], &[1.0]).is_err());
    }

    #[test]
    fn fit_scatter_matches_closed_form_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(64);
        for _ in 0..50 {
            let n = rng.gen_range(3..60);
            let x: Vec<f64> = (0..n).map(|_| rng.gen_range(0.0..2.0)).collect();
            let true_slope = rng.gen_range(-2.0..2.0);
            let true_int = rng.gen_range(-1.0..1.0);
            let y: Vec<f64> = x
                .iter()
                .map(|v| true_slope * v + true_int + rng.gen_range(-0.01..0.01))
                .collect();
            let (slope, intercept, r2) = fit_scatter(&x, &y).unwrap();

            // Closed-form normal equations.
            let nf = n as f64;
            let sx: f64 = x.iter().sum();
            let sy: f64 = y.iter().sum();
            let sxx: f64 = x.iter().map(|v| v * v).sum();
            let sxy: f64 = x.iter().zip(&y).map(|(a, b)| a * b).sum();
            let slope_o = (nf * sxy - sx * sy) / (nf * sxx - sx * sx);
            let int_o = (sy - slope_o * sx) / nf;
            assert_relative_eq!(slope, slope_o, epsilon = 1e-9);
            assert_relative_eq!(intercept, int_o, epsilon = 1e-9);
            assert!((0.0..=1.0).contains(&r2));
        }
    }

    #[test]
    fn cdf_is_monotone_and_ends_at_one() {
        let c = CdfCurve::from_errors(&[3.0, 1.0, 2.0, 2.0]).unwrap();
        assert_eq!(c.values_cm, vec![1.0, 2.0, 2.0, 3.0]);
        assert_eq!(*c.fractions.last().unwrap(), 1.0);
        assert!(c.fractions.windows(2).all(|w| w[1] >= w[0]));
        assert!(CdfCurve::from_errors(&[]).is_err());
    }

    #[test]
    fn heatmap_single_and_max_semantics() {
        let cfg = GridConfig::default();
        let p = Vec3::new(0.05, 0.05, 0.05);
        let grid = build_heatmap(&[p], &[0.3], cfg).unwrap();
        let populated = grid.cells.iter().filter(|c| !c.is_nan()).count();
        assert_eq!(populated, 1);
        assert_eq!(grid.cell(10, 10, 10), 0.3);

        let grid = build_heatmap(&[p, p], &[0.3, -0.5], cfg).unwrap();
        assert_eq!(grid.cell(10, 10, 10), 0.5);

        // Out-of-bounds positions clamp to boundary cells.
        let far = Vec3::new(5.0, -5.0, 0.0);
        let grid = build_heatmap(&[far], &[1.0], cfg).unwrap();
        assert_eq!(grid.cell(19, 0, 10), 1.0);
    }

    #[test]
    fn heatmap_projection_matches_brute_force() {
        let mut rng = ChaCha8Rng::seed_from_u64(65);
        let positions: Vec<Vec3> = (0..500)
            .map(|_| {
                Vec3::new(
                    rng.gen_range(-0.9..0.9),
                    rng.gen_range(-0.9..0.9),
                    rng.gen_range(-0.9..0.9),
                )
            })
            .collect();
        let errors: Vec<f64> = (0..500).map(|_| rng.gen_range(0.0..1.0)).collect();
        let grid = build_heatmap(&positions, &errors, GridConfig::default()).unwrap();

        // Every recorded sample is bounded by its cell's maximum.
        let cfg = grid.config;
        for (p, &e) in positions.iter().zip(&errors) {
            let ix = ((p.x - cfg.min.x) / cfg.cell_size).floor() as usize;
            let iy = ((p.y - cfg.min.y) / cfg.cell_size).floor() as usize;
            let iz = ((p.z - cfg.min.z) / cfg.cell_size).floor() as usize;
            assert!(grid.cell(ix, iy, iz) >= e);
        }

        for axis in 0..3 {
            let (rows, cols, proj) = grid.project(axis);
            let [nx, ny, nz] = cfg.dims;
            for r in 0..rows {
                for c in 0..cols {
                    // Brute-force max along the collapsed axis.
                    let mut expect = f64::NAN;
                    let collapse_len = match axis {
                        0 => nx,
                        1 => ny,
                        _ => nz,
                    };
                    for k in 0..collapse_len {
                        let v = match axis {
                            0 => self::HeatmapGrid::cell(&grid, k, r, c),
                            1 => self::HeatmapGrid::cell(&grid, r, k, c),
                            _ => self::HeatmapGrid::cell(&grid, r, c, k),
                        };
                        if !v.is_nan() && (expect.is_nan() || v > expect) {
                            expect = v;
                        }
                    }
                    let got = proj[r * cols + c];
                    assert!(
                        (got.is_nan() && expect.is_nan()) || got == expect,
                        "axis {axis} cell ({r},{c}): {got} vs {expect}"
                    );
                }
            }
        }
    }

    #[test]
    fn loso_isolates_held_out_subject() {
        use crate::sim::SensorNoiseConfig;
        use crate::train::synth_corpus;
        let corpus = synth_corpus(3, 0.7, 71, &SensorNoiseConfig::default()).unwrap();
        let windows = make_training_windows(&corpus).unwrap();
        for held_out in ["subject00", "subject01", "subject02"] {
            let candidate: Vec<usize> = (0..windows.len())
                .filter(|&i| windows[i].subject_id != held_out)
                .collect();
            let (train_idx, val_idx) = split_validation(&windows, &candidate);
            for &i in train_idx.iter().chain(&val_idx) {
                assert_ne!(windows[i].subject_id, held_out);
            }
            assert!(!train_idx.is_empty());
            assert!(!val_idx.is_empty());
        }
    }

    #[test]
    fn loso_two_subjects_gives_two_folds_and_is_deterministic() {
        use crate::sim::SensorNoiseConfig;
        use crate::train::synth_corpus;
        let corpus = synth_corpus(2, 1.0, 72, &SensorNoiseConfig::default()).unwrap();
        let cfg = TrainConfig {
            epochs: 1,
            batch_size: 8,
            seed: 5,
            ..TrainConfig::default()
        };
        let a = run_loso_cv(&corpus, &cfg).unwrap();
        assert_eq!(a.folds.len(), 2);
        let b = run_loso_cv(&corpus, &cfg).unwrap();
        assert_eq!(
            a.folds[0].metrics.elbow_wrist_median_avg_cm,
            b.folds[0].metrics.elbow_wrist_median_avg_cm
        );
        assert!(run_loso_cv(&corpus[..1], &cfg).is_err());
    }
}
