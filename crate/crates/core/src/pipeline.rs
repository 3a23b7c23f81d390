//! Turns calibrated sensor streams into the normalized 25-dimensional
//! feature sequence consumed by both networks, via a 125-frame rolling
//! window.
//!
//! Feature layout (row of a [`FusedFrame`]):
//!
//! | index  | content                                   |
//! |--------|-------------------------------------------|
//! | 0      | UWB distance / arm span                   |
//! | 1..10  | watch orientation relative to phone, row-major |
//! | 10..19 | phone orientation (aligned frame), row-major |
//! | 19..22 | watch acceleration in the phone frame, / 30 |
//! | 22..25 | phone acceleration, / 30                   |

use std::collections::VecDeque;

use crate::calib::CalibrationState;
use crate::error::{Error, Result};
use crate::math::{Rot3, Vec3};
use crate::sim::SessionRecording;

/// Feature vector width.
pub const FEATURE_DIM: usize = 25;
/// Rolling window length: 5 s at 25 Hz.
pub const WINDOW_LEN: usize = 125;
/// Output frame lag: predictions use the 120th of 125 frames, i.e. 5
/// frames (200 ms) behind real time.
pub const OUTPUT_FRAME_LAG: usize = 5;
/// Acceleration normalization divisor.
pub const ACCEL_SCALE: f64 = 30.0;

pub const IDX_UWB: usize = 0;
pub const IDX_WATCH_REL_ORIENT: std::ops::Range<usize> = 1..10;
pub const IDX_PHONE_ORIENT: std::ops::Range<usize> = 10..19;
pub const IDX_WATCH_REL_ACCEL: std::ops::Range<usize> = 19..22;
pub const IDX_PHONE_ACCEL: std::ops::Range<usize> = 22..25;

/// One normalized feature vector at the 25 Hz frame rate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FusedFrame {
    pub timestamp: f64,
    pub features: [f64; FEATURE_DIM],
}

/// Immutable snapshot of a full rolling window, oldest frame first.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureWindow {
    pub frames: Vec<FusedFrame>,
}

impl FeatureWindow {
    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    /// Row-major (len x 25) copy of the feature rows.
    pub fn rows(&self) -> Vec<[f64; FEATURE_DIM]> {
        self.frames.iter().map(|f| f.features).collect()
    }

    pub fn timestamps(&self) -> Vec<f64> {
        self.frames.iter().map(|f| f.timestamp).collect()
    }
}

/// Zero-order hold: each frame takes the latest UWB event at or before its
/// timestamp.
pub fn hold_upsample_uwb(uwb_events: &[(f64, f64)], frame_times: &[f64]) -> Result<Vec<f64>> {
    if uwb_events.is_empty() {
        return Err(Error::invalid_input("no UWB events to upsample"));
    }
    for pair in uwb_events.windows(2) {
        if pair[1].0 < pair[0].0 {
            return Err(Error::invalid_input("UWB events must be time-ordered"));
        }
    }
    let mut out = Vec::with_capacity(frame_times.len());
    let mut idx = 0usize;
    for &t in frame_times {
        if uwb_events[0].0 > t {
            return Err(Error::invalid_input(format!(
                "frame at t={t} precedes the first UWB event at t={}",
                uwb_events[0].0
            )));
        }
        while idx + 1 < uwb_events.len() && uwb_events[idx + 1].0 <= t {
            idx += 1;
        }
        out.push(uwb_events[idx].1);
    }
    Ok(out)
}

/// Compresses accelerations into unit scale: `a / 30`.
pub fn scale_acceleration(a: Vec3) -> Vec3 {
    a * (1.0 / ACCEL_SCALE)
}

/// Inverse of [`scale_acceleration`].
pub fn unscale_acceleration(a: Vec3) -> Vec3 {
    a * ACCEL_SCALE
}

/// Normalizes a distance by the wearer's arm span.
pub fn normalize_uwb(d: f64, arm_span: f64) -> Result<f64> {
    if arm_span <= 0.0 || !arm_span.is_finite() {
        return Err(Error::invalid_input("arm span must be positive"));
    }
    if d < 0.0 || !d.is_finite() {
        return Err(Error::invalid_input("UWB distance must be non-negative"));
    }
    Ok(d / arm_span)
}

/// Assembles one feature row from calibrated sensor samples.
///
/// The watch enters relative to the phone: orientation as
/// `phone^T * watch`, acceleration rotated by that same relative rotation
/// after scaling. The phone orientation enters in the aligned global frame.
pub fn assemble_frame(
    timestamp: f64,
    watch_orient: &Rot3,
    watch_accel: Vec3,
    phone_orient: &Rot3,
    phone_accel: Vec3,
    uwb_norm: f64,
) -> FusedFrame {
    let rel = Rot3::relative(phone_orient, watch_orient);
    let rel_accel = rel.rotate(scale_acceleration(watch_accel));
    let phone_accel = scale_acceleration(phone_accel);

    let mut features = [0.0; FEATURE_DIM];
    features[IDX_UWB] = uwb_norm;
    features[IDX_WATCH_REL_ORIENT].copy_from_slice(rel.as_row_major());
    features[IDX_PHONE_ORIENT].copy_from_slice(phone_orient.as_row_major());
    features[IDX_WATCH_REL_ACCEL].copy_from_slice(&rel_accel.to_array());
    features[IDX_PHONE_ACCEL].copy_from_slice(&phone_accel.to_array());
    FusedFrame {
        timestamp,
        features,
    }
}

/// Fixed-capacity rolling buffer over fused frames. Single writer; full
/// windows are returned as immutable snapshots.
#[derive(Debug, Clone)]
pub struct RollingBuffer {
    frames: VecDeque<FusedFrame>,
    last_timestamp: Option<f64>,
}

impl RollingBuffer {
    pub fn new() -> Self {
        Self {
            frames: VecDeque::with_capacity(WINDOW_LEN),
            last_timestamp: None,
        }
    }

    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    /// Pushes a frame; once the buffer has seen 125 frames, every push
    /// returns the current window (oldest to newest). The snapshot is
    /// unaffected by later pushes.
    pub fn push_and_window(&mut self, frame: FusedFrame) -> Result<Option<FeatureWindow>> {
        if let Some(last) = self.last_timestamp {
            if frame.timestamp <= last {
                return Err(Error::invalid_input(format!(
                    "out-of-order timestamp {} after {}",
                    frame.timestamp, last
                )));
            }
        }
        self.last_timestamp = Some(frame.timestamp);
        if self.frames.len() == WINDOW_LEN {
            self.frames.pop_front();
        }
        self.frames.push_back(frame);
        if self.frames.len() == WINDOW_LEN {
            Ok(Some(FeatureWindow {
                frames: self.frames.iter().copied().collect(),
            }))
        } else {
            Ok(None)
        }
    }
}

impl Default for RollingBuffer {
    fn default() -> Self {
        Self::new()
    }
}

/// Runs a whole recorded session through calibration and feature assembly.
pub fn session_features(
    recording: &SessionRecording,
    calibration: &CalibrationState,
) -> Result<Vec<FusedFrame>> {
    let arm_span = recording.subject.arm_model.arm_span;
    recording
        .frames
        .iter()
        .map(|f| {
            let (watch_orient, watch_accel) = calibration.apply_watch(&f.watch_orient, f.watch_accel);
            let (phone_orient, phone_accel) = calibration.apply_phone(&f.phone_orient, f.phone_accel);
            Ok(assemble_frame(
                f.timestamp,
                &watch_orient,
                watch_accel,
                &phone_orient,
                phone_accel,
                normalize_uwb(f.uwb_raw, arm_span)?,
            ))
        })
        .collect()
}
