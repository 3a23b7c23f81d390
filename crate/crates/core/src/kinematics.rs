//! Arm model, forward kinematics, arm-span normalization, and device
//! placement geometry.
//!
//! Shoulder frame convention: origin at the tracked shoulder, x lateral
//! (the arm extends +x in a T-pose), y forward, z up. Zero joint angles
//! mean the arm hangs straight down. Segment local frames point their -z
//! axis along the segment, so a segment orientation maps (0,0,-len) to the
//! segment vector in the shoulder frame.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::math::{Rot3, Vec3};

/// Upper bound for elbow flexion, radians.
pub const ELBOW_FLEXION_MAX: f64 = 2.6;
/// Bound for forearm pronation, radians (symmetric).
pub const PRONATION_MAX: f64 = std::f64::consts::FRAC_PI_2;

/// Per-wearer arm geometry and phone placement.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ArmModel {
    /// Shoulder-to-elbow length, meters.
    pub upper_arm_len: f64,
    /// Elbow-to-wrist length, meters.
    pub forearm_len: f64,
    /// Wearer arm span, meters; the normalization constant for distances
    /// and joint positions.
    pub arm_span: f64,
    /// Shoulder position; fixed at the origin of the shoulder frame.
    pub shoulder_origin: Vec3,
    /// Pocketed phone position in the shoulder frame, meters.
    pub phone_anchor: Vec3,
}

impl ArmModel {
    pub fn new(upper_arm_len: f64, forearm_len: f64, arm_span: f64, phone_anchor: Vec3) -> Result<Self> {
        if upper_arm_len <= 0.0 || forearm_len <= 0.0 || arm_span <= 0.0 {
            return Err(Error::invalid_input("arm segment lengths must be positive"));
        }
        if arm_span < upper_arm_len + forearm_len {
            return Err(Error::invalid_input(
                "arm span must be at least upper_arm_len + forearm_len",
            ));
        }
        Ok(Self {
            upper_arm_len,
            forearm_len,
            arm_span,
            shoulder_origin: Vec3::zero(),
            phone_anchor,
        })
    }

    pub fn reach(&self) -> f64 {
        self.upper_arm_len + self.forearm_len
    }
}

impl Default for ArmModel {
    /// Simulator defaults: 0.30 m upper arm, 0.26 m forearm, 1.70 m span,
    /// phone in the front pocket at (0.10, 0.05, -0.75) m.
    fn default() -> Self {
        Self {
            upper_arm_len: 0.30,
            forearm_len: 0.26,
            arm_span: 1.70,
            shoulder_origin: Vec3::zero(),
            phone_anchor: Vec3::new(0.10, 0.05, -0.75),
        }
    }
}

/// Joint configuration: 3-DOF shoulder, 1-DOF elbow flexion, and forearm
/// pronation about the forearm axis.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct JointAngles {
    pub shoulder_rot: Rot3,
    /// Elbow flexion, radians in [0, 2.6]. Zero = straight arm; flexion
    /// swings the forearm forward (+y at the hanging reference posture).
    pub elbow_flexion: f64,
    /// Forearm pronation, radians in [-pi/2, pi/2], about the forearm axis.
    pub forearm_pronation: f64,
}

impl JointAngles {
    pub fn new(shoulder_rot: Rot3, elbow_flexion: f64, forearm_pronation: f64) -> Result<Self> {
        if !(0.0..=ELBOW_FLEXION_MAX).contains(&elbow_flexion) {
            return Err(Error::invalid_input(format!(
                "elbow flexion {elbow_flexion} outside [0, {ELBOW_FLEXION_MAX}]"
            )));
        }
        if forearm_pronation.abs() > PRONATION_MAX {
            return Err(Error::invalid_input(format!(
                "forearm pronation {forearm_pronation} outside [-{PRONATION_MAX}, {PRONATION_MAX}]"
            )));
        }
        Ok(Self {
            shoulder_rot,
            elbow_flexion,
            forearm_pronation,
        })
    }

    /// Reference posture: arm hanging straight down.
    pub fn rest() -> Self {
        Self {
            shoulder_rot: Rot3::identity(),
            elbow_flexion: 0.0,
            forearm_pronation: 0.0,
        }
    }

    /// T-pose: arm extended laterally (+x), straight elbow, palm down.
    pub fn tpose() -> Self {
        Self {
            shoulder_rot: Rot3::rot_y(-std::f64::consts::FRAC_PI_2),
            elbow_flexion: 0.0,
            forearm_pronation: 0.0,
        }
    }
}

/// Shoulder, elbow, and wrist positions in the shoulder-anchored frame.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ArmPose {
    pub shoulder: Vec3,
    pub elbow: Vec3,
    pub wrist: Vec3,
}

impl ArmPose {
    pub fn to_nine(&self) -> [f64; 9] {
        [
            self.shoulder.x,
            self.shoulder.y,
            self.shoulder.z,
            self.elbow.x,
            self.elbow.y,
            self.elbow.z,
            self.wrist.x,
            self.wrist.y,
            self.wrist.z,
        ]
    }

    pub fn from_nine(v: &[f64; 9]) -> Self {
        Self {
            shoulder: Vec3::new(v[0], v[1], v[2]),
            elbow: Vec3::new(v[3], v[4], v[5]),
            wrist: Vec3::new(v[6], v[7], v[8]),
        }
    }
}

/// World orientations of the two arm segments for a joint configuration.
#[derive(Debug, Clone, Copy)]
pub struct SegmentFrames {
    pub upper_arm: Rot3,
    pub forearm: Rot3,
}

/// Segment orientations implied by the joint angles.
///
/// The forearm frame composes shoulder rotation, elbow flexion about the
/// local x axis, and pronation about the local (segment) z axis. Pronation
/// never moves the wrist; it only spins the watch about the forearm.
pub fn segment_frames(angles: &JointAngles) -> SegmentFrames {
    let upper_arm = angles.shoulder_rot;
    let forearm =
        angles.shoulder_rot * Rot3::rot_x(angles.elbow_flexion) * Rot3::rot_z(angles.forearm_pronation);
    SegmentFrames { upper_arm, forearm }
}

/// Joint positions for the given model and joint configuration.
///
/// Segment lengths are preserved exactly: each joint offset is a rotated
/// (0, 0, -len) vector.
pub fn forward_kinematics(model: &ArmModel, angles: &JointAngles) -> ArmPose {
    let frames = segment_frames(angles);
    let shoulder = model.shoulder_origin;
    let elbow = shoulder + frames.upper_arm.rotate(Vec3::new(0.0, 0.0, -model.upper_arm_len));
    let wrist = elbow + frames.forearm.rotate(Vec3::new(0.0, 0.0, -model.forearm_len));
    ArmPose {
        shoulder,
        elbow,
        wrist,
    }
}

/// Scales all nine pose coordinates by 1/arm_span.
pub fn normalize_pose(pose: &ArmPose, arm_span: f64) -> Result<[f64; 9]> {
    if arm_span <= 0.0 || !arm_span.is_finite() {
        return Err(Error::invalid_input("arm span must be positive"));
    }
    let mut v = pose.to_nine();
    for c in &mut v {
        *c /= arm_span;
    }
    Ok(v)
}

/// Inverse of [`normalize_pose`]: rescales normalized coordinates to meters.
pub fn denormalize_pose(nine: &[f64; 9], arm_span: f64) -> Result<ArmPose> {
    if arm_span <= 0.0 || !arm_span.is_finite() {
        return Err(Error::invalid_input("arm span must be positive"));
    }
    let mut v = *nine;
    for c in &mut v {
        *c *= arm_span;
    }
    Ok(ArmPose::from_nine(&v))
}

/// Euclidean distance between the watch antenna and the pocketed phone.
///
/// `watch_offset` is the antenna offset from the wrist joint, already
/// expressed in the shoulder frame (rotate device-local offsets by the
/// forearm orientation first).
pub fn device_distance(pose: &ArmPose, watch_offset: Vec3, model: &ArmModel) -> f64 {
    ((pose.wrist + watch_offset) - model.phone_anchor).norm()
}
