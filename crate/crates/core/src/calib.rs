//! Device calibration: side-by-side reference-frame alignment and the
//! T-pose mounting-offset capture.
//!
//! Two steps, both one-time per wearing session:
//!
//! 1. *Side by side*: with the phone and watch physically co-oriented (as
//!    in a charging dock), the fixed rotation between their independent
//!    attitude references is solved and thereafter applied to every phone
//!    orientation.
//! 2. *T-pose*: with the arm extended laterally and the palm down, the
//!    rotations between each device and the body segment it rides on are
//!    captured. Every subsequent raw orientation is post-multiplied by its
//!    mount rotation, turning device attitudes into segment attitudes.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kinematics::{segment_frames, JointAngles};
use crate::math::{Rot3, UnitQuaternion, Vec3};

/// Forearm orientation asserted during the T-pose capture: arm along +x,
/// palm (and watch face) up-facing. This is the orientation the corrected
/// watch stream reports while the wearer holds the pose.
pub fn canonical_tpose_watch() -> Rot3 {
    segment_frames(&JointAngles::tpose()).forearm
}

/// Body orientation asserted for the pocketed phone at rest: identity
/// (pelvis aligned with the shoulder frame).
pub fn canonical_phone_at_rest() -> Rot3 {
    Rot3::identity()
}

/// Raw orientation samples captured during the two calibration postures.
///
/// With sensor noise enabled, each posture holds ~1 s of samples (25 at
/// 25 Hz) that are averaged; a single sample is the degenerate case.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CalibrationObservations {
    /// (phone, watch) orientation pairs while the devices sit side by side.
    pub side_by_side: Vec<(Rot3, Rot3)>,
    /// (watch, phone) orientation pairs while the wearer holds a T-pose.
    pub tpose: Vec<(Rot3, Rot3)>,
}

/// Calibration result applied to every subsequent sensor sample.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CalibrationState {
    /// Maps phone-reference orientations into the watch reference frame.
    pub frame_align: Rot3,
    /// Watch device frame -> forearm segment frame (post-multiplied).
    pub watch_mount: Rot3,
    /// Phone device frame -> body frame (post-multiplied).
    pub phone_mount: Rot3,
}

/// Solves the fixed rotation `A` with `A * phone_orient = watch_orient` at
/// the capture instant, applied to all later phone orientations.
pub fn align_side_by_side(phone_orient: &Rot3, watch_orient: &Rot3) -> Rot3 {
    *watch_orient * phone_orient.transpose()
}

/// Mounting rotations from the T-pose capture.
///
/// `aligned_watch`/`aligned_phone` are the instantaneous (already
/// frame-aligned) orientations; the mounts satisfy
/// `observed * mount = canonical` at the capture instant.
pub fn tpose_calibrate(
    aligned_watch: &Rot3,
    aligned_phone: &Rot3,
    canonical_tpose_watch: &Rot3,
) -> (Rot3, Rot3) {
    let watch_mount = aligned_watch.transpose() * *canonical_tpose_watch;
    let phone_mount = aligned_phone.transpose() * canonical_phone_at_rest();
    (watch_mount, phone_mount)
}

/// Chordal mean of a cluster of rotations via sign-aligned quaternion
/// averaging. Accurate for tight clusters (calibration noise scale).
pub fn mean_rotation(samples: &[Rot3]) -> Result<Rot3> {
    if samples.is_empty() {
        return Err(Error::invalid_input("cannot average zero rotations"));
    }
    let first = samples[0].to_quat();
    let mut acc = [0.0f64; 4];
    for r in samples {
        let q = r.to_quat();
        let dot = q.w() * first.w() + q.x() * first.x() + q.y() * first.y() + q.z() * first.z();
        let s = if dot < 0.0 { -1.0 } else { 1.0 };
        acc[0] += s * q.w();
        acc[1] += s * q.x();
        acc[2] += s * q.y();
        acc[3] += s * q.z();
    }
    Ok(UnitQuaternion::new(acc[0], acc[1], acc[2], acc[3])?.to_rot())
}

impl CalibrationState {
    /// Runs both calibration steps over the captured samples.
    pub fn calibrate(obs: &CalibrationObservations) -> Result<Self> {
        if obs.side_by_side.is_empty() || obs.tpose.is_empty() {
            return Err(Error::invalid_input("calibration capture is empty"));
        }
        let aligns: Vec<Rot3> = obs
            .side_by_side
            .iter()
            .map(|(phone, watch)| align_side_by_side(phone, watch))
            .collect();
        let frame_align = mean_rotation(&aligns)?;

        let watch_mean = mean_rotation(&obs.tpose.iter().map(|(w, _)| *w).collect::<Vec<_>>())?;
        let phone_mean = mean_rotation(
            &obs.tpose
                .iter()
                .map(|(_, p)| frame_align * *p)
                .collect::<Vec<_>>(),
        )?;
        let (watch_mount, phone_mount) =
            tpose_calibrate(&watch_mean, &phone_mean, &canonical_tpose_watch());
        Ok(Self {
            frame_align,
            watch_mount,
            phone_mount,
        })
    }

    /// Corrects a raw watch sample: orientation becomes the forearm segment
    /// attitude, acceleration moves from the device frame into the segment
    /// frame the corrected orientation refers to.
    pub fn apply_watch(&self, orient: &Rot3, accel: Vec3) -> (Rot3, Vec3) {
        (
            *orient * self.watch_mount,
            self.watch_mount.transpose().rotate(accel),
        )
    }

    /// Corrects a raw phone sample: frame alignment, then mount removal.
    pub fn apply_phone(&self, orient: &Rot3, accel: Vec3) -> (Rot3, Vec3) {
        (
            self.frame_align * *orient * self.phone_mount,
            self.phone_mount.transpose().rotate(accel),
        )
    }

    pub fn validate(&self) -> Result<()> {
        self.frame_align.validate()?;
        self.watch_mount.validate()?;
        self.phone_mount.validate()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::FRAC_PI_2;

    fn rot_close(a: &Rot3, b: &Rot3, tol: f64) -> bool {
        (0..9).all(|i| (a.as_row_major()[i] - b.as_row_major()[i]).abs() <= tol)
    }

    #[test]
    fn identical_orientations_align_to_identity() {
        let r = Rot3::rot_x(0.4) * Rot3::rot_z(1.2);
        assert!(rot_close(&align_side_by_side(&r, &r), &Rot3::identity(), 1e-12));
    }

    #[test]
    fn alignment_recovers_quarter_turn_offset() {
        // Phone reference yawed -90deg relative to the watch reference.
        let watch = Rot3::rot_x(0.3);
        let phone = Rot3::rot_z(-FRAC_PI_2) * watch;
        let align = align_side_by_side(&phone, &watch);
        assert!(rot_close(&align, &Rot3::rot_z(FRAC_PI_2), 1e-12));
        // Defining property: aligned phone equals the watch orientation.
        assert!(rot_close(&(align * phone), &watch, 1e-9));
    }

    #[test]
    fn canonical_tpose_yields_identity_mounts() {
        let (wm, pm) = tpose_calibrate(
            &canonical_tpose_watch(),
            &canonical_phone_at_rest(),
            &canonical_tpose_watch(),
        );
        assert!(rot_close(&wm, &Rot3::identity(), 1e-12));
        assert!(rot_close(&pm, &Rot3::identity(), 1e-12));
    }

    #[test]
    fn tpose_recovers_strap_rotation() {
        // Watch rotated 30deg about the forearm (local z) axis vs canonical.
        let offset = Rot3::rot_z(30f64.to_radians());
        let observed = canonical_tpose_watch() * offset;
        let (wm, _) = tpose_calibrate(&observed, &canonical_phone_at_rest(), &canonical_tpose_watch());
        assert!(rot_close(&(observed * wm), &canonical_tpose_watch(), 1e-9));
    }

    #[test]
    fn mean_rotation_handles_sign_flips_and_clusters() {
        let r = Rot3::rot_y(0.8);
        assert!(rot_close(&mean_rotation(&[r, r, r]).unwrap(), &r, 1e-12));
        assert!(mean_rotation(&[]).is_err());

        // Perturbed cluster averages back near the center.
        let cluster: Vec<Rot3> = (-2..=2)
            .map(|i| r * Rot3::rot_x(0.01 * i as f64))
            .collect();
        assert!(rot_close(&mean_rotation(&cluster).unwrap(), &r, 1e-4));
    }
}
