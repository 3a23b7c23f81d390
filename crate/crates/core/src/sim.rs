//! Synthetic multi-subject session generator: arm motion trajectories,
//! watch/phone IMU streams, occlusion-corrupted 5 Hz UWB ranging, and
//! ground-truth poses.
//!
//! Measurement model (all orientations map device/segment frames into the
//! shoulder world frame):
//!
//! - Watch: `meas = yaw_drift(t) * forearm(t) * strap * orient_noise`,
//!   where `strap` is the fixed wrist-mount rotation. Acceleration is the
//!   gravity-removed second difference of the wrist position, expressed in
//!   the true device frame, plus white noise.
//! - Phone: `meas = ref_offset^T * sway(t) * pocket_mount * orient_noise`,
//!   where `ref_offset` is the phone's attitude-reference yaw offset
//!   (recovered by side-by-side alignment) and `pocket_mount` the random
//!   pocket placement (recovered by the T-pose capture). The pelvis is
//!   quasi-static, so phone acceleration is jitter noise only.
//! - UWB: 5 Hz events; line-of-sight samples get white noise, occluded
//!   samples additionally carry a positive AR(1) bias, emulating the large
//!   body-occlusion errors seen on real hardware.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::calib::CalibrationObservations;
use crate::error::{Error, Result};
use crate::kinematics::{
    device_distance, forward_kinematics, segment_frames, ArmModel, ArmPose, JointAngles,
    ELBOW_FLEXION_MAX, PRONATION_MAX,
};
use crate::math::{Rot3, Vec3};
use crate::pipeline::hold_upsample_uwb;

/// IMU and frame rate of the system, Hz.
pub const IMU_RATE_HZ: f64 = 25.0;
/// UWB ranging event rate, Hz.
pub const UWB_RATE_HZ: f64 = 5.0;
/// Frames per UWB event (25 Hz / 5 Hz).
pub const FRAMES_PER_UWB_EVENT: usize = 5;

/// One simulated wearer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticSubject {
    pub id: String,
    pub arm_model: ArmModel,
    /// Random pocket placement rotation; removed only via calibration.
    pub phone_mount_rot: Rot3,
    /// Watch attitude yaw drift, rad/s. Persists after calibration.
    pub imu_yaw_drift_rate: f64,
    /// Drives subject-specific randomness, including the phone
    /// attitude-reference yaw offset recovered by side-by-side alignment.
    pub rng_seed: u64,
}

impl SyntheticSubject {
    /// Deterministically derives subject number `index` from a master seed:
    /// body proportions, pocket placement, drift rate, and per-subject seed.
    pub fn generate(index: usize, master_seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(splitmix64(
            master_seed ^ (index as u64).wrapping_mul(0xa076_1d64_78bd_642f),
        ));
        let upper = rng.gen_range(0.28..0.34);
        let fore = rng.gen_range(0.24..0.29);
        let span = (upper + fore) * rng.gen_range(2.85..3.10);
        // Pocket placement sits clear of the torso capsule bottom so
        // occlusion stays pose-dependent (arms crossing the body or
        // hanging against it go non-line-of-sight, frontal poses do not).
        let anchor = Vec3::new(
            rng.gen_range(0.10..0.16),
            rng.gen_range(0.03..0.09),
            rng.gen_range(-0.92..-0.84),
        );
        let arm_model = ArmModel::new(upper, fore, span, anchor).expect("generated model is valid");
        let phone_mount_rot = random_rotation(&mut rng);
        SyntheticSubject {
            id: format!("subject{index:02}"),
            arm_model,
            phone_mount_rot,
            imu_yaw_drift_rate: rng.gen_range(3.0e-4..1.2e-3),
            rng_seed: rng.gen(),
        }
    }

    /// Fixed wrist-strap rotation: in a T-pose the watch device axes line
    /// up with the world axes, so strap = tpose_forearm^T.
    pub fn watch_strap_rot() -> Rot3 {
        segment_frames(&JointAngles::tpose()).forearm.transpose()
    }

    /// Phone attitude-reference yaw offset, derived from the subject seed.
    pub fn phone_reference_offset(&self) -> Rot3 {
        let mut rng = ChaCha8Rng::seed_from_u64(splitmix64(self.rng_seed ^ 0x9e37_79b9_7f4a_7c15));
        Rot3::rot_z(rng.gen_range(-std::f64::consts::PI..std::f64::consts::PI))
    }
}

/// Noise magnitudes for the simulated sensors. All sigmas are standard
/// deviations; zeroing every field makes the sensors exact.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SensorNoiseConfig {
    /// White orientation noise per IMU sample, degrees.
    pub imu_orient_noise_deg: f64,
    /// White acceleration noise per axis, m/s^2.
    pub imu_accel_noise: f64,
    /// UWB line-of-sight ranging noise, meters.
    pub uwb_los_noise: f64,
    /// Stationary mean of the occlusion bias process, meters.
    pub uwb_nlos_bias_mean: f64,
    /// Stationary sigma of the occlusion bias process, meters.
    pub uwb_nlos_bias_sigma: f64,
    /// AR(1) coefficient of the occlusion bias process, in [0, 1).
    pub uwb_ar1_coeff: f64,
}

impl Default for SensorNoiseConfig {
    fn default() -> Self {
        Self {
            imu_orient_noise_deg: 1.5,
            imu_accel_noise: 0.05,
            uwb_los_noise: 0.03,
            uwb_nlos_bias_mean: 0.30,
            uwb_nlos_bias_sigma: 0.10,
            uwb_ar1_coeff: 0.95,
        }
    }
}

impl SensorNoiseConfig {
    pub fn zero() -> Self {
        Self {
            imu_orient_noise_deg: 0.0,
            imu_accel_noise: 0.0,
            uwb_los_noise: 0.0,
            uwb_nlos_bias_mean: 0.0,
            uwb_nlos_bias_sigma: 0.0,
            uwb_ar1_coeff: 0.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.imu_orient_noise_deg < 0.0
            || self.imu_accel_noise < 0.0
            || self.uwb_los_noise < 0.0
            || self.uwb_nlos_bias_sigma < 0.0
        {
            return Err(Error::invalid_input("noise sigmas must be non-negative"));
        }
        if !(0.0..1.0).contains(&self.uwb_ar1_coeff) {
            return Err(Error::invalid_input("uwb_ar1_coeff must be in [0, 1)"));
        }
        Ok(())
    }
}

/// Torso occlusion volume: a capsule around an axis segment in the
/// shoulder frame.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TorsoCapsule {
    pub axis_a: Vec3,
    pub axis_b: Vec3,
    pub radius: f64,
}

impl Default for TorsoCapsule {
    fn default() -> Self {
        Self {
            axis_a: Vec3::new(0.0, 0.0, 0.05),
            axis_b: Vec3::new(0.0, 0.0, -0.60),
            radius: 0.18,
        }
    }
}

/// One time-aligned sensor + ground-truth sample at the 25 Hz frame rate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Frame {
    pub timestamp: f64,
    pub watch_orient: Rot3,
    pub watch_accel: Vec3,
    pub phone_orient: Rot3,
    pub phone_accel: Vec3,
    /// Most recent raw UWB event value (zero-order hold of 5 Hz events).
    pub uwb_raw: f64,
    /// Noise-free distance of that same event (held identically), so raw
    /// and true streams stay sample-aligned. The instantaneous distance is
    /// derivable from `gt_pose`.
    pub uwb_true: f64,
    pub gt_pose: ArmPose,
}

/// A full simulated wearing session for one subject.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionRecording {
    pub subject: SyntheticSubject,
    pub imu_rate: f64,
    pub uwb_rate: f64,
    pub frames: Vec<Frame>,
}

// ---------------------------------------------------------------------------
// Motion generation
// ---------------------------------------------------------------------------

/// Minimum-jerk interpolation profile: `10 tau^3 - 15 tau^4 + 6 tau^5`.
/// Endpoints have zero first and second derivatives.
pub fn minimum_jerk(tau: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&tau) {
        return Err(Error::invalid_input(format!(
            "minimum_jerk argument {tau} outside [0, 1]"
        )));
    }
    Ok(tau * tau * tau * (10.0 + tau * (-15.0 + 6.0 * tau)))
}

/// Internal joint DOF vector: shoulder z/x/y angles, elbow flexion,
/// forearm pronation.
type AngleVec = [f64; 5];

const ANGLE_LO: AngleVec = [-0.9, -0.6, -2.4, 0.0, -PRONATION_MAX];
const ANGLE_HI: AngleVec = [0.9, 2.2, 0.4, ELBOW_FLEXION_MAX, PRONATION_MAX];

fn angles_from_vec(v: &AngleVec) -> JointAngles {
    let shoulder_rot = Rot3::rot_z(v[0]) * Rot3::rot_x(v[1]) * Rot3::rot_y(v[2]);
    JointAngles {
        shoulder_rot,
        elbow_flexion: v[3].clamp(0.0, ELBOW_FLEXION_MAX),
        forearm_pronation: v[4].clamp(-PRONATION_MAX, PRONATION_MAX),
    }
}

fn sample_terminal(rng: &mut ChaCha8Rng) -> AngleVec {
    let mut v = [0.0; 5];
    for i in 0..5 {
        v[i] = rng.gen_range(ANGLE_LO[i]..ANGLE_HI[i]);
    }
    v
}

/// Per-frame joint-angle trajectory: minimum-jerk transitions of 1-3 s
/// between uniformly sampled terminal poses, starting from rest.
fn angle_trajectory(n_frames: usize, rng: &mut ChaCha8Rng) -> Vec<JointAngles> {
    let mut out = Vec::with_capacity(n_frames);
    let mut from: AngleVec = [0.0; 5];
    out.push(angles_from_vec(&from));
    while out.len() < n_frames {
        let to = sample_terminal(rng);
        let transition_frames =
            (rng.gen_range(1.0..3.0) * IMU_RATE_HZ).round().max(1.0) as usize;
        for j in 1..=transition_frames {
            if out.len() == n_frames {
                break;
            }
            let s = minimum_jerk(j as f64 / transition_frames as f64).expect("tau in range");
            let mut v = [0.0; 5];
            for i in 0..5 {
                v[i] = from[i] + (to[i] - from[i]) * s;
            }
            out.push(angles_from_vec(&v));
        }
        from = to;
    }
    out
}

// ---------------------------------------------------------------------------
// Sensor synthesis
// ---------------------------------------------------------------------------

/// Standard-normal draw (Box-Muller). Deterministic under a seeded RNG.
fn gauss(rng: &mut ChaCha8Rng) -> f64 {
    let u1: f64 = rng.gen_range(f64::EPSILON..1.0);
    let u2: f64 = rng.gen_range(0.0..1.0);
    (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
}

/// Small random rotation with an N(0, sigma^2) rotation vector per axis.
fn noise_rotation(sigma_rad: f64, rng: &mut ChaCha8Rng) -> Rot3 {
    if sigma_rad == 0.0 {
        return Rot3::identity();
    }
    let v = Vec3::new(
        gauss(rng) * sigma_rad,
        gauss(rng) * sigma_rad,
        gauss(rng) * sigma_rad,
    );
    let angle = v.norm();
    if angle < 1e-15 {
        return Rot3::identity();
    }
    crate::math::UnitQuaternion::from_axis_angle(v, angle)
        .expect("finite axis")
        .to_rot()
}

fn random_rotation(rng: &mut ChaCha8Rng) -> Rot3 {
    loop {
        if let Ok(q) = crate::math::UnitQuaternion::new(
            rng.gen_range(-1.0..1.0),
            rng.gen_range(-1.0..1.0),
            rng.gen_range(-1.0..1.0),
            rng.gen_range(-1.0..1.0),
        ) {
            return q.to_rot();
        }
    }
}

/// SplitMix64 finalizer, used to decorrelate derived RNG streams.
fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9e37_79b9_7f4a_7c15);
    x = (x ^ (x >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    x ^ (x >> 31)
}

fn stream_seed(seed: u64, subject_seed: u64, tag: u64) -> u64 {
    splitmix64(seed ^ subject_seed.rotate_left(17) ^ tag.wrapping_mul(0xff51_afd7_ed55_8ccd))
}

/// Synthesizes per-frame watch (orientation, acceleration) measurements.
///
/// Orientation composes the forearm attitude with the fixed strap rotation,
/// accumulated yaw drift, and white orientation noise. Acceleration is the
/// central second difference of the wrist world position (gravity-removed
/// convention) rotated into the true device frame, plus white noise.
pub fn synth_watch_imu(
    forearm_orients: &[Rot3],
    wrist_positions: &[Vec3],
    rate_hz: f64,
    subject: &SyntheticSubject,
    noise: &SensorNoiseConfig,
    rng: &mut ChaCha8Rng,
) -> Result<Vec<(Rot3, Vec3)>> {
    let n = forearm_orients.len();
    if n < 3 || wrist_positions.len() != n {
        return Err(Error::invalid_input(
            "watch IMU synthesis needs >= 3 aligned trajectory frames",
        ));
    }
    let strap = SyntheticSubject::watch_strap_rot();
    let sigma_rad = noise.imu_orient_noise_deg.to_radians();
    let dt = 1.0 / rate_hz;

    // World-frame second differences; edge frames copy their neighbor.
    let mut accel_world = vec![Vec3::zero(); n];
    for k in 1..n - 1 {
        accel_world[k] = (wrist_positions[k + 1] - wrist_positions[k] * 2.0
            + wrist_positions[k - 1])
            * (1.0 / (dt * dt));
    }
    accel_world[0] = accel_world[1];
    accel_world[n - 1] = accel_world[n - 2];

    let mut out = Vec::with_capacity(n);
    for k in 0..n {
        let t = k as f64 * dt;
        let device_true = forearm_orients[k] * strap;
        let drift = Rot3::rot_z(subject.imu_yaw_drift_rate * t);
        let meas_orient = (drift * device_true * noise_rotation(sigma_rad, rng)).orthonormalize();
        let mut accel_dev = device_true.transpose().rotate(accel_world[k]);
        if noise.imu_accel_noise > 0.0 {
            accel_dev = accel_dev
                + Vec3::new(
                    gauss(rng) * noise.imu_accel_noise,
                    gauss(rng) * noise.imu_accel_noise,
                    gauss(rng) * noise.imu_accel_noise,
                );
        }
        out.push((meas_orient, accel_dev));
    }
    Ok(out)
}

/// Applies the UWB error model to a 5 Hz event sequence.
///
/// Line-of-sight events: `d + N(0, los^2)`. Occluded events additionally
/// carry an AR(1) bias `b_t = mean + ar1 * (b_prev - mean) + innovation`,
/// whose stationary distribution has the configured mean and sigma; the
/// bias re-initializes from that distribution at the start of each
/// occlusion run. Outputs clamp to >= 0.
pub fn synth_uwb(
    distances: &[f64],
    occluded: &[bool],
    noise: &SensorNoiseConfig,
    seed: u64,
) -> Result<Vec<f64>> {
    if distances.len() != occluded.len() {
        return Err(Error::invalid_input(
            "distance and occlusion sequences must have equal length",
        ));
    }
    noise.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let innovation_sigma = noise.uwb_nlos_bias_sigma * (1.0 - noise.uwb_ar1_coeff.powi(2)).sqrt();
    let mut bias: Option<f64> = None;
    let mut out = Vec::with_capacity(distances.len());
    for (&d, &nlos) in distances.iter().zip(occluded) {
        let mut v = d + gauss(&mut rng) * noise.uwb_los_noise;
        if nlos {
            let b = match bias {
                Some(prev) => {
                    noise.uwb_nlos_bias_mean
                        + noise.uwb_ar1_coeff * (prev - noise.uwb_nlos_bias_mean)
                        + gauss(&mut rng) * innovation_sigma
                }
                None => noise.uwb_nlos_bias_mean + gauss(&mut rng) * noise.uwb_nlos_bias_sigma,
            };
            bias = Some(b);
            v += b;
        } else {
            bias = None;
        }
        out.push(v.max(0.0));
    }
    Ok(out)
}

/// True iff the watch-phone segment passes within `radius` of the capsule
/// axis segment (boundary inclusive).
pub fn occlusion_test(watch_pos: Vec3, phone_pos: Vec3, capsule: &TorsoCapsule) -> bool {
    segment_segment_distance(watch_pos, phone_pos, capsule.axis_a, capsule.axis_b)
        <= capsule.radius
}

/// Closest distance between segments [p1,q1] and [p2,q2].
fn segment_segment_distance(p1: Vec3, q1: Vec3, p2: Vec3, q2: Vec3) -> f64 {
    const EPS: f64 = 1e-12;
    let d1 = q1 - p1;
    let d2 = q2 - p2;
    let r = p1 - p2;
    let a = d1.norm_sq();
    let e = d2.norm_sq();
    let f = d2.dot(r);
    let (s, t);
    if a <= EPS && e <= EPS {
        return r.norm();
    }
    if a <= EPS {
        s = 0.0;
        t = (f / e).clamp(0.0, 1.0);
    } else {
        let c = d1.dot(r);
        if e <= EPS {
            t = 0.0;
            s = (-c / a).clamp(0.0, 1.0);
        } else {
            let b = d1.dot(d2);
            let denom = a * e - b * b;
            let mut s_tmp = if denom.abs() > EPS {
                ((b * f - c * e) / denom).clamp(0.0, 1.0)
            } else {
                0.0
            };
            let mut t_tmp = (b * s_tmp + f) / e;
            if t_tmp < 0.0 {
                t_tmp = 0.0;
                s_tmp = (-c / a).clamp(0.0, 1.0);
            } else if t_tmp > 1.0 {
                t_tmp = 1.0;
                s_tmp = ((b - c) / a).clamp(0.0, 1.0);
            }
            s = s_tmp;
            t = t_tmp;
        }
    }
    ((p1 + d1 * s) - (p2 + d2 * t)).norm()
}

// ---------------------------------------------------------------------------
// Session generation
// ---------------------------------------------------------------------------

/// Generates a full session for one subject. Deterministic in
/// (subject, noise, duration, seed).
pub fn generate_session(
    subject: &SyntheticSubject,
    noise: &SensorNoiseConfig,
    duration_s: f64,
    seed: u64,
) -> Result<SessionRecording> {
    if duration_s <= 0.0 || !duration_s.is_finite() {
        return Err(Error::invalid_input("session duration must be positive"));
    }
    noise.validate()?;
    let n_frames = (duration_s * IMU_RATE_HZ).round() as usize;
    if n_frames < 3 {
        return Err(Error::invalid_input("session too short (< 3 frames)"));
    }

    let mut traj_rng =
        ChaCha8Rng::seed_from_u64(stream_seed(seed, subject.rng_seed, 0x7261_6a65));
    let angles = angle_trajectory(n_frames, &mut traj_rng);

    let model = &subject.arm_model;
    let capsule = TorsoCapsule::default();
    let mut poses = Vec::with_capacity(n_frames);
    let mut forearm_orients = Vec::with_capacity(n_frames);
    let mut wrists = Vec::with_capacity(n_frames);
    for a in &angles {
        let pose = forward_kinematics(model, a);
        forearm_orients.push(segment_frames(a).forearm);
        wrists.push(pose.wrist);
        poses.push(pose);
    }

    // 5 Hz UWB events on frames 0, 5, 10, ...
    let event_frames: Vec<usize> = (0..n_frames).step_by(FRAMES_PER_UWB_EVENT).collect();
    let event_dists: Vec<f64> = event_frames
        .iter()
        .map(|&k| device_distance(&poses[k], Vec3::zero(), model))
        .collect();
    let event_nlos: Vec<bool> = event_frames
        .iter()
        .map(|&k| occlusion_test(wrists[k], model.phone_anchor, &capsule))
        .collect();
    let uwb_seed = stream_seed(seed, subject.rng_seed, 0x7577_6222);
    let raw_events = synth_uwb(&event_dists, &event_nlos, noise, uwb_seed)?;

    let frame_times: Vec<f64> = (0..n_frames).map(|k| k as f64 / IMU_RATE_HZ).collect();
    let event_times: Vec<f64> = event_frames.iter().map(|&k| frame_times[k]).collect();
    let raw_held = hold_upsample_uwb(
        &event_times
            .iter()
            .copied()
            .zip(raw_events.iter().copied())
            .collect::<Vec<_>>(),
        &frame_times,
    )?;
    let true_held = hold_upsample_uwb(
        &event_times
            .iter()
            .copied()
            .zip(event_dists.iter().copied())
            .collect::<Vec<_>>(),
        &frame_times,
    )?;

    let mut watch_rng =
        ChaCha8Rng::seed_from_u64(stream_seed(seed, subject.rng_seed, 0x7761_7463));
    let watch_meas = synth_watch_imu(
        &forearm_orients,
        &wrists,
        IMU_RATE_HZ,
        subject,
        noise,
        &mut watch_rng,
    )?;

    let mut phone_rng =
        ChaCha8Rng::seed_from_u64(stream_seed(seed, subject.rng_seed, 0x7068_6f6e));
    let phone_meas = synth_phone_imu(n_frames, subject, noise, &mut phone_rng);

    let frames: Vec<Frame> = (0..n_frames)
        .map(|k| Frame {
            timestamp: frame_times[k],
            watch_orient: watch_meas[k].0,
            watch_accel: watch_meas[k].1,
            phone_orient: phone_meas[k].0,
            phone_accel: phone_meas[k].1,
            uwb_raw: raw_held[k],
            uwb_true: true_held[k],
            gt_pose: poses[k],
        })
        .collect();

    Ok(SessionRecording {
        subject: subject.clone(),
        imu_rate: IMU_RATE_HZ,
        uwb_rate: UWB_RATE_HZ,
        frames,
    })
}

/// Phone measurements: reference-yaw offset, slow body sway (scaled by the
/// orientation noise setting), pocket mount, white orientation noise, and
/// jitter-only acceleration.
fn synth_phone_imu(
    n_frames: usize,
    subject: &SyntheticSubject,
    noise: &SensorNoiseConfig,
    rng: &mut ChaCha8Rng,
) -> Vec<(Rot3, Vec3)> {
    let ref_offset_t = subject.phone_reference_offset().transpose();
    let sigma_rad = noise.imu_orient_noise_deg.to_radians();
    let sway_amp = sigma_rad;
    let sway_freq: [f64; 3] = [
        rng.gen_range(0.15..0.45),
        rng.gen_range(0.15..0.45),
        rng.gen_range(0.15..0.45),
    ];
    let sway_phase: [f64; 3] = [
        rng.gen_range(0.0..std::f64::consts::TAU),
        rng.gen_range(0.0..std::f64::consts::TAU),
        rng.gen_range(0.0..std::f64::consts::TAU),
    ];
    (0..n_frames)
        .map(|k| {
            let t = k as f64 / IMU_RATE_HZ;
            let sway = if sway_amp > 0.0 {
                Rot3::rot_x(sway_amp * (std::f64::consts::TAU * sway_freq[0] * t + sway_phase[0]).sin())
                    * Rot3::rot_y(
                        sway_amp * (std::f64::consts::TAU * sway_freq[1] * t + sway_phase[1]).sin(),
                    )
                    * Rot3::rot_z(
                        sway_amp * (std::f64::consts::TAU * sway_freq[2] * t + sway_phase[2]).sin(),
                    )
            } else {
                Rot3::identity()
            };
            let orient = (ref_offset_t
                * sway
                * subject.phone_mount_rot
                * noise_rotation(sigma_rad, rng))
            .orthonormalize();
            let accel = Vec3::new(
                gauss(rng) * noise.imu_accel_noise,
                gauss(rng) * noise.imu_accel_noise,
                gauss(rng) * noise.imu_accel_noise,
            );
            (orient, accel)
        })
        .collect()
}

/// Simulates the two calibration postures for a subject: 1 s (25 samples)
/// of side-by-side readings, then 1 s of T-pose readings. Drift has not
/// accumulated yet (calibration precedes the session).
pub fn calibration_capture(
    subject: &SyntheticSubject,
    noise: &SensorNoiseConfig,
    seed: u64,
) -> CalibrationObservations {
    let mut rng = ChaCha8Rng::seed_from_u64(stream_seed(seed, subject.rng_seed, 0x6361_6c69));
    let sigma_rad = noise.imu_orient_noise_deg.to_radians();
    let ref_offset_t = subject.phone_reference_offset().transpose();
    let dock = random_rotation(&mut rng);

    let side_by_side: Vec<(Rot3, Rot3)> = (0..25)
        .map(|_| {
            let watch = dock * noise_rotation(sigma_rad, &mut rng);
            let phone = ref_offset_t * dock * noise_rotation(sigma_rad, &mut rng);
            (phone, watch)
        })
        .collect();

    let tpose_fore = segment_frames(&JointAngles::tpose()).forearm;
    let watch_true = tpose_fore * SyntheticSubject::watch_strap_rot();
    let phone_true = ref_offset_t * subject.phone_mount_rot;
    let tpose: Vec<(Rot3, Rot3)> = (0..25)
        .map(|_| {
            (
                watch_true * noise_rotation(sigma_rad, &mut rng),
                phone_true * noise_rotation(sigma_rad, &mut rng),
            )
        })
        .collect();

    CalibrationObservations {
        side_by_side,
        tpose,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::calib::CalibrationState;
    use approx::assert_relative_eq;

    fn test_subject() -> SyntheticSubject {
        SyntheticSubject::generate(0, 42)
    }

    #[test]
    fn minimum_jerk_boundaries_and_midpoint() {
        assert_eq!(minimum_jerk(0.0).unwrap(), 0.0);
        assert_eq!(minimum_jerk(1.0).unwrap(), 1.0);
        assert_relative_eq!(minimum_jerk(0.5).unwrap(), 0.5, epsilon = 1e-15);
        assert!(minimum_jerk(-0.1).is_err());
        assert!(minimum_jerk(1.1).is_err());
    }

    #[test]
    fn minimum_jerk_endpoint_derivatives_vanish() {
        let h = 1e-5;
        let d0 = (minimum_jerk(h).unwrap() - minimum_jerk(0.0).unwrap()) / h;
        let d1 = (minimum_jerk(1.0).unwrap() - minimum_jerk(1.0 - h).unwrap()) / h;
        assert!(d0.abs() < 1e-8, "start slope {d0}");
        assert!(d1.abs() < 1e-8, "end slope {d1}");
        let dd0 = (minimum_jerk(2.0 * h).unwrap() - 2.0 * minimum_jerk(h).unwrap()) / (h * h);
        assert!(dd0.abs() < 1e-3, "start curvature {dd0}");
    }

    #[test]
    fn ten_second_session_has_250_frames() {
        let rec = generate_session(&test_subject(), &SensorNoiseConfig::default(), 10.0, 7).unwrap();
        assert_eq!(rec.frames.len(), 250);
        for w in rec.frames.windows(2) {
            let dt = w[1].timestamp - w[0].timestamp;
            assert!((dt - 0.04).abs() <= 1e-9);
        }
        assert!(rec.frames.iter().all(|f| f.uwb_raw >= 0.0));
    }

    #[test]
    fn same_seed_gives_bit_identical_recordings() {
        let subject = test_subject();
        let noise = SensorNoiseConfig::default();
        let a = generate_session(&subject, &noise, 12.0, 99).unwrap();
        let b = generate_session(&subject, &noise, 12.0, 99).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn zero_noise_means_raw_equals_true() {
        let rec = generate_session(&test_subject(), &SensorNoiseConfig::zero(), 10.0, 3).unwrap();
        for f in &rec.frames {
            assert_eq!(f.uwb_raw, f.uwb_true);
        }
    }

    #[test]
    fn held_uwb_values_repeat_five_times() {
        let rec = generate_session(&test_subject(), &SensorNoiseConfig::default(), 10.0, 5).unwrap();
        for chunk in rec.frames.chunks(FRAMES_PER_UWB_EVENT) {
            for f in chunk {
                assert_eq!(f.uwb_raw, chunk[0].uwb_raw);
            }
        }
    }

    #[test]
    fn static_pose_zero_noise_has_zero_acceleration() {
        let subject = test_subject();
        let orients = vec![Rot3::identity(); 10];
        let wrists = vec![Vec3::new(0.1, 0.2, -0.5); 10];
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut quiet = subject.clone();
        quiet.imu_yaw_drift_rate = 0.0;
        let meas = synth_watch_imu(
            &orients,
            &wrists,
            IMU_RATE_HZ,
            &quiet,
            &SensorNoiseConfig::zero(),
            &mut rng,
        )
        .unwrap();
        for (_, a) in meas {
            assert!(a.norm() < 1e-12);
        }
    }

    #[test]
    fn quadratic_trajectory_recovers_constant_acceleration() {
        // x(t) = 0.5 * 2.0 * t^2: the second difference of a quadratic is
        // exact, so |a| = 2.0 up to rounding.
        let subject = test_subject();
        let mut quiet = subject.clone();
        quiet.imu_yaw_drift_rate = 0.0;
        let n = 50;
        let orients = vec![Rot3::identity(); n];
        let wrists: Vec<Vec3> = (0..n)
            .map(|k| {
                let t = k as f64 / IMU_RATE_HZ;
                Vec3::new(t * t, 0.0, 0.0)
            })
            .collect();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let meas = synth_watch_imu(
            &orients,
            &wrists,
            IMU_RATE_HZ,
            &quiet,
            &SensorNoiseConfig::zero(),
            &mut rng,
        )
        .unwrap();
        for (_, a) in &meas[1..n - 1] {
            assert_relative_eq!(a.norm(), 2.0, epsilon = 1e-6);
        }
    }

    #[test]
    fn zero_drift_zero_noise_orientation_matches_device_truth() {
        let subject = test_subject();
        let mut quiet = subject.clone();
        quiet.imu_yaw_drift_rate = 0.0;
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut traj_rng = ChaCha8Rng::seed_from_u64(4);
        let angles = angle_trajectory(40, &mut traj_rng);
        let orients: Vec<Rot3> = angles.iter().map(|a| segment_frames(a).forearm).collect();
        let wrists: Vec<Vec3> = angles
            .iter()
            .map(|a| forward_kinematics(&quiet.arm_model, a).wrist)
            .collect();
        let meas = synth_watch_imu(
            &orients,
            &wrists,
            IMU_RATE_HZ,
            &quiet,
            &SensorNoiseConfig::zero(),
            &mut rng,
        )
        .unwrap();
        let strap = SyntheticSubject::watch_strap_rot();
        for (k, (r, _)) in meas.iter().enumerate() {
            let truth = orients[k] * strap;
            for i in 0..9 {
                assert!((r.as_row_major()[i] - truth.as_row_major()[i]).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn synth_uwb_identity_when_clean_los() {
        let d = vec![0.5, 0.6, 0.7];
        let out = synth_uwb(&d, &[false; 3], &SensorNoiseConfig::zero(), 1).unwrap();
        assert_eq!(out, d);
    }

    #[test]
    fn synth_uwb_degenerate_bias_is_constant_offset() {
        let mut noise = SensorNoiseConfig::zero();
        noise.uwb_nlos_bias_mean = 0.30;
        let d = vec![0.5, 0.6, 0.7, 0.8];
        let out = synth_uwb(&d, &[true; 4], &noise, 1).unwrap();
        for (o, i) in out.iter().zip(&d) {
            assert_relative_eq!(o - i, 0.30, epsilon = 1e-12);
        }
    }

    #[test]
    fn synth_uwb_nlos_bias_mean_matches_configuration() {
        // AR(1) inflates the standard error of the sample mean by
        // sqrt((1+rho)/(1-rho)); assert within 3 adjusted standard errors.
        let noise = SensorNoiseConfig::default();
        let n = 20_000;
        let d = vec![1.0; n];
        let out = synth_uwb(&d, &vec![true; n], &noise, 123).unwrap();
        let mean_err: f64 = out.iter().map(|v| v - 1.0).sum::<f64>() / n as f64;
        let rho = noise.uwb_ar1_coeff;
        let se = ((noise.uwb_nlos_bias_sigma.powi(2) * (1.0 + rho) / (1.0 - rho)
            + noise.uwb_los_noise.powi(2))
            / n as f64)
            .sqrt();
        assert!(
            (mean_err - noise.uwb_nlos_bias_mean).abs() < 3.0 * se,
            "mean bias {mean_err} vs expected {} (se {se})",
            noise.uwb_nlos_bias_mean
        );
    }

    #[test]
    fn uwb_error_zero_mean_on_los_biased_on_nlos() {
        let noise = SensorNoiseConfig::default();
        let n = 20_000;
        let d = vec![1.0; n];
        let los = synth_uwb(&d, &vec![false; n], &noise, 9).unwrap();
        let los_mean: f64 = los.iter().map(|v| v - 1.0).sum::<f64>() / n as f64;
        assert!(los_mean.abs() < 3.0 * noise.uwb_los_noise / (n as f64).sqrt());

        let nlos = synth_uwb(&d, &vec![true; n], &noise, 9).unwrap();
        let nlos_mean: f64 = nlos.iter().map(|v| v - 1.0).sum::<f64>() / n as f64;
        assert!(nlos_mean > 0.1, "NLOS bias should be clearly positive");
    }

    #[test]
    fn occlusion_cases() {
        let capsule = TorsoCapsule::default();
        // Both devices well in front of the torso.
        assert!(!occlusion_test(
            Vec3::new(0.1, 0.5, -0.2),
            Vec3::new(0.1, 0.4, -0.7),
            &capsule
        ));
        // Watch behind the torso center, phone in front: segment crosses
        // the capsule axis.
        assert!(occlusion_test(
            Vec3::new(0.0, -0.4, -0.3),
            Vec3::new(0.0, 0.4, -0.3),
            &capsule
        ));
        // Tangent construction: segment parallel to y at x = radius,
        // passing the axis at exactly the capsule radius. Boundary is
        // inclusive.
        assert!(occlusion_test(
            Vec3::new(capsule.radius, -1.0, -0.3),
            Vec3::new(capsule.radius, 1.0, -0.3),
            &capsule
        ));
        assert!(!occlusion_test(
            Vec3::new(capsule.radius + 1e-9, -1.0, -0.3),
            Vec3::new(capsule.radius + 1e-9, 1.0, -0.3),
            &capsule
        ));
    }

    #[test]
    fn double_integrating_watch_accel_recovers_wrist_path() {
        let mut subject = test_subject();
        subject.imu_yaw_drift_rate = 0.0;
        let rec = generate_session(&subject, &SensorNoiseConfig::zero(), 6.0, 17).unwrap();
        let n = rec.frames.len();
        let dt = 1.0 / IMU_RATE_HZ;

        // World acceleration via the measured (= true, noise-free) device
        // orientation, then discrete double integration seeded with the
        // first two ground-truth wrist positions.
        let mut x_prev = rec.frames[0].gt_pose.wrist;
        let mut x_curr = rec.frames[1].gt_pose.wrist;
        for k in 1..n - 1 {
            let a_world = rec.frames[k].watch_orient.rotate(rec.frames[k].watch_accel);
            let x_next = x_curr * 2.0 - x_prev + a_world * (dt * dt);
            x_prev = x_curr;
            x_curr = x_next;
        }
        let expected = rec.frames[n - 1].gt_pose.wrist;
        let err = (x_curr - expected).norm();
        assert!(err < 0.01, "reconstructed wrist drifted {err} m over 5+ s");
    }

    #[test]
    fn calibration_round_trip_recovers_segment_orientations() {
        // Noise-free end-to-end: side-by-side + T-pose calibration makes
        // corrected device orientations equal ground-truth segment
        // orientations for a whole session.
        let mut subject = test_subject();
        subject.imu_yaw_drift_rate = 0.0;
        let noise = SensorNoiseConfig::zero();
        let obs = calibration_capture(&subject, &noise, 55);
        let cal = CalibrationState::calibrate(&obs).unwrap();

        let rec = generate_session(&subject, &noise, 8.0, 55).unwrap();
        let mut traj_rng =
            ChaCha8Rng::seed_from_u64(stream_seed(55, subject.rng_seed, 0x7261_6a65));
        let angles = angle_trajectory(rec.frames.len(), &mut traj_rng);
        for (f, a) in rec.frames.iter().zip(&angles) {
            let (watch_corr, _) = cal.apply_watch(&f.watch_orient, f.watch_accel);
            let truth = segment_frames(a).forearm;
            for i in 0..9 {
                assert!(
                    (watch_corr.as_row_major()[i] - truth.as_row_major()[i]).abs() < 1e-6,
                    "watch orientation mismatch at t={}",
                    f.timestamp
                );
            }
            let (phone_corr, _) = cal.apply_phone(&f.phone_orient, f.phone_accel);
            for i in 0..9 {
                assert!(
                    (phone_corr.as_row_major()[i] - Rot3::identity().as_row_major()[i]).abs()
                        < 1e-6
                );
            }
        }
    }

    #[test]
    fn tpose_capture_recovers_phone_mount_inverse() {
        let subject = test_subject();
        let obs = calibration_capture(&subject, &SensorNoiseConfig::zero(), 8);
        let cal = CalibrationState::calibrate(&obs).unwrap();
        let recovered = cal.phone_mount;
        let expected = subject.phone_mount_rot.transpose();
        for i in 0..9 {
            assert!((recovered.as_row_major()[i] - expected.as_row_major()[i]).abs() < 1e-6);
        }
    }
}
