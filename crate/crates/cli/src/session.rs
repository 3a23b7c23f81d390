//! On-disk formats: session CSV, per-session JSON sidecar, and the corpus
//! manifest.
//!
//! Session CSV columns (orientations stored as scalar-first quaternions,
//! converted to rotation matrices in-pipeline):
//!
//! ```text
//! t,uwb_raw,uwb_true,pq_w,pq_x,pq_y,pq_z,pa_x,pa_y,pa_z,
//! wq_w,wq_x,wq_y,wq_z,wa_x,wa_y,wa_z,gt_sx,gt_sy,gt_sz,
//! gt_ex,gt_ey,gt_ez,gt_wx,gt_wy,gt_wz
//! ```
//!
//! Floats are written with Rust's shortest round-trip formatting, so a
//! write-read cycle reproduces the same f64 values. Every file carries a
//! format version; readers reject higher major versions.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use armpose::calib::CalibrationState;
use armpose::error::{Error, Result};
use armpose::kinematics::ArmPose;
use armpose::math::{Rot3, UnitQuaternion, Vec3};
use armpose::sim::{Frame, SensorNoiseConfig, SessionRecording, SyntheticSubject};
use armpose::train::SessionData;

pub const FORMAT_VERSION: &str = "1.0";

pub const SESSION_HEADER: &str = "t,uwb_raw,uwb_true,pq_w,pq_x,pq_y,pq_z,pa_x,pa_y,pa_z,wq_w,wq_x,wq_y,wq_z,wa_x,wa_y,wa_z,gt_sx,gt_sy,gt_sz,gt_ex,gt_ey,gt_ez,gt_wx,gt_wy,gt_wz";

/// Rejects sidecar/manifest files written by a newer major version.
pub fn check_version(version: &str) -> Result<()> {
    let major = version
        .split('.')
        .next()
        .and_then(|m| m.parse::<u32>().ok())
        .ok_or_else(|| Error::format(format!("malformed format version '{version}'")))?;
    let supported: u32 = FORMAT_VERSION.split('.').next().unwrap().parse().unwrap();
    if major > supported {
        return Err(Error::format(format!(
            "file format version {version} is newer than supported {FORMAT_VERSION}"
        )));
    }
    Ok(())
}

/// JSON sidecar stored next to each session CSV.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SessionMeta {
    pub format_version: String,
    pub kind: String,
    pub subject: SyntheticSubject,
    pub noise: SensorNoiseConfig,
    pub session_seed: u64,
    pub imu_rate: f64,
    pub uwb_rate: f64,
    pub n_frames: usize,
    pub calibration: CalibrationState,
}

/// Corpus-level manifest written by the simulate command.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Manifest {
    pub format_version: String,
    pub kind: String,
    pub master_seed: u64,
    pub noise: SensorNoiseConfig,
    /// CRC32 of the canonical generation-config JSON.
    pub config_hash: u32,
    pub subjects: Vec<ManifestSubject>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ManifestSubject {
    pub id: String,
    pub arm_span: f64,
    pub upper_arm_len: f64,
    pub forearm_len: f64,
    pub session_file: String,
    pub n_frames: usize,
}

fn fmt_quat(q: &UnitQuaternion) -> String {
    format!("{},{},{},{}", q.w(), q.x(), q.y(), q.z())
}

fn fmt_vec(v: &Vec3) -> String {
    format!("{},{},{}", v.x, v.y, v.z)
}

/// Serializes a recording to the session CSV text.
pub fn session_to_csv(rec: &SessionRecording) -> String {
    let mut out = String::with_capacity(rec.frames.len() * 360 + 300);
    out.push_str(SESSION_HEADER);
    out.push('\n');
    for f in &rec.frames {
        let row = format!(
            "{},{},{},{},{},{},{},{},{}\n",
            f.timestamp,
            f.uwb_raw,
            f.uwb_true,
            fmt_quat(&f.phone_orient.to_quat()),
            fmt_vec(&f.phone_accel),
            fmt_quat(&f.watch_orient.to_quat()),
            fmt_vec(&f.watch_accel),
            fmt_vec(&f.gt_pose.shoulder),
            format_args!("{},{}", fmt_vec(&f.gt_pose.elbow), fmt_vec(&f.gt_pose.wrist)),
        );
        out.push_str(&row);
    }
    out
}

/// Parses one data row of the session CSV.
pub fn parse_session_row(line: &str, line_no: usize) -> Result<Frame> {
    let fields: Vec<&str> = line.split(',').collect();
    if fields.len() != 26 {
        return Err(Error::format(format!(
            "line {line_no}: expected 26 fields, got {}",
            fields.len()
        )));
    }
    let num = |i: usize| -> Result<f64> {
        fields[i]
            .parse::<f64>()
            .map_err(|_| Error::format(format!("line {line_no}: bad number '{}'", fields[i])))
    };
    let quat = |i: usize| -> Result<Rot3> {
        Ok(UnitQuaternion::new(num(i)?, num(i + 1)?, num(i + 2)?, num(i + 3)?)?.to_rot())
    };
    let vec = |i: usize| -> Result<Vec3> { Ok(Vec3::new(num(i)?, num(i + 1)?, num(i + 2)?)) };
    Ok(Frame {
        timestamp: num(0)?,
        uwb_raw: num(1)?,
        uwb_true: num(2)?,
        phone_orient: quat(3)?,
        phone_accel: vec(7)?,
        watch_orient: quat(10)?,
        watch_accel: vec(14)?,
        gt_pose: ArmPose {
            shoulder: vec(17)?,
            elbow: vec(20)?,
            wrist: vec(23)?,
        },
    })
}

pub fn parse_session_csv(text: &str) -> Result<Vec<Frame>> {
    let mut lines = text.lines();
    let header = lines
        .next()
        .ok_or_else(|| Error::format("empty session file"))?;
    if header != SESSION_HEADER {
        return Err(Error::format("session CSV header does not match the schema"));
    }
    lines
        .enumerate()
        .filter(|(_, l)| !l.is_empty())
        .map(|(i, l)| parse_session_row(l, i + 2))
        .collect()
}

/// Paths used for one stored session.
pub fn meta_path(session_csv: &Path) -> PathBuf {
    session_csv.with_extension("meta.json")
}

/// Writes a session CSV plus its JSON sidecar.
pub fn write_session(
    dir: &Path,
    data: &SessionData,
    noise: &SensorNoiseConfig,
    session_seed: u64,
) -> Result<PathBuf> {
    let csv_path = dir.join(format!("{}.csv", data.recording.subject.id));
    fs::write(&csv_path, session_to_csv(&data.recording))?;
    let meta = SessionMeta {
        format_version: FORMAT_VERSION.to_string(),
        kind: "session-meta".to_string(),
        subject: data.recording.subject.clone(),
        noise: *noise,
        session_seed,
        imu_rate: data.recording.imu_rate,
        uwb_rate: data.recording.uwb_rate,
        n_frames: data.recording.frames.len(),
        calibration: data.calibration,
    };
    let json = serde_json::to_string_pretty(&meta)
        .map_err(|e| Error::format(format!("sidecar serialization failed: {e}")))?;
    fs::write(meta_path(&csv_path), json)?;
    Ok(csv_path)
}

/// Loads one session (CSV + sidecar) back into memory.
pub fn load_session(csv_path: &Path) -> Result<SessionData> {
    let meta_text = fs::read_to_string(meta_path(csv_path))?;
    let meta: SessionMeta = serde_json::from_str(&meta_text)
        .map_err(|e| Error::format(format!("bad sidecar {}: {e}", meta_path(csv_path).display())))?;
    check_version(&meta.format_version)?;
    meta.calibration.validate()?;

    let frames = parse_session_csv(&fs::read_to_string(csv_path)?)?;
    if frames.len() != meta.n_frames {
        return Err(Error::format(format!(
            "{}: sidecar says {} frames, file has {}",
            csv_path.display(),
            meta.n_frames,
            frames.len()
        )));
    }
    Ok(SessionData {
        recording: SessionRecording {
            subject: meta.subject,
            imu_rate: meta.imu_rate,
            uwb_rate: meta.uwb_rate,
            frames,
        },
        calibration: meta.calibration,
    })
}

/// Loads every session in a corpus directory, sorted by file name.
pub fn load_corpus(dir: &Path) -> Result<Vec<SessionData>> {
    let mut paths: Vec<PathBuf> = fs::read_dir(dir)?
        .filter_map(|e| e.ok())
        .map(|e| e.path())
        .filter(|p| p.extension().map(|x| x == "csv").unwrap_or(false))
        .collect();
    paths.sort();
    if paths.is_empty() {
        return Err(Error::data(format!(
            "no session CSV files found in {}",
            dir.display()
        )));
    }
    paths.iter().map(|p| load_session(p)).collect()
}

pub fn write_manifest(dir: &Path, manifest: &Manifest) -> Result<()> {
    let json = serde_json::to_string_pretty(manifest)
        .map_err(|e| Error::format(format!("manifest serialization failed: {e}")))?;
    fs::write(dir.join("manifest.json"), json)?;
    Ok(())
}

pub fn load_manifest(dir: &Path) -> Result<Manifest> {
    let text = fs::read_to_string(dir.join("manifest.json"))?;
    let m: Manifest = serde_json::from_str(&text)
        .map_err(|e| Error::format(format!("bad manifest: {e}")))?;
    check_version(&m.format_version)?;
    Ok(m)
}
