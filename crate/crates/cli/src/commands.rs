//! Subcommand implementations. Every command is deterministic given an
//! explicit seed; all on-disk formats live in `session` (corpus files),
//! `armpose::nn` (weights), and here (reports, traces, plots).

use std::fs;
use std::io::{BufRead, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, ValueEnum};
use serde::Serialize;

use armpose::error::{Error, Result};
use armpose::eval::{
    build_heatmap, fit_scatter, metrics_from_evals, run_ablation, run_loso_cv, uwb_gain_from_evals,
    CdfCurve, GridConfig, MetricsReport, SessionEval, UwbGain, JOINT_NAMES,
};
use armpose::kinematics::denormalize_pose;
use armpose::math::Vec3;
use armpose::nn::{select_output_frame, InferenceModel, ModelWeights};
use armpose::pipeline::{assemble_frame, normalize_uwb, RollingBuffer};
use armpose::sim::{Frame, SensorNoiseConfig};
use armpose::train::{make_training_windows, synth_corpus, train, write_loss_csv, TrainConfig};

use crate::session::{
    self, load_corpus, write_manifest, write_session, Manifest, ManifestSubject, SessionMeta,
    FORMAT_VERSION,
};
use crate::svg;

// ---------------------------------------------------------------------------
// simulate
// ---------------------------------------------------------------------------

#[derive(Debug, Args)]
pub struct SimulateArgs {
    /// Number of synthetic subjects.
    #[arg(long, default_value_t = 10)]
    pub subjects: usize,
    /// Session length per subject, minutes.
    #[arg(long, default_value_t = 20.0)]
    pub minutes: f64,
    /// Master seed; everything derives from it.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Output directory for session files and the manifest.
    #[arg(long)]
    pub out: PathBuf,
    /// Noise overrides as key=value (e.g. uwb_los_noise=0.05).
    #[arg(long = "noise", value_name = "KEY=VALUE")]
    pub noise: Vec<String>,
}

fn apply_noise_override(cfg: &mut SensorNoiseConfig, kv: &str) -> Result<()> {
    let (key, value) = kv
        .split_once('=')
        .ok_or_else(|| Error::invalid_input(format!("noise override '{kv}' is not key=value")))?;
    let value: f64 = value
        .parse()
        .map_err(|_| Error::invalid_input(format!("noise override '{kv}' has a bad number")))?;
    match key {
        "imu_orient_noise_deg" => cfg.imu_orient_noise_deg = value,
        "imu_accel_noise" => cfg.imu_accel_noise = value,
        "uwb_los_noise" => cfg.uwb_los_noise = value,
        "uwb_nlos_bias_mean" => cfg.uwb_nlos_bias_mean = value,
        "uwb_nlos_bias_sigma" => cfg.uwb_nlos_bias_sigma = value,
        "uwb_ar1_coeff" => cfg.uwb_ar1_coeff = value,
        other => {
            return Err(Error::invalid_input(format!(
                "unknown noise key '{other}'"
            )))
        }
    }
    Ok(())
}

pub fn cmd_simulate(args: &SimulateArgs) -> Result<()> {
    if args.subjects == 0 || args.minutes <= 0.0 {
        return Err(Error::invalid_input("need at least 1 subject and positive minutes"));
    }
    let mut noise = SensorNoiseConfig::default();
    for kv in &args.noise {
        apply_noise_override(&mut noise, kv)?;
    }
    noise.validate()?;
    fs::create_dir_all(&args.out)?;

    let corpus = synth_corpus(args.subjects, args.minutes, args.seed, &noise)?;
    let mut subjects = Vec::with_capacity(corpus.len());
    for (i, data) in corpus.iter().enumerate() {
        let session_seed = args
            .seed
            .wrapping_mul(0x9e37_79b9_7f4a_7c15)
            .wrapping_add(i as u64);
        let path = write_session(&args.out, data, &noise, session_seed)?;
        let m = &data.recording.subject.arm_model;
        subjects.push(ManifestSubject {
            id: data.recording.subject.id.clone(),
            arm_span: m.arm_span,
            upper_arm_len: m.upper_arm_len,
            forearm_len: m.forearm_len,
            session_file: path
                .file_name()
                .map(|n| n.to_string_lossy().into_owned())
                .unwrap_or_default(),
            n_frames: data.recording.frames.len(),
        });
    }
    let config_blob = serde_json::to_string(&(args.subjects, args.minutes, args.seed, &noise))
        .map_err(|e| Error::format(e.to_string()))?;
    write_manifest(
        &args.out,
        &Manifest {
            format_version: FORMAT_VERSION.to_string(),
            kind: "corpus-manifest".to_string(),
            master_seed: args.seed,
            noise,
            config_hash: crc32fast_hash(config_blob.as_bytes()),
            subjects,
        },
    )?;
    let total: usize = corpus.iter().map(|s| s.recording.frames.len()).sum();
    println!(
        "wrote {} sessions ({} frames) to {}",
        corpus.len(),
        total,
        args.out.display()
    );
    Ok(())
}

// crc32fast is a transitive dependency of the core crate; a tiny local
// table-free implementation keeps this crate's dependency list honest.
fn crc32fast_hash(bytes: &[u8]) -> u32 {
    let mut crc: u32 = !0;
    for &b in bytes {
        crc ^= b as u32;
        for _ in 0..8 {
            let mask = (crc & 1).wrapping_neg();
            crc = (crc >> 1) ^ (0xedb8_8320 & mask);
        }
    }
    !crc
}

// ---------------------------------------------------------------------------
// train
// ---------------------------------------------------------------------------

#[derive(Debug, Args)]
pub struct TrainArgs {
    /// Corpus directory produced by `simulate`.
    #[arg(long)]
    pub data: PathBuf,
    /// Output weight file (.spw).
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 10)]
    pub epochs: usize,
    #[arg(long, default_value_t = 3e-4)]
    pub lr: f64,
    #[arg(long, default_value_t = 16)]
    pub batch_size: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Train the IMU-only variant (UWB channel removed).
    #[arg(long)]
    pub ablate_uwb: bool,
    /// Loss-history CSV path (defaults next to the weight file).
    #[arg(long)]
    pub loss_csv: Option<PathBuf>,
}

pub fn cmd_train(args: &TrainArgs) -> Result<()> {
    let corpus = load_corpus(&args.data)?;
    let cfg = TrainConfig {
        learning_rate: args.lr,
        epochs: args.epochs,
        batch_size: args.batch_size,
        seed: args.seed,
        ablate_uwb: args.ablate_uwb,
        ..TrainConfig::default()
    };
    println!(
        "training on {} sessions ({} windows), lr {:e}, {} epochs, seed {}",
        corpus.len(),
        make_training_windows(&corpus)?.len(),
        cfg.learning_rate,
        cfg.epochs,
        cfg.seed
    );
    let outcome = train(&corpus, &cfg)?;
    outcome.weights.save(&args.out)?;
    // Loading back validates the file end to end.
    ModelWeights::load(&args.out)?;

    let loss_path = args
        .loss_csv
        .clone()
        .unwrap_or_else(|| args.out.with_extension("loss.csv"));
    write_loss_csv(&outcome.history, &loss_path)?;
    let last = outcome.history.last().expect("non-empty history");
    println!(
        "done: best epoch {}, final total loss {:.5}, val MPJPE {:.2} cm",
        outcome.best_epoch, last.total, last.val_mpjpe_cm
    );
    println!("weights: {}", args.out.display());
    println!("loss history: {}", loss_path.display());
    Ok(())
}

// ---------------------------------------------------------------------------
// infer
// ---------------------------------------------------------------------------

#[derive(Debug, Args)]
pub struct InferArgs {
    /// Weight file from `train`.
    #[arg(long)]
    pub weights: PathBuf,
    /// Session CSV (with sidecar) to replay.
    #[arg(long, required_unless_present = "stream")]
    pub session: Option<PathBuf>,
    /// Read session rows from standard input instead of a file.
    #[arg(long)]
    pub stream: bool,
    /// Sidecar JSON (required with --stream).
    #[arg(long, required_if_eq("stream", "true"))]
    pub meta: Option<PathBuf>,
    /// Pose CSV output (defaults to stdout).
    #[arg(long)]
    pub out: Option<PathBuf>,
}

pub const POSE_HEADER: &str = "t,status,sx,sy,sz,ex,ey,ez,wx,wy,wz";

struct LatencyStats {
    n_windows: usize,
    n_warmup: usize,
    median_ms: f64,
    p95_ms: f64,
}

/// Replays frames through the rolling buffer, emitting one pose row per
/// frame: a warm-up marker until the buffer fills, then the denormalized
/// lag-matched prediction (poses refer to 200 ms before the row time).
fn replay_frames<I>(
    frames: I,
    meta: &SessionMeta,
    model: &InferenceModel,
    out: &mut dyn Write,
) -> Result<LatencyStats>
where
    I: Iterator<Item = Result<Frame>>,
{
    let arm_span = meta.subject.arm_model.arm_span;
    let cal = &meta.calibration;
    let mut buffer = RollingBuffer::new();
    let mut latencies_ms: Vec<f64> = Vec::new();
    let mut n_warmup = 0usize;
    writeln!(out, "{POSE_HEADER}")?;
    for frame in frames {
        let f = frame?;
        let (watch_orient, watch_accel) = cal.apply_watch(&f.watch_orient, f.watch_accel);
        let (phone_orient, phone_accel) = cal.apply_phone(&f.phone_orient, f.phone_accel);
        let fused = assemble_frame(
            f.timestamp,
            &watch_orient,
            watch_accel,
            &phone_orient,
            phone_accel,
            normalize_uwb(f.uwb_raw, arm_span)?,
        );
        match buffer.push_and_window(fused)? {
            None => {
                n_warmup += 1;
                writeln!(out, "{},warmup,,,,,,,,,", f.timestamp)?;
            }
            Some(window) => {
                let rows = window.rows();
                let t0 = Instant::now();
                let result = model.infer_window(&rows)?;
                latencies_ms.push(t0.elapsed().as_secs_f64() * 1000.0);
                let selected = select_output_frame(&result.poses, model.spec())?;
                let pose = denormalize_pose(selected, arm_span)?;
                writeln!(
                    out,
                    "{},ok,{},{},{},{},{},{},{},{},{}",
                    f.timestamp,
                    pose.shoulder.x,
                    pose.shoulder.y,
                    pose.shoulder.z,
                    pose.elbow.x,
                    pose.elbow.y,
                    pose.elbow.z,
                    pose.wrist.x,
                    pose.wrist.y,
                    pose.wrist.z
                )?;
            }
        }
    }
    latencies_ms.sort_by(|a, b| a.partial_cmp(b).expect("finite"));
    let pick = |q: f64| -> f64 {
        if latencies_ms.is_empty() {
            f64::NAN
        } else {
            latencies_ms[((latencies_ms.len() - 1) as f64 * q) as usize]
        }
    };
    Ok(LatencyStats {
        n_windows: latencies_ms.len(),
        n_warmup,
        median_ms: pick(0.5),
        p95_ms: pick(0.95),
    })
}

pub fn cmd_infer(args: &InferArgs) -> Result<()> {
    let weights = ModelWeights::load(&args.weights)?;
    let model = InferenceModel::new(&weights)?;

    let mut sink: Box<dyn Write> = match &args.out {
        Some(p) => Box::new(fs::File::create(p)?),
        None => Box::new(std::io::stdout().lock()),
    };

    let stats = if args.stream {
        let meta_path = args.meta.as_ref().expect("clap enforces --meta");
        let meta: SessionMeta = serde_json::from_str(&fs::read_to_string(meta_path)?)
            .map_err(|e| Error::format(format!("bad sidecar: {e}")))?;
        session::check_version(&meta.format_version)?;
        let stdin = std::io::stdin().lock();
        let mut lines = stdin.lines().enumerate();
        match lines.next() {
            Some((_, Ok(header))) if header == session::SESSION_HEADER => {}
            _ => return Err(Error::format("stdin does not start with the session header")),
        }
        let frames = lines.map(|(i, l)| {
            let line = l.map_err(Error::Io)?;
            session::parse_session_row(&line, i + 1)
        });
        replay_frames(frames, &meta, &model, &mut sink)?
    } else {
        let path = args.session.as_ref().expect("clap enforces --session");
        let data = session::load_session(path)?;
        let meta: SessionMeta = serde_json::from_str(&fs::read_to_string(session::meta_path(path))?)
            .map_err(|e| Error::format(format!("bad sidecar: {e}")))?;
        replay_frames(data.recording.frames.into_iter().map(Ok), &meta, &model, &mut sink)?
    };

    eprintln!(
        "windows={} warmup={} median_latency_ms={:.3} p95_latency_ms={:.3}",
        stats.n_windows, stats.n_warmup, stats.median_ms, stats.p95_ms
    );
    Ok(())
}

// ---------------------------------------------------------------------------
// eval
// ---------------------------------------------------------------------------

#[derive(Debug, Args)]
pub struct EvalArgs {
    /// Weight file (fixed-model evaluation; unused with --loso/--ablation).
    #[arg(long)]
    pub weights: Option<PathBuf>,
    /// Corpus directory.
    #[arg(long)]
    pub data: PathBuf,
    /// Output directory for reports and plots.
    #[arg(long)]
    pub out: PathBuf,
    /// Leave-one-subject-out cross validation (retrains per fold).
    #[arg(long)]
    pub loso: bool,
    /// Paired UWB+IMU vs IMU-only ablation (retrains per fold and arm).
    #[arg(long)]
    pub ablation: bool,
    #[arg(long, default_value_t = 10)]
    pub epochs: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 16)]
    pub batch_size: usize,
}

#[derive(Serialize)]
struct ScatterFit {
    slope: f64,
    intercept: f64,
    r2: f64,
}

#[derive(Serialize)]
struct EvalReport {
    format_version: String,
    kind: String,
    metrics: MetricsReport,
    uwb: Option<UwbGain>,
    scatter: Option<ScatterFit>,
}

pub fn cmd_eval(args: &EvalArgs) -> Result<()> {
    let corpus = load_corpus(&args.data)?;
    fs::create_dir_all(&args.out)?;
    let cfg = TrainConfig {
        epochs: args.epochs,
        seed: args.seed,
        batch_size: args.batch_size,
        ..TrainConfig::default()
    };

    if args.ablation {
        let outcome = run_ablation(&corpus, &cfg)?;
        write_json(&args.out.join("ablation.json"), &outcome)?;
        println!(
            "ablation: UWB+IMU {:.2} cm vs IMU-only {:.2} cm (elbow+wrist median avg)",
            outcome.full.mean_ew_median_cm, outcome.imu_only.mean_ew_median_cm
        );
        return Ok(());
    }
    if args.loso {
        let outcome = run_loso_cv(&corpus, &cfg)?;
        write_json(&args.out.join("loso.json"), &outcome)?;
        for fold in &outcome.folds {
            println!(
                "fold {}: elbow+wrist median {:.2} cm, UWB reduction {:.1}%",
                fold.held_out,
                fold.metrics.elbow_wrist_median_avg_cm,
                fold.uwb.map(|u| u.reduction_pct).unwrap_or(f64::NAN)
            );
        }
        println!(
            "aggregate: {:.2} cm (SD {:.2})",
            outcome.mean_ew_median_cm, outcome.sd_ew_median_cm
        );
        return Ok(());
    }

    let weights_path = args
        .weights
        .as_ref()
        .ok_or_else(|| Error::invalid_input("--weights is required without --loso/--ablation"))?;
    let weights = ModelWeights::load(weights_path)?;
    let model = InferenceModel::new(&weights)?;
    let evals = armpose::eval::evaluate_sessions(&model, &corpus)?;
    write_eval_outputs(&args.out, &evals)
}

fn write_eval_outputs(out_dir: &Path, evals: &[SessionEval]) -> Result<()> {
    let metrics = metrics_from_evals(evals)?;
    let has_uwb = evals
        .iter()
        .any(|e| e.frames.iter().any(|f| !f.corrected_m.is_nan()));
    let uwb = if has_uwb {
        Some(uwb_gain_from_evals(evals)?)
    } else {
        None
    };
    let scatter = if has_uwb {
        let (mut xs, mut ys) = (Vec::new(), Vec::new());
        for e in evals {
            for f in &e.frames {
                if !f.corrected_m.is_nan() {
                    xs.push(f.true_m);
                    ys.push(f.corrected_m);
                }
            }
        }
        let (slope, intercept, r2) = fit_scatter(&xs, &ys)?;
        Some(ScatterFit {
            slope,
            intercept,
            r2,
        })
    } else {
        None
    };

    write_json(
        &out_dir.join("report.json"),
        &EvalReport {
            format_version: FORMAT_VERSION.to_string(),
            kind: "eval-report".to_string(),
            metrics: metrics.clone(),
            uwb,
            scatter,
        },
    )?;

    // Per-joint CSV.
    let mut csv = String::from("joint,median_cm,mean_cm\n");
    for (j, name) in JOINT_NAMES.iter().enumerate() {
        csv.push_str(&format!(
            "{},{},{}\n",
            name, metrics.per_joint[j].median_cm, metrics.per_joint[j].mean_cm
        ));
    }
    csv.push_str(&format!(
        "elbow_wrist_avg,{},\n",
        metrics.elbow_wrist_median_avg_cm
    ));
    fs::write(out_dir.join("report.csv"), csv)?;

    // CDFs for elbow and wrist.
    for (joint, name) in [(1usize, "elbow"), (2usize, "wrist")] {
        let errors: Vec<f64> = evals
            .iter()
            .flat_map(|e| e.frames.iter().map(move |f| f.joint_err_cm[joint]))
            .collect();
        let cdf = CdfCurve::from_errors(&errors)?;
        let mut text = String::from("error_cm,fraction\n");
        for (v, f) in cdf.values_cm.iter().zip(&cdf.fractions) {
            text.push_str(&format!("{v},{f}\n"));
        }
        fs::write(out_dir.join(format!("cdf_{name}.csv")), text)?;
    }
    let cdf_svg = {
        let mut series = Vec::new();
        for (joint, name, color) in [(1usize, "elbow", "#1f77b4"), (2usize, "wrist", "#d62728")] {
            let errors: Vec<f64> = evals
                .iter()
                .flat_map(|e| e.frames.iter().map(move |f| f.joint_err_cm[joint]))
                .collect();
            let cdf = CdfCurve::from_errors(&errors)?;
            series.push(svg::Series {
                name,
                color,
                points: cdf
                    .values_cm
                    .iter()
                    .zip(&cdf.fractions)
                    .map(|(v, f)| (*v, *f))
                    .collect(),
            });
        }
        svg::line_chart("joint error CDF", "error (cm)", "fraction", &series)
    };
    fs::write(out_dir.join("cdf.svg"), cdf_svg)?;

    // Spatial max-error heatmaps over wrist positions.
    let positions: Vec<Vec3> = evals
        .iter()
        .flat_map(|e| e.frames.iter().map(|f| f.gt_wrist))
        .collect();
    let wrist_err_m: Vec<f64> = evals
        .iter()
        .flat_map(|e| e.frames.iter().map(|f| f.joint_err_cm[2] / 100.0))
        .collect();
    let mut maps = vec![("wrist_error", wrist_err_m)];
    if has_uwb {
        let raw_err: Vec<f64> = evals
            .iter()
            .flat_map(|e| e.frames.iter().map(|f| (f.raw_m - f.true_m).abs()))
            .collect();
        let corr_err: Vec<f64> = evals
            .iter()
            .flat_map(|e| e.frames.iter().map(|f| (f.corrected_m - f.true_m).abs()))
            .collect();
        maps.push(("uwb_raw_error", raw_err));
        maps.push(("uwb_corrected_error", corr_err));
    }
    for (name, errors) in &maps {
        let grid = build_heatmap(&positions, errors, GridConfig::default())?;
        for (axis, view) in [(1usize, "frontal"), (0usize, "side"), (2usize, "topdown")] {
            let (rows, cols, values) = grid.project(axis);
            let mut text = String::new();
            for r in 0..rows {
                let row: Vec<String> = (0..cols)
                    .map(|c| {
                        let v = values[r * cols + c];
                        if v.is_nan() {
                            "nan".to_string()
                        } else {
                            format!("{v}")
                        }
                    })
                    .collect();
                text.push_str(&row.join(","));
                text.push('\n');
            }
            fs::write(out_dir.join(format!("heatmap_{name}_{view}.csv")), text)?;
            if axis == 1 {
                let rendered =
                    svg::heatmap(&format!("{name} ({view}, max abs m)"), rows, cols, &values);
                fs::write(out_dir.join(format!("heatmap_{name}.svg")), rendered)?;
            }
        }
    }

    // UWB trace of the first evaluated session.
    if has_uwb {
        if let Some(first) = evals.iter().find(|e| !e.frames.is_empty()) {
            let mut text = String::from("t,raw_m,corrected_m,true_m\n");
            for f in &first.frames {
                text.push_str(&format!(
                    "{},{},{},{}\n",
                    f.frame as f64 / 25.0,
                    f.raw_m,
                    f.corrected_m,
                    f.true_m
                ));
            }
            fs::write(out_dir.join("uwb_trace.csv"), &text)?;
            fs::write(
                out_dir.join("uwb_trace.svg"),
                render_uwb_trace(&text)?,
            )?;
        }
    }
    println!(
        "eval: elbow+wrist median avg {:.2} cm over {} frames",
        metrics.elbow_wrist_median_avg_cm, metrics.n_frames
    );
    Ok(())
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let json = serde_json::to_string_pretty(value).map_err(|e| Error::format(e.to_string()))?;
    fs::write(path, json)?;
    Ok(())
}

// ---------------------------------------------------------------------------
// plot
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum PlotKind {
    Cdf,
    Heatmap,
    UwbTrace,
}

#[derive(Debug, Args)]
pub struct PlotArgs {
    /// Input CSV produced by `eval` (cdf_*.csv, heatmap_*.csv, or
    /// uwb_trace.csv).
    #[arg(long)]
    pub report: PathBuf,
    #[arg(long, value_enum)]
    pub kind: PlotKind,
    /// Output SVG path.
    #[arg(long)]
    pub out: PathBuf,
}

pub fn cmd_plot(args: &PlotArgs) -> Result<()> {
    let text = fs::read_to_string(&args.report)?;
    if text.trim().is_empty() {
        return Err(Error::data(format!("{} is empty", args.report.display())));
    }
    let rendered = match args.kind {
        PlotKind::Cdf => render_cdf(&text)?,
        PlotKind::Heatmap => render_heatmap_csv(&text)?,
        PlotKind::UwbTrace => render_uwb_trace(&text)?,
    };
    fs::write(&args.out, rendered)?;
    Ok(())
}

fn parse_two_column(text: &str, expect_header: &str) -> Result<Vec<(f64, f64)>> {
    let mut lines = text.lines();
    let header = lines.next().unwrap_or_default();
    if header != expect_header {
        return Err(Error::format(format!(
            "expected header '{expect_header}', got '{header}'"
        )));
    }
    lines
        .filter(|l| !l.is_empty())
        .map(|l| {
            let mut it = l.split(',');
            let a = it
                .next()
                .and_then(|v| v.parse().ok())
                .ok_or_else(|| Error::format(format!("bad row '{l}'")))?;
            let b = it
                .next()
                .and_then(|v| v.parse().ok())
                .ok_or_else(|| Error::format(format!("bad row '{l}'")))?;
            Ok((a, b))
        })
        .collect()
}

fn render_cdf(text: &str) -> Result<String> {
    let points = parse_two_column(text, "error_cm,fraction")?;
    if points.is_empty() {
        return Err(Error::data("CDF file has no rows"));
    }
    Ok(svg::line_chart(
        "error CDF",
        "error (cm)",
        "fraction",
        &[svg::Series {
            name: "cdf",
            color: "#1f77b4",
            points,
        }],
    ))
}

fn render_heatmap_csv(text: &str) -> Result<String> {
    let mut values = Vec::new();
    let mut cols = None;
    let mut rows = 0usize;
    for line in text.lines().filter(|l| !l.is_empty()) {
        let row: Vec<f64> = line
            .split(',')
            .map(|v| {
                if v == "nan" {
                    Ok(f64::NAN)
                } else {
                    v.parse::<f64>()
                        .map_err(|_| Error::format(format!("bad heatmap value '{v}'")))
                }
            })
            .collect::<Result<_>>()?;
        match cols {
            None => cols = Some(row.len()),
            Some(c) if c != row.len() => {
                return Err(Error::format("ragged heatmap rows"));
            }
            _ => {}
        }
        values.extend(row);
        rows += 1;
    }
    let cols = cols.ok_or_else(|| Error::data("heatmap file has no rows"))?;
    Ok(svg::heatmap("max abs error (m)", rows, cols, &values))
}

fn render_uwb_trace(text: &str) -> Result<String> {
    let mut lines = text.lines();
    let header = lines.next().unwrap_or_default();
    if header != "t,raw_m,corrected_m,true_m" {
        return Err(Error::format("uwb trace header mismatch"));
    }
    let mut raw = Vec::new();
    let mut corrected = Vec::new();
    let mut truth = Vec::new();
    for l in lines.filter(|l| !l.is_empty()) {
        let v: Vec<f64> = l
            .split(',')
            .map(|x| x.parse().map_err(|_| Error::format(format!("bad row '{l}'"))))
            .collect::<Result<_>>()?;
        if v.len() != 4 {
            return Err(Error::format(format!("bad row '{l}'")));
        }
        raw.push((v[0], v[1]));
        corrected.push((v[0], v[2]));
        truth.push((v[0], v[3]));
    }
    if raw.is_empty() {
        return Err(Error::data("uwb trace has no rows"));
    }
    Ok(svg::line_chart(
        "phone-watch distance",
        "time (s)",
        "distance (m)",
        &[
            svg::Series {
                name: "raw",
                color: "#1f77b4",
                points: raw,
            },
            svg::Series {
                name: "corrected",
                color: "#2ca02c",
                points: corrected,
            },
            svg::Series {
                name: "true",
                color: "#ff7f0e",
                points: truth,
            },
        ],
    ))
}
