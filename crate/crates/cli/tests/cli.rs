//! End-to-end tests of the command-line surface: file formats, command
//! behavior, exit codes, and plot rendering.

use std::fs;
use std::path::Path;
use std::process::{Command, Stdio};

use armpose::nn::ModelSpec;
use armpose::sim::SensorNoiseConfig;
use armpose::train::{synth_corpus, Params};

use armpose_cli::commands::{
    cmd_eval, cmd_infer, cmd_plot, cmd_simulate, EvalArgs, InferArgs, PlotArgs, PlotKind,
    SimulateArgs,
};
use armpose_cli::session::{load_corpus, load_manifest, write_session};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_armpose"))
}

fn simulate(dir: &Path, subjects: usize, minutes: f64, seed: u64) {
    cmd_simulate(&SimulateArgs {
        subjects,
        minutes,
        seed,
        out: dir.to_path_buf(),
        noise: vec![],
    })
    .unwrap();
}

/// Random but deterministic weights for commands that need a model file.
fn write_random_weights(path: &Path, seed: u64) {
    Params::init(ModelSpec::default(), seed)
        .unwrap()
        .to_weights()
        .unwrap()
        .save(path)
        .unwrap();
}

#[test]
fn simulate_writes_sessions_and_reproducible_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    simulate(&a, 2, 1.0, 9);
    simulate(&b, 2, 1.0, 9);

    let manifest = load_manifest(&a).unwrap();
    assert_eq!(manifest.subjects.len(), 2);
    // 1 minute at 25 Hz.
    assert_eq!(manifest.subjects[0].n_frames, 1500);
    assert_eq!(manifest.config_hash, load_manifest(&b).unwrap().config_hash);

    // Session bytes identical across reruns with the same seed.
    let f = |d: &Path| fs::read(d.join("subject00.csv")).unwrap();
    assert_eq!(f(&a), f(&b));

    let corpus = load_corpus(&a).unwrap();
    assert_eq!(corpus.len(), 2);
    assert_eq!(corpus[0].recording.frames.len(), 1500);
}

#[test]
fn infer_emits_warmup_then_pose_rows() {
    let dir = tempfile::tempdir().unwrap();
    // 10 s = 250 frames.
    let corpus = synth_corpus(1, 10.0 / 60.0, 3, &SensorNoiseConfig::default()).unwrap();
    let csv = write_session(dir.path(), &corpus[0], &SensorNoiseConfig::default(), 3).unwrap();
    let weights = dir.path().join("w.spw");
    write_random_weights(&weights, 1);

    let out = dir.path().join("poses.csv");
    cmd_infer(&InferArgs {
        weights: weights.clone(),
        session: Some(csv.clone()),
        stream: false,
        meta: None,
        out: Some(out.clone()),
    })
    .unwrap();

    let text = fs::read_to_string(&out).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "t,status,sx,sy,sz,ex,ey,ez,wx,wy,wz");
    let warmup = lines.iter().filter(|l| l.contains(",warmup,")).count();
    let ok = lines.iter().filter(|l| l.contains(",ok,")).count();
    assert_eq!(warmup, 124);
    assert_eq!(ok, 126);
    assert_eq!(lines.len(), 1 + 250);

    // Streaming stdin mode produces the identical output.
    let meta = csv.with_extension("meta.json");
    let mut child = bin()
        .args([
            "infer",
            "--weights",
            weights.to_str().unwrap(),
            "--stream",
            "--meta",
            meta.to_str().unwrap(),
        ])
        .stdin(Stdio::piped())
        .stdout(Stdio::piped())
        .stderr(Stdio::piped())
        .spawn()
        .unwrap();
    use std::io::Write as _;
    child
        .stdin
        .take()
        .unwrap()
        .write_all(&fs::read(&csv).unwrap())
        .unwrap();
    let result = child.wait_with_output().unwrap();
    assert!(result.status.success());
    assert_eq!(String::from_utf8_lossy(&result.stdout), text);
    let stderr = String::from_utf8_lossy(&result.stderr);
    assert!(stderr.contains("median_latency_ms="), "stderr: {stderr}");
}

#[test]
fn eval_writes_reports_and_plots() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("data");
    simulate(&data, 2, 1.0, 17);
    let weights = dir.path().join("w.spw");
    write_random_weights(&weights, 2);

    let out = dir.path().join("eval");
    cmd_eval(&EvalArgs {
        weights: Some(weights),
        data: data.clone(),
        out: out.clone(),
        loso: false,
        ablation: false,
        epochs: 1,
        seed: 0,
        batch_size: 8,
    })
    .unwrap();

    let report: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out.join("report.json")).unwrap()).unwrap();
    assert!(report["metrics"]["elbow_wrist_median_avg_cm"].is_number());
    assert!(report["uwb"]["reduction_pct"].is_number());
    assert!(report["scatter"]["r2"].is_number());

    for svg_file in [
        "cdf.svg",
        "heatmap_wrist_error.svg",
        "heatmap_uwb_raw_error.svg",
        "heatmap_uwb_corrected_error.svg",
        "uwb_trace.svg",
    ] {
        let svg = fs::read_to_string(out.join(svg_file)).unwrap();
        assert_svg_well_formed(&svg);
    }

    // CDF CSV is monotone with final fraction 1.
    let cdf = fs::read_to_string(out.join("cdf_wrist.csv")).unwrap();
    let rows: Vec<(f64, f64)> = cdf
        .lines()
        .skip(1)
        .map(|l| {
            let mut it = l.split(',');
            (
                it.next().unwrap().parse().unwrap(),
                it.next().unwrap().parse().unwrap(),
            )
        })
        .collect();
    assert!(rows.windows(2).all(|w| w[0].0 <= w[1].0 && w[0].1 <= w[1].1));
    assert_eq!(rows.last().unwrap().1, 1.0);

    // Re-plot from the emitted CSVs.
    for (file, kind) in [
        ("cdf_wrist.csv", PlotKind::Cdf),
        ("heatmap_wrist_error_frontal.csv", PlotKind::Heatmap),
        ("uwb_trace.csv", PlotKind::UwbTrace),
    ] {
        let svg_out = out.join(format!("replot_{file}.svg"));
        cmd_plot(&PlotArgs {
            report: out.join(file),
            kind,
            out: svg_out.clone(),
        })
        .unwrap();
        assert_svg_well_formed(&fs::read_to_string(svg_out).unwrap());
    }
}

#[test]
fn loso_eval_on_two_subjects_reports_two_folds() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("data");
    simulate(&data, 2, 1.0, 23);
    let out = dir.path().join("eval");
    cmd_eval(&EvalArgs {
        weights: None,
        data,
        out: out.clone(),
        loso: true,
        ablation: false,
        epochs: 1,
        seed: 0,
        batch_size: 8,
    })
    .unwrap();
    let loso: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out.join("loso.json")).unwrap()).unwrap();
    assert_eq!(loso["folds"].as_array().unwrap().len(), 2);
    for fold in loso["folds"].as_array().unwrap() {
        assert!(fold["metrics"]["elbow_wrist_median_avg_cm"].is_number());
    }
}

#[test]
fn plot_golden_uwb_trace() {
    // Fixed fixture: rendering must be byte-identical across runs and
    // match the frozen golden file.
    let fixture = "t,raw_m,corrected_m,true_m\n0,0.9,0.62,0.6\n0.2,1.1,0.66,0.65\n0.4,0.7,0.71,0.7\n0.6,1.3,0.74,0.72\n0.8,0.95,0.69,0.71\n";
    let dir = tempfile::tempdir().unwrap();
    let report = dir.path().join("trace.csv");
    fs::write(&report, fixture).unwrap();
    let out1 = dir.path().join("a.svg");
    let out2 = dir.path().join("b.svg");
    for out in [&out1, &out2] {
        cmd_plot(&PlotArgs {
            report: report.clone(),
            kind: PlotKind::UwbTrace,
            out: out.clone(),
        })
        .unwrap();
    }
    let a = fs::read(&out1).unwrap();
    assert_eq!(a, fs::read(&out2).unwrap());

    let golden_path = Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/data/uwb_trace_golden.svg");
    let golden = fs::read(&golden_path).unwrap();
    assert_eq!(
        a,
        golden,
        "rendered SVG deviates from the golden file {}",
        golden_path.display()
    );
}

#[test]
fn plot_rejects_empty_and_unknown_inputs() {
    let dir = tempfile::tempdir().unwrap();
    let empty = dir.path().join("empty.csv");
    fs::write(&empty, "").unwrap();
    let out = dir.path().join("out.svg");
    assert!(cmd_plot(&PlotArgs {
        report: empty,
        kind: PlotKind::Cdf,
        out: out.clone(),
    })
    .is_err());

    // Unknown kind is a clap-level usage error (exit 1).
    let status = bin()
        .args(["plot", "--report", "x.csv", "--kind", "pie", "--out", "y.svg"])
        .stderr(Stdio::null())
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(1));
}

#[test]
fn exit_codes_reflect_error_class() {
    let dir = tempfile::tempdir().unwrap();
    // Invalid noise key: usage error -> 1.
    let status = bin()
        .args([
            "simulate",
            "--subjects",
            "1",
            "--minutes",
            "1",
            "--out",
            dir.path().to_str().unwrap(),
            "--noise",
            "bogus_key=1",
        ])
        .stderr(Stdio::null())
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(1));

    // Missing corpus directory: data error -> 2.
    let status = bin()
        .args([
            "train",
            "--data",
            dir.path().join("nope").to_str().unwrap(),
            "--out",
            dir.path().join("w.spw").to_str().unwrap(),
        ])
        .stderr(Stdio::null())
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(2));
}

#[test]
fn sidecar_version_gate_applies_on_load() {
    let dir = tempfile::tempdir().unwrap();
    let corpus = synth_corpus(1, 10.0 / 60.0, 5, &SensorNoiseConfig::default()).unwrap();
    let csv = write_session(dir.path(), &corpus[0], &SensorNoiseConfig::default(), 5).unwrap();
    let meta_path = csv.with_extension("meta.json");
    let tampered = fs::read_to_string(&meta_path)
        .unwrap()
        .replace("\"format_version\": \"1.0\"", "\"format_version\": \"2.0\"");
    fs::write(&meta_path, tampered).unwrap();
    let err = armpose_cli::session::load_session(&csv).unwrap_err();
    assert!(err.to_string().contains("version"), "{err}");
}

/// Minimal XML well-formedness check shared by the plot assertions.
fn assert_svg_well_formed(svg: &str) {
    assert!(svg.starts_with("<?xml"));
    assert!(svg.trim_end().ends_with("</svg>"));
    let mut stack: Vec<&str> = Vec::new();
    for tag in svg.split('<').skip(1) {
        if tag.starts_with('?') {
            continue;
        }
        if let Some(name) = tag.strip_prefix('/') {
            let name = name.split('>').next().unwrap().trim();
            assert_eq!(stack.pop(), Some(name), "unbalanced </{name}>");
        } else {
            let body = tag.split('>').next().unwrap();
            if !body.ends_with('/') {
                stack.push(body.split_whitespace().next().unwrap());
            }
        }
    }
    assert!(stack.is_empty(), "unclosed tags: {stack:?}");
}
