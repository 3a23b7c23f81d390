// scratch: geometry + baselines + ablation probe
use armpose::eval::run_ablation;
use armpose::kinematics::{device_distance, normalize_pose};
use armpose::math::Vec3;
use armpose::sim::{occlusion_test, SensorNoiseConfig, TorsoCapsule};
use armpose::train::{synth_corpus, TrainConfig};
use std::time::Instant;

fn main() {
    let corpus = synth_corpus(4, 10.0, 4242, &SensorNoiseConfig::default()).unwrap();

    // NLOS fraction + raw MAE with the new pocket sampling.
    let capsule = TorsoCapsule::default();
    let (mut nlos, mut total) = (0usize, 0usize);
    let (mut raw_mae, mut n) = (0.0f64, 0usize);
    for s in &corpus {
        let model = &s.recording.subject.arm_model;
        for f in &s.recording.frames {
            if occlusion_test(f.gt_pose.wrist, model.phone_anchor, &capsule) { nlos += 1; }
            total += 1;
            raw_mae += (f.uwb_raw - device_distance(&f.gt_pose, Vec3::zero(), model)).abs();
            n += 1;
        }
    }
    println!("NLOS fraction: {:.3}, raw MAE {:.2} cm", nlos as f64 / total as f64, raw_mae / n as f64 * 100.0);

    // Constant mean-pose baseline (wrist), computed over all subjects.
    let mut sum = [0.0f64; 9];
    let mut m = 0usize;
    for s in &corpus {
        let span = s.recording.subject.arm_model.arm_span;
        for f in &s.recording.frames {
            let nine = normalize_pose(&f.gt_pose, span).unwrap();
            for (a, b) in sum.iter_mut().zip(&nine) { *a += b; }
            m += 1;
        }
    }
    for a in &mut sum { *a /= m as f64; }
    let mut wrist_err = 0.0;
    for s in &corpus {
        let span = s.recording.subject.arm_model.arm_span;
        for f in &s.recording.frames {
            let dx = sum[6] * span - f.gt_pose.wrist.x;
            let dy = sum[7] * span - f.gt_pose.wrist.y;
            let dz = sum[8] * span - f.gt_pose.wrist.z;
            wrist_err += (dx * dx + dy * dy + dz * dz).sqrt();
        }
    }
    println!("mean-pose predictor wrist MPJPE: {:.2} cm", wrist_err / m as f64 * 100.0);

    let cfg = TrainConfig { epochs: 50, batch_size: 8, seed: 7, ..TrainConfig::default() };
    let t0 = Instant::now();
    let out = run_ablation(&corpus, &cfg).unwrap();
    println!("ablation runtime: {:?}", t0.elapsed());
    for (f, i) in out.full.folds.iter().zip(&out.imu_only.folds) {
        println!(
            "fold {}: full ew {:.2} (sh {:.2} el {:.2} wr {:.2}, wrMPJPE {:.2}) | imu ew {:.2} (wr {:.2}) | red {:.1}% raw {:.1} corr {:.1}",
            f.held_out,
            f.metrics.elbow_wrist_median_avg_cm,
            f.metrics.per_joint[0].median_cm,
            f.metrics.per_joint[1].median_cm,
            f.metrics.per_joint[2].median_cm,
            f.metrics.per_joint[2].mean_cm,
            i.metrics.elbow_wrist_median_avg_cm,
            i.metrics.per_joint[2].median_cm,
            f.uwb.map(|u| u.reduction_pct).unwrap_or(f64::NAN),
            f.uwb.map(|u| u.raw_mae_cm).unwrap_or(f64::NAN),
            f.uwb.map(|u| u.corrected_mae_cm).unwrap_or(f64::NAN),
        );
    }
    println!(
        "aggregate: full {:.2} vs imu-only {:.2} cm (gap {:.1}%)",
        out.full.mean_ew_median_cm,
        out.imu_only.mean_ew_median_cm,
        (1.0 - out.full.mean_ew_median_cm / out.imu_only.mean_ew_median_cm) * 100.0,
    );
}
