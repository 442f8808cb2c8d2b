use std::path::Path;
use std::sync::Arc;

use gprfl_core::control::{design_lyapunov, ControllerVariant};
use gprfl_core::dynamics::{RobotState, RunTrace, TraceTick};
use gprfl_core::trajectory::{sample_spec, ReferenceTrajectory};
use gprfl_harness::output::{load_gp, trace_header, trace_path, write_gp_model};
use gprfl_harness::{
    compute_rmse, lyapunov_check, rmse_from_errors, run_experiment, run_single, train_gp,
    ExperimentConfig, HarnessError,
};
use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn quick_config() -> ExperimentConfig {
    ExperimentConfig {
        duration: 3.0,
        fit_restarts: 1,
        fit_iters: 20,
        ..ExperimentConfig::default()
    }
}

#[test]
fn config_round_trips_through_toml() {
    let cfg = ExperimentConfig {
        epsilon: 0.2,
        eval_seeds: vec![3, 9],
        controllers: vec!["gp".into(), "robust_gp".into()],
        ..ExperimentConfig::default()
    };
    let text = cfg.to_toml().unwrap();
    assert_eq!(ExperimentConfig::parse(&text).unwrap(), cfg);

    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("c.toml");
    cfg.save(&path).unwrap();
    assert_eq!(ExperimentConfig::load(path.to_str().unwrap()).unwrap(), cfg);
}

#[test]
fn config_rejects_unknown_keys_and_overlapping_seeds() {
    assert!(matches!(
        ExperimentConfig::parse("no_such_key = 1"),
        Err(HarnessError::Config(_))
    ));
    assert!(ExperimentConfig::parse("training_seed = 4\neval_seeds = [1, 4]").is_err());
    assert!(ExperimentConfig::parse("eval_seeds = [1, 1]").is_err());
    assert!(ExperimentConfig::load("/nonexistent/config.toml").is_err());
}

#[test]
fn rmse_of_sinusoidal_error() {
    let amp = 0.02;
    let errors: Vec<DVector<f64>> = (0..10_000)
        .map(|k| {
            let t = k as f64 * 0.01;
            DVector::from_vec(vec![amp * (1.3 * t).sin(), 2.0 * amp * (0.7 * t).cos()])
        })
        .collect();
    let r = rmse_from_errors(&errors).unwrap();
    let expect = amp.to_degrees() / 2f64.sqrt();
    assert!((r.per_joint_deg[0] / expect - 1.0).abs() < 0.01);
    assert!((r.per_joint_deg[1] / (2.0 * expect) - 1.0).abs() < 0.01);
    assert!((r.average_deg - 1.5 * expect).abs() / (1.5 * expect) < 0.01);
}

fn flat_trace(times: &[f64]) -> RunTrace<f64, ()> {
    let ticks = times
        .iter()
        .map(|&time| TraceTick {
            time,
            state: RobotState::zeros(2),
            tau: DVector::zeros(2),
            accel: DVector::zeros(2),
            log: (),
        })
        .collect();
    RunTrace {
        ticks,
        final_time: 1.0,
        final_state: RobotState::zeros(2),
    }
}

#[test]
fn rmse_rejects_misaligned_traces() {
    let spec = sample_spec(1, 2, 5, 0.3, 0.9).unwrap();
    let reference = ReferenceTrajectory::sample(&spec, 1.0, 100.0).unwrap();
    let short: Vec<f64> = reference.times[..50].to_vec();
    assert!(matches!(
        compute_rmse(&flat_trace(&short), &reference),
        Err(HarnessError::Alignment(_))
    ));
    let shifted: Vec<f64> = reference.times.iter().map(|t| t + 0.005).collect();
    assert!(matches!(
        compute_rmse(&flat_trace(&shifted), &reference),
        Err(HarnessError::Alignment(_))
    ));
    let aligned = compute_rmse(&flat_trace(&reference.times), &reference).unwrap();
    assert!(aligned.average_deg > 0.0);
}

#[test]
fn true_model_run_tracks_below_floor() {
    let cfg = ExperimentConfig {
        duration: 10.0,
        ..ExperimentConfig::default()
    };
    let rec = run_single(&cfg, ControllerVariant::TrueModel, 1, None).unwrap();
    assert_eq!(rec.trace.ticks.len(), 1000);
    assert!(rec.rmse.average_deg < 5.0, "{}", rec.rmse.average_deg);
}

#[test]
fn perfect_nominal_matches_true_model_law() {
    let cfg = ExperimentConfig {
        duration: 5.0,
        nominal: "true".into(),
        ..ExperimentConfig::default()
    };
    let a = run_single(&cfg, ControllerVariant::TrueModel, 2, None).unwrap();
    let b = run_single(&cfg, ControllerVariant::Nominal, 2, None).unwrap();
    assert!((a.rmse.average_deg - b.rmse.average_deg).abs() < 1e-12);
}

#[test]
fn gp_variants_need_a_model() {
    let cfg = quick_config();
    assert!(matches!(
        run_single(&cfg, ControllerVariant::RobustGp, 1, None),
        Err(HarnessError::Config(_))
    ));
}

fn read(dir: &Path, name: &str) -> Vec<u8> {
    std::fs::read(dir.join(name)).unwrap_or_else(|e| panic!("{name}: {e}"))
}

#[test]
fn experiment_writes_all_artifacts_reproducibly() {
    let cfg = quick_config();
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let summary = run_experiment(&cfg, a.path()).unwrap();
    run_experiment(&cfg, b.path()).unwrap();

    assert_eq!(summary.rows.len(), 40);
    assert!(summary.rows.iter().all(|r| r.failure.is_none()));
    assert_eq!(summary.robust.len(), 10);
    for &seed in &cfg.eval_seeds {
        for v in ControllerVariant::ALL {
            let p = trace_path(a.path(), v, seed);
            assert!(p.exists(), "{}", p.display());
        }
        for j in 1..=2 {
            assert!(a.path().join(format!("plotdata_{seed}/joint{j}.csv")).exists());
        }
    }
    for name in ["summary.csv", "summary.txt", "gp_model.txt", "training_data.csv", "config.toml"] {
        assert_eq!(read(a.path(), name), read(b.path(), name), "{name} differs");
    }
    let p = trace_path(a.path(), ControllerVariant::RobustGp, 4);
    assert_eq!(std::fs::read(&p).unwrap(), std::fs::read(trace_path(b.path(), ControllerVariant::RobustGp, 4)).unwrap());

    let csv = String::from_utf8(read(a.path(), "summary.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(
        lines.next().unwrap(),
        "controller,seed,rmse_j1_deg,rmse_j2_deg,rmse_avg_deg,status"
    );
    assert_eq!(lines.count(), 40);

    let saved = ExperimentConfig::parse(&String::from_utf8(read(a.path(), "config.toml")).unwrap()).unwrap();
    assert_eq!(saved, cfg);
}

#[test]
fn trace_has_every_logged_column() {
    let cfg = quick_config();
    let gp = Arc::new(train_gp(&cfg).unwrap());
    let dir = tempfile::tempdir().unwrap();
    let rec = run_single(&cfg, ControllerVariant::RobustGp, 1, Some(&gp)).unwrap();
    let path = dir.path().join("t.csv");
    gprfl_harness::output::write_trace(&rec, &path).unwrap();

    let mut reader = csv::Reader::from_path(&path).unwrap();
    let header: Vec<String> = reader.headers().unwrap().iter().map(String::from).collect();
    assert_eq!(header, trace_header(2));
    for col in [
        "time", "q1", "dq2", "qd1", "q_err1", "dq_err2", "tau1", "rho", "e_hat_mean1",
        "e_hat_var2", "aux_accel1", "ddq2", "e_true1", "w2", "V", "z_norm",
    ] {
        assert!(header.iter().any(|h| h == col), "missing {col}");
    }
    let rows: Vec<csv::StringRecord> = reader.records().map(Result::unwrap).collect();
    assert_eq!(rows.len(), 300);
    let rho_col = header.iter().position(|h| h == "rho").unwrap();
    for (row, tick) in rows.iter().zip(&rec.trace.ticks) {
        assert_eq!(row[rho_col].parse::<f64>().unwrap(), tick.log.rho);
        assert!(tick.log.rho > 0.0);
    }
}

#[test]
fn gp_model_file_round_trips() {
    let cfg = quick_config();
    let gp = train_gp(&cfg).unwrap();
    let dir = tempfile::tempdir().unwrap();
    write_gp_model(&gp, &cfg, dir.path()).unwrap();
    let back = load_gp(dir.path()).unwrap();
    assert_eq!(back.dataset(), gp.dataset());
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for _ in 0..20 {
        let x: Vec<f64> = (0..6).map(|_| rng.random_range(-3.0..3.0)).collect();
        let (m0, v0) = gp.predict_slice(&x).unwrap();
        let (m1, v1) = back.predict_slice(&x).unwrap();
        assert!((m0 - m1).amax() < 1e-9);
        assert!((v0 - v1).amax() < 1e-9);
    }
}

#[test]
fn qualifying_ticks_have_decreasing_lyapunov_rate() {
    let cfg = ExperimentConfig {
        duration: 10.0,
        epsilon: 0.01,
        ..ExperimentConfig::default()
    };
    let gp = Arc::new(train_gp(&cfg).unwrap());
    let rec = run_single(&cfg, ControllerVariant::RobustGp, 1, Some(&gp)).unwrap();
    let q = design_lyapunov(&cfg.gains().unwrap(), 2).unwrap().q;
    let check = lyapunov_check(&rec, cfg.epsilon, &q);
    assert!(check.qualifying > 0);
    assert_eq!(check.instant_decreasing, check.qualifying);
}

#[test]
fn diverging_run_becomes_flagged_row() {
    let cfg = ExperimentConfig {
        duration: 20.0,
        control_rate: 10.0,
        kp: 1e6,
        kd: 2000.0,
        controllers: vec!["nominal".into(), "true".into()],
        eval_seeds: vec![1],
        ..ExperimentConfig::default()
    };
    let dir = tempfile::tempdir().unwrap();
    let summary = run_experiment(&cfg, dir.path()).unwrap();
    assert_eq!(summary.rows.len(), 2);
    let failed: Vec<_> = summary.rows.iter().filter(|r| r.failure.is_some()).collect();
    assert!(!failed.is_empty());
    assert!(failed.iter().all(|r| r.rmse.is_none()));
    let csv = std::fs::read_to_string(dir.path().join("summary.csv")).unwrap();
    assert!(csv.lines().any(|l| l.starts_with("nominal,1,NaN,NaN,NaN,failed: ")));
    let txt = std::fs::read_to_string(dir.path().join("summary.txt")).unwrap();
    assert!(txt.contains("FAILED"));
}
