use gprfl_core::dynamics::{ManipulatorModel, NominalModel};
use gprfl_core::gpr::compute_mismatch_target;
use gprfl_core::trajectory::{
    build_training_set, sample_spec, ReferenceTrajectory, SinusoidSpec, TrainingConfig,
    DEFAULT_OMEGA_MAX, DEFAULT_OMEGA_MIN, DEFAULT_SINUSOIDS,
};
use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn spec(seed: u64) -> SinusoidSpec<f64> {
    sample_spec(seed, 2, DEFAULT_SINUSOIDS, DEFAULT_OMEGA_MIN, DEFAULT_OMEGA_MAX).unwrap()
}

#[test]
fn derivatives_match_central_differences() {
    let h = 1e-5;
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for seed in 0..3 {
        let s = spec(seed);
        for _ in 0..100 {
            let t = rng.random_range(h..60.0);
            let d = s.evaluate(t);
            let (p, m) = (s.evaluate(t + h), s.evaluate(t - h));
            let fd_v = (&p.q - &m.q) / (2.0 * h);
            let fd_a = (&p.dq - &m.dq) / (2.0 * h);
            assert!((fd_v - &d.dq).abs().max() < 1e-6, "velocity at t = {t}");
            assert!((fd_a - &d.ddq).abs().max() < 1e-6, "acceleration at t = {t}");
        }
    }
}

#[test]
fn frequency_statistics() {
    let (lo, hi) = (DEFAULT_OMEGA_MIN, DEFAULT_OMEGA_MAX);
    let s = sample_spec(42, 2, 5000, lo, hi).unwrap();
    let all: Vec<f64> = s.frequencies.iter().flatten().copied().collect();
    assert_eq!(all.len(), 10_000);
    let n = all.len() as f64;
    let mean = all.iter().sum::<f64>() / n;
    let min = all.iter().copied().fold(f64::INFINITY, f64::min);
    let max = all.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    assert!(min >= lo && max <= hi);
    // standard error of a uniform mean: (hi − lo) / sqrt(12 n)
    let se = (hi - lo) / (12.0 * n).sqrt();
    assert!((mean - 0.5 * (lo + hi)).abs() < 3.0 * se, "mean {mean}");
    // joints get distinct frequency sets
    assert_ne!(s.frequencies[0], s.frequencies[1]);
}

#[test]
fn position_bounded_by_two_pi() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for seed in 0..10 {
        let s = spec(seed);
        for _ in 0..200 {
            let d = s.evaluate(rng.random_range(0.0..200.0));
            assert!(d.q.amax() <= 2.0 * std::f64::consts::PI);
        }
    }
}

#[test]
fn default_training_set_has_100_samples() {
    let model = ManipulatorModel::<f64>::two_link_default();
    let nominal = NominalModel::scaled_identity(2, 0.5).unwrap();
    let ds = build_training_set(&model, &nominal, &spec(0), &TrainingConfig::default()).unwrap();
    assert_eq!(ds.len(), 100);
    assert_eq!(ds.input_dim(), 6);
    assert_eq!(ds.n_outputs(), 2);
}

#[test]
fn perfect_nominal_gives_zero_targets() {
    let model = ManipulatorModel::<f64>::two_link_default();
    let nominal = NominalModel::Rigid(model.clone());
    let ds = build_training_set(&model, &nominal, &spec(3), &TrainingConfig::default()).unwrap();
    assert!(ds.targets().iter().all(|&v| v == 0.0));
}

#[test]
fn per_sample_targets_match_recomputation() {
    let model = ManipulatorModel::<f64>::two_link_default();
    let nominal = NominalModel::scaled_identity(2, 0.5).unwrap();
    let s = spec(8);
    let cfg = TrainingConfig {
        duration: 1.0,
        downsample: 1,
        ..TrainingConfig::default()
    };
    let ds = build_training_set(&model, &nominal, &s, &cfg).unwrap();
    assert_eq!(ds.len(), 100);
    for k in 0..100 {
        let d = s.evaluate(k as f64 / 100.0);
        let x = ds.input(k);
        assert!((&x.q - &d.q).amax() < 1e-12);
        assert!((&x.dq - &d.dq).amax() < 1e-12);
        assert!((&x.ddq - &d.ddq).amax() < 1e-12);
        let tau = model.inverse_dynamics(&x.q, &x.dq, &x.ddq).unwrap();
        // e = (M(q) − 0.5 I) q̈ + C q̇ + g
        let expect = (model.inertia(&x.q).unwrap() * &x.ddq - &x.ddq * 0.5)
            + model.coriolis(&x.q, &x.dq).unwrap() * &x.dq
            + model.gravity_torque(&x.q).unwrap();
        let target = DVector::from_fn(2, |i, _| ds.targets()[(k, i)]);
        assert!((&target - &expect).abs().max() < 1e-10);
        assert_eq!(target, compute_mismatch_target(&nominal, &x, &tau).unwrap());
    }
}

#[test]
fn noise_is_reproducible_and_seeded() {
    let model = ManipulatorModel::<f64>::two_link_default();
    let nominal = NominalModel::scaled_identity(2, 0.5).unwrap();
    let cfg = TrainingConfig {
        noise_std: 0.3,
        ..TrainingConfig::default()
    };
    let clean = build_training_set(&model, &nominal, &spec(2), &TrainingConfig::default()).unwrap();
    let a = build_training_set(&model, &nominal, &spec(2), &cfg).unwrap();
    let b = build_training_set(&model, &nominal, &spec(2), &cfg).unwrap();
    assert_eq!(a, b);
    let resid = a.targets() - clean.targets();
    let sd = (resid.iter().map(|v| v * v).sum::<f64>() / resid.len() as f64).sqrt();
    assert!((sd - 0.3).abs() < 0.06, "empirical noise sd {sd}");
}

#[test]
fn dataset_and_reference_csv_are_byte_reproducible() {
    let model = ManipulatorModel::<f64>::two_link_default();
    let nominal = NominalModel::scaled_identity(2, 0.5).unwrap();
    let bytes = |seed| {
        let ds = build_training_set(&model, &nominal, &spec(seed), &TrainingConfig::default()).unwrap();
        let mut out = Vec::new();
        ds.write_csv(&mut out).unwrap();
        out
    };
    assert_eq!(bytes(4), bytes(4));
    assert_ne!(bytes(4), bytes(5));

    let r = ReferenceTrajectory::sample(&spec(4), 2.0, 100.0).unwrap();
    let mut a = Vec::new();
    let mut b = Vec::new();
    r.write_csv(&mut a).unwrap();
    ReferenceTrajectory::sample(&spec(4), 2.0, 100.0).unwrap().write_csv(&mut b).unwrap();
    assert_eq!(a, b);
    let text = String::from_utf8(a).unwrap();
    assert_eq!(text.lines().next().unwrap(), "t,qd1,qd2,dqd1,dqd2,ddqd1,ddqd2");
    assert_eq!(text.lines().count(), 201);
}

#[test]
fn closed_loop_source_collects_tracked_states() {
    let model = ManipulatorModel::<f64>::two_link_default();
    let nominal = NominalModel::scaled_identity(2, 0.5).unwrap();
    let cfg = TrainingConfig {
        duration: 5.0,
        downsample: 10,
        source: gprfl_core::trajectory::TrainingSource::ClosedLoop,
        ..TrainingConfig::default()
    };
    let ds = build_training_set(&model, &nominal, &spec(6), &cfg).unwrap();
    assert_eq!(ds.len(), 50);
    // the true-model loop tracks closely, so inputs sit near the reference
    let s = spec(6);
    for k in 0..ds.len() {
        let d = s.evaluate(k as f64 * 0.1);
        let x = ds.input(k);
        assert!((x.q - d.q).amax() < 0.05);
    }
}
