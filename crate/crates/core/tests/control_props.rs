use std::sync::Arc;

use gprfl_core::control::{
    control_gp, control_nominal, control_robust_gp, control_robust_gp_with_rho, control_true,
    design_lyapunov, error_dynamics_matrix, robust_term, sliding_vector, ControlLaw,
    ControllerSpec, GainSpec,
};
use gprfl_core::dynamics::{simulate, ManipulatorModel, NominalModel, RobotState, SimConfig};
use gprfl_core::gpr::{BoundParams, GpDataset, GpModel, SeKernelParams};
use gprfl_core::trajectory::{sample_spec, DesiredState};
use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn rand_vec(rng: &mut ChaCha8Rng, n: usize, r: f64) -> DVector<f64> {
    DVector::from_fn(n, |_, _| rng.random_range(-r..r))
}

fn rand_state(rng: &mut ChaCha8Rng) -> RobotState<f64> {
    RobotState::new(rand_vec(rng, 2, 3.0), rand_vec(rng, 2, 2.0)).unwrap()
}

fn rand_desired(rng: &mut ChaCha8Rng) -> DesiredState<f64> {
    DesiredState {
        q: rand_vec(rng, 2, 3.0),
        dq: rand_vec(rng, 2, 2.0),
        ddq: rand_vec(rng, 2, 2.0),
    }
}

fn small_gp(seed: u64, zero_targets: bool) -> GpModel<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let inputs = DMatrix::from_fn(30, 6, |_, _| rng.random_range(-1.0..1.0));
    let targets = DMatrix::from_fn(30, 2, |i, j| {
        if zero_targets {
            0.0
        } else {
            (inputs.row(i).sum() + j as f64).sin() * 3.0
        }
    });
    let data = GpDataset::new(inputs, targets, 0.05).unwrap();
    let p = SeKernelParams::isotropic(4.0, 0.8, 6).unwrap();
    GpModel::from_params(data, vec![p.clone(), p]).unwrap()
}

fn outer(gains: &GainSpec<f64>, s: &RobotState<f64>, d: &DesiredState<f64>) -> DVector<f64> {
    &d.ddq + (&d.q - &s.q) * gains.kp + (&d.dq - &s.dq) * gains.kd
}

#[test]
fn true_model_law_linearizes_exactly() {
    let model = ManipulatorModel::<f64>::two_link_default();
    let gains = GainSpec::default();
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..200 {
        let s = rand_state(&mut rng);
        let d = rand_desired(&mut rng);
        let tau = control_true(&model, &gains, &s, &d).unwrap();
        let ddq = model.forward_dynamics(&s, &tau).unwrap();
        let a = outer(&gains, &s, &d);
        assert!((ddq - &a).amax() < 1e-9 * a.amax().max(1.0));
    }
}

#[test]
fn nominal_law_is_constant_inertia_times_outer_loop() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    for _ in 0..50 {
        let l = DMatrix::from_fn(2, 2, |r, c| if r >= c { rng.random_range(0.2..2.0) } else { 0.0 });
        let m = &l * l.transpose();
        let nominal = NominalModel::constant_inertia(m.clone()).unwrap();
        let gains = GainSpec::new(rng.random_range(1.0..100.0), rng.random_range(1.0..20.0)).unwrap();
        let s = rand_state(&mut rng);
        let d = rand_desired(&mut rng);
        let tau = control_nominal(&nominal, &gains, &s, &d).unwrap();
        assert!((tau - m * outer(&gains, &s, &d)).amax() < 1e-12);
    }
}

#[test]
fn gp_law_adds_posterior_mean() {
    let gp = small_gp(1, false);
    let nominal = NominalModel::scaled_identity(2, 0.5).unwrap();
    let gains = GainSpec::default();
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    for _ in 0..50 {
        let s = RobotState::new(rand_vec(&mut rng, 2, 1.0), rand_vec(&mut rng, 2, 1.0)).unwrap();
        let d = rand_desired(&mut rng);
        let ddq = rand_vec(&mut rng, 2, 1.0);
        let tau = control_gp(&nominal, &gp, &gains, &s, &d, &ddq).unwrap();
        let x: Vec<f64> = s.q.iter().chain(s.dq.iter()).chain(ddq.iter()).copied().collect();
        let (mean, _) = gp.predict_slice(&x).unwrap();
        assert!(mean.amax() > 1e-3);
        let base = control_nominal(&nominal, &gains, &s, &d).unwrap();
        assert!((tau - base - mean).amax() < 1e-12);
    }
}

#[test]
fn gp_trained_on_zero_mismatch_leaves_nominal_law() {
    let gp = small_gp(2, true);
    let nominal = NominalModel::scaled_identity(2, 0.5).unwrap();
    let gains = GainSpec::default();
    let mut rng = ChaCha8Rng::seed_from_u64(14);
    for _ in 0..20 {
        let s = rand_state(&mut rng);
        let d = rand_desired(&mut rng);
        let ddq = rand_vec(&mut rng, 2, 1.0);
        let tau = control_gp(&nominal, &gp, &gains, &s, &d, &ddq).unwrap();
        assert_eq!(tau, control_nominal(&nominal, &gains, &s, &d).unwrap());
    }
}

#[test]
fn gp_law_reverts_to_nominal_far_from_data() {
    let gp = small_gp(3, false);
    let nominal = NominalModel::scaled_identity(2, 0.5).unwrap();
    let gains = GainSpec::default();
    let s = RobotState::new(DVector::from_element(2, 40.0), DVector::from_element(2, -40.0)).unwrap();
    let d = DesiredState {
        q: DVector::zeros(2),
        dq: DVector::zeros(2),
        ddq: DVector::zeros(2),
    };
    let tau = control_gp(&nominal, &gp, &gains, &s, &d, &DVector::from_element(2, 40.0)).unwrap();
    assert!((tau - control_nominal(&nominal, &gains, &s, &d).unwrap()).amax() < 1e-9);
}

#[test]
fn zero_error_gives_zero_robust_term() {
    let gp = small_gp(4, false);
    let nominal = NominalModel::scaled_identity(2, 0.5).unwrap();
    let gains = GainSpec::default();
    let lyap = design_lyapunov(&gains, 2).unwrap();
    let bounds = BoundParams::uniform(3.0, 2).unwrap();
    let s = RobotState::new(DVector::from_vec(vec![0.3, -0.2]), DVector::from_vec(vec![0.1, 0.4])).unwrap();
    let d = DesiredState {
        q: s.q.clone(),
        dq: s.dq.clone(),
        ddq: DVector::from_vec(vec![0.5, -0.5]),
    };
    let (tau, log) =
        control_robust_gp(&nominal, &gp, &gains, &lyap, &bounds, 0.5, &s, &d, &d.ddq).unwrap();
    assert!(log.rho > 0.0);
    assert_eq!(log.w, DVector::zeros(2));
    assert_eq!(log.z_norm, 0.0);
    assert_eq!(tau, control_gp(&nominal, &gp, &gains, &s, &d, &d.ddq).unwrap());
}

#[test]
fn robust_term_is_continuous_at_boundary_layer() {
    let eps = 0.5f64;
    let rho = 2.0f64;
    let dir = DVector::from_vec(vec![0.6, 0.8]);
    let at = robust_term(rho, &(&dir * eps), eps);
    let inside = robust_term(rho, &(&dir * (eps * (1.0 - 1e-10))), eps);
    let outside = robust_term(rho, &(&dir * (eps * (1.0 + 1e-10))), eps);
    assert!((&at - &dir * rho).amax() < 1e-15);
    assert!((&inside - &at).amax() < 1e-9);
    assert!((&outside - &at).amax() < 1e-9);
    // inside the layer the term is linear in z
    let half = robust_term(rho, &(&dir * 0.25), eps);
    assert!((half - &dir * (rho * 0.25 / eps)).amax() < 1e-15);
    // outside it saturates at magnitude rho
    assert!((robust_term(rho, &(&dir * 7.0), eps).norm() - rho).abs() < 1e-14);
}

#[test]
fn sliding_vector_hand_case() {
    // kp = kd = 1: per joint Q = [[3/2, 1/2], [1/2, 1]], so the velocity rows
    // of Qξ are q̃/2 + q̃̇ and z = 2(q̃/2 + q̃̇) = q̃ + 2q̃̇ with M̂ = I/2.
    let gains = GainSpec::new(1.0f64, 1.0).unwrap();
    let lyap = design_lyapunov(&gains, 2).unwrap();
    let nominal = NominalModel::scaled_identity(2, 0.5).unwrap();
    let s = RobotState::zeros(2);
    let qe = DVector::from_vec(vec![0.4f64, -1.0]);
    let dqe = DVector::from_vec(vec![0.25f64, 0.5]);
    let xi = DVector::from_vec(vec![qe[0], qe[1], dqe[0], dqe[1]]);
    let z = sliding_vector(&nominal, &lyap, &s, &xi).unwrap();
    let expect = &qe + &dqe * 2.0;
    assert!((&z - &expect).amax() < 1e-12);

    let w = robust_term(1.5, &z, 0.1);
    assert!((w - &expect * (1.5 / expect.norm())).amax() < 1e-12);
}

#[test]
fn zero_rho_matches_gp_law_exactly() {
    let gp = small_gp(5, false);
    let nominal = NominalModel::scaled_identity(2, 0.5).unwrap();
    let gains = GainSpec::default();
    let lyap = design_lyapunov(&gains, 2).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(15);
    for _ in 0..20 {
        let s = rand_state(&mut rng);
        let d = rand_desired(&mut rng);
        let ddq = rand_vec(&mut rng, 2, 1.0);
        let (tau, log) =
            control_robust_gp_with_rho(&nominal, &gp, &gains, &lyap, 0.5, &s, &d, &ddq, 0.0).unwrap();
        assert_eq!(log.w, DVector::zeros(2));
        assert_eq!(tau, control_gp(&nominal, &gp, &gains, &s, &d, &ddq).unwrap());
    }
}

#[test]
fn robust_term_bounded_by_rho_with_perfect_model() {
    let model = ManipulatorModel::<f64>::two_link_default();
    let nominal = NominalModel::Rigid(model);
    let gp = small_gp(6, true);
    let gains = GainSpec::default();
    let lyap = design_lyapunov(&gains, 2).unwrap();
    let bounds = BoundParams::uniform(2.0, 2).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(16);
    for _ in 0..200 {
        let s = rand_state(&mut rng);
        let d = rand_desired(&mut rng);
        let ddq = rand_vec(&mut rng, 2, 2.0);
        let (_, log) =
            control_robust_gp(&nominal, &gp, &gains, &lyap, &bounds, 0.05, &s, &d, &ddq).unwrap();
        assert!(log.w.norm() <= log.rho * (1.0 + 1e-12));
        assert_eq!(log.e_hat_mean, DVector::zeros(2));
    }
}

proptest! {
    #[test]
    fn lyapunov_solution_satisfies_equation(kp in 0.5f64..200.0, kd in 0.5f64..40.0, n in 1usize..4) {
        let gains = GainSpec::new(kp, kd).unwrap();
        let d = design_lyapunov(&gains, n).unwrap();
        let h = error_dynamics_matrix(&gains, n);
        let scale = d.q.amax().max(1.0);
        prop_assert!(d.residual(&h) < 1e-9 * scale);
        prop_assert!((&d.q - d.q.transpose()).amax() < 1e-12 * scale);
        prop_assert!(d.q.clone().cholesky().is_some());
    }

    #[test]
    fn robust_term_never_exceeds_rho(
        rho in 0.0f64..50.0,
        eps in 0.0f64..2.0,
        z in proptest::collection::vec(-5.0f64..5.0, 1..5),
    ) {
        let w = robust_term(rho, &DVector::from_vec(z), eps);
        prop_assert!(w.norm() <= rho * (1.0 + 1e-12));
    }
}

#[test]
fn controller_commands_are_pure() {
    let gp = Arc::new(small_gp(7, false));
    let spec = ControllerSpec::new(
        ControlLaw::RobustGp {
            nominal: NominalModel::scaled_identity(2, 0.5).unwrap(),
            gp,
            bounds: BoundParams::uniform(3.0, 2).unwrap(),
            epsilon: 0.5,
        },
        GainSpec::default(),
    )
    .unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    let s = rand_state(&mut rng);
    let d = rand_desired(&mut rng);
    let first = spec.command(1.25, &s, &d).unwrap();
    for _ in 0..5 {
        let again = spec.command(1.25, &s, &d).unwrap();
        assert_eq!(first.0, again.0);
        assert_eq!(first.1, again.1);
    }
}

#[test]
fn true_model_error_decays_like_critically_damped_system() {
    let model = ManipulatorModel::<f64>::two_link_default();
    let gains = GainSpec::default();
    let controller = ControllerSpec::new(ControlLaw::TrueModel(model.clone()), gains).unwrap();
    let spec = sample_spec(3, 2, 5, 0.1 * std::f64::consts::PI, 0.3 * std::f64::consts::PI).unwrap();
    let start = spec.evaluate(0.0);
    let offset = DVector::from_vec(vec![0.3, -0.2]);
    let init = RobotState::new(&start.q + &offset, start.dq.clone()).unwrap();
    let sim = SimConfig::new(2.0, 1000.0, 4).unwrap();
    let trace = simulate(&model, |t, s| controller.command(t, s, &spec.evaluate(t)), init, &sim).unwrap();
    // q̃(t) = q̃(0)(1 + ωt)e^{−ωt} for kd = 2ω, kp = ω²
    let w = gains.kp.sqrt();
    for tick in trace.ticks.iter().step_by(50) {
        let t = tick.time;
        let expect = -&offset * ((1.0 + w * t) * (-w * t).exp());
        let err = (&tick.log.q_err - expect).amax();
        assert!(err < 5e-3 * offset.amax(), "t = {t}: deviation {err}");
    }
    let last = trace.ticks.last().unwrap();
    assert!(last.log.lyapunov < 1e-6 * trace.ticks[0].log.lyapunov);
}
