//! Runtime invariant suites behind the `validate` subcommand.

use gprfl_core::control::{design_lyapunov, error_dynamics_matrix, GainSpec};
use gprfl_core::dynamics::{simulate, ManipulatorModel, RobotState, SimConfig};
use gprfl_core::gpr::{GpDataset, GpModel, SeKernelParams};
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::HarnessResult;

#[derive(Debug, Clone, PartialEq)]
pub struct SuiteResult {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

impl std::fmt::Display for SuiteResult {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let tag = if self.passed { "PASS" } else { "FAIL" };
        write!(f, "[{tag}] {}: {}", self.name, self.detail)
    }
}

fn suite(name: &'static str, passed: bool, detail: String) -> SuiteResult {
    SuiteResult {
        name,
        passed,
        detail,
    }
}

/// Two-link arm in closed form: mass matrix, Coriolis torque and gravity.
fn two_link_closed_form(
    m: [f64; 2],
    l1: f64,
    lc: [f64; 2],
    inertia: [f64; 2],
    g: f64,
    q: [f64; 2],
    dq: [f64; 2],
) -> (DMatrix<f64>, DVector<f64>, DVector<f64>) {
    let c2 = q[1].cos();
    let m11 = m[0] * lc[0] * lc[0]
        + m[1] * (l1 * l1 + lc[1] * lc[1] + 2.0 * l1 * lc[1] * c2)
        + inertia[0]
        + inertia[1];
    let m12 = m[1] * (lc[1] * lc[1] + l1 * lc[1] * c2) + inertia[1];
    let m22 = m[1] * lc[1] * lc[1] + inertia[1];
    let h = -m[1] * l1 * lc[1] * q[1].sin();
    let cq = DVector::from_vec(vec![
        h * (2.0 * dq[0] * dq[1] + dq[1] * dq[1]),
        -h * dq[0] * dq[0],
    ]);
    let g2 = m[1] * lc[1] * g * (q[0] + q[1]).cos();
    let grav = DVector::from_vec(vec![(m[0] * lc[0] + m[1] * l1) * g * q[0].cos() + g2, g2]);
    (DMatrix::from_row_slice(2, 2, &[m11, m12, m12, m22]), cq, grav)
}

pub fn dynamics_suite(seed: u64) -> HarnessResult<Vec<SuiteResult>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (m, l, lc, inertia, g) = ([1.3, 0.7], [1.1, 0.9], [0.45, 0.4], [0.12, 0.05], 9.81);
    let model = ManipulatorModel::new(m.to_vec(), l.to_vec(), lc.to_vec(), inertia.to_vec(), g)?;
    let mut worst = 0.0f64;
    let mut worst_skew = 0.0f64;
    for _ in 0..100 {
        let q = [rng.random_range(-4.0..4.0), rng.random_range(-4.0..4.0)];
        let dq = [rng.random_range(-3.0..3.0), rng.random_range(-3.0..3.0)];
        let (qv, dqv) = (DVector::from_vec(q.to_vec()), DVector::from_vec(dq.to_vec()));
        let (mo, co, go) = two_link_closed_form(m, l[0], lc, inertia, g, q, dq);
        let c = model.coriolis(&qv, &dqv)?;
        worst = worst
            .max((model.inertia(&qv)? - mo).abs().max())
            .max((&c * &dqv - co).abs().max())
            .max((model.gravity_torque(&qv)? - go).abs().max());
        let h = 1e-6;
        let m_dot = (model.inertia(&(&qv + &dqv * h))? - model.inertia(&(&qv - &dqv * h))?) / (2.0 * h);
        let n = m_dot - &c * 2.0;
        worst_skew = worst_skew.max((&n + n.transpose()).abs().max());
    }
    let init = RobotState::new(DVector::from_vec(vec![0.4, -0.9]), DVector::from_vec(vec![1.5, -2.0]))?;
    let trace = simulate(
        &model,
        |_, _| Ok((DVector::zeros(2), ())),
        init.clone(),
        &SimConfig::new(10.0, 100.0, 10)?,
    )?;
    let e0 = model.total_energy(&init)?;
    let drift = trace
        .ticks
        .iter()
        .map(|t| model.total_energy(&t.state))
        .chain(std::iter::once(model.total_energy(&trace.final_state)))
        .try_fold(0.0f64, |acc, e| e.map(|e| acc.max((e - e0).abs() / e0.abs())))?;
    Ok(vec![
        suite(
            "dynamics: closed-form two-link oracle",
            worst < 1e-8,
            format!("max |M,Cq̇,g − oracle| = {worst:.3e} over 100 states (tol 1e-8)"),
        ),
        suite(
            "dynamics: skew symmetry of Ṁ − 2C",
            worst_skew < 1e-6,
            format!("max residual {worst_skew:.3e} (tol 1e-6)"),
        ),
        suite(
            "dynamics: torque-free energy drift",
            drift < 1e-4,
            format!("relative drift {drift:.3e} over 10 s (tol 1e-4)"),
        ),
    ])
}

fn se(x: &[f64], y: &[f64], p: &SeKernelParams<f64>) -> f64 {
    let s: f64 = x
        .iter()
        .zip(y)
        .zip(p.lengthscales.iter())
        .map(|((a, b), l)| ((a - b) / l).powi(2))
        .sum();
    p.lambda * (-s).exp()
}

pub fn gpr_suite(seed: u64) -> HarnessResult<Vec<SuiteResult>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = 0.0f64;
    for _ in 0..20 {
        let n = rng.random_range(1..=50);
        let noise = rng.random_range(0.05..0.5);
        let inputs = DMatrix::from_fn(n, 6, |_, _| rng.random_range(-2.0..2.0));
        let targets = DMatrix::from_fn(n, 2, |_, _| rng.random_range(-5.0..5.0));
        let params: Vec<SeKernelParams<f64>> = (0..2)
            .map(|_| {
                SeKernelParams::new(
                    rng.random_range(0.5..4.0),
                    DVector::from_fn(6, |_, _| rng.random_range(0.5..3.0)),
                )
            })
            .collect::<Result<_, _>>()?;
        let model = GpModel::from_params(GpDataset::new(inputs.clone(), targets.clone(), noise)?, params)?;
        let pts: Vec<Vec<f64>> = (0..n).map(|i| inputs.row(i).iter().copied().collect()).collect();
        for _ in 0..5 {
            let x: Vec<f64> = (0..6).map(|_| rng.random_range(-2.5..2.5)).collect();
            let (mean, var) = model.predict_slice(&x)?;
            for (i, post) in model.outputs().iter().enumerate() {
                let p = post.params();
                let diag = noise * noise + post.jitter();
                let a = DMatrix::from_fn(n, n, |r, c| se(&pts[r], &pts[c], p) + if r == c { diag } else { 0.0 });
                let Some(a_inv) = a.try_inverse() else {
                    return Ok(vec![suite("gpr: dense inversion oracle", false, "oracle matrix singular".into())]);
                };
                let ks = DVector::from_fn(n, |r, _| se(&pts[r], &x, p));
                let mo = ks.dot(&(&a_inv * targets.column(i)));
                let vo = p.lambda - ks.dot(&(&a_inv * &ks));
                worst = worst.max((mean[i] - mo).abs()).max((var[i] - vo).abs());
            }
        }
    }
    Ok(vec![suite(
        "gpr: dense inversion oracle",
        worst < 1e-8,
        format!("max |posterior − oracle| = {worst:.3e} over 20 datasets (tol 1e-8)"),
    )])
}

pub fn lyapunov_suite() -> HarnessResult<Vec<SuiteResult>> {
    let mut worst = 0.0f64;
    let mut min_eig = f64::INFINITY;
    for &kp in &[0.5, 1.0, 10.0, 50.0, 200.0] {
        for &kd_factor in &[0.5, 1.0, 2.0] {
            let gains = GainSpec::new(kp, kd_factor * 2.0 * f64::sqrt(kp))?;
            for n in 1..=3 {
                let d = design_lyapunov(&gains, n)?;
                worst = worst.max(d.residual(&error_dynamics_matrix(&gains, n)));
                min_eig = min_eig.min(d.q.symmetric_eigenvalues().min());
            }
        }
    }
    Ok(vec![suite(
        "control: Lyapunov equation residual",
        worst < 1e-8 && min_eig > 0.0,
        format!("max ‖H̃ᵀQ + QH̃ + P‖_F = {worst:.3e}, min eig(Q) = {min_eig:.3e}"),
    )])
}

/// Every suite, in order.
pub fn run_all(seed: u64) -> HarnessResult<Vec<SuiteResult>> {
    let mut out = dynamics_suite(seed)?;
    out.extend(gpr_suite(seed)?);
    out.extend(lyapunov_suite()?);
    Ok(out)
}
