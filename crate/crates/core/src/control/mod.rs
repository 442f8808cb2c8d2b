//! Feedback-linearizing tracking controllers.
//!
//! All laws share the outer loop `a = q̈_d + K_P q̃ + K_D q̃̇` with
//! `q̃ = q_d − q`. They differ in the model used to map `a` to torque:
//!
//! - true model: `τ = M(q) a + C q̇ + g`
//! - nominal: `τ = M̂(q) a + n̂`
//! - GP-compensated: `τ = M̂(q) a + n̂ + ê`
//! - robust GP: `τ = M̂(q) a + n̂ + ê + w`, with `w = ρ z/‖z‖` outside the
//!   boundary layer `‖z‖ < ε` and `ρ z/ε` inside, `z = M̂⁻¹ Dᵀ Q ξ`.

mod lyapunov;

use std::sync::Arc;

use nalgebra::DVector;

use crate::dynamics::{ManipulatorModel, NominalModel, RobotState};
use crate::error::{check_dim, Error, Result};
use crate::gpr::{rho_from_posterior, BoundParams, GpInput, GpModel};
use crate::scalar::{lit, Real};
use crate::trajectory::DesiredState;

pub use lyapunov::{
    design_lyapunov, design_lyapunov_with, error_dynamics_matrix, solve_continuous_lyapunov,
    LyapunovDesign,
};

/// Diagonal PD gains `K_P = kp·I`, `K_D = kd·I`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GainSpec<T: Real> {
    pub kp: T,
    pub kd: T,
}

impl<T: Real> GainSpec<T> {
    pub fn new(kp: T, kd: T) -> Result<Self> {
        if !(kp > T::zero()) || !(kd > T::zero()) || !kp.is_finite() || !kd.is_finite() {
            return Err(Error::InvalidParameter("kp and kd must be positive".into()));
        }
        Ok(Self { kp, kd })
    }

    /// `kd = 2·sqrt(kp)`.
    pub fn critically_damped(kp: T) -> Result<Self> {
        Self::new(kp, lit::<T>(2.0) * kp.sqrt())
    }
}

impl<T: Real> Default for GainSpec<T> {
    fn default() -> Self {
        Self::critically_damped(lit(50.0)).expect("default gains are valid")
    }
}

/// Position and velocity tracking errors `(q_d − q, q̇_d − q̇)`.
pub fn tracking_errors<T: Real>(
    state: &RobotState<T>,
    desired: &DesiredState<T>,
) -> Result<(DVector<T>, DVector<T>)> {
    check_dim("desired position", state.n_joints(), desired.q.len())?;
    check_dim("desired velocity", state.n_joints(), desired.dq.len())?;
    check_dim("desired acceleration", state.n_joints(), desired.ddq.len())?;
    Ok((&desired.q - &state.q, &desired.dq - &state.dq))
}

/// The commanded auxiliary acceleration `a = q̈_d + K_P q̃ + K_D q̃̇`, used as
/// the acceleration component of the GP query.
pub fn gp_query_acceleration<T: Real>(
    desired_ddq: &DVector<T>,
    q_err: &DVector<T>,
    dq_err: &DVector<T>,
    gains: &GainSpec<T>,
) -> DVector<T> {
    desired_ddq + q_err * gains.kp + dq_err * gains.kd
}

fn outer_loop<T: Real>(
    gains: &GainSpec<T>,
    state: &RobotState<T>,
    desired: &DesiredState<T>,
) -> Result<DVector<T>> {
    let (e, de) = tracking_errors(state, desired)?;
    Ok(gp_query_acceleration(&desired.ddq, &e, &de, gains))
}

pub fn control_true<T: Real>(
    model: &ManipulatorModel<T>,
    gains: &GainSpec<T>,
    state: &RobotState<T>,
    desired: &DesiredState<T>,
) -> Result<DVector<T>> {
    let a = outer_loop(gains, state, desired)?;
    model.inverse_dynamics(&state.q, &state.dq, &a)
}

pub fn control_nominal<T: Real>(
    nominal: &NominalModel<T>,
    gains: &GainSpec<T>,
    state: &RobotState<T>,
    desired: &DesiredState<T>,
) -> Result<DVector<T>> {
    let a = outer_loop(gains, state, desired)?;
    Ok(nominal.inertia(&state.q)? * a + nominal.bias(&state.q, &state.dq)?)
}

fn gp_query<T: Real>(state: &RobotState<T>, ddq: &DVector<T>) -> Result<GpInput<T>> {
    GpInput::new(state.q.clone(), state.dq.clone(), ddq.clone())
}

/// Nominal law plus the GP posterior mean at `(q, q̇, ddq_for_gp)`.
pub fn control_gp<T: Real>(
    nominal: &NominalModel<T>,
    gp: &GpModel<T>,
    gains: &GainSpec<T>,
    state: &RobotState<T>,
    desired: &DesiredState<T>,
    ddq_for_gp: &DVector<T>,
) -> Result<DVector<T>> {
    let (mean, _) = gp.predict(&gp_query(state, ddq_for_gp)?)?;
    Ok(control_nominal(nominal, gains, state, desired)? + mean)
}

/// `w = ρ z/‖z‖` for `‖z‖ ≥ ε`, `ρ z/ε` inside the boundary layer, and zero
/// when `z = 0`.
pub fn robust_term<T: Real>(rho: T, z: &DVector<T>, epsilon: T) -> DVector<T> {
    let norm = z.norm();
    if norm == T::zero() {
        return DVector::zeros(z.len());
    }
    let scale = if norm >= epsilon { norm } else { epsilon };
    z * (rho / scale)
}

/// `z = M̂(q)⁻¹ Dᵀ Q ξ`, with `Dᵀ` selecting the velocity block.
pub fn sliding_vector<T: Real>(
    nominal: &NominalModel<T>,
    lyapunov: &LyapunovDesign<T>,
    state: &RobotState<T>,
    xi: &DVector<T>,
) -> Result<DVector<T>> {
    let n = state.n_joints();
    check_dim("error vector", 2 * n, xi.len())?;
    check_dim("Lyapunov matrix", 2 * n, lyapunov.q.nrows())?;
    let qxi = &lyapunov.q * xi;
    let lower = qxi.rows(n, n).into_owned();
    let chol = nominal
        .inertia(&state.q)?
        .cholesky()
        .ok_or(Error::NotPositiveDefinite("nominal inertia"))?;
    Ok(chol.solve(&lower))
}

/// Diagnostics recorded at each control tick.
#[derive(Debug, Clone, PartialEq)]
pub struct ControlTickLog<T: Real> {
    pub time: T,
    pub q: DVector<T>,
    pub dq: DVector<T>,
    pub q_err: DVector<T>,
    pub dq_err: DVector<T>,
    pub tau: DVector<T>,
    /// Robust bound; zero for laws without a robust term.
    pub rho: T,
    /// GP posterior at the query; zeros for laws without a GP.
    pub e_hat_mean: DVector<T>,
    pub e_hat_var: DVector<T>,
    /// Auxiliary acceleration `a` (the GP query acceleration).
    pub aux_accel: DVector<T>,
    /// `ξᵀQξ`.
    pub lyapunov: T,
    pub z_norm: T,
    pub w: DVector<T>,
}

/// Robust GP law returning the torque and its tick log.
#[allow(clippy::too_many_arguments)]
pub fn control_robust_gp<T: Real>(
    nominal: &NominalModel<T>,
    gp: &GpModel<T>,
    gains: &GainSpec<T>,
    lyapunov: &LyapunovDesign<T>,
    bounds: &BoundParams<T>,
    epsilon: T,
    state: &RobotState<T>,
    desired: &DesiredState<T>,
    ddq_for_gp: &DVector<T>,
) -> Result<(DVector<T>, ControlTickLog<T>)> {
    robust_gp_impl(
        nominal, gp, gains, lyapunov, bounds, epsilon, state, desired, ddq_for_gp, None,
    )
}

/// [`control_robust_gp`] with `ρ` replaced by a fixed value.
#[allow(clippy::too_many_arguments)]
pub fn control_robust_gp_with_rho<T: Real>(
    nominal: &NominalModel<T>,
    gp: &GpModel<T>,
    gains: &GainSpec<T>,
    lyapunov: &LyapunovDesign<T>,
    epsilon: T,
    state: &RobotState<T>,
    desired: &DesiredState<T>,
    ddq_for_gp: &DVector<T>,
    rho: T,
) -> Result<(DVector<T>, ControlTickLog<T>)> {
    let bounds = BoundParams::uniform(T::one(), gp.n_outputs())?;
    robust_gp_impl(
        nominal, gp, gains, lyapunov, &bounds, epsilon, state, desired, ddq_for_gp, Some(rho),
    )
}

#[allow(clippy::too_many_arguments)]
fn robust_gp_impl<T: Real>(
    nominal: &NominalModel<T>,
    gp: &GpModel<T>,
    gains: &GainSpec<T>,
    lyapunov: &LyapunovDesign<T>,
    bounds: &BoundParams<T>,
    epsilon: T,
    state: &RobotState<T>,
    desired: &DesiredState<T>,
    ddq_for_gp: &DVector<T>,
    rho_override: Option<T>,
) -> Result<(DVector<T>, ControlTickLog<T>)> {
    if !(epsilon >= T::zero()) {
        return Err(Error::InvalidParameter("boundary layer epsilon must be >= 0".into()));
    }
    let (q_err, dq_err) = tracking_errors(state, desired)?;
    let a = gp_query_acceleration(&desired.ddq, &q_err, &dq_err, gains);
    let (mean, var) = gp.predict(&gp_query(state, ddq_for_gp)?)?;
    let rho = match rho_override {
        Some(r) => r,
        None => rho_from_posterior(&mean, &var, bounds)?.0,
    };
    if !rho.is_finite() {
        return Err(Error::NonFiniteRho);
    }
    let xi = stack(&q_err, &dq_err);
    let z = sliding_vector(nominal, lyapunov, state, &xi)?;
    let w = robust_term(rho, &z, epsilon);
    let tau = nominal.inertia(&state.q)? * &a + nominal.bias(&state.q, &state.dq)? + &mean + &w;
    let log = ControlTickLog {
        time: T::zero(),
        q: state.q.clone(),
        dq: state.dq.clone(),
        q_err,
        dq_err,
        tau: tau.clone(),
        rho,
        e_hat_mean: mean,
        e_hat_var: var,
        aux_accel: a,
        lyapunov: lyapunov.value(&xi),
        z_norm: z.norm(),
        w,
    };
    Ok((tau, log))
}

pub(crate) fn stack<T: Real>(a: &DVector<T>, b: &DVector<T>) -> DVector<T> {
    DVector::from_iterator(a.len() + b.len(), a.iter().chain(b.iter()).copied())
}

/// Which of the four laws a controller runs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ControllerVariant {
    TrueModel,
    Nominal,
    GpCompensated,
    RobustGp,
}

impl ControllerVariant {
    pub const ALL: [Self; 4] = [Self::TrueModel, Self::Nominal, Self::GpCompensated, Self::RobustGp];

    pub fn name(self) -> &'static str {
        match self {
            Self::TrueModel => "true",
            Self::Nominal => "nominal",
            Self::GpCompensated => "gp",
            Self::RobustGp => "robust_gp",
        }
    }

    pub fn from_name(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|v| v.name() == s)
    }

    pub fn uses_gp(self) -> bool {
        matches!(self, Self::GpCompensated | Self::RobustGp)
    }
}

impl std::fmt::Display for ControllerVariant {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// A control law together with everything it needs.
#[derive(Debug, Clone)]
pub enum ControlLaw<T: Real> {
    TrueModel(ManipulatorModel<T>),
    Nominal(NominalModel<T>),
    GpCompensated {
        nominal: NominalModel<T>,
        gp: Arc<GpModel<T>>,
    },
    RobustGp {
        nominal: NominalModel<T>,
        gp: Arc<GpModel<T>>,
        bounds: BoundParams<T>,
        epsilon: T,
    },
}

#[derive(Debug, Clone)]
pub struct ControllerSpec<T: Real> {
    pub law: ControlLaw<T>,
    pub gains: GainSpec<T>,
    /// Used by the robust term and for logging `V(ξ)` under every law.
    pub lyapunov: LyapunovDesign<T>,
}

impl<T: Real> ControllerSpec<T> {
    pub fn new(law: ControlLaw<T>, gains: GainSpec<T>) -> Result<Self> {
        let n = match &law {
            ControlLaw::TrueModel(m) => m.n_joints(),
            ControlLaw::Nominal(n) => n.n_joints(),
            ControlLaw::GpCompensated { nominal, gp } => {
                check_dim("GP outputs", nominal.n_joints(), gp.n_outputs())?;
                nominal.n_joints()
            }
            ControlLaw::RobustGp {
                nominal,
                gp,
                bounds,
                epsilon,
            } => {
                check_dim("GP outputs", nominal.n_joints(), gp.n_outputs())?;
                check_dim("beta per output", nominal.n_joints(), bounds.beta.len())?;
                if !(*epsilon >= T::zero()) {
                    return Err(Error::InvalidParameter("epsilon must be >= 0".into()));
                }
                nominal.n_joints()
            }
        };
        let lyapunov = design_lyapunov(&gains, n)?;
        Ok(Self {
            law,
            gains,
            lyapunov,
        })
    }

    pub fn variant(&self) -> ControllerVariant {
        match self.law {
            ControlLaw::TrueModel(_) => ControllerVariant::TrueModel,
            ControlLaw::Nominal(_) => ControllerVariant::Nominal,
            ControlLaw::GpCompensated { .. } => ControllerVariant::GpCompensated,
            ControlLaw::RobustGp { .. } => ControllerVariant::RobustGp,
        }
    }

    /// Torque for the current state and reference, with its log entry.
    pub fn command(
        &self,
        time: T,
        state: &RobotState<T>,
        desired: &DesiredState<T>,
    ) -> Result<(DVector<T>, ControlTickLog<T>)> {
        let gains = &self.gains;
        let (q_err, dq_err) = tracking_errors(state, desired)?;
        let a = gp_query_acceleration(&desired.ddq, &q_err, &dq_err, gains);
        let n = state.n_joints();
        let xi = stack(&q_err, &dq_err);
        let basic = |tau: DVector<T>, mean: DVector<T>, var: DVector<T>| ControlTickLog {
            time,
            q: state.q.clone(),
            dq: state.dq.clone(),
            q_err: q_err.clone(),
            dq_err: dq_err.clone(),
            tau,
            rho: T::zero(),
            e_hat_mean: mean,
            e_hat_var: var,
            aux_accel: a.clone(),
            lyapunov: self.lyapunov.value(&xi),
            z_norm: T::zero(),
            w: DVector::zeros(n),
        };
        match &self.law {
            ControlLaw::TrueModel(model) => {
                let tau = control_true(model, gains, state, desired)?;
                Ok((tau.clone(), basic(tau, DVector::zeros(n), DVector::zeros(n))))
            }
            ControlLaw::Nominal(nominal) => {
                let tau = control_nominal(nominal, gains, state, desired)?;
                Ok((tau.clone(), basic(tau, DVector::zeros(n), DVector::zeros(n))))
            }
            ControlLaw::GpCompensated { nominal, gp } => {
                let (mean, var) = gp.predict(&gp_query(state, &a)?)?;
                let tau = control_nominal(nominal, gains, state, desired)? + &mean;
                Ok((tau.clone(), basic(tau, mean, var)))
            }
            ControlLaw::RobustGp {
                nominal,
                gp,
                bounds,
                epsilon,
            } => {
                let (tau, mut log) = control_robust_gp(
                    nominal,
                    gp,
                    gains,
                    &self.lyapunov,
                    bounds,
                    *epsilon,
                    state,
                    desired,
                    &a,
                )?;
                log.time = time;
                Ok((tau, log))
            }
        }
    }
}
