use nalgebra::DVector;

use super::{ManipulatorModel, RobotState};
use crate::error::{Error, Result};
use crate::scalar::{lit, Real};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimConfig<T: Real> {
    /// Horizon in seconds.
    pub duration: T,
    /// Control ticks per second.
    pub control_rate: T,
    /// RK4 steps per control tick.
    pub substeps: usize,
}

impl<T: Real> SimConfig<T> {
    pub fn new(duration: T, control_rate: T, substeps: usize) -> Result<Self> {
        if !(duration > T::zero()) || !(control_rate > T::zero()) || substeps == 0 {
            return Err(Error::InvalidParameter(
                "duration and control rate must be positive, substeps at least 1".into(),
            ));
        }
        Ok(Self {
            duration,
            control_rate,
            substeps,
        })
    }

    pub fn tick_period(&self) -> T {
        T::one() / self.control_rate
    }

    /// Number of control ticks, `round(duration · rate)`.
    pub fn n_ticks(&self) -> usize {
        (self.duration * self.control_rate)
            .round()
            .to_usize()
            .unwrap_or(0)
    }
}

/// One control tick: the state sampled at `time`, the torque held until the
/// next tick, the acceleration that torque produced at `time`, and whatever
/// the controller chose to log.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceTick<T: Real, L> {
    pub time: T,
    pub state: RobotState<T>,
    pub tau: DVector<T>,
    pub accel: DVector<T>,
    pub log: L,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunTrace<T: Real, L> {
    pub ticks: Vec<TraceTick<T, L>>,
    pub final_time: T,
    pub final_state: RobotState<T>,
}

impl<T: Real, L> RunTrace<T, L> {
    /// State at the start of tick `k + 1` (the final state for the last tick).
    pub fn next_state(&self, k: usize) -> &RobotState<T> {
        self.ticks
            .get(k + 1)
            .map(|t| &t.state)
            .unwrap_or(&self.final_state)
    }
}

fn derivative<T: Real>(
    model: &ManipulatorModel<T>,
    state: &RobotState<T>,
    tau: &DVector<T>,
) -> Result<(DVector<T>, DVector<T>)> {
    let acc = model.forward_dynamics(state, tau)?;
    Ok((state.dq.clone(), acc))
}

fn rk4_step<T: Real>(
    model: &ManipulatorModel<T>,
    state: &RobotState<T>,
    tau: &DVector<T>,
    h: T,
) -> Result<RobotState<T>> {
    let half = h * lit(0.5);
    let shifted = |dq: &DVector<T>, ddq: &DVector<T>, s: T| RobotState {
        q: &state.q + dq * s,
        dq: &state.dq + ddq * s,
    };
    let (k1q, k1v) = derivative(model, state, tau)?;
    let (k2q, k2v) = derivative(model, &shifted(&k1q, &k1v, half), tau)?;
    let (k3q, k3v) = derivative(model, &shifted(&k2q, &k2v, half), tau)?;
    let (k4q, k4v) = derivative(model, &shifted(&k3q, &k3v, h), tau)?;
    let w = h / lit(6.0);
    let two: T = lit(2.0);
    Ok(RobotState {
        q: &state.q + (k1q + k2q * two + k3q * two + k4q) * w,
        dq: &state.dq + (k1v + k2v * two + k3v * two + k4v) * w,
    })
}

/// Runs a discrete-time controller against the continuous arm dynamics.
///
/// The controller is sampled once per tick and its torque is held constant
/// over the tick while RK4 advances the state with `substeps` equal steps.
pub fn simulate<T, L, F>(
    model: &ManipulatorModel<T>,
    mut controller: F,
    initial: RobotState<T>,
    config: &SimConfig<T>,
) -> Result<RunTrace<T, L>>
where
    T: Real,
    F: FnMut(T, &RobotState<T>) -> Result<(DVector<T>, L)>,
{
    if initial.n_joints() != model.n_joints() {
        return Err(Error::Dimension {
            what: "initial state",
            expected: model.n_joints(),
            got: initial.n_joints(),
        });
    }
    let n_ticks = config.n_ticks();
    let dt = config.tick_period();
    let h = dt / T::from_usize(config.substeps).expect("substeps fit in scalar");

    let mut ticks = Vec::with_capacity(n_ticks);
    let mut state = initial;
    for k in 0..n_ticks {
        if !state.is_finite() {
            return Err(Error::NonFiniteState { tick: k });
        }
        let time = dt * T::from_usize(k).expect("tick index fits in scalar");
        let (tau, log) = controller(time, &state)?;
        if tau.len() != model.n_joints() || tau.iter().any(|x| !x.is_finite()) {
            return Err(Error::NonFiniteTorque { tick: k });
        }
        let accel = model.forward_dynamics(&state, &tau)?;
        let mut next = state.clone();
        for _ in 0..config.substeps {
            next = rk4_step(model, &next, &tau, h)?;
        }
        ticks.push(TraceTick {
            time,
            state,
            tau,
            accel,
            log,
        });
        state = next;
    }
    if !state.is_finite() {
        return Err(Error::NonFiniteState { tick: n_ticks });
    }
    Ok(RunTrace {
        ticks,
        final_time: dt * T::from_usize(n_ticks).expect("tick count fits in scalar"),
        final_state: state,
    })
}
