use gprfl_core::dynamics::RunTrace;
use gprfl_core::trajectory::ReferenceTrajectory;
use nalgebra::DVector;

use crate::{HarnessError, HarnessResult};

/// Tracking RMSE in degrees.
#[derive(Debug, Clone, PartialEq)]
pub struct Rmse {
    pub per_joint_deg: Vec<f64>,
    pub average_deg: f64,
}

/// Per-joint `sqrt(mean(q̃²))` over a sequence of position errors in radians.
pub fn rmse_from_errors(errors: &[DVector<f64>]) -> HarnessResult<Rmse> {
    let first = errors
        .first()
        .ok_or_else(|| HarnessError::Alignment("no samples".into()))?;
    let n = first.len();
    let mut sums = vec![0.0; n];
    for e in errors {
        if e.len() != n {
            return Err(HarnessError::Alignment("inconsistent joint count".into()));
        }
        for (s, v) in sums.iter_mut().zip(e.iter()) {
            *s += v * v;
        }
    }
    let count = errors.len() as f64;
    let per_joint_deg: Vec<f64> = sums
        .iter()
        .map(|s| (s / count).sqrt().to_degrees())
        .collect();
    let average_deg = per_joint_deg.iter().sum::<f64>() / n as f64;
    Ok(Rmse {
        per_joint_deg,
        average_deg,
    })
}

/// RMSE of `q_d − q` over the control ticks of a run.
pub fn compute_rmse<L>(
    trace: &RunTrace<f64, L>,
    reference: &ReferenceTrajectory<f64>,
) -> HarnessResult<Rmse> {
    if trace.ticks.len() != reference.len() {
        return Err(HarnessError::Alignment(format!(
            "trace has {} ticks, reference has {} samples",
            trace.ticks.len(),
            reference.len()
        )));
    }
    for (tick, t) in trace.ticks.iter().zip(&reference.times) {
        if !((tick.time - t).abs() <= 1e-9 * t.abs().max(1.0)) {
            return Err(HarnessError::Alignment(format!(
                "tick at {} does not match reference time {t}",
                tick.time
            )));
        }
    }
    let errors: Vec<DVector<f64>> = trace
        .ticks
        .iter()
        .zip(&reference.samples)
        .map(|(tick, d)| &d.q - &tick.state.q)
        .collect();
    rmse_from_errors(&errors)
}
