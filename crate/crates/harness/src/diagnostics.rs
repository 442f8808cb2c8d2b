//! Checks of the robust controller's guarantees along a simulated run.
//!
//! The residual on tick `k` is `e_k − ê_k`, where `e_k` is the mismatch at
//! the acceleration the plant realized under the held torque and `ê_k` is the
//! GP mean the controller used.

use nalgebra::DMatrix;

use crate::experiment::RunRecord;

/// Counts for the Lyapunov decrease condition.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct LyapunovCheck {
    /// Ticks with a successor tick to difference against.
    pub ticks: usize,
    /// Ticks with `‖z‖ ≥ ε` and `ρ > ‖e − ê‖`.
    pub qualifying: usize,
    /// Qualifying ticks on which `V` decreased across the tick.
    pub decreasing: usize,
    /// Qualifying ticks with `dV/dt = 2ξᵀQξ̇ < 0` at the start of the tick.
    pub instant_decreasing: usize,
    pub max_z_norm: f64,
}

impl LyapunovCheck {
    pub fn pass_rate(&self) -> f64 {
        if self.qualifying == 0 {
            return f64::NAN;
        }
        self.decreasing as f64 / self.qualifying as f64
    }

    pub fn merge(&self, other: &Self) -> Self {
        Self {
            ticks: self.ticks + other.ticks,
            qualifying: self.qualifying + other.qualifying,
            decreasing: self.decreasing + other.decreasing,
            instant_decreasing: self.instant_decreasing + other.instant_decreasing,
            max_z_norm: self.max_z_norm.max(other.max_z_norm),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct RhoValidity {
    pub ticks: usize,
    /// Ticks with `ρ ≥ ‖e − ê‖`.
    pub valid: usize,
}

impl RhoValidity {
    pub fn rate(&self) -> f64 {
        if self.ticks == 0 {
            return f64::NAN;
        }
        self.valid as f64 / self.ticks as f64
    }

    pub fn merge(&self, other: &Self) -> Self {
        Self {
            ticks: self.ticks + other.ticks,
            valid: self.valid + other.valid,
        }
    }
}

fn residual_norm(record: &RunRecord, k: usize) -> f64 {
    (&record.mismatch[k] - &record.trace.ticks[k].log.e_hat_mean).norm()
}

/// `q` is the Lyapunov matrix the controller logged `V` with.
pub fn lyapunov_check(record: &RunRecord, epsilon: f64, q: &DMatrix<f64>) -> LyapunovCheck {
    let ticks = &record.trace.ticks;
    let mut out = LyapunovCheck {
        ticks: ticks.len().saturating_sub(1),
        ..Default::default()
    };
    for k in 0..out.ticks {
        let tick = &ticks[k];
        let log = &tick.log;
        out.max_z_norm = out.max_z_norm.max(log.z_norm);
        if log.z_norm >= epsilon && log.rho > residual_norm(record, k) {
            out.qualifying += 1;
            if ticks[k + 1].log.lyapunov - log.lyapunov < 0.0 {
                out.decreasing += 1;
            }
            let xi = stack(&log.q_err, &log.dq_err);
            let xi_dot = stack(&log.dq_err, &(&record.reference.samples[k].ddq - &tick.accel));
            if 2.0 * xi.dot(&(q * xi_dot)) < 0.0 {
                out.instant_decreasing += 1;
            }
        }
    }
    out
}

fn stack(a: &nalgebra::DVector<f64>, b: &nalgebra::DVector<f64>) -> nalgebra::DVector<f64> {
    nalgebra::DVector::from_iterator(a.len() + b.len(), a.iter().chain(b.iter()).copied())
}

pub fn rho_validity(record: &RunRecord) -> RhoValidity {
    let ticks = &record.trace.ticks;
    RhoValidity {
        ticks: ticks.len(),
        valid: (0..ticks.len())
            .filter(|&k| ticks[k].log.rho >= residual_norm(record, k))
            .count(),
    }
}
