//! Sum-of-sinusoids reference trajectories and training-set construction.
//!
//! RNG stream discipline: a spec with seed `s` draws its frequencies from
//! `ChaCha8Rng::seed_from_u64(s)` on stream 0, joint-major (all sinusoids of
//! joint 1, then joint 2, ...). Training-target noise uses the same seed on
//! stream 1, sample-major.

use std::io::Write;

use nalgebra::DVector;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, Uniform};

use crate::dynamics::{simulate, ManipulatorModel, NominalModel, RobotState, SimConfig};
use crate::error::{Error, Result};
use crate::gpr::{compute_mismatch_target, GpDataset, GpInput};
use crate::scalar::{lit, to_f64, Real};

pub const DEFAULT_OMEGA_MIN: f64 = 0.1 * std::f64::consts::PI;
pub const DEFAULT_OMEGA_MAX: f64 = 0.3 * std::f64::consts::PI;
pub const DEFAULT_SINUSOIDS: usize = 5;

/// Desired position, velocity and acceleration at one instant.
#[derive(Debug, Clone, PartialEq)]
pub struct DesiredState<T: Real> {
    pub q: DVector<T>,
    pub dq: DVector<T>,
    pub ddq: DVector<T>,
}

/// `q_d,j(t) = (2π / N_s) Σ_i sin(ω_{j,i} t)` for each joint `j`.
#[derive(Debug, Clone, PartialEq)]
pub struct SinusoidSpec<T: Real> {
    /// `frequencies[j]` holds the `N_s` angular frequencies of joint `j`.
    pub frequencies: Vec<Vec<T>>,
    pub amplitude: T,
    pub seed: u64,
}

fn rng_for(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Draws `n_joints × n_sinusoids` i.i.d. frequencies, uniform on
/// `[omega_min, omega_max]`.
pub fn sample_spec<T: Real>(
    seed: u64,
    n_joints: usize,
    n_sinusoids: usize,
    omega_min: T,
    omega_max: T,
) -> Result<SinusoidSpec<T>> {
    if !(omega_min < omega_max) || !omega_min.is_finite() || !omega_max.is_finite() {
        return Err(Error::InvalidParameter("need omega_min < omega_max".into()));
    }
    if n_sinusoids == 0 || n_joints == 0 {
        return Err(Error::InvalidParameter("need at least one joint and one sinusoid".into()));
    }
    let dist = Uniform::new_inclusive(to_f64(omega_min), to_f64(omega_max))
        .map_err(|e| Error::InvalidParameter(e.to_string()))?;
    let mut rng = rng_for(seed, 0);
    let frequencies = (0..n_joints)
        .map(|_| (0..n_sinusoids).map(|_| lit(dist.sample(&mut rng))).collect())
        .collect();
    Ok(SinusoidSpec {
        frequencies,
        amplitude: T::two_pi() / T::from_usize(n_sinusoids).expect("count fits in scalar"),
        seed,
    })
}

impl<T: Real> SinusoidSpec<T> {
    pub fn n_joints(&self) -> usize {
        self.frequencies.len()
    }

    /// Position with its analytic first and second derivatives.
    pub fn evaluate(&self, t: T) -> DesiredState<T> {
        let n = self.n_joints();
        let mut q = DVector::zeros(n);
        let mut dq = DVector::zeros(n);
        let mut ddq = DVector::zeros(n);
        for (j, freqs) in self.frequencies.iter().enumerate() {
            for &w in freqs {
                let (s, c) = (w * t).sin_cos();
                q[j] += s;
                dq[j] += w * c;
                ddq[j] -= w * w * s;
            }
        }
        DesiredState {
            q: q * self.amplitude,
            dq: dq * self.amplitude,
            ddq: ddq * self.amplitude,
        }
    }
}

/// Reference sampled on a uniform tick grid `t_k = k / rate`.
#[derive(Debug, Clone, PartialEq)]
pub struct ReferenceTrajectory<T: Real> {
    pub times: Vec<T>,
    pub samples: Vec<DesiredState<T>>,
}

impl<T: Real> ReferenceTrajectory<T> {
    pub fn sample(spec: &SinusoidSpec<T>, duration: T, rate: T) -> Result<Self> {
        let cfg = SimConfig::new(duration, rate, 1)?;
        let dt = cfg.tick_period();
        let times: Vec<T> = (0..cfg.n_ticks())
            .map(|k| dt * T::from_usize(k).expect("tick fits in scalar"))
            .collect();
        let samples = times.iter().map(|&t| spec.evaluate(t)).collect();
        Ok(Self { times, samples })
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    /// Columns `t, qd1.., dqd1.., ddqd1..`.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let n = self.samples.first().map_or(0, |s| s.q.len());
        let mut w = csv::Writer::from_writer(writer);
        let mut header = vec!["t".to_string()];
        for prefix in ["qd", "dqd", "ddqd"] {
            header.extend((1..=n).map(|j| format!("{prefix}{j}")));
        }
        w.write_record(&header)?;
        for (t, s) in self.times.iter().zip(&self.samples) {
            let row: Vec<String> = std::iter::once(t)
                .chain(s.q.iter())
                .chain(s.dq.iter())
                .chain(s.ddq.iter())
                .map(|v| v.to_string())
                .collect();
            w.write_record(&row)?;
        }
        w.flush().map_err(|e| Error::Csv(e.to_string()))?;
        Ok(())
    }
}

/// Where training configurations come from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum TrainingSource {
    /// Inverse dynamics evaluated on the reference itself.
    #[default]
    Reference,
    /// States, accelerations and torques logged while the true-model
    /// feedback-linearizing controller tracks the reference.
    ClosedLoop,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainingConfig<T: Real> {
    pub duration: T,
    pub control_rate: T,
    pub downsample: usize,
    pub noise_std: T,
    pub source: TrainingSource,
    /// PD gains of the closed-loop collection controller.
    pub kp: T,
    pub kd: T,
}

impl<T: Real> Default for TrainingConfig<T> {
    fn default() -> Self {
        Self {
            duration: lit(50.0),
            control_rate: lit(100.0),
            downsample: 50,
            noise_std: T::zero(),
            source: TrainingSource::Reference,
            kp: lit(50.0),
            kd: lit(2.0 * 50f64.sqrt()),
        }
    }
}

/// Mismatch dataset: every `downsample`-th tick of the trajectory, targets
/// `e = τ − M̂ q̈ − n̂` with `τ` from the true inverse dynamics, plus
/// Gaussian noise of `noise_std`.
pub fn build_training_set<T: Real>(
    model: &ManipulatorModel<T>,
    nominal: &NominalModel<T>,
    spec: &SinusoidSpec<T>,
    config: &TrainingConfig<T>,
) -> Result<GpDataset<T>> {
    if config.downsample == 0 {
        return Err(Error::InvalidParameter("downsample must be at least 1".into()));
    }
    let points: Vec<(GpInput<T>, DVector<T>)> = match config.source {
        TrainingSource::Reference => {
            let reference = ReferenceTrajectory::sample(spec, config.duration, config.control_rate)?;
            reference
                .samples
                .into_iter()
                .step_by(config.downsample)
                .map(|s| {
                    let tau = model.inverse_dynamics(&s.q, &s.dq, &s.ddq)?;
                    Ok((GpInput::new(s.q, s.dq, s.ddq)?, tau))
                })
                .collect::<Result<_>>()?
        }
        TrainingSource::ClosedLoop => {
            let sim = SimConfig::new(config.duration, config.control_rate, 10)?;
            let init = spec.evaluate(T::zero());
            let (kp, kd) = (config.kp, config.kd);
            let trace = simulate(
                model,
                |t, state| {
                    let d = spec.evaluate(t);
                    let a = &d.ddq + (&d.q - &state.q) * kp + (&d.dq - &state.dq) * kd;
                    Ok((model.inverse_dynamics(&state.q, &state.dq, &a)?, ()))
                },
                RobotState::new(init.q, init.dq)?,
                &sim,
            )?;
            trace
                .ticks
                .into_iter()
                .step_by(config.downsample)
                .map(|t| Ok((GpInput::new(t.state.q, t.state.dq, t.accel)?, t.tau)))
                .collect::<Result<_>>()?
        }
    };
    if points.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let noise = if config.noise_std > T::zero() {
        Some(
            Normal::new(0.0, to_f64(config.noise_std))
                .map_err(|e| Error::InvalidParameter(e.to_string()))?,
        )
    } else {
        None
    };
    let mut rng = rng_for(spec.seed, 1);
    let samples = points
        .into_iter()
        .map(|(x, tau)| {
            let mut e = compute_mismatch_target(nominal, &x, &tau)?;
            if let Some(dist) = &noise {
                for v in e.iter_mut() {
                    *v += lit::<T>(dist.sample(&mut rng));
                }
            }
            Ok((x, e))
        })
        .collect::<Result<Vec<_>>>()?;
    GpDataset::from_samples(&samples, config.noise_std)
}
