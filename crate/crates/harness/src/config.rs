//! Experiment configuration.
//!
//! The on-disk form is flat TOML: one `key = value` per line, no tables.
//! Missing keys fall back to the defaults below, so a file only needs the
//! settings it changes. `--config default` selects the built-in defaults.

use std::path::{Path, PathBuf};

use gprfl_core::control::{ControllerVariant, GainSpec};
use gprfl_core::dynamics::{ManipulatorModel, NominalModel, SimConfig};
use gprfl_core::gpr::{BoundParams, FitBudget, HalfWidth};
use gprfl_core::trajectory::{
    sample_spec, SinusoidSpec, TrainingConfig, TrainingSource, DEFAULT_OMEGA_MAX,
    DEFAULT_OMEGA_MIN, DEFAULT_SINUSOIDS,
};
use serde::{Deserialize, Serialize};

use crate::{HarnessError, HarnessResult};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    // robot
    pub masses: Vec<f64>,
    pub lengths: Vec<f64>,
    /// Distance from each joint to its link's center of mass.
    pub com_offsets: Vec<f64>,
    /// Link inertia about the center of mass.
    pub inertias: Vec<f64>,
    pub gravity: f64,

    /// `"scaled_identity"` (constant `M̂ = s·I`, `n̂ = 0`) or `"true"` (the
    /// nominal model equals the plant).
    pub nominal: String,
    pub nominal_inertia_scale: f64,

    pub kp: f64,
    pub kd: f64,

    /// Noise standard deviation assumed by the GP.
    pub gp_noise_std: f64,
    /// Gaussian noise added to the training targets.
    pub training_noise_std: f64,
    pub beta: f64,
    pub delta: f64,
    pub half_width: String,
    pub epsilon: f64,
    pub fit_restarts: usize,
    pub fit_iters: usize,
    pub fit_seed: u64,

    pub n_sinusoids: usize,
    pub omega_min: f64,
    pub omega_max: f64,
    pub duration: f64,
    pub control_rate: f64,
    pub substeps: usize,
    /// Added to `q_d(0)` to form the initial joint position.
    pub initial_offset: Vec<f64>,

    pub training_seed: u64,
    pub downsample: usize,
    /// `"reference"` or `"closed_loop"`.
    pub training_source: String,

    pub eval_seeds: Vec<u64>,
    pub controllers: Vec<String>,
    pub output_dir: PathBuf,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            // uniform 4 kg, 1 m rods
            masses: vec![4.0, 4.0],
            lengths: vec![1.0, 1.0],
            com_offsets: vec![0.5, 0.5],
            inertias: vec![4.0 / 12.0, 4.0 / 12.0],
            gravity: 9.81,
            nominal: "scaled_identity".into(),
            nominal_inertia_scale: 0.5,
            kp: 50.0,
            kd: 2.0 * 50f64.sqrt(),
            gp_noise_std: 0.0,
            training_noise_std: 0.0,
            beta: 3.0,
            delta: 0.01,
            half_width: HalfWidth::BetaStd.name().into(),
            epsilon: 0.5,
            fit_restarts: 4,
            fit_iters: 150,
            fit_seed: 0,
            n_sinusoids: DEFAULT_SINUSOIDS,
            omega_min: DEFAULT_OMEGA_MIN,
            omega_max: DEFAULT_OMEGA_MAX,
            duration: 50.0,
            control_rate: 100.0,
            substeps: 10,
            initial_offset: vec![0.0, 0.0],
            training_seed: 0,
            downsample: 50,
            training_source: "reference".into(),
            eval_seeds: (1..=10).collect(),
            controllers: ControllerVariant::ALL.iter().map(|v| v.name().to_string()).collect(),
            output_dir: PathBuf::from("out"),
        }
    }
}

fn invalid(msg: impl Into<String>) -> HarnessError {
    HarnessError::Config(msg.into())
}

impl ExperimentConfig {
    /// Reads a config file, or the defaults when `source` is `"default"`.
    pub fn load(source: &str) -> HarnessResult<Self> {
        if source == "default" {
            return Ok(Self::default());
        }
        let text = std::fs::read_to_string(source)
            .map_err(|e| invalid(format!("cannot read {source}: {e}")))?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> HarnessResult<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| invalid(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> HarnessResult<String> {
        toml::to_string(self).map_err(|e| invalid(e.to_string()))
    }

    pub fn save(&self, path: &Path) -> HarnessResult<()> {
        std::fs::write(path, self.to_toml()?)?;
        Ok(())
    }

    pub fn n_joints(&self) -> usize {
        self.masses.len()
    }

    pub fn validate(&self) -> HarnessResult<()> {
        self.robot()?;
        self.nominal_model()?;
        self.gains()?;
        self.bounds()?;
        self.sim_config()?;
        self.training_config()?;
        self.variants()?;
        if self.initial_offset.len() != self.n_joints() {
            return Err(invalid("initial_offset needs one entry per joint"));
        }
        if !(self.gp_noise_std >= 0.0) || !(self.training_noise_std >= 0.0) {
            return Err(invalid("noise levels must be non-negative"));
        }
        if !(self.epsilon >= 0.0) {
            return Err(invalid("epsilon must be non-negative"));
        }
        if self.fit_restarts == 0 {
            return Err(invalid("fit_restarts must be at least 1"));
        }
        if self.eval_seeds.is_empty() {
            return Err(invalid("at least one evaluation seed is required"));
        }
        if self.eval_seeds.contains(&self.training_seed) {
            return Err(invalid(format!(
                "training seed {} must not be an evaluation seed",
                self.training_seed
            )));
        }
        let mut seeds = self.eval_seeds.clone();
        seeds.sort_unstable();
        seeds.dedup();
        if seeds.len() != self.eval_seeds.len() {
            return Err(invalid("evaluation seeds must be distinct"));
        }
        sample_spec(0, self.n_joints(), self.n_sinusoids, self.omega_min, self.omega_max)?;
        Ok(())
    }

    pub fn robot(&self) -> HarnessResult<ManipulatorModel<f64>> {
        Ok(ManipulatorModel::new(
            self.masses.clone(),
            self.lengths.clone(),
            self.com_offsets.clone(),
            self.inertias.clone(),
            self.gravity,
        )?)
    }

    pub fn nominal_model(&self) -> HarnessResult<NominalModel<f64>> {
        match self.nominal.as_str() {
            "scaled_identity" => Ok(NominalModel::scaled_identity(
                self.n_joints(),
                self.nominal_inertia_scale,
            )?),
            "true" => Ok(NominalModel::Rigid(self.robot()?)),
            other => Err(invalid(format!("unknown nominal model {other:?}"))),
        }
    }

    pub fn gains(&self) -> HarnessResult<GainSpec<f64>> {
        Ok(GainSpec::new(self.kp, self.kd)?)
    }

    pub fn bounds(&self) -> HarnessResult<BoundParams<f64>> {
        let hw = HalfWidth::from_name(&self.half_width)
            .ok_or_else(|| invalid(format!("unknown half_width {:?}", self.half_width)))?;
        Ok(BoundParams::new(
            nalgebra::DVector::from_element(self.n_joints(), self.beta),
            self.delta,
            hw,
        )?)
    }

    pub fn fit_budget(&self) -> FitBudget {
        FitBudget {
            restarts: self.fit_restarts,
            max_iters: self.fit_iters,
            seed: self.fit_seed,
        }
    }

    pub fn sim_config(&self) -> HarnessResult<SimConfig<f64>> {
        Ok(SimConfig::new(self.duration, self.control_rate, self.substeps)?)
    }

    pub fn training_config(&self) -> HarnessResult<TrainingConfig<f64>> {
        let source = match self.training_source.as_str() {
            "reference" => TrainingSource::Reference,
            "closed_loop" => TrainingSource::ClosedLoop,
            other => return Err(invalid(format!("unknown training_source {other:?}"))),
        };
        if self.downsample == 0 {
            return Err(invalid("downsample must be at least 1"));
        }
        Ok(TrainingConfig {
            duration: self.duration,
            control_rate: self.control_rate,
            downsample: self.downsample,
            noise_std: self.training_noise_std,
            source,
            kp: self.kp,
            kd: self.kd,
        })
    }

    pub fn spec(&self, seed: u64) -> HarnessResult<SinusoidSpec<f64>> {
        Ok(sample_spec(
            seed,
            self.n_joints(),
            self.n_sinusoids,
            self.omega_min,
            self.omega_max,
        )?)
    }

    pub fn variants(&self) -> HarnessResult<Vec<ControllerVariant>> {
        if self.controllers.is_empty() {
            return Err(invalid("at least one controller is required"));
        }
        self.controllers
            .iter()
            .map(|c| {
                ControllerVariant::from_name(c)
                    .ok_or_else(|| invalid(format!("unknown controller {c:?}")))
            })
            .collect()
    }
}
