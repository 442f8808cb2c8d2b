//! Training, single runs and the full seed × controller sweep.

use std::path::Path;
use std::sync::Arc;

use gprfl_core::control::{design_lyapunov, ControlLaw, ControlTickLog, ControllerSpec, ControllerVariant};
use gprfl_core::dynamics::{simulate, RobotState, RunTrace};
use gprfl_core::gpr::{compute_mismatch_target, GpInput, GpModel};
use gprfl_core::trajectory::{build_training_set, ReferenceTrajectory, SinusoidSpec};
use nalgebra::DVector;
use rayon::prelude::*;

use crate::config::ExperimentConfig;
use crate::diagnostics::{lyapunov_check, rho_validity, LyapunovCheck, RhoValidity};
use crate::output;
use crate::rmse::{compute_rmse, Rmse};
use crate::{HarnessError, HarnessResult};

/// Builds the training set on the training seed's reference and fits the GP.
pub fn train_gp(cfg: &ExperimentConfig) -> HarnessResult<GpModel<f64>> {
    let spec = cfg.spec(cfg.training_seed)?;
    let data = build_training_set(
        &cfg.robot()?,
        &cfg.nominal_model()?,
        &spec,
        &cfg.training_config()?,
    )?;
    let data = gprfl_core::gpr::GpDataset::new(
        data.inputs().clone(),
        data.targets().clone(),
        cfg.gp_noise_std,
    )?;
    Ok(GpModel::fit_default(data, &cfg.fit_budget())?)
}

pub fn controller_for(
    cfg: &ExperimentConfig,
    variant: ControllerVariant,
    gp: Option<&Arc<GpModel<f64>>>,
) -> HarnessResult<ControllerSpec<f64>> {
    let need_gp = || {
        gp.cloned()
            .ok_or_else(|| HarnessError::Config(format!("controller {variant} needs a trained GP")))
    };
    let law = match variant {
        ControllerVariant::TrueModel => ControlLaw::TrueModel(cfg.robot()?),
        ControllerVariant::Nominal => ControlLaw::Nominal(cfg.nominal_model()?),
        ControllerVariant::GpCompensated => ControlLaw::GpCompensated {
            nominal: cfg.nominal_model()?,
            gp: need_gp()?,
        },
        ControllerVariant::RobustGp => ControlLaw::RobustGp {
            nominal: cfg.nominal_model()?,
            gp: need_gp()?,
            bounds: cfg.bounds()?,
            epsilon: cfg.epsilon,
        },
    };
    Ok(ControllerSpec::new(law, cfg.gains()?)?)
}

/// A finished closed-loop run.
#[derive(Debug, Clone)]
pub struct RunRecord {
    pub variant: ControllerVariant,
    pub seed: u64,
    pub spec: SinusoidSpec<f64>,
    pub reference: ReferenceTrajectory<f64>,
    pub trace: RunTrace<f64, ControlTickLog<f64>>,
    /// Mismatch `e = τ − M̂ q̈ − n̂` at the acceleration the plant actually
    /// realized on each tick.
    pub mismatch: Vec<DVector<f64>>,
    pub rmse: Rmse,
}

pub fn run_single(
    cfg: &ExperimentConfig,
    variant: ControllerVariant,
    seed: u64,
    gp: Option<&Arc<GpModel<f64>>>,
) -> HarnessResult<RunRecord> {
    let robot = cfg.robot()?;
    let nominal = cfg.nominal_model()?;
    let controller = controller_for(cfg, variant, gp)?;
    let spec = cfg.spec(seed)?;
    let sim = cfg.sim_config()?;
    let reference = ReferenceTrajectory::sample(&spec, cfg.duration, cfg.control_rate)?;

    let start = spec.evaluate(0.0);
    let offset = DVector::from_column_slice(&cfg.initial_offset);
    let initial = RobotState::new(start.q + offset, start.dq)?;
    let trace = simulate(
        &robot,
        |t, state| controller.command(t, state, &spec.evaluate(t)),
        initial,
        &sim,
    )?;
    let mismatch = trace
        .ticks
        .iter()
        .map(|tick| {
            let x = GpInput::new(tick.state.q.clone(), tick.state.dq.clone(), tick.accel.clone())?;
            compute_mismatch_target(&nominal, &x, &tick.tau)
        })
        .collect::<gprfl_core::Result<Vec<_>>>()?;
    let rmse = compute_rmse(&trace, &reference)?;
    Ok(RunRecord {
        variant,
        seed,
        spec,
        reference,
        trace,
        mismatch,
        rmse,
    })
}

/// One row of the summary table. `rmse` is `None` for a run that aborted.
#[derive(Debug, Clone, PartialEq)]
pub struct SummaryRow {
    pub variant: ControllerVariant,
    pub seed: u64,
    pub rmse: Option<Rmse>,
    pub failure: Option<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Aggregate {
    pub variant: ControllerVariant,
    pub mean_deg: f64,
    /// Sample standard deviation over the successful runs.
    pub std_deg: f64,
    pub runs: usize,
    pub failed: usize,
}

/// Runtime checks of the robust controller, per run.
#[derive(Debug, Clone, PartialEq)]
pub struct RobustDiagnostics {
    pub seed: u64,
    pub lyapunov: LyapunovCheck,
    pub rho: RhoValidity,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunSummary {
    pub rows: Vec<SummaryRow>,
    pub aggregates: Vec<Aggregate>,
    pub robust: Vec<RobustDiagnostics>,
}

impl RunSummary {
    pub fn aggregate(&self, variant: ControllerVariant) -> Option<&Aggregate> {
        self.aggregates.iter().find(|a| a.variant == variant)
    }

    fn from_rows(rows: Vec<SummaryRow>, robust: Vec<RobustDiagnostics>) -> Self {
        let mut variants: Vec<ControllerVariant> = Vec::new();
        for r in &rows {
            if !variants.contains(&r.variant) {
                variants.push(r.variant);
            }
        }
        let aggregates = variants
            .into_iter()
            .map(|variant| {
                let of_variant: Vec<&SummaryRow> =
                    rows.iter().filter(|r| r.variant == variant).collect();
                let values: Vec<f64> = of_variant
                    .iter()
                    .filter_map(|r| r.rmse.as_ref().map(|x| x.average_deg))
                    .collect();
                let (mean_deg, std_deg) = mean_std(&values);
                Aggregate {
                    variant,
                    mean_deg,
                    std_deg,
                    runs: values.len(),
                    failed: of_variant.len() - values.len(),
                }
            })
            .collect();
        Self {
            rows,
            aggregates,
            robust,
        }
    }
}

pub fn mean_std(values: &[f64]) -> (f64, f64) {
    if values.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

struct Outcome {
    row: SummaryRow,
    robust: Option<RobustDiagnostics>,
    series: Option<output::PlotSeries>,
}

/// Trains the GP once, runs every (seed, controller) pair in parallel and
/// writes traces, plot data, the GP description and the summary tables to
/// `out_dir`. Runs that abort become flagged rows; the sweep continues.
pub fn run_experiment(cfg: &ExperimentConfig, out_dir: &Path) -> HarnessResult<RunSummary> {
    cfg.validate()?;
    std::fs::create_dir_all(out_dir)?;
    let variants = cfg.variants()?;
    let gp = if variants.iter().any(|v| v.uses_gp()) {
        let gp = Arc::new(train_gp(cfg)?);
        output::write_gp_model(&gp, cfg, out_dir)?;
        Some(gp)
    } else {
        None
    };
    cfg.save(&out_dir.join("config.toml"))?;

    let lyapunov = design_lyapunov(&cfg.gains()?, cfg.n_joints())?;
    let jobs: Vec<(u64, ControllerVariant)> = cfg
        .eval_seeds
        .iter()
        .flat_map(|&s| variants.iter().map(move |&v| (s, v)))
        .collect();
    let outcomes: Vec<HarnessResult<Outcome>> = jobs
        .par_iter()
        .map(|&(seed, variant)| match run_single(cfg, variant, seed, gp.as_ref()) {
            Ok(record) => {
                output::write_trace(&record, &output::trace_path(out_dir, variant, seed))?;
                let robust = (variant == ControllerVariant::RobustGp).then(|| RobustDiagnostics {
                    seed,
                    lyapunov: lyapunov_check(&record, cfg.epsilon, &lyapunov.q),
                    rho: rho_validity(&record),
                });
                Ok(Outcome {
                    row: SummaryRow {
                        variant,
                        seed,
                        rmse: Some(record.rmse.clone()),
                        failure: None,
                    },
                    robust,
                    series: Some(output::PlotSeries::from_record(&record)),
                })
            }
            Err(HarnessError::Core(e)) => Ok(Outcome {
                row: SummaryRow {
                    variant,
                    seed,
                    rmse: None,
                    failure: Some(e.to_string()),
                },
                robust: None,
                series: None,
            }),
            Err(e) => Err(e),
        })
        .collect();

    let mut rows = Vec::with_capacity(jobs.len());
    let mut robust = Vec::new();
    let mut series = Vec::new();
    for outcome in outcomes {
        let o = outcome?;
        rows.push(o.row);
        robust.extend(o.robust);
        series.extend(o.series);
    }
    for &seed in &cfg.eval_seeds {
        let spec = cfg.spec(seed)?;
        let reference = ReferenceTrajectory::sample(&spec, cfg.duration, cfg.control_rate)?;
        let of_seed: Vec<&output::PlotSeries> = series.iter().filter(|s| s.seed == seed).collect();
        output::write_plot_data(&reference, &of_seed, &out_dir.join(format!("plotdata_{seed}")))?;
    }
    let summary = RunSummary::from_rows(rows, robust);
    output::write_summary_csv(&summary, &out_dir.join("summary.csv"))?;
    output::write_summary_txt(&summary, &out_dir.join("summary.txt"))?;
    Ok(summary)
}
