//! Artifact files: traces, plot data, summaries and the GP description.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use gprfl_core::control::ControllerVariant;
use gprfl_core::gpr::{GpDataset, GpModel};
use gprfl_core::trajectory::ReferenceTrajectory;

use crate::config::ExperimentConfig;
use crate::experiment::{RunRecord, RunSummary};
use crate::{HarnessError, HarnessResult};

pub const GP_MODEL_FILE: &str = "gp_model.txt";
pub const TRAINING_DATA_FILE: &str = "training_data.csv";

pub fn trace_path(dir: &Path, variant: ControllerVariant, seed: u64) -> PathBuf {
    dir.join(format!("trace_{}_{seed}.csv", variant.name()))
}

fn numbered(prefix: &str, n: usize) -> impl Iterator<Item = String> + '_ {
    (1..=n).map(move |j| format!("{prefix}{j}"))
}

/// Trace columns. Everything in the control tick log, plus the reference,
/// the realized acceleration and the true mismatch.
pub fn trace_header(n: usize) -> Vec<String> {
    let mut h = vec!["time".to_string()];
    for p in ["q", "dq", "qd", "q_err", "dq_err", "tau"] {
        h.extend(numbered(p, n));
    }
    h.push("rho".into());
    for p in ["e_hat_mean", "e_hat_var", "aux_accel", "ddq", "e_true", "w"] {
        h.extend(numbered(p, n));
    }
    h.extend(["V".to_string(), "z_norm".to_string()]);
    h
}

pub fn write_trace(record: &RunRecord, path: &Path) -> HarnessResult<()> {
    let n = record.spec.n_joints();
    let mut w = csv::Writer::from_writer(BufWriter::new(File::create(path)?));
    w.write_record(trace_header(n))?;
    for (k, tick) in record.trace.ticks.iter().enumerate() {
        let log = &tick.log;
        let d = &record.reference.samples[k];
        let mut row: Vec<String> = vec![tick.time.to_string()];
        for v in [
            &log.q,
            &log.dq,
            &d.q,
            &log.q_err,
            &log.dq_err,
            &log.tau,
        ] {
            row.extend(v.iter().map(f64::to_string));
        }
        row.push(log.rho.to_string());
        for v in [
            &log.e_hat_mean,
            &log.e_hat_var,
            &log.aux_accel,
            &tick.accel,
            &record.mismatch[k],
            &log.w,
        ] {
            row.extend(v.iter().map(f64::to_string));
        }
        row.push(log.lyapunov.to_string());
        row.push(log.z_norm.to_string());
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

/// Per-joint position and torque series of one run, for the plot files.
#[derive(Debug, Clone, PartialEq)]
pub struct PlotSeries {
    pub variant: ControllerVariant,
    pub seed: u64,
    /// `q[j][k]`, radians.
    pub q: Vec<Vec<f64>>,
    pub tau: Vec<Vec<f64>>,
}

impl PlotSeries {
    pub fn from_record(record: &RunRecord) -> Self {
        let n = record.spec.n_joints();
        let column = |f: &dyn Fn(usize) -> Vec<f64>| (0..n).map(f).collect::<Vec<_>>();
        let ticks = &record.trace.ticks;
        Self {
            variant: record.variant,
            seed: record.seed,
            q: column(&|j| ticks.iter().map(|t| t.state.q[j]).collect()),
            tau: column(&|j| ticks.iter().map(|t| t.tau[j]).collect()),
        }
    }
}

/// One file per joint with the reference, then position, absolute error and
/// torque for each controller. Angles in degrees.
pub fn write_plot_data(
    reference: &ReferenceTrajectory<f64>,
    series: &[&PlotSeries],
    dir: &Path,
) -> HarnessResult<()> {
    std::fs::create_dir_all(dir)?;
    let n = reference.samples.first().map_or(0, |s| s.q.len());
    for j in 0..n {
        let mut w = csv::Writer::from_writer(BufWriter::new(File::create(
            dir.join(format!("joint{}.csv", j + 1)),
        )?));
        let mut header = vec!["time".to_string(), "qd_deg".to_string()];
        for s in series {
            let c = s.variant.name();
            header.extend([
                format!("q_deg_{c}"),
                format!("abs_err_deg_{c}"),
                format!("tau_{c}"),
            ]);
        }
        w.write_record(&header)?;
        for (k, (t, d)) in reference.times.iter().zip(&reference.samples).enumerate() {
            let qd = d.q[j];
            let mut row = vec![t.to_string(), qd.to_degrees().to_string()];
            for s in series {
                let q = s.q[j][k];
                row.push(q.to_degrees().to_string());
                row.push((qd - q).abs().to_degrees().to_string());
                row.push(s.tau[j][k].to_string());
            }
            w.write_record(&row)?;
        }
        w.flush()?;
    }
    Ok(())
}

fn fmt_rmse(v: Option<f64>) -> String {
    v.map_or_else(|| "NaN".to_string(), |x| format!("{x:.6}"))
}

/// `controller, seed, rmse_j1_deg, …, rmse_avg_deg, status`.
pub fn write_summary_csv(summary: &RunSummary, path: &Path) -> HarnessResult<()> {
    let n = summary
        .rows
        .iter()
        .find_map(|r| r.rmse.as_ref().map(|x| x.per_joint_deg.len()))
        .unwrap_or(2);
    let mut w = csv::Writer::from_writer(BufWriter::new(File::create(path)?));
    let mut header = vec!["controller".to_string(), "seed".to_string()];
    header.extend((1..=n).map(|j| format!("rmse_j{j}_deg")));
    header.extend(["rmse_avg_deg".to_string(), "status".to_string()]);
    w.write_record(&header)?;
    for r in &summary.rows {
        let mut row = vec![r.variant.name().to_string(), r.seed.to_string()];
        for j in 0..n {
            row.push(fmt_rmse(r.rmse.as_ref().map(|x| x.per_joint_deg[j])));
        }
        row.push(fmt_rmse(r.rmse.as_ref().map(|x| x.average_deg)));
        row.push(match &r.failure {
            None => "ok".to_string(),
            Some(msg) => format!("failed: {msg}"),
        });
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

pub fn format_summary(summary: &RunSummary) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "Joint-averaged tracking RMSE [deg]");
    let _ = writeln!(s, "{:<12} {:>12} {:>10} {:>6} {:>7}", "controller", "mean", "std", "runs", "failed");
    for a in &summary.aggregates {
        let _ = writeln!(
            s,
            "{:<12} {:>12.2} {:>10.2} {:>6} {:>7}",
            a.variant.name(),
            a.mean_deg,
            a.std_deg,
            a.runs,
            a.failed
        );
    }
    if !summary.robust.is_empty() {
        let (lyap, rho) = summary.robust.iter().fold(
            (Default::default(), Default::default()),
            |(l, r): (crate::LyapunovCheck, crate::RhoValidity), d| {
                (l.merge(&d.lyapunov), r.merge(&d.rho))
            },
        );
        let _ = writeln!(s);
        let _ = writeln!(
            s,
            "robust_gp: rho >= |e - e_hat| on {}/{} ticks ({:.2}%)",
            rho.valid,
            rho.ticks,
            100.0 * rho.rate()
        );
        let _ = writeln!(
            s,
            "robust_gp: {}/{} ticks qualify (|z| >= eps, rho > |e - e_hat|); V decreased across {} of them, dV/dt < 0 at {} (max |z| = {:.4})",
            lyap.qualifying, lyap.ticks, lyap.decreasing, lyap.instant_decreasing, lyap.max_z_norm
        );
    }
    for r in summary.rows.iter().filter(|r| r.failure.is_some()) {
        let _ = writeln!(
            s,
            "FAILED {} seed {}: {}",
            r.variant.name(),
            r.seed,
            r.failure.as_deref().unwrap_or_default()
        );
    }
    s
}

pub fn write_summary_txt(summary: &RunSummary, path: &Path) -> HarnessResult<()> {
    std::fs::write(path, format_summary(summary))?;
    Ok(())
}

/// Writes `gp_model.txt` (hyperparameters as `key = value`) and the training
/// data it refers to.
pub fn write_gp_model(gp: &GpModel<f64>, cfg: &ExperimentConfig, dir: &Path) -> HarnessResult<()> {
    std::fs::create_dir_all(dir)?;
    gp.dataset()
        .write_csv(BufWriter::new(File::create(dir.join(TRAINING_DATA_FILE))?))?;
    let mut f = BufWriter::new(File::create(dir.join(GP_MODEL_FILE))?);
    writeln!(f, "training_data = {TRAINING_DATA_FILE}")?;
    writeln!(f, "training_seed = {}", cfg.training_seed)?;
    writeln!(f, "training_source = {}", cfg.training_source)?;
    writeln!(f, "downsample = {}", cfg.downsample)?;
    for (k, v) in gp.hyperparameter_entries() {
        writeln!(f, "{k} = {v}")?;
    }
    f.flush()?;
    Ok(())
}

/// Rebuilds a GP written by [`write_gp_model`].
pub fn load_gp(dir: &Path) -> HarnessResult<GpModel<f64>> {
    let text = std::fs::read_to_string(dir.join(GP_MODEL_FILE))?;
    let entries: BTreeMap<String, String> = text
        .lines()
        .filter(|l| !l.trim().is_empty() && !l.trim_start().starts_with('#'))
        .map(|l| {
            l.split_once('=')
                .map(|(k, v)| (k.trim().to_string(), v.trim().to_string()))
                .ok_or_else(|| HarnessError::Format(format!("malformed line {l:?}")))
        })
        .collect::<HarnessResult<_>>()?;
    let get = |k: &str| entries.get(k).cloned();
    let noise: f64 = get("noise_std")
        .ok_or_else(|| HarnessError::Format("missing noise_std".into()))?
        .parse()
        .map_err(|_| HarnessError::Format("bad noise_std".into()))?;
    let data_file = get("training_data").unwrap_or_else(|| TRAINING_DATA_FILE.to_string());
    let data = GpDataset::read_csv(File::open(dir.join(data_file))?, noise)?;
    let params = GpModel::<f64>::params_from_entries(get)?;
    Ok(GpModel::from_params(data, params)?)
}
