use std::path::PathBuf;
use std::process::ExitCode;
use std::sync::Arc;

use clap::{Parser, Subcommand};
use gprfl_core::control::ControllerVariant;
use gprfl_harness::output::{format_summary, trace_path, write_gp_model, write_trace};
use gprfl_harness::{run_experiment, run_single, train_gp, ExperimentConfig, HarnessResult};

#[derive(Debug, Parser)]
#[command(name = "gprfl", version, about = "GP-compensated robust feedback linearization experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// Config file (flat TOML), or `default` for the built-in settings.
    #[arg(long, global = true, default_value = "default")]
    config: String,

    /// Evaluation seed. Restricts `experiment` to this seed.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// true, nominal, gp or robust_gp. Restricts `experiment` to this controller.
    #[arg(long, global = true)]
    controller: Option<String>,

    /// Output directory, overriding the config.
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    /// RK4 steps per control tick, overriding the config.
    #[arg(long, global = true)]
    substeps: Option<usize>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Build the training set, fit the GP and write gp_model.txt.
    Train,
    /// Simulate one controller on one seed and write its trace.
    Run,
    /// Run every seed and controller and write the summary tables.
    Experiment,
    /// Run the dynamics, GP and Lyapunov invariant suites.
    Validate,
}

fn load_config(cli: &Cli) -> HarnessResult<ExperimentConfig> {
    let mut cfg = ExperimentConfig::load(&cli.config)?;
    if let Some(out) = &cli.out {
        cfg.output_dir = out.clone();
    }
    if let Some(s) = cli.substeps {
        cfg.substeps = s;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn parse_controller(name: &str) -> HarnessResult<ControllerVariant> {
    ControllerVariant::from_name(name).ok_or_else(|| {
        gprfl_harness::HarnessError::Config(format!(
            "unknown controller {name:?} (expected true, nominal, gp or robust_gp)"
        ))
    })
}

fn execute(cli: &Cli) -> HarnessResult<bool> {
    match cli.command {
        Command::Train => {
            let cfg = load_config(cli)?;
            let gp = train_gp(&cfg)?;
            write_gp_model(&gp, &cfg, &cfg.output_dir)?;
            for (k, v) in gp.hyperparameter_entries() {
                println!("{k} = {v}");
            }
            println!("wrote {}", cfg.output_dir.join("gp_model.txt").display());
            Ok(true)
        }
        Command::Run => {
            let cfg = load_config(cli)?;
            let variant = parse_controller(cli.controller.as_deref().unwrap_or("robust_gp"))?;
            let seed = cli.seed.unwrap_or(cfg.eval_seeds[0]);
            if seed == cfg.training_seed {
                eprintln!("warning: seed {seed} is the training seed");
            }
            let gp = if variant.uses_gp() {
                Some(Arc::new(train_gp(&cfg)?))
            } else {
                None
            };
            let record = run_single(&cfg, variant, seed, gp.as_ref())?;
            std::fs::create_dir_all(&cfg.output_dir)?;
            let path = trace_path(&cfg.output_dir, variant, seed);
            write_trace(&record, &path)?;
            let per_joint: Vec<String> =
                record.rmse.per_joint_deg.iter().map(|v| format!("{v:.3}")).collect();
            println!(
                "{variant} seed {seed}: RMSE {:.3} deg (per joint {})",
                record.rmse.average_deg,
                per_joint.join(", ")
            );
            println!("wrote {}", path.display());
            Ok(true)
        }
        Command::Experiment => {
            let mut cfg = load_config(cli)?;
            if let Some(seed) = cli.seed {
                cfg.eval_seeds = vec![seed];
            }
            if let Some(c) = &cli.controller {
                cfg.controllers = vec![parse_controller(c)?.name().to_string()];
            }
            let summary = run_experiment(&cfg, &cfg.output_dir)?;
            print!("{}", format_summary(&summary));
            println!("wrote {}", cfg.output_dir.join("summary.csv").display());
            Ok(summary.rows.iter().all(|r| r.failure.is_none()))
        }
        Command::Validate => {
            let results = gprfl_harness::validate::run_all(cli.seed.unwrap_or(0))?;
            for r in &results {
                println!("{r}");
            }
            Ok(results.iter().all(|r| r.passed))
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(&cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
