use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use kpo_experiments::{run_experiment, validate_config, Experiment, ExperimentConfig, ExperimentError};

#[derive(Parser)]
#[command(name = "kpo", version, about = "Kerr parametric oscillator readout and tomography sweeps")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one experiment and write its CSV files.
    Run {
        /// Experiment name, see `kpo list`.
        #[arg(long, required_unless_present = "config")]
        experiment: Option<String>,
        /// JSON config file: {"experiment": ..., "overrides": {...}}.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Override a setting: key=value, key=a,b,c or key=start:step:stop.
        #[arg(long = "set", value_name = "KEY=VALUE")]
        set: Vec<String>,
        /// Output directory.
        #[arg(long, default_value = "out")]
        out: PathBuf,
        /// Worker threads; 0 uses all cores.
        #[arg(long, default_value_t = 0)]
        workers: usize,
        /// Coarse grids for a quick run.
        #[arg(long)]
        smoke: bool,
    },
    /// List experiments with their default settings.
    List,
}

fn resolve(
    experiment: Option<String>,
    config: Option<PathBuf>,
    set: &[String],
    smoke: bool,
) -> Result<ExperimentConfig, ExperimentError> {
    let mut resolved = match config {
        Some(path) => {
            let text = std::fs::read_to_string(&path).map_err(|source| ExperimentError::Io {
                path: path.display().to_string(),
                source,
            })?;
            let file_config = validate_config(&text)?;
            if let Some(name) = &experiment {
                if name.parse::<Experiment>()? != file_config.experiment {
                    return Err(ExperimentError::Config(format!(
                        "--experiment {name} disagrees with the config file ({})",
                        file_config.experiment
                    )));
                }
            }
            file_config
        }
        None => {
            let name = experiment.expect("clap requires --experiment without --config");
            ExperimentConfig::new(name.parse()?)
        }
    };
    if smoke {
        for (key, value) in resolved.experiment.smoke_overrides() {
            resolved.set(key, value)?;
        }
    }
    resolved.apply_assignments(set.iter().map(String::as_str))?;
    Ok(resolved)
}

fn run(cli: Cli) -> Result<(), ExperimentError> {
    match cli.command {
        Command::List => {
            let mut stdout = std::io::stdout().lock();
            for &experiment in Experiment::ALL {
                // a closed pipe (e.g. `kpo list | head`) just ends the listing
                if writeln!(stdout, "{}: {}", experiment, experiment.about()).is_err() {
                    break;
                }
                for (key, value) in experiment.defaults() {
                    let _ = writeln!(stdout, "    {key} = {value}");
                }
            }
            Ok(())
        }
        Command::Run {
            experiment,
            config,
            set,
            out,
            workers,
            smoke,
        } => {
            let resolved = resolve(experiment, config, &set, smoke)?;
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(workers)
                .build()
                .map_err(|e| ExperimentError::Config(format!("worker pool: {e}")))?;
            let datasets = pool.install(|| run_experiment(&resolved))?;
            for data in &datasets {
                let path = data.write(&out, &resolved)?;
                println!("{}", path.display());
            }
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("kpo: {err}");
            ExitCode::from(err.exit_code() as u8)
        }
    }
}
