use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use mmdg::driver::config::{LadderConfig, RunConfig};
use mmdg::driver::converge::{rows_csv, slopes_csv};
use mmdg::driver::cut::{write_cut, write_cut_file, CutLine};
use mmdg::driver::output::meshdump;
use mmdg::driver::{converge, cut, run, DriverError};

#[derive(Parser)]
#[command(
    name = "solve",
    version,
    about = "Moving-mesh DG solver for unsteady radiative transfer"
)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Run one configuration.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// `section.key=value`, applied after the file.
        #[arg(long = "override", value_name = "KEY=VALUE")]
        overrides: Vec<String>,
        /// Metric/MMPDE cycles on the initial condition (moving mode).
        #[arg(long)]
        init_adapt: Option<usize>,
        /// Write `energy.csv`.
        #[arg(long)]
        trace_energy: bool,
        /// Output directory (overrides `output.dir`).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run a convergence ladder.
    Converge {
        #[arg(long)]
        config: PathBuf,
    },
    /// Sample a checkpoint along a line.
    Cut {
        #[arg(long)]
        run: PathBuf,
        /// Cut at constant `x` or `y`.
        #[arg(long, value_parser = ["x", "y"], requires = "value", conflicts_with = "slope")]
        axis: Option<String>,
        #[arg(long, allow_hyphen_values = true)]
        value: Option<f64>,
        /// Cut along `y = slope * x + intercept`.
        #[arg(long, allow_hyphen_values = true)]
        slope: Option<f64>,
        #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
        intercept: f64,
        #[arg(long, default_value_t = 0)]
        direction: usize,
        /// Checkpoint step (default: last).
        #[arg(long)]
        step: Option<usize>,
        /// Output file (default: stdout).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Write the mesh of a checkpoint as VTK and CSV.
    Meshdump {
        #[arg(long)]
        run: PathBuf,
        #[arg(long)]
        step: usize,
    },
}

fn parent(p: &Path) -> PathBuf {
    p.parent()
        .filter(|d| !d.as_os_str().is_empty())
        .map_or_else(|| PathBuf::from("."), Path::to_path_buf)
}

fn execute(cmd: Cmd) -> Result<(), DriverError> {
    match cmd {
        Cmd::Run {
            config,
            mut overrides,
            init_adapt,
            trace_energy,
            out,
        } => {
            if let Some(k) = init_adapt {
                overrides.push(format!("mmpde.init_adapt={k}"));
            }
            if trace_energy {
                overrides.push("output.trace_energy=true".into());
            }
            if let Some(o) = out {
                overrides.push(format!("output.dir={:?}", o.to_string_lossy()));
            }
            let cfg = RunConfig::load(&config, &overrides)?;
            let (outcome, manifest) = run(&cfg, &parent(&config), &overrides)?;
            println!(
                "steps: {}, max SI iterations: {}",
                outcome.diagnostics.len(),
                outcome.max_si_iterations()
            );
            if let Some(g) = manifest.global_errors {
                println!(
                    "global errors: L1 {:e}  L2 {:e}  Linf {:e}",
                    g.l1, g.l2, g.linf
                );
            }
            println!(
                "wall time: {:.2} s, {} files",
                outcome.wall_seconds,
                manifest.outputs.len()
            );
        }
        Cmd::Converge { config } => {
            let ladder = LadderConfig::load(&config)?;
            let (rows, slopes) = converge(&ladder, &parent(&config))?;
            print!("{}", rows_csv(&rows));
            print!("{}", slopes_csv(&slopes));
        }
        Cmd::Cut {
            run,
            axis,
            value,
            slope,
            intercept,
            direction,
            step,
            out,
        } => {
            let line = match (axis.as_deref(), value, slope) {
                (Some(a), Some(v), None) => CutLine::Axis {
                    axis: usize::from(a == "y"),
                    value: v,
                },
                (None, _, Some(s)) => CutLine::Line {
                    slope: s,
                    intercept,
                },
                _ => {
                    return Err(DriverError::Config(
                        "give --axis with --value, or --slope".into(),
                    ))
                }
            };
            let rows = cut(&run, line, direction, step)?;
            match out {
                Some(p) => write_cut_file(&p, &rows, direction)?,
                None => {
                    write_cut(&mut std::io::stdout().lock(), &rows, direction).map_err(|e| {
                        DriverError::Io {
                            path: "<stdout>".into(),
                            source: e,
                        }
                    })?
                }
            }
        }
        Cmd::Meshdump { run, step } => {
            for p in meshdump(&run, step)? {
                println!("{}", p.display());
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    match execute(cli.cmd) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
