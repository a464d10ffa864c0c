use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use weylvn::grid::Grid1D;
use weylvn::io::{read_snapshot, write_run_outputs, write_wigner};
use weylvn::observables::{wigner, XiGrid};
use weylvn::oracle::{convergence_csv, convergence_study, OracleError};
use weylvn::scenario::{parse_config, preset, ConfigError, Scenario, PRESET_NAMES};
use weylvn::simulation::{RunError, Simulation};

const EXIT_CONFIG: u8 = 2;
const EXIT_SOLVER: u8 = 3;
const EXIT_IO: u8 = 4;

#[derive(Parser)]
#[command(
    name = "weylvn",
    version,
    about = "Hermite spectral solver for the von Neumann equation in Weyl variables"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct ScenarioArgs {
    /// Preset name (harmonic, quartic, tunneling, morse).
    #[arg(long)]
    preset: Option<String>,
    /// TOML configuration file; may override a preset key by key.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Use the reduced-resolution variant of the preset.
    #[arg(long)]
    desk: bool,
}

impl ScenarioArgs {
    fn load(&self) -> Result<Scenario, ConfigError> {
        parse_config(self.config.as_deref(), self.preset.as_deref(), self.desk)
    }
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario and write observables, field snapshots and Wigner CSVs.
    Run {
        #[command(flatten)]
        scenario: ScenarioArgs,
        /// Output directory (overrides the config's output.dir).
        #[arg(long)]
        out_dir: Option<PathBuf>,
        /// Suppress the per-interval progress line.
        #[arg(long)]
        quiet: bool,
    },
    /// (dt, dx) convergence table against the exact harmonic solution.
    Convergence {
        #[command(flatten)]
        scenario: ScenarioArgs,
        /// Step sizes, each used for both dt and dx.
        #[arg(long, value_delimiter = ',', required = true, num_args = 1..)]
        steps: Vec<f64>,
        /// Override the number of Hermite modes N.
        #[arg(long)]
        n: Option<usize>,
        #[arg(long, default_value = ".")]
        out_dir: PathBuf,
    },
    /// List the built-in presets.
    Presets,
    /// Convert a field snapshot into a Wigner CSV matrix.
    Wigner {
        /// Snapshot path (with or without the .txt/.bin extension).
        snapshot: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = XiGrid::default().min, allow_negative_numbers = true)]
        xi_min: f64,
        #[arg(long, default_value_t = XiGrid::default().max, allow_negative_numbers = true)]
        xi_max: f64,
        #[arg(long, default_value_t = XiGrid::default().count)]
        xi_count: usize,
    },
}

fn fail(code: u8, msg: impl std::fmt::Display) -> ExitCode {
    eprintln!("error: {msg}");
    ExitCode::from(code)
}

fn run_error_code(e: &RunError) -> u8 {
    match e {
        RunError::Solver(_) => EXIT_SOLVER,
        _ => EXIT_CONFIG,
    }
}

fn cmd_run(args: &ScenarioArgs, out_dir: Option<PathBuf>, quiet: bool) -> ExitCode {
    let scenario = match args.load() {
        Ok(s) => s,
        Err(e) => return fail(EXIT_CONFIG, e),
    };
    let dir = out_dir
        .or_else(|| scenario.output.dir.clone())
        .unwrap_or_else(|| PathBuf::from(format!("out-{}", scenario.name)));
    log::info!("running {} into {}", scenario.name, dir.display());
    let sim = match Simulation::new(scenario) {
        Ok(s) => s,
        Err(e) => return fail(run_error_code(&e), e),
    };
    let outputs = match sim.run(!quiet, |_| {}) {
        Ok(o) => o,
        Err(e) => return fail(run_error_code(&e), e),
    };
    // Partial results are written even when the solver stopped early.
    if let Err(e) = write_run_outputs(&dir, &sim.scenario, &sim.grid, &outputs) {
        return fail(EXIT_IO, e);
    }
    match outputs.failure {
        Some(e) => fail(EXIT_SOLVER, format!("stopped at t = {}: {e}", outputs.final_time)),
        None => ExitCode::SUCCESS,
    }
}

fn cmd_convergence(args: &ScenarioArgs, steps: &[f64], n: Option<usize>, out_dir: &Path) -> ExitCode {
    if steps.is_empty() || steps.iter().any(|h| h.is_nan() || *h <= 0.0) {
        return fail(EXIT_CONFIG, "--steps needs at least one positive step size");
    }
    let loaded = if args.config.is_some() || args.preset.is_some() {
        args.load()
    } else {
        preset("harmonic", args.desk)
    };
    let mut scenario = match loaded {
        Ok(s) => s,
        Err(e) => return fail(EXIT_CONFIG, e),
    };
    if let Some(n) = n {
        scenario.n = n;
    }
    let rows = match convergence_study(&scenario, steps) {
        Ok(r) => r,
        Err(OracleError::Run(e)) => return fail(run_error_code(&e), e),
        Err(e) => return fail(EXIT_CONFIG, e),
    };
    let csv = convergence_csv(&rows);
    print!("{csv}");
    if let Err(e) = std::fs::create_dir_all(out_dir) {
        return fail(EXIT_IO, format!("{}: {e}", out_dir.display()));
    }
    let path = out_dir.join("convergence.csv");
    if let Err(e) = std::fs::write(&path, csv) {
        return fail(EXIT_IO, format!("{}: {e}", path.display()));
    }
    ExitCode::SUCCESS
}

fn cmd_presets() -> ExitCode {
    println!(
        "{:<10} {:>6} {:>6} {:>6} {:>7} {:>8} {:>7}  coupling",
        "name", "N", "Nx", "hbar", "dt", "T", "desk N"
    );
    for name in PRESET_NAMES {
        let s = preset(name, false).expect("known preset");
        let d = preset(name, true).expect("known preset");
        println!(
            "{:<10} {:>6} {:>6} {:>6} {:>7} {:>8.4} {:>7}  {}",
            name,
            s.n,
            s.grid.nx,
            s.hbar,
            s.stepper.dt,
            s.t_final,
            d.n,
            s.coupling.name()
        );
    }
    ExitCode::SUCCESS
}

fn cmd_wigner(snapshot: &Path, out: &Path, xi: XiGrid) -> ExitCode {
    if !xi.is_valid() {
        return fail(EXIT_CONFIG, "xi grid needs xi_min < xi_max and at least 2 nodes");
    }
    let (header, field) = match read_snapshot(snapshot) {
        Ok(v) => v,
        Err(e) => return fail(EXIT_IO, e),
    };
    let grid = match Grid1D::new(header.a, header.b, header.nx) {
        Ok(g) => g,
        Err(e) => return fail(EXIT_IO, format!("{}: {e}", snapshot.display())),
    };
    let w = match wigner(&field, &grid, &xi) {
        Ok(w) => w,
        Err(e) => return fail(EXIT_CONFIG, e),
    };
    match write_wigner(out, &w) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => fail(EXIT_IO, e),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match cli.command {
        Command::Run {
            scenario,
            out_dir,
            quiet,
        } => cmd_run(&scenario, out_dir, quiet),
        Command::Convergence {
            scenario,
            steps,
            n,
            out_dir,
        } => cmd_convergence(&scenario, &steps, n, &out_dir),
        Command::Presets => cmd_presets(),
        Command::Wigner {
            snapshot,
            out,
            xi_min,
            xi_max,
            xi_count,
        } => cmd_wigner(
            &snapshot,
            &out,
            XiGrid {
                min: xi_min,
                max: xi_max,
                count: xi_count,
            },
        ),
    }
}
