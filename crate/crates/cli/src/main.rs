use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use fractal_sio::phi::{DEFAULT_RESOLUTION, DEFAULT_TOL};
use fractal_sio_cli::commands::{self, plot, CantorArgs, CantorRun};
use fractal_sio_cli::{CliError, RunConfig, RunReport};

/// Singular integrals on self-similar sets in Heisenberg and Euclidean
/// groups.
///
/// Exit codes: 0 certified or success, 2 inconclusive, 3 invalid input or
/// infeasible parameters. The node budget defaults to
/// FRACTAL_SIO_NODE_BUDGET (5e7 when unset).
#[derive(Parser, Debug)]
#[command(name = "fractal-sio", version)]
struct Cli {
    /// Worker threads for quadrature, 1 to 1024; 1 gives bit-reproducible
    /// lexicographic sums.
    #[arg(long, global = true, default_value_t = 1)]
    threads: usize,

    /// Also write the report (or the CSV for emit-plotdata) to this file.
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Clone)]
struct ConfigArg {
    /// Run config JSON file.
    #[arg(long)]
    config: PathBuf,
}

#[derive(Args, Debug, Clone)]
struct FamilyArgs {
    /// Heisenberg dimension n >= 1.
    #[arg(long)]
    n: usize,

    /// Even grid size N >= 2.
    #[arg(long = "N")]
    big_n: usize,

    /// Target dimension, a positive number or `auto` for 2n + 1.
    #[arg(long, default_value = "auto", value_parser = parse_target)]
    target_a: Target,
}

#[derive(Clone, Debug)]
struct Target(Option<f64>);

fn parse_target(s: &str) -> Result<Target, String> {
    if s == "auto" {
        return Ok(Target(None));
    }
    match s.parse::<f64>() {
        Ok(a) if a > 0.0 && a.is_finite() => Ok(Target(Some(a))),
        _ => Err(format!("expected `auto` or a positive number, got {s}")),
    }
}

fn parse_count(s: &str) -> Result<u64, String> {
    match s.parse::<f64>() {
        Ok(v) if v >= 1.0 && v <= 1e15 && v.fract() == 0.0 => Ok(v as u64),
        _ => Err(format!("expected a whole number between 1 and 1e15, got {s}")),
    }
}

impl FamilyArgs {
    fn cantor(&self, r: Option<f64>) -> CantorArgs {
        CantorArgs {
            n: self.n,
            big_n: self.big_n,
            target_a: self.target_a.0,
            r,
        }
    }
}

#[derive(ValueEnum, Debug, Clone, Copy)]
enum PlotKind {
    /// Annular integrals of the first word, one row per k.
    Eta,
    /// Truncated operator over the eps grid.
    Eps,
    /// Criterion integral of the first word against depth.
    Convergence,
    /// Separating function on its grid.
    Phi,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Criterion for unboundedness at the fixed points of the given words.
    CheckUnbounded(ConfigArg),
    /// End-to-end evidence pipeline for the Heisenberg Cantor set.
    CantorHn {
        #[command(flatten)]
        family: FamilyArgs,
        /// Grid points per axis for the separating function, 2 to 4096.
        #[arg(long, default_value_t = DEFAULT_RESOLUTION)]
        resolution: usize,
        /// Quadrature nodes; the mass cutoff is the map count over this.
        #[arg(long, default_value = "1e6", value_parser = parse_count)]
        budget: u64,
        /// Kernel constant, 2 - Q by default.
        #[arg(long = "c-q", allow_hyphen_values = true)]
        c_q: Option<f64>,
        /// List the stages without computing anything.
        #[arg(long)]
        dry_run: bool,
    },
    /// Integral of the kernel over a region at a point.
    Integrate(ConfigArg),
    /// Annular integrals about the fixed point of each word.
    Telescope(ConfigArg),
    /// Maximal truncated operator over an eps grid.
    Maximal(ConfigArg),
    /// Solve and verify the separating function.
    PhiSolve {
        #[command(flatten)]
        family: FamilyArgs,
        /// Explicit ratio r < 1/N instead of the dimension solve.
        #[arg(long)]
        r: Option<f64>,
        #[arg(long, default_value_t = DEFAULT_RESOLUTION)]
        resolution: usize,
        #[arg(long, default_value_t = DEFAULT_TOL)]
        tol: f64,
    },
    /// Ratio giving the target dimension, with feasibility checks.
    DimSolve {
        #[command(flatten)]
        family: FamilyArgs,
    },
    /// CSV plot data.
    EmitPlotdata {
        #[arg(long, value_enum)]
        kind: PlotKind,
        /// Run config for eta, eps and convergence.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Family for phi.
        #[arg(long)]
        n: Option<usize>,
        #[arg(long = "N")]
        big_n: Option<usize>,
        #[arg(long)]
        r: Option<f64>,
        #[arg(long, default_value_t = DEFAULT_RESOLUTION)]
        resolution: usize,
        #[arg(long, default_value_t = DEFAULT_TOL)]
        tol: f64,
    },
}

enum Output {
    Report(RunReport),
    Csv(String),
}

fn load(path: &Path) -> Result<RunConfig, CliError> {
    RunConfig::from_path(path)
}

fn run(cli: &Cli) -> Result<Output, CliError> {
    let t = cli.threads;
    Ok(match &cli.command {
        Command::CheckUnbounded(c) => Output::Report(commands::check_unbounded(&load(&c.config)?, t)?),
        Command::Integrate(c) => Output::Report(commands::integrate(&load(&c.config)?, t)?),
        Command::Telescope(c) => Output::Report(commands::telescope(&load(&c.config)?, t)?),
        Command::Maximal(c) => Output::Report(commands::maximal(&load(&c.config)?, t)?),
        Command::CantorHn {
            family,
            resolution,
            budget,
            c_q,
            dry_run,
        } => Output::Report(commands::cantor_hn(
            &CantorRun {
                args: family.cantor(None),
                resolution: *resolution,
                budget: *budget,
                c_q: *c_q,
                dry_run: *dry_run,
            },
            t,
        )?),
        Command::PhiSolve {
            family,
            r,
            resolution,
            tol,
        } => Output::Report(commands::phi_solve(&family.cantor(*r), *resolution, *tol)?),
        Command::DimSolve { family } => Output::Report(commands::dim_solve(&family.cantor(None))?),
        Command::EmitPlotdata {
            kind,
            config,
            n,
            big_n,
            r,
            resolution,
            tol,
        } => {
            let need_config = || {
                config
                    .as_deref()
                    .ok_or_else(|| CliError::Invalid("this plot needs --config".into()))
                    .and_then(load)
            };
            Output::Csv(match kind {
                PlotKind::Eta => plot::eta(&need_config()?, t)?,
                PlotKind::Eps => plot::eps(&need_config()?, t)?,
                PlotKind::Convergence => plot::convergence(&need_config()?, t)?,
                PlotKind::Phi => {
                    let (Some(n), Some(big_n)) = (n, big_n) else {
                        return Err(CliError::Invalid("the phi plot needs --n and --N".into()));
                    };
                    let args = CantorArgs {
                        n: *n,
                        big_n: *big_n,
                        target_a: None,
                        r: *r,
                    };
                    plot::phi(&args, *resolution, *tol)?
                }
            })
        }
    })
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { fractal_sio_cli::EXIT_INVALID } else { 0 };
            let _ = e.print();
            return ExitCode::from(code as u8);
        }
    };
    let result = run(&cli).and_then(|out| {
        let (text, code) = match out {
            Output::Report(rep) => (rep.to_json()? + "\n", rep.exit_code),
            Output::Csv(csv) => (csv, 0),
        };
        if let Some(path) = &cli.out {
            std::fs::write(path, &text)?;
        }
        print!("{text}");
        Ok(code)
    });
    match result {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
