use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use openq_cli::{run_model, validate, write_csv, CliError, ModelFile, ModelSpec, SolverKind};
use openq_solvers::MapKind;

#[derive(Parser)]
#[command(name = "openq", version, about = "Run open quantum system models from TOML files")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum OutFormat {
    Csv,
}

#[derive(Clone, Copy, ValueEnum)]
enum Map {
    Serial,
    Parallel,
}

#[derive(Subcommand)]
enum Command {
    /// Solve a model and write its expectation values.
    Run {
        model: PathBuf,
        /// Output file; standard output when omitted.
        #[arg(long)]
        output: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        ntraj: Option<usize>,
        /// Overrides the solver named in the model file.
        #[arg(long)]
        solver: Option<String>,
        #[arg(long, value_enum, default_value = "csv")]
        format: OutFormat,
        /// Trajectory scheduling for the stochastic solvers.
        #[arg(long, value_enum)]
        map: Option<Map>,
    },
    /// Parse and check a model without solving it.
    Validate { model: PathBuf },
}

fn load(path: &PathBuf, solver: Option<&str>) -> Result<ModelSpec, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Validation(format!("{}: {e}", path.display())))?;
    let file: ModelFile =
        toml::from_str(&text).map_err(|e| CliError::Validation(format!("syntax: {e}")))?;
    let solver = solver
        .map(|s| s.parse::<SolverKind>().map_err(|e| CliError::Validation(format!("--solver: {e}"))))
        .transpose()?;
    validate(file, solver)
}

fn execute(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Validate { model } => {
            let spec = load(&model, None)?;
            eprintln!("{}: ok ({}, dims {:?})", model.display(), spec.solver, spec.dims);
            Ok(())
        }
        Command::Run { model, output, seed, ntraj, solver, format: OutFormat::Csv, map } => {
            let mut spec = load(&model, solver.as_deref())?;
            if seed.is_some() {
                spec.seed = seed;
            }
            if ntraj.is_some() {
                spec.ntraj = ntraj;
            }
            if let Some(m) = map {
                spec.map = match m {
                    Map::Serial => MapKind::Serial,
                    Map::Parallel => MapKind::Parallel,
                };
            }
            eprintln!("running {} on {}", spec.solver, model.display());
            let table = run_model(&spec)?;
            match output {
                Some(path) => write_csv(&table, &path),
                None => {
                    print!("{}", table.to_csv());
                    Ok(())
                }
            }
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
