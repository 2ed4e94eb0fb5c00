mod commands;
mod config;
mod error;
mod output;

use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use config::{BranchName, Format, ModelConfig, RunConfig, TrajectorySpec};
use error::CliError;
use output::Header;

/// Newton trajectories, Jacobi geodesics and their second variations.
#[derive(Parser, Debug)]
#[command(name = "maupertuis", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// JSON run configuration.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Output file (standard output by default).
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    #[arg(long, global = true, value_enum)]
    format: Option<Format>,

    /// Garnier parameter, 0 < sigma < 1.
    #[arg(long, global = true)]
    sigma: Option<f64>,

    /// Pass threshold for hessian-check, integrator tolerance otherwise.
    #[arg(long, global = true)]
    tol: Option<f64>,

    #[arg(long, global = true)]
    depth: Option<usize>,

    /// Tabulate the closed-form singular geodesic (edge_q2zero | edge_ellipse).
    #[arg(long, global = true, value_name = "BRANCH")]
    closed_form: Option<BranchName>,

    /// Restrict to one separatrix loop.
    #[arg(long, global = true, value_name = "a=REAL", value_parser = parse_orbit)]
    orbit: Option<f64>,
}

#[derive(Subcommand, Debug, Clone, Copy, PartialEq, Eq)]
enum Command {
    /// Integrate a Newton trajectory.
    Simulate,
    /// Jacobi geodesic through the configured trajectory or a closed form.
    Geodesic,
    /// Second-variation identities on random bump variations.
    HessianCheck,
    /// Explicit and family Jacobi fields along separatrix loops.
    JacobiField,
    /// Conjugate points of loop iterates in both pictures.
    ConjugatePoints,
    /// Morse indices and series against the loop-space Poincare series.
    Morse,
}

impl Command {
    fn name(self) -> &'static str {
        match self {
            Command::Simulate => "simulate",
            Command::Geodesic => "geodesic",
            Command::HessianCheck => "hessian-check",
            Command::JacobiField => "jacobi-field",
            Command::ConjugatePoints => "conjugate-points",
            Command::Morse => "morse",
        }
    }
}

fn parse_orbit(s: &str) -> Result<f64, String> {
    let v = s.strip_prefix("a=").ok_or_else(|| format!("expected a=<real>, got {s:?}"))?;
    let a: f64 = v.parse().map_err(|e| format!("invalid orbit constant {v:?}: {e}"))?;
    if !a.is_finite() {
        return Err("orbit constant must be finite".into());
    }
    Ok(a)
}

fn effective_config(cli: &Cli) -> Result<RunConfig, CliError> {
    let mut cfg = match &cli.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    if let Some(p) = &cli.out {
        cfg.output.path = Some(p.clone());
    }
    if let Some(f) = cli.format {
        cfg.output.format = f;
    }
    if let Some(s) = cli.sigma {
        match &mut cfg.model {
            ModelConfig::Garnier { sigma } => *sigma = s,
            ModelConfig::Custom(_) => return Err(CliError::Config("--sigma applies only to the garnier model".into())),
        }
    }
    if let Some(t) = cli.tol {
        if cli.command == Command::HessianCheck {
            cfg.tolerances.threshold = t;
        } else {
            cfg.tolerances.integrator = t;
        }
    }
    if let Some(d) = cli.depth {
        cfg.depth = d;
    }
    if let Some(a) = cli.orbit {
        cfg.orbits = vec![a];
        let t0 = match cfg.trajectory {
            Some(TrajectorySpec::Separatrix { t0, .. }) => t0,
            _ => 0.0,
        };
        cfg.trajectory = Some(TrajectorySpec::Separatrix { a, t0 });
    }
    if cli.closed_form.is_some() && cli.command != Command::Geodesic {
        return Err(CliError::Config("--closed-form applies only to geodesic".into()));
    }
    cfg.validate()?;
    Ok(cfg)
}

fn run(cli: &Cli) -> Result<bool, CliError> {
    let cfg = effective_config(cli)?;
    let (report, passed) = match cli.command {
        Command::Simulate => commands::simulate(&cfg)?,
        Command::Geodesic => commands::geodesic(&cfg, cli.closed_form)?,
        Command::HessianCheck => commands::hessian_check(&cfg)?,
        Command::JacobiField => commands::jacobi_field(&cfg)?,
        Command::ConjugatePoints => commands::conjugate_points_cmd(&cfg)?,
        Command::Morse => commands::morse(&cfg)?,
    };
    let hash = cfg.hash();
    let header = Header { command: cli.command.name(), config_hash: &hash };
    let mut buf = Vec::new();
    output::write(&report, &header, cfg.output.format, &mut buf).map_err(|e| CliError::Io(e.to_string()))?;
    match &cfg.output.path {
        Some(p) => std::fs::write(p, &buf).map_err(|e| CliError::Io(format!("cannot write {}: {e}", p.display())))?,
        None => std::io::stdout().lock().write_all(&buf).map_err(|e| CliError::Io(e.to_string()))?,
    }
    Ok(passed)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                let _ = e.print();
                return ExitCode::SUCCESS;
            }
            let err = CliError::Config(e.to_string().trim().to_string());
            eprintln!("{}", err.to_json());
            return ExitCode::from(err.exit_code());
        }
    };
    match run(&cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("{}", e.to_json());
            ExitCode::from(e.exit_code())
        }
    }
}
