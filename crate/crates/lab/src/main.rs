use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use dgbo_lab::error::{EXIT_OK, EXIT_VERDICT};
use dgbo_lab::{run, ExperimentConfig, ExperimentKind, LabError, LabResult};

#[derive(Parser)]
#[command(
    name = "dgbo-lab",
    version,
    about = "Numerical experiments for u_t + D^{a+1} u_x + u u_x = 0"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Paths {
    /// TOML experiment configuration.
    #[arg(long)]
    config: PathBuf,
    /// Output directory; overrides `output` in the config.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Integrate a datum and record probes.
    Evolve(Paths),
    /// Check the conservation and moment laws along a run.
    Identities(Paths),
    /// Evolve through the special time t*.
    Tstar(Paths),
    /// Solve for a moment-matched pair and write its certificate.
    PairMatch(Paths),
    /// Co-evolve a matched pair and track the difference.
    DiffDecay(Paths),
    /// Stein-derivative asymptotics and phase bounds.
    SteinSuite(Paths),
    /// Residuals of the xi-derivative expansions.
    ExpansionSuite(Paths),
}

impl Command {
    fn split(&self) -> (ExperimentKind, &Paths) {
        match self {
            Command::Evolve(p) => (ExperimentKind::Evolve, p),
            Command::Identities(p) => (ExperimentKind::Identities, p),
            Command::Tstar(p) => (ExperimentKind::Tstar, p),
            Command::PairMatch(p) => (ExperimentKind::PairMatch, p),
            Command::DiffDecay(p) => (ExperimentKind::DiffDecay, p),
            Command::SteinSuite(p) => (ExperimentKind::SteinSuite, p),
            Command::ExpansionSuite(p) => (ExperimentKind::ExpansionSuite, p),
        }
    }
}

fn set_threads() -> LabResult<()> {
    let Ok(raw) = std::env::var("DGBO_THREADS") else {
        return Ok(());
    };
    let n: usize = raw.trim().parse().ok().filter(|n| *n > 0).ok_or_else(|| {
        LabError::config(format!(
            "DGBO_THREADS must be a positive integer, got `{raw}`"
        ))
    })?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| LabError::config(e.to_string()))
}

fn execute(cli: &Cli) -> LabResult<i32> {
    set_threads()?;
    let (kind, paths) = cli.command.split();
    let cfg = ExperimentConfig::load(&paths.config)?;
    if cfg.kind != kind {
        return Err(LabError::config(format!(
            "config kind `{}` does not match subcommand `{}`",
            cfg.kind.name(),
            kind.name()
        )));
    }
    let out = paths
        .out
        .clone()
        .or_else(|| cfg.output.clone())
        .ok_or_else(|| LabError::config("no output directory: pass --out or set `output`"))?;
    let report = run(&cfg)?;
    report.write(&out, &cfg)?;
    print!("{}", report.verdicts_text());
    Ok(if report.passed() {
        EXIT_OK
    } else {
        EXIT_VERDICT
    })
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let code = match execute(&cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("dgbo-lab: {e}");
            e.exit_code()
        }
    };
    ExitCode::from(code as u8)
}
