use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

mod config;
mod error;
mod experiment;
mod output;
mod verify;

use config::LoadedConfig;
use error::CliError;
use experiment::{analyze, build_problem, Problem};

#[derive(Parser)]
#[command(name = "bfem", version, about = "Bayesian finite element experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run an experiment and write its fields and report.
    Run { config: PathBuf },
    /// Run the invariant checks for an experiment.
    Verify {
        config: PathBuf,
        /// Also write the checks as JSON.
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Print a system matrix as `row col value` lines.
    ExportMatrix {
        config: PathBuf,
        #[arg(long, value_enum)]
        which: Which,
        #[arg(long)]
        output: Option<PathBuf>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Which {
    #[value(name = "K")]
    K,
    #[value(name = "M")]
    M,
    #[value(name = "Kc")]
    Kc,
    #[value(name = "Phi")]
    Phi,
}

fn load(path: &Path) -> Result<(LoadedConfig, Problem), CliError> {
    let cfg = LoadedConfig::load(path)?;
    let problem = build_problem(&cfg)?;
    Ok((cfg, problem))
}

fn run(path: &Path) -> Result<(), CliError> {
    let (cfg, problem) = load(path)?;
    let analysis = analyze(&cfg, &problem)?;
    let dir = cfg.output_dir();
    fs::create_dir_all(&dir)?;

    let mut files = match problem.kind {
        "bar" => {
            let export = cfg.config.ensemble.as_ref().map_or(0, |e| e.export);
            output::write_bar(&dir, &problem, &analysis, export)?
        }
        _ => output::write_plate(&dir, &cfg.config.name, &problem, &analysis)?,
    };
    if cfg.config.outputs.samples {
        files.extend(output::write_samples(&dir, &analysis)?);
    }
    let galerkin = verify::galerkin_deviation(&problem)?;
    let diagnostics = output::diagnostics(&problem, &analysis, galerkin);
    files.push("report.json".to_string());
    let report = output::report(&cfg, &problem, &analysis, diagnostics, &files);
    let text = serde_json::to_string_pretty(&report).map_err(|e| CliError::Io(e.to_string()))?;
    fs::write(dir.join("report.json"), text + "\n")?;
    println!("{}: wrote {} files to {}", cfg.config.name, files.len(), dir.display());
    Ok(())
}

fn verify(path: &Path, report: Option<&Path>) -> Result<bool, CliError> {
    let (cfg, problem) = load(path)?;
    let analysis = analyze(&cfg, &problem)?;
    let checks = verify::run_checks(&cfg, &problem, &analysis)?;
    for c in &checks {
        println!("{}", c.line());
    }
    let ok = checks.iter().all(|c| c.passed);
    println!("{}: {} of {} checks passed", cfg.config.name, checks.iter().filter(|c| c.passed).count(), checks.len());
    if let Some(p) = report {
        let doc = serde_json::json!({
            "schema_version": output::REPORT_SCHEMA_VERSION,
            "name": cfg.config.name,
            "passed": ok,
            "checks": checks,
        });
        let text = serde_json::to_string_pretty(&doc).map_err(|e| CliError::Io(e.to_string()))?;
        fs::write(p, text + "\n")?;
    }
    Ok(ok)
}

fn export_matrix(path: &Path, which: Which, out: Option<&Path>) -> Result<(), CliError> {
    let (_, problem) = load(path)?;
    let sys = &problem.system;
    let m = match which {
        Which::K => sys.k.as_csc(),
        Which::M => sys.m.as_csc(),
        Which::Kc => sys.kc.as_csc(),
        Which::Phi => &sys.phi,
    };
    match out {
        Some(p) => m.write_triplets(std::io::BufWriter::new(fs::File::create(p)?))?,
        None => {
            let stdout = std::io::stdout();
            let mut lock = stdout.lock();
            m.write_triplets(&mut lock)?;
            lock.flush()?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Run { config } => run(config).map(|_| true),
        Command::Verify { config, report } => verify(config, report.as_deref()),
        Command::ExportMatrix { config, which, output } => export_matrix(config, *which, output.as_deref()).map(|_| true),
    };
    match result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("bfem: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
