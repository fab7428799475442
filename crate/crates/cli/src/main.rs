use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use zeno_cli::config::{convention_from_name, parse_config, ExperimentConfig};
use zeno_cli::runner::{self, Artifact, RunError};
use zeno_cli::verify::{report_json, run_criteria, VerifyOptions};

#[derive(Parser)]
#[command(name = "zeno", version, about = "Zeno and anti-Zeno decay rates of open spin-boson systems")]
struct Cli {
    /// Experiment config (TOML).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory; overrides the config's output.directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Worker threads (defaults to the number of cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Reserved; nothing is random yet.
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Reduced-state time series.
    Dynamics,
    /// Effective decay rate over the tau grid, with extrema and Zeno time.
    ZenoScan,
    /// Zeno time from the short-time slope of the decay rate.
    ZenoTime,
    /// Distance to the orthogonal state and its loss/gain split.
    Infoflow,
    /// Run the acceptance criteria.
    Verify {
        /// Criterion ids; all when omitted.
        ids: Vec<u8>,
        /// Link convention for the zero-temperature hierarchy
        /// (derived, swapped, mis_signed).
        #[arg(long, default_value = "derived")]
        convention: String,
        /// Cap on the hierarchy depth.
        #[arg(long)]
        l_max: Option<usize>,
    },
}

fn load(path: Option<&Path>) -> Result<ExperimentConfig, RunError> {
    let path = path.ok_or_else(|| RunError::Config("--config is required for this command".into()))?;
    let text = std::fs::read_to_string(path)
        .map_err(|e| RunError::Config(format!("cannot read {}: {e}", path.display())))?;
    Ok(parse_config(&text)?)
}

fn run_experiment(cli: &Cli, f: fn(&ExperimentConfig) -> runner::Result<Vec<Artifact>>) -> Result<(), RunError> {
    let cfg = load(cli.config.as_deref())?;
    let dir = cli.out.clone().unwrap_or_else(|| cfg.output.directory.clone());
    let artifacts = f(&cfg)?;
    runner::write_artifacts(&dir, &artifacts)?;
    for a in &artifacts {
        println!("{}", dir.join(&a.name).display());
    }
    Ok(())
}

fn verify(cli: &Cli, ids: &[u8], convention: &str, l_max: Option<usize>) -> Result<bool, RunError> {
    let convention = convention_from_name(convention)
        .ok_or_else(|| RunError::Config(format!("unknown convention \"{convention}\"")))?;
    let mut opts = VerifyOptions { convention, l_max };
    if let Some(path) = cli.config.as_deref() {
        let cfg = load(Some(path))?;
        opts.l_max = opts.l_max.or(Some(cfg.solver.l_max));
    }
    let reports = run_criteria(ids, &opts);
    for r in &reports {
        println!("{}", r.line());
    }
    if let Some(dir) = &cli.out {
        std::fs::create_dir_all(dir)?;
        std::fs::write(dir.join("verify_report.json"), report_json(&reports))?;
    }
    Ok(reports.iter().all(|r| r.passed))
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("cannot set up {n} threads: {e}");
            return ExitCode::from(2);
        }
    }
    let result = match &cli.command {
        Command::Dynamics => run_experiment(&cli, runner::run_dynamics).map(|_| true),
        Command::ZenoScan => run_experiment(&cli, runner::run_zeno_scan).map(|_| true),
        Command::ZenoTime => run_experiment(&cli, runner::run_zeno_time).map(|_| true),
        Command::Infoflow => run_experiment(&cli, runner::run_infoflow).map(|_| true),
        Command::Verify { ids, convention, l_max } => verify(&cli, ids, convention, *l_max),
    };
    match result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(4),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
