use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use scorebox::bench::{
    cmd_gen, cmd_golden, cmd_loocv, cmd_minset, cmd_regret, parse_policies, resolve_bundle_domain,
    BenchConfig, Overrides,
};
use scorebox::Error;

const EXIT_RUNTIME: u8 = 1;
const EXIT_CONFIG: u8 = 2;
const EXIT_ACCEPTANCE: u8 = 3;

#[derive(Parser, Debug)]
#[command(
    name = "scorebox",
    version,
    about = "Experience-guided constraint selection experiments"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// Experiment configuration (TOML or JSON)
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Output directory
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Comma-separated subset of box,static,rand,doo,raw
    #[arg(long, global = true)]
    policies: Option<String>,

    /// Evaluation budget
    #[arg(long, global = true)]
    k: Option<usize>,

    /// UCB exploration constant
    #[arg(long, global = true)]
    zeta: Option<f64>,

    /// Monte-Carlo trials for `regret`
    #[arg(long, global = true)]
    trials: Option<usize>,
}

#[derive(Subcommand, Debug, Clone, Copy)]
enum Command {
    /// Generate training data and write the bundle
    Gen,
    /// Leave-one-out policy comparison
    Loocv,
    /// Minimal constraint set and BOX on it versus the full set
    Minset,
    /// Monte-Carlo check of the regret bound
    Regret,
    /// Illustration scenario with its negative control
    Golden,
}

fn load(cli: &Cli) -> Result<BenchConfig, Error> {
    let mut cfg = match &cli.config {
        Some(path) => BenchConfig::load(path)?,
        None => BenchConfig::default(),
    };
    cfg.apply(&Overrides {
        seed: cli.seed,
        out: cli.out.clone(),
        policies: cli.policies.as_deref().map(parse_policies).transpose()?,
        k: cli.k,
        zeta: cli.zeta,
        trials: cli.trials,
    });
    resolve_bundle_domain(&mut cfg)?;
    cfg.validate()?;
    Ok(cfg)
}

fn print_json<T: serde::Serialize>(value: &T) -> Result<(), Error> {
    println!("{}", serde_json::to_string_pretty(value)?);
    Ok(())
}

fn run(command: Command, cfg: &BenchConfig) -> Result<bool, Error> {
    match command {
        Command::Gen => {
            let r = cmd_gen(cfg)?;
            println!(
                "n = {}, m = {}, sentinel = {}, mean |correlation| = {:.4}, bundle at {}",
                r.n,
                r.m,
                r.sentinel,
                r.mean_abs_correlation,
                r.path.display()
            );
        }
        Command::Loocv => print_json(&cmd_loocv(cfg)?.1)?,
        Command::Minset => print_json(&cmd_minset(cfg)?.1)?,
        Command::Regret => {
            let report = cmd_regret(cfg)?;
            print_json(&report)?;
            return Ok(report.violation_rate <= report.tolerance());
        }
        Command::Golden => {
            let report = cmd_golden(cfg.loocv.zeta, Some(&cfg.out))?;
            for (label, checks) in [
                ("scenario", &report.scenario),
                ("control", &report.negative_control),
            ] {
                for c in checks {
                    println!(
                        "{label} {:<34} {} ({})",
                        c.name,
                        if c.passed { "pass" } else { "fail" },
                        c.detail
                    );
                }
            }
            println!("golden: {}", if report.passed { "PASS" } else { "FAIL" });
            return Ok(report.passed);
        }
    }
    Ok(true)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let cfg = match load(&cli) {
        Ok(cfg) => cfg,
        Err(e) => {
            eprintln!("configuration error: {e}");
            return ExitCode::from(EXIT_CONFIG);
        }
    };
    match run(cli.command, &cfg) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(EXIT_ACCEPTANCE),
        Err(e @ (Error::InvalidParam(_) | Error::BudgetTooLarge { .. })) => {
            eprintln!("configuration error: {e}");
            ExitCode::from(EXIT_CONFIG)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(EXIT_RUNTIME)
        }
    }
}
