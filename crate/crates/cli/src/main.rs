use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use diffeq_cli::config::ExperimentConfig;
use diffeq_cli::{exit_code, run, suite, Ctx};

#[derive(Parser)]
#[command(name = "diffeq", version, about = "Equivariance experiments on sampled fields")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Experiment config (JSON); built-in defaults when omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory; overrides the config's `out_dir`.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Worker threads (0 = all cores).
    #[arg(long, global = true, default_value_t = 0)]
    threads: usize,
    #[arg(long, short, global = true)]
    verbose: bool,
}

#[derive(Subcommand, Clone, Copy)]
enum Command {
    /// Defect sweeps and falsification verdicts for the configured operators.
    Defect,
    /// Contraction decay curves.
    Decay,
    /// All checks, summarized as a scoreboard.
    Suite,
    /// Pullback operator-norm estimates against the analytic bound.
    NormBound,
    /// Disjoint-ball approximation of a field on a ball.
    Vitali,
    /// The operator zoo: zero images and Lipschitz estimates.
    Zoo,
    /// Print the default config.
    Config,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let mut cfg = match &cli.config {
        Some(path) => match ExperimentConfig::load(path) {
            Ok(c) => c,
            Err(e) => {
                eprintln!("error: {e}");
                return ExitCode::from(2);
            }
        },
        None => ExperimentConfig::default(),
    };
    if let Command::Config = cli.command {
        println!("{}", cfg.to_json());
        return ExitCode::SUCCESS;
    }
    if let Some(out) = &cli.out {
        cfg.out_dir = out.clone();
    }
    if cli.threads > 0 {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(cli.threads).build_global() {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    }
    let result = Ctx::new(cfg, cli.verbose).and_then(|ctx| match cli.command {
        Command::Defect => run::run_defect(&ctx),
        Command::Decay => run::run_decay(&ctx),
        Command::Suite => suite::run_suite(&ctx),
        Command::NormBound => run::run_norm_bound(&ctx),
        Command::Vitali => run::run_vitali(&ctx),
        Command::Zoo => run::run_zoo(&ctx),
        Command::Config => unreachable!(),
    });
    let code = exit_code(&result);
    match &result {
        Err(e) => eprintln!("error: {e}"),
        Ok(false) => eprintln!("one or more checks failed"),
        Ok(true) => {}
    }
    ExitCode::from(code as u8)
}
