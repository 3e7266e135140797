use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use smlab_core::constraints::EnumCaps;
use smlab_core::protocol::Outcome;
use smlab_harness::bench::{run_bench_with, ExperimentConfig};
use smlab_harness::market_file::describe_matching;
use smlab_harness::oracle;
use smlab_harness::run::{learn, strategy_from_name, Adversary, LearnerParams};
use smlab_harness::{parse_market_file, read_file, HarnessError};

#[derive(Parser)]
#[command(name = "smlab", version, about = "Learning stable matchings from blocking-pair queries")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one learner against one adversary.
    Learn(LearnArgs),
    /// Run a benchmark grid from a TOML config.
    Bench {
        #[arg(long)]
        config: PathBuf,
        /// Run CSV; summaries are written next to it. Defaults to `out` in the config.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        quiet: bool,
    },
    /// Exact oracles.
    #[command(subcommand)]
    Oracle(OracleCommand),
}

#[derive(Args)]
struct LearnArgs {
    #[arg(long)]
    market: PathBuf,
    #[arg(long)]
    learner: String,
    #[arg(long, default_value = "lex")]
    adversary: String,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long)]
    k: Option<usize>,
    #[arg(long)]
    threshold: Option<f64>,
    #[arg(long)]
    mcmc_steps: Option<u64>,
    #[arg(long)]
    max_rounds: Option<usize>,
    #[arg(long)]
    transcript: Option<PathBuf>,
}

#[derive(Subcommand)]
enum OracleCommand {
    /// Number of linear extensions.
    CountExtensions {
        #[arg(long)]
        n: usize,
        /// e.g. `0<1,1<2`
        #[arg(long, default_value = "")]
        relations: String,
    },
    /// Fraction of linear extensions with `a` before `b`.
    PrefFrac {
        #[arg(long)]
        n: usize,
        #[arg(long, default_value = "")]
        relations: String,
        #[arg(long)]
        a: usize,
        #[arg(long)]
        b: usize,
    },
    /// Fraction of consistent orders ranking `a` last among `remaining`.
    LastFrac {
        #[arg(long)]
        n: usize,
        /// e.g. `0<{1,2};2<{3}`
        #[arg(long, default_value = "")]
        constraints: String,
        /// Comma separated; defaults to all elements.
        #[arg(long, value_delimiter = ',')]
        remaining: Vec<usize>,
        #[arg(long)]
        a: usize,
    },
    /// Every stable matching of a small market.
    StableAll {
        #[arg(long)]
        market: PathBuf,
    },
    /// Truth table against the order-existence reduction.
    SatCheck {
        /// Clauses separated by `;`, e.g. `1 -2 3; -1`
        #[arg(long)]
        cnf: String,
        #[arg(long)]
        vars: Option<usize>,
    },
}

fn run_learn(args: LearnArgs) -> Result<ExitCode, HarnessError> {
    let market = parse_market_file(&read_file(&args.market)?)?;
    let params = LearnerParams {
        alpha: args.alpha,
        k: args.k,
        threshold: args.threshold,
        mcmc_steps: args.mcmc_steps,
    };
    let strategy = strategy_from_name(&args.learner, &params)?;
    let adversary: Adversary = args.adversary.parse()?;
    let result = learn(&market, strategy, adversary, args.seed, args.max_rounds)?;
    if let Some(path) = &args.transcript {
        std::fs::write(path, result.transcript.to_text()).map_err(|e| HarnessError::io(path, e))?;
    }
    println!(
        "outcome={} queries={} restarts={}",
        result.outcome().name(),
        result.queries(),
        result.restarts
    );
    if let Some(m) = &result.matching {
        println!("matching: {}", describe_matching(m));
    }
    Ok(match result.outcome() {
        Outcome::Stable => ExitCode::SUCCESS,
        Outcome::MaxRounds => ExitCode::from(1),
    })
}

fn run_bench_cmd(config: PathBuf, out: Option<PathBuf>, quiet: bool) -> Result<ExitCode, HarnessError> {
    let cfg = ExperimentConfig::from_toml(&read_file(&config)?)?;
    let out = out
        .or_else(|| cfg.out.clone())
        .ok_or_else(|| HarnessError::Config("no output path: pass --out or set out".into()))?;
    let report = run_bench_with(&cfg, |row| {
        if !quiet {
            eprintln!(
                "run {} n={} {} queries={} {}",
                row.run_id, row.n, row.learner, row.queries, row.outcome
            );
        }
    })?;
    let (summary, fits) = report.write(&out)?;
    for fit in &report.fits {
        println!(
            "{} {} queries ~ {:.4} * {} (max ratio {:.4}, {} cells)",
            fit.learner, fit.policy, fit.c, fit.model, fit.max_ratio, fit.cells
        );
    }
    println!("wrote {}, {}, {}", out.display(), summary.display(), fits.display());
    for (id, e) in &report.errors {
        eprintln!("run {id} failed: {e}");
    }
    Ok(if report.errors.is_empty() {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(3)
    })
}

fn run_oracle(cmd: OracleCommand) -> Result<ExitCode, HarnessError> {
    match cmd {
        OracleCommand::CountExtensions { n, relations } => {
            println!("{}", oracle::count_extensions(n, &relations)?);
        }
        OracleCommand::PrefFrac { n, relations, a, b } => {
            println!("{}", oracle::pref_frac_text(n, &relations, a, b)?);
        }
        OracleCommand::LastFrac {
            n,
            constraints,
            remaining,
            a,
        } => {
            let remaining = if remaining.is_empty() {
                (0..n).collect()
            } else {
                remaining
            };
            println!("{}", oracle::last_frac_text(n, &constraints, &remaining, a)?);
        }
        OracleCommand::StableAll { market } => {
            let market = parse_market_file(&read_file(&market)?)?;
            let all = oracle::stable_all(&market)?;
            for m in &all {
                println!("{m}");
            }
            println!("count={}", all.len());
        }
        OracleCommand::SatCheck { cnf, vars } => {
            let check = oracle::sat_check(&oracle::parse_cnf(&cnf, vars)?)?;
            println!("{check}");
            if !check.agrees() {
                return Ok(ExitCode::from(1));
            }
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Err(e) = EnumCaps::from_env() {
        eprintln!("error: {}: {e}", EnumCaps::ENV);
        return ExitCode::from(2);
    }
    let result = match cli.command {
        Command::Learn(args) => run_learn(args),
        Command::Bench { config, out, quiet } => run_bench_cmd(config, out, quiet),
        Command::Oracle(cmd) => run_oracle(cmd),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
