//! `sleet`: backtests and synthetic data for sequential aggregation of
//! sleeping experts.

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

use sleet_cli::backtest::run_backtest;
use sleet_cli::config::RawConfig;
use sleet_cli::dataset_io::save_dataset;
use sleet_cli::error::{CliError, Result};
use sleet_cli::report::emit_report;
use sleet_cli::synth::{generate, ActivityModel, Skill, SynthSpec};

#[derive(Parser)]
#[command(
    name = "sleet",
    about = "Backtests for sequential aggregation of specialized (sleeping) experts"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a backtest from a config file and/or flags (flags win).
    Run(Box<RunArgs>),
    /// Generate a synthetic dataset file.
    Generate(GenerateArgs),
}

/// Every value is taken as text and validated by the same resolver that
/// handles config files, so a flag and a file entry fail identically.
#[derive(Args)]
struct RunArgs {
    /// Path to a line-oriented `key = value` config file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Dataset file (csv: timestamp, observation, optional group, experts).
    #[arg(long)]
    data: Option<String>,
    /// Loss: square, absolute, or absolute-percentage.
    #[arg(long)]
    loss: Option<String>,
    /// Rule ([meta-]<ewa|specialist|fixed-share>[-grad][-op]) or oracle
    /// (uniform, best-expert, best-convex, best-compound:<m>, prescient,
    /// partition).
    #[arg(long)]
    rule: Option<String>,
    /// Learning rate for a fixed-parameter rule.
    #[arg(long)]
    eta: Option<String>,
    /// Mixing rate for fixed-share.
    #[arg(long)]
    alpha: Option<String>,
    /// Rounds per frozen block for operational rules.
    #[arg(long = "block-size")]
    block_size: Option<String>,
    /// Prior: uniform (default) or fair.
    #[arg(long)]
    prior: Option<String>,
    /// Expert group sizes for the fair prior, e.g. 24,10,1.
    #[arg(long)]
    groups: Option<String>,
    /// Meta grid: a preset name, eta list, or eta@alpha list.
    #[arg(long)]
    grid: Option<String>,
    /// Seed learning rates for an adaptive meta grid.
    #[arg(long = "adaptive-grid")]
    adaptive_grid: Option<String>,
    /// Random seed for search-based oracles.
    #[arg(long)]
    seed: Option<String>,
    /// Report output path (stdout when omitted).
    #[arg(long)]
    report: Option<String>,
    /// Report format: structured-text (default) or tabular.
    #[arg(long)]
    format: Option<String>,
    /// Known forecast/observation bound B (inferred from data when omitted).
    #[arg(long)]
    bound: Option<String>,
    /// Evaluation budget for search-based oracles.
    #[arg(long)]
    budget: Option<String>,
}

#[derive(Args)]
struct GenerateArgs {
    /// Output dataset path.
    #[arg(long)]
    out: PathBuf,
    /// Number of experts.
    #[arg(long)]
    experts: usize,
    /// Number of rounds.
    #[arg(long)]
    rounds: usize,
    /// Forecast/observation bound B.
    #[arg(long, default_value_t = 1.0)]
    bound: f64,
    /// Activity: always, periodic:<period>, or random:<rate>.
    #[arg(long, default_value = "always")]
    activity: String,
    /// Per-expert bias:noise pairs, e.g. 0:0.05,0.2:0.1,-0.2:0.1.
    #[arg(long)]
    skills: String,
    /// Rounds at which the skill table rotates, e.g. 1000.
    #[arg(long)]
    shifts: Option<String>,
    /// Emit cyclic group labels g0..g{k-1} with this cycle length.
    #[arg(long = "group-cycle")]
    group_cycle: Option<usize>,
    /// Random seed.
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

fn parse_activity(text: &str) -> Result<ActivityModel> {
    if text == "always" {
        return Ok(ActivityModel::AlwaysOn);
    }
    if let Some(arg) = text.strip_prefix("periodic:") {
        let period = arg.parse::<usize>().map_err(|_| {
            CliError::Config(format!("periodic activity wants a period, got \"{arg}\""))
        })?;
        return Ok(ActivityModel::PeriodicSleep { period });
    }
    if let Some(arg) = text.strip_prefix("random:") {
        let rate = arg.parse::<f64>().map_err(|_| {
            CliError::Config(format!("random activity wants a rate, got \"{arg}\""))
        })?;
        return Ok(ActivityModel::RandomSleep { rate });
    }
    Err(CliError::Config(format!(
        "unknown activity \"{text}\"; expected always, periodic:<p>, or random:<rate>"
    )))
}

fn parse_skills(text: &str) -> Result<Vec<Skill>> {
    text.split(',')
        .map(str::trim)
        .map(|entry| {
            let (bias, noise) = entry.split_once(':').ok_or_else(|| {
                CliError::Config(format!("skill entry \"{entry}\" is not bias:noise"))
            })?;
            let parse = |part: &str| {
                part.trim().parse::<f64>().map_err(|_| {
                    CliError::Config(format!("skill entry \"{entry}\" has an unreadable number"))
                })
            };
            Ok(Skill { bias: parse(bias)?, noise: parse(noise)? })
        })
        .collect()
}

fn parse_shifts(text: &str) -> Result<Vec<usize>> {
    text.split(',')
        .map(str::trim)
        .map(|entry| {
            entry.parse::<usize>().map_err(|_| {
                CliError::Config(format!("shift \"{entry}\" is not a round number"))
            })
        })
        .collect()
}

fn run(args: Box<RunArgs>) -> Result<()> {
    let base = match &args.config {
        Some(path) => RawConfig::from_file(path)?,
        None => RawConfig::default(),
    };
    let flags = RawConfig {
        data: args.data,
        loss: args.loss,
        rule: args.rule,
        eta: args.eta,
        alpha: args.alpha,
        block_size: args.block_size,
        prior: args.prior,
        groups: args.groups,
        grid: args.grid,
        adaptive_grid: args.adaptive_grid,
        seed: args.seed,
        report: args.report,
        format: args.format,
        bound: args.bound,
        budget: args.budget,
    };
    let cfg = base.overlay(flags).resolve()?;
    let outcome = run_backtest(&cfg)?;
    for note in &outcome.notes {
        println!("{note}");
    }
    if let Some(path) = &cfg.report {
        // The report goes to a file; give the terminal the headline numbers.
        match outcome.report.rmse {
            Some(rmse) => println!("rmse = {rmse:.6e}"),
            None => println!("mean loss = {:.6e}", outcome.report.mean_loss),
        }
        println!("report written to {}", path.display());
    }
    emit_report(&outcome.report, cfg.report.as_deref(), cfg.format)
}

fn generate_command(args: GenerateArgs) -> Result<()> {
    let spec = SynthSpec {
        experts: args.experts,
        rounds: args.rounds,
        bound: args.bound,
        activity: parse_activity(&args.activity)?,
        skills: parse_skills(&args.skills)?,
        shifts: match &args.shifts {
            Some(text) => parse_shifts(text)?,
            None => Vec::new(),
        },
        group_cycle: args.group_cycle,
        seed: args.seed,
    };
    let synthetic = generate(&spec)?;
    save_dataset(&args.out, &synthetic.data, synthetic.groups.as_deref(), None)?;
    println!(
        "wrote {} rounds x {} experts to {}",
        spec.rounds,
        spec.experts,
        args.out.display()
    );
    Ok(())
}

fn main() {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run(args) => run(args),
        Command::Generate(args) => generate_command(args),
    };
    if let Err(e) = result {
        eprintln!("error: {e}");
        std::process::exit(2);
    }
}
