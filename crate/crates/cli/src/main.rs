use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use dalloc_cli::{CliError, Overrides, RunConfig, RunManifest, EXIT_VALIDATION};
use dalloc_core::Profile;

#[derive(Parser)]
#[command(name = "dalloc", version, about = "Constrained contextual bandits for discount allocation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// TOML config, or a manifest-*.json from an earlier run.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Overrides the run seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Size preset: desk or full.
    #[arg(long, value_parser = parse_profile)]
    profile: Option<Profile>,
    /// Worker threads for Monte Carlo iterations.
    #[arg(long)]
    workers: Option<usize>,
    /// Output directory.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Subcommand)]
enum Command {
    /// Write a uniformly randomised campaign log from the synthetic world.
    GenData(Common),
    /// Train the context embedding network on a log.
    TrainEmbeddings {
        #[command(flatten)]
        common: Common,
        /// JSONL replay log.
        #[arg(long)]
        data: PathBuf,
    },
    /// Run the policy comparison and studies, then draw the charts.
    Simulate(Common),
    /// Evaluate a policy offline on a randomised log.
    Replay {
        #[command(flatten)]
        common: Common,
        /// JSONL replay log.
        #[arg(long)]
        log: PathBuf,
    },
    /// Solve one allocation problem.
    Allocate {
        /// CSV with a `customer` column followed by one column per depth.
        #[arg(long)]
        scores: PathBuf,
        /// JSON with `w`, `engagement` and `capacities`.
        #[arg(long)]
        constraints: PathBuf,
        /// Output directory.
        #[arg(long)]
        out: PathBuf,
    },
    /// Redraw the charts of a results directory.
    Report {
        /// Directory written by `simulate`.
        #[arg(long)]
        results: PathBuf,
    },
}

fn parse_profile(s: &str) -> Result<Profile, String> {
    Profile::parse(s).map_err(|e| e.to_string())
}

fn config(common: &Common) -> dalloc_cli::Result<RunConfig> {
    RunConfig::resolve(
        common.config.as_deref(),
        Overrides {
            profile: common.profile,
            seed: common.seed,
        },
    )
}

fn finish(m: &RunManifest, out: &std::path::Path) {
    for o in &m.outputs {
        println!("{}", out.join(&o.path).display());
    }
    let total: f64 = m.timings.values().sum();
    eprintln!("{} done in {total:.1}s (config {})", m.command, &m.config_hash[..12]);
}

fn run(cli: Cli) -> dalloc_cli::Result<()> {
    match cli.command {
        Command::GenData(c) => {
            let cfg = config(&c)?;
            let m = dalloc_cli::with_workers(c.workers, || dalloc_cli::gen_data(&cfg, &c.out))?;
            finish(&m, &c.out);
        }
        Command::TrainEmbeddings { common: c, data } => {
            let cfg = config(&c)?;
            let m = dalloc_cli::with_workers(c.workers, || dalloc_cli::train_embeddings(&cfg, &data, &c.out))?;
            finish(&m, &c.out);
        }
        Command::Simulate(c) => {
            let cfg = config(&c)?;
            let m = dalloc_cli::with_workers(c.workers, || dalloc_cli::simulate(&cfg, &c.out))?;
            finish(&m, &c.out);
        }
        Command::Replay { common: c, log } => {
            let cfg = config(&c)?;
            let (m, r) = dalloc_cli::with_workers(c.workers, || dalloc_cli::replay(&cfg, &log, &c.out))?;
            println!(
                "replay mean {:.4} +/- {:.4} (log mean {:.4}, {} of {} events retained)",
                r.mean_value, r.standard_error, r.log_mean_value, r.n_retained, r.n_events
            );
            finish(&m, &c.out);
        }
        Command::Allocate { scores, constraints, out } => {
            let (m, s) = dalloc_cli::allocate(&scores, &constraints, &out)?;
            println!("objective {} ({} of {} customers assigned)", s.objective, s.n_assigned, s.n_customers);
            finish(&m, &out);
        }
        Command::Report { results } => {
            let m = dalloc_cli::report(&results)?;
            finish(&m, &results);
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { EXIT_VALIDATION as u8 } else { 0 });
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let kind = match e {
                CliError::Validation(_) => "invalid input",
                CliError::Runtime(_) => "error",
            };
            eprintln!("dalloc: {kind}: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
