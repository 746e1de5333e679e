use std::path::PathBuf;
use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::{ArgAction, CommandFactory, Parser, Subcommand, ValueEnum};
use rqsim::engine::Mode;
use rqsim::runner;
use rqsim::Error;

#[derive(Parser)]
#[command(name = "rqsim", version, about = "Review-queue simulator")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    Replay,
    Counterfactual,
}

impl From<ModeArg> for Mode {
    fn from(m: ModeArg) -> Self {
        match m {
            ModeArg::Replay => Mode::Replay,
            ModeArg::Counterfactual => Mode::Counterfactual,
        }
    }
}

#[derive(Subcommand)]
enum Cmd {
    /// Run one scenario and write its log, series and summary.
    Run {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, env = "RQSIM_OUT", default_value = "out")]
        out: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, value_enum)]
        mode: Option<ModeArg>,
    },
    /// Run a parameter sweep described by a sweep file.
    Sweep {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, env = "RQSIM_OUT", default_value = "out")]
        out: PathBuf,
        /// Worker threads; 0 uses every core.
        #[arg(long, default_value_t = 0)]
        jobs: usize,
    },
    /// Run two scenarios over the same trace and report the differences.
    Compare {
        /// Two scenarios: `--config A B` or `--config A --config B`.
        #[arg(long, num_args = 1..=2, action = ArgAction::Append, required = true)]
        config: Vec<PathBuf>,
        #[arg(long, env = "RQSIM_OUT", default_value = "out")]
        out: PathBuf,
    },
    /// Check a scenario without running it.
    Validate {
        #[arg(long)]
        config: PathBuf,
    },
}

fn fail(e: Error) -> ExitCode {
    eprintln!("error: {e}");
    if let Error::Invalid(diags) = &e {
        for d in diags {
            eprintln!("  {d}");
        }
    }
    ExitCode::from(if e.is_config_error() { 1 } else { 2 })
}

fn fmt_opt(x: Option<f64>) -> String {
    x.map_or_else(|| "-".into(), |v| format!("{v:.3}"))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match cli.cmd {
        Cmd::Run {
            config,
            out,
            seed,
            mode,
        } => match runner::cmd_run(&config, &out, seed, mode.map(Into::into)) {
            Ok(r) => {
                let s = &r.summary;
                println!(
                    "closed {} actioned {} avg_tat_s {} utilization {}",
                    s.jobs_closed,
                    s.jobs_actioned,
                    fmt_opt(s.avg_tat_s),
                    fmt_opt(s.utilization)
                );
                println!(
                    "{} events in {:.3} s ({:.0} events/s); artifacts in {}",
                    s.events_processed,
                    r.wall.as_secs_f64(),
                    r.events_per_sec(),
                    out.display()
                );
                ExitCode::SUCCESS
            }
            Err(e) => fail(e),
        },
        Cmd::Sweep { config, out, jobs } => match runner::cmd_sweep(&config, &out, jobs) {
            Ok(rows) => {
                println!(
                    "{} runs; table in {}",
                    rows.len(),
                    out.join("sweep.csv").display()
                );
                ExitCode::SUCCESS
            }
            Err(e) => fail(e),
        },
        Cmd::Compare { config, .. } if config.len() != 2 => Cli::command()
            .error(
                ErrorKind::WrongNumberOfValues,
                "compare takes exactly two --config paths",
            )
            .exit(),
        Cmd::Compare { config, out } => match runner::cmd_compare(&config[0], &config[1], &out) {
            Ok(r) => {
                println!(
                    "delta utilization {} delta avg_tat_s {}",
                    fmt_opt(r.delta_utilization),
                    fmt_opt(r.delta_avg_tat_s)
                );
                for q in &r.queues {
                    println!(
                        "  {}: peak {} -> {}, delta avg_tat_s {}",
                        q.queue,
                        q.peak_load_a,
                        q.peak_load_b,
                        fmt_opt(q.delta_avg_tat_s)
                    );
                }
                ExitCode::SUCCESS
            }
            Err(e) => fail(e),
        },
        Cmd::Validate { config } => match runner::cmd_validate(&config) {
            Ok(diags) if diags.is_empty() => {
                println!("OK");
                ExitCode::SUCCESS
            }
            Ok(diags) => {
                for d in &diags {
                    println!("{d}");
                }
                ExitCode::from(3)
            }
            Err(e) => fail(e),
        },
    }
}
