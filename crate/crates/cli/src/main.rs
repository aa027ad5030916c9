use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;

use serp_cli::{load_config, run, RunOptions};

/// Runs one experiment described by a configuration file.
///
/// Exit status: 0 on success, 1 on errors, 2 when an estimate fell below
/// the measured error. SERP_THREADS caps the number of worker threads.
#[derive(Parser, Debug)]
#[command(name = "serp", version)]
struct Args {
    /// Experiment configuration file.
    config: PathBuf,
    /// Output directory, overriding the one in the configuration.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Do not echo CSV rows to stdout.
    #[arg(long)]
    quiet: bool,
}

fn init_threads() -> anyhow::Result<()> {
    let Ok(v) = std::env::var("SERP_THREADS") else {
        return Ok(());
    };
    let n: usize = v
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| anyhow::anyhow!("SERP_THREADS must be a positive integer, got {v:?}"))?;
    rayon::ThreadPoolBuilder::new().num_threads(n).build_global()?;
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let args = Args::parse();
    let result = init_threads().and_then(|()| {
        let config = load_config(&args.config)?;
        let options = RunOptions {
            out: args.out.clone(),
            quiet: args.quiet,
        };
        run(&config, &options)
    });
    match result {
        Ok(outcome) if outcome.violations.is_empty() => ExitCode::SUCCESS,
        Ok(outcome) => {
            for v in &outcome.violations {
                eprintln!("reliability violation: {v}");
            }
            ExitCode::from(2)
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
