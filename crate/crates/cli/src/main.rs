use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use lcdflow_cli::config::KEYS_HELP;
use lcdflow_cli::{parse_config, run_command};

#[derive(Parser)]
#[command(name = "lcdflow", version, about = "Simulate nematic liquid crystal flow with variable density", after_long_help = KEYS_HELP)]
struct Args {
    /// Run configuration (`key = value` lines, `#` comments).
    #[arg(long)]
    config: PathBuf,
    /// Continue from a checkpoint written by an earlier run of the same configuration.
    #[arg(long)]
    resume: Option<PathBuf>,
}

fn main() -> ExitCode {
    let args = Args::parse();
    let text = match std::fs::read_to_string(&args.config) {
        Ok(t) => t,
        Err(e) => {
            eprintln!("lcdflow: cannot read {}: {e}", args.config.display());
            return ExitCode::from(2);
        }
    };
    let cfg = match parse_config(&text) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("lcdflow: {}: {e}", args.config.display());
            return ExitCode::from(2);
        }
    };
    match run_command(&cfg, args.resume.as_deref()) {
        Ok(summary) => {
            println!("{} finished at t = {}; output in {}", summary.scenario, summary.t_end, cfg.output_dir.display());
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("lcdflow: {e}");
            ExitCode::FAILURE
        }
    }
}
