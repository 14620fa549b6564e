use std::process::ExitCode;

use clap::Parser;
use reslab_cli::{run, Experiment, ExperimentConfig};

#[derive(Parser)]
#[command(name = "reslab", version, about = "Resonances and twisted zeta functions of Schottky surfaces")]
struct Cli {
    #[arg(value_enum)]
    experiment: Experiment,
    #[command(flatten)]
    options: ExperimentConfig,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let result = cli.options.with_file(cli.experiment).and_then(|cfg| run(&cfg));
    match result {
        Ok(outcome) => {
            println!("{}", outcome.summary);
            if let Some(msg) = &outcome.failed_check {
                eprintln!("check failed: {msg}");
            }
            ExitCode::from(outcome.exit_code() as u8)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
