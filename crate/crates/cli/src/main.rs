use std::process::ExitCode;

use clap::Parser;
use popassign_cli::{run, Cli, Output, EXIT_ERROR};

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(err) => {
            let code = if err.use_stderr() { EXIT_ERROR } else { 0 };
            let _ = err.print();
            return ExitCode::from(code as u8);
        }
    };
    match run(&cli) {
        Ok(output) => {
            let code = output.exit_code();
            match output {
                Output::Report(report) => {
                    println!("{}", serde_json::to_string_pretty(&report).expect("report serializes"));
                    eprintln!("{}", report.summary());
                }
                Output::Text(text) => println!("{text}"),
            }
            ExitCode::from(code as u8)
        }
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(EXIT_ERROR as u8)
        }
    }
}
