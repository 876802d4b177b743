use std::io;
use std::process::ExitCode;

use clap::Parser;
use heapscope::commands::{run, Cli};

fn main() -> ExitCode {
    let cli = Cli::parse();
    let stdout = io::stdout();
    match run(cli, &mut stdout.lock()) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("heapscope: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
