use std::process::ExitCode;

use clap::Parser;

fn main() -> ExitCode {
    // clap exits with 2 on usage errors, matching the data-input code.
    mpve_cli::run(mpve_cli::args::Cli::parse())
}
