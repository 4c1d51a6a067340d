use std::process::ExitCode;

use clap::Parser;
use mpcbench::{run_cli, Cli};

fn main() -> ExitCode {
    run_cli(Cli::parse())
}
