//! Command-line front end: data loading, report formats and the three
//! subcommands `fit`, `select-q` and `simulate`.

pub mod args;
pub mod commands;
pub mod error;
pub mod report;

pub use args::{Cli, Command};
pub use error::{exit, CliError};

pub fn run(cli: &Cli) -> Result<i32, CliError> {
    match &cli.command {
        Command::Fit(a) => commands::cmd_fit(a),
        Command::SelectQ(a) => commands::cmd_select_q(a),
        Command::Simulate(a) => commands::cmd_simulate(a),
    }
}
