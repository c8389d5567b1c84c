//! Configuration, output and subcommands behind the `mixsvm` binary.

pub mod commands;
pub mod config;
pub mod output;
pub mod plot;

pub use commands::{run, Command, Outcome};
pub use config::{load, parse_str, Resolved};
pub use output::{read_csv, write_csv};
