//! Circuit files, simulation front end and the `fockforge` command line.

pub mod circuit;
pub mod cli;
pub mod sim;
pub mod tsv;

pub use circuit::{parse_circuit, serialize_circuit, CircuitFile, ParseError};
pub use cli::run;
