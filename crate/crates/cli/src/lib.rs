//! Command-line front end for the `sdot` solver: problem files, output
//! writers, generators and the verification suite.

pub mod app;
pub mod generate;
pub mod output;
pub mod problem;
pub mod verify;

pub use app::{main_with_args, Cli};
