pub mod cli;
pub mod config;
pub mod output;
pub mod pipeline;
pub mod plot;

pub use cli::cli_main;
