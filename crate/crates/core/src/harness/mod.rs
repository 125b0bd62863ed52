pub mod config;
pub mod export;
pub mod experiments;
pub mod cli;
