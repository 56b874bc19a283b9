pub mod chsh;
pub mod cli;
pub mod config;
pub mod continuum;
pub mod error;
pub mod hybrid;
pub mod montecarlo;
pub mod protocol;
pub mod spdc;
