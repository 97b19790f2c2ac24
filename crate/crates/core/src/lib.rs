pub mod audio;
pub mod classifier;
pub mod cli;
pub mod config;
pub mod cope;
pub mod error;
pub mod eval;
pub mod gammatone;
pub mod mixer;
pub mod peaks;
pub mod pipeline;
pub mod sweep;
pub mod synth;
