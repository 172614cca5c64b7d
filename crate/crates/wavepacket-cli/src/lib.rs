//! Configuration, experiments and output plumbing for the `wavepacket`
//! command-line runner.

pub mod config;
pub mod experiments;
pub mod manifest;
