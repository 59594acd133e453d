//! Library side of the `leafdx` binary: the HTTP inference service, kept
//! importable so integration tests can drive the exact router the
//! `serve` subcommand runs.

pub mod serve;
