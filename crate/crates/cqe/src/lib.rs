//! Collaborative query expansion: the service around `cqe-core`.
//!
//! This crate adds what needs an operating system: the search-engine client
//! with its fixture cache, corpus and graph file formats, durable query-pool
//! storage, TOML configuration, the HTTP API and the `cqe` command line.

pub mod config;
pub mod engine;
pub mod formats;
pub mod server;
pub mod service;
pub mod store;

pub use cqe_core;

/// Wall-clock milliseconds since the Unix epoch.
pub fn now_millis() -> u64 {
    std::time::SystemTime::now()
        .duration_since(std::time::UNIX_EPOCH)
        .map(|d| d.as_millis() as u64)
        .unwrap_or(0)
}
