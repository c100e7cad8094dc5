//! Command-line benchmark driver for the cross-year bike-demand transfer
//! library.
//!
//! The binary front-end lives in `main.rs`; everything it calls is exposed
//! here so integration tests can drive the same code paths:
//!
//! - [`config`]: flat key-value experiment configuration with defaults.
//! - [`data`]: panel loading from synthetic generation or CSV caches.
//! - [`commands`]: one function per subcommand, each writing CSV artifacts.
//! - [`diag`]: PCA and centroid alignment diagnostics.
//! - [`report`]: CSV writers and console tables.

pub mod commands;
pub mod config;
pub mod data;
pub mod diag;
pub mod report;
