//! Epsilon-machine reconstruction and complexity signatures for keyed panel
//! time series.
//!
//! The crate is organised around the analysis pipeline:
//!
//! - [`ingest`] parses keyed panel records and extracts per-dyad series.
//! - [`symbolize`] discretizes real-valued series (quantile, hurdle, binary).
//! - [`machine`] reconstructs unifilar epsilon-machines and computes the
//!   entropy rate, statistical complexity and excess entropy.
//! - [`proxies`] computes LZ78 phrase complexity and compression bits per symbol.
//! - [`scopes`] runs the dyad, stratum and pooled analyses and clusters dyads.
//! - [`synthetic`] generates validation processes with exact oracle metrics.
//! - [`cli`] is the configuration-driven batch front end.

pub mod cli;
pub mod ingest;
pub mod machine;
pub mod proxies;
pub mod scopes;
pub mod symbolize;
pub mod synthetic;

mod info;

pub use ingest::{Dataset, RawSeries, Record};
pub use machine::{EpsilonMachine, MachineMetrics, MachineParams, Reconstruction};
pub use proxies::{Codec, ProxyMetrics};
pub use symbolize::{BinningSpec, FitScope, Strategy, Symbol, SymbolSeries};
pub use synthetic::{ProcessKind, ProcessSpec};
