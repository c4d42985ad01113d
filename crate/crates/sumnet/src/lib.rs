//! File formats, Graphviz export, a parallel search driver and the
//! command-line front end for `sumnet-core`.

pub mod cli;
pub mod dot;
pub mod driver;
pub mod formats;

pub use sumnet_core as core;
