//! Causal streamflow forecasting core.
//!
//! Everything here is pure computation over in-memory values and builds
//! without `std` (only `alloc` is required). File formats, checkpoints and
//! the command-line front end live in the `csf` companion crate.
//!
//! Layout:
//! * [`numcore`] dense tensors, a reverse-mode gradient tape and Adam.
//! * [`flowgraph`] river flow graphs, D8 extraction, causal adjacency and
//!   HUC grouping.
//! * [`vae`] the station-level variational autoencoder.
//! * [`stgcn`] the basin-level causally masked spatio-temporal GCN.
//! * [`pipeline`] preprocessing, windows, cluster batching, training and
//!   rolling forecasts.
//! * [`metrics`] NSE, KGE, VE, Pearson and kNN alignment.
//! * [`synth`] a mass-conserving synthetic basin simulator.

#![no_std]

extern crate alloc;

pub mod flowgraph;
pub mod math;
pub mod metrics;
pub mod numcore;
pub mod pipeline;
pub mod rng;
pub mod stgcn;
pub mod synth;
pub mod vae;

pub use flowgraph::{FlowGraph, Grouping, Station};
pub use numcore::{ParamStore, Tape, Tensor};
pub use rng::SeedRng;
