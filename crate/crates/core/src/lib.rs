//! Growth models for media citation graphs.
//!
//! New pages arrive on a fixed set of hosts as independent Poisson processes
//! and cite existing pages: first a target host is drawn from a routing
//! matrix, then a page on it with probability proportional to an
//! attractiveness built from quality `q`, in-degree `d` and a recency decay
//! `exp(-age / tau)`. The crate simulates these processes, evaluates their
//! mean-field predictions, estimates parameters from timestamped link logs
//! and ranks the laws by replayed per-edge likelihood.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analysis;
pub mod error;
pub mod estimation;
pub mod graph;
pub mod ingest;
pub mod likelihood;
pub mod model;
pub mod sampler;
pub mod simulator;
pub mod theory;

pub use error::{Error, Result};
pub use estimation::{EstimateOptions, ModelParams};
pub use graph::{Edge, EdgeLog, HostId, Page, PageId};
pub use ingest::IngestReport;
pub use likelihood::{ModelReport, ReplayOptions, ReplayParams};
pub use model::{attractiveness, HostMatrix, HostParams, ModelSpec, OutDegreeDist, QualityDist};
pub use sampler::HostSamplerState;
pub use simulator::{SimConfig, SimStats};
pub use theory::TheorySolution;
