//! Shared fixtures for the benchmarks.

use mediaweb::model::{HostMatrix, HostParams, ModelSpec, OutDegreeDist, QualityDist};
use mediaweb::simulator::{generate, SimConfig};
use mediaweb::EdgeLog;

/// Two hosts with exponential quality and mixed routing.
pub fn two_host_config(spec: ModelSpec, horizon: f64, seed: u64) -> SimConfig {
    let q = QualityDist::Exponential { mean: 1.0 };
    let hosts = vec![
        HostParams::new(30.0, 1.0, q, OutDegreeDist::Constant { m: 4 }).unwrap(),
        HostParams::new(20.0, 2.0, q, OutDegreeDist::Poisson { mean: 3.0 }).unwrap(),
    ];
    let rho = HostMatrix::new(vec![vec![0.8, 0.2], vec![0.3, 0.7]]).unwrap();
    SimConfig::new(hosts, rho, spec, horizon, seed)
}

pub fn simulated_log(spec: ModelSpec, horizon: f64, seed: u64) -> EdgeLog {
    generate(&two_host_config(spec, horizon, seed)).unwrap().0
}
