//! Forward simulation of the host/page growth process in continuous time.

use rand::distr::weighted::WeightedIndex;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{Edge, EdgeLog, Page, PageId};
use crate::model::{HostMatrix, HostParams, ModelSpec};
use crate::sampler::HostSamplerState;

fn default_d0() -> f64 {
    1.0
}

fn default_resample() -> u32 {
    8
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub hosts: Vec<HostParams>,
    pub rho: HostMatrix,
    pub spec: ModelSpec,
    pub horizon: f64,
    #[serde(default)]
    pub seed: u64,
    /// Offset added to the raw in-degree under degree models.
    #[serde(default = "default_d0")]
    pub d0: f64,
    /// Extra target-host draws before a link with no candidate is dropped.
    #[serde(default = "default_resample")]
    pub max_host_resample: u32,
}

impl SimConfig {
    pub fn new(
        hosts: Vec<HostParams>,
        rho: HostMatrix,
        spec: ModelSpec,
        horizon: f64,
        seed: u64,
    ) -> Self {
        Self {
            hosts,
            rho,
            spec,
            horizon,
            seed,
            d0: default_d0(),
            max_host_resample: default_resample(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.horizon > 0.0 && self.horizon.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "horizon must be finite and > 0, got {}",
                self.horizon
            )));
        }
        if self.hosts.is_empty() {
            return Err(Error::InvalidArgument(
                "at least one host is required".into(),
            ));
        }
        if self.hosts.len() != self.rho.len() {
            return Err(Error::DimensionMismatch {
                expected: self.hosts.len(),
                found: self.rho.len(),
            });
        }
        for h in &self.hosts {
            h.validate()?;
        }
        if !(self.d0 >= 0.0 && self.d0.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "d0 must be >= 0, got {}",
                self.d0
            )));
        }
        Ok(())
    }

    /// Host names used in generated logs.
    pub fn host_names(&self) -> Vec<String> {
        (0..self.hosts.len()).map(|i| format!("h{i}.sim")).collect()
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SimStats {
    pub pages_created: u64,
    pub edges_created: u64,
    pub edges_dropped: u64,
    pub rebase_count: u64,
}

/// Runs the process up to `config.horizon`. Deterministic in `config.seed`.
///
/// Arrivals are drawn from the superposed Poisson process (one exponential
/// clock at the total rate, then a host proportional to its rate). All links
/// of a new page are drawn against the same pre-arrival state and applied
/// together; the page joins its host's candidate set afterwards.
pub fn generate(config: &SimConfig) -> Result<(EdgeLog, SimStats)> {
    config.validate()?;
    let names = config.host_names();
    let total_rate: f64 = config.hosts.iter().map(|h| h.rate).sum();
    if total_rate == 0.0 {
        return Ok((
            EdgeLog::new(names, Vec::new(), Vec::new())?,
            SimStats::default(),
        ));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let clock = Exp::new(total_rate).map_err(|e| Error::InvalidArgument(e.to_string()))?;
    let host_pick = WeightedIndex::new(config.hosts.iter().map(|h| h.rate))
        .map_err(|e| Error::InvalidArgument(e.to_string()))?;
    let routes = (0..config.rho.len())
        .map(|i| WeightedIndex::new(config.rho.row(i).iter().copied()))
        .collect::<std::result::Result<Vec<_>, _>>()
        .map_err(|e| Error::InvalidArgument(e.to_string()))?;
    let mut samplers = config
        .hosts
        .iter()
        .map(|h| HostSamplerState::new(config.spec, h.tau, config.d0))
        .collect::<Result<Vec<_>>>()?;
    let mut local_pages: Vec<Vec<PageId>> = vec![Vec::new(); config.hosts.len()];

    let mut pages = Vec::new();
    let mut edges = Vec::new();
    let mut stats = SimStats::default();
    let mut targets = Vec::new();
    let mut t = 0.0;
    loop {
        t += clock.sample(&mut rng);
        if t > config.horizon {
            break;
        }
        let i = host_pick.sample(&mut rng);
        let host = &config.hosts[i];
        let m = host.outdegree.sample(&mut rng);
        let q = host.quality.sample(&mut rng);

        targets.clear();
        for _ in 0..m {
            let mut attempts = 0;
            loop {
                let k = routes[i].sample(&mut rng);
                match samplers[k].sample(&mut rng, None) {
                    Ok(local) => {
                        targets.push((k, local));
                        break;
                    }
                    Err(Error::NoTarget) if attempts < config.max_host_resample => attempts += 1,
                    Err(Error::NoTarget) => {
                        stats.edges_dropped += 1;
                        break;
                    }
                    Err(e) => return Err(e),
                }
            }
        }

        let id = pages.len();
        for &(k, local) in &targets {
            samplers[k].increment_degree(local);
            edges.push(Edge {
                source: id,
                target: local_pages[k][local],
                created_at: t,
            });
        }
        samplers[i].insert(t, q);
        local_pages[i].push(id);
        pages.push(Page {
            host: i,
            created_at: t,
            quality: Some(q),
            indegree: 0,
        });
    }

    stats.pages_created = pages.len() as u64;
    stats.edges_created = edges.len() as u64;
    stats.rebase_count = samplers.iter().map(HostSamplerState::rebase_count).sum();
    Ok((EdgeLog::new(names, pages, edges)?, stats))
}

/// Runs `runs` independent simulations with seeds `seed, seed + 1, ...`.
///
/// Runs execute on the current rayon pool; the result order (and content)
/// does not depend on the number of threads.
pub fn generate_batch(config: &SimConfig, runs: u64) -> Result<Vec<(EdgeLog, SimStats)>> {
    (0..runs)
        .into_par_iter()
        .map(|r| {
            let cfg = SimConfig {
                seed: config.seed.wrapping_add(r),
                ..config.clone()
            };
            generate(&cfg)
        })
        .collect()
}
