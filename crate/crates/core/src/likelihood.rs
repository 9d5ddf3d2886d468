//! Replay of a link log in historical order, scoring every edge under each
//! attractiveness law.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimation::{estimate_quality, ModelParams};
use crate::graph::{Edge, EdgeLog, PageId};
use crate::model::{HostMatrix, ModelSpec};
use crate::sampler::HostSamplerState;

/// Routing, timescales and degree offset used during replay.
#[derive(Debug, Clone, PartialEq)]
pub struct ReplayParams {
    pub rho: HostMatrix,
    /// Per host of the replayed log, in log time units.
    pub tau: Vec<f64>,
    pub d0: f64,
}

impl ReplayParams {
    /// Aligns estimated parameters to the host order of `log` by host name.
    pub fn for_log(params: &ModelParams, log: &EdgeLog) -> Result<Self> {
        let index: Vec<usize> = log
            .hosts()
            .iter()
            .map(|h| {
                params.hosts.iter().position(|p| p == h).ok_or_else(|| {
                    Error::InvalidArgument(format!("host `{h}` missing from parameters"))
                })
            })
            .collect::<Result<_>>()?;
        // hosts absent from the log keep no probability mass; renormalize rows
        let rows = index
            .iter()
            .map(|&i| {
                let row: Vec<f64> = index.iter().map(|&k| params.rho.get(i, k)).collect();
                let s: f64 = row.iter().sum();
                if s > 0.0 {
                    row.iter().map(|p| p / s).collect()
                } else {
                    vec![1.0 / index.len() as f64; index.len()]
                }
            })
            .collect();
        Ok(Self {
            rho: HostMatrix::new(rows)?,
            tau: index.iter().map(|&i| params.tau[i]).collect(),
            d0: params.d0,
        })
    }
}

/// Why an edge could not be scored under some model.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SkipReason {
    /// No candidate with positive weight on the target host.
    EmptyCandidates,
    /// The target itself has zero weight.
    ZeroWeight,
    /// The routing matrix gives the target host probability zero.
    ZeroRouting,
}

pub type EdgeScore = std::result::Result<f64, SkipReason>;

/// Incremental candidate state for one model.
#[derive(Debug, Clone)]
pub struct ReplayState<'a> {
    log: &'a EdgeLog,
    spec: ModelSpec,
    rho: HostMatrix,
    qualities: Vec<f64>,
    registries: Vec<HostSamplerState>,
    local: Vec<Option<usize>>,
    order: Vec<PageId>,
    next: usize,
    clock: f64,
    edges_applied: usize,
}

impl<'a> ReplayState<'a> {
    pub fn new(
        log: &'a EdgeLog,
        spec: ModelSpec,
        params: &ReplayParams,
        qualities: Vec<f64>,
    ) -> Result<Self> {
        let n = log.host_count();
        if params.rho.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                found: params.rho.len(),
            });
        }
        if params.tau.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                found: params.tau.len(),
            });
        }
        if qualities.len() != log.pages().len() {
            return Err(Error::DimensionMismatch {
                expected: log.pages().len(),
                found: qualities.len(),
            });
        }
        let registries = params
            .tau
            .iter()
            .map(|&tau| HostSamplerState::new(spec, tau, params.d0))
            .collect::<Result<_>>()?;
        Ok(Self {
            log,
            spec,
            rho: params.rho.clone(),
            qualities,
            registries,
            local: vec![None; log.pages().len()],
            order: log.pages_by_creation(),
            next: 0,
            clock: f64::NEG_INFINITY,
            edges_applied: 0,
        })
    }

    pub fn spec(&self) -> ModelSpec {
        self.spec
    }

    pub fn clock(&self) -> f64 {
        self.clock
    }

    /// Registers every page created at or before `t`.
    pub fn advance_to(&mut self, t: f64) {
        while let Some(&id) = self.order.get(self.next) {
            let p = &self.log.pages()[id];
            if p.created_at > t {
                break;
            }
            self.local[id] = Some(self.registries[p.host].insert(p.created_at, self.qualities[id]));
            self.next += 1;
        }
        self.clock = self.clock.max(t);
    }

    fn slot(&self, page: PageId) -> Result<usize> {
        self.local
            .get(page)
            .copied()
            .flatten()
            .ok_or(Error::UnknownPage(page))
    }

    /// Probability of `edge` given the state before it.
    ///
    /// Candidates are the target host's pages created no later than the edge,
    /// minus the source page itself.
    pub fn edge_probability(&mut self, edge: &Edge) -> Result<EdgeScore> {
        self.advance_to(edge.created_at);
        let src_host = self.log.pages()[edge.source].host;
        let dst_host = self.log.pages()[edge.target].host;
        let target = self.slot(edge.target)?;
        let exclude = if src_host == dst_host {
            Some(self.slot(edge.source)?)
        } else {
            None
        };
        let route = self.rho.get(src_host, dst_host);
        let reg = &self.registries[dst_host];
        let Some(p) = reg.probability(target, exclude) else {
            return Ok(Err(SkipReason::EmptyCandidates));
        };
        if p <= 0.0 {
            return Ok(Err(SkipReason::ZeroWeight));
        }
        if route <= 0.0 {
            return Ok(Err(SkipReason::ZeroRouting));
        }
        Ok(Ok(route * p))
    }

    /// Counts `edge` towards its target's in-degree.
    pub fn apply(&mut self, edge: &Edge) -> Result<()> {
        let target = self.slot(edge.target)?;
        self.registries[self.log.pages()[edge.target].host].increment_degree(target);
        self.edges_applied += 1;
        Ok(())
    }

    /// Replayed in-degree of a registered page.
    pub fn degree(&self, page: PageId) -> Result<u32> {
        let slot = self.slot(page)?;
        Ok(self.registries[self.log.pages()[page].host].degree(slot))
    }

    /// Probability of every possible target of a link from `source` at the
    /// current clock, over all hosts.
    pub fn target_distribution(&self, source: PageId) -> Result<Vec<(PageId, f64)>> {
        let src_host = self.log.pages()[source].host;
        let src_slot = self.slot(source)?;
        let mut out = Vec::new();
        for id in self.order[..self.next].iter().copied() {
            if id == source {
                continue;
            }
            let k = self.log.pages()[id].host;
            let exclude = (k == src_host).then_some(src_slot);
            if let Some(p) = self.registries[k].probability(self.slot(id)?, exclude) {
                out.push((id, self.rho.get(src_host, k) * p));
            }
        }
        Ok(out)
    }
}

/// Scores every edge of the log under one model, in log order.
pub fn score_edges(
    log: &EdgeLog,
    spec: ModelSpec,
    params: &ReplayParams,
    qualities: Vec<f64>,
) -> Result<Vec<EdgeScore>> {
    let mut state = ReplayState::new(log, spec, params, qualities)?;
    let mut scores = Vec::with_capacity(log.edges().len());
    for e in log.edges() {
        scores.push(state.edge_probability(e)?);
        state.apply(e)?;
    }
    Ok(scores)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReplayOptions {
    /// `false` replaces the routing matrix with the uniform one.
    pub use_rho: bool,
}

impl Default for ReplayOptions {
    fn default() -> Self {
        Self { use_rho: true }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SkipCounts {
    pub empty_candidates: u64,
    pub zero_weight: u64,
    pub zero_routing: u64,
}

impl SkipCounts {
    pub fn total(&self) -> u64 {
        self.empty_candidates + self.zero_weight + self.zero_routing
    }

    fn record(&mut self, r: SkipReason) {
        match r {
            SkipReason::EmptyCandidates => self.empty_candidates += 1,
            SkipReason::ZeroWeight => self.zero_weight += 1,
            SkipReason::ZeroRouting => self.zero_routing += 1,
        }
    }
}

/// Aggregate comparison of models over one replay.
///
/// Only edges scored under every model enter the averages and counts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelReport {
    pub models: Vec<ModelSpec>,
    pub use_rho: bool,
    /// Edges sharing a timestamp are replayed in input order.
    pub tie_rule: String,
    pub total_edges: u64,
    pub scored_edges: u64,
    pub skipped_edges: u64,
    pub skip_reasons: Vec<SkipCounts>,
    pub mean_log_prob: Vec<f64>,
    pub wins: Vec<u64>,
    /// Edges whose maximum probability is shared by several models.
    pub win_ties: u64,
    pub win_fraction: Vec<f64>,
    /// `competition[a][b]`: edges where model `a` is strictly more likely than `b`.
    pub competition: Vec<Vec<u64>>,
    pub competition_ties: Vec<Vec<u64>>,
    pub competition_fraction: Vec<Vec<f64>>,
    /// Per model, scored probabilities in descending order.
    #[serde(skip)]
    pub sorted_probabilities: Vec<Vec<f64>>,
}

impl ModelReport {
    pub fn index_of(&self, spec: ModelSpec) -> Option<usize> {
        self.models.iter().position(|m| *m == spec)
    }

    pub fn mean_log_prob_of(&self, spec: ModelSpec) -> Option<f64> {
        self.index_of(spec).map(|i| self.mean_log_prob[i])
    }

    /// Model with the strictly highest mean log probability, if unique.
    pub fn best_model(&self) -> Option<ModelSpec> {
        let mut best: Option<(usize, f64)> = None;
        let mut tied = false;
        for (i, &v) in self.mean_log_prob.iter().enumerate() {
            match best {
                Some((_, b)) if v == b => tied = true,
                Some((_, b)) if v < b => {}
                _ => {
                    best = Some((i, v));
                    tied = false;
                }
            }
        }
        match best {
            Some((i, _)) if !tied => Some(self.models[i]),
            _ => None,
        }
    }
}

/// Quality estimates for `spec` from the final in-degrees of `log`.
pub fn default_qualities(log: &EdgeLog, spec: ModelSpec) -> Vec<f64> {
    estimate_quality(log, spec)
}

/// Replays the log under every model; models run in parallel on the current
/// rayon pool and are merged in input order.
pub fn replay(
    log: &EdgeLog,
    specs: &[ModelSpec],
    params: &ReplayParams,
    options: ReplayOptions,
) -> Result<ModelReport> {
    replay_with_qualities(log, specs, params, options, |spec| {
        default_qualities(log, spec)
    })
}

pub fn replay_with_qualities<Q>(
    log: &EdgeLog,
    specs: &[ModelSpec],
    params: &ReplayParams,
    options: ReplayOptions,
    qualities: Q,
) -> Result<ModelReport>
where
    Q: Fn(ModelSpec) -> Vec<f64> + Sync,
{
    if specs.is_empty() {
        return Err(Error::InvalidArgument("no models to replay".into()));
    }
    let params = if options.use_rho {
        params.clone()
    } else {
        ReplayParams {
            rho: HostMatrix::uniform(log.host_count()),
            ..params.clone()
        }
    };
    let scores: Vec<Vec<EdgeScore>> = specs
        .par_iter()
        .map(|&spec| score_edges(log, spec, &params, qualities(spec)))
        .collect::<Result<_>>()?;
    Ok(summarize(specs, &scores, options.use_rho))
}

fn summarize(specs: &[ModelSpec], scores: &[Vec<EdgeScore>], use_rho: bool) -> ModelReport {
    let m = specs.len();
    let total = scores.first().map_or(0, Vec::len);
    let mut skip_reasons = vec![SkipCounts::default(); m];
    let mut log_sum = vec![0.0; m];
    let mut wins = vec![0u64; m];
    let mut win_ties = 0u64;
    let mut competition = vec![vec![0u64; m]; m];
    let mut competition_ties = vec![vec![0u64; m]; m];
    let mut sorted = vec![Vec::new(); m];
    let mut scored = 0u64;
    let mut probs = vec![0.0; m];

    for e in 0..total {
        let mut ok = true;
        for (j, s) in scores.iter().enumerate() {
            match s[e] {
                Ok(p) => probs[j] = p,
                Err(r) => {
                    skip_reasons[j].record(r);
                    ok = false;
                }
            }
        }
        if !ok {
            continue;
        }
        scored += 1;
        let max = probs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let at_max: Vec<usize> = (0..m).filter(|&j| probs[j] == max).collect();
        if at_max.len() == 1 {
            wins[at_max[0]] += 1;
        } else {
            win_ties += 1;
        }
        for a in 0..m {
            log_sum[a] += probs[a].ln();
            sorted[a].push(probs[a]);
            for b in 0..m {
                if a == b {
                    continue;
                }
                if probs[a] > probs[b] {
                    competition[a][b] += 1;
                } else if probs[a] == probs[b] {
                    competition_ties[a][b] += 1;
                }
            }
        }
    }
    for s in &mut sorted {
        s.sort_by(|a, b| b.total_cmp(a));
    }
    let denom = scored.max(1) as f64;
    ModelReport {
        models: specs.to_vec(),
        use_rho,
        tie_rule: "input-order".into(),
        total_edges: total as u64,
        scored_edges: scored,
        skipped_edges: total as u64 - scored,
        skip_reasons,
        mean_log_prob: log_sum
            .iter()
            .map(|s| {
                if scored > 0 {
                    s / scored as f64
                } else {
                    f64::NAN
                }
            })
            .collect(),
        win_fraction: wins.iter().map(|&w| w as f64 / denom).collect(),
        wins,
        win_ties,
        competition_fraction: competition
            .iter()
            .map(|row| row.iter().map(|&c| c as f64 / denom).collect())
            .collect(),
        competition,
        competition_ties,
        sorted_probabilities: sorted,
    }
}

/// Rank-aligned ratio of each model's sorted probabilities to the baseline's.
///
/// A zero baseline value against a non-zero model value gives `+inf`; two
/// zeros give 1.
pub fn relative_curves(report: &ModelReport, baseline: ModelSpec) -> Result<Vec<Vec<f64>>> {
    let b = report
        .index_of(baseline)
        .ok_or_else(|| Error::InvalidArgument(format!("baseline `{baseline}` not in report")))?;
    let base = &report.sorted_probabilities[b];
    Ok(report
        .sorted_probabilities
        .iter()
        .map(|seq| {
            seq.iter()
                .zip(base)
                .map(|(&p, &q)| match (p, q) {
                    (p, q) if q > 0.0 => p / q,
                    (p, _) if p > 0.0 => f64::INFINITY,
                    _ => 1.0,
                })
                .collect()
        })
        .collect())
}
