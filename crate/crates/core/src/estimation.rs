//! Simple moment-style estimates of routing, recency timescales and quality.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{EdgeLog, HostId};
use crate::model::{HostMatrix, ModelSpec};

pub const DEFAULT_BINS: usize = 10;

/// Fraction of edges from host `i` landing on host `j`.
///
/// Hosts that never link out get a uniform row.
pub fn estimate_rho(log: &EdgeLog) -> Result<HostMatrix> {
    if log.is_empty() {
        return Err(Error::EmptyLog);
    }
    let n = log.host_count();
    let mut counts = vec![vec![0u64; n]; n];
    for e in log.edges() {
        let (i, j) = (log.pages()[e.source].host, log.pages()[e.target].host);
        counts[i][j] += 1;
    }
    let rows = counts
        .into_iter()
        .map(|row| {
            let out: u64 = row.iter().sum();
            if out == 0 {
                vec![1.0 / n as f64; n]
            } else {
                row.into_iter().map(|c| c as f64 / out as f64).collect()
            }
        })
        .collect();
    HostMatrix::new(rows)
}

/// Daily histogram of endpoint age differences of links into `host`
/// (`None` pools all hosts). Bin `i` counts differences in `[i, i+1)` days.
pub fn age_histogram(log: &EdgeLog, host: Option<HostId>, day: f64, bins: usize) -> Vec<u64> {
    let mut x = vec![0u64; bins];
    for e in log.edges() {
        let target = &log.pages()[e.target];
        if host.is_some_and(|h| h != target.host) {
            continue;
        }
        let diff = log.pages()[e.source].created_at - target.created_at;
        let bin = (diff / day).floor();
        if bin >= 0.0 && (bin as usize) < bins {
            x[bin as usize] += 1;
        }
    }
    x
}

/// Mean over bin pairs `i < j` of `(j - i) day / ln(x_i / x_j)`.
///
/// Pairs with an empty bin are skipped, and so are pairs with equal counts,
/// whose term is undefined. The mean is taken over the pairs actually used.
pub fn tau_from_histogram(x: &[u64], day: f64) -> Result<f64> {
    if !(day > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "day must be > 0, got {day}"
        )));
    }
    if x.iter().filter(|&&c| c > 0).count() < 2 {
        return Err(Error::NoEstimate("fewer than two non-empty bins".into()));
    }
    let mut sum = 0.0;
    let mut pairs = 0usize;
    for i in 0..x.len() {
        for j in i + 1..x.len() {
            if x[i] == 0 || x[j] == 0 || x[i] == x[j] {
                continue;
            }
            sum += (j - i) as f64 * day / (x[i] as f64 / x[j] as f64).ln();
            pairs += 1;
        }
    }
    if pairs == 0 {
        return Err(Error::NoEstimate(
            "no usable bin pair (flat histogram)".into(),
        ));
    }
    let tau = sum / pairs as f64;
    if tau > 0.0 && tau.is_finite() {
        Ok(tau)
    } else {
        Err(Error::NoEstimate(format!(
            "histogram does not decay (pair average {tau})"
        )))
    }
}

pub fn estimate_tau(log: &EdgeLog, host: HostId, day: f64, bins: usize) -> Result<f64> {
    if host >= log.host_count() {
        return Err(Error::InvalidArgument(format!("unknown host {host}")));
    }
    tau_from_histogram(&age_histogram(log, Some(host), day, bins), day)
}

/// Quality proxy from the final in-degree `d`: `d` for models without the
/// degree factor, `ln(1 + d)` for models with it.
pub fn quality_from_degree(spec: ModelSpec, d_final: f64) -> f64 {
    if spec.use_degree {
        d_final.ln_1p()
    } else {
        d_final
    }
}

pub fn estimate_quality(log: &EdgeLog, spec: ModelSpec) -> Vec<f64> {
    log.pages()
        .iter()
        .map(|p| quality_from_degree(spec, p.indegree as f64))
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TauSource {
    /// Estimated from the host's own in-links.
    Host,
    /// The host's histogram was unusable; pooled over all hosts.
    Pooled,
    /// No histogram decays; `tau` is infinite and recency has no effect.
    Unavailable,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EstimateOptions {
    /// Length of one histogram bin in log time units.
    pub day: f64,
    pub bins: usize,
    pub d0: f64,
}

impl Default for EstimateOptions {
    fn default() -> Self {
        Self {
            day: 86_400.0,
            bins: DEFAULT_BINS,
            d0: 1.0,
        }
    }
}

/// Everything replay needs besides the log itself.
///
/// Per-page quality is not stored: it is re-derived from the final in-degree
/// of the replayed log. `rate` (pages per time unit over the observed span)
/// and `mean_outdegree` are informational, for re-simulation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    pub hosts: Vec<String>,
    pub rho: HostMatrix,
    /// Infinite entries are written as `null`.
    #[serde(with = "unbounded")]
    pub tau: Vec<f64>,
    pub tau_source: Vec<TauSource>,
    pub rate: Vec<f64>,
    pub mean_outdegree: Vec<f64>,
    pub d0: f64,
    pub day: f64,
    pub bins: usize,
}

pub fn estimate_params(log: &EdgeLog, opts: &EstimateOptions) -> Result<ModelParams> {
    if !(opts.day > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "day must be > 0, got {}",
            opts.day
        )));
    }
    let rho = estimate_rho(log)?;
    let n = log.host_count();
    let mut pooled = None;
    let mut tau = Vec::with_capacity(n);
    let mut tau_source = Vec::with_capacity(n);
    for k in 0..n {
        match estimate_tau(log, k, opts.day, opts.bins) {
            Ok(t) => {
                tau.push(t);
                tau_source.push(TauSource::Host);
            }
            Err(Error::NoEstimate(_)) => {
                let p = *pooled.get_or_insert_with(|| {
                    tau_from_histogram(&age_histogram(log, None, opts.day, opts.bins), opts.day)
                        .map_err(|_| ())
                });
                match p {
                    Ok(t) => {
                        tau.push(t);
                        tau_source.push(TauSource::Pooled);
                    }
                    Err(()) => {
                        tau.push(f64::INFINITY);
                        tau_source.push(TauSource::Unavailable);
                    }
                }
            }
            Err(e) => return Err(e),
        }
    }

    let (lo, hi) = log
        .pages()
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), p| {
            (lo.min(p.created_at), hi.max(p.created_at))
        });
    let span = hi - lo;
    let mut pages = vec![0u64; n];
    let mut out = vec![0u64; n];
    for p in log.pages() {
        pages[p.host] += 1;
    }
    for e in log.edges() {
        out[log.pages()[e.source].host] += 1;
    }
    let rate = pages
        .iter()
        .map(|&c| if span > 0.0 { c as f64 / span } else { 0.0 })
        .collect();
    let mean_outdegree = out
        .iter()
        .zip(&pages)
        .map(|(&o, &p)| if p > 0 { o as f64 / p as f64 } else { 0.0 })
        .collect();

    Ok(ModelParams {
        hosts: log.hosts().to_vec(),
        rho,
        tau,
        tau_source,
        rate,
        mean_outdegree,
        d0: opts.d0,
        day: opts.day,
        bins: opts.bins,
    })
}

mod unbounded {
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    pub fn serialize<S: Serializer>(v: &[f64], s: S) -> Result<S::Ok, S::Error> {
        let opt: Vec<Option<f64>> = v.iter().map(|x| x.is_finite().then_some(*x)).collect();
        opt.serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<f64>, D::Error> {
        let opt = Vec::<Option<f64>>::deserialize(d)?;
        Ok(opt
            .into_iter()
            .map(|x| x.unwrap_or(f64::INFINITY))
            .collect())
    }
}
