//! Attractiveness laws and per-host generative parameters.

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use rand_distr::{Distribution, Exp, Pareto, Poisson};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Which factors of `(1 or q) * (1 or d) * (1 or exp(-a/tau))` are switched on.
///
/// The seven non-empty combinations are the growth models under study. The
/// all-off combination is the uniform baseline and is not one of them.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct ModelSpec {
    pub use_quality: bool,
    pub use_degree: bool,
    pub use_recency: bool,
}

impl ModelSpec {
    pub const UNIFORM: ModelSpec = ModelSpec::new(false, false, false);
    pub const D: ModelSpec = ModelSpec::new(false, true, false);
    pub const Q: ModelSpec = ModelSpec::new(true, false, false);
    pub const E: ModelSpec = ModelSpec::new(false, false, true);
    pub const DQ: ModelSpec = ModelSpec::new(true, true, false);
    pub const DE: ModelSpec = ModelSpec::new(false, true, true);
    pub const QE: ModelSpec = ModelSpec::new(true, false, true);
    pub const DQE: ModelSpec = ModelSpec::new(true, true, true);

    /// The seven growth models, in table order.
    pub const PAPER_MODELS: [ModelSpec; 7] = [
        Self::D,
        Self::Q,
        Self::E,
        Self::DQ,
        Self::DE,
        Self::QE,
        Self::DQE,
    ];

    pub const fn new(use_quality: bool, use_degree: bool, use_recency: bool) -> Self {
        Self {
            use_quality,
            use_degree,
            use_recency,
        }
    }

    /// `false` only for the uniform baseline.
    pub fn is_paper_model(&self) -> bool {
        self.use_quality || self.use_degree || self.use_recency
    }

    pub fn name(&self) -> &'static str {
        match (self.use_degree, self.use_quality, self.use_recency) {
            (false, false, false) => "uniform",
            (true, false, false) => "d",
            (false, true, false) => "q",
            (false, false, true) => "e",
            (true, true, false) => "dq",
            (true, false, true) => "de",
            (false, true, true) => "qe",
            (true, true, true) => "dqe",
        }
    }

    /// Parses a comma separated list; `all` expands to the seven growth models.
    pub fn parse_list(s: &str) -> Result<Vec<ModelSpec>> {
        let mut out = Vec::new();
        for tok in s.split(',').map(str::trim).filter(|t| !t.is_empty()) {
            if tok.eq_ignore_ascii_case("all") {
                out.extend_from_slice(&Self::PAPER_MODELS);
            } else {
                out.push(tok.parse()?);
            }
        }
        if out.is_empty() {
            return Err(Error::InvalidArgument("empty model list".into()));
        }
        let mut seen = Vec::with_capacity(out.len());
        out.retain(|m| {
            if seen.contains(m) {
                false
            } else {
                seen.push(*m);
                true
            }
        });
        Ok(out)
    }
}

impl fmt::Display for ModelSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl TryFrom<String> for ModelSpec {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<ModelSpec> for String {
    fn from(m: ModelSpec) -> String {
        m.name().to_string()
    }
}

impl FromStr for ModelSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let spec = match s.trim().to_ascii_lowercase().as_str() {
            "uniform" => Self::UNIFORM,
            "d" => Self::D,
            "q" => Self::Q,
            "e" => Self::E,
            "dq" => Self::DQ,
            "de" => Self::DE,
            "qe" => Self::QE,
            "dqe" => Self::DQE,
            other => {
                return Err(Error::InvalidArgument(format!(
                    "unknown model `{other}` (expected d,q,e,dq,de,qe,dqe or uniform)"
                )))
            }
        };
        Ok(spec)
    }
}

/// Product of the enabled factors: `q`, `d_eff` and `exp(-age/tau)`.
///
/// `d_eff` is the effective degree, i.e. the raw in-degree plus the offset
/// `d0` used for degree models.
pub fn attractiveness(spec: ModelSpec, d_eff: f64, q: f64, age: f64, tau: f64) -> Result<f64> {
    if !(age >= 0.0) {
        return Err(Error::InvalidArgument(format!(
            "age must be >= 0, got {age}"
        )));
    }
    if !(tau > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "tau must be > 0, got {tau}"
        )));
    }
    let mut f = 1.0;
    if spec.use_quality {
        f *= q;
    }
    if spec.use_degree {
        f *= d_eff;
    }
    if spec.use_recency {
        f *= (-age / tau).exp();
    }
    Ok(f)
}

/// Law of page quality on a host.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum QualityDist {
    PointMass {
        q0: f64,
    },
    Exponential {
        mean: f64,
    },
    /// Pareto with scale `x_min` and survival function `(x_min / x)^ccdf_exponent`.
    Pareto {
        x_min: f64,
        ccdf_exponent: f64,
    },
    Uniform {
        lo: f64,
        hi: f64,
    },
}

impl QualityDist {
    pub fn validate(&self) -> Result<()> {
        let ok = match *self {
            QualityDist::PointMass { q0 } => q0 > 0.0 && q0.is_finite(),
            QualityDist::Exponential { mean } => mean > 0.0 && mean.is_finite(),
            // a finite mean needs an exponent above one
            QualityDist::Pareto {
                x_min,
                ccdf_exponent,
            } => {
                x_min > 0.0 && x_min.is_finite() && ccdf_exponent > 1.0 && ccdf_exponent.is_finite()
            }
            QualityDist::Uniform { lo, hi } => lo >= 0.0 && hi > lo && hi.is_finite(),
        };
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidArgument(format!(
                "quality distribution {self:?} is invalid or has no finite mean"
            )))
        }
    }

    pub fn mean(&self) -> f64 {
        match *self {
            QualityDist::PointMass { q0 } => q0,
            QualityDist::Exponential { mean } => mean,
            QualityDist::Pareto {
                x_min,
                ccdf_exponent: a,
            } => a * x_min / (a - 1.0),
            QualityDist::Uniform { lo, hi } => 0.5 * (lo + hi),
        }
    }

    /// Inverse CDF.
    pub fn quantile(&self, p: f64) -> f64 {
        match *self {
            QualityDist::PointMass { q0 } => q0,
            QualityDist::Exponential { mean } => -mean * (-p).ln_1p(),
            QualityDist::Pareto {
                x_min,
                ccdf_exponent,
            } => x_min * (1.0 - p).powf(-1.0 / ccdf_exponent),
            QualityDist::Uniform { lo, hi } => lo + p * (hi - lo),
        }
    }

    /// Returns a copy with every quality multiplied by `c > 0`.
    pub fn scaled(&self, c: f64) -> QualityDist {
        match *self {
            QualityDist::PointMass { q0 } => QualityDist::PointMass { q0: q0 * c },
            QualityDist::Exponential { mean } => QualityDist::Exponential { mean: mean * c },
            QualityDist::Pareto {
                x_min,
                ccdf_exponent,
            } => QualityDist::Pareto {
                x_min: x_min * c,
                ccdf_exponent,
            },
            QualityDist::Uniform { lo, hi } => QualityDist::Uniform {
                lo: lo * c,
                hi: hi * c,
            },
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match *self {
            QualityDist::PointMass { q0 } => q0,
            QualityDist::Exponential { mean } => {
                Exp::new(1.0 / mean).expect("validated mean").sample(rng)
            }
            QualityDist::Pareto {
                x_min,
                ccdf_exponent,
            } => Pareto::new(x_min, ccdf_exponent)
                .expect("validated pareto")
                .sample(rng),
            QualityDist::Uniform { lo, hi } => rng.random_range(lo..hi),
        }
    }
}

/// Law of the number of outgoing links of a new page.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum OutDegreeDist {
    Constant { m: u32 },
    Poisson { mean: f64 },
}

impl OutDegreeDist {
    pub fn validate(&self) -> Result<()> {
        match *self {
            OutDegreeDist::Constant { .. } => Ok(()),
            OutDegreeDist::Poisson { mean } if mean >= 0.0 && mean.is_finite() => Ok(()),
            OutDegreeDist::Poisson { mean } => Err(Error::InvalidArgument(format!(
                "poisson out-degree mean must be finite and >= 0, got {mean}"
            ))),
        }
    }

    pub fn mean(&self) -> f64 {
        match *self {
            OutDegreeDist::Constant { m } => m as f64,
            OutDegreeDist::Poisson { mean } => mean,
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> u32 {
        match *self {
            OutDegreeDist::Constant { m } => m,
            OutDegreeDist::Poisson { mean: 0.0 } => 0,
            OutDegreeDist::Poisson { mean } => {
                let x: f64 = Poisson::new(mean).expect("validated mean").sample(rng);
                x as u32
            }
        }
    }
}

/// Generative parameters of one host.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HostParams {
    /// Page arrival rate, pages per unit time.
    pub rate: f64,
    /// Recency timescale of the host's pages.
    pub tau: f64,
    pub quality: QualityDist,
    pub outdegree: OutDegreeDist,
}

impl HostParams {
    pub fn new(
        rate: f64,
        tau: f64,
        quality: QualityDist,
        outdegree: OutDegreeDist,
    ) -> Result<Self> {
        let host = Self {
            rate,
            tau,
            quality,
            outdegree,
        };
        host.validate()?;
        Ok(host)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.rate >= 0.0 && self.rate.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "host rate must be finite and >= 0, got {}",
                self.rate
            )));
        }
        if !(self.tau > 0.0 && self.tau.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "host tau must be finite and > 0, got {}",
                self.tau
            )));
        }
        self.quality.validate()?;
        self.outdegree.validate()
    }
}

/// Row-stochastic host-to-host routing matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<Vec<f64>>", into = "Vec<Vec<f64>>")]
pub struct HostMatrix {
    rows: Vec<Vec<f64>>,
}

impl HostMatrix {
    pub const ROW_TOLERANCE: f64 = 1e-9;

    pub fn new(rows: Vec<Vec<f64>>) -> Result<Self> {
        let n = rows.len();
        for (i, row) in rows.iter().enumerate() {
            if row.len() != n {
                return Err(Error::DimensionMismatch {
                    expected: n,
                    found: row.len(),
                });
            }
            if let Some(p) = row.iter().find(|p| !(0.0..=1.0).contains(*p)) {
                return Err(Error::InvalidArgument(format!(
                    "rho[{i}] has entry {p} outside [0, 1]"
                )));
            }
            let sum: f64 = row.iter().sum();
            if (sum - 1.0).abs() > Self::ROW_TOLERANCE {
                return Err(Error::InvalidArgument(format!(
                    "rho[{i}] sums to {sum}, expected 1"
                )));
            }
        }
        Ok(Self { rows })
    }

    pub fn identity(n: usize) -> Self {
        let rows = (0..n)
            .map(|i| (0..n).map(|k| if i == k { 1.0 } else { 0.0 }).collect())
            .collect();
        Self { rows }
    }

    pub fn uniform(n: usize) -> Self {
        Self {
            rows: vec![vec![1.0 / n as f64; n]; n],
        }
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    #[inline]
    pub fn get(&self, from: usize, to: usize) -> f64 {
        self.rows[from][to]
    }

    pub fn row(&self, from: usize) -> &[f64] {
        &self.rows[from]
    }

    pub fn rows(&self) -> &[Vec<f64>] {
        &self.rows
    }
}

impl TryFrom<Vec<Vec<f64>>> for HostMatrix {
    type Error = Error;

    fn try_from(rows: Vec<Vec<f64>>) -> Result<Self> {
        HostMatrix::new(rows)
    }
}

impl From<HostMatrix> for Vec<Vec<f64>> {
    fn from(m: HostMatrix) -> Self {
        m.rows
    }
}
