//! Empirical statistics of an edge log and the fits used to read them.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::EdgeLog;

/// Fraction of edges whose endpoints differ in age by more than each threshold.
pub fn empirical_recency(log: &EdgeLog, thresholds: &[f64]) -> Result<Vec<f64>> {
    if log.is_empty() {
        return Err(Error::EmptyLog);
    }
    let mut diffs: Vec<f64> = log.age_differences().collect();
    diffs.sort_by(f64::total_cmp);
    Ok(recency_from_sorted(&diffs, thresholds))
}

fn recency_from_sorted(sorted: &[f64], thresholds: &[f64]) -> Vec<f64> {
    let n = sorted.len() as f64;
    thresholds
        .iter()
        .map(|&t| (sorted.len() - sorted.partition_point(|&d| d <= t)) as f64 / n)
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Binning {
    Raw,
    /// Multiplicative bins `[b, b * factor)` starting at 1; degree 0 is left out.
    LogBinned {
        factor: f64,
    },
}

impl Binning {
    pub const DEFAULT_FACTOR: f64 = 1.3;
}

/// In-degree histogram. Raw binning gives `(degree, count)`; log binning gives
/// `(bin centre, density)` where density is per page and per integer degree.
pub fn degree_distribution(log: &EdgeLog, binning: Binning) -> Result<Vec<(f64, f64)>> {
    if log.pages().is_empty() {
        return Err(Error::EmptyLog);
    }
    let mut degrees: Vec<u32> = log.pages().iter().map(|p| p.indegree).collect();
    degrees.sort_unstable();
    match binning {
        Binning::Raw => {
            let mut out: Vec<(f64, f64)> = Vec::new();
            for d in degrees {
                match out.last_mut() {
                    Some((x, c)) if *x == d as f64 => *c += 1.0,
                    _ => out.push((d as f64, 1.0)),
                }
            }
            Ok(out)
        }
        Binning::LogBinned { factor } => {
            if !(factor > 1.0) {
                return Err(Error::InvalidArgument(format!(
                    "bin factor must be > 1, got {factor}"
                )));
            }
            let total = degrees.len() as f64;
            let mut out = Vec::new();
            let mut lo = 1.0f64;
            let mut rest = &degrees[degrees.partition_point(|&d| d < 1)..];
            while !rest.is_empty() {
                let hi = lo * factor;
                let width = hi.ceil() - lo.ceil();
                let split = rest.partition_point(|&d| (d as f64) < hi);
                if split > 0 && width > 0.0 {
                    out.push(((lo * hi).sqrt(), split as f64 / (width * total)));
                }
                rest = &rest[split..];
                lo = hi;
            }
            Ok(out)
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DecayFit {
    pub timescale: f64,
    pub intercept: f64,
    /// Coefficient of determination of the log-linear fit.
    pub r_squared: f64,
    pub points: usize,
}

/// Least-squares fit of `ln e = a - T / tau`; non-positive values are dropped.
pub fn fit_exponential_decay(points: &[(f64, f64)]) -> Result<DecayFit> {
    let pts: Vec<(f64, f64)> = points
        .iter()
        .filter(|(t, e)| *e > 0.0 && e.is_finite() && t.is_finite())
        .map(|&(t, e)| (t, e.ln()))
        .collect();
    if pts.len() < 3 {
        return Err(Error::InsufficientData(format!(
            "need at least 3 positive points, got {}",
            pts.len()
        )));
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let syy: f64 = pts.iter().map(|p| (p.1 - my).powi(2)).sum();
    if sxx == 0.0 {
        return Err(Error::InsufficientData("all thresholds coincide".into()));
    }
    let slope = sxy / sxx;
    if !(slope < 0.0) {
        return Err(Error::NoDecay);
    }
    let intercept = my - slope * mx;
    let ss_res: f64 = pts
        .iter()
        .map(|p| (p.1 - intercept - slope * p.0).powi(2))
        .sum();
    let r_squared = if syy > 0.0 { 1.0 - ss_res / syy } else { 1.0 };
    Ok(DecayFit {
        timescale: -1.0 / slope,
        intercept,
        r_squared,
        points: pts.len(),
    })
}

/// Recency curve sampled on `points` thresholds over `[0, 3 tau0]`, where the
/// first-pass `tau0` is the smallest age difference with `e(tau0) <= 1/e`,
/// and its exponential fit.
pub fn fit_recency_decay(log: &EdgeLog, points: usize) -> Result<(DecayFit, Vec<(f64, f64)>)> {
    if log.is_empty() {
        return Err(Error::EmptyLog);
    }
    if points < 3 {
        return Err(Error::InvalidArgument("need at least 3 thresholds".into()));
    }
    let mut diffs: Vec<f64> = log.age_differences().collect();
    diffs.sort_by(f64::total_cmp);
    let n = diffs.len();
    // e(d_i) = (n - 1 - i) / n when values are distinct
    let idx = ((n as f64) * (1.0 - (-1f64).exp())).ceil() as usize;
    let tau0 = diffs[idx.saturating_sub(1).min(n - 1)];
    if !(tau0 > 0.0) {
        return Err(Error::InsufficientData(
            "age differences are all zero".into(),
        ));
    }
    let thresholds: Vec<f64> = (0..points)
        .map(|j| 3.0 * tau0 * j as f64 / (points - 1) as f64)
        .collect();
    let e = recency_from_sorted(&diffs, &thresholds);
    let curve: Vec<(f64, f64)> = thresholds.into_iter().zip(e).collect();
    Ok((fit_exponential_decay(&curve)?, curve))
}

/// Hurwitz zeta `sum_{k >= 0} (k + q)^(-s)` for `s > 1`, `q > 0`.
pub fn hurwitz_zeta(s: f64, q: f64) -> f64 {
    const N: usize = 12;
    // B_{2j} / (2j)!
    const COEF: [f64; 6] = [
        1.0 / 12.0,
        -1.0 / 720.0,
        1.0 / 30240.0,
        -1.0 / 1209600.0,
        1.0 / 47900160.0,
        -691.0 / 1307674368000.0,
    ];
    let mut sum = 0.0;
    for k in 0..N {
        sum += (q + k as f64).powf(-s);
    }
    let a = q + N as f64;
    sum += a.powf(1.0 - s) / (s - 1.0) + 0.5 * a.powf(-s);
    let mut rising = s; // s (s+1) ... (s + 2j - 2)
    let mut pow = a.powf(-s - 1.0);
    for (j, c) in COEF.iter().enumerate() {
        sum += c * rising * pow;
        let k = 2 * j as u32 + 1;
        rising *= (s + k as f64) * (s + k as f64 + 1.0);
        pow /= a * a;
    }
    sum
}

/// Critical value of the normalized log-likelihood ratio test.
pub const VUONG_CRITICAL: f64 = 1.96;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PowerLawFit {
    /// Survival exponent: `P(X >= x) ~ x^(-exponent)`.
    pub exponent: f64,
    pub x_min: u64,
    pub n_tail: usize,
    /// Largest gap between empirical and fitted tail survival functions.
    pub ks_distance: f64,
    /// Normalized log-likelihood ratio of the power law against a geometric
    /// tail; negative values favour the geometric law.
    pub vuong_z: f64,
}

impl PowerLawFit {
    /// The geometric tail explains the data significantly better.
    pub fn rejected(&self) -> bool {
        self.vuong_z < -VUONG_CRITICAL
    }
}

/// Discrete maximum-likelihood tail fit on samples `>= x_min`.
///
/// Starts from the continuous approximation
/// `alpha = 1 + n / sum ln(x / (x_min - 1/2))` and refines it on the exact
/// discrete likelihood `-alpha sum ln x - n ln zeta(alpha, x_min)`.
pub fn fit_power_law_tail(samples: &[u64], x_min: u64) -> Result<PowerLawFit> {
    if x_min == 0 {
        return Err(Error::InvalidArgument("x_min must be >= 1".into()));
    }
    let mut tail: Vec<u64> = samples.iter().copied().filter(|&x| x >= x_min).collect();
    tail.sort_unstable();
    fit_sorted_tail(&tail, x_min)
}

/// Minimum tail size accepted by the power-law fits.
pub const MIN_TAIL: usize = 100;

/// Tail fit with `x_min` chosen among the observed values to minimize the KS
/// distance. Candidates keep at least `min_tail_fraction` of the positive
/// samples, and never fewer than `MIN_TAIL`, in the tail.
pub fn fit_power_law_tail_auto(samples: &[u64], min_tail_fraction: f64) -> Result<PowerLawFit> {
    if !(0.0..=1.0).contains(&min_tail_fraction) {
        return Err(Error::InvalidArgument(format!(
            "tail fraction must lie in [0, 1], got {min_tail_fraction}"
        )));
    }
    let mut sorted: Vec<u64> = samples.iter().copied().filter(|&x| x >= 1).collect();
    sorted.sort_unstable();
    let min_tail = MIN_TAIL.max((min_tail_fraction * sorted.len() as f64).ceil() as usize);
    let mut best: Option<PowerLawFit> = None;
    let mut last_err = None;
    let mut i = 0;
    while i + min_tail <= sorted.len() {
        let x_min = sorted[i];
        match fit_sorted_tail(&sorted[i..], x_min) {
            Ok(fit) if best.is_none_or(|b| fit.ks_distance < b.ks_distance) => best = Some(fit),
            Ok(_) => {}
            Err(e) => last_err = Some(e),
        }
        i += sorted[i..].partition_point(|&y| y == x_min);
    }
    best.ok_or_else(|| {
        last_err.unwrap_or_else(|| {
            Error::InsufficientData(format!(
                "{} positive samples, need {MIN_TAIL}",
                sorted.len()
            ))
        })
    })
}

fn fit_sorted_tail(tail: &[u64], x_min: u64) -> Result<PowerLawFit> {
    if tail.len() < MIN_TAIL {
        return Err(Error::InsufficientData(format!(
            "{} samples at or above x_min = {x_min}, need {MIN_TAIL}",
            tail.len()
        )));
    }
    if tail.first() == tail.last() {
        return Err(Error::InsufficientData("tail samples are all equal".into()));
    }
    let n = tail.len() as f64;
    let xm = x_min as f64;
    let sum_ln: f64 = tail.iter().map(|&x| (x as f64).ln()).sum();
    let approx = 1.0
        + n / tail
            .iter()
            .map(|&x| (x as f64 / (xm - 0.5)).ln())
            .sum::<f64>();

    let nll = |a: f64| a * sum_ln + n * hurwitz_zeta(a, xm).ln();
    let (mut lo, mut hi) = (1.0 + 1e-6, (2.0 * approx).max(approx + 5.0));
    let g = 0.5 * (5f64.sqrt() - 1.0);
    let mut c = hi - g * (hi - lo);
    let mut d = lo + g * (hi - lo);
    let (mut fc, mut fd) = (nll(c), nll(d));
    while hi - lo > 1e-10 {
        if fc < fd {
            hi = d;
            d = c;
            fd = fc;
            c = hi - g * (hi - lo);
            fc = nll(c);
        } else {
            lo = c;
            c = d;
            fc = fd;
            d = lo + g * (hi - lo);
            fd = nll(d);
        }
    }
    let alpha = 0.5 * (lo + hi);
    let z_min = hurwitz_zeta(alpha, xm);

    let mut ks: f64 = 0.0;
    let mut i = 0;
    while i < tail.len() {
        let x = tail[i];
        let empirical = (tail.len() - i) as f64 / n;
        let model = hurwitz_zeta(alpha, x as f64) / z_min;
        ks = ks.max((empirical - model).abs());
        i += tail[i..].partition_point(|&y| y == x);
    }

    let mean_excess = tail.iter().map(|&x| (x - x_min) as f64).sum::<f64>() / n;
    let p = mean_excess / (1.0 + mean_excess);
    let ratios: Vec<f64> = tail
        .iter()
        .map(|&x| {
            let pl = -alpha * (x as f64).ln() - z_min.ln();
            let geo = (1.0 - p).ln() + (x - x_min) as f64 * p.ln();
            pl - geo
        })
        .collect();
    let mean_r = ratios.iter().sum::<f64>() / n;
    let sd = (ratios.iter().map(|r| (r - mean_r).powi(2)).sum::<f64>() / n).sqrt();
    let vuong_z = if sd > 0.0 {
        mean_r * n.sqrt() / sd
    } else {
        0.0
    };

    Ok(PowerLawFit {
        exponent: alpha - 1.0,
        x_min,
        n_tail: tail.len(),
        ks_distance: ks,
        vuong_z,
    })
}

/// Conventional significance level for the bootstrap goodness-of-fit test.
pub const GOF_LEVEL: f64 = 0.1;

/// Bootstrap goodness-of-fit p-value of a tail fit: the share of synthetic
/// samples drawn from the fitted law whose own refit (at the same `x_min`)
/// is at least as far, in KS distance, as the data. Small values reject.
pub fn power_law_gof(fit: &PowerLawFit, reps: usize, seed: u64) -> Result<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let rng = &mut rng;
    if reps == 0 {
        return Err(Error::InvalidArgument(
            "need at least one bootstrap replicate".into(),
        ));
    }
    let sampler = DiscretePowerLaw::new(fit.exponent + 1.0, fit.x_min);
    let mut farther = 0usize;
    let mut draws = vec![0u64; fit.n_tail];
    for _ in 0..reps {
        for d in draws.iter_mut() {
            *d = sampler.sample(rng);
        }
        draws.sort_unstable();
        // a degenerate replicate cannot be refit and counts as farther
        match fit_sorted_tail(&draws, fit.x_min) {
            Ok(f) if f.ks_distance < fit.ks_distance => {}
            _ => farther += 1,
        }
    }
    Ok(farther as f64 / reps as f64)
}

/// `P(X = x) ~ x^-alpha` on `x >= x_min`, by table lookup of the survival
/// function with a continuous extension past the table.
struct DiscretePowerLaw {
    alpha: f64,
    x_min: u64,
    survival: Vec<f64>,
}

impl DiscretePowerLaw {
    const TABLE: usize = 100_000;

    fn new(alpha: f64, x_min: u64) -> Self {
        let z = hurwitz_zeta(alpha, x_min as f64);
        let mut survival = Vec::new();
        for k in 0..Self::TABLE as u64 {
            let s = hurwitz_zeta(alpha, (x_min + k) as f64) / z;
            survival.push(s);
            if s < 1e-12 {
                break;
            }
        }
        Self {
            alpha,
            x_min,
            survival,
        }
    }

    fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> u64 {
        let u: f64 = 1.0 - rng.random::<f64>();
        // largest k with survival[k] >= u
        let k = self.survival.partition_point(|&s| s >= u);
        if k < self.survival.len() {
            return self.x_min + k as u64 - 1;
        }
        let last = self.survival.len() - 1;
        let x = (self.x_min + last as u64) as f64 - 0.5;
        let ratio = u / self.survival[last];
        (x * ratio.powf(-1.0 / (self.alpha - 1.0)) + 0.5).floor() as u64
    }
}

fn average_ranks(x: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..x.len()).collect();
    idx.sort_by(|&a, &b| x[a].total_cmp(&x[b]));
    let mut ranks = vec![0.0; x.len()];
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && x[idx[j + 1]] == x[idx[i]] {
            j += 1;
        }
        let r = 0.5 * (i + j) as f64 + 1.0;
        for &k in &idx[i..=j] {
            ranks[k] = r;
        }
        i = j + 1;
    }
    ranks
}

/// Spearman rank correlation with average ranks for ties.
pub fn spearman(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::DimensionMismatch {
            expected: a.len(),
            found: b.len(),
        });
    }
    if a.len() < 2 {
        return Err(Error::InsufficientData("need at least two pairs".into()));
    }
    let (ra, rb) = (average_ranks(a), average_ranks(b));
    let n = a.len() as f64;
    let (ma, mb) = (ra.iter().sum::<f64>() / n, rb.iter().sum::<f64>() / n);
    let mut cov = 0.0;
    let mut va = 0.0;
    let mut vb = 0.0;
    for (x, y) in ra.iter().zip(&rb) {
        cov += (x - ma) * (y - mb);
        va += (x - ma).powi(2);
        vb += (y - mb).powi(2);
    }
    if va == 0.0 || vb == 0.0 {
        return Err(Error::InsufficientData("constant ranking".into()));
    }
    Ok(cov / (va * vb).sqrt())
}

/// Mean in-degree of pages created in `[from, to]`, counted `age` time units
/// after creation, for each requested age.
pub fn mean_degree_at_age(log: &EdgeLog, ages: &[f64], from: f64, to: f64) -> Result<Vec<f64>> {
    let mut arrivals: Vec<Vec<f64>> = vec![Vec::new(); log.pages().len()];
    for e in log.edges() {
        arrivals[e.target].push(e.created_at);
    }
    let chosen: Vec<usize> = (0..log.pages().len())
        .filter(|&p| (from..=to).contains(&log.pages()[p].created_at))
        .collect();
    if chosen.is_empty() {
        return Err(Error::InsufficientData(
            "no page created in the window".into(),
        ));
    }
    Ok(ages
        .iter()
        .map(|&age| {
            let total: usize = chosen
                .iter()
                .map(|&p| {
                    let limit = log.pages()[p].created_at + age;
                    arrivals[p].partition_point(|&t| t <= limit)
                })
                .sum();
            total as f64 / chosen.len() as f64
        })
        .collect())
}
