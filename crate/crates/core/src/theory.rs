//! Mean-field predictions for the recency models `qe` and `dqe`.
//!
//! `W_k` is the long-run total attractiveness of host `k`, `N_k` its inflow of
//! new links per unit time. For `dqe` the constant solves `W = F(W)` with
//!
//! ```text
//! F(W) = (lambda W / N) * (E[exp(N tau q / W)] - 1)
//! ```
//!
//! which is non-increasing in `W`, tends to `lambda tau E[q]` at infinity and
//! blows up at zero, so the root is unique. For `qe` the constant is simply
//! `lambda tau E[q]`.

use crate::error::{Error, Result};
use crate::model::{HostMatrix, HostParams, ModelSpec, QualityDist};

/// Relative width at which bisection stops.
pub const ROOT_REL_TOL: f64 = 1e-12;
/// Relative tolerance of the adaptive quadrature.
pub const QUAD_REL_TOL: f64 = 1e-9;
/// Probability mass dropped from the upper tail before integrating.
pub const QUAD_TAIL_MASS: f64 = 1e-12;

const MAX_EXPANSIONS: usize = 128;

fn unsupported(spec: ModelSpec, reason: &'static str) -> Error {
    Error::UnsupportedModel {
        model: spec.name().to_string(),
        reason,
    }
}

fn require_recency_quality(spec: ModelSpec) -> Result<()> {
    if spec.use_quality && spec.use_recency {
        Ok(())
    } else {
        Err(unsupported(
            spec,
            "mean-field solution needs quality and recency factors",
        ))
    }
}

/// `N_k = sum_i lambda_i M_i rho_ik`.
pub fn link_rates(hosts: &[HostParams], rho: &HostMatrix) -> Result<Vec<f64>> {
    if hosts.len() != rho.len() {
        return Err(Error::DimensionMismatch {
            expected: hosts.len(),
            found: rho.len(),
        });
    }
    let mut n = vec![0.0; hosts.len()];
    for (i, h) in hosts.iter().enumerate() {
        let out = h.rate * h.outdegree.mean();
        for (k, nk) in n.iter_mut().enumerate() {
            *nk += out * rho.get(i, k);
        }
    }
    Ok(n)
}

/// Adaptive Simpson quadrature of `f` over `[a, b]`.
pub fn integrate<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, rel_tol: f64) -> f64 {
    if b <= a {
        return 0.0;
    }
    let fa = f(a);
    let fb = f(b);
    let m = 0.5 * (a + b);
    let fm = f(m);
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    let tol = rel_tol * whole.abs().max(f64::MIN_POSITIVE);
    simpson_step(&f, a, b, fa, fm, fb, whole, tol, 48)
}

#[allow(clippy::too_many_arguments)]
fn simpson_step<F: Fn(f64) -> f64>(
    f: &F,
    a: f64,
    b: f64,
    fa: f64,
    fm: f64,
    fb: f64,
    whole: f64,
    tol: f64,
    depth: u32,
) -> f64 {
    let m = 0.5 * (a + b);
    let lm = 0.5 * (a + m);
    let rm = 0.5 * (m + b);
    let flm = f(lm);
    let frm = f(rm);
    let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    let delta = left + right - whole;
    if depth == 0 || delta.abs() <= 15.0 * tol {
        return left + right + delta / 15.0;
    }
    simpson_step(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1)
        + simpson_step(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1)
}

/// `E[g(q)]` by quadrature against the density, truncated at the
/// `1 - QUAD_TAIL_MASS` quantile. `None` for the point mass (no density).
pub fn expectation_by_quadrature<G: Fn(f64) -> f64>(dist: &QualityDist, g: G) -> Option<f64> {
    let upper = dist.quantile(1.0 - QUAD_TAIL_MASS);
    let v = match *dist {
        QualityDist::PointMass { .. } => return None,
        QualityDist::Uniform { lo, hi } => {
            integrate(|q| g(q) / (hi - lo), lo, upper.min(hi), QUAD_REL_TOL)
        }
        QualityDist::Exponential { mean } => integrate(
            |q| g(q) * (-q / mean).exp() / mean,
            0.0,
            upper,
            QUAD_REL_TOL,
        ),
        QualityDist::Pareto {
            x_min,
            ccdf_exponent: a,
        } => integrate(
            |q| g(q) * a * x_min.powf(a) / q.powf(a + 1.0),
            x_min,
            upper,
            QUAD_REL_TOL,
        ),
    };
    Some(v)
}

/// `E[exp(c q)]` for `c >= 0`; `None` when the integral diverges.
pub fn quality_mgf(dist: &QualityDist, c: f64) -> Option<f64> {
    let v = match *dist {
        QualityDist::PointMass { q0 } => (c * q0).exp(),
        QualityDist::Exponential { mean } => {
            if c * mean >= 1.0 {
                return None;
            }
            1.0 / (1.0 - c * mean)
        }
        QualityDist::Pareto { .. } => {
            if c > 0.0 {
                return None;
            }
            1.0
        }
        QualityDist::Uniform { .. } => expectation_by_quadrature(dist, |q| (c * q).exp())?,
    };
    v.is_finite().then_some(v)
}

/// `E[q exp(c q)]`, the derivative of [`quality_mgf`] in `c`.
pub fn quality_mgf_derivative(dist: &QualityDist, c: f64) -> Option<f64> {
    let v = match *dist {
        QualityDist::PointMass { q0 } => q0 * (c * q0).exp(),
        QualityDist::Exponential { mean } => {
            if c * mean >= 1.0 {
                return None;
            }
            mean / (1.0 - c * mean).powi(2)
        }
        QualityDist::Pareto { .. } => {
            if c > 0.0 {
                return None;
            }
            dist.mean()
        }
        QualityDist::Uniform { .. } => expectation_by_quadrature(dist, |q| q * (c * q).exp())?,
    };
    v.is_finite().then_some(v)
}

/// The `dqe` fixed-point map `F(W)`.
pub fn fixed_point_map(host: &HostParams, n: f64, w: f64) -> Result<f64> {
    if !(n > 0.0) || !(w > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "fixed-point map needs N > 0 and W > 0, got N = {n}, W = {w}"
        )));
    }
    let mgf = quality_mgf(&host.quality, n * host.tau / w).ok_or(Error::Divergence { w })?;
    Ok(host.rate * w / n * (mgf - 1.0))
}

/// Checks that `F` is non-increasing on a log-spaced grid around `w`.
///
/// Points where the quality integral diverges count as `+inf`.
pub fn fixed_point_map_is_monotone(host: &HostParams, n: f64, w: f64) -> bool {
    let mut prev = f64::INFINITY;
    for i in 0..=80 {
        let x = w * 10f64.powf(-2.0 + 4.0 * i as f64 / 80.0);
        let f = match fixed_point_map(host, n, x) {
            Ok(f) => f,
            Err(Error::Divergence { .. }) => f64::INFINITY,
            Err(_) => return false,
        };
        if f > prev * (1.0 + 1e-12) {
            return false;
        }
        prev = f;
    }
    true
}

/// Long-run total attractiveness `W` of a host receiving `n` links per unit time.
///
/// `qe` has the closed form `lambda tau E[q]`. For `dqe` the fixed point is
/// bracketed by doubling up from `lambda tau E[q]` (where `F(W) >= W`) and
/// then bisected. A host without inflow (`n == 0`) keeps every degree at its
/// initial value and gets the same closed form.
pub fn solve_w(host: &HostParams, n: f64, spec: ModelSpec) -> Result<f64> {
    require_recency_quality(spec)?;
    host.validate()?;
    if !(host.rate > 0.0) {
        return Err(Error::InvalidArgument(
            "host has no page arrivals (rate 0), W is zero".into(),
        ));
    }
    if !(n >= 0.0 && n.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "link rate must be >= 0, got {n}"
        )));
    }
    let floor = host.rate * host.tau * host.quality.mean();
    if !spec.use_degree || n == 0.0 {
        return Ok(floor);
    }

    // g(W) = F(W) - W, +inf where the integral diverges
    let g = |w: f64| -> Result<f64> {
        match fixed_point_map(host, n, w) {
            Ok(f) => Ok(f - w),
            Err(Error::Divergence { .. }) => Ok(f64::INFINITY),
            Err(e) => Err(e),
        }
    };

    let mut lo = floor;
    let mut hi = 2.0 * floor;
    let mut expansions = 0;
    loop {
        let gh = g(hi)?;
        if gh <= 0.0 {
            break;
        }
        if gh.is_nan() {
            return Err(Error::NoConvergence(format!("F is undefined at W = {hi}")));
        }
        expansions += 1;
        if expansions > MAX_EXPANSIONS {
            return if gh.is_infinite() {
                Err(Error::Divergence { w: hi })
            } else {
                Err(Error::NoConvergence(format!(
                    "no bracket found up to W = {hi}"
                )))
            };
        }
        lo = hi;
        hi *= 2.0;
    }
    while hi - lo > ROOT_REL_TOL * hi {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if g(mid)? > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Mean-field in-degree of a page of quality `q`, `dt` time units after creation.
///
/// For `dqe` this is the effective degree, starting at 1. For `qe` it is the
/// raw degree, starting at 0.
pub fn expected_degree(spec: ModelSpec, q: f64, dt: f64, n: f64, tau: f64, w: f64) -> Result<f64> {
    require_recency_quality(spec)?;
    if !(dt >= 0.0) {
        return Err(Error::InvalidArgument(format!("dt must be >= 0, got {dt}")));
    }
    if !(tau > 0.0) || !(w > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "tau and W must be positive, got tau = {tau}, W = {w}"
        )));
    }
    let scale = n * tau * q / w;
    let saturation = -(-dt / tau).exp_m1();
    if spec.use_degree {
        Ok((scale * saturation).exp())
    } else {
        Ok(scale * saturation)
    }
}

/// Per-host mean-field constants for one model.
#[derive(Debug, Clone, PartialEq)]
pub struct TheorySolution {
    pub spec: ModelSpec,
    /// Long-run total attractiveness. Zero for hosts without arrivals.
    pub w: Vec<f64>,
    /// Incoming link rate.
    pub n: Vec<f64>,
    /// Mean out-degree.
    pub m: Vec<f64>,
    /// Prefactor of the asymptotic decay `W - W(T) ~ C exp(-T/tau)`.
    pub c: Vec<f64>,
}

impl TheorySolution {
    pub fn solve(hosts: &[HostParams], rho: &HostMatrix, spec: ModelSpec) -> Result<Self> {
        require_recency_quality(spec)?;
        let n = link_rates(hosts, rho)?;
        let m = hosts.iter().map(|h| h.outdegree.mean()).collect();
        let mut w = Vec::with_capacity(hosts.len());
        let mut c = Vec::with_capacity(hosts.len());
        for (h, &nk) in hosts.iter().zip(&n) {
            if h.rate == 0.0 {
                w.push(0.0);
                c.push(0.0);
                continue;
            }
            let wk = solve_w(h, nk, spec)?;
            let ck = if spec.use_degree && nk > 0.0 {
                let a = nk * h.tau / wk;
                h.rate
                    * h.tau
                    * quality_mgf_derivative(&h.quality, a).ok_or(Error::Divergence { w: wk })?
            } else {
                h.rate * h.tau * h.quality.mean()
            };
            w.push(wk);
            c.push(ck);
        }
        Ok(Self { spec, w, n, m, c })
    }

    /// Fraction of links into host `k` whose endpoint age difference exceeds `t`,
    /// i.e. `(W_k - W_k(t)) / W_k`.
    pub fn host_recency(&self, host: &HostParams, k: usize, t: f64) -> Result<f64> {
        let (wk, nk) = (self.w[k], self.n[k]);
        if !(wk > 0.0) {
            return Err(Error::InvalidArgument(format!("host {k} has no pages")));
        }
        let decay = (-t / host.tau).exp();
        if !self.spec.use_degree || nk == 0.0 {
            return Ok(decay);
        }
        let a = nk * host.tau / wk;
        let full = quality_mgf(&host.quality, a).ok_or(Error::Divergence { w: wk })?;
        let young = quality_mgf(&host.quality, a * -(-t / host.tau).exp_m1())
            .ok_or(Error::Divergence { w: wk })?;
        Ok((host.rate / nk * (full - young)).clamp(0.0, 1.0))
    }

    /// Inflow-weighted recency fraction `e(t)` over all hosts.
    pub fn recency(&self, hosts: &[HostParams], t: f64) -> Result<f64> {
        if !(t >= 0.0) {
            return Err(Error::InvalidArgument(format!("T must be >= 0, got {t}")));
        }
        let mut num = 0.0;
        let mut den = 0.0;
        for (k, h) in hosts.iter().enumerate() {
            if self.n[k] > 0.0 && self.w[k] > 0.0 {
                num += self.n[k] * self.host_recency(h, k, t)?;
                den += self.n[k];
            }
        }
        if den == 0.0 {
            return Err(Error::InvalidArgument(
                "no host receives links (all N_k are zero)".into(),
            ));
        }
        Ok(num / den)
    }

    /// Large-`t` form `sum_k N_k (C_k / W_k) exp(-t/tau_k) / sum_k N_k`.
    pub fn recency_asymptote(&self, hosts: &[HostParams], t: f64) -> f64 {
        let mut num = 0.0;
        let mut den = 0.0;
        for (k, h) in hosts.iter().enumerate() {
            if self.n[k] > 0.0 && self.w[k] > 0.0 {
                num += self.n[k] * self.c[k] / self.w[k] * (-t / h.tau).exp();
                den += self.n[k];
            }
        }
        num / den
    }
}

/// Predicted fraction of links whose endpoints are more than `t` apart in age.
pub fn recency_curve(
    hosts: &[HostParams],
    rho: &HostMatrix,
    spec: ModelSpec,
    t: f64,
) -> Result<f64> {
    TheorySolution::solve(hosts, rho, spec)?.recency(hosts, t)
}

/// Survival exponent of the long-run in-degree distribution.
///
/// * `qe` with Pareto quality: degree is linear in quality, so the exponent
///   is the quality exponent.
/// * `dqe` with exponential quality of mean `mu`: degree is
///   `exp(N tau q / W)`, whence `P(d > x) = x^(-W / (N tau mu))`. The
///   reciprocal `N tau mu / W` is what one gets by reading `mu` as the rate
///   of the exponential law instead of its mean; the two agree only when the
///   ratio is one. Simulation matches `W / (N tau mu)`.
pub fn degree_tail_exponent(spec: ModelSpec, host: &HostParams, n: f64, w: f64) -> Result<f64> {
    require_recency_quality(spec)?;
    match (spec.use_degree, host.quality) {
        (false, QualityDist::Pareto { ccdf_exponent, .. }) => Ok(ccdf_exponent),
        (true, QualityDist::Exponential { mean }) => {
            if !(n > 0.0 && w > 0.0) {
                return Err(Error::InvalidArgument("N and W must be positive".into()));
            }
            Ok(w / (n * host.tau * mean))
        }
        (true, QualityDist::PointMass { .. }) => Err(unsupported(
            spec,
            "constant quality: the degree limit does not depend on quality, no power law",
        )),
        _ => Err(unsupported(
            spec,
            "power-law tail only for qe with pareto quality or dqe with exponential quality",
        )),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::OutDegreeDist;

    fn host(rate: f64, tau: f64, quality: QualityDist, m: u32) -> HostParams {
        HostParams::new(rate, tau, quality, OutDegreeDist::Constant { m }).unwrap()
    }

    fn pm(q0: f64) -> QualityDist {
        QualityDist::PointMass { q0 }
    }

    /// Plain bisection on `F(W) - W`, written independently of `solve_w`.
    fn bisect_oracle(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64) -> f64 {
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if f(mid) - mid > 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        0.5 * (lo + hi)
    }

    #[test]
    fn link_rate_examples() {
        let hosts = [host(1.0, 1.0, pm(1.0), 3), host(2.0, 1.0, pm(1.0), 1)];
        let rho = HostMatrix::new(vec![vec![1.0, 0.0], vec![1.0, 0.0]]).unwrap();
        assert_eq!(link_rates(&hosts, &rho).unwrap(), vec![5.0, 0.0]);

        let idle = [host(0.0, 1.0, pm(1.0), 3), host(0.0, 1.0, pm(1.0), 1)];
        assert_eq!(link_rates(&idle, &rho).unwrap(), vec![0.0, 0.0]);

        let single = [host(4.0, 1.0, pm(1.0), 2)];
        assert_eq!(
            link_rates(&single, &HostMatrix::identity(1)).unwrap(),
            vec![8.0]
        );

        assert!(matches!(
            link_rates(&single, &rho),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn qe_closed_form() {
        let h = host(2.0, 3.0, pm(5.0), 1);
        assert_eq!(solve_w(&h, 7.0, ModelSpec::QE).unwrap(), 30.0);
    }

    #[test]
    fn qe_scaling_is_exact() {
        let h = host(2.0, 3.0, QualityDist::Exponential { mean: 1.5 }, 1);
        let scaled = HostParams {
            quality: h.quality.scaled(4.0),
            ..h
        };
        let w = solve_w(&h, 1.0, ModelSpec::QE).unwrap();
        assert_eq!(solve_w(&scaled, 1.0, ModelSpec::QE).unwrap(), 4.0 * w);
    }

    #[test]
    fn dqe_point_mass() {
        let h = host(1.0, 1.0, pm(0.5), 2);
        let w = solve_w(&h, 2.0, ModelSpec::DQE).unwrap();
        let oracle = bisect_oracle(|w| 1.0 * w / 2.0 * ((2.0 * 0.5 / w).exp() - 1.0), 1e-3, 1e3);
        assert!((oracle - 1.0 / 3f64.ln()).abs() < 1e-10);
        assert!((w - oracle).abs() / oracle < 1e-10, "{w} vs {oracle}");
        assert!((w - 0.910239).abs() < 1e-6);
        assert!(fixed_point_map_is_monotone(&h, 2.0, w));
    }

    #[test]
    fn dqe_exponential_quality() {
        // W = W (1/(1 - 1/W) - 1) where the integral converges (W > 1)
        let oracle = bisect_oracle(|w| w * (1.0 / (1.0 - 1.0 / w) - 1.0), 1.0 + 1e-9, 100.0);
        assert!((oracle - 2.0).abs() < 1e-9);
        let h = host(1.0, 1.0, QualityDist::Exponential { mean: 1.0 }, 1);
        let w = solve_w(&h, 1.0, ModelSpec::DQE).unwrap();
        assert!((w - oracle).abs() < 1e-10);
        assert!(fixed_point_map_is_monotone(&h, 1.0, w));
        // the integral diverges below W = N tau mu
        assert_eq!(
            fixed_point_map(&h, 1.0, 0.5),
            Err(Error::Divergence { w: 0.5 })
        );
    }

    #[test]
    fn dqe_exponential_quality_starting_below_divergence() {
        // N > lambda puts the bracket start lambda tau mu inside the divergent region
        let h = host(0.7, 1.9, QualityDist::Exponential { mean: 0.4 }, 1);
        let w = solve_w(&h, 2.3, ModelSpec::DQE).unwrap();
        assert!((w - 1.9 * 0.4 * (0.7 + 2.3)).abs() < 1e-10);
    }

    #[test]
    fn dqe_pareto_quality_diverges() {
        let h = host(
            1.0,
            1.0,
            QualityDist::Pareto {
                x_min: 1.0,
                ccdf_exponent: 2.5,
            },
            1,
        );
        assert!(matches!(
            solve_w(&h, 1.0, ModelSpec::DQE),
            Err(Error::Divergence { .. })
        ));
    }

    #[test]
    fn dqe_uniform_quality_uses_quadrature() {
        let (lo, hi) = (0.2, 1.4);
        let h = host(1.5, 0.8, QualityDist::Uniform { lo, hi }, 1);
        let n = 2.5;
        let mgf = |c: f64| ((c * hi).exp() - (c * lo).exp()) / (c * (hi - lo));
        let oracle = bisect_oracle(|w| 1.5 * w / n * (mgf(n * 0.8 / w) - 1.0), 1e-3, 1e3);
        let w = solve_w(&h, n, ModelSpec::DQE).unwrap();
        assert!((w - oracle).abs() / oracle < 1e-8, "{w} vs {oracle}");
    }

    #[test]
    fn quadrature_agrees_with_closed_forms() {
        let d = QualityDist::Exponential { mean: 0.7 };
        let c = 0.05;
        let quad = expectation_by_quadrature(&d, |q| (c * q).exp()).unwrap();
        let exact = quality_mgf(&d, c).unwrap();
        assert!((quad - exact).abs() / exact < 1e-8);
        let quad = expectation_by_quadrature(&d, |q| q * (c * q).exp()).unwrap();
        let exact = quality_mgf_derivative(&d, c).unwrap();
        assert!((quad - exact).abs() / exact < 1e-8);
    }

    #[test]
    fn unsupported_models() {
        let h = host(1.0, 1.0, pm(1.0), 1);
        for spec in [
            ModelSpec::D,
            ModelSpec::DQ,
            ModelSpec::E,
            ModelSpec::DE,
            ModelSpec::Q,
        ] {
            assert!(matches!(
                solve_w(&h, 1.0, spec),
                Err(Error::UnsupportedModel { .. })
            ));
            assert!(expected_degree(spec, 1.0, 1.0, 1.0, 1.0, 1.0).is_err());
        }
    }

    #[test]
    fn expected_degree_examples() {
        assert_eq!(
            expected_degree(ModelSpec::QE, 1.0, 0.0, 1.0, 1.0, 1.0).unwrap(),
            0.0
        );
        let tau = 2.0;
        let d = expected_degree(ModelSpec::QE, 1.0, tau * 2f64.ln(), 1.0 / tau, tau, 1.0).unwrap();
        assert!((d - 0.5).abs() < 1e-12);
        let scale = 4f64.ln();
        let d = expected_degree(ModelSpec::DQE, 1.0, 1e6, scale, 1.0, 1.0).unwrap();
        assert!((d - 4.0).abs() < 1e-12);
        assert_eq!(
            expected_degree(ModelSpec::DQE, 1.0, 0.0, scale, 1.0, 1.0).unwrap(),
            1.0
        );
        assert!(expected_degree(ModelSpec::QE, 1.0, -1.0, 1.0, 1.0, 1.0).is_err());
    }

    #[test]
    fn expected_degree_is_monotone() {
        for spec in [ModelSpec::QE, ModelSpec::DQE] {
            let mut prev = -1.0;
            for i in 0..100 {
                let d = expected_degree(spec, 0.7, i as f64 * 0.1, 3.0, 1.3, 2.0).unwrap();
                assert!(d >= prev);
                prev = d;
            }
        }
    }

    #[test]
    fn recency_examples() {
        let hosts = [host(3.0, 2.0, QualityDist::Exponential { mean: 1.0 }, 2)];
        let rho = HostMatrix::identity(1);
        assert_eq!(
            recency_curve(&hosts, &rho, ModelSpec::QE, 0.0).unwrap(),
            1.0
        );
        let e = recency_curve(&hosts, &rho, ModelSpec::QE, 2.0).unwrap();
        assert!((e - (-1f64).exp()).abs() < 1e-12);
        assert!(recency_curve(&hosts, &rho, ModelSpec::QE, 1e4).unwrap() < 1e-12);

        let e0 = recency_curve(&hosts, &rho, ModelSpec::DQE, 0.0).unwrap();
        assert!((e0 - 1.0).abs() < 1e-9, "{e0}");
        assert!(recency_curve(&hosts, &rho, ModelSpec::DQE, 1e4).unwrap() < 1e-12);

        let idle = [host(0.0, 1.0, pm(1.0), 1)];
        assert!(recency_curve(&idle, &rho, ModelSpec::QE, 1.0).is_err());
    }

    #[test]
    fn recency_is_monotone_and_bounded() {
        let hosts = [
            host(1.0, 0.5, pm(1.0), 2),
            host(2.0, 3.0, QualityDist::Uniform { lo: 0.5, hi: 2.0 }, 1),
        ];
        let rho = HostMatrix::new(vec![vec![0.3, 0.7], vec![0.6, 0.4]]).unwrap();
        for spec in [ModelSpec::QE, ModelSpec::DQE] {
            let sol = TheorySolution::solve(&hosts, &rho, spec).unwrap();
            let mut prev = 1.0 + 1e-12;
            for i in 0..60 {
                let e = sol.recency(&hosts, i as f64 * 0.25).unwrap();
                assert!((0.0..=1.0).contains(&e));
                assert!(e <= prev);
                prev = e;
            }
        }
    }

    #[test]
    fn dqe_recency_approaches_asymptote() {
        let hosts = [host(1.0, 1.0, pm(0.5), 2)];
        let rho = HostMatrix::identity(1);
        let sol = TheorySolution::solve(&hosts, &rho, ModelSpec::DQE).unwrap();
        let mut prev_gap = f64::INFINITY;
        for t in [3.0, 6.0, 12.0] {
            let exact = sol.recency(&hosts, t).unwrap();
            let asym = sol.recency_asymptote(&hosts, t);
            let gap = (exact / asym - 1.0).abs();
            assert!(gap < 0.05 && gap < prev_gap, "t={t}: {exact} vs {asym}");
            prev_gap = gap;
        }
    }

    #[test]
    fn solution_stores_consistent_rates() {
        let hosts = [host(1.0, 1.0, pm(1.0), 3), host(2.0, 2.0, pm(2.0), 1)];
        let rho = HostMatrix::new(vec![vec![0.5, 0.5], vec![0.25, 0.75]]).unwrap();
        let sol = TheorySolution::solve(&hosts, &rho, ModelSpec::DQE).unwrap();
        assert_eq!(sol.n, vec![1.5 + 0.5, 1.5 + 1.5]);
        for (k, h) in hosts.iter().enumerate() {
            let f = fixed_point_map(h, sol.n[k], sol.w[k]).unwrap();
            assert!((f - sol.w[k]).abs() < 1e-9 * sol.w[k]);
            assert!(sol.c[k] > 0.0);
        }
    }

    #[test]
    fn tail_exponent_cases() {
        let pareto = host(
            1.0,
            1.0,
            QualityDist::Pareto {
                x_min: 1.0,
                ccdf_exponent: 2.5,
            },
            1,
        );
        assert_eq!(
            degree_tail_exponent(ModelSpec::QE, &pareto, 1.0, 1.0).unwrap(),
            2.5
        );
        let point = host(1.0, 1.0, pm(1.0), 1);
        assert!(matches!(
            degree_tail_exponent(ModelSpec::DQE, &point, 1.0, 1.0),
            Err(Error::UnsupportedModel { .. })
        ));
        let expo = host(1.0, 1.0, QualityDist::Exponential { mean: 1.0 }, 1);
        // N tau / W = 0.5
        assert_eq!(
            degree_tail_exponent(ModelSpec::DQE, &expo, 1.0, 2.0).unwrap(),
            2.0
        );
    }

    #[test]
    fn tail_exponent_matches_sampled_degrees() {
        use rand::SeedableRng;
        use rand_chacha::ChaCha8Rng;
        let expo = QualityDist::Exponential { mean: 1.0 };
        let (n, tau, w) = (1.0, 1.0, 2.0);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        // long-run degree exp(N tau q / W) for each sampled quality
        let mut d: Vec<f64> = (0..1_000_000)
            .map(|_| (n * tau * expo.sample(&mut rng) / w).exp())
            .collect();
        d.sort_by(|a, b| b.total_cmp(a));
        let k = 20_000;
        let x_k = d[k];
        let hill = k as f64 / d[..k].iter().map(|x| (x / x_k).ln()).sum::<f64>();
        let h = host(1.0, tau, expo, 1);
        let analytic = degree_tail_exponent(ModelSpec::DQE, &h, n, w).unwrap();
        assert!((hill - analytic).abs() < 0.05, "hill {hill} vs {analytic}");
    }
}
