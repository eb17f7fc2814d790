//! Spike-and-slab prior families over `(theta, gamma, sigma^2)`: log
//! densities, samplers, and numerical checkers for the slab lower-bound
//! and tail conditions.

use rand::Rng;
use rand_distr::{Distribution, Exp, Gamma, Normal};
use serde::{Deserialize, Serialize};
use statrs::function::erf::erfc;
use statrs::function::gamma::{gamma_ur, ln_gamma};
use thiserror::Error;

#[derive(Error, Debug, Clone, PartialEq)]
pub enum PriorError {
    #[error("theta/gamma length {got} does not match parameter count {expected}")]
    LengthMismatch { expected: usize, got: usize },
    #[error("theta[{0}] is nonzero off the sparsity mask")]
    MaskViolation(usize),
    #[error("invalid prior specification: {0}")]
    BadSpec(String),
}

/// Slab density family.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SlabFamily {
    Uniform,
    Gaussian,
    Laplace,
    SubWeibull,
}

impl SlabFamily {
    pub fn parse(name: &str) -> Result<Self, PriorError> {
        match name {
            "uniform" => Ok(Self::Uniform),
            "gaussian" => Ok(Self::Gaussian),
            "laplace" => Ok(Self::Laplace),
            "subweibull" => Ok(Self::SubWeibull),
            other => Err(PriorError::BadSpec(format!("unknown slab family '{other}'"))),
        }
    }
}

/// A slab distribution with scale `tau`. `alpha` is the sub-Weibull
/// shape; it is 2 for the Gaussian family, 1 for Laplace, and unused
/// for the uniform slab.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SlabSpec {
    pub family: SlabFamily,
    pub tau: f64,
    pub alpha: f64,
}

impl SlabSpec {
    pub fn new(family: SlabFamily, tau: f64, alpha: f64) -> Result<Self, PriorError> {
        if !(tau > 0.0) {
            return Err(PriorError::BadSpec(format!("tau must be positive, got {tau}")));
        }
        let alpha = match family {
            SlabFamily::Gaussian => 2.0,
            SlabFamily::Laplace => 1.0,
            _ => alpha,
        };
        if !(alpha > 0.0) {
            return Err(PriorError::BadSpec(format!(
                "alpha must be positive, got {alpha}"
            )));
        }
        Ok(Self { family, tau, alpha })
    }

    pub fn uniform(tau: f64) -> Result<Self, PriorError> {
        Self::new(SlabFamily::Uniform, tau, 1.0)
    }

    pub fn gaussian(tau: f64) -> Result<Self, PriorError> {
        Self::new(SlabFamily::Gaussian, tau, 2.0)
    }

    pub fn laplace(tau: f64) -> Result<Self, PriorError> {
        Self::new(SlabFamily::Laplace, tau, 1.0)
    }

    pub fn sub_weibull(tau: f64, alpha: f64) -> Result<Self, PriorError> {
        Self::new(SlabFamily::SubWeibull, tau, alpha)
    }

    /// Exact log density at `u`. The sub-Weibull normalizer is
    /// `2 tau Gamma(1 + 1/alpha)`.
    pub fn log_density(&self, u: f64) -> f64 {
        let t = self.tau;
        match self.family {
            SlabFamily::Uniform => {
                if u.abs() <= t {
                    -(2.0 * t).ln()
                } else {
                    f64::NEG_INFINITY
                }
            }
            SlabFamily::Gaussian => {
                -0.5 * (u / t) * (u / t) - (t * (2.0 * std::f64::consts::PI).sqrt()).ln()
            }
            SlabFamily::Laplace => -u.abs() / t - (2.0 * t).ln(),
            SlabFamily::SubWeibull => {
                let a = self.alpha;
                -(u.abs() / t).powf(a) - (2.0 * t).ln() - ln_gamma(1.0 + 1.0 / a)
            }
        }
    }

    /// Two-sided tail mass `P(|U| > t)` in closed form.
    pub fn tail(&self, t: f64) -> f64 {
        debug_assert!(t >= 0.0);
        let tau = self.tau;
        match self.family {
            SlabFamily::Uniform => (1.0 - t / tau).max(0.0),
            SlabFamily::Gaussian => erfc(t / (tau * std::f64::consts::SQRT_2)),
            SlabFamily::Laplace => (-t / tau).exp(),
            SlabFamily::SubWeibull => {
                if t == 0.0 {
                    1.0
                } else {
                    gamma_ur(1.0 / self.alpha, (t / tau).powf(self.alpha))
                }
            }
        }
    }

    /// Distribution function, via the symmetric tail.
    pub fn cdf(&self, u: f64) -> f64 {
        if u < 0.0 {
            0.5 * self.tail(-u)
        } else {
            1.0 - 0.5 * self.tail(u)
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let tau = self.tau;
        match self.family {
            SlabFamily::Uniform => rng.gen_range(-tau..=tau),
            SlabFamily::Gaussian => Normal::new(0.0, tau).expect("tau > 0").sample(rng),
            SlabFamily::Laplace => {
                let e: f64 = Exp::new(1.0).expect("rate > 0").sample(rng);
                let sign = if rng.gen_bool(0.5) { 1.0 } else { -1.0 };
                sign * tau * e
            }
            SlabFamily::SubWeibull => {
                let a = self.alpha;
                let w: f64 = Gamma::new(1.0 / a, 1.0).expect("shape > 0").sample(rng);
                let sign = if rng.gen_bool(0.5) { 1.0 } else { -1.0 };
                sign * tau * w.powf(1.0 / a)
            }
        }
    }
}

/// Uniform prior for the noise variance on `[lo, hi]`; the simplest
/// density satisfying the bounded-support, bounded-below condition.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Sigma2Prior {
    pub lo: f64,
    pub hi: f64,
}

impl Sigma2Prior {
    pub fn new(lo: f64, hi: f64) -> Result<Self, PriorError> {
        if !(lo > 0.0 && hi > lo) {
            return Err(PriorError::BadSpec(format!(
                "variance support must satisfy 0 < lo < hi, got [{lo}, {hi}]"
            )));
        }
        Ok(Self { lo, hi })
    }

    pub fn log_density(&self, sigma2: f64) -> f64 {
        if (self.lo..=self.hi).contains(&sigma2) {
            -(self.hi - self.lo).ln()
        } else {
            f64::NEG_INFINITY
        }
    }

    pub fn contains(&self, sigma2: f64) -> bool {
        (self.lo..=self.hi).contains(&sigma2)
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        rng.gen_range(self.lo..=self.hi)
    }
}

/// Sparsity structure of the prior over the inclusion mask.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum SparsityMode {
    /// Uniform over masks with exactly `sparsity` active coordinates.
    FixedCardinality { sparsity: usize },
    /// Independent inclusion with probability `rho`.
    Bernoulli { rho: f64 },
    /// Fixed-cardinality mask at model size `model_size` combined with
    /// the model-size prior `pi(N) ∝ exp(-lambda N log N)`; sampling
    /// across `N` is out of scope, density evaluation is conditional on
    /// `model_size`.
    Adaptive {
        lambda: f64,
        s_0: f64,
        model_size: usize,
    },
}

/// Joint prior specification for `(theta, gamma, sigma^2)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PriorSpec {
    pub slab: SlabSpec,
    pub sparsity: SparsityMode,
    pub sigma2: Sigma2Prior,
}

impl PriorSpec {
    pub fn validate(&self) -> Result<(), PriorError> {
        match &self.sparsity {
            SparsityMode::Bernoulli { rho } => {
                if !(*rho > 0.0 && *rho < 1.0) {
                    return Err(PriorError::BadSpec(format!(
                        "inclusion probability must be in (0,1), got {rho}"
                    )));
                }
            }
            SparsityMode::Adaptive { lambda, s_0, model_size } => {
                if !(*lambda > 0.0) {
                    return Err(PriorError::BadSpec("lambda must be positive".into()));
                }
                if !(*s_0 > 0.0) || *model_size == 0 {
                    return Err(PriorError::BadSpec("invalid adaptive sparsity".into()));
                }
            }
            SparsityMode::FixedCardinality { .. } => {}
        }
        Ok(())
    }

    /// The active-set size the mode prescribes (Bernoulli has none).
    pub fn target_sparsity(&self) -> Option<usize> {
        match &self.sparsity {
            SparsityMode::FixedCardinality { sparsity } => Some(*sparsity),
            SparsityMode::Bernoulli { .. } => None,
            SparsityMode::Adaptive { s_0, model_size, .. } => {
                Some((s_0 * *model_size as f64).ceil() as usize)
            }
        }
    }
}

fn ln_binomial(n: usize, k: usize) -> f64 {
    ln_gamma(n as f64 + 1.0) - ln_gamma(k as f64 + 1.0) - ln_gamma((n - k) as f64 + 1.0)
}

/// Log normalizer of `pi(N) ∝ exp(-lambda N log N)` over `N >= 1`,
/// summed to convergence. Returns the log of the sum and the stopping
/// index (the first omitted tail is below 1e-12 relative).
pub fn adaptive_log_normalizer(lambda: f64) -> (f64, usize) {
    let mut sum = 0.0f64;
    let mut n = 1usize;
    loop {
        let term = (-lambda * n as f64 * (n as f64).ln()).exp();
        sum += term;
        // exp(-lambda N log N) decays superexponentially; once a term is
        // tiny relative to the sum the remaining tail is dominated by a
        // geometric series with ratio < 1/2.
        if n > 2 && term < 0.5e-12 * sum {
            return (sum.ln(), n);
        }
        n += 1;
        if n > 2_000_000 {
            return (sum.ln(), n);
        }
    }
}

/// Joint log prior density of `(theta, gamma, sigma^2)`; `-infinity`
/// outside the support (wrong cardinality, sigma^2 off its interval).
///
/// Errors are reserved for structural violations: wrong lengths, or a
/// nonzero `theta` entry off the mask.
pub fn log_prior(
    theta: &[f64],
    gamma: &[bool],
    sigma2: f64,
    prior: &PriorSpec,
    param_count: usize,
) -> Result<f64, PriorError> {
    if theta.len() != param_count || gamma.len() != param_count {
        return Err(PriorError::LengthMismatch {
            expected: param_count,
            got: theta.len().min(gamma.len()),
        });
    }
    for (t, (&v, &g)) in theta.iter().zip(gamma).enumerate() {
        if !g && v != 0.0 {
            return Err(PriorError::MaskViolation(t));
        }
    }
    prior.validate()?;

    let active = gamma.iter().filter(|&&g| g).count();
    let mut lp = prior.sigma2.log_density(sigma2);

    let slab_sum = || -> f64 {
        theta
            .iter()
            .zip(gamma)
            .filter(|(_, &g)| g)
            .map(|(&v, _)| prior.slab.log_density(v))
            .sum()
    };

    match &prior.sparsity {
        SparsityMode::FixedCardinality { sparsity } => {
            if active != *sparsity {
                return Ok(f64::NEG_INFINITY);
            }
            lp += -ln_binomial(param_count, *sparsity) + slab_sum();
        }
        SparsityMode::Bernoulli { rho } => {
            lp += active as f64 * rho.ln()
                + (param_count - active) as f64 * (1.0 - rho).ln()
                + slab_sum();
        }
        SparsityMode::Adaptive { lambda, s_0, model_size } => {
            let s_n = (s_0 * *model_size as f64).ceil() as usize;
            if active != s_n {
                return Ok(f64::NEG_INFINITY);
            }
            let (log_z, _) = adaptive_log_normalizer(*lambda);
            let nf = *model_size as f64;
            lp += -lambda * nf * nf.ln() - log_z;
            lp += -ln_binomial(param_count, s_n) + slab_sum();
        }
    }
    Ok(lp)
}

/// Draw `(theta, gamma, sigma^2)` from the prior. `theta` is exactly
/// zero off the sampled mask.
pub fn sample_prior<R: Rng + ?Sized>(
    prior: &PriorSpec,
    param_count: usize,
    rng: &mut R,
) -> (Vec<f64>, Vec<bool>, f64) {
    let mut theta = vec![0.0; param_count];
    let mut gamma = vec![false; param_count];
    match &prior.sparsity {
        SparsityMode::FixedCardinality { sparsity } => {
            for t in rand::seq::index::sample(rng, param_count, (*sparsity).min(param_count)) {
                gamma[t] = true;
                theta[t] = prior.slab.sample(rng);
            }
        }
        SparsityMode::Adaptive { s_0, model_size, .. } => {
            let s = ((s_0 * *model_size as f64).ceil() as usize).min(param_count);
            for t in rand::seq::index::sample(rng, param_count, s) {
                gamma[t] = true;
                theta[t] = prior.slab.sample(rng);
            }
        }
        SparsityMode::Bernoulli { rho } => {
            for t in 0..param_count {
                if rng.gen_bool(*rho) {
                    gamma[t] = true;
                    theta[t] = prior.slab.sample(rng);
                }
            }
        }
    }
    (theta, gamma, prior.sigma2.sample(rng))
}

/// Report of the slab lower-bound condition: the negative log of the
/// infimum of the slab density over `|u| <= B* + 1` must be at most
/// `c1 log n`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct B1Report {
    pub neg_log_inf: f64,
    pub budget: f64,
    pub pass: bool,
    pub detail: String,
}

pub fn check_b1(slab: &SlabSpec, b_star: f64, n: u64, c1: f64) -> B1Report {
    let edge = b_star + 1.0;
    let budget = c1 * (n as f64).ln();
    match slab.family {
        SlabFamily::Uniform => {
            if slab.tau < edge {
                B1Report {
                    neg_log_inf: f64::INFINITY,
                    budget,
                    pass: false,
                    detail: format!(
                        "slab support too small: tau = {} < B* + 1 = {edge}",
                        slab.tau
                    ),
                }
            } else {
                let lhs = (2.0 * slab.tau).ln();
                B1Report {
                    neg_log_inf: lhs,
                    budget,
                    pass: lhs <= budget,
                    detail: format!("log(2 tau) = {lhs}"),
                }
            }
        }
        _ => {
            // The density is symmetric and decreasing in |u|, so the
            // infimum over |u| <= B* + 1 sits at the edge.
            let lhs = -slab.log_density(edge);
            B1Report {
                neg_log_inf: lhs,
                budget,
                pass: lhs <= budget,
                detail: format!("-log density at |u| = {edge}: {lhs}"),
            }
        }
    }
}

/// Report of the slab tail condition
/// `P(|U| > t) <= c2 exp[-c3 (t/tau)^alpha]` with the family's natural
/// constants, evaluated on a grid of thresholds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct B2Report {
    pub c2: f64,
    pub c3: f64,
    pub alpha: f64,
    /// Largest observed `tail / bound` over the grid.
    pub max_ratio: f64,
    pub pass: bool,
}

/// Natural `(c2, c3)` per family: exact `(1, 1)` for Laplace, the
/// standard `(1, 1/2)` Gaussian tail bound, `(1, 1)` for the uniform
/// slab (via `1 - x <= e^{-x}`), and for sub-Weibull shapes below 1 a
/// fitted `c2` at `c3 = 1/2` (the regularized upper incomplete gamma
/// exceeds `e^{-x}` there).
pub fn check_b2(slab: &SlabSpec, t_grid: &[f64]) -> B2Report {
    let (c2, c3, alpha) = match slab.family {
        SlabFamily::Uniform => (1.0, 1.0, 1.0),
        SlabFamily::Gaussian => (1.0, 0.5, 2.0),
        SlabFamily::Laplace => (1.0, 1.0, 1.0),
        SlabFamily::SubWeibull => {
            let a = slab.alpha;
            if a >= 1.0 {
                (1.0, 0.5, a)
            } else {
                // Fit c2 = sup_x Q(1/a, x) e^{x/2} on an internal grid.
                let shape = 1.0 / a;
                let mut c2 = 1.0f64;
                for i in 0..4000 {
                    let x = i as f64 * 0.1;
                    let q = if x == 0.0 { 1.0 } else { gamma_ur(shape, x) };
                    c2 = c2.max(q * (0.5 * x).exp());
                }
                (c2 * 1.01, 0.5, a)
            }
        }
    };
    let mut max_ratio = 0.0f64;
    for &t in t_grid {
        let bound = c2 * (-c3 * (t / slab.tau).powf(alpha)).exp();
        let tail = slab.tail(t);
        if bound > 0.0 {
            max_ratio = max_ratio.max(tail / bound);
        }
    }
    B2Report {
        c2,
        c3,
        alpha,
        max_ratio,
        pass: max_ratio <= 1.0 + 1e-9,
    }
}

/// Per-model-size report of the conditional slab conditions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CReport {
    pub lambda_ok: bool,
    /// `(N, B1 pass, B2 pass, tau_N / N^beta_ad)` per grid point.
    pub per_model: Vec<(usize, bool, bool, f64)>,
    /// Scale condition `tau_N <~ N^{beta_ad}`: the ratio may not grow by
    /// more than `scale_factor` across the grid.
    pub scale_ok: bool,
    pub scale_factor: f64,
    pub pass: bool,
}

/// Conditional versions of the slab checks for the adaptive prior:
/// the lower bound must hold with `log N` budgets, the tail bound per
/// `N`, the model-size rate `lambda` must be positive, and the slab
/// scale may not outgrow `N^{beta_ad}`.
pub fn check_c(
    slab_of_n: &dyn Fn(usize) -> SlabSpec,
    lambda: f64,
    n_grid: &[usize],
    beta_ad: f64,
    c1: f64,
) -> CReport {
    let lambda_ok = lambda > 0.0;
    let mut per_model = Vec::with_capacity(n_grid.len());
    let mut all = lambda_ok;
    let mut ratios = Vec::with_capacity(n_grid.len());
    for &n in n_grid {
        let slab = slab_of_n(n);
        let b_star = (n as f64).powf(beta_ad);
        let b1 = check_b1(&slab, b_star, n.max(2) as u64, c1);
        let t_grid: Vec<f64> = (1..=20).map(|i| slab.tau * i as f64 * 0.25).collect();
        let b2 = check_b2(&slab, &t_grid);
        let ratio = slab.tau / (n as f64).powf(beta_ad);
        ratios.push(ratio);
        all &= b1.pass && b2.pass;
        per_model.push((n, b1.pass, b2.pass, ratio));
    }
    let scale_factor = 10.0;
    let scale_ok = match (ratios.first(), ratios.last()) {
        (Some(&first), Some(&last)) => last <= scale_factor * first,
        _ => true,
    };
    all &= scale_ok;
    CReport {
        lambda_ok,
        per_model,
        scale_ok,
        scale_factor,
        pass: all,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::rngs::StdRng;
    use rand::SeedableRng;

    fn slabs() -> Vec<SlabSpec> {
        vec![
            SlabSpec::uniform(2.0).unwrap(),
            SlabSpec::gaussian(1.3).unwrap(),
            SlabSpec::laplace(0.8).unwrap(),
            SlabSpec::sub_weibull(1.1, 0.5).unwrap(),
            SlabSpec::sub_weibull(0.9, 3.0).unwrap(),
        ]
    }

    /// Adaptive Simpson quadrature, the integration oracle for density
    /// and tail checks.
    fn quad(f: &dyn Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
        fn simpson(f: &dyn Fn(f64) -> f64, a: f64, b: f64) -> f64 {
            (b - a) / 6.0 * (f(a) + 4.0 * f(0.5 * (a + b)) + f(b))
        }
        fn rec(f: &dyn Fn(f64) -> f64, a: f64, b: f64, whole: f64, tol: f64, depth: u32) -> f64 {
            let m = 0.5 * (a + b);
            let left = simpson(f, a, m);
            let right = simpson(f, m, b);
            if depth > 40 || (left + right - whole).abs() < 15.0 * tol {
                left + right + (left + right - whole) / 15.0
            } else {
                rec(f, a, m, left, tol / 2.0, depth + 1) + rec(f, m, b, right, tol / 2.0, depth + 1)
            }
        }
        rec(f, a, b, simpson(f, a, b), tol, 0)
    }

    /// Integration range wide enough that the omitted tail mass is
    /// below 1e-12 (sub-Weibull shapes below 1 have long tails).
    fn support_radius(slab: &SlabSpec) -> f64 {
        let mut hi = slab.tau * 4.0;
        while slab.tail(hi) > 1e-12 {
            hi *= 2.0;
        }
        hi
    }

    #[test]
    fn densities_integrate_to_one() {
        for slab in slabs() {
            let f = move |u: f64| slab.log_density(u).exp();
            let hi = support_radius(&slab);
            let total = quad(&f, -hi, hi, 1e-10);
            assert!(
                (total - 1.0).abs() < 1e-6,
                "{:?}: integral = {total}",
                slab.family
            );
        }
    }

    #[test]
    fn tails_match_quadrature() {
        for slab in slabs() {
            let hi = support_radius(&slab);
            for frac in [0.0, 0.3, 1.0, 2.5] {
                let t = slab.tau * frac;
                let f = move |u: f64| slab.log_density(u).exp();
                let mass = 2.0 * quad(&f, t, hi, 1e-11);
                let tail = slab.tail(t);
                assert!(
                    (mass - tail).abs() < 1e-8,
                    "{:?} t={t}: quad {mass} vs closed {tail}",
                    slab.family
                );
            }
        }
    }

    #[test]
    fn tail_worked_examples() {
        let u = SlabSpec::uniform(1.7).unwrap();
        assert_eq!(u.tail(1.7), 0.0);
        assert_eq!(u.tail(2.0), 0.0);

        let l = SlabSpec::laplace(0.9).unwrap();
        assert!((l.tail(0.9) - (-1.0f64).exp()).abs() < 1e-15);

        let g = SlabSpec::gaussian(2.2).unwrap();
        assert_eq!(g.tail(0.0), 1.0);

        // Sub-Weibull reduces to Laplace at alpha = 1.
        let sw = SlabSpec::sub_weibull(0.9, 1.0).unwrap();
        for t in [0.0, 0.5, 1.3, 4.0] {
            assert!((sw.tail(t) - l.tail(t)).abs() < 1e-12);
        }
    }

    fn fixed_prior(s: usize) -> PriorSpec {
        PriorSpec {
            slab: SlabSpec::gaussian(1.0).unwrap(),
            sparsity: SparsityMode::FixedCardinality { sparsity: s },
            sigma2: Sigma2Prior::new(0.0025, 1.0).unwrap(),
        }
    }

    #[test]
    fn log_prior_fixed_cardinality() {
        let t = 10usize;
        let prior = fixed_prior(3);
        let mut theta = vec![0.0; t];
        let mut gamma = vec![false; t];
        for i in [1, 4, 7] {
            gamma[i] = true;
            theta[i] = 0.3;
        }
        let lp = log_prior(&theta, &gamma, 0.09, &prior, t).unwrap();
        let expect = -ln_binomial(10, 3)
            + 3.0 * prior.slab.log_density(0.3)
            + prior.sigma2.log_density(0.09);
        assert!((lp - expect).abs() < 1e-12);

        // Wrong cardinality is off the support.
        gamma[9] = true;
        theta[9] = 0.1;
        assert_eq!(
            log_prior(&theta, &gamma, 0.09, &prior, t).unwrap(),
            f64::NEG_INFINITY
        );

        // Variance outside its support is off the support.
        gamma[9] = false;
        theta[9] = 0.0;
        assert_eq!(
            log_prior(&theta, &gamma, 4.0, &prior, t).unwrap(),
            f64::NEG_INFINITY
        );
    }

    #[test]
    fn log_prior_bernoulli_empty_mask() {
        let t = 7usize;
        let prior = PriorSpec {
            slab: SlabSpec::laplace(1.0).unwrap(),
            sparsity: SparsityMode::Bernoulli { rho: 0.2 },
            sigma2: Sigma2Prior::new(0.01, 0.5).unwrap(),
        };
        let theta = vec![0.0; t];
        let gamma = vec![false; t];
        let lp = log_prior(&theta, &gamma, 0.3, &prior, t).unwrap();
        let expect = 7.0 * (0.8f64).ln() + prior.sigma2.log_density(0.3);
        assert!((lp - expect).abs() < 1e-12);
    }

    #[test]
    fn log_prior_structural_errors() {
        let prior = fixed_prior(1);
        let theta = vec![0.0; 4];
        let gamma = vec![false; 4];
        assert!(matches!(
            log_prior(&theta, &gamma, 0.1, &prior, 5),
            Err(PriorError::LengthMismatch { .. })
        ));
        let mut theta = vec![0.0; 5];
        let gamma = vec![false; 5];
        theta[2] = 0.4;
        assert!(matches!(
            log_prior(&theta, &gamma, 0.1, &prior, 5),
            Err(PriorError::MaskViolation(2))
        ));
    }

    #[test]
    fn adaptive_prior_density_and_normalizer() {
        let (log_z, stop) = adaptive_log_normalizer(1.0);
        // Direct partial sum for comparison.
        let direct: f64 = (1..200)
            .map(|n| (-(n as f64) * (n as f64).ln()).exp())
            .sum();
        assert!((log_z - direct.ln()).abs() < 1e-12);
        assert!(stop < 100);

        let t = 12usize;
        let prior = PriorSpec {
            slab: SlabSpec::gaussian(2.0).unwrap(),
            sparsity: SparsityMode::Adaptive {
                lambda: 1.0,
                s_0: 1.0,
                model_size: 2,
            },
            sigma2: Sigma2Prior::new(0.01, 1.0).unwrap(),
        };
        let mut theta = vec![0.0; t];
        let mut gamma = vec![false; t];
        gamma[0] = true;
        theta[0] = 0.5;
        gamma[5] = true;
        theta[5] = -0.2;
        let lp = log_prior(&theta, &gamma, 0.25, &prior, t).unwrap();
        let expect = -2.0 * 2f64.ln() - log_z - ln_binomial(12, 2)
            + prior.slab.log_density(0.5)
            + prior.slab.log_density(-0.2)
            + prior.sigma2.log_density(0.25);
        assert!((lp - expect).abs() < 1e-12);
    }

    #[test]
    fn sampler_respects_structure() {
        let mut rng = StdRng::seed_from_u64(99);
        let t = 40usize;

        // Fixed cardinality: every draw has exactly S active slots.
        let prior = fixed_prior(6);
        for _ in 0..1000 {
            let (theta, gamma, s2) = sample_prior(&prior, t, &mut rng);
            assert_eq!(gamma.iter().filter(|&&g| g).count(), 6);
            assert!(prior.sigma2.contains(s2));
            for (v, g) in theta.iter().zip(&gamma) {
                if !g {
                    assert_eq!(*v, 0.0);
                }
            }
        }

        // Uniform slab: sampled magnitudes within the support.
        let prior = PriorSpec {
            slab: SlabSpec::uniform(0.7).unwrap(),
            sparsity: SparsityMode::FixedCardinality { sparsity: 10 },
            sigma2: Sigma2Prior::new(0.01, 1.0).unwrap(),
        };
        for _ in 0..200 {
            let (theta, _, _) = sample_prior(&prior, t, &mut rng);
            for v in theta {
                assert!(v.abs() <= 0.7);
            }
        }
    }

    #[test]
    fn bernoulli_inclusion_frequency_concentrates() {
        let mut rng = StdRng::seed_from_u64(123);
        let t = 50usize;
        let rho = 0.23;
        let prior = PriorSpec {
            slab: SlabSpec::gaussian(1.0).unwrap(),
            sparsity: SparsityMode::Bernoulli { rho },
            sigma2: Sigma2Prior::new(0.01, 1.0).unwrap(),
        };
        let draws = 10_000usize / t + 1;
        let mut active = 0usize;
        let mut total = 0usize;
        for _ in 0..draws {
            let (_, gamma, _) = sample_prior(&prior, t, &mut rng);
            active += gamma.iter().filter(|&&g| g).count();
            total += t;
        }
        let freq = active as f64 / total as f64;
        let band = 3.0 * (rho * (1.0 - rho) / total as f64).sqrt();
        assert!((freq - rho).abs() < band, "freq={freq} band={band}");
    }

    #[test]
    fn sampled_values_match_density_by_ks() {
        let mut rng = StdRng::seed_from_u64(7);
        for slab in slabs() {
            let n = 10_000usize;
            let mut values: Vec<f64> = (0..n).map(|_| slab.sample(&mut rng)).collect();
            values.sort_by(|a, b| a.partial_cmp(b).unwrap());
            let mut ks = 0.0f64;
            for (i, v) in values.iter().enumerate() {
                let emp_lo = i as f64 / n as f64;
                let emp_hi = (i + 1) as f64 / n as f64;
                let cdf = slab.cdf(*v);
                ks = ks.max((cdf - emp_lo).abs()).max((cdf - emp_hi).abs());
            }
            assert!(ks < 0.02, "{:?}: KS = {ks}", slab.family);
        }
    }

    #[test]
    fn b1_reports() {
        // Gaussian with tau = B*: lhs ~ 1/2 + log(sqrt(2 pi) tau).
        let n = 1_000_000u64;
        let beta = 0.5;
        let s_tilde = 1.0;
        let tau = (n as f64).powf(beta / (2.0 * s_tilde + 1.0));
        let slab = SlabSpec::gaussian(tau).unwrap();
        let b_star = tau;
        let rep = check_b1(&slab, b_star, n, 2.0);
        let expect = ((b_star + 1.0) / tau).powi(2) / 2.0
            + ((2.0 * std::f64::consts::PI).sqrt() * tau).ln();
        assert!((rep.neg_log_inf - expect).abs() < 1e-12);
        assert!(rep.pass);

        // Uniform with tau >= B* + 1: lhs = log(2 tau).
        let slab = SlabSpec::uniform(2.0 * tau).unwrap();
        let rep = check_b1(&slab, b_star, n, 2.0);
        assert!((rep.neg_log_inf - (4.0 * tau).ln()).abs() < 1e-12);
        assert!(rep.pass);

        // Uniform with tau < B* + 1 fails with the support diagnostic.
        let slab = SlabSpec::uniform(0.5 * tau).unwrap();
        let rep = check_b1(&slab, b_star, n, 2.0);
        assert!(!rep.pass);
        assert!(rep.detail.contains("support too small"));

        // Laplace with tau = B*: lhs = (B*+1)/tau + log(2 tau).
        let slab = SlabSpec::laplace(tau).unwrap();
        let rep = check_b1(&slab, b_star, n, 2.0);
        let expect = (b_star + 1.0) / tau + (2.0 * tau).ln();
        assert!((rep.neg_log_inf - expect).abs() < 1e-12);
        assert!(rep.pass);
    }

    #[test]
    fn b2_reports() {
        let grid: Vec<f64> = (0..=40).map(|i| i as f64 * 0.2).collect();

        // Laplace: exact equality with (1, 1, 1).
        let rep = check_b2(&SlabSpec::laplace(0.7).unwrap(), &grid);
        assert!((rep.max_ratio - 1.0).abs() < 1e-9);
        assert!(rep.pass);

        // Gaussian: (1, 1/2, 2) strictly dominates.
        let rep = check_b2(&SlabSpec::gaussian(1.1).unwrap(), &grid);
        assert!(rep.pass);
        assert!(rep.max_ratio <= 1.0);

        // Uniform: tail vanishes past tau.
        let rep = check_b2(&SlabSpec::uniform(1.0).unwrap(), &grid);
        assert!(rep.pass);

        // Sub-Weibull, both regimes.
        for alpha in [0.5, 1.5] {
            let rep = check_b2(&SlabSpec::sub_weibull(1.0, alpha).unwrap(), &grid);
            assert!(rep.pass, "alpha={alpha}: ratio {}", rep.max_ratio);
        }
    }

    #[test]
    fn c_reports() {
        let beta_ad = 0.55;
        let grid: Vec<usize> = (1..=10).map(|k| 1 << k).collect();

        // Gaussian slab with tau_N = N^beta_ad passes. The budget at
        // N = 2 is only c1 log 2, so the asymptotic condition needs
        // c1 = 4 to hold from the very start of the grid.
        let make = move |n: usize| SlabSpec::gaussian((n as f64).powf(beta_ad)).unwrap();
        let rep = check_c(&make, 1.0, &grid, beta_ad, 4.0);
        assert!(rep.lambda_ok);
        assert!(rep.scale_ok);
        assert!(rep.pass, "{rep:?}");

        // lambda = 0 fails.
        let rep = check_c(&make, 0.0, &grid, beta_ad, 4.0);
        assert!(!rep.lambda_ok);
        assert!(!rep.pass);

        // tau_N = N^{2 beta_ad} fails the scale check.
        let make2 = move |n: usize| SlabSpec::gaussian((n as f64).powf(2.0 * beta_ad)).unwrap();
        let rep = check_c(&make2, 1.0, &grid, beta_ad, 4.0);
        assert!(!rep.scale_ok);
        assert!(!rep.pass);
    }
}
