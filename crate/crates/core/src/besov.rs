//! Anisotropic finite differences, modulus of smoothness, Besov
//! seminorm estimation, and a catalog of test functions with known
//! smoothness.
//!
//! This module is a numerical diagnostic aid: the modulus is a sampled
//! lower bound of the true sup over directions, and the seminorm is a
//! truncated sum. Sampled directions always include the axis-aligned
//! extremes and the full-radius corners, which attain the sup for the
//! separable catalog functions.

use std::sync::Arc;

use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Error, Debug, Clone, PartialEq)]
pub enum BesovError {
    #[error("unknown test function '{0}'")]
    UnknownName(String),
    #[error("invalid smoothness profile: {0}")]
    BadProfile(String),
}

/// Anisotropic smoothness parameters `(s, p, q)`; `p` and `q` may be
/// `f64::INFINITY`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SmoothnessProfile {
    pub s: Vec<f64>,
    pub p: f64,
    pub q: f64,
}

impl SmoothnessProfile {
    pub fn new(s: Vec<f64>, p: f64, q: f64) -> Result<Self, BesovError> {
        if s.is_empty() {
            return Err(BesovError::BadProfile("empty smoothness vector".into()));
        }
        if s.iter().any(|&v| !(v > 0.0)) {
            return Err(BesovError::BadProfile(
                "smoothness entries must be positive".into(),
            ));
        }
        if !(p > 0.0) || !(q > 0.0) {
            return Err(BesovError::BadProfile("p and q must be positive".into()));
        }
        Ok(Self { s, p, q })
    }

    pub fn dim(&self) -> usize {
        self.s.len()
    }

    /// Difference order `r = max_i floor(s_i) + 1`.
    pub fn difference_order(&self) -> usize {
        self.s.iter().fold(0usize, |r, &v| r.max(v.floor() as usize)) + 1
    }

    /// Intrinsic smoothness `(sum_j 1/s_j)^{-1}`.
    pub fn intrinsic_smoothness(&self) -> f64 {
        crate::planner::intrinsic_smoothness(&self.s).expect("validated profile")
    }

    /// Modulus radii `(2^{-k/s_1}, ..., 2^{-k/s_d})` at dyadic level `k`.
    pub fn radii(&self, k: usize) -> Vec<f64> {
        self.s.iter().map(|&s| 2f64.powf(-(k as f64) / s)).collect()
    }
}

/// `r`th-order anisotropic finite difference of `f` at `x` in direction
/// `h`, with the boundary convention: zero unless `x + r h` stays inside
/// the unit cube.
pub fn finite_difference(f: &dyn Fn(&[f64]) -> f64, r: usize, h: &[f64], x: &[f64]) -> f64 {
    debug_assert_eq!(h.len(), x.len());
    let inside = x.iter().zip(h).all(|(&xi, &hi)| {
        let end = xi + r as f64 * hi;
        (0.0..=1.0).contains(&end)
    });
    if !inside {
        return 0.0;
    }
    let mut point = vec![0.0; x.len()];
    let mut acc = 0.0;
    let mut binom = 1.0f64; // C(r, j)
    for j in 0..=r {
        if j > 0 {
            binom = binom * (r - j + 1) as f64 / j as f64;
        }
        let sign = if (r - j) % 2 == 0 { 1.0 } else { -1.0 };
        for (pi, (&xi, &hi)) in point.iter_mut().zip(x.iter().zip(h)) {
            *pi = xi + j as f64 * hi;
        }
        acc += sign * binom * f(&point);
    }
    acc
}

fn grid_lp_norm(values: &[f64], p: f64) -> f64 {
    if p.is_infinite() {
        values.iter().fold(0.0f64, |m, v| m.max(v.abs()))
    } else {
        let mean = values.iter().map(|v| v.abs().powf(p)).sum::<f64>() / values.len() as f64;
        mean.powf(1.0 / p)
    }
}

/// Iterate the tensor midpoint grid with `grid_n` points per dimension.
fn for_each_grid_point(dim: usize, grid_n: usize, mut visit: impl FnMut(&[f64])) {
    let mut idx = vec![0usize; dim];
    let mut x = vec![0.0f64; dim];
    loop {
        for (xi, &i) in x.iter_mut().zip(idx.iter()) {
            *xi = (i as f64 + 0.5) / grid_n as f64;
        }
        visit(&x);
        let mut d = 0;
        loop {
            if d == dim {
                return;
            }
            idx[d] += 1;
            if idx[d] < grid_n {
                break;
            }
            idx[d] = 0;
            d += 1;
        }
    }
}

/// Approximate anisotropic modulus of smoothness
/// `w_{r,p}(f, t) = sup_{|h_i| <= t_i} || Delta_h^r f ||_{L^p}`.
///
/// The sup is sampled over `dir_n` directions (axis-aligned extremes
/// `±t_j e_j` and the full-radius corners `±t` first, then uniform
/// random `h` from a fixed internal seed); the `L^p` norm is a tensor
/// midpoint rule with `grid_n` points per dimension. The result is a
/// deterministic lower bound of the true sup.
pub fn modulus(
    f: &dyn Fn(&[f64]) -> f64,
    r: usize,
    p: f64,
    t: &[f64],
    grid_n: usize,
    dir_n: usize,
) -> f64 {
    let d = t.len();
    let mut dirs: Vec<Vec<f64>> = Vec::new();
    for j in 0..d {
        for sign in [1.0, -1.0] {
            let mut h = vec![0.0; d];
            h[j] = sign * t[j];
            dirs.push(h);
        }
    }
    dirs.push(t.to_vec());
    dirs.push(t.iter().map(|v| -v).collect());
    let mut rng = StdRng::seed_from_u64(0x6265_736f_76);
    while dirs.len() < dir_n.max(dirs.len()) {
        let h: Vec<f64> = t.iter().map(|&ti| rng.gen_range(-1.0..=1.0) * ti).collect();
        dirs.push(h);
    }

    let mut best = 0.0f64;
    let mut diffs = Vec::new();
    for h in &dirs {
        diffs.clear();
        for_each_grid_point(d, grid_n, |x| {
            diffs.push(finite_difference(f, r, h, x));
        });
        best = best.max(grid_lp_norm(&diffs, p));
    }
    best
}

/// Truncated seminorm estimate with its truncation diagnostics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeminormEstimate {
    pub value: f64,
    /// Truncation level actually used.
    pub k_max: usize,
    /// Last term `2^k w_{r,p}(f, 2^{-k/s})` of the sum.
    pub last_term: f64,
    /// `last_term / value` (0 when the value is 0); small means the
    /// truncation tail is negligible.
    pub tail_ratio: f64,
}

/// Estimate the anisotropic Besov seminorm by truncating the dyadic sum
/// at `k_max`:
/// `(sum_{k<=k_max} [2^k w_{r,p}(f, (2^{-k/s_1}, ..))]^q)^{1/q}`
/// (maximum over `k` when `q` is infinite).
pub fn seminorm_estimate(
    f: &dyn Fn(&[f64]) -> f64,
    profile: &SmoothnessProfile,
    k_max: usize,
    grid_n: usize,
    dir_n: usize,
) -> SeminormEstimate {
    let r = profile.difference_order();
    let mut acc = 0.0f64;
    let mut sup = 0.0f64;
    let mut last = 0.0f64;
    for k in 0..=k_max {
        let t = profile.radii(k);
        let w = modulus(f, r, profile.p, &t, grid_n, dir_n);
        let term = 2f64.powi(k as i32) * w;
        last = term;
        if profile.q.is_infinite() {
            sup = sup.max(term);
        } else {
            acc += term.powf(profile.q);
        }
    }
    let value = if profile.q.is_infinite() {
        sup
    } else {
        acc.powf(1.0 / profile.q)
    };
    SeminormEstimate {
        value,
        k_max,
        last_term: last,
        tail_ratio: if value > 0.0 { last / value } else { 0.0 },
    }
}

/// A bounded test function with a declared smoothness profile.
#[derive(Clone)]
pub struct TestFunction {
    pub name: String,
    pub profile: SmoothnessProfile,
    evaluator: Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>,
}

impl TestFunction {
    pub fn eval(&self, x: &[f64]) -> f64 {
        (self.evaluator)(x)
    }

    pub fn as_fn(&self) -> Arc<dyn Fn(&[f64]) -> f64 + Send + Sync> {
        self.evaluator.clone()
    }
}

impl std::fmt::Debug for TestFunction {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("TestFunction")
            .field("name", &self.name)
            .field("profile", &self.profile)
            .finish()
    }
}

/// One-dimensional profile factor with exact Hoelder/Besov smoothness
/// `s` and a cusp at `u = 1/2`, valued in `[0, 1]`.
///
/// For non-even-integer `s` this is `1 - |2u-1|^s`; even integers would
/// make that analytic, so they use the signed power `(1 - t|t|^{s-1})/2`
/// whose derivative of order `s` jumps at the cusp.
pub fn cusp_factor(s: f64, u: f64) -> f64 {
    let t = 2.0 * u - 1.0;
    let is_even_int = s.fract() == 0.0 && (s as u64) % 2 == 0;
    if is_even_int {
        (1.0 - t * t.abs().powf(s - 1.0)) / 2.0
    } else {
        1.0 - t.abs().powf(s)
    }
}

/// Weierstrass-type lacunary factor with exact smoothness `s` at every
/// point (dense singularity), normalized into `[-1, 1]`. The base
/// frequency is a half period per unit length so the coarsest octave is
/// benign.
pub fn weierstrass_factor(s: f64, u: f64) -> f64 {
    let levels = ((52.0 / s).ceil() as usize).min(40);
    let norm = 1.0 - 2f64.powf(-s);
    let mut acc = 0.0;
    let mut amp = 1.0;
    let mut freq = std::f64::consts::PI;
    for _ in 0..=levels {
        acc += amp * (freq * u).cos();
        amp *= 2f64.powf(-s);
        freq *= 2.0;
    }
    norm * acc
}

/// Built-in catalog of bounded test functions.
///
/// * `cusp` — product of per-coordinate cusp factors, smoothness
///   exactly `s` concentrated on the center hyperplanes;
/// * `weier` — product of Weierstrass factors, smoothness exactly `s`
///   everywhere (no sparse singular support);
/// * `smooth1` — alias for the two-dimensional `weier` target with
///   `s = (2, 2)` (intrinsic smoothness 1), the approximation-slope
///   benchmark;
/// * `trig` — infinitely smooth product `prod_j sin(pi x_j)`;
/// * `additive` — average of per-coordinate cusp factors.
pub fn test_function(name: &str, profile: &SmoothnessProfile) -> Result<TestFunction, BesovError> {
    let d = profile.dim();
    match name {
        "cusp" => {
            let s = profile.s.clone();
            Ok(TestFunction {
                name: name.to_string(),
                profile: profile.clone(),
                evaluator: Arc::new(move |x: &[f64]| {
                    x.iter().zip(&s).map(|(&u, &si)| cusp_factor(si, u)).product()
                }),
            })
        }
        "weier" => {
            let s = profile.s.clone();
            Ok(TestFunction {
                name: name.to_string(),
                profile: profile.clone(),
                evaluator: Arc::new(move |x: &[f64]| {
                    x.iter()
                        .zip(&s)
                        .map(|(&u, &si)| weierstrass_factor(si, u))
                        .product()
                }),
            })
        }
        "smooth1" => {
            if d != 2 {
                return Err(BesovError::BadProfile(format!(
                    "smooth1 is a d=2 target, got d={d}"
                )));
            }
            let declared = SmoothnessProfile::new(vec![2.0, 2.0], profile.p, profile.q)
                .expect("fixed profile is valid");
            Ok(TestFunction {
                name: name.to_string(),
                profile: declared,
                evaluator: Arc::new(move |x: &[f64]| {
                    weierstrass_factor(2.0, x[0]) * weierstrass_factor(2.0, x[1])
                }),
            })
        }
        "trig" => Ok(TestFunction {
            name: name.to_string(),
            profile: profile.clone(),
            evaluator: Arc::new(|x: &[f64]| {
                x.iter().map(|&u| (std::f64::consts::PI * u).sin()).product()
            }),
        }),
        "additive" => {
            let s = profile.s.clone();
            Ok(TestFunction {
                name: name.to_string(),
                profile: profile.clone(),
                evaluator: Arc::new(move |x: &[f64]| {
                    x.iter()
                        .zip(&s)
                        .map(|(&u, &si)| cusp_factor(si, u))
                        .sum::<f64>()
                        / s.len() as f64
                }),
            })
        }
        other => Err(BesovError::UnknownName(other.to_string())),
    }
}

/// Names accepted by [`test_function`].
pub const CATALOG: &[&str] = &["cusp", "weier", "smooth1", "trig", "additive"];

#[cfg(test)]
mod tests {
    use super::*;

    fn profile(s: &[f64]) -> SmoothnessProfile {
        SmoothnessProfile::new(s.to_vec(), f64::INFINITY, f64::INFINITY).unwrap()
    }

    #[test]
    fn finite_difference_identity_and_square() {
        let f = |x: &[f64]| x[0];
        assert!((finite_difference(&f, 1, &[0.1], &[0.2]) - 0.1).abs() < 1e-14);

        let g = |x: &[f64]| x[0] * x[0];
        assert!((finite_difference(&g, 2, &[0.1], &[0.3]) - 0.02).abs() < 1e-14);
    }

    #[test]
    fn finite_difference_boundary_zeroing() {
        let f = |x: &[f64]| x[0] + 1.0;
        // x + r h leaves the cube -> exactly 0.
        assert_eq!(finite_difference(&f, 2, &[0.5], &[0.4]), 0.0);
        assert_eq!(finite_difference(&f, 1, &[-0.3], &[0.2]), 0.0);
        let g = |x: &[f64]| x[0] * x[1];
        assert_eq!(finite_difference(&g, 1, &[0.5, 0.5], &[0.3, 0.6]), 0.0);
    }

    #[test]
    fn modulus_of_constant_is_zero() {
        let f = |_: &[f64]| 0.7;
        assert_eq!(modulus(&f, 1, f64::INFINITY, &[0.2], 20, 10), 0.0);
        assert_eq!(modulus(&f, 2, 2.0, &[0.1, 0.1], 10, 10), 0.0);
    }

    #[test]
    fn modulus_of_identity_attains_radius() {
        let f = |x: &[f64]| x[0];
        let w = modulus(&f, 1, f64::INFINITY, &[0.1], 50, 12);
        assert!((w - 0.1).abs() < 1e-12, "w={w}");
    }

    #[test]
    fn modulus_monotone_in_radius_for_catalog() {
        let prof = profile(&[0.5, 0.5]);
        let cusp = test_function("cusp", &prof).unwrap();
        let f = cusp.as_fn();
        let f2 = move |x: &[f64]| f(x);
        let small = modulus(&f2, 1, f64::INFINITY, &[0.05, 0.08], 20, 16);
        let large = modulus(&f2, 1, f64::INFINITY, &[0.10, 0.16], 20, 16);
        assert!(large >= small - 1e-12, "large={large} small={small}");

        let aff = |x: &[f64]| 0.3 * x[0] - 0.2 * x[1];
        let small = modulus(&aff, 1, f64::INFINITY, &[0.05, 0.05], 20, 16);
        let large = modulus(&aff, 1, f64::INFINITY, &[0.07, 0.09], 20, 16);
        assert!(large >= small - 1e-12);
    }

    #[test]
    fn modulus_homogeneous_at_p_infinity() {
        let prof = profile(&[0.5]);
        let cusp = test_function("cusp", &prof).unwrap();
        let f = cusp.as_fn();
        let g = f.clone();
        let scaled = move |x: &[f64]| 3.0 * g(x);
        let base = move |x: &[f64]| f(x);
        let w1 = modulus(&base, 1, f64::INFINITY, &[0.1], 40, 12);
        let w3 = modulus(&scaled, 1, f64::INFINITY, &[0.1], 40, 12);
        assert!((w3 - 3.0 * w1).abs() < 1e-12);
    }

    #[test]
    fn seminorm_of_constant_and_affine_vanishes() {
        let c = |_: &[f64]| 0.4;
        let est = seminorm_estimate(&c, &profile(&[1.0]), 8, 30, 8);
        assert_eq!(est.value, 0.0);

        // s = 1 gives r = 2; second differences of an affine map vanish.
        let aff = |x: &[f64]| 0.8 * x[0] - 0.1;
        let est = seminorm_estimate(&aff, &profile(&[1.0]), 8, 30, 8);
        assert!(est.value.abs() < 1e-13, "value={}", est.value);
    }

    #[test]
    fn seminorm_of_half_cusp_stabilizes() {
        // |2x-1|^{1/2}: the dyadic terms 2^k w(2^{-2k}) stay bounded, so
        // successive truncations agree. q = infinity (sup over k).
        let f = |x: &[f64]| (2.0 * x[0] - 1.0).abs().sqrt();
        let prof = profile(&[0.5]);
        let coarse = seminorm_estimate(&f, &prof, 8, 400, 10);
        let fine = seminorm_estimate(&f, &prof, 16, 400, 10);
        assert!(fine.value > 0.0);
        let ratio = coarse.value / fine.value;
        assert!((ratio - 1.0).abs() < 0.10, "ratio={ratio}");
        assert_eq!(fine.k_max, 16);
    }

    #[test]
    fn catalog_values_bounded_and_cusp_shape() {
        let prof = profile(&[0.5, 0.5]);
        let cusp = test_function("cusp", &prof).unwrap();
        assert!((cusp.eval(&[0.5, 0.5]) - 1.0).abs() < 1e-15);
        for y in [0.0, 0.3, 0.9] {
            assert_eq!(cusp.eval(&[0.0, y]), 0.0);
        }

        for name in CATALOG {
            let p2 = profile(&[2.0, 2.0]);
            let f = test_function(name, &p2).unwrap();
            for i in 0..20 {
                for j in 0..20 {
                    let x = [(i as f64 + 0.5) / 20.0, (j as f64 + 0.5) / 20.0];
                    let v = f.eval(&x);
                    assert!(v.abs() <= 1.0 + 1e-12, "{name} at {x:?} -> {v}");
                }
            }
        }

        assert!(matches!(
            test_function("nope", &prof),
            Err(BesovError::UnknownName(_))
        ));
    }

    #[test]
    fn smooth1_declares_unit_intrinsic_smoothness() {
        let f = test_function("smooth1", &profile(&[9.0, 9.0])).unwrap();
        assert_eq!(f.profile.s, vec![2.0, 2.0]);
        assert!((f.profile.intrinsic_smoothness() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn difference_order_follows_max_smoothness() {
        assert_eq!(profile(&[0.5, 0.9]).difference_order(), 1);
        assert_eq!(profile(&[1.0]).difference_order(), 2);
        assert_eq!(profile(&[2.0, 4.0]).difference_order(), 5);
    }
}
