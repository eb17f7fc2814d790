//! Closed-form architecture sizing and rate arithmetic: intrinsic
//! smoothness and dimension, the rate exponent beta, spike-and-slab
//! architecture plans, the adaptive envelope plan, compositional
//! intrinsic indices, and the Bernoulli inclusion-probability checks.
//!
//! Conventions: `p = infinity` is handled as `1/p = 0` throughout, and
//! logarithms in rates are natural.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::kan::KanSpec;

#[derive(Error, Debug, Clone, PartialEq)]
pub enum PlanError {
    #[error("smoothness entries must be positive")]
    NonPositiveSmoothness,
    #[error("integrability condition fails: intrinsic smoothness {s_tilde} must exceed (1/p - 1/2)_+ = {omega}")]
    IntegrabilityViolated { s_tilde: f64, omega: f64 },
    #[error("degree condition fails: {0}")]
    DegreeCondition(String),
    #[error("sample size must be at least 2, got {0}")]
    SampleTooSmall(u64),
    #[error("weight-bound constant too small: H = {range} gives G = 4H - 2m <= 0 for degree {degree}")]
    RangeTooSmall { range: usize, degree: usize },
    #[error("embedding condition fails at layer {layer}: {detail}")]
    EmbeddingViolated { layer: usize, detail: String },
    #[error("invalid compositional structure: {0}")]
    BadComposition(String),
    #[error("kappa must be positive when p >= 2, got {0}")]
    BadKappa(f64),
    #[error("inclusion probability must lie in (0, 1), got {0}")]
    BadRho(f64),
}

fn inv(p: f64) -> f64 {
    if p.is_infinite() {
        0.0
    } else {
        1.0 / p
    }
}

/// Ceiling with a snap to the nearest integer when the argument is
/// within relative 1e-9 of it, so that desk arithmetic like
/// `1000^(1/3) = 10` lands on the mathematically exact value.
fn ceil_snapped(x: f64) -> u64 {
    let r = x.round();
    if (x - r).abs() <= 1e-9 * r.abs().max(1.0) {
        r as u64
    } else {
        x.ceil() as u64
    }
}

/// Intrinsic smoothness `(sum_j 1/s_j)^{-1}`.
pub fn intrinsic_smoothness(s: &[f64]) -> Result<f64, PlanError> {
    if s.is_empty() || s.iter().any(|&v| !(v > 0.0)) {
        return Err(PlanError::NonPositiveSmoothness);
    }
    Ok(1.0 / s.iter().map(|&v| 1.0 / v).sum::<f64>())
}

/// Anisotropy-induced dimension `min_j s_j / s_tilde = sum_j s_min/s_j`,
/// always between 1 and `d`.
pub fn intrinsic_dimension(s: &[f64]) -> Result<f64, PlanError> {
    let s_tilde = intrinsic_smoothness(s)?;
    let s_min = s.iter().cloned().fold(f64::INFINITY, f64::min);
    Ok(s_min / s_tilde)
}

/// The triple `(beta, kappa, omega)` of rate exponents.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BetaExponent {
    pub beta: f64,
    pub kappa: f64,
    pub omega: f64,
}

/// `beta = (1 + kappa) max{(1/p - s_tilde)_+, 1/min_j s_j}` with
/// `kappa = 2 omega / (s_tilde - omega)` for `p < 2` and 0 otherwise,
/// `omega = (1/p - 1/2)_+`.
pub fn beta_exponent(s: &[f64], p: f64) -> Result<BetaExponent, PlanError> {
    let s_tilde = intrinsic_smoothness(s)?;
    let omega = (inv(p) - 0.5).max(0.0);
    if s_tilde <= omega {
        return Err(PlanError::IntegrabilityViolated { s_tilde, omega });
    }
    let kappa = if p < 2.0 { 2.0 * omega / (s_tilde - omega) } else { 0.0 };
    let s_min = s.iter().cloned().fold(f64::INFINITY, f64::min);
    let beta = (1.0 + kappa) * (inv(p) - s_tilde).max(0.0).max(1.0 / s_min);
    Ok(BetaExponent { beta, kappa, omega })
}

/// Checks the degree condition `m >= 2` and
/// `max_j s_j < min{m, m - 1 + 1/p}`. The first clause is a hard
/// precondition of every plan; the second is reported as a diagnostic
/// (see [`ArchitecturePlan::degree_ok`]).
pub fn check_degree_condition(s: &[f64], p: f64, m: usize) -> (bool, String) {
    let s_max = s.iter().cloned().fold(0.0f64, f64::max);
    let cap = (m as f64).min(m as f64 - 1.0 + inv(p));
    if s_max < cap {
        (true, format!("max s = {s_max} < min{{m, m-1+1/p}} = {cap}"))
    } else {
        (
            false,
            format!("max s = {s_max} >= min{{m, m-1+1/p}} = {cap} (degree m = {m} too small)"),
        )
    }
}

/// Free constants of the plan; the theory fixes only their existence.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PlanConstants {
    pub c_n: f64,
    pub s_0: f64,
    pub b_0: f64,
}

impl Default for PlanConstants {
    fn default() -> Self {
        Self {
            c_n: 1.0,
            s_0: 1.0,
            b_0: 1.0,
        }
    }
}

/// The spike-and-slab architecture driven by one model-size parameter:
/// `L0 = 3 + 2 ceil(log2 d)`, `D = 2 d N`, `H = ceil(2 B*)`,
/// `G = 4H - 2m`, `S = ceil(S_0 N)`, `B* = B_0 N^beta`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArchitecturePlan {
    pub n: u64,
    pub input_dim: usize,
    /// Model-size parameter `N`.
    pub model_size: usize,
    /// Depth `L0`.
    pub depth: usize,
    /// Hidden width `D`.
    pub width: usize,
    /// Hidden grid intervals `G`.
    pub grid: usize,
    /// Hidden half-range `H`.
    pub range: usize,
    pub first_grid: usize,
    pub degree: usize,
    pub b_star: f64,
    /// Sparsity budget `S`.
    pub sparsity: usize,
    /// Total parameter count `T`.
    pub param_count: usize,
    pub beta: f64,
    pub kappa: f64,
    pub omega: f64,
    pub s_tilde: f64,
    pub d_int: f64,
    /// Target rate `n^{-s_tilde/(2 s_tilde + 1)} (log n)^{1/2}`.
    pub eps_n: f64,
    pub constants: PlanConstants,
    /// Whether `max_j s_j < min{m, m-1+1/p}` holds.
    pub degree_ok: bool,
    pub degree_detail: String,
}

impl ArchitecturePlan {
    /// Fixed depth `3 + 2 ceil(log2 d)`.
    pub fn depth_for_dim(d: usize) -> usize {
        3 + 2 * (d as f64).log2().ceil() as usize
    }

    /// Materialize the plan as a network spec (default first-layer
    /// interval `[-1, 2]`).
    pub fn kan_spec(&self) -> KanSpec {
        KanSpec {
            depth: self.depth,
            input_dim: self.input_dim,
            hidden_width: self.width,
            first_grid: self.first_grid,
            hidden_grid: self.grid,
            hidden_range: self.range as f64,
            degree: self.degree,
            a0: -1.0,
            b0: 2.0,
        }
    }

    pub fn to_document(&self) -> String {
        serde_json::to_string_pretty(self).expect("plan serialization cannot fail")
    }

    pub fn from_document(text: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(text)
    }
}

fn arch_from_model_size(
    input_dim: usize,
    model_size: usize,
    degree: usize,
    first_grid: usize,
    b_star: f64,
    s_0: f64,
) -> Result<(usize, usize, usize, usize, usize), PlanError> {
    let range = ceil_snapped(2.0 * b_star) as usize;
    if 4 * range <= 2 * degree {
        return Err(PlanError::RangeTooSmall { range, degree });
    }
    let grid = 4 * range - 2 * degree;
    let width = 2 * input_dim * model_size;
    let sparsity = ceil_snapped(s_0 * model_size as f64) as usize;
    let depth = ArchitecturePlan::depth_for_dim(input_dim);
    let spec = KanSpec {
        depth,
        input_dim,
        hidden_width: width,
        first_grid,
        hidden_grid: grid,
        hidden_range: range as f64,
        degree,
        a0: -1.0,
        b0: 2.0,
    };
    Ok((range, grid, width, sparsity, spec.param_count()))
}

/// Size the spike-and-slab architecture for sample size `n` and
/// smoothness `(s, p)`:
/// `N = ceil(C_N n^{1/(2 s_tilde + 1)})` and the derived
/// `(L0, D, G, H, S, B*, T)` with rate
/// `eps_n = n^{-s_tilde/(2 s_tilde + 1)} (log n)^{1/2}`.
///
/// Hard preconditions: `n >= 2`, positive smoothness, the
/// integrability condition `s_tilde > (1/p - 1/2)_+` and `m >= 2`. The
/// inequality `max s < min{m, m-1+1/p}` is evaluated and reported in
/// the plan (`degree_ok`/`degree_detail`) rather than enforced.
pub fn plan_sas(
    n: u64,
    s: &[f64],
    p: f64,
    degree: usize,
    first_grid: Option<usize>,
    constants: &PlanConstants,
) -> Result<ArchitecturePlan, PlanError> {
    if n < 2 {
        return Err(PlanError::SampleTooSmall(n));
    }
    if degree < 2 {
        return Err(PlanError::DegreeCondition(format!(
            "spline degree must be at least 2, got {degree}"
        )));
    }
    let s_tilde = intrinsic_smoothness(s)?;
    let d_int = intrinsic_dimension(s)?;
    let BetaExponent { beta, kappa, omega } = beta_exponent(s, p)?;
    let (degree_ok, degree_detail) = check_degree_condition(s, p, degree);

    let nf = n as f64;
    let rate_exp = 1.0 / (2.0 * s_tilde + 1.0);
    let model_size = ceil_snapped(constants.c_n * nf.powf(rate_exp)).max(1) as usize;
    let b_star = constants.b_0 * (model_size as f64).powf(beta);
    let first_grid = first_grid.unwrap_or(3 * degree);
    let (range, grid, width, sparsity, param_count) = arch_from_model_size(
        s.len(),
        model_size,
        degree,
        first_grid,
        b_star,
        constants.s_0,
    )?;
    let eps_n = nf.powf(-s_tilde * rate_exp) * nf.ln().sqrt();

    Ok(ArchitecturePlan {
        n,
        input_dim: s.len(),
        model_size,
        depth: ArchitecturePlan::depth_for_dim(s.len()),
        width,
        grid,
        range,
        first_grid,
        degree,
        b_star,
        sparsity,
        param_count,
        beta,
        kappa,
        omega,
        s_tilde,
        d_int,
        eps_n,
        constants: *constants,
        degree_ok,
        degree_detail,
    })
}

/// Smoothness envelope for adaptation: the infima of the intrinsic and
/// minimum smoothness over the class of profiles to adapt to.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SmoothnessEnvelope {
    pub s_tilde_min: f64,
    pub s_min: f64,
}

/// The `N`-indexed adaptive architecture family.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdaptivePlan {
    pub input_dim: usize,
    pub degree: usize,
    pub first_grid: usize,
    pub beta_ad: f64,
    pub kappa_ad: f64,
    pub omega: f64,
    pub b_ad: f64,
    pub s_0: f64,
}

/// Architecture at one model size of the adaptive family (no rate: the
/// rate adapts to the unknown smoothness).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdaptiveArch {
    pub model_size: usize,
    pub depth: usize,
    pub width: usize,
    pub grid: usize,
    pub range: usize,
    pub b_star: f64,
    pub sparsity: usize,
    pub param_count: usize,
}

impl AdaptivePlan {
    pub fn arch_for(&self, model_size: usize) -> Result<AdaptiveArch, PlanError> {
        let b_star = self.b_ad * (model_size as f64).powf(self.beta_ad);
        let (range, grid, width, sparsity, param_count) = arch_from_model_size(
            self.input_dim,
            model_size,
            self.degree,
            self.first_grid,
            b_star,
            self.s_0,
        )?;
        Ok(AdaptiveArch {
            model_size,
            depth: ArchitecturePlan::depth_for_dim(self.input_dim),
            width,
            grid,
            range,
            b_star,
            sparsity,
            param_count,
        })
    }
}

/// Envelope-driven adaptive plan:
/// `beta_ad = (1 + kappa_ad) max{(1/p - s_tilde_min)_+, 1/s_min}` with
/// `kappa_ad = 2 omega / (s_tilde_min - omega)` when `p < 2`; for
/// `p >= 2` a positive `kappa_ad` must be supplied.
pub fn plan_adaptive(
    envelope: &SmoothnessEnvelope,
    p: f64,
    kappa_if_p_ge_2: Option<f64>,
    input_dim: usize,
    degree: usize,
    b_ad: f64,
    s_0: f64,
) -> Result<AdaptivePlan, PlanError> {
    if !(envelope.s_tilde_min > 0.0) || !(envelope.s_min > 0.0) {
        return Err(PlanError::NonPositiveSmoothness);
    }
    let omega = (inv(p) - 0.5).max(0.0);
    if envelope.s_tilde_min <= omega {
        return Err(PlanError::IntegrabilityViolated {
            s_tilde: envelope.s_tilde_min,
            omega,
        });
    }
    let kappa_ad = if p < 2.0 {
        2.0 * omega / (envelope.s_tilde_min - omega)
    } else {
        let k = kappa_if_p_ge_2.unwrap_or(0.0);
        if !(k > 0.0) {
            return Err(PlanError::BadKappa(k));
        }
        k
    };
    let beta_ad =
        (1.0 + kappa_ad) * (inv(p) - envelope.s_tilde_min).max(0.0).max(1.0 / envelope.s_min);
    Ok(AdaptivePlan {
        input_dim,
        degree,
        first_grid: 3 * degree,
        beta_ad,
        kappa_ad,
        omega,
        b_ad,
        s_0,
    })
}

/// Layered compositional structure `f = f_J o ... o f_1`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompositionalSpec {
    /// Dimensions `d^(0), ..., d^(J)` with `d^(J) = 1`.
    pub dims: Vec<usize>,
    /// Effective dimensions `t^(1), ..., t^(J)`.
    pub effective_dims: Vec<usize>,
    /// Per-layer smoothness vectors `s^(1), ..., s^(J)` of lengths
    /// `t^(j)`.
    pub layer_smoothness: Vec<Vec<f64>>,
    pub p: f64,
    pub q: f64,
}

impl CompositionalSpec {
    pub fn depth(&self) -> usize {
        self.effective_dims.len()
    }

    /// Structural and embedding (D1) checks.
    pub fn validate(&self) -> Result<(), PlanError> {
        let j = self.depth();
        if j == 0 {
            return Err(PlanError::BadComposition("no layers".into()));
        }
        if self.dims.len() != j + 1 {
            return Err(PlanError::BadComposition(format!(
                "need {} dimensions for {} layers, got {}",
                j + 1,
                j,
                self.dims.len()
            )));
        }
        if *self.dims.last().unwrap() != 1 {
            return Err(PlanError::BadComposition("output dimension must be 1".into()));
        }
        if self.layer_smoothness.len() != j {
            return Err(PlanError::BadComposition(
                "one smoothness vector per layer required".into(),
            ));
        }
        for (li, (&t, sv)) in self
            .effective_dims
            .iter()
            .zip(&self.layer_smoothness)
            .enumerate()
        {
            let layer = li + 1;
            if t < 1 || t > self.dims[li] {
                return Err(PlanError::BadComposition(format!(
                    "layer {layer}: effective dimension {t} outside 1..=d^({li}) = {}",
                    self.dims[li]
                )));
            }
            if sv.len() != t {
                return Err(PlanError::BadComposition(format!(
                    "layer {layer}: smoothness vector length {} != t = {t}",
                    sv.len()
                )));
            }
            let s_tilde = intrinsic_smoothness(sv)?;
            if layer == 1 {
                let omega = (inv(self.p) - 0.5).max(0.0);
                if s_tilde <= omega {
                    return Err(PlanError::EmbeddingViolated {
                        layer,
                        detail: format!("s_tilde = {s_tilde} <= (1/p - 1/2)_+ = {omega}"),
                    });
                }
            } else if s_tilde <= inv(self.p) {
                return Err(PlanError::EmbeddingViolated {
                    layer,
                    detail: format!("s_tilde = {s_tilde} <= 1/p = {}", inv(self.p)),
                });
            }
        }
        Ok(())
    }
}

/// Per-layer and global compositional intrinsic indices.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompositionalIndices {
    /// `t*(j) = min s^(j) / s_tilde^(j)` per layer.
    pub t_star_per_layer: Vec<f64>,
    /// `s_tilde*(j) = s_tilde^(j) prod_{k>j} {(min s^(k) - t*(k)/p) ^ 1}`.
    pub s_tilde_star_per_layer: Vec<f64>,
    /// Intrinsic layer (1-based argmin, smallest index on ties).
    pub j_star: usize,
    pub t_star: f64,
    pub s_tilde_star: f64,
}

pub fn compositional_indices(spec: &CompositionalSpec) -> Result<CompositionalIndices, PlanError> {
    spec.validate()?;
    let j = spec.depth();
    let mut s_tilde = Vec::with_capacity(j);
    let mut s_min = Vec::with_capacity(j);
    for sv in &spec.layer_smoothness {
        s_tilde.push(intrinsic_smoothness(sv)?);
        s_min.push(sv.iter().cloned().fold(f64::INFINITY, f64::min));
    }
    let t_star: Vec<f64> = (0..j).map(|i| s_min[i] / s_tilde[i]).collect();
    let mut s_star = vec![0.0; j];
    for i in 0..j {
        let mut prod = 1.0;
        for k in i + 1..j {
            prod *= (s_min[k] - t_star[k] * inv(spec.p)).min(1.0);
        }
        s_star[i] = s_tilde[i] * prod;
    }
    let mut j_star = 0;
    for i in 1..j {
        if s_star[i] < s_star[j_star] {
            j_star = i;
        }
    }
    Ok(CompositionalIndices {
        t_star: t_star[j_star],
        s_tilde_star: s_star[j_star],
        j_star: j_star + 1,
        t_star_per_layer: t_star,
        s_tilde_star_per_layer: s_star,
    })
}

/// Free constants of the compositional plan.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CompConstants {
    /// Width per model size unit; `None` defaults to `2 d`.
    pub d_cp: Option<f64>,
    pub b_cp: f64,
    pub s_cp: f64,
    /// Kappa for layers with `omega_r = 0` (the theory only requires it
    /// positive).
    pub kappa_zero: f64,
}

impl Default for CompConstants {
    fn default() -> Self {
        Self {
            d_cp: None,
            b_cp: 1.0,
            s_cp: 1.0,
            kappa_zero: 0.1,
        }
    }
}

/// Compositional architecture plan built on `N* = ceil(n^{1/(2 s~* + 1)})`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompositionalPlan {
    pub n: u64,
    pub indices: CompositionalIndices,
    pub model_size: usize,
    pub depth: usize,
    pub width: usize,
    pub grid: usize,
    pub range: usize,
    pub degree: usize,
    pub b_star: f64,
    pub sparsity: usize,
    /// `beta_cp = max_j beta_j` with the layerwise norm indices
    /// `r^(1) = 2`, `r^(j) = infinity` for `j >= 2`.
    pub beta_cp: f64,
    pub layer_betas: Vec<f64>,
    pub eps_n: f64,
    pub degree_ok: bool,
    pub degree_detail: String,
}

pub fn plan_compositional(
    n: u64,
    spec: &CompositionalSpec,
    degree: usize,
    constants: &CompConstants,
) -> Result<CompositionalPlan, PlanError> {
    if n < 2 {
        return Err(PlanError::SampleTooSmall(n));
    }
    if degree < 2 {
        return Err(PlanError::DegreeCondition(format!(
            "spline degree must be at least 2, got {degree}"
        )));
    }
    let indices = compositional_indices(spec)?;

    // D2 degree inequality, reported per layer.
    let mut degree_ok = true;
    let mut details = Vec::new();
    for (li, sv) in spec.layer_smoothness.iter().enumerate() {
        let (ok, detail) = check_degree_condition(sv, spec.p, degree);
        degree_ok &= ok;
        details.push(format!("layer {}: {}", li + 1, detail));
    }

    // Layerwise beta with r^(1) = 2 and r^(j) = infinity afterwards.
    let mut layer_betas = Vec::with_capacity(spec.depth());
    for (li, sv) in spec.layer_smoothness.iter().enumerate() {
        let r = if li == 0 { 2.0 } else { f64::INFINITY };
        let omega_r = (inv(spec.p) - inv(r)).max(0.0);
        let s_tilde = intrinsic_smoothness(sv)?;
        if s_tilde <= omega_r {
            return Err(PlanError::EmbeddingViolated {
                layer: li + 1,
                detail: format!("s_tilde = {s_tilde} <= omega_r = {omega_r}"),
            });
        }
        let kappa_r = if omega_r > 0.0 {
            2.0 * omega_r / (s_tilde - omega_r)
        } else {
            constants.kappa_zero
        };
        let s_min = sv.iter().cloned().fold(f64::INFINITY, f64::min);
        layer_betas.push((1.0 + kappa_r) * (inv(spec.p) - s_tilde).max(0.0).max(1.0 / s_min));
    }
    let beta_cp = layer_betas.iter().cloned().fold(0.0f64, f64::max);

    let nf = n as f64;
    let rate_exp = 1.0 / (2.0 * indices.s_tilde_star + 1.0);
    let model_size = ceil_snapped(nf.powf(rate_exp)).max(1) as usize;
    let d = spec.dims[0];
    let width_per_n = constants.d_cp.unwrap_or(2.0 * d as f64);
    let b_star = constants.b_cp * (model_size as f64).powf(beta_cp);
    let range = ceil_snapped(2.0 * b_star) as usize;
    if 4 * range <= 2 * degree {
        return Err(PlanError::RangeTooSmall { range, degree });
    }
    Ok(CompositionalPlan {
        n,
        model_size,
        depth: ArchitecturePlan::depth_for_dim(d),
        width: ceil_snapped(width_per_n * model_size as f64) as usize,
        grid: 4 * range - 2 * degree,
        range,
        degree,
        b_star,
        sparsity: ceil_snapped(constants.s_cp * model_size as f64) as usize,
        beta_cp,
        layer_betas,
        eps_n: nf.powf(-indices.s_tilde_star * rate_exp) * nf.ln().sqrt(),
        indices,
        degree_ok,
        degree_detail: details.join("; "),
    })
}

/// Numeric report of the Bernoulli inclusion-probability conditions
/// `T^{-1} <~ rho` and `log(S / (T rho)) >~ log n`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RhoReport {
    pub rho: f64,
    /// `rho * T`, compared against `c`.
    pub mass: f64,
    pub mass_threshold: f64,
    pub mass_ok: bool,
    /// `log(S / (T rho)) / log n`, compared against `c_prime`.
    pub decay_ratio: f64,
    pub decay_threshold: f64,
    pub decay_ok: bool,
    pub pass: bool,
}

/// Default thresholds: `c = 0.5` for the mass check and `c' = 0.25` for
/// the decay check (the simple choice `rho = 1/T` with `S ~ n^{1/(2s+1)}`
/// yields decay ratios near `1/(2 s_tilde + 1)`, e.g. 1/3 at
/// `s_tilde = 1`).
pub fn check_rho(
    rho: f64,
    param_count: usize,
    sparsity: usize,
    n: u64,
    c: Option<f64>,
    c_prime: Option<f64>,
) -> Result<RhoReport, PlanError> {
    if !(rho > 0.0 && rho < 1.0) {
        return Err(PlanError::BadRho(rho));
    }
    let c = c.unwrap_or(0.5);
    let c_prime = c_prime.unwrap_or(0.25);
    let mass = rho * param_count as f64;
    let decay_ratio = (sparsity as f64 / (param_count as f64 * rho)).ln() / (n as f64).ln();
    let mass_ok = mass >= c;
    let decay_ok = decay_ratio >= c_prime;
    Ok(RhoReport {
        rho,
        mass,
        mass_threshold: c,
        mass_ok,
        decay_ratio,
        decay_threshold: c_prime,
        decay_ok,
        pass: mass_ok && decay_ok,
    })
}
