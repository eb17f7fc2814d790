//! Closed-form complexity constants for sparse KANs (layerwise
//! Lipschitz products, activation bounds, the parameter-to-function
//! Lipschitz constant `K`, covering-number bounds) and empirical
//! verifiers that sample networks and check the bounds are never
//! violated.

use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;
use thiserror::Error;

use crate::kan::{ForwardScratch, KanSpec, ParamVector, SparseNet};

#[derive(Error, Debug, Clone, PartialEq)]
pub enum BoundsError {
    #[error("weight bound must be at least 1, got {0}")]
    WeightBoundTooSmall(f64),
    #[error("layer index {0} outside 1..={1}")]
    LayerOutOfRange(usize, usize),
    #[error("invalid parameters: {0}")]
    BadParams(String),
    #[error("instance too large for brute-force covering: T = {t} (cap 6), S = {s} (cap 2)")]
    InstanceTooLarge { t: usize, s: usize },
}

/// Parameter-to-function Lipschitz constant of the equal-width class:
/// `K = 2 (|a0| v |b0|) L^2 m^{L-1} d ((G+2m)/H + 1)^{L-1} D^{L-1} B^L`.
pub fn lipschitz_k(spec: &KanSpec, b: f64) -> Result<f64, BoundsError> {
    if b < 1.0 {
        return Err(BoundsError::WeightBoundTooSmall(b));
    }
    let a_max = spec.a0.abs().max(spec.b0.abs());
    if a_max < 1.0 {
        return Err(BoundsError::BadParams(
            "|a0| v |b0| must be at least 1".into(),
        ));
    }
    let l = spec.depth as f64;
    let m = spec.degree as f64;
    let grid_factor = (spec.hidden_grid as f64 + 2.0 * m) / spec.hidden_range + 1.0;
    Ok(2.0
        * a_max
        * l
        * l
        * m.powi(spec.depth as i32 - 1)
        * spec.input_dim as f64
        * grid_factor.powi(spec.depth as i32 - 1)
        * (spec.hidden_width as f64).powi(spec.depth as i32 - 1)
        * b.powi(spec.depth as i32))
}

/// Input-to-output Lipschitz constant of the tail composition
/// `Phi_{L-1} o ... o Phi_l`:
/// `C_l = prod_{k=l}^{L-1} (2m / Delta^(k) + 1) ||W^(k)||_inf D_k`.
///
/// `weight_sup` holds `||W^(k)||_inf` for layers `k = 0..L-1`; `l` is
/// the paper's 1-based tail start, `1 <= l <= L-1`.
pub fn layer_lipschitz_c(
    spec: &KanSpec,
    weight_sup: &[f64],
    l: usize,
) -> Result<f64, BoundsError> {
    if l < 1 || l > spec.depth - 1 {
        return Err(BoundsError::LayerOutOfRange(l, spec.depth - 1));
    }
    if weight_sup.len() != spec.depth {
        return Err(BoundsError::BadParams(format!(
            "need {} per-layer weight bounds, got {}",
            spec.depth,
            weight_sup.len()
        )));
    }
    let m = spec.degree as f64;
    let mut c = 1.0;
    for k in l..spec.depth {
        let knots = spec
            .layer_knots(k)
            .map_err(|e| BoundsError::BadParams(e.to_string()))?;
        c *= (2.0 * m / knots.spacing() + 1.0) * weight_sup[k] * spec.width_at(k) as f64;
    }
    Ok(c)
}

/// Sup-norm bound on the activations after layer `l` for inputs in the
/// extended first-layer box and `||theta||_inf <= B`:
/// `2 (|a0| v |b0|) prod_{k<=l} D_k sum_{h=0}^{l} B^{h+1}`.
pub fn activation_bound(spec: &KanSpec, b: f64, l: usize) -> f64 {
    let a_max = spec.a0.abs().max(spec.b0.abs());
    let mut width_prod = 1.0;
    for k in 0..=l {
        width_prod *= spec.width_at(k) as f64;
    }
    let mut geom = 0.0;
    for h in 0..=l {
        geom += b.powi(h as i32 + 1);
    }
    2.0 * a_max * width_prod * geom
}

/// Covering-number bound for the `S`-sparse, `B`-bounded class:
/// `S log(e T / S) + S log(1 + B K / eps)`.
pub fn entropy_bound(spec: &KanSpec, b: f64, s: usize, eps: f64) -> Result<f64, BoundsError> {
    let t = spec.param_count();
    if s < 1 || s > t {
        return Err(BoundsError::BadParams(format!(
            "sparsity {s} outside 1..={t}"
        )));
    }
    if !(eps > 0.0) {
        return Err(BoundsError::BadParams(format!(
            "radius must be positive, got {eps}"
        )));
    }
    let k = lipschitz_k(spec, b)?;
    let sf = s as f64;
    Ok(sf * (std::f64::consts::E * t as f64 / sf).ln() + sf * (1.0 + b * k / eps).ln())
}

/// Result of an empirical bound verification.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundReport {
    /// The theoretical bound being tested against.
    pub value: f64,
    /// Largest observed ratio of the measured quantity to the bound.
    pub empirical_max: f64,
    pub trials: usize,
    pub config: VerifyConfig,
}

impl BoundReport {
    pub fn passes(&self) -> bool {
        self.empirical_max <= 1.0 + 1e-9
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerifyConfig {
    pub spec: KanSpec,
    pub weight_bound: f64,
    pub eps: f64,
    pub grid_n: usize,
    pub seed: u64,
}

fn random_inputs(spec: &KanSpec, grid_n: usize, rng: &mut StdRng) -> Vec<Vec<f64>> {
    let d = spec.input_dim;
    let mut points = Vec::with_capacity(grid_n + 2);
    // Box corners stress the silu terms; the center is the mildest point.
    points.push(vec![spec.a0; d]);
    points.push(vec![spec.b0; d]);
    for _ in 0..grid_n {
        points.push((0..d).map(|_| rng.gen_range(spec.a0..=spec.b0)).collect());
    }
    points
}

fn random_params(spec: &KanSpec, b: f64, rng: &mut StdRng) -> ParamVector {
    let t = spec.param_count();
    let mut pv = ParamVector::zeros(spec.clone());
    if rng.gen_bool(0.5) {
        // Dense pattern.
        for idx in 0..t {
            pv.set(idx, rng.gen_range(-b..=b));
        }
    } else {
        // Sparse pattern, exercising the sparse regime of the corollary.
        let s = rng.gen_range(1..=(t / 4).max(1));
        for idx in rand::seq::index::sample(rng, t, s.min(t)) {
            pv.set(idx, rng.gen_range(-b..=b));
        }
    }
    pv
}

/// Sample `trials` parameter pairs within sup-norm `b` and perturbation
/// radius `eps`, measure the sup of `|f - f*|` over a random input grid,
/// and report the largest ratio to `eps * K`.
pub fn verify_lipschitz(
    spec: &KanSpec,
    b: f64,
    eps: f64,
    trials: usize,
    grid_n: usize,
    seed: u64,
) -> Result<BoundReport, BoundsError> {
    let k = lipschitz_k(spec, b)?;
    let bound = eps * k;
    let empirical_max = (0..trials)
        .into_par_iter()
        .map(|trial| {
            let mut rng = StdRng::seed_from_u64(seed ^ (trial as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15));
            let base = random_params(spec, b, &mut rng);
            let mut other = base.clone();
            for t in 0..base.len() {
                let delta = rng.gen_range(-eps..=eps);
                let v = (base.theta()[t] + delta).clamp(-b, b);
                other.set(t, v);
            }
            let net_a = SparseNet::compile(&base);
            let net_b = SparseNet::compile(&other);
            let mut scratch = ForwardScratch::new(spec);
            let mut worst: f64 = 0.0;
            for x in random_inputs(spec, grid_n, &mut rng) {
                let fa = net_a.forward(&x, &mut scratch);
                let fb = net_b.forward(&x, &mut scratch);
                worst = worst.max((fa - fb).abs());
            }
            worst / bound
        })
        .reduce(|| 0.0f64, f64::max);
    Ok(BoundReport {
        value: bound,
        empirical_max,
        trials,
        config: VerifyConfig {
            spec: spec.clone(),
            weight_bound: b,
            eps,
            grid_n,
            seed,
        },
    })
}

/// Like [`verify_lipschitz`] but for the activation bound: random
/// networks with `||theta||_inf <= b`, outputs measured over random
/// inputs in the extended box.
pub fn verify_activation(
    spec: &KanSpec,
    b: f64,
    trials: usize,
    grid_n: usize,
    seed: u64,
) -> Result<BoundReport, BoundsError> {
    let bound = activation_bound(spec, b, spec.depth - 1);
    let empirical_max = (0..trials)
        .into_par_iter()
        .map(|trial| {
            let mut rng = StdRng::seed_from_u64(seed ^ (trial as u64).wrapping_mul(0x2545_F491_4F6C_DD1D));
            let pv = random_params(spec, b, &mut rng);
            let net = SparseNet::compile(&pv);
            let mut scratch = ForwardScratch::new(spec);
            let mut worst: f64 = 0.0;
            for x in random_inputs(spec, grid_n, &mut rng) {
                worst = worst.max(net.forward(&x, &mut scratch).abs());
            }
            worst / bound
        })
        .reduce(|| 0.0f64, f64::max);
    Ok(BoundReport {
        value: bound,
        empirical_max,
        trials,
        config: VerifyConfig {
            spec: spec.clone(),
            weight_bound: b,
            eps: 0.0,
            grid_n,
            seed,
        },
    })
}

/// Explicit cover of a tiny sparse class, following the covering lemma:
/// supports of size up to `S` crossed with a coefficient grid of pitch
/// `2 eps / K` on `[-B, B]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoverReport {
    pub size: f64,
    pub log_size: f64,
    pub entropy_bound: f64,
    /// Coefficient grid points per active coordinate.
    pub points_per_coord: u64,
    /// Random admissible functions that found an eps-close cover
    /// element (sampled sup norm).
    pub covered: usize,
    pub checked: usize,
}

pub fn brute_force_cover(
    spec: &KanSpec,
    b: f64,
    s: usize,
    eps: f64,
    seed: u64,
) -> Result<CoverReport, BoundsError> {
    let t = spec.param_count();
    if t > 6 || s > 2 {
        return Err(BoundsError::InstanceTooLarge { t, s });
    }
    if s < 1 {
        return Err(BoundsError::BadParams("sparsity must be at least 1".into()));
    }
    if !(eps > 0.0) {
        return Err(BoundsError::BadParams("radius must be positive".into()));
    }
    let k = lipschitz_k(spec, b)?;
    let delta = eps / k;
    let points_per_coord = (b / delta).ceil() as u64;

    let ln_binom = |n: usize, r: usize| -> f64 {
        ln_gamma(n as f64 + 1.0) - ln_gamma(r as f64 + 1.0) - ln_gamma((n - r) as f64 + 1.0)
    };
    let mut size = 1.0f64; // the empty support (zero function)
    for card in 1..=s {
        size += ln_binom(t, card).exp().round() * (points_per_coord as f64).powi(card as i32);
    }

    // Validity: every random admissible function must be eps-covered by
    // the element with the same support and nearest grid centers.
    let center = |v: f64| -> f64 {
        let j = (((v + b) / (2.0 * delta)).floor()).clamp(0.0, points_per_coord as f64 - 1.0);
        -b + (2.0 * j + 1.0) * delta
    };
    let mut rng = StdRng::seed_from_u64(seed);
    let checked = 1000;
    let mut covered = 0;
    let mut scratch = ForwardScratch::new(spec);
    for _ in 0..checked {
        let card = rng.gen_range(1..=s);
        let mut f = ParamVector::zeros(spec.clone());
        let mut g = ParamVector::zeros(spec.clone());
        for idx in rand::seq::index::sample(&mut rng, t, card) {
            let v = rng.gen_range(-b..=b);
            f.set(idx, v);
            g.set(idx, center(v));
        }
        let net_f = SparseNet::compile(&f);
        let net_g = SparseNet::compile(&g);
        let mut worst: f64 = 0.0;
        for x in random_inputs(spec, 200, &mut rng) {
            let d = (net_f.forward(&x, &mut scratch) - net_g.forward(&x, &mut scratch)).abs();
            worst = worst.max(d);
        }
        if worst <= eps + 1e-9 {
            covered += 1;
        }
    }

    Ok(CoverReport {
        size,
        log_size: size.ln(),
        entropy_bound: entropy_bound(spec, b, s, eps)?,
        points_per_coord,
        covered,
        checked,
    })
}
