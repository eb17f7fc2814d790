//! Constructive sparse approximation: cardinal B-splines, exact product
//! gadgets, dyadic quasi-interpolation with greedy term selection, and
//! assembly of the selected tensor expansion into a silu-free KAN whose
//! forward pass equals the expansion exactly.
//!
//! The gadget edges live on the hidden half-spacing grid. Affine maps
//! and squares are represented there through Greville/collocation
//! coefficients truncated to the input window actually reached (basis
//! locality keeps the truncated curve exact on the window), and the
//! cardinal bump is represented exactly through its two-scale
//! refinement, so each gadget contributes O(1) nonzero coefficients.

use std::collections::HashMap;

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::bspline::{greville_affine, polynomial_coeffs, KnotVector, SplineCurve, SplineError};
use crate::kan::{ForwardScratch, KanSpec, ParamVector, SparseNet};
use crate::linalg;
use crate::planner::{beta_exponent, PlanError};
use crate::besov::SmoothnessProfile;

#[derive(Error, Debug, Clone, PartialEq)]
pub enum ApproxError {
    #[error("term list is empty")]
    EmptyTerms,
    #[error("term dimension {got} does not match profile dimension {expected}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("fan-in must be at least 1, got {0}")]
    BadFanIn(usize),
    #[error("degree {0} too small for product gadgets (need m >= 2)")]
    DegreeTooSmall(usize),
    #[error(
        "term {term} leaves the hidden range: direction {dir} spans [{lo}, {hi}] outside [-{range}, {range}] (H sized too small)"
    )]
    RangeExceeded {
        term: usize,
        dir: usize,
        lo: f64,
        hi: f64,
        range: f64,
    },
    #[error("gadget window [{lo}, {hi}] is not inside the estimation interval [{est_lo}, {est_hi}]")]
    WindowOutsideEstimation {
        lo: f64,
        hi: f64,
        est_lo: f64,
        est_hi: f64,
    },
    #[error("hidden grid is not a half-integer cardinal grid: {0}")]
    NotCardinalGrid(String),
    #[error("assembled network would have {param_count} parameters (cap {cap}); reduce N or B_0")]
    TooLarge { param_count: usize, cap: usize },
    #[error("sparsity certificate violated: {nnz} nonzeros exceed ceil(S_0 N) = {budget}")]
    SparsityCertificate { nnz: usize, budget: usize },
    #[error("magnitude certificate violated: sup |theta| = {sup} exceeds B_0 N^beta = {budget}")]
    MagnitudeCertificate { sup: f64, budget: f64 },
    #[error(transparent)]
    Spline(#[from] SplineError),
    #[error(transparent)]
    Plan(#[from] PlanError),
}

/// Degree-`m` cardinal B-spline: support `[0, m+1]`, nonnegative,
/// partition of unity over integer translates.
pub fn cardinal_spline(m: usize, z: f64) -> f64 {
    if z <= 0.0 || z >= (m + 1) as f64 {
        return 0.0;
    }
    // Cox-de Boor on integer knots.
    let mut vals = [0.0f64; crate::bspline::MAX_DEGREE + 2];
    // vals[i] holds psi_0(z - i) for the relevant window i = 0..=m.
    for (i, v) in vals.iter_mut().enumerate().take(m + 1) {
        let zi = z - i as f64;
        *v = if (0.0..1.0).contains(&zi) { 1.0 } else { 0.0 };
    }
    for deg in 1..=m {
        for i in 0..=(m - deg) {
            let zi = z - i as f64;
            vals[i] = (zi / deg as f64) * vals[i]
                + ((deg as f64 + 1.0 - zi) / deg as f64) * vals[i + 1];
        }
    }
    vals[0]
}

/// Exact representation of the cardinal bump `psi_m` in the hidden
/// basis: requires spacing 1/2 and a knot at 0 (true for every plan
/// grid with integer `H >= m + 1`). Returns the sparse coefficient list
/// `(basis_index, weight)` from the two-scale relation
/// `psi_m(z) = 2^{-m} sum_l C(m+1, l) psi_m(2z - l)`.
pub fn psi_on_half_grid(knots: &KnotVector) -> Result<Vec<(usize, f64)>, ApproxError> {
    let m = knots.degree();
    if (knots.spacing() - 0.5).abs() > 1e-12 {
        return Err(ApproxError::NotCardinalGrid(format!(
            "spacing {} != 1/2",
            knots.spacing()
        )));
    }
    let zero_idx = -knots.a() / knots.spacing();
    let i0 = zero_idx.round();
    if (zero_idx - i0).abs() > 1e-9 {
        return Err(ApproxError::NotCardinalGrid(
            "no knot at the origin".to_string(),
        ));
    }
    let i0 = i0 as i64;
    let n = knots.num_basis() as i64;
    let scale = 0.5f64.powi(m as i32);
    let mut coeffs = Vec::with_capacity(m + 2);
    let mut binom = 1.0f64;
    for l in 0..=(m as i64 + 1) {
        if l > 0 {
            binom = binom * (m as f64 + 2.0 - l as f64) / l as f64;
        }
        let i = i0 + l;
        if i < 0 || i >= n {
            return Err(ApproxError::NotCardinalGrid(format!(
                "basis index {i} for the bump falls outside 0..{n} (H too small)"
            )));
        }
        coeffs.push((i as usize, scale * binom));
    }
    Ok(coeffs)
}

/// The squaring curve `u -> u^2`, exact on the estimation interval.
pub fn square_edge(knots: &KnotVector) -> Result<SplineCurve, ApproxError> {
    if knots.degree() < 2 {
        return Err(ApproxError::DegreeTooSmall(knots.degree()));
    }
    Ok(polynomial_coeffs(2, knots)?)
}

/// Keep only the coefficients whose basis support meets the open window
/// `(lo, hi)`. On the window the truncated curve equals the original;
/// elsewhere it decays to zero within `m` cells.
fn windowed(curve: &SplineCurve, lo: f64, hi: f64) -> Vec<(usize, f64)> {
    let knots = curve.knots();
    let m = knots.degree() as isize;
    let mut kept = Vec::new();
    for (i, &w) in curve.coeffs().iter().enumerate() {
        if w == 0.0 {
            continue;
        }
        let support_lo = knots.xi(i as isize - m);
        let support_hi = knots.xi(i as isize + 1);
        if support_hi > lo && support_lo < hi {
            kept.push((i, w));
        }
    }
    kept
}

fn check_window(knots: &KnotVector, lo: f64, hi: f64) -> Result<(), ApproxError> {
    let (est_lo, est_hi) = knots.estimation_interval();
    if lo < est_lo - 1e-12 || hi > est_hi + 1e-12 {
        return Err(ApproxError::WindowOutsideEstimation {
            lo,
            hi,
            est_lo,
            est_hi,
        });
    }
    Ok(())
}

/// One edge of a gadget fragment: pure spline coefficients (no silu
/// slot), sparse over the fragment's knot vector.
#[derive(Debug, Clone, PartialEq)]
pub struct FragmentEdge {
    pub from: usize,
    pub to: usize,
    pub coeffs: Vec<(usize, f64)>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FragmentLayer {
    pub in_width: usize,
    pub out_width: usize,
    pub edges: Vec<FragmentEdge>,
}

/// A silu-free KAN fragment on a single hidden knot vector, with the
/// value interval of every output node tracked for window sizing.
#[derive(Debug, Clone, PartialEq)]
pub struct Fragment {
    pub knots: KnotVector,
    pub layers: Vec<FragmentLayer>,
    pub output_ranges: Vec<(f64, f64)>,
}

impl Fragment {
    pub fn eval(&self, inputs: &[f64]) -> Vec<f64> {
        let mut cur = inputs.to_vec();
        for layer in &self.layers {
            debug_assert_eq!(cur.len(), layer.in_width);
            let mut next = vec![0.0; layer.out_width];
            for e in &layer.edges {
                let x = cur[e.from];
                let row = self.knots.eval_basis(x);
                let mut acc = 0.0;
                for &(i, w) in &e.coeffs {
                    acc += w * row[i];
                }
                next[e.to] += acc;
            }
            cur = next;
        }
        cur
    }

    pub fn depth(&self) -> usize {
        self.layers.len()
    }
}

struct GadgetBuilder {
    knots: KnotVector,
    identity: SplineCurve,
    square: SplineCurve,
}

impl GadgetBuilder {
    fn new(knots: &KnotVector) -> Result<Self, ApproxError> {
        if knots.degree() < 2 {
            return Err(ApproxError::DegreeTooSmall(knots.degree()));
        }
        Ok(Self {
            knots: knots.clone(),
            identity: greville_affine(1.0, 0.0, knots),
            square: square_edge(knots)?,
        })
    }

    fn identity_edge(&self, range: (f64, f64)) -> Result<Vec<(usize, f64)>, ApproxError> {
        check_window(&self.knots, range.0, range.1)?;
        Ok(windowed(&self.identity, range.0, range.1))
    }

    fn square_edge_scaled(
        &self,
        weight: f64,
        range: (f64, f64),
    ) -> Result<Vec<(usize, f64)>, ApproxError> {
        check_window(&self.knots, range.0, range.1)?;
        Ok(windowed(&self.square, range.0, range.1)
            .into_iter()
            .map(|(i, w)| (i, weight * w))
            .collect())
    }
}

fn product_range(a: (f64, f64), b: (f64, f64)) -> (f64, f64) {
    let cands = [a.0 * b.0, a.0 * b.1, a.1 * b.0, a.1 * b.1];
    (
        cands.iter().cloned().fold(f64::INFINITY, f64::min),
        cands.iter().cloned().fold(f64::NEG_INFINITY, f64::max),
    )
}

/// Append the two layers of one pairing level to `layers`, consuming
/// `values` (slot, range) and producing the next level's values.
fn pairing_level(
    builder: &GadgetBuilder,
    values: &[(usize, (f64, f64))],
    layers: &mut Vec<FragmentLayer>,
) -> Result<Vec<(usize, (f64, f64))>, ApproxError> {
    let c = values.len();
    let pairs = c / 2;
    let odd = c % 2;
    let in_width = values.iter().map(|(s, _)| s + 1).max().unwrap_or(0);

    // Layer A: per pair the three nodes (u+v, u, v); odd value passes
    // through an identity slot.
    let mut a_edges = Vec::new();
    let mut a_ranges = Vec::new();
    for r in 0..pairs {
        let (su, ru) = values[2 * r];
        let (sv, rv) = values[2 * r + 1];
        let sum_range = (ru.0 + rv.0, ru.1 + rv.1);
        let base = 3 * r;
        a_edges.push(FragmentEdge {
            from: su,
            to: base,
            coeffs: builder.identity_edge(ru)?,
        });
        a_edges.push(FragmentEdge {
            from: sv,
            to: base,
            coeffs: builder.identity_edge(rv)?,
        });
        a_edges.push(FragmentEdge {
            from: su,
            to: base + 1,
            coeffs: builder.identity_edge(ru)?,
        });
        a_edges.push(FragmentEdge {
            from: sv,
            to: base + 2,
            coeffs: builder.identity_edge(rv)?,
        });
        a_ranges.push(sum_range);
        a_ranges.push(ru);
        a_ranges.push(rv);
    }
    if odd == 1 {
        let (s, r) = values[c - 1];
        a_edges.push(FragmentEdge {
            from: s,
            to: 3 * pairs,
            coeffs: builder.identity_edge(r)?,
        });
        a_ranges.push(r);
    }
    layers.push(FragmentLayer {
        in_width,
        out_width: 3 * pairs + odd,
        edges: a_edges,
    });

    // Layer B: per pair the product node via
    // uv = ((u+v)^2 - u^2 - v^2)/2; odd value passes through.
    let mut b_edges = Vec::new();
    let mut next = Vec::new();
    for r in 0..pairs {
        let sum_range = a_ranges[3 * r];
        let ru = a_ranges[3 * r + 1];
        let rv = a_ranges[3 * r + 2];
        b_edges.push(FragmentEdge {
            from: 3 * r,
            to: r,
            coeffs: builder.square_edge_scaled(0.5, sum_range)?,
        });
        b_edges.push(FragmentEdge {
            from: 3 * r + 1,
            to: r,
            coeffs: builder.square_edge_scaled(-0.5, ru)?,
        });
        b_edges.push(FragmentEdge {
            from: 3 * r + 2,
            to: r,
            coeffs: builder.square_edge_scaled(-0.5, rv)?,
        });
        next.push((r, product_range(ru, rv)));
    }
    if odd == 1 {
        let r = a_ranges[3 * pairs];
        b_edges.push(FragmentEdge {
            from: 3 * pairs,
            to: pairs,
            coeffs: builder.identity_edge(r)?,
        });
        next.push((pairs, r));
    }
    layers.push(FragmentLayer {
        in_width: 3 * pairs + odd,
        out_width: pairs + odd,
        edges: b_edges,
    });
    Ok(next)
}

fn product_fragment(
    fan_in: usize,
    knots: &KnotVector,
    input_ranges: &[(f64, f64)],
) -> Result<Fragment, ApproxError> {
    if fan_in < 1 {
        return Err(ApproxError::BadFanIn(fan_in));
    }
    let builder = GadgetBuilder::new(knots)?;
    let mut values: Vec<(usize, (f64, f64))> = input_ranges
        .iter()
        .cloned()
        .enumerate()
        .collect();
    let mut layers = Vec::new();
    let levels = (fan_in as f64).log2().ceil() as usize;
    for _ in 0..levels {
        values = pairing_level(&builder, &values, &mut layers)?;
    }
    // Degenerate tree (fan_in = 1): a single identity pass-through so
    // the fragment is never empty.
    if levels == 0 {
        let (s, r) = values[0];
        layers.push(FragmentLayer {
            in_width: 1,
            out_width: 1,
            edges: vec![FragmentEdge {
                from: s,
                to: 0,
                coeffs: builder.identity_edge(r)?,
            }],
        });
        values = vec![(0, r)];
    }
    Ok(Fragment {
        knots: knots.clone(),
        layers,
        output_ranges: values.iter().map(|(_, r)| *r).collect(),
    })
}

/// Exact two-input multiplication gadget (three squaring edges over the
/// sum/copy layer); `range` is the interval both inputs live in.
pub fn product_pair(knots: &KnotVector, range: (f64, f64)) -> Result<Fragment, ApproxError> {
    product_fragment(2, knots, &[range, range])
}

/// Exact product of `fan_in` inputs from `[0, 1]` via a binary tree of
/// pair gadgets with identity padding; depth `2 ceil(log2 fan_in)`.
pub fn product_module(fan_in: usize, knots: &KnotVector) -> Result<Fragment, ApproxError> {
    product_fragment(fan_in, knots, &vec![(0.0, 1.0); fan_in])
}

/// One term of the sparse tensor expansion:
/// `alpha * prod_i psi_m(2^{a_i} x_i - j_i)` with `a_i = floor(k/s_i)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TensorTerm {
    /// Resolution index `k`.
    pub level: usize,
    /// Per-direction dyadic scales `a_i`.
    pub scales: Vec<u32>,
    /// Integer translations `j_i`.
    pub shifts: Vec<i64>,
    pub alpha: f64,
}

impl TensorTerm {
    pub fn eval(&self, m: usize, x: &[f64]) -> f64 {
        let mut prod = self.alpha;
        for ((&a, &j), &xi) in self.scales.iter().zip(&self.shifts).zip(x) {
            prod *= cardinal_spline(m, (1u64 << a) as f64 * xi - j as f64);
            if prod == 0.0 {
                return 0.0;
            }
        }
        prod
    }

    /// Greedy selection weight: coefficient magnitude times the L2 mass
    /// of the tensor bump restricted to the unit cube, so boundary bumps
    /// whose support barely overlaps the cube rank below interior ones.
    pub fn weight(&self, m: usize) -> f64 {
        let mut mass = self.alpha.abs();
        for (&a, &j) in self.scales.iter().zip(&self.shifts) {
            mass *= (restricted_sq_mass(m, a, j) / (1u64 << a) as f64).sqrt();
            if mass == 0.0 {
                return 0.0;
            }
        }
        mass
    }
}

/// `int_{z in (0, m+1) ∩ (-j, 2^a - j)} psi_m(z)^2 dz` by Simpson on the
/// clipped range (psi is piecewise polynomial; 16 panels per unit are
/// ample for ranking purposes).
fn restricted_sq_mass(m: usize, a: u32, j: i64) -> f64 {
    let lo = 0f64.max(-(j as f64));
    let hi = ((m + 1) as f64).min((1u64 << a) as f64 - j as f64);
    if hi <= lo {
        return 0.0;
    }
    let panels = (((hi - lo) * 16.0).ceil() as usize).max(4);
    let h = (hi - lo) / panels as f64;
    let f = |z: f64| cardinal_spline(m, z).powi(2);
    let mut acc = f(lo) + f(hi);
    for i in 1..panels {
        let w = if i % 2 == 1 { 4.0 } else { 2.0 };
        acc += w * f(lo + i as f64 * h);
    }
    acc * h / 3.0
}

/// Evaluate the full expansion `sum alpha M_{k,j}` directly.
pub fn eval_terms(terms: &[TensorTerm], m: usize, x: &[f64]) -> f64 {
    terms.iter().map(|t| t.eval(m, x)).sum()
}

fn elementary_symmetric(roots: &[f64]) -> Vec<f64> {
    let mut sigma = vec![0.0; roots.len() + 1];
    sigma[0] = 1.0;
    for (count, &r) in roots.iter().enumerate() {
        for q in (1..=count + 1).rev() {
            sigma[q] += r * sigma[q - 1];
        }
    }
    sigma
}

/// Point-evaluation dual functional for the cardinal system: weights
/// `w_r` at the `m + 1` points `c0 + (r + 1/2)/(m + 1)` inside the
/// central knot cell of the bump's support, exact on the whole cardinal
/// spline space (the cell restriction is polynomial, and the weights
/// reproduce the Marsden monomial coefficients).
fn dual_weights(m: usize) -> Vec<f64> {
    let c0 = (m + 1) / 2;
    let z0 = c0 as f64 + 0.5;
    let u: Vec<f64> = (0..=m)
        .map(|r| c0 as f64 + (r as f64 + 0.5) / (m as f64 + 1.0) - z0)
        .collect();
    // Shifted Marsden coefficients gamma_q = sigma_q(1 - z0 .. m - z0) / C(m, q).
    let roots: Vec<f64> = (1..=m).map(|i| i as f64 - z0).collect();
    let sigma = elementary_symmetric(&roots);
    let mut binom = 1.0f64;
    let mut rhs = vec![0.0; m + 1];
    for (q, r) in rhs.iter_mut().enumerate() {
        if q > 0 {
            binom = binom * (m + 1 - q) as f64 / q as f64;
        }
        *r = sigma[q] / binom;
    }
    let n = m + 1;
    let mut a = vec![0.0; n * n];
    for q in 0..n {
        for (r, &ur) in u.iter().enumerate() {
            a[q * n + r] = ur.powi(q as i32);
        }
    }
    linalg::solve(&mut a, &mut rhs).expect("distinct points give a nonsingular Vandermonde")
}

/// Central-cell offset of the dual functional.
fn dual_offset(m: usize) -> usize {
    (m + 1) / 2
}

fn scales_at(k: usize, s: &[f64]) -> Vec<u32> {
    s.iter()
        .map(|&si| ((k as f64 / si).floor() as u32).min(40))
        .collect()
}

/// Quasi-interpolation coefficient of the bump at `(scales, shifts)`.
fn tensor_coeff(
    f: &dyn Fn(&[f64]) -> f64,
    m: usize,
    weights: &[f64],
    scales: &[u32],
    shifts: &[i64],
) -> f64 {
    let d = scales.len();
    let c0 = dual_offset(m) as f64;
    let mut idx = vec![0usize; d];
    let mut point = vec![0.0f64; d];
    let mut acc = 0.0;
    loop {
        let mut w = 1.0;
        for i in 0..d {
            let r = idx[i];
            w *= weights[r];
            let t = shifts[i] as f64 + c0 + (r as f64 + 0.5) / (m as f64 + 1.0);
            point[i] = t / (1u64 << scales[i]) as f64;
        }
        acc += w * f(&point);
        let mut dim = 0;
        loop {
            if dim == d {
                return acc;
            }
            idx[dim] += 1;
            if idx[dim] <= m {
                break;
            }
            idx[dim] = 0;
            dim += 1;
        }
    }
}

/// All shift tuples overlapping the unit cube at the given scales:
/// `j_i` ranges over `-m ..= 2^{a_i} - 1`.
fn for_each_shift(scales: &[u32], m: usize, mut visit: impl FnMut(&[i64])) {
    let d = scales.len();
    let lo: Vec<i64> = vec![-(m as i64); d];
    let hi: Vec<i64> = scales.iter().map(|&a| (1i64 << a) - 1).collect();
    let mut j = lo.clone();
    loop {
        visit(&j);
        let mut dim = 0;
        loop {
            if dim == d {
                return;
            }
            j[dim] += 1;
            if j[dim] <= hi[dim] {
                break;
            }
            j[dim] = lo[dim];
            dim += 1;
        }
    }
}

/// Refine a coefficient field from `from_scales` to `to_scales` through
/// the two-scale relation, one dyadic step per direction at a time, and
/// drop shifts whose bumps vanish on the cube.
fn refine_field(
    field: HashMap<Vec<i64>, f64>,
    from_scales: &[u32],
    to_scales: &[u32],
    m: usize,
) -> HashMap<Vec<i64>, f64> {
    let mut cur = field;
    let d = from_scales.len();
    let mut binoms = vec![0.0f64; m + 2];
    let mut b = 1.0;
    for (l, slot) in binoms.iter_mut().enumerate() {
        if l > 0 {
            b = b * (m as f64 + 2.0 - l as f64) / l as f64;
        }
        *slot = b * 0.5f64.powi(m as i32);
    }
    for dim in 0..d {
        for _ in from_scales[dim]..to_scales[dim] {
            let mut next: HashMap<Vec<i64>, f64> = HashMap::with_capacity(cur.len() * 2);
            for (j, c) in &cur {
                for (l, &w) in binoms.iter().enumerate() {
                    let mut jj = j.clone();
                    jj[dim] = 2 * j[dim] + l as i64;
                    *next.entry(jj).or_insert(0.0) += c * w;
                }
            }
            cur = next;
        }
    }
    // Trim to cube-overlapping shifts at the target scales.
    cur.retain(|j, _| {
        j.iter()
            .zip(to_scales)
            .all(|(&ji, &a)| ji >= -(m as i64) && ji < (1i64 << a))
    });
    cur
}

/// Select at most `n_terms` tensor terms by multilevel quasi-
/// interpolation: resolutions `k = 0 ..= ceil((1+kappa) log2 N)` with
/// per-direction scales `floor(k/s_i)`, telescoped so the level-`k`
/// coefficients are increments over the refined level below, then the
/// `n_terms` largest by L2 weight are kept.
pub fn select_terms(
    f: &dyn Fn(&[f64]) -> f64,
    profile: &SmoothnessProfile,
    n_terms: usize,
    m: usize,
) -> Result<Vec<TensorTerm>, ApproxError> {
    if n_terms < 1 {
        return Err(ApproxError::BadFanIn(0));
    }
    let kappa = beta_exponent(&profile.s, profile.p)?.kappa;
    let k_cap = ((1.0 + kappa) * (n_terms as f64).log2()).ceil().max(0.0) as usize;
    let weights = dual_weights(m);

    let mut candidates: Vec<TensorTerm> = Vec::new();
    let mut coarse: HashMap<Vec<i64>, f64> = HashMap::new();
    let mut prev_scales: Option<Vec<u32>> = None;

    for k in 0..=k_cap {
        let scales = scales_at(k, &profile.s);
        if prev_scales.as_deref() == Some(&scales) {
            continue;
        }
        let mut level: HashMap<Vec<i64>, f64> = HashMap::new();
        for_each_shift(&scales, m, |j| {
            let c = tensor_coeff(f, m, &weights, &scales, j);
            if c != 0.0 {
                level.insert(j.to_vec(), c);
            }
        });
        let refined = match prev_scales.take() {
            Some(from) => refine_field(std::mem::take(&mut coarse), &from, &scales, m),
            None => HashMap::new(),
        };
        let mut shifts: Vec<&Vec<i64>> = level.keys().chain(refined.keys()).collect();
        shifts.sort();
        shifts.dedup();
        for j in shifts {
            let inc = level.get(j).copied().unwrap_or(0.0) - refined.get(j).copied().unwrap_or(0.0);
            if inc != 0.0 {
                candidates.push(TensorTerm {
                    level: k,
                    scales: scales.clone(),
                    shifts: j.clone(),
                    alpha: inc,
                });
            }
        }
        coarse = level;
        prev_scales = Some(scales);
    }

    candidates.sort_by(|a, b| {
        b.weight(m)
            .partial_cmp(&a.weight(m))
            .unwrap()
            .then_with(|| (a.level, &a.shifts).cmp(&(b.level, &b.shifts)))
    });
    candidates.truncate(n_terms);
    Ok(candidates)
}

/// Constants the assembly certifies against: nonzero count at most
/// `ceil(s_0 N)` and magnitude at most `b_0 N^beta`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AssemblyConstants {
    pub s_0: f64,
    pub b_0: f64,
    /// Dense parameter-count cap for the materialized network.
    pub param_cap: usize,
}

impl Default for AssemblyConstants {
    fn default() -> Self {
        Self {
            s_0: 256.0,
            b_0: 6.0,
            param_cap: 40_000_000,
        }
    }
}

/// A silu-free KAN realizing a tensor expansion exactly, with its
/// sparsity and magnitude certificates.
#[derive(Debug, Clone)]
pub struct KancRealization {
    pub params: ParamVector,
    pub term_count: usize,
    /// Nonzero coefficient count.
    pub nnz: usize,
    pub sup_norm: f64,
    /// Empirical per-term sparsity `nnz / N`.
    pub s0_empirical: f64,
    /// Empirical magnitude constant `sup / N^beta`.
    pub b0_empirical: f64,
    pub beta: f64,
    /// Whether the hidden range had to be doubled once.
    pub range_doubled: bool,
}

impl KancRealization {
    /// No silu coefficient is active (KAN_c membership).
    pub fn is_silu_free(&self) -> bool {
        let spec = self.params.spec();
        for t in self.params.active_indices() {
            let (_, _, _, coeff) = spec.unflatten(t).expect("active index in range");
            if coeff == 0 && self.params.theta()[t] != 0.0 {
                return false;
            }
        }
        true
    }
}

/// Per-term block width needed by the widest tree layer.
fn per_term_width(d: usize) -> usize {
    d.max(3 * (d / 2) + d % 2).max(1)
}

fn tree_levels(d: usize) -> usize {
    (d as f64).log2().ceil() as usize
}

fn assemble_with_range(
    terms: &[TensorTerm],
    m: usize,
    h: usize,
    constants: &AssemblyConstants,
) -> Result<(ParamVector, usize), ApproxError> {
    let d = terms[0].shifts.len();
    let n_terms = terms.len();
    let levels = tree_levels(d);
    let depth = 3 + 2 * levels;
    let spec = KanSpec {
        depth,
        input_dim: d,
        hidden_width: per_term_width(d) * n_terms,
        first_grid: 3 * m,
        hidden_grid: 4 * h - 2 * m,
        hidden_range: h as f64,
        degree: m,
        a0: -1.0,
        b0: 2.0,
    };
    let t_total = spec.param_count();
    if t_total > constants.param_cap {
        return Err(ApproxError::TooLarge {
            param_count: t_total,
            cap: constants.param_cap,
        });
    }
    let first_knots = spec.layer_knots(0)?;
    let hidden_knots = spec.layer_knots(1)?;
    let psi = psi_on_half_grid(&hidden_knots)?;
    let builder = GadgetBuilder::new(&hidden_knots)?;

    let mut pv = ParamVector::zeros(spec.clone());
    let mut place = |pv: &mut ParamVector, layer: usize, to: usize, from: usize, coeffs: &[(usize, f64)]| {
        for &(i, w) in coeffs {
            if w != 0.0 {
                pv.set(spec.flat_index(layer, to, from, 1 + i), w);
            }
        }
    };

    for (ti, term) in terms.iter().enumerate() {
        // Range check: the affine outputs must stay inside [-H, H].
        for (dir, (&a, &j)) in term.scales.iter().zip(&term.shifts).enumerate() {
            let lo = -(j as f64);
            let hi = (1u64 << a) as f64 - j as f64;
            if lo < -(h as f64) - 1e-9 || hi > h as f64 + 1e-9 {
                return Err(ApproxError::RangeExceeded {
                    term: ti,
                    dir,
                    lo,
                    hi,
                    range: h as f64,
                });
            }
        }

        // Layer 0: affine edges from the shared inputs into this term's
        // block; layer 1: the cardinal bump per direction.
        let w1 = per_term_width(d);
        for (dir, (&a, &j)) in term.scales.iter().zip(&term.shifts).enumerate() {
            let affine = greville_affine((1u64 << a) as f64, -(j as f64), &first_knots);
            let coeffs: Vec<(usize, f64)> = affine
                .coeffs()
                .iter()
                .enumerate()
                .filter(|(_, w)| **w != 0.0)
                .map(|(i, &w)| (i, w))
                .collect();
            place(&mut pv, 0, ti * w1 + dir, dir, &coeffs);
            place(&mut pv, 1, ti * w1 + dir, ti * w1 + dir, &psi);
        }

        // Tree layers within the block, then the alpha edge into the
        // output node.
        let mut values: Vec<(usize, (f64, f64))> =
            (0..d).map(|dir| (dir, (0.0, 1.0))).collect();
        let mut fragment_layers = Vec::new();
        for _ in 0..levels {
            values = pairing_level(&builder, &values, &mut fragment_layers)?;
        }
        for (li, flayer) in fragment_layers.iter().enumerate() {
            let layer = 2 + li;
            for e in &flayer.edges {
                place(&mut pv, layer, ti * w1 + e.to, ti * w1 + e.from, &e.coeffs);
            }
        }
        let (slot, out_range) = values[0];
        let alpha_curve = greville_affine(term.alpha, 0.0, &hidden_knots);
        check_window(&hidden_knots, out_range.0, out_range.1)?;
        let coeffs = windowed(&alpha_curve, out_range.0, out_range.1);
        place(&mut pv, depth - 1, 0, ti * w1 + slot, &coeffs);
    }
    Ok((pv, n_terms))
}

/// Assemble the selected terms into a KAN_c network. The hidden range
/// starts at `max(ceil(2 B_0 N^beta), m+1, ceil(2 + m/2))`; if a term
/// leaves it, the range is doubled once before giving up.
pub fn assemble(
    terms: &[TensorTerm],
    profile: &SmoothnessProfile,
    m: usize,
    constants: &AssemblyConstants,
) -> Result<KancRealization, ApproxError> {
    if terms.is_empty() {
        return Err(ApproxError::EmptyTerms);
    }
    let d = profile.dim();
    for t in terms {
        if t.shifts.len() != d || t.scales.len() != d {
            return Err(ApproxError::DimensionMismatch {
                expected: d,
                got: t.shifts.len(),
            });
        }
    }
    if m < 2 && d >= 2 {
        return Err(ApproxError::DegreeTooSmall(m));
    }
    let n = terms.len();
    let beta = beta_exponent(&profile.s, profile.p)?.beta;
    let b_star = constants.b_0 * (n as f64).powf(beta);
    let h_min = (m + 1).max((2.0 + m as f64 / 2.0).ceil() as usize);
    let h0 = ((2.0 * b_star).ceil() as usize).max(h_min);

    let (pv, range_doubled) = match assemble_with_range(terms, m, h0, constants) {
        Ok((pv, _)) => (pv, false),
        Err(ApproxError::RangeExceeded { .. }) => {
            let (pv, _) = assemble_with_range(terms, m, 2 * h0, constants)?;
            (pv, true)
        }
        Err(e) => return Err(e),
    };

    let nnz = pv.l0_norm();
    let sup = pv.sup_norm();
    let s_budget = (constants.s_0 * n as f64).ceil() as usize;
    if nnz > s_budget {
        return Err(ApproxError::SparsityCertificate {
            nnz,
            budget: s_budget,
        });
    }
    let b_budget = constants.b_0 * (n as f64).powf(beta);
    if sup > b_budget {
        return Err(ApproxError::MagnitudeCertificate {
            sup,
            budget: b_budget,
        });
    }
    Ok(KancRealization {
        term_count: n,
        nnz,
        sup_norm: sup,
        s0_empirical: nnz as f64 / n as f64,
        b0_empirical: sup / (n as f64).powf(beta),
        beta,
        range_doubled,
        params: pv,
    })
}

/// Monte Carlo `L^2([0,1]^d)` distance with its standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct L2Report {
    pub value: f64,
    pub std_error: f64,
    pub samples: usize,
}

/// Monte Carlo `||f - g||_{L^2}` over the uniform cube; the standard
/// error is delta-method propagated through the square root.
pub fn l2_error_fn<R: Rng + ?Sized>(
    f: &dyn Fn(&[f64]) -> f64,
    g: &dyn Fn(&[f64]) -> f64,
    dim: usize,
    mc_n: usize,
    rng: &mut R,
) -> L2Report {
    let mut sq = Vec::with_capacity(mc_n);
    let mut x = vec![0.0; dim];
    for _ in 0..mc_n {
        for xi in x.iter_mut() {
            *xi = rng.gen_range(0.0..1.0);
        }
        let r = f(&x) - g(&x);
        sq.push(r * r);
    }
    let (mean, se) = crate::stats::mean_se(&sq);
    let value = mean.max(0.0).sqrt();
    let std_error = if value > 0.0 { se / (2.0 * value) } else { se.sqrt() };
    L2Report {
        value,
        std_error,
        samples: mc_n,
    }
}

impl KancRealization {
    /// Monte Carlo `L^2` error of the realized network against `f0`.
    pub fn l2_error<R: Rng + ?Sized>(
        &self,
        f0: &dyn Fn(&[f64]) -> f64,
        mc_n: usize,
        rng: &mut R,
    ) -> L2Report {
        let net = SparseNet::compile(&self.params);
        let mut scratch = ForwardScratch::new(self.params.spec());
        let mut sq = Vec::with_capacity(mc_n);
        let dim = self.params.spec().input_dim;
        let mut x = vec![0.0; dim];
        for _ in 0..mc_n {
            for xi in x.iter_mut() {
                *xi = rng.gen_range(0.0..1.0);
            }
            let r = f0(&x) - net.forward(&x, &mut scratch);
            sq.push(r * r);
        }
        let (mean, se) = crate::stats::mean_se(&sq);
        let value = mean.max(0.0).sqrt();
        let std_error = if value > 0.0 { se / (2.0 * value) } else { se.sqrt() };
        L2Report {
            value,
            std_error,
            samples: mc_n,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::besov::{test_function, SmoothnessProfile};
    use rand::rngs::StdRng;
    use rand::SeedableRng;

    const INF: f64 = f64::INFINITY;

    fn profile(s: &[f64]) -> SmoothnessProfile {
        SmoothnessProfile::new(s.to_vec(), INF, INF).unwrap()
    }

    fn half_grid(h: usize, m: usize) -> KnotVector {
        KnotVector::uniform(-(h as f64), h as f64, 4 * h - 2 * m, m).unwrap()
    }

    #[test]
    fn cardinal_spline_basics() {
        // Degree-1 hat peaks at 1.
        assert_eq!(cardinal_spline(1, 1.0), 1.0);
        assert_eq!(cardinal_spline(1, 0.5), 0.5);

        // Outside the support.
        for m in 1..=4usize {
            assert_eq!(cardinal_spline(m, -0.2), 0.0);
            assert_eq!(cardinal_spline(m, (m + 1) as f64 + 0.01), 0.0);
            assert_eq!(cardinal_spline(m, 0.0), 0.0);
        }

        // Partition of unity over integer translates.
        for m in 1..=5usize {
            for z in [0.37, 0.0, 1.2, 2.9] {
                let sum: f64 = (-(m as i64 + 1)..=m as i64 + 1)
                    .map(|j| cardinal_spline(m, z - j as f64))
                    .sum();
                assert!((sum - 1.0).abs() < 1e-12, "m={m} z={z}");
            }
        }

        // Nonnegative.
        for i in 0..=300 {
            let z = i as f64 / 100.0;
            assert!(cardinal_spline(2, z) >= 0.0);
        }
    }

    #[test]
    fn uniform_basis_is_scaled_cardinal() {
        let kv = half_grid(4, 2);
        for i in 0..kv.num_basis() {
            let t_i = kv.knots()[i];
            for z in [-3.9, -1.0, 0.2, 1.7, 3.3] {
                let b = kv.eval_basis(z)[i];
                let c = cardinal_spline(2, (z - t_i) / kv.spacing());
                assert!((b - c).abs() < 1e-12, "i={i} z={z}");
            }
        }
    }

    #[test]
    fn psi_realization_exact_on_half_grid() {
        for m in 2..=4usize {
            let h = m + 2;
            let kv = half_grid(h, m);
            let coeffs = psi_on_half_grid(&kv).unwrap();
            assert_eq!(coeffs.len(), m + 2);
            let full = {
                let mut v = vec![0.0; kv.num_basis()];
                for &(i, w) in &coeffs {
                    v[i] = w;
                }
                SplineCurve::new(kv.clone(), v).unwrap()
            };
            for i in 0..=800 {
                let z = -(h as f64) + 2.0 * h as f64 * i as f64 / 800.0;
                assert!(
                    (full.eval(z) - cardinal_spline(m, z)).abs() < 1e-10,
                    "m={m} z={z}"
                );
            }
        }

        // Wrong spacing is rejected.
        let bad = KnotVector::uniform(-3.0, 3.0, 5, 2).unwrap();
        assert!(matches!(
            psi_on_half_grid(&bad),
            Err(ApproxError::NotCardinalGrid(_))
        ));
    }

    #[test]
    fn dual_weights_have_expected_arity() {
        for m in 1..=5 {
            assert_eq!(dual_weights(m).len(), m + 1);
        }
    }

    #[test]
    fn dual_functional_is_exact_on_cardinal_splines() {
        use rand::Rng as _;
        let mut rng = StdRng::seed_from_u64(5);
        for m in 1..=4usize {
            let w = dual_weights(m);
            let c0 = dual_offset(m) as f64;
            let n_coeff = 14usize;
            let coeffs: Vec<f64> = (0..n_coeff).map(|_| rng.gen_range(-2.0..2.0)).collect();
            let shift = 5i64; // g(z) = sum_i c_i psi(z - (i - shift))
            let cs = coeffs.clone();
            let g = move |z: f64| -> f64 {
                cs.iter()
                    .enumerate()
                    .map(|(i, c)| c * cardinal_spline(m, z - (i as f64 - shift as f64)))
                    .sum()
            };
            for j in -2i64..6 {
                let lambda: f64 = (0..=m)
                    .map(|r| {
                        let t = j as f64 + c0 + (r as f64 + 0.5) / (m as f64 + 1.0);
                        w[r] * g(t)
                    })
                    .sum();
                let idx = j + shift;
                let truth = if idx >= 0 && (idx as usize) < n_coeff {
                    coeffs[idx as usize]
                } else {
                    0.0
                };
                assert!(
                    (lambda - truth).abs() < 1e-9,
                    "m={m} j={j}: {lambda} vs {truth}"
                );
            }
        }
    }

    #[test]
    fn square_and_pair_gadgets_are_exact() {
        let kv = half_grid(4, 2);
        let sq = square_edge(&kv).unwrap();
        let (lo, hi) = kv.estimation_interval();
        for i in 0..=50 {
            let x = lo + (hi - lo) * i as f64 / 50.0;
            assert!((sq.eval(x) - x * x).abs() < 1e-10);
        }

        let pair = product_pair(&kv, (-1.0, 1.0)).unwrap();
        assert_eq!(pair.depth(), 2);
        let out = pair.eval(&[0.3, -0.5]);
        assert!((out[0] + 0.15).abs() < 1e-10, "got {}", out[0]);

        let mut rng = StdRng::seed_from_u64(6);
        use rand::Rng as _;
        for _ in 0..100 {
            let x: f64 = rng.gen_range(-1.0..1.0);
            assert!((pair.eval(&[x, 0.0])[0]).abs() < 1e-10);
            assert!((pair.eval(&[x, 1.0])[0] - x).abs() < 1e-10);
        }
    }

    #[test]
    fn product_module_exactness() {
        let kv = half_grid(4, 2);
        use rand::Rng as _;

        let quad = product_module(4, &kv).unwrap();
        assert_eq!(quad.depth(), 4); // 2 ceil(log2 4)
        let v = quad.eval(&[0.5, 0.5, 0.5, 0.5]);
        assert!((v[0] - 0.0625).abs() < 1e-10);

        let mut rng = StdRng::seed_from_u64(7);
        for fan_in in 1..=8usize {
            let module = product_module(fan_in, &kv).unwrap();
            assert_eq!(module.depth(), 2 * (fan_in as f64).log2().ceil().max(0.0) as usize + if fan_in == 1 { 1 } else { 0 });
            for _ in 0..50 {
                let xs: Vec<f64> = (0..fan_in).map(|_| rng.gen_range(0.0..1.0)).collect();
                let expect: f64 = xs.iter().product();
                let got = module.eval(&xs)[0];
                assert!((got - expect).abs() < 1e-10, "fan_in={fan_in}");
            }
            // A zero input annihilates the product.
            if fan_in >= 2 {
                let mut xs: Vec<f64> = (0..fan_in).map(|_| rng.gen_range(0.0..1.0)).collect();
                xs[fan_in / 2] = 0.0;
                assert!(module.eval(&xs)[0].abs() < 1e-10);
            }
        }

        assert!(matches!(
            product_module(0, &kv),
            Err(ApproxError::BadFanIn(0))
        ));
    }

    #[test]
    fn select_terms_zero_function() {
        let f = |_: &[f64]| 0.0;
        let terms = select_terms(&f, &profile(&[2.0, 2.0]), 8, 2).unwrap();
        assert!(terms.iter().all(|t| t.alpha == 0.0) || terms.is_empty());
    }

    #[test]
    fn select_terms_plant_and_recover() {
        // A single level-0 bump: psi_m(x - j) with j = -1 overlaps [0,1].
        let m = 2usize;
        let planted = TensorTerm {
            level: 0,
            scales: vec![0],
            shifts: vec![-1],
            alpha: 0.7,
        };
        let p = planted.clone();
        let f = move |x: &[f64]| p.eval(m, x);
        let terms = select_terms(&f, &profile(&[2.0]), 4, m).unwrap();
        let hit = terms
            .iter()
            .find(|t| t.level == 0 && t.shifts == vec![-1])
            .expect("planted term recovered");
        assert!((hit.alpha - 0.7).abs() < 1e-6, "alpha={}", hit.alpha);
        // All other captured terms carry only numerical dust.
        for t in &terms {
            if t.shifts != vec![-1] || t.level != 0 {
                assert!(t.alpha.abs() < 1e-9, "{t:?}");
            }
        }
    }

    #[test]
    fn select_terms_respects_budget_and_weights() {
        let prof = profile(&[2.0, 2.0]);
        let tf = test_function("smooth1", &prof).unwrap();
        let f = tf.as_fn();
        let g = move |x: &[f64]| f(x);
        let terms = select_terms(&g, &prof, 25, 2).unwrap();
        assert!(terms.len() <= 25);
        for w in terms.windows(2) {
            assert!(w[0].weight(2) >= w[1].weight(2));
        }
    }

    #[test]
    fn assemble_single_term_d1() {
        let m = 2usize;
        let term = TensorTerm {
            level: 2,
            scales: vec![1],
            shifts: vec![1],
            alpha: -0.45,
        };
        let prof = profile(&[2.0]);
        let real = assemble(&[term.clone()], &prof, m, &AssemblyConstants::default()).unwrap();
        assert_eq!(real.params.spec().depth, 3);
        assert!(real.is_silu_free());
        let mut rng = StdRng::seed_from_u64(8);
        use rand::Rng as _;
        for _ in 0..200 {
            let x = [rng.gen_range(0.0..1.0)];
            let expect = term.eval(m, &x);
            let got = real.params.forward(&x);
            assert!((got - expect).abs() < 1e-8, "x={:?}", x);
        }
    }

    #[test]
    fn assemble_matches_tensor_oracle_d2() {
        let m = 2usize;
        let prof = profile(&[2.0, 2.0]);
        let tf = test_function("smooth1", &prof).unwrap();
        let f = tf.as_fn();
        let g = move |x: &[f64]| f(x);
        let terms = select_terms(&g, &prof, 8, m).unwrap();
        let real = assemble(&terms, &prof, m, &AssemblyConstants::default()).unwrap();
        assert!(real.is_silu_free());
        assert_eq!(real.params.spec().depth, 5);

        let mut rng = StdRng::seed_from_u64(9);
        use rand::Rng as _;
        let net = SparseNet::compile(&real.params);
        let mut scratch = ForwardScratch::new(real.params.spec());
        for _ in 0..300 {
            let x = [rng.gen_range(0.0..1.0), rng.gen_range(0.0..1.0)];
            let expect = eval_terms(&terms, m, &x);
            let got = net.forward(&x, &mut scratch);
            assert!(
                (got - expect).abs() < 1e-8,
                "x={x:?} got={got} expect={expect}"
            );
        }

        // Certificates reported.
        assert!(real.nnz > 0);
        assert!(real.s0_empirical > 0.0);
        assert!(real.b0_empirical > 0.0);
    }

    #[test]
    fn assemble_rejects_empty_and_mismatched() {
        let prof = profile(&[2.0, 2.0]);
        assert!(matches!(
            assemble(&[], &prof, 2, &AssemblyConstants::default()),
            Err(ApproxError::EmptyTerms)
        ));
        let term = TensorTerm {
            level: 0,
            scales: vec![0],
            shifts: vec![0],
            alpha: 1.0,
        };
        assert!(matches!(
            assemble(&[term], &prof, 2, &AssemblyConstants::default()),
            Err(ApproxError::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn l2_error_of_planted_realization_is_zero() {
        let m = 2usize;
        let term = TensorTerm {
            level: 0,
            scales: vec![0],
            shifts: vec![-1],
            alpha: 0.6,
        };
        let prof = profile(&[2.0]);
        let real = assemble(&[term.clone()], &prof, m, &AssemblyConstants::default()).unwrap();
        let f0 = move |x: &[f64]| term.eval(m, x);
        let mut rng = StdRng::seed_from_u64(10);
        let rep = real.l2_error(&f0, 4000, &mut rng);
        assert!(rep.value <= 3.0 * rep.std_error.max(1e-12), "{rep:?}");
    }

    #[test]
    fn l2_error_decreases_with_more_terms() {
        let m = 2usize;
        let prof = profile(&[2.0, 2.0]);
        let tf = test_function("smooth1", &prof).unwrap();
        let f = tf.as_fn();
        let g = move |x: &[f64]| f(x);
        let mut prev = f64::INFINITY;
        for n in [4usize, 16, 64] {
            let terms = select_terms(&g, &prof, n, m).unwrap();
            let fa = tf.as_fn();
            let approx_eval = move |x: &[f64]| eval_terms(&terms, m, x);
            let mut rng = StdRng::seed_from_u64(11);
            let rep = l2_error_fn(&move |x: &[f64]| fa(x), &approx_eval, 2, 20_000, &mut rng);
            assert!(
                rep.value < prev * 1.05,
                "n={n}: {} vs prev {prev}",
                rep.value
            );
            prev = rep.value;
        }
    }
}
