//! KAN architecture specification, parameter indexing, forward
//! evaluation, clipping and the clipped-Gaussian log-likelihood.
//!
//! A network of depth `L` has widths `(d, D, ..., D, 1)`. Every edge
//! carries a degree-`m` B-spline expansion plus a silu term; layer 0
//! lives on an extended interval `[a0, b0]` whose estimation interval
//! covers `[0, 1]`, hidden layers live on `[-H, H]`.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::bspline::{KnotVector, MAX_DEGREE};

#[derive(Error, Debug, Clone, PartialEq)]
pub enum KanError {
    #[error("depth must be at least 2, got {0}")]
    DepthTooSmall(usize),
    #[error("invalid spec: {0}")]
    InvalidSpec(String),
    #[error("noise variance must be positive, got {0}")]
    InvalidSigma(f64),
    #[error("parameter index {index} out of range {len}")]
    IndexOutOfRange { index: usize, len: usize },
    #[error("dataset row {row}: {message}")]
    BadDataRow { row: usize, message: String },
    #[error("parameter document parse error: {0}")]
    BadDocument(String),
}

/// `silu(x) = x / (1 + e^{-x})`.
pub fn silu(x: f64) -> f64 {
    x / (1.0 + (-x).exp())
}

/// `clip(x) = min{1, max{-1, x}}`.
pub fn clip(x: f64) -> f64 {
    x.clamp(-1.0, 1.0)
}

/// Architecture hyperparameters of an equal-width, uniform fixed-knot
/// KAN.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KanSpec {
    /// Depth `L` (number of layers), at least 2.
    pub depth: usize,
    /// Input dimension `d`.
    pub input_dim: usize,
    /// Hidden width `D`.
    pub hidden_width: usize,
    /// First-layer grid intervals `G0`.
    pub first_grid: usize,
    /// Hidden-layer grid intervals `G`.
    pub hidden_grid: usize,
    /// Hidden grid half-range `H`; hidden knots live on `[-H, H]`.
    pub hidden_range: f64,
    /// Spline degree `m`.
    pub degree: usize,
    /// Left end of the first-layer extended interval.
    pub a0: f64,
    /// Right end of the first-layer extended interval.
    pub b0: f64,
}

impl KanSpec {
    /// Spec with the default first-layer interval `[-1, 2]` and
    /// `G0 = 3m`, which puts the first-layer estimation interval at
    /// `[-0.4, 1.4] ⊇ [0, 1]` for every degree.
    pub fn with_defaults(
        depth: usize,
        input_dim: usize,
        hidden_width: usize,
        hidden_grid: usize,
        hidden_range: f64,
        degree: usize,
    ) -> Result<Self, KanError> {
        let spec = Self {
            depth,
            input_dim,
            hidden_width,
            first_grid: 3 * degree.max(1),
            hidden_grid,
            hidden_range,
            degree,
            a0: -1.0,
            b0: 2.0,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<(), KanError> {
        if self.depth < 2 {
            return Err(KanError::DepthTooSmall(self.depth));
        }
        let bad = |msg: &str| Err(KanError::InvalidSpec(msg.to_string()));
        if self.input_dim < 1 || self.hidden_width < 1 {
            return bad("widths must be positive");
        }
        if self.first_grid < 1 || self.hidden_grid < 1 {
            return bad("grid intervals must be positive");
        }
        if self.degree < 1 || self.degree > MAX_DEGREE {
            return bad("degree out of range");
        }
        if !(self.hidden_range > 0.0) {
            return bad("hidden range must be positive");
        }
        if !(self.a0 < self.b0) {
            return bad("first-layer interval is empty");
        }
        if self.a0.abs().max(self.b0.abs()) < 1.0 {
            return bad("|a0| v |b0| must be at least 1");
        }
        let kv = self
            .layer_knots(0)
            .map_err(|e| KanError::InvalidSpec(e.to_string()))?;
        let (lo, hi) = kv.estimation_interval();
        if lo > 0.0 || hi < 1.0 {
            return bad("first-layer estimation interval must cover [0, 1]");
        }
        Ok(())
    }

    /// Layer widths `(d, D, ..., D, 1)`.
    pub fn widths(&self) -> Vec<usize> {
        let mut w = Vec::with_capacity(self.depth + 1);
        w.push(self.input_dim);
        for _ in 1..self.depth {
            w.push(self.hidden_width);
        }
        w.push(1);
        w
    }

    pub fn width_at(&self, layer: usize) -> usize {
        if layer == 0 {
            self.input_dim
        } else if layer == self.depth {
            1
        } else {
            self.hidden_width
        }
    }

    pub fn layer_grid(&self, layer: usize) -> usize {
        if layer == 0 {
            self.first_grid
        } else {
            self.hidden_grid
        }
    }

    /// Edge coefficient count `G_l + m + 1` at `layer` (slot 0 is the
    /// silu coefficient).
    pub fn edge_len(&self, layer: usize) -> usize {
        self.layer_grid(layer) + self.degree + 1
    }

    pub fn layer_knots(&self, layer: usize) -> Result<KnotVector, crate::bspline::SplineError> {
        if layer == 0 {
            KnotVector::uniform(self.a0, self.b0, self.first_grid, self.degree)
        } else {
            KnotVector::uniform(
                -self.hidden_range,
                self.hidden_range,
                self.hidden_grid,
                self.degree,
            )
        }
    }

    /// Total parameter count
    /// `T = dD(G0+m+1) + ((L-2)D^2 + D)(G+m+1)`.
    pub fn param_count(&self) -> usize {
        let d = self.input_dim;
        let dd = self.hidden_width;
        let l = self.depth;
        d * dd * (self.first_grid + self.degree + 1)
            + ((l - 2) * dd * dd + dd) * (self.hidden_grid + self.degree + 1)
    }

    fn layer_offset(&self, layer: usize) -> usize {
        let mut off = 0;
        for l in 0..layer {
            off += self.width_at(l + 1) * self.width_at(l) * self.edge_len(l);
        }
        off
    }

    /// Flat index of coefficient `coeff` on the edge from node `from`
    /// (layer `layer`) to node `to` (layer `layer + 1`). `coeff = 0` is
    /// the silu slot, `coeff = 1..=G_l+m` are spline coefficients.
    pub fn flat_index(&self, layer: usize, to: usize, from: usize, coeff: usize) -> usize {
        debug_assert!(layer < self.depth);
        debug_assert!(to < self.width_at(layer + 1));
        debug_assert!(from < self.width_at(layer));
        debug_assert!(coeff < self.edge_len(layer));
        self.layer_offset(layer)
            + (to * self.width_at(layer) + from) * self.edge_len(layer)
            + coeff
    }

    /// Inverse of [`flat_index`](Self::flat_index); returns
    /// `(layer, to, from, coeff)`.
    pub fn unflatten(&self, t: usize) -> Result<(usize, usize, usize, usize), KanError> {
        let total = self.param_count();
        if t >= total {
            return Err(KanError::IndexOutOfRange { index: t, len: total });
        }
        let mut rem = t;
        for layer in 0..self.depth {
            let block = self.width_at(layer + 1) * self.width_at(layer) * self.edge_len(layer);
            if rem < block {
                let elen = self.edge_len(layer);
                let edge = rem / elen;
                let coeff = rem % elen;
                let from = edge % self.width_at(layer);
                let to = edge / self.width_at(layer);
                return Ok((layer, to, from, coeff));
            }
            rem -= block;
        }
        unreachable!("index accounted for by param_count");
    }

    /// Evaluate one edge function
    /// `phi(x) = theta_0 silu(x) + sum_k theta_k B_{k,m}(x)` from its
    /// coefficient slice (`edge_len(layer)` entries).
    pub fn edge_eval(&self, layer: usize, coeffs: &[f64], x: f64) -> f64 {
        debug_assert_eq!(coeffs.len(), self.edge_len(layer));
        let knots = self.layer_knots(layer).expect("validated spec");
        let mut acc = coeffs[0] * silu(x);
        let mut scratch = [0.0f64; MAX_DEGREE + 1];
        if let Some(first) = knots.eval_nonzero(x, &mut scratch) {
            let n = knots.num_basis() as isize;
            for (r, &v) in scratch.iter().enumerate().take(self.degree + 1) {
                let k = first + r as isize;
                if k >= 0 && k < n {
                    acc += coeffs[1 + k as usize] * v;
                }
            }
        }
        acc
    }
}

/// Flattened edge-coefficient tensor with its sparsity mask.
///
/// The invariant `theta[t] == 0` whenever `gamma[t] == false` is
/// maintained by construction: values enter through [`set`](Self::set)
/// (which activates the slot) and leave through [`clear`](Self::clear).
#[derive(Debug, Clone, PartialEq)]
pub struct ParamVector {
    spec: KanSpec,
    theta: Vec<f64>,
    gamma: Vec<bool>,
}

impl ParamVector {
    pub fn zeros(spec: KanSpec) -> Self {
        let t = spec.param_count();
        Self {
            spec,
            theta: vec![0.0; t],
            gamma: vec![false; t],
        }
    }

    pub fn spec(&self) -> &KanSpec {
        &self.spec
    }

    pub fn theta(&self) -> &[f64] {
        &self.theta
    }

    pub fn gamma(&self) -> &[bool] {
        &self.gamma
    }

    pub fn len(&self) -> usize {
        self.theta.len()
    }

    pub fn is_empty(&self) -> bool {
        self.theta.is_empty()
    }

    /// Activate slot `t` and store `value`.
    pub fn set(&mut self, t: usize, value: f64) {
        self.gamma[t] = true;
        self.theta[t] = value;
    }

    /// Deactivate slot `t` (value returns to the spike at zero).
    pub fn clear(&mut self, t: usize) {
        self.gamma[t] = false;
        self.theta[t] = 0.0;
    }

    pub fn active_count(&self) -> usize {
        self.gamma.iter().filter(|&&g| g).count()
    }

    pub fn active_indices(&self) -> Vec<usize> {
        self.gamma
            .iter()
            .enumerate()
            .filter_map(|(t, &g)| if g { Some(t) } else { None })
            .collect()
    }

    pub fn sup_norm(&self) -> f64 {
        self.theta.iter().fold(0.0f64, |m, v| m.max(v.abs()))
    }

    /// Number of nonzero coefficients (at most the active count).
    pub fn l0_norm(&self) -> usize {
        self.theta.iter().filter(|v| **v != 0.0).count()
    }

    /// Forward pass through the network. Convenience wrapper that
    /// compiles the active set first; use [`SparseNet`] directly in hot
    /// loops.
    pub fn forward(&self, x: &[f64]) -> f64 {
        SparseNet::compile(self).forward(x, &mut ForwardScratch::new(&self.spec))
    }

    pub fn clip_forward(&self, x: &[f64]) -> f64 {
        clip(self.forward(x))
    }

    /// Structured text document for the active set; decimal round trip
    /// is bit exact.
    pub fn to_document(&self) -> String {
        let doc = ParamDocument {
            spec: self.spec.clone(),
            active: self
                .gamma
                .iter()
                .enumerate()
                .filter_map(|(t, &g)| if g { Some((t, self.theta[t])) } else { None })
                .collect(),
        };
        serde_json::to_string_pretty(&doc).expect("document serialization cannot fail")
    }

    pub fn from_document(text: &str) -> Result<Self, KanError> {
        let doc: ParamDocument =
            serde_json::from_str(text).map_err(|e| KanError::BadDocument(e.to_string()))?;
        doc.spec.validate()?;
        let mut pv = ParamVector::zeros(doc.spec);
        let len = pv.len();
        for (t, v) in doc.active {
            if t >= len {
                return Err(KanError::IndexOutOfRange { index: t, len });
            }
            pv.set(t, v);
        }
        Ok(pv)
    }
}

#[derive(Serialize, Deserialize)]
struct ParamDocument {
    spec: KanSpec,
    active: Vec<(usize, f64)>,
}

/// Reusable buffers for forward passes.
pub struct ForwardScratch {
    cur: Vec<f64>,
    next: Vec<f64>,
}

impl ForwardScratch {
    pub fn new(spec: &KanSpec) -> Self {
        let w = spec.input_dim.max(spec.hidden_width).max(1);
        Self {
            cur: vec![0.0; w],
            next: vec![0.0; w],
        }
    }
}

struct SiluTerm {
    to: usize,
    w: f64,
}

struct SplineTerm {
    to: usize,
    /// 0-based basis index.
    basis: usize,
    w: f64,
}

struct InputGroup {
    from: usize,
    silu: Vec<SiluTerm>,
    spline: Vec<SplineTerm>,
}

struct LayerPlan {
    knots: KnotVector,
    groups: Vec<InputGroup>,
}

/// Active-set view of a [`ParamVector`] compiled for fast repeated
/// forward evaluation: per layer, edges are grouped by input node so
/// each basis row is evaluated once.
pub struct SparseNet {
    degree: usize,
    layers: Vec<LayerPlan>,
    max_width: usize,
}

impl SparseNet {
    pub fn compile(params: &ParamVector) -> Self {
        let spec = params.spec();
        let mut layers = Vec::with_capacity(spec.depth);
        for l in 0..spec.depth {
            let elen = spec.edge_len(l);
            let base = spec.layer_offset(l);
            let w_in = spec.width_at(l);
            let w_out = spec.width_at(l + 1);
            let mut groups: Vec<InputGroup> = Vec::new();
            for from in 0..w_in {
                let mut silu_terms = Vec::new();
                let mut spline_terms = Vec::new();
                for to in 0..w_out {
                    let edge = base + (to * w_in + from) * elen;
                    for k in 0..elen {
                        let t = edge + k;
                        if !params.gamma[t] || params.theta[t] == 0.0 {
                            continue;
                        }
                        if k == 0 {
                            silu_terms.push(SiluTerm {
                                to,
                                w: params.theta[t],
                            });
                        } else {
                            spline_terms.push(SplineTerm {
                                to,
                                basis: k - 1,
                                w: params.theta[t],
                            });
                        }
                    }
                }
                if !silu_terms.is_empty() || !spline_terms.is_empty() {
                    groups.push(InputGroup {
                        from,
                        silu: silu_terms,
                        spline: spline_terms,
                    });
                }
            }
            layers.push(LayerPlan {
                knots: spec.layer_knots(l).expect("validated spec"),
                groups,
            });
        }
        SparseNet {
            degree: spec.degree,
            layers,
            max_width: spec.input_dim.max(spec.hidden_width).max(1),
        }
    }

    pub fn forward(&self, x: &[f64], scratch: &mut ForwardScratch) -> f64 {
        debug_assert!(scratch.cur.len() >= self.max_width);
        scratch.cur[..x.len()].copy_from_slice(x);
        let mut basis = [0.0f64; MAX_DEGREE + 1];
        for (li, layer) in self.layers.iter().enumerate() {
            let out_width = if li + 1 == self.layers.len() {
                1
            } else {
                self.max_width
            };
            scratch.next[..out_width].iter_mut().for_each(|v| *v = 0.0);
            let n_basis = layer.knots.num_basis() as isize;
            for g in &layer.groups {
                let xin = scratch.cur[g.from];
                if !g.silu.is_empty() {
                    let s = silu(xin);
                    for t in &g.silu {
                        scratch.next[t.to] += t.w * s;
                    }
                }
                if !g.spline.is_empty() {
                    if let Some(first) = layer.knots.eval_nonzero(xin, &mut basis) {
                        for t in &g.spline {
                            let rel = t.basis as isize - first;
                            if rel >= 0
                                && rel <= self.degree as isize
                                && (t.basis as isize) < n_basis
                            {
                                scratch.next[t.to] += t.w * basis[rel as usize];
                            }
                        }
                    }
                }
            }
            std::mem::swap(&mut scratch.cur, &mut scratch.next);
        }
        scratch.cur[0]
    }

    pub fn clip_forward(&self, x: &[f64], scratch: &mut ForwardScratch) -> f64 {
        clip(self.forward(x, scratch))
    }
}

/// Regression dataset with design points inside the unit cube.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegressionDataset {
    dim: usize,
    x: Vec<f64>,
    y: Vec<f64>,
}

impl RegressionDataset {
    pub fn new(dim: usize, x: Vec<f64>, y: Vec<f64>) -> Result<Self, KanError> {
        if dim == 0 {
            return Err(KanError::InvalidSpec(
                "dataset dimension must be positive".into(),
            ));
        }
        if x.len() != y.len() * dim {
            return Err(KanError::InvalidSpec(format!(
                "design length {} does not match {} rows of dimension {}",
                x.len(),
                y.len(),
                dim
            )));
        }
        for (i, row) in x.chunks(dim).enumerate() {
            for &v in row {
                if !(0.0..=1.0).contains(&v) {
                    return Err(KanError::BadDataRow {
                        row: i,
                        message: format!("design value {v} outside [0, 1]"),
                    });
                }
            }
        }
        Ok(Self { dim, x, y })
    }

    pub fn n(&self) -> usize {
        self.y.len()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.x[i * self.dim..(i + 1) * self.dim]
    }

    pub fn y(&self) -> &[f64] {
        &self.y
    }
}

/// Gaussian log-likelihood of the clipped network:
/// `sum_i [-log(2 pi sigma^2)/2 - (y_i - clip(f(x_i)))^2 / (2 sigma^2)]`.
pub fn log_likelihood(
    params: &ParamVector,
    sigma2: f64,
    data: &RegressionDataset,
) -> Result<f64, KanError> {
    if !(sigma2 > 0.0) {
        return Err(KanError::InvalidSigma(sigma2));
    }
    let net = SparseNet::compile(params);
    let mut scratch = ForwardScratch::new(params.spec());
    Ok(log_likelihood_compiled(&net, &mut scratch, sigma2, data))
}

/// Same likelihood over a pre-compiled network (hot path for samplers).
pub fn log_likelihood_compiled(
    net: &SparseNet,
    scratch: &mut ForwardScratch,
    sigma2: f64,
    data: &RegressionDataset,
) -> f64 {
    let n = data.n();
    let norm = -0.5 * (2.0 * std::f64::consts::PI * sigma2).ln();
    let inv = 0.5 / sigma2;
    let mut acc = 0.0;
    for i in 0..n {
        let f = net.clip_forward(data.row(i), scratch);
        let r = data.y()[i] - f;
        acc += norm - r * r * inv;
    }
    acc
}
