//! Fixed-knot B-spline bases, spline curves, derivatives and exact
//! polynomial reproduction.
//!
//! All knot grids here are strictly increasing and equally spaced on an
//! extended interval `[a, b]`; the estimation interval is the inner
//! `[xi_0, xi_G]` obtained by trimming `m` knot cells on each side.
//! Basis evaluation uses the Cox-de Boor recursion with the convention
//! `0/0 := 0` (knot coincidences cannot occur on these grids, but the
//! guard keeps boundary arithmetic safe).

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::linalg;

/// Largest supported spline degree. Evaluation scratch buffers are fixed
/// at `MAX_DEGREE + 1` entries.
pub const MAX_DEGREE: usize = 11;

#[derive(Error, Debug, Clone, PartialEq)]
pub enum SplineError {
    #[error("interval is empty: a = {0} must be strictly less than b = {1}")]
    InvalidInterval(f64, f64),
    #[error("grid intervals must be at least 1, got {0}")]
    InvalidGrid(usize),
    #[error("spline degree must be in 1..={MAX_DEGREE}, got {0}")]
    InvalidDegree(usize),
    #[error("coefficient count {got} does not match basis size {expected}")]
    CoefficientMismatch { expected: usize, got: usize },
    #[error("derivative needs degree >= 2, curve has degree {0}")]
    DerivativeOfLinear(usize),
    #[error("monomial degree {degree} exceeds spline degree {spline_degree}")]
    DegreeTooHigh { degree: usize, spline_degree: usize },
    #[error("collocation system is singular")]
    SingularCollocation,
}

/// Strictly increasing, equally spaced extended knot grid for one layer.
///
/// Stores `G + 2m + 1` knots on `[a, b]`. In the paper's indexing the
/// knots are `xi_{-m}, ..., xi_{G+m}`; vector index `i` holds
/// `xi_{i - m}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KnotVector {
    a: f64,
    b: f64,
    grid: usize,
    degree: usize,
    spacing: f64,
    knots: Vec<f64>,
}

impl KnotVector {
    /// Build the uniform extended grid with `G` estimation intervals and
    /// degree `m`; spacing is `(b - a) / (G + 2m)`.
    pub fn uniform(a: f64, b: f64, grid: usize, degree: usize) -> Result<Self, SplineError> {
        if !(a < b) {
            return Err(SplineError::InvalidInterval(a, b));
        }
        if grid < 1 {
            return Err(SplineError::InvalidGrid(grid));
        }
        if degree < 1 || degree > MAX_DEGREE {
            return Err(SplineError::InvalidDegree(degree));
        }
        let cells = grid + 2 * degree;
        let spacing = (b - a) / cells as f64;
        let mut knots = Vec::with_capacity(cells + 1);
        for i in 0..cells {
            knots.push(a + i as f64 * spacing);
        }
        knots.push(b);
        Ok(Self {
            a,
            b,
            grid,
            degree,
            spacing,
            knots,
        })
    }

    pub fn a(&self) -> f64 {
        self.a
    }

    pub fn b(&self) -> f64 {
        self.b
    }

    /// Number of estimation-interval cells `G`.
    pub fn grid(&self) -> usize {
        self.grid
    }

    /// Spline degree `m`.
    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn spacing(&self) -> f64 {
        self.spacing
    }

    pub fn knots(&self) -> &[f64] {
        &self.knots
    }

    /// Number of basis functions `G + m`.
    pub fn num_basis(&self) -> usize {
        self.grid + self.degree
    }

    /// Knot position by vector index, extended arithmetically outside
    /// the stored range (the grid is uniform, so the extension is
    /// consistent).
    fn knot_at(&self, i: isize) -> f64 {
        if i >= 0 && (i as usize) < self.knots.len() {
            self.knots[i as usize]
        } else {
            self.a + i as f64 * self.spacing
        }
    }

    /// Paper-indexed knot `xi_j` for `j` in `[-m, G+m]`.
    pub fn xi(&self, j: isize) -> f64 {
        self.knot_at(j + self.degree as isize)
    }

    /// The estimation interval `[xi_0, xi_G]`.
    pub fn estimation_interval(&self) -> (f64, f64) {
        (self.xi(0), self.xi(self.grid as isize))
    }

    /// Greville abscissa of basis function `k` (0-based): the average of
    /// the `m` interior knots of its support.
    pub fn greville(&self, k: usize) -> f64 {
        let mut s = 0.0;
        for i in 1..=self.degree {
            s += self.knot_at(k as isize + i as isize);
        }
        s / self.degree as f64
    }

    /// Evaluate the at most `m + 1` basis functions that can be nonzero
    /// at `x`. Writes values into `out[0..=m]` and returns the (signed)
    /// basis index of `out[0]`; entries mapping outside `0..num_basis()`
    /// belong to virtual basis functions and must be ignored. Returns
    /// `None` when `x` lies outside `[a, b]` (all basis values are 0).
    pub fn eval_nonzero(&self, x: f64, out: &mut [f64; MAX_DEGREE + 1]) -> Option<isize> {
        if !(x >= self.a && x <= self.b) {
            return None;
        }
        let m = self.degree;
        let cells = self.grid + 2 * m;
        let span = (((x - self.a) / self.spacing).floor() as isize).clamp(0, cells as isize - 1);

        let mut left = [0.0f64; MAX_DEGREE + 1];
        let mut right = [0.0f64; MAX_DEGREE + 1];
        out[0] = 1.0;
        for r in 1..=m {
            left[r] = x - self.knot_at(span + 1 - r as isize);
            right[r] = self.knot_at(span + r as isize) - x;
            let mut saved = 0.0;
            for i in 0..r {
                let denom = right[i + 1] + left[r - i];
                let temp = if denom != 0.0 { out[i] / denom } else { 0.0 };
                out[i] = saved + right[i + 1] * temp;
                saved = left[r - i] * temp;
            }
            out[r] = saved;
        }
        Some(span - m as isize)
    }

    /// Evaluate every basis function at `x`: entry `k` (0-based) is
    /// `B_{k+1,m}(x)` in the paper's 1-based numbering.
    pub fn eval_basis(&self, x: f64) -> Vec<f64> {
        let mut values = vec![0.0; self.num_basis()];
        let mut scratch = [0.0f64; MAX_DEGREE + 1];
        if let Some(first) = self.eval_nonzero(x, &mut scratch) {
            for (r, &v) in scratch.iter().enumerate().take(self.degree + 1) {
                let k = first + r as isize;
                if k >= 0 && (k as usize) < values.len() {
                    values[k as usize] = v;
                }
            }
        }
        values
    }
}

/// A spline curve `s_m(x) = sum_k w_k B_{k,m}(x)` on a [`KnotVector`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplineCurve {
    knots: KnotVector,
    coeffs: Vec<f64>,
}

impl SplineCurve {
    pub fn new(knots: KnotVector, coeffs: Vec<f64>) -> Result<Self, SplineError> {
        if coeffs.len() != knots.num_basis() {
            return Err(SplineError::CoefficientMismatch {
                expected: knots.num_basis(),
                got: coeffs.len(),
            });
        }
        Ok(Self { knots, coeffs })
    }

    pub fn knots(&self) -> &KnotVector {
        &self.knots
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn eval(&self, x: f64) -> f64 {
        let mut scratch = [0.0f64; MAX_DEGREE + 1];
        let Some(first) = self.knots.eval_nonzero(x, &mut scratch) else {
            return 0.0;
        };
        let n = self.coeffs.len() as isize;
        let mut acc = 0.0;
        for (r, &v) in scratch.iter().enumerate().take(self.knots.degree() + 1) {
            let k = first + r as isize;
            if k >= 0 && k < n {
                acc += self.coeffs[k as usize] * v;
            }
        }
        acc
    }

    /// The derivative curve, a spline of degree `m - 1` on the same
    /// physical knots (grid `G + 2`). Coefficients are the scaled first
    /// differences `(w_k - w_{k-1}) / spacing` with out-of-range
    /// coefficients taken as zero, which makes the identity exact on the
    /// whole extended interval and gives `|s'(x)| <= max_k |w'_k|`
    /// everywhere.
    pub fn derivative(&self) -> Result<SplineCurve, SplineError> {
        let m = self.knots.degree();
        if m < 2 {
            return Err(SplineError::DerivativeOfLinear(m));
        }
        let d_knots = KnotVector::uniform(self.knots.a(), self.knots.b(), self.knots.grid() + 2, m - 1)?;
        let n = d_knots.num_basis();
        debug_assert_eq!(n, self.coeffs.len() + 1);
        let inv = 1.0 / self.knots.spacing();
        let mut w = Vec::with_capacity(n);
        for j in 0..n {
            let hi = if j < self.coeffs.len() { self.coeffs[j] } else { 0.0 };
            let lo = if j >= 1 { self.coeffs[j - 1] } else { 0.0 };
            w.push((hi - lo) * inv);
        }
        SplineCurve::new(d_knots, w)
    }
}

/// The spline curve reproducing `slope * x + intercept` exactly on the
/// estimation interval: coefficients are the affine map applied to the
/// Greville abscissae.
pub fn greville_affine(slope: f64, intercept: f64, knots: &KnotVector) -> SplineCurve {
    let coeffs = (0..knots.num_basis())
        .map(|k| slope * knots.greville(k) + intercept)
        .collect();
    SplineCurve::new(knots.clone(), coeffs).expect("coefficient count matches by construction")
}

/// Exact spline coefficients of the monomial `x -> x^degree` on the
/// estimation interval, for `degree <= m`.
///
/// Solved as a collocation system at equispaced midpoints of the
/// estimation interval; those points satisfy the Schoenberg-Whitney
/// condition for every basis function, so the system is nonsingular and
/// its unique solution is the exact representation.
pub fn polynomial_coeffs(degree: usize, knots: &KnotVector) -> Result<SplineCurve, SplineError> {
    if degree > knots.degree() {
        return Err(SplineError::DegreeTooHigh {
            degree,
            spline_degree: knots.degree(),
        });
    }
    let coeffs = fit_on_estimation_interval(knots, |x| x.powi(degree as i32))?;
    SplineCurve::new(knots.clone(), coeffs)
}

/// Collocation fit of `f` on the estimation interval: returns the unique
/// coefficient vector interpolating `f` at `G + m` equispaced midpoints
/// of `[xi_0, xi_G]`. Exact whenever `f` restricted to the estimation
/// interval lies in the spline space.
pub fn fit_on_estimation_interval(
    knots: &KnotVector,
    f: impl Fn(f64) -> f64,
) -> Result<Vec<f64>, SplineError> {
    let n = knots.num_basis();
    let (lo, hi) = knots.estimation_interval();
    let step = (hi - lo) / n as f64;
    let mut a = vec![0.0; n * n];
    let mut rhs = vec![0.0; n];
    for r in 0..n {
        let x = lo + (r as f64 + 0.5) * step;
        let row = knots.eval_basis(x);
        a[r * n..(r + 1) * n].copy_from_slice(&row);
        rhs[r] = f(x);
    }
    linalg::solve(&mut a, &mut rhs).ok_or(SplineError::SingularCollocation)
}
