//! A family of `4n x 4n` quadratics `M_n = D_n + A_n` on which cyclic descent
//! pays the full logarithmic factor in its gradient-difference bound.
//!
//! `A_n` has first row `(0, a_1, 0, a_2, ..., 0, a_n, 0, -a_n, ..., 0, -a_1)` with
//! `a_i = 1/i`; row `i` is row `i-1` rotated one place right with all signs
//! flipped, so `A[i][j] = (-1)^i c[(j - i) mod 4n]`.

use std::f64::consts::{PI, SQRT_2};

use crate::error::{AcdError, Result};
use crate::prox::PsiSpec;

use super::spectral::SymmetricOperator;
use super::{CompositeProblem, Hessian};

/// Bound on the eigenvalue magnitudes of `A_n`; the diagonal part is twice this.
pub const LAMBDA_BAR: f64 = 4.5;

/// Proven bound on the spectral norm of `A_n` (square root of `2 pi^2`).
pub const PROVEN_NORM_BOUND: f64 = SQRT_2 * PI;

#[derive(Debug, Clone, PartialEq)]
pub struct LowerBoundFamily {
    pub n: usize,
    pub lambda_bar: f64,
    first_row: Vec<f64>,
}

/// Builds the generator row; the matrix itself is materialized on demand.
pub fn build_lower_bound_matrix(n: usize) -> Result<LowerBoundFamily> {
    if n == 0 {
        return Err(AcdError::invalid("family index n must be >= 1"));
    }
    let size = 4 * n;
    let mut c = vec![0.0; size];
    for i in 1..=n {
        c[2 * i - 1] = 1.0 / i as f64;
        c[size - (2 * i - 1)] = -1.0 / i as f64;
    }
    Ok(LowerBoundFamily { n, lambda_bar: LAMBDA_BAR, first_row: c })
}

impl LowerBoundFamily {
    pub fn size(&self) -> usize {
        4 * self.n
    }

    pub fn first_row(&self) -> &[f64] {
        &self.first_row
    }

    #[inline]
    pub fn a_entry(&self, i: usize, j: usize) -> f64 {
        let size = self.size();
        let v = self.first_row[(j + size - i) % size];
        if i % 2 == 0 {
            v
        } else {
            -v
        }
    }

    pub fn m_entry(&self, i: usize, j: usize) -> f64 {
        let d = if i == j { 2.0 * self.lambda_bar } else { 0.0 };
        d + self.a_entry(i, j)
    }

    fn dense(&self, diag: f64) -> Hessian {
        let size = self.size();
        let mut data = vec![0.0; size * size];
        for i in 0..size {
            for j in 0..size {
                data[i * size + j] = self.a_entry(i, j);
            }
            data[i * size + i] += diag;
        }
        Hessian::Dense { n: size, data }
    }

    /// `A_n` as a dense matrix.
    pub fn a_matrix(&self) -> Hessian {
        self.dense(0.0)
    }

    /// `M_n = D_n + A_n` as a dense matrix.
    pub fn m_matrix(&self) -> Hessian {
        self.dense(2.0 * self.lambda_bar)
    }

    /// `1/2 x'M_n x` with no linear term and no separable terms.
    pub fn problem(&self) -> Result<CompositeProblem> {
        let size = self.size();
        CompositeProblem::quadratic(self.m_matrix(), vec![0.0; size], 0.0, vec![PsiSpec::Zero; size])
    }
}

/// Matrix-free view of `A_n`.
impl SymmetricOperator for LowerBoundFamily {
    fn dim(&self) -> usize {
        self.size()
    }

    fn apply(&self, v: &[f64], out: &mut [f64]) {
        let size = self.size();
        // Only odd offsets of the generator row are nonzero.
        for (i, o) in out.iter_mut().enumerate() {
            let mut s = 0.0;
            for off in (1..size).step_by(2) {
                s += self.first_row[off] * v[(i + off) % size];
            }
            *o = if i % 2 == 0 { s } else { -s };
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BRowAudit {
    /// Diagonal entry of `A_n^2`.
    pub b1: f64,
    pub sum: f64,
    pub sum_abs: f64,
    pub bound: f64,
}

/// First row of `B_n = A_n^2`, computed from `A_n` directly. Fails hard if the
/// absolute row sum exceeds `2 pi^2`, which would mean the construction is wrong.
pub fn b_row_audit(n: usize) -> Result<BRowAudit> {
    let fam = build_lower_bound_matrix(n)?;
    let size = fam.size();
    let c = fam.first_row();
    let (mut sum, mut sum_abs) = (0.0, 0.0);
    let mut b1 = 0.0;
    // b_j = sum_l c[l] A[l][j]; c[l] = 0 for even l, so only odd l and even j survive.
    for j in (0..size).step_by(2) {
        let mut s = 0.0;
        for l in (1..size).step_by(2) {
            s -= c[l] * c[(j + size - l) % size];
        }
        if j == 0 {
            b1 = s;
        }
        sum += s;
        sum_abs += s.abs();
    }
    let bound = 2.0 * PI * PI;
    if sum_abs > bound {
        return Err(AcdError::Domain(format!(
            "row sum of |B_{n}| is {sum_abs}, above 2 pi^2 = {bound}"
        )));
    }
    Ok(BRowAudit { b1, sum, sum_abs, bound })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HarmonicGap {
    pub lhs: f64,
    pub rhs: f64,
    pub holds: bool,
}

/// `sum_{j=1}^{2n} H_j^2` against `n ln^2 n`.
pub fn harmonic_gap_check(n: usize) -> Result<HarmonicGap> {
    if n < 2 {
        return Err(AcdError::invalid("harmonic gap needs n >= 2"));
    }
    let mut h = 0.0;
    let mut lhs = 0.0;
    for j in 1..=2 * n {
        h += 1.0 / j as f64;
        lhs += h * h;
    }
    let ln = (n as f64).ln();
    let rhs = n as f64 * ln * ln;
    Ok(HarmonicGap { lhs, rhs, holds: lhs >= rhs })
}
