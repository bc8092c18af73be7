//! Composite test problems `F(x) = 1/2 x'Mx - b'x + c + sum_k psi_k(x_k)`.
//!
//! Least-squares data `1/2 |Ax - y|^2` is folded into the quadratic form on
//! construction (`M = A'A`, `b = A'y`, `c = |y|^2 / 2`).

mod io;
mod lower_bound;
mod spectral;

pub use io::{parse_problem, read_problem, write_problem, ProblemFile, Recipe};
pub use lower_bound::{
    b_row_audit, build_lower_bound_matrix, harmonic_gap_check, BRowAudit, HarmonicGap,
    LowerBoundFamily, LAMBDA_BAR, PROVEN_NORM_BOUND,
};
pub use spectral::{smallest_eigenvalue, spectral_norm, SpectralEstimate, SymmetricOperator};

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{AcdError, Result};
use crate::prox::{d_hat_unchecked, PsiSpec};
use crate::step_size::LipschitzInfo;
use crate::tolerances::TOLERANCES;

/// Largest dimension for which the full `L_jk` matrix is kept.
const DENSE_LIMIT: usize = 4096;

/// Symmetric Hessian, dense row-major or compressed rows.
#[derive(Debug, Clone, PartialEq)]
pub enum Hessian {
    Dense { n: usize, data: Vec<f64> },
    Sparse { n: usize, row_ptr: Vec<usize>, cols: Vec<usize>, vals: Vec<f64> },
}

impl Hessian {
    pub fn dense(n: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != n * n {
            return Err(AcdError::invalid(format!("dense hessian needs {} entries, got {}", n * n, data.len())));
        }
        let h = Hessian::Dense { n, data };
        h.check_symmetric()?;
        Ok(h)
    }

    /// Builds compressed rows from `(row, col, value)` triplets; duplicates are summed.
    pub fn from_triplets(n: usize, mut entries: Vec<(usize, usize, f64)>) -> Result<Self> {
        if entries.iter().any(|&(i, j, _)| i >= n || j >= n) {
            return Err(AcdError::invalid("triplet index out of range"));
        }
        entries.sort_by(|a, b| (a.0, a.1).cmp(&(b.0, b.1)));
        let mut row_ptr = vec![0usize; n + 1];
        let mut cols: Vec<usize> = Vec::with_capacity(entries.len());
        let mut vals: Vec<f64> = Vec::with_capacity(entries.len());
        let mut last: Option<(usize, usize)> = None;
        for (i, j, v) in entries {
            if last == Some((i, j)) {
                *vals.last_mut().unwrap() += v;
                continue;
            }
            cols.push(j);
            vals.push(v);
            row_ptr[i + 1] += 1;
            last = Some((i, j));
        }
        for i in 0..n {
            row_ptr[i + 1] += row_ptr[i];
        }
        let h = Hessian::Sparse { n, row_ptr, cols, vals };
        h.check_symmetric()?;
        Ok(h)
    }

    pub fn dim(&self) -> usize {
        match self {
            Hessian::Dense { n, .. } | Hessian::Sparse { n, .. } => *n,
        }
    }

    /// Calls `f(col, value)` for each stored entry of row `k`.
    #[inline]
    pub fn for_row(&self, k: usize, mut f: impl FnMut(usize, f64)) {
        match self {
            Hessian::Dense { n, data } => {
                for (j, &v) in data[k * n..(k + 1) * n].iter().enumerate() {
                    f(j, v);
                }
            }
            Hessian::Sparse { row_ptr, cols, vals, .. } => {
                for idx in row_ptr[k]..row_ptr[k + 1] {
                    f(cols[idx], vals[idx]);
                }
            }
        }
    }

    /// `sum_j M_kj * value(j)`.
    #[inline]
    pub fn row_dot(&self, k: usize, mut value: impl FnMut(usize) -> f64) -> f64 {
        let mut s = 0.0;
        match self {
            Hessian::Dense { n, data } => {
                for (j, &v) in data[k * n..(k + 1) * n].iter().enumerate() {
                    s += v * value(j);
                }
            }
            Hessian::Sparse { row_ptr, cols, vals, .. } => {
                for idx in row_ptr[k]..row_ptr[k + 1] {
                    s += vals[idx] * value(cols[idx]);
                }
            }
        }
        s
    }

    pub fn entry(&self, j: usize, k: usize) -> f64 {
        match self {
            Hessian::Dense { n, data } => data[j * n + k],
            Hessian::Sparse { row_ptr, cols, vals, .. } => {
                let range = row_ptr[j]..row_ptr[j + 1];
                match cols[range.clone()].binary_search(&k) {
                    Ok(pos) => vals[range.start + pos],
                    Err(_) => 0.0,
                }
            }
        }
    }

    pub fn mul_vec(&self, x: &[f64], out: &mut [f64]) {
        for (k, o) in out.iter_mut().enumerate() {
            *o = self.row_dot(k, |j| x[j]);
        }
    }

    fn check_symmetric(&self) -> Result<()> {
        let n = self.dim();
        for j in 0..n {
            let mut bad = None;
            self.for_row(j, |k, v| {
                if bad.is_none() && (v - self.entry(k, j)).abs() > TOLERANCES.symmetry_abs {
                    bad = Some((k, v));
                }
            });
            if let Some((k, v)) = bad {
                return Err(AcdError::invalid(format!(
                    "hessian not symmetric at ({j},{k}): {v} vs {}",
                    self.entry(k, j)
                )));
            }
        }
        Ok(())
    }

    fn to_nalgebra(&self) -> DMatrix<f64> {
        let n = self.dim();
        let mut m = DMatrix::zeros(n, n);
        for j in 0..n {
            self.for_row(j, |k, v| m[(j, k)] = v);
        }
        m
    }
}

impl SymmetricOperator for Hessian {
    fn dim(&self) -> usize {
        Hessian::dim(self)
    }

    fn apply(&self, v: &[f64], out: &mut [f64]) {
        self.mul_vec(v, out)
    }
}

/// Minimizer and minimum recorded for test problems.
#[derive(Debug, Clone, PartialEq)]
pub struct KnownOptimum {
    pub x: Vec<f64>,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CompositeProblem {
    pub hessian: Hessian,
    pub linear: Vec<f64>,
    pub constant: f64,
    pub psi: Vec<PsiSpec>,
    pub lipschitz: LipschitzInfo,
    pub optimum: Option<KnownOptimum>,
    /// How to regenerate the problem; `None` for explicit data.
    pub recipe: Option<Recipe>,
}

impl CompositeProblem {
    /// Quadratic problem from explicit data. The minimizer is recorded when it has
    /// a closed form (all terms smooth quadratics, or a single coordinate).
    pub fn quadratic(hessian: Hessian, linear: Vec<f64>, constant: f64, psi: Vec<PsiSpec>) -> Result<Self> {
        let n = hessian.dim();
        if n == 0 {
            return Err(AcdError::invalid("dimension must be >= 1"));
        }
        if linear.len() != n || psi.len() != n {
            return Err(AcdError::invalid(format!(
                "dimension mismatch: hessian {n}, linear {}, psi {}",
                linear.len(),
                psi.len()
            )));
        }
        for p in &psi {
            p.validate()?;
        }
        if linear.iter().any(|v| !v.is_finite()) || !constant.is_finite() {
            return Err(AcdError::invalid("non-finite linear term or constant"));
        }
        let global = if n <= DENSE_LIMIT {
            let m = hessian.to_nalgebra();
            let eig = m.symmetric_eigenvalues();
            let lo = eig.iter().copied().fold(f64::INFINITY, f64::min);
            if lo < -1e-9 * eig.iter().map(|v| v.abs()).fold(1.0, f64::max) {
                return Err(AcdError::Domain(format!("hessian is not positive semidefinite (min eigenvalue {lo})")));
            }
            eig.iter().map(|v| v.abs()).fold(0.0, f64::max)
        } else {
            spectral_norm(&hessian, 2000, 1e-10).value
        };
        let rows = (0..n).map(|j| {
            let mut row = Vec::new();
            hessian.for_row(j, |k, v| row.push((k, v)));
            row
        });
        let lipschitz = LipschitzInfo::from_rows(n, rows, global, n <= DENSE_LIMIT)?;
        let mut p = CompositeProblem { hessian, linear, constant, psi, lipschitz, optimum: None, recipe: None };
        p.optimum = p.closed_form_optimum();
        Ok(p)
    }

    /// `1/2 |Ax - y|^2 + sum psi_k(x_k)` with `design` given as rows of `A`.
    pub fn least_squares(design: &[Vec<f64>], target: &[f64], psi: Vec<PsiSpec>) -> Result<Self> {
        let m = design.len();
        if m == 0 || target.len() != m {
            return Err(AcdError::invalid("design and target must be nonempty and of equal length"));
        }
        let n = design[0].len();
        if design.iter().any(|r| r.len() != n) {
            return Err(AcdError::invalid("ragged design matrix"));
        }
        let a = DMatrix::from_fn(m, n, |i, j| design[i][j]);
        let y = DVector::from_column_slice(target);
        let gram = a.transpose() * &a;
        let linear = (a.transpose() * &y).as_slice().to_vec();
        let constant = 0.5 * y.norm_squared();
        let data = (0..n * n).map(|idx| gram[(idx / n, idx % n)]).collect();
        // A'A is symmetric up to rounding; symmetrize exactly.
        let mut h = Hessian::Dense { n, data };
        if let Hessian::Dense { data, .. } = &mut h {
            for j in 0..n {
                for k in j + 1..n {
                    let v = 0.5 * (data[j * n + k] + data[k * n + j]);
                    data[j * n + k] = v;
                    data[k * n + j] = v;
                }
            }
        }
        CompositeProblem::quadratic(h, linear, constant, psi)
    }

    pub fn dim(&self) -> usize {
        self.hessian.dim()
    }

    pub fn smooth_value(&self, x: &[f64]) -> f64 {
        let mut s = self.constant;
        for k in 0..self.dim() {
            let mx = self.hessian.row_dot(k, |j| x[j]);
            s += x[k] * (0.5 * mx - self.linear[k]);
        }
        s
    }

    pub fn psi_value(&self, x: &[f64]) -> f64 {
        self.psi.iter().zip(x).map(|(p, &v)| p.eval(v)).sum()
    }

    /// `F(x)`.
    pub fn value(&self, x: &[f64]) -> f64 {
        self.smooth_value(x) + self.psi_value(x)
    }

    /// `grad_k f(x)`.
    #[inline]
    pub fn partial(&self, k: usize, x: &[f64]) -> f64 {
        self.hessian.row_dot(k, |j| x[j]) - self.linear[k]
    }

    pub fn gradient(&self, x: &[f64]) -> Vec<f64> {
        (0..self.dim()).map(|k| self.partial(k, x)).collect()
    }

    /// Strong convexity of `f` and of `F` (`lambda_min(M)` and `lambda_min(M + diag(a))`).
    pub fn strong_convexity(&self) -> (f64, f64) {
        let n = self.dim();
        let extra: Vec<f64> = self.psi.iter().map(PsiSpec::curvature).collect();
        if n <= DENSE_LIMIT {
            let m = self.hessian.to_nalgebra();
            let mu_f = m.clone().symmetric_eigenvalues().min();
            let shifted = m + DMatrix::from_diagonal(&DVector::from_vec(extra));
            (mu_f.max(0.0), shifted.symmetric_eigenvalues().min().max(0.0))
        } else {
            let mu_f = smallest_eigenvalue(&self.hessian, 2000, 1e-10).value.max(0.0);
            let min_extra = extra.iter().copied().fold(f64::INFINITY, f64::min);
            (mu_f, mu_f + min_extra)
        }
    }

    fn closed_form_optimum(&self) -> Option<KnownOptimum> {
        let n = self.dim();
        if self.psi.iter().all(|p| matches!(p, PsiSpec::Zero | PsiSpec::Quadratic { .. })) && n <= DENSE_LIMIT {
            let mut m = self.hessian.to_nalgebra();
            let mut rhs = DVector::from_column_slice(&self.linear);
            for (k, p) in self.psi.iter().enumerate() {
                if let PsiSpec::Quadratic { a, b } = *p {
                    m[(k, k)] += a;
                    rhs[k] -= b;
                }
            }
            let x = m.cholesky()?.solve(&rhs).as_slice().to_vec();
            let value = self.value(&x);
            return Some(KnownOptimum { x, value });
        }
        if n == 1 {
            let curv = self.hessian.entry(0, 0);
            if curv > 0.0 {
                // At x = 0 the proximal function with step `curv` is exactly F(0) - F(d).
                let x = vec![d_hat_unchecked(-self.linear[0], 0.0, curv, &self.psi[0])];
                let value = self.value(&x);
                return Some(KnownOptimum { x, value });
            }
        }
        None
    }
}

/// Gaussian design with unit-norm columns, `m = 2n` rows, and noisy targets.
fn synthetic_design(n: usize, seed: u64) -> (Vec<Vec<f64>>, Vec<f64>) {
    let m = 2 * n;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut a: Vec<Vec<f64>> = (0..m).map(|_| (0..n).map(|_| rng.sample(StandardNormal)).collect()).collect();
    for j in 0..n {
        let norm = a.iter().map(|r| r[j] * r[j]).sum::<f64>().sqrt();
        for r in a.iter_mut() {
            r[j] /= norm;
        }
    }
    let x_true: Vec<f64> = (0..n).map(|_| rng.sample(StandardNormal)).collect();
    let y = a
        .iter()
        .map(|r| {
            let noise: f64 = rng.sample(StandardNormal);
            r.iter().zip(&x_true).map(|(u, v)| u * v).sum::<f64>() + 0.1 * noise
        })
        .collect();
    (a, y)
}

/// Least squares plus `(curvature/2) x_k^2` on every coordinate.
pub fn make_ridge(n: usize, seed: u64, curvature: f64) -> Result<CompositeProblem> {
    if n == 0 {
        return Err(AcdError::invalid("dimension must be >= 1"));
    }
    let psi = PsiSpec::quadratic(curvature, 0.0)?;
    let (a, y) = synthetic_design(n, seed);
    let mut p = CompositeProblem::least_squares(&a, &y, vec![psi; n])?;
    p.recipe = Some(Recipe::Ridge { n, seed, curvature });
    Ok(p)
}

/// Least squares plus `reg_weight * |x_k|`. With `reg_weight = 0` the terms are `Zero`.
pub fn make_lasso(n: usize, seed: u64, reg_weight: f64) -> Result<CompositeProblem> {
    if n == 0 {
        return Err(AcdError::invalid("dimension must be >= 1"));
    }
    let psi = if reg_weight == 0.0 { PsiSpec::Zero } else { PsiSpec::abs(reg_weight)? };
    let (a, y) = synthetic_design(n, seed);
    let mut p = CompositeProblem::least_squares(&a, &y, vec![psi; n])?;
    p.recipe = Some(Recipe::Lasso { n, seed, reg_weight });
    Ok(p)
}

/// Sparse, diagonally dominant quadratic: unit diagonal plus about `degree`
/// off-diagonal entries `+-0.05` per row, Gaussian linear term, `psi = Zero`.
///
/// The constant is chosen so that the minimum is (numerically) zero; it is
/// estimated from a long cyclic run because the dimension is too large for a
/// dense factorization.
pub fn make_sparse_quadratic(n: usize, degree: usize, seed: u64) -> Result<CompositeProblem> {
    if n < 2 {
        return Err(AcdError::invalid("sparse quadratic needs n >= 2"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut entries: Vec<(usize, usize, f64)> = (0..n).map(|i| (i, i, 1.0)).collect();
    for i in 0..n {
        for _ in 0..degree / 2 {
            let mut j = rng.gen_range(0..n - 1);
            if j >= i {
                j += 1;
            }
            let v = if rng.gen::<bool>() { 0.05 } else { -0.05 };
            entries.push((i, j, v));
            entries.push((j, i, v));
        }
    }
    let linear: Vec<f64> = (0..n).map(|_| rng.sample(StandardNormal)).collect();
    let hessian = Hessian::from_triplets(n, entries)?;
    let mut p = CompositeProblem::quadratic(hessian, linear, 0.0, vec![PsiSpec::Zero; n])?;
    let x = reference_minimizer(&p, 200);
    let value = p.value(&x);
    p.constant = -value;
    p.optimum = Some(KnownOptimum { value: p.value(&x), x });
    p.recipe = Some(Recipe::Sparse { n, degree, seed });
    Ok(p)
}

// Plain cyclic sweeps with exact coordinate minimization; used only as an oracle.
fn reference_minimizer(p: &CompositeProblem, sweeps: usize) -> Vec<f64> {
    let n = p.dim();
    let mut x = vec![0.0; n];
    for _ in 0..sweeps {
        for k in 0..n {
            let curv = p.hessian.entry(k, k);
            let g = p.partial(k, &x);
            x[k] += d_hat_unchecked(g, x[k], curv, &p.psi[k]);
        }
    }
    x
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ridge_one_dim_closed_form() {
        let p = CompositeProblem::least_squares(&[vec![1.0]], &[1.0], vec![PsiSpec::Quadratic { a: 1.0, b: 0.0 }])
            .unwrap();
        let opt = p.optimum.unwrap();
        assert!((opt.x[0] - 0.5).abs() < 1e-15);
        assert!((opt.value - 0.25).abs() < 1e-15);
    }

    #[test]
    fn lasso_one_dim_closed_form() {
        let p = CompositeProblem::least_squares(&[vec![1.0]], &[1.0], vec![PsiSpec::AbsWeighted(2.0)]).unwrap();
        assert_eq!(p.optimum.unwrap().x[0], 0.0);
        let p = CompositeProblem::least_squares(&[vec![1.0]], &[1.0], vec![PsiSpec::AbsWeighted(0.5)]).unwrap();
        let opt = p.optimum.unwrap();
        assert!((opt.x[0] - 0.5).abs() < 1e-15);
        assert!((opt.value - 0.375).abs() < 1e-15);
    }

    #[test]
    fn ridge_zero_curvature_matches_normal_equations() {
        let p = make_ridge(2, 0, 0.0).unwrap();
        let opt = p.optimum.clone().unwrap();
        let g = p.gradient(&opt.x);
        assert!(g.iter().all(|v| v.abs() < 1e-12));
    }

    #[test]
    fn generators_are_deterministic() {
        assert_eq!(make_ridge(8, 3, 0.5).unwrap(), make_ridge(8, 3, 0.5).unwrap());
        assert_ne!(make_ridge(8, 3, 0.5).unwrap().linear, make_ridge(8, 4, 0.5).unwrap().linear);
    }

    #[test]
    fn lasso_without_weight_is_plain_least_squares() {
        let a = make_lasso(6, 2, 0.0).unwrap();
        let b = make_ridge(6, 2, 0.0).unwrap();
        assert_eq!(a.hessian, b.hessian);
        assert_eq!(a.linear, b.linear);
        assert_eq!(a.optimum.as_ref().unwrap().x, b.optimum.as_ref().unwrap().x);
    }

    #[test]
    fn normalized_columns_give_unit_diagonal() {
        let p = make_ridge(10, 1, 0.0).unwrap();
        for &d in &p.lipschitz.diag {
            assert!((d - 1.0).abs() < 1e-12);
        }
        assert!(p.lipschitz.global >= p.lipschitz.max_diag());
    }

    #[test]
    fn sparse_triplets_and_minimum() {
        let p = make_sparse_quadratic(200, 4, 7).unwrap();
        let opt = p.optimum.as_ref().unwrap();
        assert!(opt.value.abs() < 1e-10);
        assert!(p.value(&vec![0.0; 200]) > 1.0);
        assert_eq!(p.hessian.entry(3, 3), 1.0);
    }

    #[test]
    fn dimension_mismatch_rejected() {
        let h = Hessian::dense(2, vec![1.0, 0.0, 0.0, 1.0]).unwrap();
        assert!(CompositeProblem::quadratic(h, vec![0.0], 0.0, vec![PsiSpec::Zero; 2]).is_err());
        assert!(Hessian::dense(2, vec![1.0, 1.0, 0.0, 1.0]).is_err());
    }
}
