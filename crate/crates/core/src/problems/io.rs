//! Problem files.
//!
//! A problem file is TOML with a `kind` key. Generated problems store only their
//! recipe; explicit problems store the data:
//!
//! ```toml
//! kind = "ridge"          # or "lasso", "sparse", "lower_bound"
//! n = 16
//! seed = 0
//! curvature = 1.0
//! ```
//!
//! ```toml
//! kind = "quadratic"
//! hessian = [[2.0, 0.5], [0.5, 1.0]]
//! linear = [1.0, 0.0]
//! constant = 0.0
//! psi = ["abs:0.1", "zero"]
//! ```
//!
//! `kind = "least_squares"` takes `design` (rows of `A`), `target` and `psi`.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{AcdError, Result};
use crate::prox::PsiSpec;

use super::{make_lasso, make_ridge, make_sparse_quadratic, build_lower_bound_matrix, CompositeProblem, Hessian};

/// Deterministic generator inputs.
#[derive(Debug, Clone, PartialEq)]
pub enum Recipe {
    Ridge { n: usize, seed: u64, curvature: f64 },
    Lasso { n: usize, seed: u64, reg_weight: f64 },
    Sparse { n: usize, degree: usize, seed: u64 },
    LowerBound { n: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ProblemFile {
    Ridge { n: usize, seed: u64, curvature: f64 },
    Lasso { n: usize, seed: u64, reg_weight: f64 },
    Sparse { n: usize, degree: usize, seed: u64 },
    LowerBound { n: usize },
    Quadratic { hessian: Vec<Vec<f64>>, linear: Vec<f64>, constant: f64, psi: Vec<String> },
    LeastSquares { design: Vec<Vec<f64>>, target: Vec<f64>, psi: Vec<String> },
}

fn parse_psi(list: &[String]) -> Result<Vec<PsiSpec>> {
    list.iter().map(|s| s.parse()).collect()
}

impl ProblemFile {
    pub fn build(&self) -> Result<CompositeProblem> {
        match self {
            ProblemFile::Ridge { n, seed, curvature } => make_ridge(*n, *seed, *curvature),
            ProblemFile::Lasso { n, seed, reg_weight } => make_lasso(*n, *seed, *reg_weight),
            ProblemFile::Sparse { n, degree, seed } => make_sparse_quadratic(*n, *degree, *seed),
            ProblemFile::LowerBound { n } => {
                let mut p = build_lower_bound_matrix(*n)?.problem()?;
                p.recipe = Some(Recipe::LowerBound { n: *n });
                Ok(p)
            }
            ProblemFile::Quadratic { hessian, linear, constant, psi } => {
                let n = hessian.len();
                if hessian.iter().any(|r| r.len() != n) {
                    return Err(AcdError::Parse("hessian must be square".into()));
                }
                let h = Hessian::dense(n, hessian.concat())?;
                CompositeProblem::quadratic(h, linear.clone(), *constant, parse_psi(psi)?)
            }
            ProblemFile::LeastSquares { design, target, psi } => {
                CompositeProblem::least_squares(design, target, parse_psi(psi)?)
            }
        }
    }

    /// The file that regenerates `p`: its recipe if it has one, its data otherwise.
    pub fn describe(p: &CompositeProblem) -> Result<Self> {
        if let Some(r) = &p.recipe {
            return Ok(match *r {
                Recipe::Ridge { n, seed, curvature } => ProblemFile::Ridge { n, seed, curvature },
                Recipe::Lasso { n, seed, reg_weight } => ProblemFile::Lasso { n, seed, reg_weight },
                Recipe::Sparse { n, degree, seed } => ProblemFile::Sparse { n, degree, seed },
                Recipe::LowerBound { n } => ProblemFile::LowerBound { n },
            });
        }
        let n = p.dim();
        if !matches!(p.hessian, Hessian::Dense { .. }) {
            return Err(AcdError::Unsupported("explicit sparse problems have no file form".into()));
        }
        let hessian = (0..n).map(|j| (0..n).map(|k| p.hessian.entry(j, k)).collect()).collect();
        Ok(ProblemFile::Quadratic {
            hessian,
            linear: p.linear.clone(),
            constant: p.constant,
            psi: p.psi.iter().map(|s| s.to_string()).collect(),
        })
    }
}

pub fn parse_problem(text: &str) -> Result<CompositeProblem> {
    let file: ProblemFile = toml::from_str(text).map_err(|e| AcdError::Parse(e.to_string()))?;
    file.build()
}

pub fn read_problem(path: &Path) -> Result<CompositeProblem> {
    parse_problem(&fs::read_to_string(path)?)
}

pub fn write_problem(p: &CompositeProblem, path: &Path) -> Result<()> {
    let text = toml::to_string(&ProblemFile::describe(p)?).map_err(|e| AcdError::Parse(e.to_string()))?;
    fs::write(path, text)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn generated_roundtrip() {
        for p in [make_ridge(5, 9, 0.25).unwrap(), make_lasso(4, 1, 0.1).unwrap()] {
            let text = toml::to_string(&ProblemFile::describe(&p).unwrap()).unwrap();
            assert_eq!(parse_problem(&text).unwrap(), p);
        }
    }

    #[test]
    fn explicit_roundtrip() {
        let p = CompositeProblem::least_squares(
            &[vec![1.0, 0.3], vec![0.1, 2.0], vec![0.7, -0.2]],
            &[1.0, 0.1, -3.0],
            vec![PsiSpec::AbsWeighted(0.1), PsiSpec::HingeWeighted(0.7)],
        )
        .unwrap();
        let text = toml::to_string(&ProblemFile::describe(&p).unwrap()).unwrap();
        assert_eq!(parse_problem(&text).unwrap(), p);
    }

    #[test]
    fn bad_files_rejected() {
        assert!(parse_problem("kind = \"ridge\"\nn = 3").is_err());
        assert!(parse_problem("kind = \"cubic\"").is_err());
        assert!(parse_problem("kind = \"quadratic\"\nhessian=[[1.0]]\nlinear=[0.0]\nconstant=0.0\npsi=[\"abs:-1\"]").is_err());
    }
}
