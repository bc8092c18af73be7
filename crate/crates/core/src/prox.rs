//! The per-coordinate proximal kernel.
//!
//! For a coordinate with current value `x`, partial gradient `g`, step parameter
//! `gamma` and separable term `psi`, the proximal function is
//!
//! ```text
//! W(d) = -g*d - (gamma/2)*d^2 + psi(x) - psi(x + d)
//! ```
//!
//! `prox_step` returns its maximizer `d_hat` and maximum `w_hat`. Every update in
//! every engine goes through this module.

use std::fmt;
use std::str::FromStr;

use crate::error::{AcdError, Result};

/// A univariate convex term applied to one coordinate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PsiSpec {
    Zero,
    /// `w * |x|`
    AbsWeighted(f64),
    /// `(a/2) x^2 + b x`
    Quadratic { a: f64, b: f64 },
    /// `w * max(0, x)`
    HingeWeighted(f64),
}

impl PsiSpec {
    pub fn abs(weight: f64) -> Result<Self> {
        if !(weight >= 0.0) || !weight.is_finite() {
            return Err(AcdError::invalid(format!("abs weight must be >= 0, got {weight}")));
        }
        Ok(PsiSpec::AbsWeighted(weight))
    }

    pub fn quadratic(a: f64, b: f64) -> Result<Self> {
        if !(a >= 0.0) || !a.is_finite() || !b.is_finite() {
            return Err(AcdError::invalid(format!(
                "quadratic curvature must be >= 0 and finite, got a={a}, b={b}"
            )));
        }
        Ok(PsiSpec::Quadratic { a, b })
    }

    pub fn hinge(weight: f64) -> Result<Self> {
        if !(weight >= 0.0) || !weight.is_finite() {
            return Err(AcdError::invalid(format!("hinge weight must be >= 0, got {weight}")));
        }
        Ok(PsiSpec::HingeWeighted(weight))
    }

    /// Checks the convexity constraints on the parameters.
    pub fn validate(&self) -> Result<()> {
        match *self {
            PsiSpec::Zero => Ok(()),
            PsiSpec::AbsWeighted(w) => PsiSpec::abs(w).map(|_| ()),
            PsiSpec::Quadratic { a, b } => PsiSpec::quadratic(a, b).map(|_| ()),
            PsiSpec::HingeWeighted(w) => PsiSpec::hinge(w).map(|_| ()),
        }
    }

    #[inline]
    pub fn eval(&self, x: f64) -> f64 {
        match *self {
            PsiSpec::Zero => 0.0,
            PsiSpec::AbsWeighted(w) => w * x.abs(),
            PsiSpec::Quadratic { a, b } => 0.5 * a * x * x + b * x,
            PsiSpec::HingeWeighted(w) => w * x.max(0.0),
        }
    }

    /// Curvature contributed to the composite objective's strong convexity.
    pub fn curvature(&self) -> f64 {
        match *self {
            PsiSpec::Quadratic { a, .. } => a,
            _ => 0.0,
        }
    }
}

impl fmt::Display for PsiSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            PsiSpec::Zero => write!(f, "zero"),
            PsiSpec::AbsWeighted(w) => write!(f, "abs:{w:?}"),
            PsiSpec::Quadratic { a, b } => write!(f, "quad:{a:?},{b:?}"),
            PsiSpec::HingeWeighted(w) => write!(f, "hinge:{w:?}"),
        }
    }
}

impl FromStr for PsiSpec {
    type Err = AcdError;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let (kind, args) = match s.split_once(':') {
            Some((k, a)) => (k.trim(), a.trim()),
            None => (s, ""),
        };
        let num = |v: &str| -> Result<f64> {
            v.trim()
                .parse::<f64>()
                .map_err(|e| AcdError::Parse(format!("bad number {v:?} in psi {s:?}: {e}")))
        };
        match kind {
            "zero" if args.is_empty() => Ok(PsiSpec::Zero),
            "abs" => PsiSpec::abs(num(args)?),
            "hinge" => PsiSpec::hinge(num(args)?),
            "quad" => {
                let (a, b) = args
                    .split_once(',')
                    .ok_or_else(|| AcdError::Parse(format!("quad psi needs `a,b`: {s:?}")))?;
                PsiSpec::quadratic(num(a)?, num(b)?)
            }
            _ => Err(AcdError::Parse(format!("unknown psi {s:?}"))),
        }
    }
}

/// Maximizer and maximum of the proximal function for one coordinate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProxStep {
    pub d_hat: f64,
    pub w_hat: f64,
}

fn check_gamma(gamma: f64) -> Result<()> {
    if gamma > 0.0 && gamma.is_finite() {
        Ok(())
    } else {
        Err(AcdError::invalid(format!("step parameter must be positive, got {gamma}")))
    }
}

/// `W(d, g, x, gamma, psi)`.
pub fn w_value(d: f64, g: f64, x: f64, gamma: f64, psi: &PsiSpec) -> Result<f64> {
    check_gamma(gamma)?;
    Ok(w_unchecked(d, g, x, gamma, psi))
}

#[inline]
pub(crate) fn w_unchecked(d: f64, g: f64, x: f64, gamma: f64, psi: &PsiSpec) -> f64 {
    -g * d - 0.5 * gamma * d * d + psi.eval(x) - psi.eval(x + d)
}

#[inline]
fn soft_threshold(v: f64, t: f64) -> f64 {
    if v > t {
        v - t
    } else if v < -t {
        v + t
    } else {
        0.0
    }
}

/// Closed-form proximal step.
pub fn prox_step(g: f64, x: f64, gamma: f64, psi: &PsiSpec) -> Result<ProxStep> {
    check_gamma(gamma)?;
    Ok(prox_unchecked(g, x, gamma, psi))
}

/// Displacement only; the hot path of every engine.
#[inline]
pub(crate) fn d_hat_unchecked(g: f64, x: f64, gamma: f64, psi: &PsiSpec) -> f64 {
    match *psi {
        PsiSpec::Zero => -g / gamma,
        PsiSpec::AbsWeighted(w) => soft_threshold(x - g / gamma, w / gamma) - x,
        PsiSpec::Quadratic { a, b } => -(g + b + a * x) / (gamma + a),
        PsiSpec::HingeWeighted(w) => hinge_d_hat(g, x, gamma, w),
    }
}

#[inline]
pub(crate) fn prox_unchecked(g: f64, x: f64, gamma: f64, psi: &PsiSpec) -> ProxStep {
    let d_hat = d_hat_unchecked(g, x, gamma, psi);
    let w_hat = match *psi {
        PsiSpec::Zero => g * g / (2.0 * gamma),
        _ => w_unchecked(d_hat, g, x, gamma, psi),
    };
    // W(0) = 0 bounds the maximum from below; rounding must not break that.
    ProxStep { d_hat, w_hat: w_hat.max(0.0) }
}

// Candidates: the smooth optimum left of the kink (slope 0), right of the kink
// (slope w), and the kink itself at x + d = 0.
fn hinge_d_hat(g: f64, x: f64, gamma: f64, w: f64) -> f64 {
    let psi = PsiSpec::HingeWeighted(w);
    let mut best_d = -x;
    let mut best_w = w_unchecked(best_d, g, x, gamma, &psi);
    let left = -g / gamma;
    if x + left <= 0.0 {
        let v = w_unchecked(left, g, x, gamma, &psi);
        if v > best_w {
            best_d = left;
            best_w = v;
        }
    }
    let right = -(g + w) / gamma;
    if x + right >= 0.0 {
        let v = w_unchecked(right, g, x, gamma, &psi);
        if v > best_w {
            best_d = right;
        }
    }
    best_d
}
