//! Smoothness metadata and the step-size rules for each engine.

use crate::error::{AcdError, Result};
use crate::tolerances::TOLERANCES;

const SQRT_3: f64 = 1.732_050_807_568_877_2;

/// Smoothness constants of the smooth part `f`.
///
/// `cross` holds the full `L_jk` matrix (row-major) when the dimension is small
/// enough to materialize it.
#[derive(Debug, Clone, PartialEq)]
pub struct LipschitzInfo {
    pub global: f64,
    pub diag: Vec<f64>,
    pub max: f64,
    pub residual: f64,
    pub cross: Option<Vec<f64>>,
}

impl LipschitzInfo {
    /// Builds the metadata from rows of `|L_jk|` given as `(column, value)` pairs.
    pub fn from_rows<I, R>(n: usize, rows: I, global: f64, keep_matrix: bool) -> Result<Self>
    where
        I: IntoIterator<Item = R>,
        R: IntoIterator<Item = (usize, f64)>,
    {
        if !(global >= 0.0) {
            return Err(AcdError::invalid(format!("global constant must be >= 0, got {global}")));
        }
        let mut diag = vec![0.0; n];
        let mut max = 0.0f64;
        let mut residual = 0.0f64;
        let mut cross = keep_matrix.then(|| vec![0.0; n * n]);
        for (j, row) in rows.into_iter().enumerate() {
            let mut sq = 0.0;
            for (k, v) in row {
                let v = v.abs();
                max = max.max(v);
                sq += v * v;
                if k == j {
                    diag[j] = v;
                }
                if let Some(m) = cross.as_mut() {
                    m[j * n + k] = v;
                }
            }
            residual = residual.max(sq.sqrt());
        }
        Ok(LipschitzInfo { global, diag, max, residual, cross })
    }

    pub fn max_diag(&self) -> f64 {
        self.diag.iter().copied().fold(0.0, f64::max)
    }

    pub fn entry(&self, j: usize, k: usize) -> Option<f64> {
        let n = self.diag.len();
        self.cross.as_ref().map(|m| m[j * n + k])
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PolicyMode {
    Explicit(f64),
    CcdRule,
    PacdRule,
    SacdRule,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepSizePolicy {
    pub mode: PolicyMode,
    pub gamma: f64,
    /// Largest interference bound admissible at `gamma` (asynchronous rules only).
    pub q_max: Option<u64>,
}

impl StepSizePolicy {
    pub fn explicit(gamma: f64) -> Result<Self> {
        if !(gamma > 0.0) || !gamma.is_finite() {
            return Err(AcdError::invalid(format!("explicit step must be positive, got {gamma}")));
        }
        Ok(StepSizePolicy { mode: PolicyMode::Explicit(gamma), gamma, q_max: None })
    }
}

/// `ceil(log2(n))` for `n >= 1`.
pub fn ceil_log2(n: u64) -> u32 {
    if n <= 1 {
        0
    } else {
        64 - (n - 1).leading_zeros()
    }
}

fn floor_with_slack(v: f64) -> u64 {
    if v <= 0.0 {
        0
    } else {
        (v + TOLERANCES.floor_eps).floor() as u64
    }
}

/// Cyclic rule `max{L, (4/sqrt 3) L ceil(log2 n)}`.
pub fn gamma_ccd(l: f64, n: u64) -> Result<f64> {
    if !(l > 0.0) || !l.is_finite() {
        return Err(AcdError::invalid(format!("L must be positive, got {l}")));
    }
    if n == 0 {
        return Err(AcdError::invalid("dimension must be >= 1"));
    }
    Ok(l.max(4.0 / SQRT_3 * l * ceil_log2(n) as f64))
}

/// Worst-case asynchronous rule. The resolved step is the largest of the
/// windowed-gradient bound, the interference bound, and `4 q L_max` (which is
/// what keeps the amortized potential monotone).
pub fn gamma_pacd(
    l: f64,
    l_max: f64,
    kappa_max: u64,
    r: u64,
    q: u64,
    n: Option<u64>,
) -> Result<StepSizePolicy> {
    if !(l > 0.0) || !(l_max > 0.0) {
        return Err(AcdError::invalid(format!(
            "L and L_max must be positive, got {l} and {l_max}"
        )));
    }
    if kappa_max == 0 || r == 0 {
        return Err(AcdError::invalid("kappa_max and r must be >= 1"));
    }
    if let Some(n) = n {
        if r < n {
            return Err(AcdError::invalid(format!("round length r={r} must be >= n={n}")));
        }
    }
    let window = 16.0 / SQRT_3 * l * (kappa_max as f64).sqrt() * ceil_log2(r) as f64;
    let interference = 8.0 / SQRT_3 * q as f64 * l_max;
    let potential = 4.0 * q as f64 * l_max;
    let gamma = window.max(interference).max(potential);
    if !(gamma > 0.0) {
        // r = 1 and q = 0 leave every bound at zero.
        return Err(AcdError::invalid("all step bounds vanish; use r >= 2 or q >= 1"));
    }
    let q_max = floor_with_slack(gamma * SQRT_3 / (8.0 * l_max));
    Ok(StepSizePolicy { mode: PolicyMode::PacdRule, gamma, q_max: Some(q_max) })
}

/// Largest `q <= floor(9n/100)` with `q <= gamma sqrt(n - q) / (8 sqrt(10) L_res)`.
pub fn sacd_q_max(gamma: f64, l_res: f64, n: u64) -> u64 {
    let denom = 8.0 * (10.0f64).sqrt() * l_res;
    let mut q = 9 * n / 100;
    loop {
        let bound = gamma * ((n - q) as f64).sqrt() / denom;
        if q as f64 <= bound + TOLERANCES.floor_eps || q == 0 {
            return q;
        }
        q -= 1;
    }
}

/// Stochastic asynchronous rule: `gamma = max_j L_j` unless overridden.
pub fn gamma_sacd(
    diag: &[f64],
    l_res: f64,
    n: u64,
    explicit: Option<f64>,
) -> Result<StepSizePolicy> {
    if diag.is_empty() {
        return Err(AcdError::invalid("empty L_j vector"));
    }
    if n == 0 || !(l_res > 0.0) {
        return Err(AcdError::invalid(format!("need n >= 1 and L_res > 0, got {n}, {l_res}")));
    }
    let rule = diag.iter().copied().fold(0.0, f64::max);
    let (mode, gamma) = match explicit {
        Some(g) => {
            if !(g > 0.0) {
                return Err(AcdError::invalid(format!("explicit step must be positive, got {g}")));
            }
            (PolicyMode::Explicit(g), g)
        }
        None => (PolicyMode::SacdRule, rule),
    };
    if !(gamma > 0.0) {
        return Err(AcdError::invalid("max_j L_j is zero"));
    }
    Ok(StepSizePolicy { mode, gamma, q_max: Some(sacd_q_max(gamma, l_res, n)) })
}

/// Parameters of the contraction bound `1 - min{(alpha/2n) muF/(muF + gamma - muf), beta/(2q)}`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RateParams {
    pub alpha: f64,
    /// `None` drops the amortization branch (cyclic descent).
    pub beta: Option<f64>,
    pub n: u64,
    pub q: u64,
    pub gamma: f64,
    pub mu_big: f64,
    pub mu_smooth: f64,
}

pub fn theoretical_rate(p: &RateParams) -> Result<f64> {
    if !(p.mu_big > 0.0) {
        return Err(AcdError::invalid(format!("strong convexity must be positive, got {}", p.mu_big)));
    }
    if p.gamma < p.mu_smooth {
        return Err(AcdError::invalid(format!(
            "gamma={} below smooth strong convexity {}",
            p.gamma, p.mu_smooth
        )));
    }
    if p.n == 0 || !(p.alpha > 0.0) {
        return Err(AcdError::invalid("need n >= 1 and alpha > 0"));
    }
    let progress = p.alpha / (2.0 * p.n as f64) * p.mu_big / (p.mu_big + p.gamma - p.mu_smooth);
    let shrink = match p.beta {
        None => progress,
        Some(beta) => {
            if p.q == 0 {
                return Err(AcdError::invalid("beta branch needs q >= 1"));
            }
            progress.min(beta / (2.0 * p.q as f64))
        }
    };
    Ok(1.0 - shrink)
}

/// `alpha` for each engine family.
pub fn alpha_ccd() -> f64 {
    1.0 / 3.0
}

pub fn alpha_pacd(n: u64, r: u64) -> f64 {
    n as f64 / (3.0 * r as f64)
}


#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    #[test]
    fn ccd_examples() {
        assert!(close(gamma_ccd(1.0, 16).unwrap(), 16.0 / 3f64.sqrt(), 1e-12));
        assert_eq!(gamma_ccd(1.0, 1).unwrap(), 1.0);
        assert!(close(gamma_ccd(2.0, 2).unwrap(), 8.0 / 3f64.sqrt(), 1e-12));
        assert!(gamma_ccd(0.0, 4).is_err());
        assert!(gamma_ccd(-1.0, 4).is_err());
    }

    #[test]
    fn pacd_examples() {
        let p = gamma_pacd(1.0, 1.0, 1, 16, 1, None).unwrap();
        assert!(close(p.gamma, 64.0 / 3f64.sqrt(), 1e-12));
        assert_eq!(p.q_max, Some(8));

        let p = gamma_pacd(1.0, 1.0, 4, 16, 0, None).unwrap();
        assert!(close(p.gamma, 128.0 / 3f64.sqrt(), 1e-12));

        // (8/sqrt3) q L_max = 92.38 beats both 4 q L_max = 80 and the window bound.
        let p = gamma_pacd(0.1, 10.0, 1, 2, 2, None).unwrap();
        assert!(close(p.gamma, 160.0 / 3f64.sqrt(), 1e-9));
        assert!(p.gamma >= 80.0);

        assert!(gamma_pacd(1.0, 1.0, 1, 8, 1, Some(16)).is_err());
    }

    #[test]
    fn sacd_examples() {
        let p = gamma_sacd(&vec![1.0; 10_000], 1.0, 10_000, Some(10.0)).unwrap();
        assert_eq!(p.q_max, Some(39));

        let p = gamma_sacd(&vec![1.0; 100], 1.0, 100, None).unwrap();
        assert_eq!(p.gamma, 1.0);
        assert_eq!(p.q_max, Some(0));

        let p = gamma_sacd(&[3.0, 1.0], 3.0, 2, None).unwrap();
        assert_eq!(p.gamma, 3.0);
        assert_eq!(p.q_max, Some(0));

        assert!(gamma_sacd(&[], 1.0, 2, None).is_err());
    }

    #[test]
    fn rate_examples() {
        let r = theoretical_rate(&RateParams {
            alpha: 1.0,
            beta: None,
            n: 1,
            q: 0,
            gamma: 2.0,
            mu_big: 1.0,
            mu_smooth: 1.0,
        })
        .unwrap();
        assert!(close(r, 0.75, 1e-15));

        let r = theoretical_rate(&RateParams {
            alpha: 1.0 / 3.0,
            beta: None,
            n: 4,
            q: 0,
            gamma: 10.0,
            mu_big: 1.0,
            mu_smooth: 0.0,
        })
        .unwrap();
        assert!(close(r, 1.0 - 1.0 / 24.0 / 11.0, 1e-15));

        let r = theoretical_rate(&RateParams {
            alpha: 0.5,
            beta: Some(0.1),
            n: 10,
            q: 1,
            gamma: 1.0,
            mu_big: 1.0,
            mu_smooth: 1.0,
        })
        .unwrap();
        assert!(close(r, 0.975, 1e-15));

        assert!(theoretical_rate(&RateParams {
            alpha: 1.0,
            beta: None,
            n: 1,
            q: 0,
            gamma: 0.5,
            mu_big: 1.0,
            mu_smooth: 1.0,
        })
        .is_err());
    }

    #[test]
    fn ceil_log2_values() {
        assert_eq!(ceil_log2(1), 0);
        assert_eq!(ceil_log2(2), 1);
        assert_eq!(ceil_log2(3), 2);
        assert_eq!(ceil_log2(16), 4);
        assert_eq!(ceil_log2(17), 5);
        assert_eq!(ceil_log2(128), 7);
    }

    #[test]
    fn lipschitz_from_rows() {
        let rows = vec![vec![(0, 2.0), (1, -1.0)], vec![(0, -1.0), (1, 3.0)]];
        let info = LipschitzInfo::from_rows(2, rows, 3.7, true).unwrap();
        assert_eq!(info.diag, vec![2.0, 3.0]);
        assert_eq!(info.max, 3.0);
        assert!(close(info.residual, 10f64.sqrt(), 1e-15));
        assert_eq!(info.entry(0, 1), Some(1.0));
    }
}
