//! Power iteration for symmetric operators.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub trait SymmetricOperator {
    fn dim(&self) -> usize;
    fn apply(&self, v: &[f64], out: &mut [f64]);
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpectralEstimate {
    pub value: f64,
    pub iterations: usize,
    /// False when the iteration cap was hit before the relative change fell below `tol`.
    pub converged: bool,
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Largest absolute eigenvalue.
///
/// The estimate is `|Av|` for unit `v`, which converges even when `+lambda` and
/// `-lambda` are both extreme (the iterate then oscillates but its image norm
/// does not).
pub fn spectral_norm<A: SymmetricOperator + ?Sized>(op: &A, iterations: usize, tol: f64) -> SpectralEstimate {
    let n = op.dim();
    if n == 0 {
        return SpectralEstimate { value: 0.0, iterations: 0, converged: true };
    }
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
    let mut v: Vec<f64> = (0..n).map(|_| rng.gen::<f64>() - 0.5).collect();
    let s = norm(&v);
    v.iter_mut().for_each(|x| *x /= s);
    let mut w = vec![0.0; n];
    let mut est = 0.0;
    for it in 1..=iterations {
        op.apply(&v, &mut w);
        let next = norm(&w);
        if next == 0.0 {
            return SpectralEstimate { value: 0.0, iterations: it, converged: true };
        }
        for (a, b) in v.iter_mut().zip(&w) {
            *a = b / next;
        }
        if it > 1 && (next - est).abs() <= tol * next {
            return SpectralEstimate { value: next, iterations: it, converged: true };
        }
        est = next;
    }
    SpectralEstimate { value: est, iterations, converged: false }
}

struct Shifted<'a, A: ?Sized> {
    op: &'a A,
    shift: f64,
}

impl<A: SymmetricOperator + ?Sized> SymmetricOperator for Shifted<'_, A> {
    fn dim(&self) -> usize {
        self.op.dim()
    }

    fn apply(&self, v: &[f64], out: &mut [f64]) {
        self.op.apply(v, out);
        for (o, x) in out.iter_mut().zip(v) {
            *o = self.shift * x - *o;
        }
    }
}

/// Smallest eigenvalue of a positive semidefinite operator, via power iteration
/// on `sI - A` with `s` just above the spectral norm.
pub fn smallest_eigenvalue<A: SymmetricOperator + ?Sized>(op: &A, iterations: usize, tol: f64) -> SpectralEstimate {
    let top = spectral_norm(op, iterations, tol);
    let shift = top.value * (1.0 + 1e-3) + 1e-12;
    let inner = spectral_norm(&Shifted { op, shift }, iterations, tol * 1e-2);
    SpectralEstimate {
        value: shift - inner.value,
        iterations: top.iterations + inner.iterations,
        converged: top.converged && inner.converged,
    }
}
