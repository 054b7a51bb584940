use num_complex::Complex64;

use super::ReceiverError;

/// Exponentially weighted RLS estimator for `y = w^H u`.
///
/// `p` is the inverse correlation matrix, row-major `dim x dim`.
#[derive(Debug, Clone, PartialEq)]
pub struct RlsState {
    pub w: Vec<Complex64>,
    pub p: Vec<Complex64>,
    pub lambda: f64,
    dim: usize,
}

impl RlsState {
    /// `P = I / delta`, weights as given.
    pub fn new(w: Vec<Complex64>, delta: f64, lambda: f64) -> Self {
        let dim = w.len();
        let mut p = vec![Complex64::new(0.0, 0.0); dim * dim];
        for i in 0..dim {
            p[i * dim + i] = Complex64::new(1.0 / delta, 0.0);
        }
        Self { w, p, lambda, dim }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn output(&self, u: &[Complex64]) -> Complex64 {
        self.w.iter().zip(u).map(|(w, x)| w.conj() * x).sum()
    }

    /// Largest deviation of `P` from Hermitian symmetry.
    pub fn hermitian_defect(&self) -> f64 {
        let n = self.dim;
        let mut worst: f64 = 0.0;
        for i in 0..n {
            for j in 0..n {
                worst = worst.max((self.p[i * n + j] - self.p[j * n + i].conj()).norm());
            }
        }
        worst
    }

    pub fn diagonal_positive(&self) -> bool {
        (0..self.dim).all(|i| self.p[i * self.dim + i].re > 0.0)
    }
}

/// One RLS update with a-priori error `e = d - w^H u`:
/// `g = P u / (lambda + u^H P u)`, `w += g conj(e)`,
/// `P = (P - g u^H P) / lambda`, then `P = (P + P^H) / 2`.
pub fn rls_step(state: &mut RlsState, u: &[Complex64], e: Complex64) -> Result<(), ReceiverError> {
    let n = state.dim;
    debug_assert_eq!(u.len(), n);
    let lambda = state.lambda;
    let p = &mut state.p;

    let pu: Vec<Complex64> = (0..n)
        .map(|i| p[i * n..(i + 1) * n].iter().zip(u).map(|(a, b)| a * b).sum())
        .collect();
    let quad: f64 = u.iter().zip(&pu).map(|(a, b)| (a.conj() * b).re).sum();
    let denom = lambda + quad;
    if !(denom > 0.0) || !denom.is_finite() {
        return Err(ReceiverError::Numerical { denom });
    }
    let g: Vec<Complex64> = pu.iter().map(|v| v / denom).collect();
    let ec = e.conj();
    for (w, gi) in state.w.iter_mut().zip(&g) {
        *w += gi * ec;
    }
    // For Hermitian P, u^H P = (P u)^H.
    let inv_lambda = 1.0 / lambda;
    for i in 0..n {
        for j in 0..n {
            let v = &mut p[i * n + j];
            *v = (*v - g[i] * pu[j].conj()) * inv_lambda;
        }
    }
    for i in 0..n {
        p[i * n + i].im = 0.0;
        for j in (i + 1)..n {
            let avg = (p[i * n + j] + p[j * n + i].conj()) * 0.5;
            p[i * n + j] = avg;
            p[j * n + i] = avg.conj();
        }
    }
    Ok(())
}
