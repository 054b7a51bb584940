#![allow(dead_code)]

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use tissue_modem::receiver::{rls_step, RlsState};

/// Direct solve of `(sum l^{n-i} u_i u_i^H + l^n delta I) w = sum l^{n-i} u_i conj(d_i)`.
pub fn weighted_ls(us: &[Vec<Complex64>], ds: &[Complex64], lambda: f64, delta: f64) -> DVector<Complex64> {
    let dim = us[0].len();
    let n = us.len();
    let mut r = DMatrix::<Complex64>::identity(dim, dim) * Complex64::new(lambda.powi(n as i32) * delta, 0.0);
    let mut z = DVector::<Complex64>::zeros(dim);
    for (i, (u, d)) in us.iter().zip(ds).enumerate() {
        let wgt = lambda.powi((n - 1 - i) as i32);
        let u = DVector::from_column_slice(u);
        r += &u * u.adjoint() * Complex64::new(wgt, 0.0);
        z += &u * (d.conj() * wgt);
    }
    r.lu().solve(&z).expect("regularized system is nonsingular")
}

/// Runs `n` RLS updates on a noisy random linear model and returns the
/// largest deviation from the weighted normal-equation solution.
pub fn rls_oracle_deviation(dim: usize, n: usize, lambda: f64, seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut cn = || Complex64::new(rng.random::<f64>() * 2.0 - 1.0, rng.random::<f64>() * 2.0 - 1.0);
    let truth: Vec<Complex64> = (0..dim).map(|_| cn()).collect();
    let delta = 0.01;
    let mut st = RlsState::new(vec![Complex64::new(0.0, 0.0); dim], delta, lambda);
    let mut us = Vec::new();
    let mut ds = Vec::new();
    for _ in 0..n {
        let u: Vec<Complex64> = (0..dim).map(|_| cn()).collect();
        let clean: Complex64 = truth.iter().zip(&u).map(|(w, x)| w.conj() * x).sum();
        let d = clean + cn() * 0.1;
        let e = d - st.output(&u);
        rls_step(&mut st, &u, e).unwrap();
        assert!(st.hermitian_defect() < 1e-9);
        assert!(st.diagonal_positive());
        us.push(u);
        ds.push(d);
    }
    let oracle = weighted_ls(&us, &ds, lambda, delta);
    st.w.iter().zip(oracle.iter()).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max)
}
