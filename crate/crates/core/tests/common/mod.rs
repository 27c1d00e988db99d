#![allow(dead_code)]

use nalgebra::{DMatrix, DVector};
use synthmix::EigenSpec;

/// Feature matrix with entries `sqrt(mu_j) phi_j(x_n)`, so `K = Phi Phi^T`.
pub fn features(spec: &EigenSpec, xs: &[f64]) -> DMatrix<f64> {
    DMatrix::from_fn(xs.len(), spec.j_max(), |n, j| {
        spec.eigenvalue(j + 1).sqrt() * spec.basis_eval(j + 1, xs[n]).unwrap()
    })
}

/// Gradient descent on `(1/N)||y - Phi w||^2 + lambda ||w - w_beta||^2`, the
/// fitted objective written in feature coordinates `w = Phi^T alpha`.
/// Returns the objective value after `steps` iterations.
pub fn gd_objective(phi: &DMatrix<f64>, ys: &[f64], beta: &[f64], lambda: f64, steps: usize) -> f64 {
    let n = ys.len() as f64;
    let y = DVector::from_column_slice(ys);
    let w_beta = phi.transpose() * DVector::from_column_slice(beta);
    let top = (phi.transpose() * phi).symmetric_eigenvalues().max();
    let step = 1.0 / (2.0 * top / n + 2.0 * lambda);
    let mut w = w_beta.clone();
    for _ in 0..steps {
        let grad = phi.transpose() * (phi * &w - &y) * (2.0 / n) + (&w - &w_beta) * (2.0 * lambda);
        w -= grad * step;
    }
    let r = &y - phi * &w;
    r.norm_squared() / n + lambda * (&w - &w_beta).norm_squared()
}
