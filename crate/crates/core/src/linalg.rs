//! Symmetric eigenvalue helpers.

use nalgebra::{DMatrix, DVector};

/// Eigenvalues of a symmetric matrix (Householder tridiagonalisation plus implicit QL/QR).
pub fn symmetric_eigenvalues(m: &DMatrix<f64>) -> DVector<f64> {
    m.clone().symmetric_eigenvalues()
}

pub fn min_eigenvalue(m: &DMatrix<f64>) -> f64 {
    if m.nrows() == 0 {
        return 0.0;
    }
    symmetric_eigenvalues(m).min()
}

/// Largest absolute eigenvalue via a dense eigensolve.
pub fn spectral_norm_dense(m: &DMatrix<f64>) -> f64 {
    symmetric_eigenvalues(m).iter().fold(0.0, |acc, v| acc.max(v.abs()))
}

/// Largest absolute eigenvalue of a symmetric operator by Lanczos with full
/// reorthogonalisation. Stops when the extreme Ritz values move by less than `tol`.
pub fn spectral_norm_lanczos(n: usize, matvec: impl Fn(&[f64], &mut [f64]), tol: f64, max_steps: usize) -> f64 {
    if n == 0 {
        return 0.0;
    }
    let steps = max_steps.min(n);
    // deterministic start vector with no special alignment to graph structure
    let mut q: Vec<f64> = (0..n).map(|i| 1.0 + ((i as f64 + 1.0) * 0.618_033_988_75).fract()).collect();
    let norm = q.iter().map(|x| x * x).sum::<f64>().sqrt();
    q.iter_mut().for_each(|x| *x /= norm);
    let mut basis: Vec<Vec<f64>> = Vec::with_capacity(steps);
    let mut alpha = Vec::with_capacity(steps);
    let mut beta: Vec<f64> = Vec::with_capacity(steps);
    let mut w = vec![0.0; n];
    let mut last = f64::NAN;
    for k in 0..steps {
        matvec(&q, &mut w);
        let a: f64 = w.iter().zip(&q).map(|(x, y)| x * y).sum();
        alpha.push(a);
        basis.push(q.clone());
        for _ in 0..2 {
            for b in &basis {
                let c: f64 = w.iter().zip(b).map(|(x, y)| x * y).sum();
                w.iter_mut().zip(b).for_each(|(x, y)| *x -= c * y);
            }
        }
        let bnorm = w.iter().map(|x| x * x).sum::<f64>().sqrt();
        let t = DMatrix::from_fn(k + 1, k + 1, |i, j| {
            if i == j {
                alpha[i]
            } else if i + 1 == j {
                beta[i]
            } else if j + 1 == i {
                beta[j]
            } else {
                0.0
            }
        });
        let est = spectral_norm_dense(&t);
        if bnorm < 1e-12 || (k > 4 && (est - last).abs() <= tol) {
            return est;
        }
        last = est;
        beta.push(bnorm);
        q = w.iter().map(|x| x / bnorm).collect();
    }
    last
}
