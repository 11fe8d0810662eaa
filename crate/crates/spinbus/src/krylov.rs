//! Lanczos iterations with full reorthogonalization.
//!
//! Two consumers: a lowest-eigenpair solver for symmetric operators too
//! large for dense decomposition, and a matrix-exponential propagator
//! computing exp(-iHt)|psi> inside a Krylov subspace.

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::model::SparseOperator;
use crate::{Error, Result};

pub(crate) struct LowestEigen {
    pub values: Vec<f64>,
    pub vectors: Vec<Vec<f64>>,
}

/// Lowest `k` eigenpairs of a symmetric operator via Lanczos.
pub(crate) fn lanczos_lowest(
    op: &SparseOperator,
    k: usize,
    max_iter: usize,
    tol: f64,
) -> LowestEigen {
    let dim = op.dimension();
    let k = k.min(dim);
    let m_max = max_iter.min(dim);

    // Deterministic start vector.
    let mut q = vec![0.0_f64; dim];
    for (i, qi) in q.iter_mut().enumerate() {
        *qi = ((i as f64 + 1.0) * 0.618_033_988_749_895).fract() - 0.5;
    }
    normalize_real(&mut q);

    let mut basis: Vec<Vec<f64>> = vec![q];
    let mut alphas: Vec<f64> = Vec::new();
    let mut betas: Vec<f64> = Vec::new();
    let mut prev = vec![f64::MAX; k];
    let mut w = vec![0.0_f64; dim];

    for j in 0..m_max {
        op.apply_real(&basis[j], &mut w);
        let alpha = dot_real(&basis[j], &w);
        alphas.push(alpha);
        for (wi, qi) in w.iter_mut().zip(&basis[j]) {
            *wi -= alpha * qi;
        }
        if j > 0 {
            let beta = betas[j - 1];
            for (wi, qi) in w.iter_mut().zip(&basis[j - 1]) {
                *wi -= beta * qi;
            }
        }
        for q in &basis {
            let overlap = dot_real(q, &w);
            for (wi, qi) in w.iter_mut().zip(q) {
                *wi -= overlap * qi;
            }
        }
        let beta = norm_real(&w);

        let exhausted = beta < 1e-14 || j + 1 == m_max;
        if exhausted || (j + 1) % 10 == 0 {
            let (vals, _) = tridiag_eigen(&alphas, &betas);
            let current: Vec<f64> = vals.iter().copied().take(k).collect();
            let change = current
                .iter()
                .zip(&prev)
                .map(|(a, b)| (a - b).abs())
                .fold(0.0_f64, f64::max);
            if exhausted || (current.len() == k && change < tol) {
                return ritz_pairs(&alphas, &betas, &basis, k);
            }
            prev = current;
            prev.resize(k, f64::MAX);
        }

        betas.push(beta);
        let mut next = w.clone();
        for v in next.iter_mut() {
            *v /= beta;
        }
        basis.push(next);
    }
    ritz_pairs(&alphas, &betas, &basis, k)
}

fn ritz_pairs(alphas: &[f64], betas: &[f64], basis: &[Vec<f64>], k: usize) -> LowestEigen {
    let (vals, vecs) = tridiag_eigen(alphas, betas);
    let m = alphas.len();
    let dim = basis[0].len();
    let take = k.min(vals.len());
    let mut values = Vec::with_capacity(take);
    let mut vectors = Vec::with_capacity(take);
    for col in 0..take {
        values.push(vals[col]);
        let mut v = vec![0.0_f64; dim];
        for j in 0..m {
            let c = vecs[(j, col)];
            for (vi, qi) in v.iter_mut().zip(&basis[j]) {
                *vi += c * qi;
            }
        }
        normalize_real(&mut v);
        vectors.push(v);
    }
    LowestEigen { values, vectors }
}

/// Eigendecomposition of the symmetric tridiagonal (alphas, betas),
/// sorted ascending. Returns (values, vectors-as-columns).
fn tridiag_eigen(alphas: &[f64], betas: &[f64]) -> (Vec<f64>, DMatrix<f64>) {
    let m = alphas.len();
    let mut t = DMatrix::zeros(m, m);
    for i in 0..m {
        t[(i, i)] = alphas[i];
        if i > 0 {
            t[(i, i - 1)] = betas[i - 1];
            t[(i - 1, i)] = betas[i - 1];
        }
    }
    let eig = t.symmetric_eigen();
    let mut order: Vec<usize> = (0..m).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].partial_cmp(&eig.eigenvalues[b]).unwrap());
    let values: Vec<f64> = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let mut vectors = DMatrix::zeros(m, m);
    for (out_col, &in_col) in order.iter().enumerate() {
        vectors.set_column(out_col, &eig.eigenvectors.column(in_col));
    }
    (values, vectors)
}

/// exp(-iHt)|psi> with adaptive time splitting.
///
/// Each substep builds a Krylov space of at most `max_dim` vectors and
/// accepts once the integrated residual estimate drops below the step's
/// share of `tol`; otherwise the step is halved. Breakdown of the
/// iteration means an invariant subspace was found and the step is exact.
pub(crate) fn expm_multiply(
    op: &SparseOperator,
    psi: &[Complex64],
    t: f64,
    max_dim: usize,
    tol: f64,
) -> Result<Vec<Complex64>> {
    assert!(max_dim >= 2, "Krylov dimension must be at least 2");
    if t == 0.0 {
        return Ok(psi.to_vec());
    }
    let total = t.abs();
    let mut remaining = total;
    let sign = t.signum();
    let initial_norm = norm_complex(psi);
    let mut current = psi.to_vec();
    let mut step = total;
    while remaining > 0.0 {
        let step_tol = tol * step / total;
        match krylov_step(op, &current, sign * step, max_dim, step_tol) {
            Ok(next) => {
                current = next;
                remaining -= step;
                step = step.min(remaining);
                // The assembled step is unitary up to rounding; a real norm
                // drift means the iteration lost orthogonality.
                let drift = (norm_complex(&current) - initial_norm).abs();
                if drift > 1e-8 {
                    return Err(Error::NoConvergence {
                        residual: drift,
                        dim: max_dim,
                    });
                }
            }
            Err(residual) => {
                step /= 2.0;
                if step < total * 1e-12 {
                    return Err(Error::NoConvergence {
                        residual,
                        dim: max_dim,
                    });
                }
            }
        }
    }
    Ok(current)
}

/// One Krylov substep; `Err(residual)` when the target is not met within
/// `max_dim` vectors.
fn krylov_step(
    op: &SparseOperator,
    psi: &[Complex64],
    t: f64,
    max_dim: usize,
    tol: f64,
) -> std::result::Result<Vec<Complex64>, f64> {
    let dim = op.dimension();
    let beta0 = norm_complex(psi);
    if beta0 == 0.0 {
        return Ok(psi.to_vec());
    }
    let mut v0 = psi.to_vec();
    for a in v0.iter_mut() {
        *a /= beta0;
    }
    let mut basis: Vec<Vec<Complex64>> = vec![v0];
    let mut alphas: Vec<f64> = Vec::new();
    let mut betas: Vec<f64> = Vec::new();
    let mut w = vec![Complex64::ZERO; dim];

    let m_cap = max_dim.min(dim);
    let mut best_residual = f64::INFINITY;
    for j in 0..m_cap {
        op.apply(&basis[j], &mut w);
        let alpha = dot_complex(&basis[j], &w).re;
        alphas.push(alpha);
        for (wi, vi) in w.iter_mut().zip(&basis[j]) {
            *wi -= alpha * vi;
        }
        if j > 0 {
            let beta = betas[j - 1];
            for (wi, vi) in w.iter_mut().zip(&basis[j - 1]) {
                *wi -= beta * vi;
            }
        }
        for v in &basis {
            let overlap = dot_complex(v, &w);
            for (wi, vi) in w.iter_mut().zip(v) {
                *wi -= overlap * vi;
            }
        }
        let beta = norm_complex(&w);

        // Invariant subspace: the propagation is exact in this basis.
        if beta < 1e-13 {
            return Ok(assemble(&alphas, &betas, &basis, t, beta0));
        }
        let u = propagated_coefficients(&alphas, &betas, t);
        let residual = beta0 * beta * u[u.len() - 1].norm() * t.abs();
        best_residual = best_residual.min(residual);
        if residual <= tol {
            return Ok(assemble(&alphas, &betas, &basis, t, beta0));
        }

        betas.push(beta);
        let mut next = w.clone();
        for a in next.iter_mut() {
            *a /= beta;
        }
        basis.push(next);
    }
    Err(best_residual)
}

/// exp(-i T t) e1 for the tridiagonal T.
fn propagated_coefficients(alphas: &[f64], betas: &[f64], t: f64) -> Vec<Complex64> {
    let (vals, vecs) = tridiag_eigen(alphas, betas);
    let m = alphas.len();
    let mut u = vec![Complex64::ZERO; m];
    for k in 0..m {
        let phase = Complex64::from_polar(1.0, -vals[k] * t);
        let weight = vecs[(0, k)];
        for i in 0..m {
            u[i] += vecs[(i, k)] * weight * phase;
        }
    }
    u
}

fn assemble(
    alphas: &[f64],
    betas: &[f64],
    basis: &[Vec<Complex64>],
    t: f64,
    beta0: f64,
) -> Vec<Complex64> {
    let u = propagated_coefficients(alphas, betas, t);
    let dim = basis[0].len();
    let mut out = vec![Complex64::ZERO; dim];
    for (j, uj) in u.iter().enumerate() {
        let scale = beta0 * uj;
        for (oi, vi) in out.iter_mut().zip(&basis[j]) {
            *oi += scale * vi;
        }
    }
    out
}

fn dot_real(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm_real(a: &[f64]) -> f64 {
    dot_real(a, a).sqrt()
}

fn normalize_real(a: &mut [f64]) {
    let n = norm_real(a);
    for x in a.iter_mut() {
        *x /= n;
    }
}

fn dot_complex(a: &[Complex64], b: &[Complex64]) -> Complex64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

fn norm_complex(a: &[Complex64]) -> f64 {
    a.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt()
}
