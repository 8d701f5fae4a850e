//! Lowest eigenpairs of a large real symmetric operator given only its
//! action on vectors.
//!
//! Block Krylov iteration with full reorthogonalization and Rayleigh-Ritz
//! extraction. A block of several start vectors resolves degenerate levels
//! that a single-vector Lanczos run would miss.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug)]
pub struct LanczosOptions {
    pub block_size: usize,
    pub max_basis: usize,
    /// Residual target relative to the operator norm estimate.
    pub tolerance: f64,
}

impl Default for LanczosOptions {
    fn default() -> Self {
        LanczosOptions { block_size: 8, max_basis: 2000, tolerance: 1e-10 }
    }
}

#[derive(Clone, Debug)]
pub struct LowestEigen {
    pub eigenvalues: Vec<f64>,
    /// Columns are eigenvectors.
    pub eigenvectors: DMatrix<f64>,
    pub residuals: Vec<f64>,
    pub basis_size: usize,
}

/// Deterministic, non-symmetric start vectors (golden-ratio sequence), so no
/// symmetry sector of the operator is missed.
fn start_block(dim: usize, count: usize) -> Vec<DVector<f64>> {
    const GOLDEN: f64 = 0.618_033_988_749_895;
    (0..count)
        .map(|b| {
            DVector::from_fn(dim, |i, _| {
                let t = ((i * (b + 1) + 7 * b) as f64 * GOLDEN).fract();
                t - 0.5
            })
        })
        .collect()
}

/// Orthogonalize `v` against `basis` twice; returns the remaining norm.
fn orthogonalize(v: &mut DVector<f64>, basis: &[DVector<f64>]) -> f64 {
    for _ in 0..2 {
        for q in basis {
            let c = q.dot(v);
            v.axpy(-c, q, 1.0);
        }
    }
    v.norm()
}

pub fn lowest<F>(dim: usize, count: usize, apply: F, options: LanczosOptions) -> Result<LowestEigen>
where
    F: Fn(&DVector<f64>) -> DVector<f64>,
{
    if count == 0 || count > dim {
        return Err(Error::Domain(format!("cannot extract {count} eigenpairs of a {dim}-dimensional operator")));
    }
    let max_basis = options.max_basis.min(dim);
    let mut basis: Vec<DVector<f64>> = Vec::new();
    let mut images: Vec<DVector<f64>> = Vec::new();
    // Lower triangle of the projected matrix, one row per basis vector.
    let mut projected: Vec<Vec<f64>> = Vec::new();
    let mut block: Vec<DVector<f64>> = start_block(dim, options.block_size.min(dim));
    let mut norm_estimate: f64 = 0.0;
    let mut last_residual = f64::INFINITY;

    loop {
        for mut v in block.drain(..) {
            if basis.len() >= max_basis {
                break;
            }
            let before = v.norm();
            let after = orthogonalize(&mut v, &basis);
            if after <= 1e-10 * before.max(1e-300) {
                continue;
            }
            v /= after;
            let hv = apply(&v);
            norm_estimate = norm_estimate.max(hv.norm());
            basis.push(v);
            images.push(hv);
            let i = basis.len() - 1;
            let row = (0..=i).map(|j| 0.5 * (basis[i].dot(&images[j]) + basis[j].dot(&images[i]))).collect();
            projected.push(row);
        }
        let m = basis.len();
        if m >= count {
            let mut t = DMatrix::zeros(m, m);
            for (i, row) in projected.iter().enumerate() {
                for (j, &value) in row.iter().enumerate() {
                    t[(i, j)] = value;
                    t[(j, i)] = value;
                }
            }
            let eig = SymmetricEigen::new(t);
            let mut order: Vec<usize> = (0..m).collect();
            order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
            let mut eigenvalues = Vec::with_capacity(count);
            let mut eigenvectors = DMatrix::zeros(dim, count);
            let mut residuals = Vec::with_capacity(count);
            for (col, &i) in order.iter().take(count).enumerate() {
                let s = eig.eigenvectors.column(i);
                let mut y = DVector::zeros(dim);
                let mut hy = DVector::zeros(dim);
                for (k, sk) in s.iter().enumerate() {
                    y.axpy(*sk, &basis[k], 1.0);
                    hy.axpy(*sk, &images[k], 1.0);
                }
                let theta = eig.eigenvalues[i];
                residuals.push((&hy - &y * theta).norm());
                eigenvalues.push(theta);
                eigenvectors.set_column(col, &y);
            }
            let worst = residuals.iter().copied().fold(0.0, f64::max);
            last_residual = worst;
            if worst <= options.tolerance * norm_estimate.max(1.0) || m == dim {
                return Ok(LowestEigen { eigenvalues, eigenvectors, residuals, basis_size: m });
            }
        }
        if basis.len() >= max_basis {
            return Err(Error::Convergence {
                what: format!("block Lanczos for {count} eigenpairs after {} basis vectors", basis.len()),
                residual: last_residual,
            });
        }
        let start = basis.len().saturating_sub(options.block_size);
        block = images[start..].to_vec();
        if block.is_empty() {
            block = start_block(dim, options.block_size);
        }
    }
}
