//! Linear algebra support: sparse storage, SPD solvers, dense reduced solves
//! and Gram-Schmidt.

pub mod cg;
pub mod cholesky;
pub mod sparse;

use nalgebra::{DMatrix, DVector};

pub use cg::{pcg, CgOptions};
pub use cholesky::{envelope_size, EnvelopeCholesky};
pub use sparse::{axpy, dot, norm2, SparseMatrix, TripletBuilder};

use crate::error::{Error, Result};

/// Above this many stored factor entries the iterative path is used.
const ENVELOPE_BUDGET: usize = 50_000_000;

/// Reusable solver for one SPD matrix: envelope Cholesky when the envelope fits
/// the memory budget, preconditioned CG otherwise.
#[derive(Debug, Clone)]
pub enum SpdSolver {
    Direct {
        matrix: SparseMatrix,
        factor: EnvelopeCholesky,
    },
    Iterative {
        matrix: SparseMatrix,
    },
}

impl SpdSolver {
    pub fn new(a: &SparseMatrix) -> Result<Self> {
        if envelope_size(a) <= ENVELOPE_BUDGET {
            Ok(SpdSolver::Direct {
                matrix: a.clone(),
                factor: EnvelopeCholesky::factor(a)?,
            })
        } else {
            Ok(SpdSolver::Iterative { matrix: a.clone() })
        }
    }

    pub fn matrix(&self) -> &SparseMatrix {
        match self {
            SpdSolver::Direct { matrix, .. } | SpdSolver::Iterative { matrix } => matrix,
        }
    }

    pub fn solve(&self, b: &[f64]) -> Result<Vec<f64>> {
        match self {
            SpdSolver::Direct { matrix, factor } => {
                if b.len() != factor.dim() {
                    return Err(Error::DimensionMismatch(format!(
                        "rhs length {} for a {}x{} system",
                        b.len(),
                        factor.dim(),
                        factor.dim()
                    )));
                }
                let mut x = factor.solve(b);
                // one step of iterative refinement
                let mut r = b.to_vec();
                axpy(-1.0, &matrix.mul_vec(&x), &mut r);
                let dx = factor.solve(&r);
                axpy(1.0, &dx, &mut x);
                Ok(x)
            }
            SpdSolver::Iterative { matrix } => pcg(matrix, b, CgOptions::default()),
        }
    }
}

/// Solves `A x = b` for sparse SPD `A`.
pub fn solve_spd(a: &SparseMatrix, b: &[f64]) -> Result<Vec<f64>> {
    SpdSolver::new(a)?.solve(b)
}

/// Dense symmetric positive definite solve by Cholesky.
pub fn dense_spd_solve(a: &DMatrix<f64>, b: &[f64]) -> Result<Vec<f64>> {
    if a.nrows() != a.ncols() || a.nrows() != b.len() {
        return Err(Error::DimensionMismatch(format!(
            "dense system {}x{} with rhs {}",
            a.nrows(),
            a.ncols(),
            b.len()
        )));
    }
    if b.is_empty() {
        return Ok(Vec::new());
    }
    let chol = a
        .clone()
        .cholesky()
        .ok_or_else(|| Error::SingularReducedSystem(format!("{}x{} Cholesky failed", a.nrows(), a.ncols())))?;
    let x = chol.solve(&DVector::from_column_slice(b));
    Ok(x.iter().copied().collect())
}

/// Symmetric inner product on coefficient vectors.
pub trait InnerProduct {
    fn inner(&self, a: &[f64], b: &[f64]) -> f64;
}

/// Plain Euclidean inner product.
pub struct Euclidean;

impl InnerProduct for Euclidean {
    fn inner(&self, a: &[f64], b: &[f64]) -> f64 {
        dot(a, b)
    }
}

impl InnerProduct for SparseMatrix {
    fn inner(&self, a: &[f64], b: &[f64]) -> f64 {
        self.bilinear(a, b)
    }
}

/// Relative norm threshold below which a vector counts as linearly dependent.
pub const DEPENDENCE_TOL: f64 = 1e-10;

/// Orthonormalizes `v` against an orthonormal `basis` (modified Gram-Schmidt
/// with one re-orthogonalization pass). Returns `None` if the remainder is
/// below `tol` times the original norm.
pub fn orthonormalize_against<I: InnerProduct + ?Sized>(
    basis: &[Vec<f64>],
    v: &[f64],
    ip: &I,
    tol: f64,
) -> Option<Vec<f64>> {
    let original = ip.inner(v, v).max(0.0).sqrt();
    orthonormalize_against_scaled(basis, v, ip, tol, original)
}

/// Like [`orthonormalize_against`], but the dependence test compares the
/// remainder with `tol * reference` instead of the norm of `v`.
pub fn orthonormalize_against_scaled<I: InnerProduct + ?Sized>(
    basis: &[Vec<f64>],
    v: &[f64],
    ip: &I,
    tol: f64,
    reference: f64,
) -> Option<Vec<f64>> {
    if !(reference > 0.0) {
        return None;
    }
    let mut w = v.to_vec();
    for _ in 0..2 {
        for q in basis {
            let c = ip.inner(q, &w);
            axpy(-c, q, &mut w);
        }
    }
    let remainder = ip.inner(&w, &w).max(0.0).sqrt();
    if !(remainder > 0.0) || remainder < tol * reference {
        return None;
    }
    w.iter_mut().for_each(|x| *x /= remainder);
    Some(w)
}

/// Orthonormal basis of the span of `vectors`; dependent inputs are dropped.
pub fn orthonormalize<I: InnerProduct + ?Sized>(vectors: &[Vec<f64>], ip: &I) -> Vec<Vec<f64>> {
    let mut basis: Vec<Vec<f64>> = Vec::new();
    for v in vectors {
        if let Some(q) = orthonormalize_against(&basis, v, ip, DEPENDENCE_TOL) {
            basis.push(q);
        }
    }
    basis
}

/// Gram matrix `G_ij = (v_i, v_j)`.
pub fn gram_matrix<I: InnerProduct + ?Sized>(vectors: &[Vec<f64>], ip: &I) -> DMatrix<f64> {
    let n = vectors.len();
    DMatrix::from_fn(n, n, |i, j| ip.inner(&vectors[i], &vectors[j]))
}
