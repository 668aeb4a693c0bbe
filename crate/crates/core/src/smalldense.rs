//! Dense complex factorizations for the small matrices of the pipeline.
//!
//! Thin wrappers over nalgebra that fix tolerances, report non-convergence
//! as an error and impose a deterministic descending order.

use nalgebra::{DMatrix, SymmetricEigen, QR, SVD};
use num_complex::Complex64;

use crate::error::{Error, Result};

pub type DenseMatrix = DMatrix<Complex64>;

/// Convergence tolerance handed to the iterative factorizations.
pub const TOLERANCE: f64 = 1e-12;
/// Largest accepted dimension.
pub const MAX_DIM: usize = 10_000;
/// Hermiticity tolerance for [`eigh`] inputs.
pub const HERMITIAN_TOL: f64 = 1e-10;

#[derive(Clone, Debug)]
pub struct Svd {
    /// Left singular vectors as columns, `rows × k` with `k = min(rows, cols)`.
    pub u: DenseMatrix,
    /// Nonincreasing, nonnegative.
    pub sigma: Vec<f64>,
    /// Right singular vectors as columns, `cols × k`.
    pub v: DenseMatrix,
}

#[derive(Clone, Debug)]
pub struct Eigh {
    /// Orthonormal eigenvectors as columns.
    pub vectors: DenseMatrix,
    /// Real eigenvalues, nonincreasing.
    pub values: Vec<f64>,
}

fn check_dims(m: &DenseMatrix) -> Result<()> {
    if m.nrows() > MAX_DIM || m.ncols() > MAX_DIM {
        return Err(Error::Shape(format!(
            "{}x{} exceeds the dense limit {MAX_DIM}",
            m.nrows(),
            m.ncols()
        )));
    }
    if m.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
        return Err(Error::Numerical("non-finite entry".into()));
    }
    Ok(())
}

/// Indices that order `values` descending; equal values keep input order.
fn descending_order(values: &[f64]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..values.len()).collect();
    idx.sort_by(|&a, &b| values[b].total_cmp(&values[a]));
    idx
}

fn permute_columns(m: &DenseMatrix, order: &[usize]) -> DenseMatrix {
    DenseMatrix::from_fn(m.nrows(), order.len(), |i, k| m[(i, order[k])])
}

pub fn svd(m: &DenseMatrix) -> Result<Svd> {
    check_dims(m)?;
    let (r, c) = m.shape();
    let k = r.min(c);
    if k == 0 {
        return Ok(Svd {
            u: DenseMatrix::zeros(r, 0),
            sigma: Vec::new(),
            v: DenseMatrix::zeros(c, 0),
        });
    }
    let dec = SVD::try_new_unordered(m.clone(), true, true, TOLERANCE, 100 * r.max(c))
        .ok_or_else(|| Error::Numerical("svd did not converge".into()))?;
    let sigma: Vec<f64> = dec.singular_values.iter().copied().collect();
    let order = descending_order(&sigma);
    let u = dec.u.ok_or_else(|| Error::Internal("svd without u".into()))?;
    let v = dec
        .v_t
        .ok_or_else(|| Error::Internal("svd without v".into()))?
        .adjoint();
    Ok(Svd {
        u: permute_columns(&u, &order),
        sigma: order.iter().map(|&i| sigma[i]).collect(),
        v: permute_columns(&v, &order),
    })
}

/// Largest absolute deviation of `m` from its adjoint.
pub fn hermitian_defect(m: &DenseMatrix) -> f64 {
    if !m.is_square() {
        return f64::INFINITY;
    }
    let n = m.nrows();
    let mut worst: f64 = 0.0;
    for i in 0..n {
        for j in i..n {
            worst = worst.max((m[(i, j)] - m[(j, i)].conj()).norm());
        }
    }
    worst
}

pub fn eigh(m: &DenseMatrix) -> Result<Eigh> {
    check_dims(m)?;
    let defect = hermitian_defect(m);
    if defect > HERMITIAN_TOL {
        return Err(Error::Hermiticity(format!(
            "dense input deviates from its adjoint by {defect:e}"
        )));
    }
    let n = m.nrows();
    if n == 0 {
        return Ok(Eigh {
            vectors: DenseMatrix::zeros(0, 0),
            values: Vec::new(),
        });
    }
    let dec = SymmetricEigen::try_new(m.clone(), TOLERANCE, 100 * n)
        .ok_or_else(|| Error::Numerical("eigh did not converge".into()))?;
    let values: Vec<f64> = dec.eigenvalues.iter().copied().collect();
    let order = descending_order(&values);
    Ok(Eigh {
        vectors: permute_columns(&dec.eigenvectors, &order),
        values: order.iter().map(|&i| values[i]).collect(),
    })
}

/// Thin QR with `R` carrying a nonnegative real diagonal.
pub fn qr(m: &DenseMatrix) -> Result<(DenseMatrix, DenseMatrix)> {
    check_dims(m)?;
    let (r, c) = m.shape();
    if r.min(c) == 0 {
        return Ok((DenseMatrix::zeros(r, 0), DenseMatrix::zeros(0, c)));
    }
    let dec = QR::new(m.clone());
    let mut q = dec.q();
    let mut rr = dec.r();
    for k in 0..q.ncols() {
        let d = rr[(k, k)];
        let phase = if d.norm() > 0.0 { d / d.norm() } else { Complex64::new(1.0, 0.0) };
        for i in 0..q.nrows() {
            q[(i, k)] *= phase;
        }
        for j in 0..rr.ncols() {
            rr[(k, j)] *= phase.conj();
        }
        rr[(k, k)] = Complex64::new(rr[(k, k)].re, 0.0);
    }
    Ok((q, rr))
}

/// Largest singular value.
pub fn spectral_norm(m: &DenseMatrix) -> Result<f64> {
    Ok(svd(m)?.sigma.first().copied().unwrap_or(0.0))
}

/// `Σ |λ_k|` for a Hermitian matrix.
pub fn trace_norm(m: &DenseMatrix) -> Result<f64> {
    Ok(eigh(m)?.values.iter().map(|v| v.abs()).sum())
}

/// `U diag(f(λ)) U†` for Hermitian `m`.
pub fn hermitian_function(m: &DenseMatrix, f: impl Fn(f64) -> f64) -> Result<DenseMatrix> {
    let e = eigh(m)?;
    let n = m.nrows();
    let mut scaled = e.vectors.clone();
    for (k, &lam) in e.values.iter().enumerate() {
        let w = f(lam);
        for i in 0..n {
            scaled[(i, k)] *= w;
        }
    }
    Ok(&scaled * e.vectors.adjoint())
}

/// `‖M‖_F` of the difference between `U†U` and the identity.
pub fn isometry_defect(u: &DenseMatrix) -> f64 {
    let g = u.adjoint() * u;
    (g - DenseMatrix::identity(u.ncols(), u.ncols())).norm()
}
