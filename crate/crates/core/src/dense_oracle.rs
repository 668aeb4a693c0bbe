//! Exact dense references for every stage of the pipeline.
//!
//! These routines form `n × n` matrices and are meant for tests, the CLI's
//! `oracle` command and side-by-side comparisons at small `n`.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::gibbs::GibbsDescription;
use crate::sketch::{MatrixSum, RowSample, VDescription};
use crate::smalldense::{self, DenseMatrix};
use crate::solver::{FeasibilityProblem, Verdict};
use crate::store::{SampledMatrix, SamplingAccess};

/// Dimension cap for dense materialization.
pub const REALIZE_CAP: usize = 512;
/// Dimension cap for the dense MMW loop.
pub const MMW_DIM_CAP: usize = 256;
/// Constraint-count cap for the dense MMW loop.
pub const MMW_CONSTRAINT_CAP: usize = 16;

fn check(n: usize, cap: usize) -> Result<()> {
    if n > cap {
        Err(Error::Size { size: n, cap })
    } else {
        Ok(())
    }
}

/// Any sampled matrix as a dense array.
pub fn dense_of<A: SamplingAccess + ?Sized>(a: &A) -> Result<DenseMatrix> {
    let n = a.dim();
    check(n, REALIZE_CAP)?;
    Ok(DenseMatrix::from_fn(n, n, |i, j| a.entry(i, j)))
}

/// Build a store from a dense Hermitian matrix, keeping nonzero upper entries.
pub fn store_of(m: &DenseMatrix, rank_hint: usize) -> Result<SampledMatrix> {
    let n = m.nrows();
    let entries = (0..n)
        .flat_map(|i| (i..n).map(move |j| (i, j)))
        .map(|(i, j)| (i, j, m[(i, j)]))
        .filter(|&(_, _, v)| v != Complex64::default());
    SampledMatrix::build(entries, n, rank_hint)
}

/// `Σ_ℓ A_ℓ`.
pub fn dense_realize(ms: &MatrixSum) -> Result<DenseMatrix> {
    let n = ms.dim();
    check(n, REALIZE_CAP)?;
    Ok(DenseMatrix::from_fn(n, n, |i, j| ms.entry(i, j)))
}

/// `e^{−βA} / Tr e^{−βA}` for Hermitian `A`.
pub fn dense_gibbs(a: &DenseMatrix, beta: f64) -> Result<DenseMatrix> {
    check(a.nrows(), REALIZE_CAP)?;
    let e = smalldense::eigh(a)?;
    let low = e.values.iter().copied().fold(f64::INFINITY, f64::min);
    let w: Vec<f64> = e.values.iter().map(|&x| (-beta * (x - low)).exp()).collect();
    let z: f64 = w.iter().sum();
    let mut scaled = e.vectors.clone();
    for (k, &wk) in w.iter().enumerate() {
        for i in 0..scaled.nrows() {
            scaled[(i, k)] *= wk / z;
        }
    }
    Ok(&scaled * e.vectors.adjoint())
}

/// `Tr[A B]`.
pub fn trace_product(a: &DenseMatrix, b: &DenseMatrix) -> Complex64 {
    let n = a.nrows();
    let mut acc = Complex64::default();
    for i in 0..n {
        for j in 0..n {
            acc += a[(i, j)] * b[(j, i)];
        }
    }
    acc
}

/// `V` as an `n × r̃` array, one row query per row.
pub fn dense_v(v: &VDescription) -> Result<DenseMatrix> {
    let n = v.dim();
    check(n, REALIZE_CAP)?;
    let r = v.rank();
    let mut out = DenseMatrix::zeros(n, r);
    for l in 0..n {
        for (k, z) in v.v_row(l).into_iter().enumerate() {
            out[(l, k)] = z;
        }
    }
    Ok(out)
}

/// The row sketch `S(t,·) = A(i_t,·) / √(p P_{i_t})` of the sum.
pub fn dense_row_sketch(ms: &MatrixSum, rows: &RowSample) -> Result<DenseMatrix> {
    let n = ms.dim();
    check(n, REALIZE_CAP)?;
    let p = rows.len() as f64;
    Ok(DenseMatrix::from_fn(rows.len(), n, |t, j| {
        ms.entry(rows.indices[t], j) / (p * rows.probabilities[t]).sqrt()
    }))
}

/// `S` for the rows behind a [`VDescription`], in draw order.
pub fn dense_sketch_rows(v: &VDescription) -> Result<DenseMatrix> {
    let probs: Vec<f64> = v
        .samples()
        .iter()
        .map(|s| v.probabilities()[v.distinct_rows().binary_search(s).expect("present")])
        .collect();
    dense_row_sketch(
        v.matrix_sum(),
        &RowSample {
            indices: v.samples().to_vec(),
            probabilities: probs,
        },
    )
}

/// `VU` as an `n × r̃` array.
pub fn dense_vu(g: &GibbsDescription) -> Result<Option<DenseMatrix>> {
    match (g.sketch(), g.surrogate()) {
        (Some(v), Some(s)) => Ok(Some(dense_v(v)? * &s.u)),
        _ => Ok(None),
    }
}

/// Every entry of the described state.
pub fn dense_witness(g: &GibbsDescription) -> Result<DenseMatrix> {
    let n = g.dim();
    check(n, REALIZE_CAP)?;
    let mut out = DenseMatrix::zeros(n, n);
    for l in 0..n {
        for j in 0..n {
            out[(l, j)] = g.query_solution_entry(l, j)?;
        }
    }
    Ok(out)
}

/// `F(ρ, σ) = Tr √(√ρ σ √ρ)`.
pub fn fidelity(rho: &DenseMatrix, sigma: &DenseMatrix) -> Result<f64> {
    let root = smalldense::hermitian_function(rho, |x| x.max(0.0).sqrt())?;
    let inner = &root * sigma * &root;
    let inner = (&inner + inner.adjoint()).scale(0.5);
    Ok(smalldense::eigh(&inner)?.values.iter().map(|x| x.max(0.0).sqrt()).sum())
}

/// `Tr |M|` for Hermitian `M`.
pub fn trace_norm(m: &DenseMatrix) -> Result<f64> {
    smalldense::trace_norm(m)
}

#[derive(Clone, Debug)]
pub struct DenseMmwConfig {
    /// `β = beta_scale · ε`.
    pub beta_scale: f64,
    /// Replaces `⌈16 ln n / ε²⌉` when set.
    pub max_iterations: Option<usize>,
    /// A violation is `Tr[A_j ρ] > a_j + threshold_fraction · ε`.
    pub threshold_fraction: f64,
}

impl Default for DenseMmwConfig {
    fn default() -> Self {
        Self {
            beta_scale: 0.25,
            max_iterations: None,
            threshold_fraction: 1.0,
        }
    }
}

#[derive(Clone, Debug)]
pub struct DenseOutcome {
    pub verdict: Verdict,
    pub witness: Option<DenseMatrix>,
    pub iterations_used: usize,
    pub iteration_budget: usize,
    /// `(round, constraint, exact trace)`.
    pub violations: Vec<(usize, usize, f64)>,
}

/// The feasibility loop with exact traces and exact matrix exponentials.
pub fn dense_mmw(problem: &FeasibilityProblem, cfg: &DenseMmwConfig) -> Result<DenseOutcome> {
    let n = problem.n;
    check(n, MMW_DIM_CAP)?;
    check(problem.m(), MMW_CONSTRAINT_CAP)?;
    let dense: Vec<DenseMatrix> = problem
        .constraints
        .iter()
        .map(dense_of)
        .collect::<Result<_>>()?;
    let eps = problem.epsilon;
    let beta = cfg.beta_scale * eps;
    let t_max = cfg.max_iterations.unwrap_or_else(|| problem.default_iterations());
    let mut exponent = DenseMatrix::zeros(n, n);
    let mut rho = DenseMatrix::identity(n, n).scale(1.0 / n as f64);
    let mut violations = Vec::new();
    for t in 0..t_max {
        let hit = dense
            .iter()
            .zip(&problem.bounds)
            .enumerate()
            .map(|(j, (a, &b))| (j, trace_product(a, &rho).re, b))
            .find(|&(_, tr, b)| tr > b + cfg.threshold_fraction * eps);
        let Some((j, tr, _)) = hit else {
            return Ok(DenseOutcome {
                verdict: Verdict::Feasible,
                witness: Some(rho),
                iterations_used: t + 1,
                iteration_budget: t_max,
                violations,
            });
        };
        violations.push((t, j, tr));
        exponent += &dense[j];
        rho = dense_gibbs(&exponent, beta)?;
    }
    Ok(DenseOutcome {
        verdict: Verdict::Infeasible,
        witness: None,
        iterations_used: t_max,
        iteration_budget: t_max,
        violations,
    })
}
