//! Approximate spectral decomposition of `A` on the span of `V`.
//!
//! `B̃ ≈ V†AV` is estimated entrywise with the trace estimator, using the
//! rank-one oracles `V(·,j) V(·,i)†`, and diagonalized as `B̃ = U D U†`. The
//! pair `(VU, D)` then approximates the eigendecomposition of `A` with signs
//! intact, which singular values alone cannot provide.

use std::sync::Arc;

use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::Result;
use crate::rng::{fork_seed, substream, StreamRng};
use crate::sketch::VDescription;
use crate::smalldense::{self, DenseMatrix};
use crate::trace_estimator::{estimate_family, EstimatorConfig, OperatorFamily};

/// Assumed bound on `‖V(·,k)‖`, from the near-isometry of `V`.
pub const V_COLUMN_BOUND: f64 = 1.15;

/// `U` unitary and `D` real descending with `B̃ = U diag(D) U†`.
#[derive(Clone, Debug)]
pub struct SpectralSurrogate {
    pub u: DenseMatrix,
    pub d: Vec<f64>,
}

impl SpectralSurrogate {
    pub fn rank(&self) -> usize {
        self.d.len()
    }
}

/// Rows of `V` over a fixed set of indices, computed once.
pub(crate) struct VRowTable {
    ids: Vec<usize>,
    rows: Vec<Complex64>,
    rank: usize,
}

impl VRowTable {
    pub(crate) fn new(v: &VDescription, mut ids: Vec<usize>) -> Self {
        ids.sort_unstable();
        ids.dedup();
        let rank = v.rank();
        let rows: Vec<Complex64> = ids.par_iter().flat_map_iter(|&l| v.v_row(l)).collect();
        Self { ids, rows, rank }
    }

    #[inline]
    pub(crate) fn row(&self, l: usize) -> &[Complex64] {
        let a = self.ids.binary_search(&l).expect("row outside the precomputed support");
        &self.rows[a * self.rank..(a + 1) * self.rank]
    }
}

/// Rank-one oracles `B_{ij}(x,y) = V(x,j) conj(V(y,i))` for `i ≤ j`.
struct Vav<'a> {
    n: usize,
    table: &'a VRowTable,
    pairs: Vec<(usize, usize)>,
}

impl OperatorFamily for Vav<'_> {
    fn dim(&self) -> usize {
        self.n
    }
    fn len(&self) -> usize {
        self.pairs.len()
    }
    #[inline]
    fn entries_at(&self, x: usize, y: usize, out: &mut [Complex64]) {
        let vx = self.table.row(x);
        let vy = self.table.row(y);
        for (o, &(i, j)) in out.iter_mut().zip(&self.pairs) {
            *o = vx[j] * vy[i].conj();
        }
    }
    fn frobenius_bound(&self) -> f64 {
        V_COLUMN_BOUND * V_COLUMN_BOUND
    }
    fn is_hermitian(&self, k: usize) -> bool {
        let (i, j) = self.pairs[k];
        i == j
    }
    #[inline]
    fn accumulate(&self, x: usize, y: usize, w: Complex64, acc: &mut [Complex64], _: &mut [Complex64]) {
        let vx = self.table.row(x);
        let vy = self.table.row(y);
        let r = vx.len();
        let mut k = 0;
        for i in 0..r {
            let c = vy[i].conj() * w;
            for &vxj in &vx[i..] {
                acc[k] += vxj * c;
                k += 1;
            }
        }
    }
}

/// Estimate `B̃ ≈ V†AV` with `‖B̃ − V†AV‖_F ≤ ε_s` w.p. at least `1 − δ`.
///
/// Each distinct summand gets per-entry error `ε_s/(r̃τ)` and per-entry
/// failure `2δ/(τ(r̃² + r̃))`; all upper-triangle entries of one summand are
/// estimated from one shared stream of draws.
pub fn estimate_vav(
    v: &VDescription,
    eps_s: f64,
    delta: f64,
    rng: &mut StreamRng,
) -> Result<DenseMatrix> {
    let r = v.rank();
    if r == 0 {
        return Ok(DenseMatrix::zeros(0, 0));
    }
    let ms = Arc::clone(v.matrix_sum());
    let tau = ms.tau() as f64;
    let rf = r as f64;
    let cfg = EstimatorConfig::new(eps_s / (rf * tau), 2.0 * delta / (tau * (rf * rf + rf)))?;
    let support: Vec<usize> = ms
        .summands()
        .iter()
        .flat_map(|s| s.matrix.inner().nonempty_rows().iter().copied())
        .collect();
    let table = VRowTable::new(v, support);
    let pairs: Vec<(usize, usize)> = (0..r).flat_map(|i| (i..r).map(move |j| (i, j))).collect();
    let family = Vav {
        n: v.dim(),
        table: &table,
        pairs,
    };

    let seed = fork_seed(rng);
    let mut b = DenseMatrix::zeros(r, r);
    for (d, s) in ms.summands().iter().enumerate() {
        let mut sub = substream(seed, &[d as u64]);
        let est = estimate_family(&s.matrix, &family, &cfg, &mut sub)?;
        let m = s.multiplicity as f64;
        for (&(i, j), z) in family.pairs.iter().zip(est) {
            b[(i, j)] += z * m;
        }
    }
    for i in 0..r {
        for j in 0..i {
            b[(i, j)] = b[(j, i)].conj();
        }
    }
    Ok((&b + b.adjoint()).scale(0.5))
}

/// Diagonalize a Hermitian `B̃`.
pub fn decompose(b: &DenseMatrix) -> Result<SpectralSurrogate> {
    let e = smalldense::eigh(b)?;
    Ok(SpectralSurrogate {
        u: e.vectors,
        d: e.values,
    })
}

/// `ε_s = ε / (400 r²)`.
pub fn default_vav_precision(eps: f64, r: usize) -> f64 {
    eps / (400.0 * (r * r) as f64)
}

/// Worst-case bound on `‖V B̃ V† − A‖` under the theoretical sketch parameters:
/// `(1 + ε/(300r²(τ+1)))² ε/(400r²) + (2 + ε/(300r²(τ+1))) ε/(300r²)`.
pub fn reconstruction_bound(eps: f64, r: usize, tau: usize) -> f64 {
    let r2 = (r * r) as f64;
    let x = eps / (300.0 * r2 * (tau as f64 + 1.0));
    (1.0 + x).powi(2) * eps / (400.0 * r2) + (2.0 + x) * eps / (300.0 * r2)
}
