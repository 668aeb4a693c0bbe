//! Random fixtures shared by the integration and acceptance tests.
#![allow(dead_code)]

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use lowrank_sdp::dense_oracle::{dense_of, store_of, trace_product};
use lowrank_sdp::io::format_matrix;
use lowrank_sdp::{smalldense, Complex64, DenseMatrix, SampledMatrix};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Entries i.i.d. standard complex Gaussian.
pub fn gaussian<R: Rng>(rows: usize, cols: usize, rng: &mut R) -> DenseMatrix {
    DenseMatrix::from_fn(rows, cols, |_, _| {
        Complex64::new(rng.sample(StandardNormal), rng.sample(StandardNormal))
    })
}

pub fn hermitian<R: Rng>(n: usize, rng: &mut R) -> DenseMatrix {
    let g = gaussian(n, n, rng);
    (&g + g.adjoint()).scale(0.5)
}

/// `k` orthonormal columns; the first is parallel to `lead` when given.
pub fn orthonormal<R: Rng>(n: usize, k: usize, lead: Option<&DenseMatrix>, rng: &mut R) -> DenseMatrix {
    let mut g = gaussian(n, k, rng);
    if let Some(v) = lead {
        g.set_column(0, &v.column(0));
    }
    let (q, _) = smalldense::qr(&g).unwrap();
    q.columns(0, k).into_owned()
}

pub fn outer(v: &DenseMatrix) -> DenseMatrix {
    v * v.adjoint()
}

/// `q₁q₁† − q₂q₂†` for a random orthonormal pair.
pub fn signed_rank2<R: Rng>(n: usize, rng: &mut R) -> DenseMatrix {
    let q = orthonormal(n, 2, None, rng);
    outer(&q.columns(0, 1).into_owned()) - outer(&q.columns(1, 1).into_owned())
}

/// `uu† − ww†` with `w = √c ψ + √(1−c) x`, `x, u ⊥ ψ`; `Tr[A ψψ†] = −c`.
pub fn tilted_pair<R: Rng>(psi: &DenseMatrix, c: f64, rng: &mut R) -> DenseMatrix {
    let q = orthonormal(psi.nrows(), 3, Some(psi), rng);
    let x = q.columns(1, 1).into_owned();
    let u = q.columns(2, 1).into_owned();
    let w = psi.scale(c.sqrt()) + x.scale((1.0 - c).sqrt());
    outer(&u) - outer(&w)
}

/// Rank-2 projector onto `span(√c ψ + √(1−c) x, y)`; `Tr[E ψψ†] = c`.
pub fn tilted_projector<R: Rng>(psi: &DenseMatrix, c: f64, rng: &mut R) -> DenseMatrix {
    let q = orthonormal(psi.nrows(), 3, Some(psi), rng);
    let w = psi.scale(c.sqrt()) + q.columns(1, 1).into_owned().scale((1.0 - c).sqrt());
    outer(&w) + outer(&q.columns(2, 1).into_owned())
}

pub fn unit_vector<R: Rng>(n: usize, rng: &mut R) -> DenseMatrix {
    let g = gaussian(n, 1, rng);
    let norm = g.norm();
    g.unscale(norm)
}

/// A store holding `m`, with the dense matrix it represents exactly.
pub fn stored(m: &DenseMatrix, rank: usize) -> (Arc<SampledMatrix>, DenseMatrix) {
    let s = store_of(m, rank).unwrap();
    let d = dense_of(&s).unwrap();
    (Arc::new(s), d)
}

pub fn write_matrix(dir: &Path, name: &str, m: &SampledMatrix) -> PathBuf {
    let path = dir.join(name);
    std::fs::write(&path, format_matrix(m)).unwrap();
    path
}

/// Write a manifest whose constraint files sit next to it.
pub fn write_manifest(
    dir: &Path,
    name: &str,
    n: usize,
    epsilon: f64,
    mode: &str,
    constraints: &[(&SampledMatrix, f64)],
) -> PathBuf {
    let mut text = format!("n {n}\nm {}\nepsilon {epsilon}\nmode {mode}\n", constraints.len());
    for (k, (m, bound)) in constraints.iter().enumerate() {
        let file = format!("{name}.c{}.txt", k + 1);
        write_matrix(dir, &file, m);
        let _ = writeln!(text, "constraint {} {file} {bound}", k + 1);
    }
    let path = dir.join(format!("{name}.manifest"));
    std::fs::write(&path, text).unwrap();
    path
}

/// A feasible instance `Tr[A_i X] ≤ a_i` with `a_i = Tr[A_i ψψ†]`.
pub struct Planted {
    pub n: usize,
    pub psi: DenseMatrix,
    pub constraints: Vec<Arc<SampledMatrix>>,
    pub dense: Vec<DenseMatrix>,
    pub bounds: Vec<f64>,
}

/// `m` tilted pairs around a random `ψ`. One constraint, chosen at random,
/// has `c ∈ [lo, hi]`; the rest have `c ∈ [0, rest]`.
pub fn planted<R: Rng>(n: usize, m: usize, tight: (f64, f64), rest: f64, rng: &mut R) -> Planted {
    let psi = unit_vector(n, rng);
    let x = outer(&psi);
    let hot = rng.random_range(0..m);
    let mut out = Planted {
        n,
        psi: psi.clone(),
        constraints: Vec::new(),
        dense: Vec::new(),
        bounds: Vec::new(),
    };
    for k in 0..m {
        let c = if k == hot {
            rng.random_range(tight.0..=tight.1)
        } else {
            rng.random_range(0.0..=rest)
        };
        let (s, d) = stored(&tilted_pair(&psi, c, rng), 2);
        out.bounds.push(trace_product(&d, &x).re);
        out.constraints.push(s);
        out.dense.push(d);
    }
    out
}

/// Rank-2 projectors `E_i` with `p_i = Tr[E_i ψψ†]`.
pub struct Shadow {
    pub n: usize,
    pub observables: Vec<Arc<SampledMatrix>>,
    pub dense: Vec<DenseMatrix>,
    pub values: Vec<f64>,
}

pub fn shadow<R: Rng>(n: usize, m: usize, tight: (f64, f64), rest: f64, rng: &mut R) -> Shadow {
    let psi = unit_vector(n, rng);
    let x = outer(&psi);
    let hot = rng.random_range(0..m);
    let mut out = Shadow {
        n,
        observables: Vec::new(),
        dense: Vec::new(),
        values: Vec::new(),
    };
    for k in 0..m {
        let c = if k == hot {
            rng.random_range(tight.0..=tight.1)
        } else {
            rng.random_range(0.0..=rest)
        };
        let (s, d) = stored(&tilted_projector(&psi, c, rng), 2);
        out.values.push(trace_product(&d, &x).re);
        out.observables.push(s);
        out.dense.push(d);
    }
    out
}

/// `e₁e₁†` in dimension `n`.
pub fn e1(n: usize) -> Arc<SampledMatrix> {
    Arc::new(SampledMatrix::build([(0, 0, Complex64::new(1.0, 0.0))], n, 1).unwrap())
}

pub fn fro(m: &DenseMatrix) -> f64 {
    m.norm()
}
