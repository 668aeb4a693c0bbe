//! Row/column sampling over a sum of stored matrices and the approximate
//! singular vectors it yields.
//!
//! For `A = Σ_ℓ A_ℓ`, rows are drawn with
//! `P_i = Σ_ℓ ‖A_ℓ(i,·)‖² / Σ_ℓ ‖A_ℓ‖²_F` and, given `p` sampled rows, columns
//! with the mixture `P'_j = (1/p) Σ_t Q_{j|i_t}` where
//! `Q_{j|i} = Σ_ℓ |A_ℓ(i,j)|² / Σ_ℓ ‖A_ℓ(i,·)‖²`. The rescaled `p × p` sample
//! `W(s,t) = A(i_s, j_t) / (p √(P_{i_s} P'_{j_t}))` is factored and its top
//! left singular vectors `u_k` define `V(·,k) = S† u_k / σ_k` with
//! `S(t,·) = A(i_t,·) / √(p P_{i_t})`. `V` is never materialized.
//!
//! Repeated indices are merged before the SVD: with `m_a` copies of row `a`
//! and `m'_b` of column `b`, the matrix
//! `C(a,b) = √(m_a m'_b) A(a,b) / (p √(P_a P'_b))` has the nonzero singular
//! values of `W`, and a left singular vector `y` of `C` lifts to `W`'s as
//! `u(s) = y_{a(s)} / √m_{a(s)}`.

use std::sync::Arc;

use num_complex::Complex64;
use rand::Rng;

use crate::error::{Error, Result};
use crate::smalldense::{self, DenseMatrix};
use crate::store::{SamplingAccess, SignedMatrix};

/// One distinct term of a [`MatrixSum`], repeated `multiplicity` times.
#[derive(Clone, Debug)]
pub struct Summand {
    pub matrix: SignedMatrix,
    pub multiplicity: usize,
}

/// `A = Σ_d multiplicity_d · A_d`, a sum of `τ = Σ_d multiplicity_d` terms.
#[derive(Clone, Debug)]
pub struct MatrixSum {
    n: usize,
    rank_bound: usize,
    summands: Vec<Summand>,
    /// `multiplicity_d · ‖A_d‖²_F`.
    weights: Vec<f64>,
    total: f64,
}

impl MatrixSum {
    pub fn new(summands: Vec<Summand>, rank_bound: usize) -> Result<Self> {
        let first = summands
            .first()
            .ok_or_else(|| Error::Shape("a matrix sum needs at least one summand".into()))?;
        let n = first.matrix.dim();
        if let Some(bad) = summands.iter().find(|s| s.matrix.dim() != n) {
            return Err(Error::Shape(format!(
                "summand of dimension {} in a sum of dimension {n}",
                bad.matrix.dim()
            )));
        }
        if summands.iter().any(|s| s.multiplicity == 0) {
            return Err(Error::Shape("summand multiplicity must be positive".into()));
        }
        let weights: Vec<f64> = summands
            .iter()
            .map(|s| s.multiplicity as f64 * s.matrix.frobenius_norm_sq())
            .collect();
        let total = weights.iter().sum();
        Ok(Self {
            n,
            rank_bound: rank_bound.max(1),
            summands,
            weights,
            total,
        })
    }

    /// Group a list of terms, merging repeats of the same storage and sign.
    /// Distinct terms keep the order of their first appearance.
    pub fn from_terms(terms: &[SignedMatrix], rank_bound: usize) -> Result<Self> {
        let mut summands: Vec<Summand> = Vec::new();
        for t in terms {
            match summands.iter_mut().find(|s| {
                Arc::ptr_eq(s.matrix.inner(), t.inner()) && s.matrix.is_negated() == t.is_negated()
            }) {
                Some(s) => s.multiplicity += 1,
                None => summands.push(Summand {
                    matrix: t.clone(),
                    multiplicity: 1,
                }),
            }
        }
        Self::new(summands, rank_bound)
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    /// Number of terms counted with multiplicity.
    pub fn tau(&self) -> usize {
        self.summands.iter().map(|s| s.multiplicity).sum()
    }

    pub fn rank_bound(&self) -> usize {
        self.rank_bound
    }

    pub fn summands(&self) -> &[Summand] {
        &self.summands
    }

    /// `Σ_ℓ ‖A_ℓ‖²_F` over all `τ` terms.
    pub fn frobenius_sq_total(&self) -> f64 {
        self.total
    }

    /// `A(i, j)`.
    #[inline]
    pub fn entry(&self, i: usize, j: usize) -> Complex64 {
        self.summands
            .iter()
            .map(|s| s.matrix.entry(i, j) * s.multiplicity as f64)
            .sum()
    }

    /// `Σ_ℓ ‖A_ℓ(i,·)‖²`.
    pub fn row_weight(&self, i: usize) -> f64 {
        self.summands
            .iter()
            .map(|s| s.multiplicity as f64 * s.matrix.row_norm_sq(i))
            .sum()
    }

    /// `Σ_ℓ |A_ℓ(i,j)|²`.
    pub fn entry_weight(&self, i: usize, j: usize) -> f64 {
        self.summands
            .iter()
            .map(|s| s.multiplicity as f64 * s.matrix.entry(i, j).norm_sqr())
            .sum()
    }

    /// Row probability `P_i`.
    pub fn row_probability(&self, i: usize) -> f64 {
        if self.total == 0.0 {
            0.0
        } else {
            self.row_weight(i) / self.total
        }
    }

    /// Column probability `Q_{j|i}` given row `i`.
    pub fn column_probability(&self, i: usize, j: usize) -> f64 {
        let w = self.row_weight(i);
        if w == 0.0 {
            0.0
        } else {
            self.entry_weight(i, j) / w
        }
    }

    fn pick<R: Rng + ?Sized>(weights: &[f64], total: f64, rng: &mut R) -> usize {
        let mut target = rng.random::<f64>() * total;
        let mut last = 0;
        for (d, &w) in weights.iter().enumerate() {
            if w <= 0.0 {
                continue;
            }
            last = d;
            if target < w {
                return d;
            }
            target -= w;
        }
        last
    }

    /// Draw one row index from `P`: a term `∝ ‖A_ℓ‖²_F`, then a row of it.
    pub fn sample_row<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<usize> {
        if self.total <= 0.0 {
            return Err(Error::ZeroMass("every summand is zero".into()));
        }
        let d = Self::pick(&self.weights, self.total, rng);
        self.summands[d].matrix.sample_row(rng)
    }

    /// Draw one column from `Q_{·|i}`: a term `∝ ‖A_ℓ(i,·)‖²`, then an entry
    /// of its row `i`.
    pub fn sample_column<R: Rng + ?Sized>(&self, i: usize, rng: &mut R) -> Result<usize> {
        let w: Vec<f64> = self
            .summands
            .iter()
            .map(|s| s.multiplicity as f64 * s.matrix.row_norm_sq(i))
            .collect();
        let total: f64 = w.iter().sum();
        if total <= 0.0 {
            return Err(Error::ZeroMass(format!("row {i} is empty in every summand")));
        }
        let d = Self::pick(&w, total, rng);
        self.summands[d].matrix.sample_entry_in_row(i, rng)
    }
}

/// Sampled row indices with their probabilities `P_{i_t}`.
#[derive(Clone, Debug, PartialEq)]
pub struct RowSample {
    pub indices: Vec<usize>,
    pub probabilities: Vec<f64>,
}

impl RowSample {
    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    /// `Σ_ℓ ‖S_ℓ‖²_F` for the row sketch `S_ℓ(t,·) = A_ℓ(i_t,·)/√(p P_{i_t})`.
    pub fn sketch_frobenius_sq(&self, ms: &MatrixSum) -> f64 {
        let p = self.len() as f64;
        self.indices
            .iter()
            .zip(&self.probabilities)
            .map(|(&i, &pr)| ms.row_weight(i) / (p * pr))
            .sum()
    }
}

pub fn sample_rows<R: Rng + ?Sized>(ms: &MatrixSum, p: usize, rng: &mut R) -> Result<RowSample> {
    let mut indices = Vec::with_capacity(p);
    let mut probabilities = Vec::with_capacity(p);
    for _ in 0..p {
        let i = ms.sample_row(rng)?;
        let pr = ms.row_probability(i);
        if pr <= 0.0 {
            return Err(Error::Internal(format!("sampled row {i} has zero probability")));
        }
        indices.push(i);
        probabilities.push(pr);
    }
    Ok(RowSample {
        indices,
        probabilities,
    })
}

/// Draw `rows.len()` columns from the mixture `(1/p) Σ_t Q_{·|i_t}`.
pub fn sample_cols<R: Rng + ?Sized>(
    ms: &MatrixSum,
    rows: &RowSample,
    rng: &mut R,
) -> Result<Vec<usize>> {
    if rows.is_empty() {
        return Err(Error::Shape("no sampled rows".into()));
    }
    let p = rows.len();
    (0..p)
        .map(|_| {
            let t = rng.random_range(0..p);
            ms.sample_column(rows.indices[t], rng)
        })
        .collect()
}

/// Sample size `p` and singular-value filter `γ`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SketchParams {
    pub p: usize,
    pub gamma: f64,
}

impl SketchParams {
    pub fn new(p: usize, gamma: f64) -> Result<Self> {
        if p == 0 {
            return Err(Error::Config("sketch size p must be positive".into()));
        }
        if !(gamma > 0.0 && gamma.is_finite()) {
            return Err(Error::Config(format!("gamma must be positive, got {gamma}")));
        }
        Ok(Self { p, gamma })
    }

    /// `p = ⌈50 τ² r² / ε²⌉`, `γ = ε² / (30 τ² r²)`.
    pub fn scaled(tau: usize, r: usize, eps: f64) -> Result<Self> {
        let tr2 = (tau * tau * r * r) as f64;
        Self::new((50.0 * tr2 / (eps * eps)).ceil() as usize, eps * eps / (30.0 * tr2))
    }

    /// The worst-case constants: `p = 2·10²⁰ τ¹² r¹⁹ / ε⁶`,
    /// `γ = ε² / (3·10⁶ τ² r⁶)`, as real numbers.
    pub fn paper_formula(tau: usize, r: usize, eps: f64) -> (f64, f64) {
        let (t, r) = (tau as f64, r as f64);
        let p = 2e20 * t.powi(12) * r.powi(19) / eps.powi(6);
        let gamma = eps * eps / (3e6 * t * t * r.powi(6));
        (p, gamma)
    }

    /// [`paper_formula`](Self::paper_formula) rounded up, refused when `p`
    /// exceeds `p_max`.
    pub fn paper(tau: usize, r: usize, eps: f64, p_max: usize) -> Result<Self> {
        let (p, gamma) = Self::paper_formula(tau, r, eps);
        let p = p.ceil();
        if !(p <= p_max as f64) {
            return Err(Error::Config(format!(
                "the paper preset needs p = {p:.3e} sampled rows, above the limit {p_max}"
            )));
        }
        Self::new(p as usize, gamma)
    }

    /// Keep `p` at most `p_max`.
    pub fn capped(self, p_max: usize) -> Self {
        Self {
            p: self.p.min(p_max.max(1)),
            ..self
        }
    }
}

/// Succinct description of the approximate singular vectors `V`.
#[derive(Clone, Debug)]
pub struct VDescription {
    ms: Arc<MatrixSum>,
    p: usize,
    /// Sampled row indices in draw order.
    samples: Vec<usize>,
    /// Distinct sampled rows, ascending.
    rows: Vec<usize>,
    multiplicities: Vec<usize>,
    probabilities: Vec<f64>,
    sigma: Vec<f64>,
    /// `y[a][k]`: left singular vectors of the merged matrix, row-major.
    y: Vec<Complex64>,
    /// `coef[a][k] = √m_a y_a(k) / (√(p P_a) σ_k)`, row-major.
    coef: Vec<Complex64>,
}

impl VDescription {
    /// Assemble from stored parts; `y` is `rows.len() × sigma.len()`
    /// row-major. All derived quantities are recomputed here so a description
    /// rebuilt from a dump answers queries bit-identically.
    pub fn from_parts(
        ms: Arc<MatrixSum>,
        samples: Vec<usize>,
        probabilities: Vec<f64>,
        sigma: Vec<f64>,
        y: Vec<Complex64>,
    ) -> Result<Self> {
        let p = samples.len();
        let mut rows = samples.clone();
        rows.sort_unstable();
        rows.dedup();
        let mut multiplicities = vec![0; rows.len()];
        for s in &samples {
            let a = rows.binary_search(s).expect("present");
            multiplicities[a] += 1;
        }
        let k = sigma.len();
        if probabilities.len() != rows.len() || y.len() != rows.len() * k {
            return Err(Error::Shape(format!(
                "description with {} distinct rows, {} probabilities, {} singular values and {} vector entries",
                rows.len(),
                probabilities.len(),
                k,
                y.len()
            )));
        }
        if let Some(&bad) = rows.iter().find(|&&i| i >= ms.dim()) {
            return Err(Error::Index(format!("row {bad} outside dimension {}", ms.dim())));
        }
        if probabilities.iter().any(|&pr| !(pr > 0.0)) {
            return Err(Error::Internal("a sampled row has zero probability".into()));
        }
        if sigma.iter().any(|&s| !(s > 0.0)) {
            return Err(Error::Internal("a retained singular value is not positive".into()));
        }
        let mut coef = vec![Complex64::default(); y.len()];
        for a in 0..rows.len() {
            let scale = (multiplicities[a] as f64).sqrt() / (p as f64 * probabilities[a]).sqrt();
            for kk in 0..k {
                coef[a * k + kk] = y[a * k + kk] * (scale / sigma[kk]);
            }
        }
        Ok(Self {
            ms,
            p,
            samples,
            rows,
            multiplicities,
            probabilities,
            sigma,
            y,
            coef,
        })
    }

    pub fn dim(&self) -> usize {
        self.ms.dim()
    }

    /// Number of retained singular triplets `r̃`.
    pub fn rank(&self) -> usize {
        self.sigma.len()
    }

    pub fn p(&self) -> usize {
        self.p
    }

    pub fn matrix_sum(&self) -> &Arc<MatrixSum> {
        &self.ms
    }

    /// Sampled row indices in draw order.
    pub fn samples(&self) -> &[usize] {
        &self.samples
    }

    pub fn distinct_rows(&self) -> &[usize] {
        &self.rows
    }

    pub fn multiplicities(&self) -> &[usize] {
        &self.multiplicities
    }

    /// `P_a` for each distinct row.
    pub fn probabilities(&self) -> &[f64] {
        &self.probabilities
    }

    pub fn sigma(&self) -> &[f64] {
        &self.sigma
    }

    /// Merged singular vectors, `distinct_rows × rank` row-major.
    pub fn merged_vectors(&self) -> &[Complex64] {
        &self.y
    }

    /// The left singular vector `u_k ∈ ℂᵖ` of `W`, in draw order.
    pub fn u(&self, k: usize) -> Vec<Complex64> {
        let r = self.rank();
        self.samples
            .iter()
            .map(|s| {
                let a = self.rows.binary_search(s).expect("present");
                self.y[a * r + k] / (self.multiplicities[a] as f64).sqrt()
            })
            .collect()
    }

    /// Row `ℓ` of `V`: `V(ℓ,k) = Σ_s conj(A(i_s,ℓ)) u_k(s) / (√(p P_{i_s}) σ_k)`.
    pub fn v_row(&self, l: usize) -> Vec<Complex64> {
        let r = self.rank();
        let mut out = vec![Complex64::default(); r];
        for (a, &i) in self.rows.iter().enumerate() {
            let x = self.ms.entry(i, l);
            if x == Complex64::default() {
                continue;
            }
            let x = x.conj();
            for (o, c) in out.iter_mut().zip(&self.coef[a * r..(a + 1) * r]) {
                *o += x * c;
            }
        }
        out
    }

    pub fn query_v_entry(&self, l: usize, k: usize) -> Result<Complex64> {
        if l >= self.dim() || k >= self.rank() {
            return Err(Error::Index(format!(
                "V({l}, {k}) outside {}x{}",
                self.dim(),
                self.rank()
            )));
        }
        Ok(self.v_row(l)[k])
    }
}

/// Compressed sketch with repeated rows and columns merged.
#[derive(Clone, Debug)]
pub struct MergedSketch {
    pub rows: RowSample,
    pub columns: Vec<usize>,
    pub distinct_rows: Vec<usize>,
    pub row_multiplicities: Vec<usize>,
    pub row_probabilities: Vec<f64>,
    pub distinct_columns: Vec<usize>,
    pub column_multiplicities: Vec<usize>,
    /// `P'_j` for each distinct column.
    pub column_probabilities: Vec<f64>,
    /// `C(a,b)`, the merged form of `W`.
    pub c: DenseMatrix,
    /// `Σ_ℓ ‖W_ℓ‖²_F`.
    pub w_frobenius_sq: f64,
}

fn group(indices: &[usize]) -> (Vec<usize>, Vec<usize>) {
    let mut distinct = indices.to_vec();
    distinct.sort_unstable();
    distinct.dedup();
    let mut counts = vec![0; distinct.len()];
    for i in indices {
        counts[distinct.binary_search(i).expect("present")] += 1;
    }
    (distinct, counts)
}

/// Sample rows and columns and assemble the merged `W`.
pub fn sample_sketch<R: Rng + ?Sized>(ms: &MatrixSum, p: usize, rng: &mut R) -> Result<MergedSketch> {
    let rows = sample_rows(ms, p, rng)?;
    let columns = sample_cols(ms, &rows, rng)?;
    let (distinct_rows, row_multiplicities) = group(&rows.indices);
    let (distinct_columns, column_multiplicities) = group(&columns);
    let row_probabilities: Vec<f64> = distinct_rows.iter().map(|&i| ms.row_probability(i)).collect();
    let pf = p as f64;

    // P'_j = (1/p) Σ_a m_a Q_{j|a}; row weights are shared across columns.
    let row_weights: Vec<f64> = distinct_rows.iter().map(|&i| ms.row_weight(i)).collect();
    let column_probabilities: Vec<f64> = distinct_columns
        .iter()
        .map(|&j| {
            distinct_rows
                .iter()
                .zip(&row_multiplicities)
                .zip(&row_weights)
                .map(|((&i, &m), &w)| m as f64 * ms.entry_weight(i, j) / w)
                .sum::<f64>()
                / pf
        })
        .collect();
    if column_probabilities.iter().any(|&q| !(q > 0.0)) {
        return Err(Error::Internal("a sampled column has zero probability".into()));
    }

    let (nr, nc) = (distinct_rows.len(), distinct_columns.len());
    let mut c = DenseMatrix::zeros(nr, nc);
    let mut w_frobenius_sq = 0.0;
    for a in 0..nr {
        let i = distinct_rows[a];
        let ma = row_multiplicities[a] as f64;
        for b in 0..nc {
            let j = distinct_columns[b];
            let mb = column_multiplicities[b] as f64;
            let denom = pf * (row_probabilities[a] * column_probabilities[b]).sqrt();
            c[(a, b)] = ms.entry(i, j) * ((ma * mb).sqrt() / denom);
            w_frobenius_sq += ma * mb * ms.entry_weight(i, j) / (denom * denom);
        }
    }
    Ok(MergedSketch {
        rows,
        columns,
        distinct_rows,
        row_multiplicities,
        row_probabilities,
        distinct_columns,
        column_multiplicities,
        column_probabilities,
        c,
        w_frobenius_sq,
    })
}

/// Factor a merged sketch into a [`VDescription`].
pub fn describe(ms: Arc<MatrixSum>, sk: &MergedSketch, gamma: f64) -> Result<VDescription> {
    let p = sk.rows.len();
    let r_hat = p.min(ms.tau() * ms.rank_bound());
    let svd = smalldense::svd(&sk.c)?;
    let threshold = gamma * sk.w_frobenius_sq;
    let kept: Vec<usize> = (0..svd.sigma.len().min(r_hat))
        .filter(|&k| svd.sigma[k] > 0.0 && svd.sigma[k] * svd.sigma[k] >= threshold)
        .collect();
    if kept.is_empty() {
        return Err(Error::EmptySketch);
    }
    let nr = sk.distinct_rows.len();
    let r = kept.len();
    let mut y = vec![Complex64::default(); nr * r];
    for a in 0..nr {
        for (kk, &k) in kept.iter().enumerate() {
            y[a * r + kk] = svd.u[(a, k)];
        }
    }
    VDescription::from_parts(
        ms,
        sk.rows.indices.clone(),
        sk.row_probabilities.clone(),
        kept.iter().map(|&k| svd.sigma[k]).collect(),
        y,
    )
}

/// Sample, filter and factor: the full approximate singular-vector step.
pub fn build_sketch<R: Rng + ?Sized>(
    ms: Arc<MatrixSum>,
    params: &SketchParams,
    rng: &mut R,
) -> Result<VDescription> {
    if ms.frobenius_sq_total() <= 0.0 {
        return Err(Error::ZeroMass("every summand is zero".into()));
    }
    let sk = sample_sketch(&ms, params.p, rng)?;
    describe(ms, &sk, params.gamma)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::seeded;
    use crate::store::SampledMatrix;

    fn c(re: f64) -> Complex64 {
        Complex64::new(re, 0.0)
    }

    fn signed(entries: &[(usize, usize, f64)], n: usize) -> SignedMatrix {
        SampledMatrix::build(entries.iter().map(|&(i, j, v)| (i, j, c(v))), n, 2)
            .unwrap()
            .into()
    }

    #[test]
    fn scaled_params_follow_the_formula() {
        let s = SketchParams::scaled(2, 2, 0.5).unwrap();
        assert_eq!(s.p, 3200);
        assert!((s.gamma - 0.25 / 480.0).abs() < 1e-18);
    }

    #[test]
    fn paper_formula_values() {
        let (p, g) = SketchParams::paper_formula(1, 1, 1.0);
        assert_eq!(p, 2e20);
        assert_eq!(g, 1.0 / 3e6);
        let (p, g) = SketchParams::paper_formula(2, 3, 0.5);
        assert_eq!(p, 2e20 * 4096.0 * 3f64.powi(19) / 0.015625);
        assert_eq!(g, 0.25 / (3e6 * 4.0 * 729.0));
        assert!(matches!(SketchParams::paper(1, 1, 0.5, 1 << 20), Err(Error::Config(_))));
    }

    #[test]
    fn repeats_are_merged_into_multiplicities() {
        let a = signed(&[(0, 0, 1.0)], 2);
        let b = signed(&[(1, 1, 1.0)], 2);
        let ms = MatrixSum::from_terms(&[a.clone(), b.clone(), a.clone(), a.negate()], 1).unwrap();
        assert_eq!(ms.summands().len(), 3);
        assert_eq!(ms.summands()[0].multiplicity, 2);
        assert_eq!(ms.tau(), 4);
        assert_eq!(ms.entry(0, 0), c(1.0));
        assert_eq!(ms.frobenius_sq_total(), 4.0);
    }

    #[test]
    fn single_summand_row_probability_is_row_norm_ratio() {
        let a = signed(&[(0, 0, 1.0), (0, 1, 2.0), (2, 2, 3.0)], 3);
        let ms = MatrixSum::from_terms(std::slice::from_ref(&a), 2).unwrap();
        let fro = a.frobenius_norm_sq();
        for i in 0..3 {
            assert_eq!(ms.row_probability(i), a.row_norm_sq(i) / fro);
        }
    }

    #[test]
    fn rank_one_summand_is_recovered() {
        let e1 = signed(&[(0, 0, 1.0)], 5);
        let ms = Arc::new(MatrixSum::from_terms(&[e1], 1).unwrap());
        let v = build_sketch(ms, &SketchParams::new(7, 1e-3).unwrap(), &mut seeded(2)).unwrap();
        assert_eq!(v.rank(), 1);
        assert!((v.query_v_entry(0, 0).unwrap().norm() - 1.0).abs() < 1e-8);
        for l in 1..5 {
            assert_eq!(v.query_v_entry(l, 0).unwrap(), c(0.0));
        }
        assert!(v.query_v_entry(5, 0).is_err());
    }

    #[test]
    fn zero_sum_is_refused() {
        let z: SignedMatrix = SampledMatrix::build(std::iter::empty(), 2, 1).unwrap().into();
        let ms = Arc::new(MatrixSum::from_terms(&[z], 1).unwrap());
        assert!(matches!(
            build_sketch(ms, &SketchParams::new(3, 0.1).unwrap(), &mut seeded(0)),
            Err(Error::ZeroMass(_))
        ));
    }

    #[test]
    fn huge_gamma_empties_the_sketch() {
        let a = signed(&[(0, 0, 1.0), (1, 1, 0.5)], 2);
        let ms = Arc::new(MatrixSum::from_terms(&[a], 2).unwrap());
        let r = build_sketch(ms, &SketchParams::new(10, 10.0).unwrap(), &mut seeded(0));
        assert!(matches!(r, Err(Error::EmptySketch)));
    }

    #[test]
    fn u_vectors_lift_with_unit_norm() {
        let a = signed(&[(0, 0, 1.0), (1, 1, -0.5), (0, 2, 0.3)], 4);
        let ms = Arc::new(MatrixSum::from_terms(&[a], 2).unwrap());
        let v = build_sketch(ms, &SketchParams::new(12, 1e-6).unwrap(), &mut seeded(5)).unwrap();
        for k in 0..v.rank() {
            let u = v.u(k);
            assert_eq!(u.len(), 12);
            let norm: f64 = u.iter().map(|z| z.norm_sqr()).sum();
            assert!((norm - 1.0).abs() < 1e-10);
        }
    }
}
