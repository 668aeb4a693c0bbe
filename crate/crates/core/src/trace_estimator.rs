//! Median-of-means estimation of `Tr[AB]` from ℓ²-samples of `A` and entry
//! queries of `B`.
//!
//! A single sample draws `(i, j)` with probability `|A(i,j)|² / ‖A‖²_F` and
//! returns `B(j,i) ‖A‖²_F / conj(A(i,j))`, an unbiased estimate of `Tr[AB]`
//! with second moment at most `‖A‖²_F ‖B‖²_F`.

use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::rng::{fork_seed, substream, StreamRng};
use crate::store::{SampledMatrix, SamplingAccess};

/// Refuse configurations whose total sample count exceeds this.
pub const MAX_TOTAL_SAMPLES: f64 = 1e12;

/// Entry access to an `n × n` matrix with a declared Frobenius-norm bound.
pub trait QueryableOperator: Sync {
    fn dim(&self) -> usize;
    fn entry(&self, i: usize, j: usize) -> Complex64;
    /// Upper bound on `‖B‖_F`.
    fn frobenius_bound(&self) -> f64;
    fn is_hermitian(&self) -> bool {
        true
    }
}

/// Several operators estimated from one shared stream of samples of `A`.
///
/// Each member's estimate is exactly what a dedicated run would compute
/// from the same draws, so per-member guarantees hold marginally and combine
/// by the union bound.
pub trait OperatorFamily: Sync {
    fn dim(&self) -> usize;
    fn len(&self) -> usize;
    fn is_empty(&self) -> bool {
        self.len() == 0
    }
    /// Write `B_k(j, i)` for every member `k` into `out`.
    fn entries_at(&self, j: usize, i: usize, out: &mut [Complex64]);
    /// Common upper bound on `‖B_k‖_F`.
    fn frobenius_bound(&self) -> f64;
    fn is_hermitian(&self, k: usize) -> bool;

    /// `acc[k] += w · B_k(j, i)` for every member; `buf` is scratch space.
    #[inline]
    fn accumulate(&self, j: usize, i: usize, w: Complex64, acc: &mut [Complex64], buf: &mut [Complex64]) {
        self.entries_at(j, i, buf);
        for (s, &b) in acc.iter_mut().zip(buf.iter()) {
            *s += b * w;
        }
    }
}

struct Single<'a, B: ?Sized>(&'a B);

impl<B: QueryableOperator + ?Sized> OperatorFamily for Single<'_, B> {
    fn dim(&self) -> usize {
        self.0.dim()
    }
    fn len(&self) -> usize {
        1
    }
    #[inline]
    fn entries_at(&self, j: usize, i: usize, out: &mut [Complex64]) {
        out[0] = self.0.entry(j, i);
    }
    fn frobenius_bound(&self) -> f64 {
        self.0.frobenius_bound()
    }
    fn is_hermitian(&self, _: usize) -> bool {
        self.0.is_hermitian()
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EstimatorConfig {
    /// Additive error `ε_s`.
    pub precision: f64,
    /// Failure probability `δ`.
    pub failure_probability: f64,
}

impl EstimatorConfig {
    pub fn new(precision: f64, failure_probability: f64) -> Result<Self> {
        if !(precision > 0.0 && precision.is_finite()) {
            return Err(Error::Config(format!("precision must be positive, got {precision}")));
        }
        if !(failure_probability > 0.0 && failure_probability < 1.0) {
            return Err(Error::Config(format!(
                "failure probability must lie in (0, 1), got {failure_probability}"
            )));
        }
        Ok(Self {
            precision,
            failure_probability,
        })
    }

    /// `⌈18 ln(1/δ)⌉`, at least one.
    pub fn batch_count(&self) -> usize {
        ((18.0 * (1.0 / self.failure_probability).ln()).ceil() as usize).max(1)
    }

    /// `⌈6 ‖A‖²_F ‖B‖²_F / ε_s²⌉` as a float, before any cap.
    pub fn batch_size_f64(&self, a_fro_sq: f64, b_bound: f64) -> f64 {
        (6.0 * a_fro_sq * b_bound * b_bound / (self.precision * self.precision)).ceil()
    }

    pub fn batch_size(&self, a_fro_sq: f64, b_bound: f64) -> usize {
        (self.batch_size_f64(a_fro_sq, b_bound) as usize).max(1)
    }
}

/// One importance-sampling draw evaluated at the sampled position.
#[inline]
pub fn sample_value(a_fro_sq: f64, b_ji: Complex64, a_ij: Complex64) -> Complex64 {
    b_ji * a_fro_sq / a_ij.conj()
}

fn median(values: &mut [f64]) -> f64 {
    values.sort_by(f64::total_cmp);
    let n = values.len();
    if n % 2 == 1 {
        values[n / 2]
    } else {
        0.5 * (values[n / 2 - 1] + values[n / 2])
    }
}

/// Estimate `Tr[A B]`.
pub fn estimate_trace_product<A, B>(
    a: &A,
    b: &B,
    cfg: &EstimatorConfig,
    rng: &mut StreamRng,
) -> Result<Complex64>
where
    A: SamplingAccess,
    B: QueryableOperator + ?Sized,
{
    Ok(estimate_family(a, &Single(b), cfg, rng)?[0])
}

/// Estimate `Tr[A B_k]` for every member of `family` from shared draws.
pub fn estimate_family<A, F>(
    a: &A,
    family: &F,
    cfg: &EstimatorConfig,
    rng: &mut StreamRng,
) -> Result<Vec<Complex64>>
where
    A: SamplingAccess,
    F: OperatorFamily + ?Sized,
{
    if a.dim() != family.dim() {
        return Err(Error::Shape(format!(
            "A is {0}x{0} but B is {1}x{1}",
            a.dim(),
            family.dim()
        )));
    }
    let k = family.len();
    let a_fro_sq = a.frobenius_norm_sq();
    if a_fro_sq == 0.0 || k == 0 {
        return Ok(vec![Complex64::default(); k]);
    }
    let bound = family.frobenius_bound();
    if !(bound > 0.0) {
        return Err(Error::ZeroMass("declared Frobenius bound of B is zero".into()));
    }
    let batches = cfg.batch_count();
    let size_f = cfg.batch_size_f64(a_fro_sq, bound);
    if size_f * batches as f64 > MAX_TOTAL_SAMPLES {
        return Err(Error::Config(format!(
            "trace estimate needs {:.3e} samples, above the cap {MAX_TOTAL_SAMPLES:.0e}",
            size_f * batches as f64
        )));
    }
    let size = (size_f as usize).max(1);
    let seed = fork_seed(rng);

    let means: Vec<Vec<Complex64>> = (0..batches)
        .into_par_iter()
        .map(|batch| -> Result<Vec<Complex64>> {
            let mut r = substream(seed, &[batch as u64]);
            let mut acc = vec![Complex64::default(); k];
            let mut buf = vec![Complex64::default(); k];
            for _ in 0..size {
                let (i, j, a_ij) = a.sample_entry(&mut r)?;
                family.accumulate(j, i, a_fro_sq / a_ij.conj(), &mut acc, &mut buf);
            }
            let inv = 1.0 / size as f64;
            Ok(acc.into_iter().map(|s| s * inv).collect())
        })
        .collect::<Result<_>>()?;

    let mut re = vec![0.0; batches];
    let mut im = vec![0.0; batches];
    Ok((0..k)
        .map(|m| {
            for (b, row) in means.iter().enumerate() {
                re[b] = row[m].re;
                im[b] = row[m].im;
            }
            let real = median(&mut re);
            let imag = if family.is_hermitian(m) { 0.0 } else { median(&mut im) };
            Complex64::new(real, imag)
        })
        .collect())
}

/// The exact expectation of one draw, by enumerating every stored entry.
pub fn exact_expectation<B: QueryableOperator + ?Sized>(a: &SampledMatrix, b: &B) -> Complex64 {
    let fro = a.frobenius_norm_sq();
    if fro == 0.0 {
        return Complex64::default();
    }
    a.iter()
        .map(|(i, j, v)| {
            let p = a.row_descent_probability(i) * a.entry_descent_probability(i, j);
            sample_value(fro, b.entry(j, i), v) * p
        })
        .sum()
}

/// `δ_ij / n`: the operator of the maximally mixed state.
#[derive(Clone, Copy, Debug)]
pub struct ScaledIdentity {
    pub n: usize,
    pub scale: f64,
}

impl ScaledIdentity {
    pub fn mixed(n: usize) -> Self {
        Self {
            n,
            scale: 1.0 / n as f64,
        }
    }
}

impl QueryableOperator for ScaledIdentity {
    fn dim(&self) -> usize {
        self.n
    }
    #[inline]
    fn entry(&self, i: usize, j: usize) -> Complex64 {
        if i == j {
            Complex64::new(self.scale, 0.0)
        } else {
            Complex64::default()
        }
    }
    fn frobenius_bound(&self) -> f64 {
        self.scale.abs() * (self.n as f64).sqrt()
    }
}

/// A stored matrix viewed as an entry oracle.
impl QueryableOperator for SampledMatrix {
    fn dim(&self) -> usize {
        SampledMatrix::dim(self)
    }
    fn entry(&self, i: usize, j: usize) -> Complex64 {
        SampledMatrix::entry(self, i, j)
    }
    fn frobenius_bound(&self) -> f64 {
        self.frobenius_norm()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::seeded;

    fn c(re: f64) -> Complex64 {
        Complex64::new(re, 0.0)
    }

    #[test]
    fn identity_pair_has_constant_samples() {
        let a = SampledMatrix::build([(0, 0, c(1.0)), (1, 1, c(1.0))], 2, 2).unwrap();
        let b = ScaledIdentity { n: 2, scale: 1.0 };
        for (i, j, v) in a.iter() {
            assert_eq!(sample_value(2.0, b.entry(j, i), v), c(2.0));
        }
        let cfg = EstimatorConfig::new(0.5, 0.1).unwrap();
        let z = estimate_trace_product(&a, &b, &cfg, &mut seeded(1)).unwrap();
        assert_eq!(z, c(2.0));
    }

    #[test]
    fn signed_diagonal_cancels_in_expectation() {
        let a = SampledMatrix::build([(0, 0, c(1.0)), (1, 1, c(-1.0))], 2, 2).unwrap();
        let b = ScaledIdentity { n: 2, scale: 1.0 };
        assert_eq!(exact_expectation(&a, &b), c(0.0));
    }

    #[test]
    fn zero_a_short_circuits() {
        let a = SampledMatrix::build(std::iter::empty(), 3, 1).unwrap();
        let cfg = EstimatorConfig::new(0.1, 0.1).unwrap();
        let z = estimate_trace_product(&a, &ScaledIdentity::mixed(3), &cfg, &mut seeded(0)).unwrap();
        assert_eq!(z, c(0.0));
    }

    #[test]
    fn zero_bound_and_shape_mismatch_are_errors() {
        let a = SampledMatrix::build([(0, 0, c(1.0))], 2, 1).unwrap();
        let cfg = EstimatorConfig::new(0.1, 0.1).unwrap();
        let zero = ScaledIdentity { n: 2, scale: 0.0 };
        assert!(matches!(
            estimate_trace_product(&a, &zero, &cfg, &mut seeded(0)),
            Err(Error::ZeroMass(_))
        ));
        assert!(matches!(
            estimate_trace_product(&a, &ScaledIdentity::mixed(3), &cfg, &mut seeded(0)),
            Err(Error::Shape(_))
        ));
    }

    #[test]
    fn halving_precision_quadruples_batch_size() {
        let a = EstimatorConfig::new(0.1, 0.01).unwrap();
        let b = EstimatorConfig::new(0.05, 0.01).unwrap();
        assert_eq!(a.batch_size(2.0, 1.5) * 4, b.batch_size(2.0, 1.5));
        assert_eq!(a.batch_count(), (18.0 * 100f64.ln()).ceil() as usize);
    }

    #[test]
    fn invalid_configs_are_rejected() {
        assert!(EstimatorConfig::new(0.0, 0.1).is_err());
        assert!(EstimatorConfig::new(0.1, 1.0).is_err());
    }
}
