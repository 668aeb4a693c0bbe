//! Gibbs states described by a sketch and a small eigendecomposition.
//!
//! With `X = VU` and eigenvalues `D`, every state here has entries
//! `ρ(ℓ,j) = d δ_{ℓj} + Σ_k X(ℓ,k) g_k conj(X(j,k))`:
//!
//! * [`Support::Subspace`]: `ρ = X e^{−βD} X† / η` with `η = Σ_k e^{−βD_k}`,
//!   so `d = 0` and `g_k = e^{−βD_k}/η`.
//! * [`Support::Full`]: `ρ = e^{−βÃ} / Tr e^{−βÃ}` for `Ã = X D X†` treated
//!   as an exact eigendecomposition, so the complement of `span X` keeps
//!   weight `e^0`. Normalizing by `e^{−β·ref}` with `ref = min(D_min, 0)`
//!   gives `w_k = e^{−β(D_k − ref)}`, `c = e^{β·ref}`,
//!   `Z = Σ_k w_k + (n − r̃) c`, `d = c/Z` and `g_k = (w_k − c)/Z`.
//! * The maximally mixed state `I/n`.

use std::collections::HashMap;
use std::sync::{Arc, Mutex};

use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::rng::StreamRng;
use crate::sketch::VDescription;
use crate::store::{SamplingAccess, SignedMatrix};
use crate::symmetric_approx::{SpectralSurrogate, V_COLUMN_BOUND};
use crate::trace_estimator::{estimate_trace_product, EstimatorConfig, QueryableOperator, ScaledIdentity};

/// Share of the trace precision left to sampling noise.
pub const SAMPLING_SHARE: f64 = 0.2;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Support {
    /// The complement of the sketched subspace keeps its Gibbs weight.
    Full,
    /// The state lives on the sketched subspace only.
    Subspace,
}

impl Support {
    pub fn name(self) -> &'static str {
        match self {
            Support::Full => "full",
            Support::Subspace => "subspace",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "full" => Some(Support::Full),
            "subspace" => Some(Support::Subspace),
            _ => None,
        }
    }
}

#[derive(Clone)]
struct Sketched {
    v: VDescription,
    s: SpectralSurrogate,
    beta: f64,
    support: Support,
    eta_mantissa: f64,
    eta_log_scale: f64,
    d: f64,
    g: Vec<f64>,
    cache: Arc<Mutex<HashMap<usize, Arc<[Complex64]>>>>,
}

#[derive(Clone)]
enum Kind {
    Uniform,
    Sketched(Box<Sketched>),
}

/// A succinctly described Gibbs state with entry queries.
#[derive(Clone)]
pub struct GibbsDescription {
    n: usize,
    kind: Kind,
}

impl std::fmt::Debug for GibbsDescription {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match &self.kind {
            Kind::Uniform => write!(f, "GibbsDescription::Uniform(n = {})", self.n),
            Kind::Sketched(k) => f
                .debug_struct("GibbsDescription")
                .field("n", &self.n)
                .field("rank", &k.s.rank())
                .field("beta", &k.beta)
                .field("support", &k.support)
                .field("d", &k.s.d)
                .finish(),
        }
    }
}

/// The maximally mixed state on `ℂⁿ`.
pub fn uniform(n: usize) -> GibbsDescription {
    GibbsDescription {
        n,
        kind: Kind::Uniform,
    }
}

/// `e^{−βÃ}/Tr` over the whole space.
pub fn make_gibbs(v: VDescription, s: SpectralSurrogate, beta: f64) -> Result<GibbsDescription> {
    make_gibbs_with(v, s, beta, Support::Full)
}

pub fn make_gibbs_with(
    v: VDescription,
    s: SpectralSurrogate,
    beta: f64,
    support: Support,
) -> Result<GibbsDescription> {
    if !(beta >= 0.0 && beta.is_finite()) {
        return Err(Error::Config(format!("beta must be nonnegative, got {beta}")));
    }
    let n = v.dim();
    let r = s.rank();
    if r == 0 {
        return Ok(uniform(n));
    }
    if s.u.nrows() != v.rank() || s.u.ncols() != r {
        return Err(Error::Shape(format!(
            "surrogate U is {}x{} for a sketch of rank {}",
            s.u.nrows(),
            s.u.ncols(),
            v.rank()
        )));
    }
    let d_min = s.d.iter().copied().fold(f64::INFINITY, f64::min);
    let (eta_mantissa, eta_log_scale, d, g) = match support {
        Support::Subspace => {
            let w: Vec<f64> = s.d.iter().map(|&x| (-beta * (x - d_min)).exp()).collect();
            let mantissa: f64 = w.iter().sum();
            let g = w.iter().map(|&x| x / mantissa).collect();
            (mantissa, -beta * d_min, 0.0, g)
        }
        Support::Full => {
            let reference = d_min.min(0.0);
            let w: Vec<f64> = s.d.iter().map(|&x| (-beta * (x - reference)).exp()).collect();
            let c = (beta * reference).exp();
            let z = w.iter().sum::<f64>() + n.saturating_sub(r) as f64 * c;
            let g = w.iter().map(|&x| (x - c) / z).collect();
            (z, -beta * reference, c / z, g)
        }
    };
    Ok(GibbsDescription {
        n,
        kind: Kind::Sketched(Box::new(Sketched {
            v,
            s,
            beta,
            support,
            eta_mantissa,
            eta_log_scale,
            d,
            g,
            cache: Arc::default(),
        })),
    })
}

impl GibbsDescription {
    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn is_uniform(&self) -> bool {
        matches!(self.kind, Kind::Uniform)
    }

    pub fn sketch(&self) -> Option<&VDescription> {
        match &self.kind {
            Kind::Sketched(k) => Some(&k.v),
            Kind::Uniform => None,
        }
    }

    pub fn surrogate(&self) -> Option<&SpectralSurrogate> {
        match &self.kind {
            Kind::Sketched(k) => Some(&k.s),
            Kind::Uniform => None,
        }
    }

    pub fn beta(&self) -> f64 {
        match &self.kind {
            Kind::Sketched(k) => k.beta,
            Kind::Uniform => 0.0,
        }
    }

    pub fn support(&self) -> Support {
        match &self.kind {
            Kind::Sketched(k) => k.support,
            Kind::Uniform => Support::Full,
        }
    }

    /// The normalizer as `(mantissa, log_scale)`, `η = mantissa · e^{log_scale}`.
    pub fn eta_parts(&self) -> (f64, f64) {
        match &self.kind {
            Kind::Sketched(k) => (k.eta_mantissa, k.eta_log_scale),
            Kind::Uniform => (self.n as f64, 0.0),
        }
    }

    pub fn eta(&self) -> f64 {
        let (m, l) = self.eta_parts();
        m * l.exp()
    }

    /// The identity coefficient `d` and the per-direction weights `g_k`.
    pub fn coefficients(&self) -> (f64, &[f64]) {
        match &self.kind {
            Kind::Sketched(k) => (k.d, &k.g),
            Kind::Uniform => (1.0 / self.n as f64, &[]),
        }
    }

    /// Row `ℓ` of `X = VU`, cached.
    fn x_row(k: &Sketched, l: usize) -> Arc<[Complex64]> {
        if let Some(row) = k.cache.lock().expect("cache lock").get(&l) {
            return Arc::clone(row);
        }
        let row = Self::compute_x_row(k, l);
        k.cache.lock().expect("cache lock").insert(l, Arc::clone(&row));
        row
    }

    fn compute_x_row(k: &Sketched, l: usize) -> Arc<[Complex64]> {
        let v = k.v.v_row(l);
        let r = k.s.rank();
        (0..r)
            .map(|c| v.iter().enumerate().map(|(a, &x)| x * k.s.u[(a, c)]).sum())
            .collect()
    }

    #[inline]
    fn combine(d: f64, g: &[f64], same: bool, xl: &[Complex64], xj: &[Complex64]) -> Complex64 {
        let mut acc = if same { Complex64::new(d, 0.0) } else { Complex64::default() };
        for ((&a, &b), &w) in xl.iter().zip(xj).zip(g) {
            acc += (a * b.conj()) * w;
        }
        acc
    }

    /// `ρ(ℓ, j)`.
    pub fn query_solution_entry(&self, l: usize, j: usize) -> Result<Complex64> {
        if l >= self.n || j >= self.n {
            return Err(Error::Index(format!("({l}, {j}) outside {0}x{0}", self.n)));
        }
        Ok(match &self.kind {
            Kind::Uniform => {
                if l == j {
                    Complex64::new(1.0 / self.n as f64, 0.0)
                } else {
                    Complex64::default()
                }
            }
            Kind::Sketched(k) => {
                let xl = Self::x_row(k, l);
                let xj = Self::x_row(k, j);
                Self::combine(k.d, &k.g, l == j, &xl, &xj)
            }
        })
    }

    /// Declared bound on `‖ρ‖_F` given `X†X ⪯ s I` with `s = 1.15²`:
    /// `‖ρ‖²_F ≤ d²n + 2ds Σ|g_k| + s² Σ g_k²`.
    pub fn frobenius_bound(&self) -> f64 {
        match &self.kind {
            Kind::Uniform => 1.0 / (self.n as f64).sqrt(),
            Kind::Sketched(k) => {
                let s = V_COLUMN_BOUND * V_COLUMN_BOUND;
                let g1: f64 = k.g.iter().map(|x| x.abs()).sum();
                let g2: f64 = k.g.iter().map(|x| x * x).sum();
                (k.d * k.d * self.n as f64 + 2.0 * k.d * s * g1 + s * s * g2).sqrt()
            }
        }
    }

    /// Estimate `Tr[A ρ]` to within `eps` with probability `1 − δ`.
    ///
    /// The sampling estimator runs at `eps/5` for a sketched state, leaving
    /// the rest of the budget to the sketch, and at `eps` for `I/n`.
    pub fn estimate_constraint_trace(
        &self,
        a: &SignedMatrix,
        eps: f64,
        delta: f64,
        rng: &mut StreamRng,
    ) -> Result<f64> {
        if a.dim() != self.n {
            return Err(Error::Shape(format!(
                "constraint is {0}x{0}, state is {1}x{1}",
                a.dim(),
                self.n
            )));
        }
        match &self.kind {
            Kind::Uniform => {
                let cfg = EstimatorConfig::new(eps, delta)?;
                Ok(estimate_trace_product(a, &ScaledIdentity::mixed(self.n), &cfg, rng)?.re)
            }
            Kind::Sketched(k) => {
                let cfg = EstimatorConfig::new(eps * SAMPLING_SHARE, delta)?;
                let oracle = RhoOracle::new(self, k, a.inner().nonempty_rows());
                Ok(estimate_trace_product(a, &oracle, &cfg, rng)?.re)
            }
        }
    }
}

/// `ρ` restricted to a fixed set of rows for the trace estimator.
struct RhoOracle<'a> {
    g: &'a GibbsDescription,
    k: &'a Sketched,
    ids: Vec<usize>,
    rows: Vec<Arc<[Complex64]>>,
}

impl<'a> RhoOracle<'a> {
    fn new(g: &'a GibbsDescription, k: &'a Sketched, support: &[usize]) -> Self {
        let mut ids = support.to_vec();
        ids.sort_unstable();
        ids.dedup();
        let missing: Vec<usize> = {
            let cache = k.cache.lock().expect("cache lock");
            ids.iter().copied().filter(|l| !cache.contains_key(l)).collect()
        };
        let fresh: Vec<(usize, Arc<[Complex64]>)> = missing
            .par_iter()
            .map(|&l| (l, GibbsDescription::compute_x_row(k, l)))
            .collect();
        let rows = {
            let mut cache = k.cache.lock().expect("cache lock");
            cache.extend(fresh);
            ids.iter().map(|l| Arc::clone(&cache[l])).collect()
        };
        Self { g, k, ids, rows }
    }
}

impl QueryableOperator for RhoOracle<'_> {
    fn dim(&self) -> usize {
        self.g.n
    }
    #[inline]
    fn entry(&self, i: usize, j: usize) -> Complex64 {
        let a = self.ids.binary_search(&i).expect("row outside the oracle support");
        let b = self.ids.binary_search(&j).expect("row outside the oracle support");
        GibbsDescription::combine(self.k.d, &self.k.g, i == j, &self.rows[a], &self.rows[b])
    }
    fn frobenius_bound(&self) -> f64 {
        self.g.frobenius_bound()
    }
}
