//! Matrix multiplicative weights over sketched Gibbs states.
//!
//! Starting from `I/n`, each round scans the constraints in index order and
//! estimates `Tr[A_j ρ_t]`. The first `j` whose estimate exceeds
//! `a_j + margin` joins the exponent, and the next state
//! `e^{−β Σ A_{j_i}} / Tr` is rebuilt from a fresh sketch of that sum. A
//! round without violations certifies the current state.

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::gibbs::{self, GibbsDescription, Support};
use crate::rng::{derive_seed, substream};
use crate::sketch::{build_sketch, MatrixSum, SketchParams};
use crate::store::{SampledMatrix, SamplingAccess, SignedMatrix};
use crate::symmetric_approx::{decompose, estimate_vav};

const STAGE_CHECK: u64 = 1;
const STAGE_SKETCH: u64 = 2;
const STAGE_VAV: u64 = 3;
const STAGE_SEARCH: u64 = 4;

/// Default worst-case Frobenius error of `B̃` per unit of `τ`.
pub const VAV_RELATIVE: f64 = 0.75;

/// `Tr[A_j X] ≤ a_j` for all `j`, to be decided up to `ε`.
#[derive(Clone, Debug)]
pub struct FeasibilityProblem {
    pub n: usize,
    pub constraints: Vec<SignedMatrix>,
    pub bounds: Vec<f64>,
    pub epsilon: f64,
}

impl FeasibilityProblem {
    pub fn new(constraints: Vec<SignedMatrix>, bounds: Vec<f64>, epsilon: f64) -> Result<Self> {
        if constraints.is_empty() {
            return Err(Error::Shape("at least one constraint is required".into()));
        }
        if constraints.len() != bounds.len() {
            return Err(Error::Shape(format!(
                "{} constraints but {} bounds",
                constraints.len(),
                bounds.len()
            )));
        }
        let n = constraints[0].dim();
        if constraints.iter().any(|c| c.dim() != n) {
            return Err(Error::Shape("constraint dimensions differ".into()));
        }
        if !(epsilon > 0.0 && epsilon < 1.0) {
            return Err(Error::Config(format!("epsilon must lie in (0, 1), got {epsilon}")));
        }
        Ok(Self {
            n,
            constraints,
            bounds,
            epsilon,
        })
    }

    pub fn m(&self) -> usize {
        self.constraints.len()
    }

    /// Largest declared rank among the constraints.
    pub fn rank_bound(&self) -> usize {
        self.constraints.iter().map(|c| c.rank_hint()).max().unwrap_or(1)
    }

    /// `⌈16 ln n / ε²⌉`, at least one.
    pub fn default_iterations(&self) -> usize {
        ((16.0 * (self.n as f64).ln() / (self.epsilon * self.epsilon)).ceil() as usize).max(1)
    }

    /// The same problem with `Tr[−C X] ≤ −c` appended.
    pub fn with_lower_bound(&self, cost: &SignedMatrix, c: f64) -> Result<Self> {
        let mut constraints = self.constraints.clone();
        let mut bounds = self.bounds.clone();
        constraints.push(cost.negate());
        bounds.push(-c);
        Self::new(constraints, bounds, self.epsilon)
    }
}

/// `max Tr[CX]` subject to the constraints of `base`, normalized so the
/// search over `[−1, 1]` suffices.
#[derive(Clone, Debug)]
pub struct OptimizationProblem {
    pub cost: SignedMatrix,
    /// Constraints `Tr[A_i X] ≤ b_i`; may be empty.
    pub constraints: Vec<SignedMatrix>,
    pub bounds: Vec<f64>,
    pub epsilon: f64,
    pub rp: f64,
    pub rd: f64,
}

impl OptimizationProblem {
    fn feasibility(&self, c: f64) -> Result<FeasibilityProblem> {
        let mut constraints = self.constraints.clone();
        let mut bounds = self.bounds.clone();
        constraints.push(self.cost.negate());
        bounds.push(-c);
        FeasibilityProblem::new(constraints, bounds, self.epsilon)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Preset {
    Scaled,
    Paper,
}

impl Preset {
    pub fn name(self) -> &'static str {
        match self {
            Preset::Scaled => "scaled",
            Preset::Paper => "paper",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "scaled" => Some(Preset::Scaled),
            "paper" => Some(Preset::Paper),
            _ => None,
        }
    }
}

#[derive(Clone, Debug)]
pub struct SolverConfig {
    pub seed: u64,
    /// Replaces `⌈16 ln n / ε²⌉` when set.
    pub max_iterations: Option<usize>,
    pub preset: Preset,
    /// Overrides the preset's sample size.
    pub p: Option<usize>,
    /// Overrides the preset's filter threshold.
    pub gamma: Option<f64>,
    /// Upper limit on the sample size of any sketch.
    pub p_max: usize,
    /// Failure budget shared by all trace checks; the symmetric
    /// approximations get the same amount again.
    pub delta_total: f64,
    /// Trace-check precision as a fraction of `ε`.
    pub estimate_fraction: f64,
    /// Violation margin as a fraction of `ε`.
    pub margin_fraction: f64,
    /// `β = beta_scale · ε`.
    pub beta_scale: f64,
    /// Overrides the precision of `B̃ ≈ V†AV`.
    pub vav_precision: Option<f64>,
    pub support: Support,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            max_iterations: None,
            preset: Preset::Scaled,
            p: None,
            gamma: None,
            p_max: 20_000,
            delta_total: 1.0 / 6.0,
            estimate_fraction: 0.25,
            margin_fraction: 0.5,
            beta_scale: 0.25,
            vav_precision: None,
            support: Support::Full,
        }
    }
}

impl SolverConfig {
    pub fn with_seed(seed: u64) -> Self {
        Self {
            seed,
            ..Self::default()
        }
    }

    fn validate(&self) -> Result<()> {
        if self.estimate_fraction <= 0.0 || self.margin_fraction <= 0.0 {
            return Err(Error::Config("estimate precision and margin must be positive".into()));
        }
        if self.estimate_fraction + self.margin_fraction >= 1.0 {
            return Err(Error::Config(format!(
                "estimate precision {}ε plus margin {}ε must stay below ε",
                self.estimate_fraction, self.margin_fraction
            )));
        }
        if !(self.delta_total > 0.0 && self.delta_total < 1.0) {
            return Err(Error::Config(format!("delta must lie in (0, 1), got {}", self.delta_total)));
        }
        if !(self.beta_scale >= 0.0 && self.beta_scale.is_finite()) {
            return Err(Error::Config("beta scale must be nonnegative".into()));
        }
        if self.max_iterations == Some(0) {
            return Err(Error::Config("max iterations must be positive".into()));
        }
        Ok(())
    }

    pub fn iterations(&self, problem: &FeasibilityProblem) -> usize {
        self.max_iterations.unwrap_or_else(|| problem.default_iterations())
    }

    /// Sketch parameters for a sum of `tau` terms of rank at most `r`.
    pub fn sketch_params(&self, tau: usize, r: usize, eps: f64) -> Result<SketchParams> {
        let base = match self.preset {
            Preset::Scaled => SketchParams::scaled(tau, r, eps)?.capped(self.p_max),
            Preset::Paper => SketchParams::paper(tau, r, eps, self.p_max)?,
        };
        SketchParams::new(self.p.unwrap_or(base.p), self.gamma.unwrap_or(base.gamma))
    }

    /// Precision of `B̃`: an eigenvalue error `e` moves the exponent by `βe`,
    /// so `ε/(8β)` keeps that shift at `ε/8`; `VAV_RELATIVE · τ` against
    /// `‖A‖ ≤ τ` is the floor.
    pub fn vav_precision_for(&self, eps: f64, tau: usize) -> f64 {
        self.vav_precision.unwrap_or_else(|| {
            let beta = self.beta_scale * eps;
            let exponent = if beta > 0.0 { eps / (8.0 * beta) } else { f64::INFINITY };
            exponent.max(VAV_RELATIVE * tau as f64)
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Verdict {
    Feasible,
    Infeasible,
}

impl Verdict {
    pub fn name(self) -> &'static str {
        match self {
            Verdict::Feasible => "feasible",
            Verdict::Infeasible => "infeasible",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "feasible" => Some(Verdict::Feasible),
            "infeasible" => Some(Verdict::Infeasible),
            _ => None,
        }
    }
}

/// One detected violation: 0-based round and constraint index, estimate.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Violation {
    pub iteration: usize,
    pub constraint: usize,
    pub estimate: f64,
}

#[derive(Clone, Debug)]
pub struct FeasibilityOutcome {
    pub verdict: Verdict,
    pub witness: Option<GibbsDescription>,
    pub iterations_used: usize,
    pub iteration_budget: usize,
    pub violations: Vec<Violation>,
    /// Parameters of the last sketch built, if any.
    pub last_params: Option<SketchParams>,
}

impl FeasibilityOutcome {
    /// Distinct exponent terms as `(constraint, multiplicity)`, first
    /// appearance order.
    pub fn exponent_terms(&self) -> Vec<(usize, usize)> {
        let mut out: Vec<(usize, usize)> = Vec::new();
        for v in &self.violations {
            match out.iter_mut().find(|(j, _)| *j == v.constraint) {
                Some(e) => e.1 += 1,
                None => out.push((v.constraint, 1)),
            }
        }
        out
    }

    /// Bits needed to store the sequence of violated indices.
    pub fn succinct_bits(&self, m: usize) -> usize {
        let per = (m.max(1) as f64).log2().ceil() as usize + 1;
        self.violations.len() * per
    }
}

/// Build `e^{−β Σ_t A_{j_t}} / Tr` from the violation sequence.
pub fn gibbs_for_terms(
    problem: &FeasibilityProblem,
    terms: &[usize],
    cfg: &SolverConfig,
    round: u64,
) -> Result<(GibbsDescription, Option<SketchParams>)> {
    if terms.is_empty() {
        return Ok((gibbs::uniform(problem.n), None));
    }
    let list: Vec<SignedMatrix> = terms.iter().map(|&j| problem.constraints[j].clone()).collect();
    let r = problem.rank_bound();
    let ms = Arc::new(MatrixSum::from_terms(&list, r)?);
    if ms.frobenius_sq_total() == 0.0 {
        return Ok((gibbs::uniform(problem.n), None));
    }
    let tau = ms.tau();
    let eps = problem.epsilon;
    let params = cfg.sketch_params(tau, r, eps)?;
    let mut rng = substream(cfg.seed, &[round, STAGE_SKETCH]);
    let v = match build_sketch(Arc::clone(&ms), &params, &mut rng) {
        Ok(v) => v,
        Err(Error::EmptySketch) => return Ok((gibbs::uniform(problem.n), Some(params))),
        Err(e) => return Err(e),
    };
    let budget = cfg.delta_total / cfg.iterations(problem) as f64;
    let mut rng = substream(cfg.seed, &[round, STAGE_VAV]);
    let b = estimate_vav(&v, cfg.vav_precision_for(eps, tau), budget.min(0.5), &mut rng)?;
    let s = decompose(&b)?;
    let g = gibbs::make_gibbs_with(v, s, cfg.beta_scale * eps, cfg.support)?;
    Ok((g, Some(params)))
}

pub fn test_feasibility(problem: &FeasibilityProblem, cfg: &SolverConfig) -> Result<FeasibilityOutcome> {
    cfg.validate()?;
    let eps = problem.epsilon;
    let t_max = cfg.iterations(problem);
    let m = problem.m();
    let delta_call = cfg.delta_total / (t_max as f64 * m as f64);
    let eps_est = cfg.estimate_fraction * eps;
    let margin = cfg.margin_fraction * eps;

    let mut state = gibbs::uniform(problem.n);
    let mut terms: Vec<usize> = Vec::new();
    let mut violations = Vec::new();
    let mut last_params = None;
    for t in 0..t_max {
        let mut found = None;
        for (j, (a, &bound)) in problem.constraints.iter().zip(&problem.bounds).enumerate() {
            let mut rng = substream(cfg.seed, &[t as u64, STAGE_CHECK, j as u64]);
            let zeta = state.estimate_constraint_trace(a, eps_est, delta_call, &mut rng)?;
            if zeta > bound + margin {
                found = Some((j, zeta));
                break;
            }
        }
        let Some((j, zeta)) = found else {
            return Ok(FeasibilityOutcome {
                verdict: Verdict::Feasible,
                witness: Some(state),
                iterations_used: t + 1,
                iteration_budget: t_max,
                violations,
                last_params,
            });
        };
        violations.push(Violation {
            iteration: t,
            constraint: j,
            estimate: zeta,
        });
        terms.push(j);
        if t + 1 < t_max {
            let (g, params) = gibbs_for_terms(problem, &terms, cfg, t as u64)?;
            state = g;
            last_params = params.or(last_params);
        }
    }
    Ok(FeasibilityOutcome {
        verdict: Verdict::Infeasible,
        witness: None,
        iterations_used: t_max,
        iteration_budget: t_max,
        violations,
        last_params,
    })
}

/// Result of the binary search.
#[derive(Clone, Debug)]
pub struct OptimizeOutcome {
    pub value: f64,
    pub calls: usize,
    /// Candidate values tried, with the verdict of each call.
    pub trail: Vec<(f64, Verdict)>,
    pub last: FeasibilityOutcome,
    pub last_feasible: Option<FeasibilityOutcome>,
}

/// Binary search for `max Tr[CX]` over `[−1, 1]` with any feasibility oracle.
pub fn optimize_with<F>(
    problem: &OptimizationProblem,
    eps_outer: f64,
    cfg: &SolverConfig,
    mut oracle: F,
) -> Result<OptimizeOutcome>
where
    F: FnMut(&FeasibilityProblem, &SolverConfig) -> Result<FeasibilityOutcome>,
{
    if !(eps_outer > 0.0 && eps_outer < 1.0) {
        return Err(Error::Config(format!("outer epsilon must lie in (0, 1), got {eps_outer}")));
    }
    let calls = ((1.0 / eps_outer).log2().ceil() as usize).max(1);
    let (mut lo, mut hi) = (-1.0f64, 1.0f64);
    let mut trail = Vec::with_capacity(calls);
    let mut last = None;
    let mut last_feasible = None;
    for k in 0..calls {
        let c = 0.5 * (lo + hi);
        let inner = SolverConfig {
            seed: derive_seed(cfg.seed, &[STAGE_SEARCH, k as u64]),
            ..cfg.clone()
        };
        let out = oracle(&problem.feasibility(c)?, &inner)?;
        trail.push((c, out.verdict));
        if out.verdict == Verdict::Feasible {
            lo = c;
            last_feasible = Some(out.clone());
        } else {
            hi = c;
        }
        last = Some(out);
    }
    Ok(OptimizeOutcome {
        value: 0.5 * (lo + hi),
        calls,
        trail,
        last: last.expect("at least one call"),
        last_feasible,
    })
}

pub fn optimize(problem: &OptimizationProblem, eps_outer: f64, cfg: &SolverConfig) -> Result<OptimizeOutcome> {
    optimize_with(problem, eps_outer, cfg, test_feasibility)
}

/// `A_i = E_i, a_i = p_i` and `A_{m+i} = −E_i, a_{m+i} = −p_i`.
pub fn shadow_to_feasibility(
    observables: &[Arc<SampledMatrix>],
    values: &[f64],
    epsilon: f64,
) -> Result<FeasibilityProblem> {
    if observables.len() != values.len() {
        return Err(Error::Shape(format!(
            "{} observables but {} values",
            observables.len(),
            values.len()
        )));
    }
    if let Some(bad) = values.iter().find(|p| !(p.abs() <= 1.0)) {
        return Err(Error::Config(format!("observable value {bad} outside [-1, 1]")));
    }
    let mut constraints: Vec<SignedMatrix> =
        observables.iter().map(|e| SignedMatrix::new(Arc::clone(e))).collect();
    constraints.extend(observables.iter().map(|e| SignedMatrix::negated(Arc::clone(e))));
    let mut bounds = values.to_vec();
    bounds.extend(values.iter().map(|p| -p));
    FeasibilityProblem::new(constraints, bounds, epsilon)
}
