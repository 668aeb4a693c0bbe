//! `lrsdp`: solve, query and cross-check low-rank SDP instances from text files.

use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Instant;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand};

use lowrank_sdp::dense_oracle::{self, DenseMmwConfig};
use lowrank_sdp::io::{self, fmt_f64, LoadedManifest, Mode, Report, WitnessDump};
use lowrank_sdp::solver::{self, Preset, Verdict};
use lowrank_sdp::{
    Complex64, FeasibilityOutcome, FeasibilityProblem, OptimizationProblem, SampledMatrix, SignedMatrix,
    SolverConfig, Support,
};

pub const EXIT_FEASIBLE: i32 = 0;
pub const EXIT_INFEASIBLE: i32 = 1;
pub const EXIT_ERROR: i32 = 2;

#[derive(Parser, Debug)]
#[command(name = "lrsdp", version, about = "Low-rank SDP feasibility via sampled matrix multiplicative weights")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Run the manifest's mode (feasibility or optimize) and write a report.
    Feastest {
        manifest: PathBuf,
        #[command(flatten)]
        flags: RunFlags,
    },
    /// Treat the manifest's constraints as observables `E_i` with values `p_i`.
    Shadow {
        manifest: PathBuf,
        #[command(flatten)]
        flags: RunFlags,
    },
    /// Print entry `(l, j)` (1-based) of the witness stored in a report.
    Entry { report: PathBuf, l: usize, j: usize },
    /// Run the exact dense loop on the manifest.
    Oracle {
        manifest: PathBuf,
        #[command(flatten)]
        flags: RunFlags,
    },
}

#[derive(Args, Debug, Clone, Default)]
pub struct RunFlags {
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Overrides the manifest's epsilon.
    #[arg(long)]
    pub epsilon: Option<f64>,
    /// Sketch sample count.
    #[arg(long)]
    pub p: Option<usize>,
    /// Singular-value filter threshold.
    #[arg(long)]
    pub gamma: Option<f64>,
    #[arg(long)]
    pub beta_scale: Option<f64>,
    /// Total failure probability of the trace checks.
    #[arg(long)]
    pub delta: Option<f64>,
    /// `scaled` or `paper`.
    #[arg(long, default_value = "scaled")]
    pub preset: String,
    /// `full` or `subspace`.
    #[arg(long, default_value = "full")]
    pub support: String,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub max_iters: Option<usize>,
    /// Worker threads; reports do not depend on this.
    #[arg(long)]
    pub threads: Option<usize>,
    /// Add wall-clock seconds per stage to the report.
    #[arg(long)]
    pub timings: bool,
}

impl RunFlags {
    pub fn solver_config(&self) -> anyhow::Result<SolverConfig> {
        let mut cfg = SolverConfig::with_seed(self.seed);
        cfg.preset = Preset::parse(&self.preset).with_context(|| format!("unknown preset `{}`", self.preset))?;
        cfg.support =
            Support::parse(&self.support).with_context(|| format!("unknown support `{}`", self.support))?;
        cfg.p = self.p;
        cfg.gamma = self.gamma;
        cfg.max_iterations = self.max_iters;
        if let Some(b) = self.beta_scale {
            cfg.beta_scale = b;
        }
        if let Some(d) = self.delta {
            cfg.delta_total = d;
        }
        Ok(cfg)
    }
}

/// Outcome of one command: exit code and the text for stdout (or `--out`).
pub struct CommandOutput {
    pub code: i32,
    pub text: String,
    pub out: Option<PathBuf>,
}

/// A manifest turned into solver inputs.
pub struct Instance {
    pub loaded: LoadedManifest,
    pub mode: Mode,
    pub epsilon: f64,
    /// Matrices the witness may reference: constraints, then the cost.
    pub inputs: Vec<Arc<SampledMatrix>>,
}

pub enum Problem {
    Feasibility(FeasibilityProblem),
    Optimize(OptimizationProblem),
}

impl Instance {
    pub fn load(path: &Path, mode_override: Option<Mode>, eps_override: Option<f64>) -> anyhow::Result<Self> {
        let loaded = io::load_manifest(path)?;
        let mode = mode_override.unwrap_or(loaded.manifest.mode);
        let raw = eps_override.unwrap_or(loaded.manifest.epsilon);
        let epsilon = if mode == Mode::Optimize {
            raw / (loaded.manifest.rp * loaded.manifest.rd)
        } else {
            raw
        };
        let inputs = loaded.inputs.iter().map(|m| Arc::clone(&m.matrix)).collect();
        Ok(Self {
            loaded,
            mode,
            epsilon,
            inputs,
        })
    }

    fn constraints(&self) -> (Vec<Arc<SampledMatrix>>, Vec<f64>) {
        let m = self.loaded.manifest.m();
        let bounds = self.loaded.manifest.constraints.iter().map(|c| c.bound).collect();
        (self.inputs[..m].to_vec(), bounds)
    }

    pub fn problem(&self) -> anyhow::Result<Problem> {
        let (mats, bounds) = self.constraints();
        Ok(match self.mode {
            Mode::Feasibility => Problem::Feasibility(FeasibilityProblem::new(
                mats.into_iter().map(SignedMatrix::new).collect(),
                bounds,
                self.epsilon,
            )?),
            Mode::Shadow => Problem::Feasibility(solver::shadow_to_feasibility(&mats, &bounds, self.epsilon)?),
            Mode::Optimize => {
                let cost = self.inputs.last().context("optimize mode needs a cost matrix")?;
                Problem::Optimize(OptimizationProblem {
                    cost: SignedMatrix::new(Arc::clone(cost)),
                    constraints: mats.into_iter().map(SignedMatrix::new).collect(),
                    bounds,
                    epsilon: self.epsilon,
                    rp: self.loaded.manifest.rp,
                    rd: self.loaded.manifest.rd,
                })
            }
        })
    }

    fn report_header(&self, command: &str, cfg: &SolverConfig) -> Report {
        let m = &self.loaded.manifest;
        let mut r = Report::default();
        r.set("command", command);
        r.set("mode", self.mode.name());
        r.set("n", m.n);
        r.set("m", m.m());
        r.set("epsilon", fmt_f64(self.epsilon));
        if self.mode == Mode::Optimize {
            r.set("epsilon_manifest", fmt_f64(m.epsilon));
            r.set("rp", fmt_f64(m.rp));
            r.set("rd", fmt_f64(m.rd));
        }
        r.set("seed", cfg.seed);
        r.set("preset", cfg.preset.name());
        r.set("support", cfg.support.name());
        r.set("beta_scale", fmt_f64(cfg.beta_scale));
        r.set("delta_total", fmt_f64(cfg.delta_total));
        r.set("max_iters", cfg.max_iterations.map_or("auto".to_string(), |t| t.to_string()));
        r.set("manifest", self.loaded.path.display());
        r.set("manifest_sha256", &self.loaded.sha256);
        r.inputs = self
            .loaded
            .inputs
            .iter()
            .map(|i| (i.label.clone(), absolute(&i.path), i.sha256.clone()))
            .collect();
        r
    }
}

fn absolute(p: &Path) -> PathBuf {
    std::fs::canonicalize(p).unwrap_or_else(|_| p.to_path_buf())
}

fn log_outcome(r: &mut Report, out: &FeasibilityOutcome, prefix: &str) {
    for v in &out.violations {
        r.log.push(format!(
            "violation {prefix}{} {} {}",
            v.iteration + 1,
            v.constraint + 1,
            fmt_f64(v.estimate)
        ));
    }
    for (j, mult) in out.exponent_terms() {
        r.log.push(format!("term {prefix}{} {mult}", j + 1));
    }
}

fn set_outcome_fields(r: &mut Report, out: &FeasibilityOutcome, problem_m: usize) {
    r.set("verdict", out.verdict.name());
    r.set("iterations", out.iterations_used);
    r.set("iteration_budget", out.iteration_budget);
    r.set("constraints_solved", problem_m);
    r.set("succinct_bits", out.succinct_bits(problem_m));
    match out.last_params {
        Some(p) => {
            r.set("p", p.p);
            r.set("gamma", fmt_f64(p.gamma));
        }
        None => {
            r.set("p", "none");
            r.set("gamma", "none");
        }
    }
}

fn exit_for(v: Verdict) -> i32 {
    match v {
        Verdict::Feasible => EXIT_FEASIBLE,
        Verdict::Infeasible => EXIT_INFEASIBLE,
    }
}

fn solve(command: &str, manifest: &Path, flags: &RunFlags, force: Option<Mode>) -> anyhow::Result<CommandOutput> {
    let t0 = Instant::now();
    let cfg = flags.solver_config()?;
    let inst = Instance::load(manifest, force, flags.epsilon)?;
    if force.is_none() && inst.mode == Mode::Shadow {
        bail!("manifest is in shadow mode; use the `shadow` subcommand");
    }
    let t_load = t0.elapsed().as_secs_f64();
    let mut r = inst.report_header(command, &cfg);
    let t1 = Instant::now();
    let code = match inst.problem()? {
        Problem::Feasibility(p) => {
            let out = solver::test_feasibility(&p, &cfg)?;
            set_outcome_fields(&mut r, &out, p.m());
            log_outcome(&mut r, &out, "");
            r.witness = out
                .witness
                .as_ref()
                .map(|g| WitnessDump::capture(g, &inst.inputs))
                .transpose()?;
            exit_for(out.verdict)
        }
        Problem::Optimize(p) => {
            let res = solver::optimize(&p, inst.epsilon, &cfg)?;
            r.set("value", fmt_f64(res.value));
            r.set("calls", res.calls);
            for (k, (c, v)) in res.trail.iter().enumerate() {
                r.log.push(format!("call {} {} {}", k + 1, fmt_f64(*c), v.name()));
            }
            let shown = res.last_feasible.as_ref().unwrap_or(&res.last);
            set_outcome_fields(&mut r, shown, p.constraints.len() + 1);
            log_outcome(&mut r, shown, "");
            r.witness = shown
                .witness
                .as_ref()
                .map(|g| WitnessDump::capture(g, &inst.inputs))
                .transpose()?;
            exit_for(shown.verdict)
        }
    };
    if flags.timings {
        r.set("time.load", fmt_f64(t_load));
        r.set("time.solve", fmt_f64(t1.elapsed().as_secs_f64()));
    }
    Ok(CommandOutput {
        code,
        text: r.render(),
        out: flags.out.clone(),
    })
}

fn oracle(manifest: &Path, flags: &RunFlags) -> anyhow::Result<CommandOutput> {
    let t0 = Instant::now();
    let cfg = flags.solver_config()?;
    let inst = Instance::load(manifest, None, flags.epsilon)?;
    let mut r = inst.report_header("oracle", &cfg);
    let dcfg = DenseMmwConfig {
        beta_scale: cfg.beta_scale,
        max_iterations: cfg.max_iterations,
        ..DenseMmwConfig::default()
    };
    let run = |p: &FeasibilityProblem, r: &mut Report| -> anyhow::Result<Verdict> {
        let out = dense_oracle::dense_mmw(p, &dcfg)?;
        r.set("verdict", out.verdict.name());
        r.set("iterations", out.iterations_used);
        r.set("iteration_budget", out.iteration_budget);
        r.set("constraints_solved", p.m());
        for &(t, j, tr) in &out.violations {
            r.log.push(format!("violation {} {} {}", t + 1, j + 1, fmt_f64(tr)));
        }
        if let Some(w) = &out.witness {
            for (j, a) in p.constraints.iter().enumerate() {
                let tr = dense_oracle::trace_product(&dense_oracle::dense_of(a)?, w).re;
                r.log.push(format!("trace {} {}", j + 1, fmt_f64(tr)));
            }
        }
        Ok(out.verdict)
    };
    let code = match inst.problem()? {
        Problem::Feasibility(p) => exit_for(run(&p, &mut r)?),
        Problem::Optimize(p) => {
            let res = solver::optimize_with(&p, inst.epsilon, &cfg, |fp, _| {
                let out = dense_oracle::dense_mmw(fp, &dcfg)?;
                Ok(FeasibilityOutcome {
                    verdict: out.verdict,
                    witness: None,
                    iterations_used: out.iterations_used,
                    iteration_budget: out.iteration_budget,
                    violations: Vec::new(),
                    last_params: None,
                })
            })?;
            r.set("value", fmt_f64(res.value));
            r.set("calls", res.calls);
            for (k, (c, v)) in res.trail.iter().enumerate() {
                r.log.push(format!("call {} {} {}", k + 1, fmt_f64(*c), v.name()));
            }
            let v = if res.last_feasible.is_some() {
                Verdict::Feasible
            } else {
                Verdict::Infeasible
            };
            r.set("verdict", v.name());
            exit_for(v)
        }
    };
    if flags.timings {
        r.set("time.total", fmt_f64(t0.elapsed().as_secs_f64()));
    }
    Ok(CommandOutput {
        code,
        text: r.render(),
        out: flags.out.clone(),
    })
}

/// Rebuild the witness of a report from its dump and the hashed inputs.
pub fn load_witness(path: &Path) -> anyhow::Result<lowrank_sdp::GibbsDescription> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let report = Report::parse(&text, path)?;
    let dump = report.witness.as_ref().context("report contains no witness")?;
    let mut inputs = Vec::new();
    if matches!(dump, WitnessDump::Sketched { .. }) {
        for (label, p, sha) in &report.inputs {
            let (m, got) = io::load_matrix(p)?;
            if &got != sha {
                bail!("{label} at {} changed since the report was written", p.display());
            }
            inputs.push(Arc::new(m));
        }
    }
    Ok(dump.rebuild(&inputs)?)
}

fn entry(report: &Path, l: usize, j: usize) -> anyhow::Result<CommandOutput> {
    let g = load_witness(report)?;
    if l == 0 || j == 0 {
        bail!("entry indices are 1-based");
    }
    let z: Complex64 = g.query_solution_entry(l - 1, j - 1)?;
    Ok(CommandOutput {
        code: 0,
        text: format!("{} {}\n", z.re, z.im),
        out: None,
    })
}

pub fn execute(cli: &Cli) -> anyhow::Result<CommandOutput> {
    match &cli.command {
        Command::Feastest { manifest, flags } => solve("feastest", manifest, flags, None),
        Command::Shadow { manifest, flags } => solve("shadow", manifest, flags, Some(Mode::Shadow)),
        Command::Oracle { manifest, flags } => oracle(manifest, flags),
        Command::Entry { report, l, j } => entry(report, *l, *j),
    }
}

/// Threads requested by the command, if any.
pub fn threads(cli: &Cli) -> Option<usize> {
    match &cli.command {
        Command::Feastest { flags, .. } | Command::Shadow { flags, .. } | Command::Oracle { flags, .. } => {
            flags.threads
        }
        Command::Entry { .. } => None,
    }
}
