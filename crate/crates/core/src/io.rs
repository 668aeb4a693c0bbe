//! Text formats: matrix files, problem manifests and run reports.
//!
//! All indices in files are 1-based. Floats in reports are written with 17
//! significant digits so every value reads back to the identical `f64`.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use num_complex::Complex64;
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::gibbs::{self, GibbsDescription, Support};
use crate::sketch::{MatrixSum, Summand, VDescription};
use crate::smalldense::DenseMatrix;
use crate::store::{SampledMatrix, SignedMatrix};
use crate::symmetric_approx::SpectralSurrogate;

/// First line of every report.
pub const REPORT_HEADER: &str = "lrsdp-report 1";

/// Lowercase hex SHA-256 of `bytes`.
pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().fold(String::with_capacity(64), |mut s, b| {
        let _ = write!(s, "{b:02x}");
        s
    })
}

/// Format a float so it parses back bit-identically.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

fn parse_err(path: &Path, line: usize, msg: impl Into<String>) -> Error {
    Error::Parse {
        path: path.to_path_buf(),
        line,
        msg: msg.into(),
    }
}

fn content_lines(text: &str) -> impl Iterator<Item = (usize, Vec<&str>)> {
    text.lines().enumerate().filter_map(|(k, raw)| {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            None
        } else {
            Some((k + 1, line.split_whitespace().collect()))
        }
    })
}

fn num<T: std::str::FromStr>(path: &Path, line: usize, what: &str, s: &str) -> Result<T> {
    s.parse()
        .map_err(|_| parse_err(path, line, format!("invalid {what} `{s}`")))
}

/// Parse a matrix file: `n <dim> rank <r>` then `i j re im` lines.
pub fn parse_matrix(text: &str, path: &Path) -> Result<SampledMatrix> {
    let mut lines = content_lines(text);
    let (hl, header) = lines
        .next()
        .ok_or_else(|| parse_err(path, 0, "missing `n <dim> rank <r>` header"))?;
    if header.len() != 4 || header[0] != "n" || header[2] != "rank" {
        return Err(parse_err(path, hl, "expected `n <dim> rank <r>`"));
    }
    let n: usize = num(path, hl, "dimension", header[1])?;
    let rank: usize = num(path, hl, "rank", header[3])?;
    if n == 0 || rank == 0 {
        return Err(parse_err(path, hl, "dimension and rank must be positive"));
    }
    let mut entries = Vec::new();
    for (ln, f) in lines {
        if f.len() != 4 {
            return Err(parse_err(path, ln, "expected `i j re im`"));
        }
        let i: usize = num(path, ln, "row", f[0])?;
        let j: usize = num(path, ln, "column", f[1])?;
        let re: f64 = num(path, ln, "real part", f[2])?;
        let im: f64 = num(path, ln, "imaginary part", f[3])?;
        if i == 0 || j == 0 || i > n || j > n {
            return Err(Error::Index(format!(
                "{}:{ln}: ({i}, {j}) outside 1..={n}",
                path.display()
            )));
        }
        entries.push((i - 1, j - 1, Complex64::new(re, im)));
    }
    SampledMatrix::build(entries, n, rank)
}

/// Read a matrix file and hash its bytes.
pub fn load_matrix(path: &Path) -> Result<(SampledMatrix, String)> {
    let bytes = std::fs::read(path)?;
    let text = String::from_utf8(bytes.clone())
        .map_err(|_| parse_err(path, 0, "file is not UTF-8"))?;
    Ok((parse_matrix(&text, path)?, sha256_hex(&bytes)))
}

/// Render the upper triangle of a store in the matrix file format.
pub fn format_matrix(m: &SampledMatrix) -> String {
    let mut s = format!("n {} rank {}\n", m.dim(), m.rank_hint());
    for (i, j, v) in m.iter().filter(|(i, j, _)| i <= j) {
        let _ = writeln!(s, "{} {} {} {}", i + 1, j + 1, v.re, v.im);
    }
    s
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Mode {
    Feasibility,
    Optimize,
    Shadow,
}

impl Mode {
    pub fn name(self) -> &'static str {
        match self {
            Mode::Feasibility => "feasibility",
            Mode::Optimize => "optimize",
            Mode::Shadow => "shadow",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "feasibility" => Some(Mode::Feasibility),
            "optimize" => Some(Mode::Optimize),
            "shadow" => Some(Mode::Shadow),
            _ => None,
        }
    }
}

/// One `constraint <i> <path> <a_i>` line, path resolved against the
/// manifest's directory.
#[derive(Clone, Debug, PartialEq)]
pub struct ConstraintSpec {
    pub path: PathBuf,
    pub bound: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Manifest {
    pub n: usize,
    pub epsilon: f64,
    pub mode: Mode,
    /// Ordered by constraint index.
    pub constraints: Vec<ConstraintSpec>,
    pub cost: Option<PathBuf>,
    pub rp: f64,
    pub rd: f64,
}

impl Manifest {
    pub fn m(&self) -> usize {
        self.constraints.len()
    }

    /// `ε / (R_p R_d)`, the precision used in optimize mode.
    pub fn normalized_epsilon(&self) -> f64 {
        self.epsilon / (self.rp * self.rd)
    }
}

pub fn parse_manifest(text: &str, path: &Path) -> Result<Manifest> {
    let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
    let (mut n, mut m, mut eps) = (None, None, None);
    let mut mode = Mode::Feasibility;
    let mut cost = None;
    let (mut rp, mut rd) = (1.0, 1.0);
    let mut slots: Vec<(usize, usize, ConstraintSpec)> = Vec::new();
    for (ln, f) in content_lines(text) {
        let arity = |k: usize| -> Result<()> {
            if f.len() == k {
                Ok(())
            } else {
                Err(parse_err(path, ln, format!("`{}` takes {} field(s)", f[0], k - 1)))
            }
        };
        match f[0] {
            "n" => {
                arity(2)?;
                n = Some(num::<usize>(path, ln, "dimension", f[1])?);
            }
            "m" => {
                arity(2)?;
                m = Some(num::<usize>(path, ln, "constraint count", f[1])?);
            }
            "epsilon" => {
                arity(2)?;
                eps = Some(num::<f64>(path, ln, "epsilon", f[1])?);
            }
            "mode" => {
                arity(2)?;
                mode = Mode::parse(f[1]).ok_or_else(|| parse_err(path, ln, format!("unknown mode `{}`", f[1])))?;
            }
            "constraint" => {
                arity(4)?;
                let i: usize = num(path, ln, "constraint index", f[1])?;
                let bound: f64 = num(path, ln, "bound", f[3])?;
                slots.push((
                    i,
                    ln,
                    ConstraintSpec {
                        path: base.join(f[2]),
                        bound,
                    },
                ));
            }
            "cost" => {
                arity(2)?;
                cost = Some(base.join(f[1]));
            }
            "rp" => {
                arity(2)?;
                rp = num(path, ln, "rp", f[1])?;
            }
            "rd" => {
                arity(2)?;
                rd = num(path, ln, "rd", f[1])?;
            }
            other => return Err(parse_err(path, ln, format!("unknown key `{other}`"))),
        }
    }
    let n = n.ok_or_else(|| parse_err(path, 0, "missing `n`"))?;
    let eps = eps.ok_or_else(|| parse_err(path, 0, "missing `epsilon`"))?;
    let m = m.unwrap_or(slots.len());
    if slots.len() != m {
        return Err(Error::Shape(format!(
            "{}: `m {m}` but {} constraint lines",
            path.display(),
            slots.len()
        )));
    }
    slots.sort_by_key(|s| s.0);
    for (k, (i, ln, _)) in slots.iter().enumerate() {
        if *i != k + 1 {
            return Err(parse_err(path, *ln, format!("constraint indices must be 1..={m} without gaps")));
        }
    }
    if !(rp >= 1.0 && rd >= 1.0) {
        return Err(parse_err(path, 0, "rp and rd must be at least 1"));
    }
    if mode == Mode::Optimize && cost.is_none() {
        return Err(parse_err(path, 0, "optimize mode needs a `cost` line"));
    }
    if mode != Mode::Optimize && m == 0 {
        return Err(parse_err(path, 0, "at least one constraint is required"));
    }
    Ok(Manifest {
        n,
        epsilon: eps,
        mode,
        constraints: slots.into_iter().map(|s| s.2).collect(),
        cost,
        rp,
        rd,
    })
}

/// A loaded input matrix with its provenance.
#[derive(Clone, Debug)]
pub struct InputMatrix {
    pub label: String,
    pub path: PathBuf,
    pub sha256: String,
    pub matrix: Arc<SampledMatrix>,
}

/// Manifest plus its matrices: constraints `1..=m` first, then the cost.
#[derive(Clone, Debug)]
pub struct LoadedManifest {
    pub path: PathBuf,
    pub sha256: String,
    pub manifest: Manifest,
    pub inputs: Vec<InputMatrix>,
}

pub fn load_manifest(path: &Path) -> Result<LoadedManifest> {
    let bytes = std::fs::read(path)?;
    let text = String::from_utf8(bytes.clone()).map_err(|_| parse_err(path, 0, "file is not UTF-8"))?;
    let manifest = parse_manifest(&text, path)?;
    let mut inputs = Vec::new();
    let labelled = manifest
        .constraints
        .iter()
        .enumerate()
        .map(|(k, c)| (format!("constraint{}", k + 1), c.path.clone()))
        .chain(manifest.cost.iter().map(|p| ("cost".to_string(), p.clone())));
    for (label, p) in labelled {
        let (m, sha) = load_matrix(&p)?;
        if m.dim() != manifest.n {
            return Err(Error::Shape(format!(
                "{} is {}x{} but the manifest declares n = {}",
                p.display(),
                m.dim(),
                m.dim(),
                manifest.n
            )));
        }
        inputs.push(InputMatrix {
            label,
            path: p,
            sha256: sha,
            matrix: Arc::new(m),
        });
    }
    Ok(LoadedManifest {
        path: path.to_path_buf(),
        sha256: sha256_hex(&bytes),
        manifest,
        inputs,
    })
}

/// The succinct witness: enough to answer entry queries given the inputs.
#[derive(Clone, Debug, PartialEq)]
pub enum WitnessDump {
    Uniform {
        n: usize,
    },
    Sketched {
        n: usize,
        support: Support,
        beta: f64,
        rank_bound: usize,
        /// `(input index, negated, multiplicity)`, 0-based input index.
        summands: Vec<(usize, bool, usize)>,
        p: usize,
        /// `(row, multiplicity, P)` with 0-based rows.
        rows: Vec<(usize, usize, f64)>,
        sigma: Vec<f64>,
        /// `rows.len() × sigma.len()` row-major.
        y: Vec<Complex64>,
        /// `r̃ × r̃` column-major.
        u: Vec<Complex64>,
        d: Vec<f64>,
        eta: (f64, f64),
    },
}

impl WitnessDump {
    /// Capture a state; `inputs` identifies each summand's storage.
    pub fn capture(g: &GibbsDescription, inputs: &[Arc<SampledMatrix>]) -> Result<Self> {
        let (Some(v), Some(s)) = (g.sketch(), g.surrogate()) else {
            return Ok(WitnessDump::Uniform { n: g.dim() });
        };
        let ms = v.matrix_sum();
        let summands = ms
            .summands()
            .iter()
            .map(|sm| {
                inputs
                    .iter()
                    .position(|m| Arc::ptr_eq(m, sm.matrix.inner()))
                    .map(|k| (k, sm.matrix.is_negated(), sm.multiplicity))
                    .ok_or_else(|| Error::Internal("witness summand is not an input matrix".into()))
            })
            .collect::<Result<Vec<_>>>()?;
        let rows = v
            .distinct_rows()
            .iter()
            .zip(v.multiplicities())
            .zip(v.probabilities())
            .map(|((&i, &m), &p)| (i, m, p))
            .collect();
        Ok(WitnessDump::Sketched {
            n: g.dim(),
            support: g.support(),
            beta: g.beta(),
            rank_bound: ms.rank_bound(),
            summands,
            p: v.p(),
            rows,
            sigma: v.sigma().to_vec(),
            y: v.merged_vectors().to_vec(),
            u: s.u.as_slice().to_vec(),
            d: s.d.clone(),
            eta: g.eta_parts(),
        })
    }

    /// Rebuild the state from the dump and the input matrices.
    pub fn rebuild(&self, inputs: &[Arc<SampledMatrix>]) -> Result<GibbsDescription> {
        match self {
            WitnessDump::Uniform { n } => Ok(gibbs::uniform(*n)),
            WitnessDump::Sketched {
                support,
                beta,
                rank_bound,
                summands,
                p,
                rows,
                sigma,
                y,
                u,
                d,
                ..
            } => {
                let list = summands
                    .iter()
                    .map(|&(k, neg, mult)| {
                        let m = inputs
                            .get(k)
                            .ok_or_else(|| Error::Index(format!("witness refers to input {}", k + 1)))?;
                        let matrix = if neg {
                            SignedMatrix::negated(Arc::clone(m))
                        } else {
                            SignedMatrix::new(Arc::clone(m))
                        };
                        Ok(Summand {
                            matrix,
                            multiplicity: mult,
                        })
                    })
                    .collect::<Result<Vec<_>>>()?;
                let ms = Arc::new(MatrixSum::new(list, *rank_bound)?);
                let samples: Vec<usize> = rows
                    .iter()
                    .flat_map(|&(i, m, _)| std::iter::repeat_n(i, m))
                    .collect();
                if samples.len() != *p {
                    return Err(Error::Shape(format!(
                        "row multiplicities add to {} but p = {p}",
                        samples.len()
                    )));
                }
                let v = VDescription::from_parts(
                    ms,
                    samples,
                    rows.iter().map(|r| r.2).collect(),
                    sigma.clone(),
                    y.clone(),
                )?;
                let r = d.len();
                if u.len() != r * r {
                    return Err(Error::Shape(format!("U has {} entries for rank {r}", u.len())));
                }
                let s = SpectralSurrogate {
                    u: DenseMatrix::from_column_slice(r, r, u),
                    d: d.clone(),
                };
                gibbs::make_gibbs_with(v, s, *beta, *support)
            }
        }
    }
}

/// A run report: ordered header fields, inputs, log lines and the witness.
#[derive(Clone, Debug, PartialEq, Default)]
pub struct Report {
    /// `key value` pairs, in output order.
    pub fields: Vec<(String, String)>,
    /// `(label, path, sha256)`; matrices in witness index order.
    pub inputs: Vec<(String, PathBuf, String)>,
    /// Free-form log lines such as `violation 1 2 3.5e-1`.
    pub log: Vec<String>,
    pub witness: Option<WitnessDump>,
}

impl Report {
    pub fn set(&mut self, key: &str, value: impl ToString) {
        let value = value.to_string();
        match self.fields.iter_mut().find(|(k, _)| k == key) {
            Some(f) => f.1 = value,
            None => self.fields.push((key.to_string(), value)),
        }
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.fields.iter().find(|(k, _)| k == key).map(|(_, v)| v.as_str())
    }

    pub fn render(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "{REPORT_HEADER}");
        for (k, v) in &self.fields {
            let _ = writeln!(s, "{k} {v}");
        }
        for (label, path, sha) in &self.inputs {
            let _ = writeln!(s, "input {label} {} {sha}", path.display());
        }
        for line in &self.log {
            let _ = writeln!(s, "{line}");
        }
        match &self.witness {
            None => {
                let _ = writeln!(s, "witness none");
            }
            Some(WitnessDump::Uniform { n }) => {
                let _ = writeln!(s, "witness uniform {n}");
            }
            Some(WitnessDump::Sketched {
                n,
                support,
                beta,
                rank_bound,
                summands,
                p,
                rows,
                sigma,
                y,
                u,
                d,
                eta,
            }) => {
                let r = sigma.len();
                let _ = writeln!(s, "witness sketched {n}");
                let _ = writeln!(s, "witness.support {}", support.name());
                let _ = writeln!(s, "witness.beta {}", fmt_f64(*beta));
                let _ = writeln!(s, "witness.rank_bound {rank_bound}");
                for &(k, neg, mult) in summands {
                    let _ = writeln!(s, "witness.summand {} {} {mult}", k + 1, if neg { '-' } else { '+' });
                }
                let _ = writeln!(s, "witness.p {p}");
                for &(i, m, pr) in rows {
                    let _ = writeln!(s, "witness.row {} {m} {}", i + 1, fmt_f64(pr));
                }
                for (k, x) in sigma.iter().enumerate() {
                    let _ = writeln!(s, "witness.sigma {} {}", k + 1, fmt_f64(*x));
                }
                for (idx, z) in y.iter().enumerate() {
                    let _ = writeln!(
                        s,
                        "witness.y {} {} {} {}",
                        idx / r + 1,
                        idx % r + 1,
                        fmt_f64(z.re),
                        fmt_f64(z.im)
                    );
                }
                let rr = d.len();
                for (idx, z) in u.iter().enumerate() {
                    let _ = writeln!(
                        s,
                        "witness.u {} {} {} {}",
                        idx % rr + 1,
                        idx / rr + 1,
                        fmt_f64(z.re),
                        fmt_f64(z.im)
                    );
                }
                for (k, x) in d.iter().enumerate() {
                    let _ = writeln!(s, "witness.d {} {}", k + 1, fmt_f64(*x));
                }
                let _ = writeln!(s, "witness.eta {} {}", fmt_f64(eta.0), fmt_f64(eta.1));
            }
        }
        let _ = writeln!(s, "end");
        s
    }

    pub fn parse(text: &str, path: &Path) -> Result<Self> {
        let mut lines = text.lines().enumerate().map(|(k, l)| (k + 1, l));
        match lines.next() {
            Some((_, h)) if h.trim() == REPORT_HEADER => {}
            _ => return Err(parse_err(path, 1, format!("expected `{REPORT_HEADER}`"))),
        }
        let mut report = Report::default();
        let mut witness: Option<(usize, bool)> = None;
        let (mut support, mut beta, mut rank_bound, mut p) = (Support::Full, 0.0, 1, 0);
        let mut summands = Vec::new();
        let mut rows = Vec::new();
        let mut sigma: Vec<f64> = Vec::new();
        let mut y: Vec<(usize, usize, Complex64)> = Vec::new();
        let mut u: Vec<(usize, usize, Complex64)> = Vec::new();
        let mut d: Vec<f64> = Vec::new();
        let mut eta = (0.0, 0.0);
        let mut ended = false;
        for (ln, raw) in lines {
            let f: Vec<&str> = raw.split_whitespace().collect();
            if f.is_empty() {
                continue;
            }
            let need = |k: usize| -> Result<()> {
                if f.len() == k {
                    Ok(())
                } else {
                    Err(parse_err(path, ln, format!("malformed `{}` line", f[0])))
                }
            };
            let complex = |a: &str, b: &str| -> Result<Complex64> {
                Ok(Complex64::new(num(path, ln, "real part", a)?, num(path, ln, "imaginary part", b)?))
            };
            match f[0] {
                "end" => {
                    ended = true;
                    break;
                }
                "input" => {
                    need(4)?;
                    report.inputs.push((f[1].to_string(), PathBuf::from(f[2]), f[3].to_string()));
                }
                "violation" | "call" | "term" | "trace" => report.log.push(f.join(" ")),
                "witness" => match f.get(1).copied() {
                    Some("none") => witness = None,
                    Some("uniform") => {
                        need(3)?;
                        witness = Some((num(path, ln, "dimension", f[2])?, false));
                    }
                    Some("sketched") => {
                        need(3)?;
                        witness = Some((num(path, ln, "dimension", f[2])?, true));
                    }
                    _ => return Err(parse_err(path, ln, "unknown witness kind")),
                },
                "witness.support" => {
                    need(2)?;
                    support = Support::parse(f[1]).ok_or_else(|| parse_err(path, ln, "unknown support"))?;
                }
                "witness.beta" => {
                    need(2)?;
                    beta = num(path, ln, "beta", f[1])?;
                }
                "witness.rank_bound" => {
                    need(2)?;
                    rank_bound = num(path, ln, "rank bound", f[1])?;
                }
                "witness.summand" => {
                    need(4)?;
                    let k: usize = num(path, ln, "input index", f[1])?;
                    let neg = match f[2] {
                        "+" => false,
                        "-" => true,
                        _ => return Err(parse_err(path, ln, "sign must be + or -")),
                    };
                    if k == 0 {
                        return Err(parse_err(path, ln, "input indices start at 1"));
                    }
                    summands.push((k - 1, neg, num(path, ln, "multiplicity", f[3])?));
                }
                "witness.p" => {
                    need(2)?;
                    p = num(path, ln, "p", f[1])?;
                }
                "witness.row" => {
                    need(4)?;
                    let i: usize = num(path, ln, "row", f[1])?;
                    if i == 0 {
                        return Err(parse_err(path, ln, "rows start at 1"));
                    }
                    rows.push((i - 1, num(path, ln, "multiplicity", f[2])?, num(path, ln, "probability", f[3])?));
                }
                "witness.sigma" => {
                    need(3)?;
                    sigma.push(num(path, ln, "singular value", f[2])?);
                }
                "witness.y" | "witness.u" => {
                    need(5)?;
                    let a: usize = num(path, ln, "index", f[1])?;
                    let b: usize = num(path, ln, "index", f[2])?;
                    if a == 0 || b == 0 {
                        return Err(parse_err(path, ln, "indices start at 1"));
                    }
                    let z = complex(f[3], f[4])?;
                    if f[0] == "witness.y" { &mut y } else { &mut u }.push((a - 1, b - 1, z));
                }
                "witness.d" => {
                    need(3)?;
                    d.push(num(path, ln, "eigenvalue", f[2])?);
                }
                "witness.eta" => {
                    need(3)?;
                    eta = (num(path, ln, "mantissa", f[1])?, num(path, ln, "log scale", f[2])?);
                }
                key => {
                    let value = raw.trim_start()[key.len()..].trim().to_string();
                    report.fields.push((key.to_string(), value));
                }
            }
        }
        if !ended {
            return Err(parse_err(path, 0, "report is truncated (no `end` line)"));
        }
        report.witness = match witness {
            None => None,
            Some((n, false)) => Some(WitnessDump::Uniform { n }),
            Some((n, true)) => {
                let r = sigma.len();
                let rr = d.len();
                let mut yv = vec![Complex64::default(); rows.len() * r];
                for (a, k, z) in y {
                    if a >= rows.len() || k >= r {
                        return Err(parse_err(path, 0, "witness.y index out of range"));
                    }
                    yv[a * r + k] = z;
                }
                let mut uv = vec![Complex64::default(); rr * rr];
                for (a, k, z) in u {
                    if a >= rr || k >= rr {
                        return Err(parse_err(path, 0, "witness.u index out of range"));
                    }
                    uv[k * rr + a] = z;
                }
                Some(WitnessDump::Sketched {
                    n,
                    support,
                    beta,
                    rank_bound,
                    summands,
                    p,
                    rows,
                    sigma,
                    y: yv,
                    u: uv,
                    d,
                    eta,
                })
            }
        };
        Ok(report)
    }
}
