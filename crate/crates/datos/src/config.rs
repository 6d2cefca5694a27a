//! Experiment configuration: a flat `key = value` text format with
//! `[section]` headers and `#` comments, validated into a typed tree.
//!
//! Unknown sections and keys are rejected with the offending line number so
//! typos fail loudly instead of silently falling back to defaults. Values
//! never contain commas except on the two sweep axes — `solver.kind` and
//! `graph.p` — and those lists are legal only through [`SweepPlan`];
//! [`ExperimentConfig::parse_str`] wants exactly one value per key.

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::Serialize;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ProblemKind {
    /// Synthetic binary classification with an l1 penalty.
    LogisticL1,
    /// Gaussian covariance estimation inside a spectral box.
    Covariance,
    /// Least squares with per-agent ridge schedule plus l1.
    ElasticNet,
    /// l1-regularized logistic regression on a LIBSVM file split across
    /// agents.
    Custom,
}

pub const PROBLEM_KINDS: &str = "logistic_l1 | covariance | elastic_net | custom";

impl FromStr for ProblemKind {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "logistic_l1" => Ok(ProblemKind::LogisticL1),
            "covariance" => Ok(ProblemKind::Covariance),
            "elastic_net" => Ok(ProblemKind::ElasticNet),
            "custom" => Ok(ProblemKind::Custom),
            other => Err(format!("unknown problem kind {other:?}; valid: {PROBLEM_KINDS}")),
        }
    }
}

impl fmt::Display for ProblemKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ProblemKind::LogisticL1 => "logistic_l1",
            ProblemKind::Covariance => "covariance",
            ProblemKind::ElasticNet => "elastic_net",
            ProblemKind::Custom => "custom",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SolverKind {
    GlobalDatos,
    LocalDatos,
    PgExtra,
    Reference,
}

pub const SOLVER_KINDS: &str = "global_datos | local_datos | pg_extra | reference";

impl FromStr for SolverKind {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "global_datos" => Ok(SolverKind::GlobalDatos),
            "local_datos" => Ok(SolverKind::LocalDatos),
            "pg_extra" => Ok(SolverKind::PgExtra),
            "reference" => Ok(SolverKind::Reference),
            other => Err(format!("unknown solver {other:?}; valid: {SOLVER_KINDS}")),
        }
    }
}

impl fmt::Display for SolverKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SolverKind::GlobalDatos => "global_datos",
            SolverKind::LocalDatos => "local_datos",
            SolverKind::PgExtra => "pg_extra",
            SolverKind::Reference => "reference",
        })
    }
}

/// `[problem]` section. Which fields apply depends on `kind`; supplying a
/// field the kind does not read is a configuration error.
#[derive(Debug, Clone, Serialize)]
pub struct ProblemConfig {
    pub kind: ProblemKind,
    /// Samples per agent (synthetic kinds).
    pub n: usize,
    /// Decision dimension; for `covariance` the matrix side, so the
    /// flattened variable has d² entries.
    pub d: usize,
    /// l1 weight (all kinds except `covariance`). Default 0.1.
    pub lambda: f64,
    /// Ridge schedule γ_i = gamma_base + i·gamma_step (`elastic_net`).
    /// Defaults 0.1 and 0.01.
    pub gamma_base: f64,
    pub gamma_step: f64,
    /// Spectral box bounds (`covariance`). Defaults 0.1 and 10.0.
    pub lower: f64,
    pub upper: f64,
    /// LIBSVM file (`custom` only, required there).
    pub data_file: Option<PathBuf>,
}

/// `[graph]` section: Erdős–Rényi with edge probability `p`, or an explicit
/// edge-list file. The generator seed lives in `[seeds] graph`.
#[derive(Debug, Clone, Serialize)]
pub struct GraphConfig {
    pub m: usize,
    pub p: f64,
    pub file: Option<PathBuf>,
}

/// `[solver]` section.
#[derive(Debug, Clone, Serialize)]
pub struct SolverConfig {
    pub kind: SolverKind,
    /// Line-search contraction; default 0.9.
    pub delta: f64,
    /// Stepsize "before iteration zero", the first ladder seed; default 10.
    pub alpha_init: f64,
    /// Fixed stepsize for `pg_extra`, which has no line search. Required
    /// when that solver is selected, ignored otherwise (so one sweep config
    /// can cover adaptive and fixed-step solvers).
    pub pg_alpha: Option<f64>,
}

/// `[seeds]` section; three independent streams so regenerating the graph
/// does not perturb the data or the starting point. Defaults 1, 2, 3.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct Seeds {
    pub graph: u64,
    pub problem: u64,
    pub init: u64,
}

/// `[run]` section.
#[derive(Debug, Clone, Serialize)]
pub struct RunConfig {
    pub iters: u64,
    /// Emit a metrics row every `stride` iterations (the final iteration is
    /// always emitted); default 1.
    pub stride: u64,
    /// Output directory; the CLI's `--out` overrides it.
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Serialize)]
pub struct ExperimentConfig {
    pub problem: ProblemConfig,
    pub graph: GraphConfig,
    /// Lazy-mixing weight in W = (1−c)I + cW̃; default 1/3.
    pub mixing_c: f64,
    pub solver: SolverConfig,
    pub seeds: Seeds,
    pub run: RunConfig,
}

impl ExperimentConfig {
    /// # Errors
    /// [`Error::Parse`] for grammar violations (named by line), and
    /// [`Error::Config`] for well-formed files whose values are out of
    /// range or inconsistent with the chosen kinds.
    pub fn parse_str(text: &str) -> Result<Self> {
        let mut raw = RawConfig::parse(text)?;
        let solver_kind = raw.section("solver").take_one::<SolverKind>("kind")?;
        let p = raw.section("graph").take::<f64>("p")?;
        let cfg = build_config(&mut raw, solver_kind, p)?;
        raw.finish()?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// # Errors
    /// As [`parse_str`](Self::parse_str), plus I/O failures opening `path`.
    pub fn read_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::parse_str(&text)
    }

    /// Applies the CLI's single master seed: graph, problem and init
    /// streams get `s`, `s+1`, `s+2`.
    pub fn set_master_seed(&mut self, s: u64) {
        self.seeds = Seeds { graph: s, problem: s.wrapping_add(1), init: s.wrapping_add(2) };
    }

    /// Range checks shared by the parser and by callers that mutate a
    /// parsed config (CLI flag overrides). Key-applicability rules are
    /// enforced at parse time only — they concern which keys may appear,
    /// not which values are legal.
    pub fn validate(&self) -> Result<()> {
        let p = &self.problem;
        match p.kind {
            ProblemKind::Custom => {
                if p.data_file.is_none() {
                    return Err(Error::Config(
                        "problem.data_file is required for kind = custom".into(),
                    ));
                }
            }
            _ => {
                if p.n == 0 || p.d == 0 {
                    return Err(Error::Config(format!(
                        "problem.n and problem.d are required for kind = {} (>= 1)",
                        p.kind
                    )));
                }
            }
        }
        if !(p.lambda.is_finite() && p.lambda >= 0.0) {
            return Err(Error::Config(format!("problem.lambda must be >= 0 (got {})", p.lambda)));
        }
        if !(p.gamma_base >= 0.0 && p.gamma_step >= 0.0) {
            return Err(Error::Config("problem ridge schedule must be nonnegative".into()));
        }
        if !(p.lower > 0.0 && p.upper >= p.lower && p.upper.is_finite()) {
            return Err(Error::Config(format!(
                "problem spectral box must satisfy 0 < lower <= upper (got [{}, {}])",
                p.lower, p.upper
            )));
        }

        if self.graph.m == 0 {
            return Err(Error::Config("graph.m must be >= 1".into()));
        }
        if self.graph.file.is_none() && !(0.0..=1.0).contains(&self.graph.p) {
            return Err(Error::Config(format!(
                "graph.p must lie in [0, 1] (got {})",
                self.graph.p
            )));
        }

        if !(self.mixing_c > 0.0 && self.mixing_c < 0.5) {
            return Err(Error::Config(format!(
                "mixing.c must lie strictly inside (0, 1/2) (got {})",
                self.mixing_c
            )));
        }

        let s = &self.solver;
        if !(s.delta > 0.0 && s.delta <= 1.0) {
            return Err(Error::Config(format!(
                "solver.delta must lie in (0, 1] (got {})",
                s.delta
            )));
        }
        if !(s.alpha_init.is_finite() && s.alpha_init > 0.0) {
            return Err(Error::Config(format!(
                "solver.alpha_init must be positive and finite (got {})",
                s.alpha_init
            )));
        }
        match s.pg_alpha {
            None if s.kind == SolverKind::PgExtra => {
                return Err(Error::Config(
                    "solver.pg_alpha is required for kind = pg_extra".into(),
                ));
            }
            Some(a) if !(a.is_finite() && a > 0.0) => {
                return Err(Error::Config(format!(
                    "solver.pg_alpha must be positive and finite (got {a})"
                )));
            }
            _ => {}
        }

        if self.run.stride == 0 {
            return Err(Error::Config("run.stride must be >= 1".into()));
        }
        Ok(())
    }
}

/// Parsed sweep request: the Cartesian product of solver kinds and graph
/// densities, sharing every other setting.
#[derive(Debug, Clone)]
pub struct SweepPlan {
    template: ExperimentConfig,
    pub solvers: Vec<SolverKind>,
    pub ps: Vec<f64>,
}

impl SweepPlan {
    /// Like [`ExperimentConfig::parse_str`] but `solver.kind` and `graph.p`
    /// may be comma-separated lists.
    ///
    /// # Errors
    /// Grammar and range errors as for a single config; every cell of the
    /// product is validated, so e.g. listing `pg_extra` without
    /// `solver.pg_alpha` fails here rather than mid-sweep.
    pub fn parse_str(text: &str) -> Result<Self> {
        let mut raw = RawConfig::parse(text)?;
        let solvers = raw.section("solver").take_list::<SolverKind>("kind")?;
        let ps = raw.section("graph").take_list::<f64>("p")?;
        let template = build_config(&mut raw, solvers[0], Some(ps[0]))?;
        raw.finish()?;
        let plan = SweepPlan { template, solvers, ps };
        for cell in plan.cells() {
            cell.validate()?;
        }
        Ok(plan)
    }

    /// # Errors
    /// As [`parse_str`](Self::parse_str), plus I/O failures opening `path`.
    pub fn read_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::parse_str(&text)
    }

    /// One config per (solver, p) pair, solvers outermost, in listed order.
    pub fn cells(&self) -> Vec<ExperimentConfig> {
        let mut out = Vec::with_capacity(self.solvers.len() * self.ps.len());
        for &kind in &self.solvers {
            for &p in &self.ps {
                let mut cfg = self.template.clone();
                cfg.solver.kind = kind;
                cfg.graph.p = p;
                out.push(cfg);
            }
        }
        out
    }

    pub fn set_master_seed(&mut self, s: u64) {
        self.template.set_master_seed(s);
    }

    /// Directory name for one cell, e.g. `global_datos_p0.5`.
    pub fn cell_dir(kind: SolverKind, p: f64) -> String {
        format!("{kind}_p{p}")
    }
}

/// Everything after the two axis keys is common to single runs and sweeps.
fn build_config(
    raw: &mut RawConfig,
    solver_kind: SolverKind,
    p: Option<f64>,
) -> Result<ExperimentConfig> {
    let mut sec = raw.section("problem");
    let kind = sec.take_one::<ProblemKind>("kind")?;
    let n = sec.take::<usize>("n")?;
    let d = sec.take::<usize>("d")?;
    let lambda = sec.take::<f64>("lambda")?;
    let gamma_base = sec.take::<f64>("gamma_base")?;
    let gamma_step = sec.take::<f64>("gamma_step")?;
    let lower = sec.take::<f64>("lower")?;
    let upper = sec.take::<f64>("upper")?;
    let data_file = sec.take::<String>("data_file")?.map(PathBuf::from);
    reject_inapplicable(
        kind,
        &[
            ("n", n.is_some(), kind != ProblemKind::Custom),
            ("d", d.is_some(), kind != ProblemKind::Custom),
            ("lambda", lambda.is_some(), kind != ProblemKind::Covariance),
            ("gamma_base", gamma_base.is_some(), kind == ProblemKind::ElasticNet),
            ("gamma_step", gamma_step.is_some(), kind == ProblemKind::ElasticNet),
            ("lower", lower.is_some(), kind == ProblemKind::Covariance),
            ("upper", upper.is_some(), kind == ProblemKind::Covariance),
            ("data_file", data_file.is_some(), kind == ProblemKind::Custom),
        ],
    )?;
    let problem = ProblemConfig {
        kind,
        n: n.unwrap_or(0),
        d: d.unwrap_or(0),
        lambda: lambda.unwrap_or(0.1),
        gamma_base: gamma_base.unwrap_or(0.1),
        gamma_step: gamma_step.unwrap_or(0.01),
        lower: lower.unwrap_or(0.1),
        upper: upper.unwrap_or(10.0),
        data_file,
    };

    let mut sec = raw.section("graph");
    let m = sec.take_one::<usize>("m")?;
    let file = sec.take::<String>("file")?.map(PathBuf::from);
    // `p` is stored as 0.0 when an explicit edge list supersedes it.
    let p = match (p, &file) {
        (Some(p), None) => p,
        (None, Some(_)) => 0.0,
        (Some(_), Some(_)) => {
            return Err(Error::Config(
                "graph.p and graph.file are mutually exclusive".into(),
            ));
        }
        (None, None) => {
            return Err(Error::Config(
                "missing required key graph.p (or graph.file)".into(),
            ));
        }
    };
    let graph = GraphConfig { m, p, file };

    let mixing_c = raw.section("mixing").take::<f64>("c")?.unwrap_or(1.0 / 3.0);

    let mut sec = raw.section("solver");
    let solver = SolverConfig {
        kind: solver_kind,
        delta: sec.take::<f64>("delta")?.unwrap_or(0.9),
        alpha_init: sec.take::<f64>("alpha_init")?.unwrap_or(10.0),
        pg_alpha: sec.take::<f64>("pg_alpha")?,
    };

    let mut sec = raw.section("seeds");
    let seeds = Seeds {
        graph: sec.take::<u64>("graph")?.unwrap_or(1),
        problem: sec.take::<u64>("problem")?.unwrap_or(2),
        init: sec.take::<u64>("init")?.unwrap_or(3),
    };

    let mut sec = raw.section("run");
    let run = RunConfig {
        iters: sec.take_one::<u64>("iters")?,
        stride: sec.take::<u64>("stride")?.unwrap_or(1),
        out: sec.take::<String>("out")?.map(PathBuf::from),
    };

    Ok(ExperimentConfig { problem, graph, mixing_c, solver, seeds, run })
}

fn reject_inapplicable(kind: ProblemKind, checks: &[(&str, bool, bool)]) -> Result<()> {
    for &(key, present, applicable) in checks {
        if present && !applicable {
            return Err(Error::Config(format!(
                "problem.{key} does not apply to kind = {kind}"
            )));
        }
        // Dimensions have no sensible default; everything else does.
        if !present && applicable && (key == "n" || key == "d") {
            return Err(Error::Config(format!(
                "problem.{key} is required for kind = {kind}"
            )));
        }
    }
    Ok(())
}

const SECTIONS: [&str; 6] = ["problem", "graph", "mixing", "solver", "seeds", "run"];

/// Raw `section.key -> (line, value)` map with take-and-check accounting:
/// whatever nobody consumed is an unknown key.
struct RawConfig {
    items: BTreeMap<(String, String), (usize, String)>,
}

struct SectionView<'a> {
    name: &'static str,
    raw: &'a mut RawConfig,
}

impl RawConfig {
    fn parse(text: &str) -> Result<RawConfig> {
        let mut items = BTreeMap::new();
        let mut section: Option<String> = None;
        for (idx, raw_line) in text.lines().enumerate() {
            let line_no = idx + 1;
            let line = match raw_line.find('#') {
                Some(pos) => &raw_line[..pos],
                None => raw_line,
            }
            .trim();
            if line.is_empty() {
                continue;
            }
            if let Some(stripped) = line.strip_prefix('[') {
                let Some(name) = stripped.strip_suffix(']') else {
                    return Err(Error::Parse {
                        line: line_no,
                        msg: format!("unterminated section header {line:?}"),
                    });
                };
                let name = name.trim();
                if !SECTIONS.contains(&name) {
                    return Err(Error::Parse {
                        line: line_no,
                        msg: format!(
                            "unknown section [{name}]; valid sections: {}",
                            SECTIONS.join(", ")
                        ),
                    });
                }
                section = Some(name.to_string());
                continue;
            }
            let Some(eq) = line.find('=') else {
                return Err(Error::Parse {
                    line: line_no,
                    msg: format!("expected `key = value`, got {line:?}"),
                });
            };
            let key = line[..eq].trim();
            let value = line[eq + 1..].trim();
            if key.is_empty() {
                return Err(Error::Parse { line: line_no, msg: "empty key".into() });
            }
            if value.is_empty() {
                return Err(Error::Parse {
                    line: line_no,
                    msg: format!("empty value for key {key:?}"),
                });
            }
            let Some(sec) = &section else {
                return Err(Error::Parse {
                    line: line_no,
                    msg: format!("key {key:?} appears before any [section] header"),
                });
            };
            let prev = items.insert(
                (sec.clone(), key.to_string()),
                (line_no, value.to_string()),
            );
            if let Some((first_line, _)) = prev {
                return Err(Error::Parse {
                    line: line_no,
                    msg: format!("duplicate key {sec}.{key} (first set on line {first_line})"),
                });
            }
        }
        Ok(RawConfig { items })
    }

    fn section(&mut self, name: &'static str) -> SectionView<'_> {
        SectionView { name, raw: self }
    }

    /// # Errors
    /// [`Error::Parse`] naming the earliest unconsumed key.
    fn finish(self) -> Result<()> {
        if let Some(((sec, key), (line, _))) =
            self.items.iter().min_by_key(|(_, (line, _))| *line)
        {
            return Err(Error::Parse {
                line: *line,
                msg: format!("unknown key {sec}.{key}"),
            });
        }
        Ok(())
    }
}

impl SectionView<'_> {
    fn take_raw(&mut self, key: &str) -> Option<(usize, String)> {
        self.raw.items.remove(&(self.name.to_string(), key.to_string()))
    }

    fn take<T: FromStr>(&mut self, key: &str) -> Result<Option<T>>
    where
        T::Err: fmt::Display,
    {
        match self.take_raw(key) {
            None => Ok(None),
            Some((line, value)) => match value.parse::<T>() {
                Ok(v) => Ok(Some(v)),
                Err(e) => Err(Error::Parse {
                    line,
                    msg: format!("{}.{key}: {e}", self.name),
                }),
            },
        }
    }

    fn take_one<T: FromStr>(&mut self, key: &str) -> Result<T>
    where
        T::Err: fmt::Display,
    {
        self.take::<T>(key)?.ok_or_else(|| {
            Error::Config(format!("missing required key {}.{key}", self.name))
        })
    }

    /// Comma-separated list, each element parsed as `T`; for the sweep axes.
    fn take_list<T: FromStr>(&mut self, key: &str) -> Result<Vec<T>>
    where
        T::Err: fmt::Display,
    {
        let Some((line, value)) = self.take_raw(key) else {
            return Err(Error::Config(format!("missing required key {}.{key}", self.name)));
        };
        let mut out = Vec::new();
        for part in value.split(',') {
            let part = part.trim();
            if part.is_empty() {
                return Err(Error::Parse {
                    line,
                    msg: format!("{}.{key}: empty list element", self.name),
                });
            }
            out.push(part.parse::<T>().map_err(|e| Error::Parse {
                line,
                msg: format!("{}.{key}: {e}", self.name),
            })?);
        }
        Ok(out)
    }
}
