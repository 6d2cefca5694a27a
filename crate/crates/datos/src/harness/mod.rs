//! Experiment orchestration: build the network and problem from a config,
//! solve for `u*` with the centralized oracle, drive the chosen solver for
//! K iterations, and write plot-ready CSV/JSON outputs.
//!
//! Everything downstream of the config is a pure function of its seeds:
//! rerunning a config byte-reproduces the metrics table regardless of
//! worker-pool size.

mod ergodic;
mod metrics;

pub use ergodic::ErgodicTracker;
pub use metrics::{render_csv, MetricsRow, CSV_HEADER};

use std::path::Path;

use ndarray::{Array1, Array2};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::Serialize;

use crate::config::{ExperimentConfig, ProblemKind, SolverKind};
use crate::error::{Error, Result};
use crate::graph::Graph;
use crate::mixing::MixingMatrix;
use crate::problems::{
    gen_covariance_instance, gen_logistic_instance, gen_regression_instance, partition_dataset,
    random_spd, read_libsvm_file, CompositeProblem, LogisticLoss, SmoothLoss, L1,
};
use crate::solvers::{
    centralized_proxgrad, davis_yin_reference_step, global_datos_step, local_datos_step,
    pg_extra_init, pg_extra_step, CommCounts, GlobalState, LocalOptions, LocalState, PgExtraState,
    ReferenceState, StepMetrics,
};

/// Iterate Frobenius norm past which a run is declared divergent and cut
/// short, keeping whatever rows were already recorded.
const DIVERGENCE_NORM: f64 = 1e12;

/// Oracle effort for `u*`. Gaps are reported against this value, so it is
/// solved far past the accuracy the decentralized runs will reach. Public
/// so the standalone oracle command solves at exactly the same settings.
pub const ORACLE_TOL: f64 = 1e-12;
pub const ORACLE_MAX_ITER: u64 = 5_000_000;
pub const ORACLE_DELTA: f64 = 0.9;

/// Cumulative communication totals for a whole run.
#[derive(Debug, Clone, Copy, Default, Serialize)]
pub struct CommLedger {
    pub vector_rounds: u64,
    pub scalar_rounds: u64,
    pub broadcasts: u64,
}

impl CommLedger {
    pub fn add(&mut self, c: &CommCounts) {
        self.vector_rounds += c.vector_rounds;
        self.scalar_rounds += c.scalar_rounds;
        self.broadcasts += c.broadcasts;
    }
}

#[derive(Debug)]
pub struct RunOutcome {
    pub rows: Vec<MetricsRow>,
    pub u_star: f64,
    /// Oracle argmin; kept for the distance metric only on the strongly
    /// convex elastic-net family, where the argmin is unique.
    pub x_star: Option<Array1<f64>>,
    pub oracle_iterations: u64,
    pub diverged: bool,
    /// Per-agent objective evaluations that came back non-finite (iterate
    /// outside the effective domain), summed over all iterations.
    pub nonfinite_objective_rows: u64,
    /// Σ of accepted stepsizes, and the objective gap at the ergodic
    /// average — tracked for the solvers with a shared scalar stepsize.
    pub theta: Option<f64>,
    pub ergodic_gap: Option<f64>,
    pub comm: CommLedger,
    pub warnings: Vec<String>,
}

/// # Errors
/// I/O or parse failures for file-backed graphs; a mismatch between
/// `graph.m` and the file's vertex count is a configuration error.
pub fn build_graph(cfg: &ExperimentConfig) -> Result<Graph> {
    let g = match &cfg.graph.file {
        Some(path) => {
            let text = std::fs::read_to_string(path)?;
            Graph::parse_edge_list(&text)?
        }
        None => Graph::erdos_renyi(cfg.graph.m, cfg.graph.p, cfg.seeds.graph)?,
    };
    if g.vertex_count() != cfg.graph.m {
        return Err(Error::Config(format!(
            "graph file has {} vertices but graph.m = {}",
            g.vertex_count(),
            cfg.graph.m
        )));
    }
    Ok(g)
}

/// Instantiates the configured problem family. Returned warnings are
/// human-readable notes (currently only: rows dropped to equalize LIBSVM
/// shards) that callers should surface but not fail on.
pub fn build_problem(cfg: &ExperimentConfig) -> Result<(CompositeProblem, Vec<String>)> {
    let p = &cfg.problem;
    let m = cfg.graph.m;
    let seed = cfg.seeds.problem;
    let mut warnings = Vec::new();
    let prob = match p.kind {
        ProblemKind::LogisticL1 => gen_logistic_instance(m, p.n, p.d, p.lambda, seed)?,
        ProblemKind::ElasticNet => {
            gen_regression_instance(m, p.n, p.d, p.gamma_base, p.gamma_step, p.lambda, seed)?
                .problem
        }
        ProblemKind::Covariance => {
            // Ground-truth Σ and the sample draws use adjacent seeds so
            // both stay pinned by `seeds.problem` alone.
            let sigma = random_spd(p.d, seed);
            gen_covariance_instance(
                sigma.view(),
                p.n,
                m,
                p.lower,
                p.upper,
                seed.wrapping_add(1),
                false,
            )?
        }
        ProblemKind::Custom => {
            let path = p.data_file.as_ref().expect("validated at parse time");
            let ds = read_libsvm_file(path)?;
            let part = partition_dataset(&ds, m)?;
            if part.dropped > 0 {
                warnings.push(format!(
                    "dropped {} trailing rows of {} to give every agent {} samples",
                    part.dropped,
                    ds.len(),
                    ds.len() / m
                ));
            }
            let losses: Vec<Box<dyn SmoothLoss>> = part
                .shards
                .iter()
                .map(|shard| {
                    LogisticLoss::from_dataset(shard).map(|l| Box::new(l) as Box<dyn SmoothLoss>)
                })
                .collect::<Result<_>>()?;
            CompositeProblem::new(losses, Box::new(L1::new(p.lambda)?))?
        }
    };
    Ok((prob, warnings))
}

/// Random start per the experimental protocol: X⁰ and S⁰ standard normal
/// (one ChaCha8 stream, X first). Any X⁰ row outside its loss's effective
/// domain is replaced by its proximal projection, so gradients exist from
/// step one; S⁰ needs no such repair.
pub fn initial_state(prob: &CompositeProblem, seed: u64) -> (Array2<f64>, Array2<f64>) {
    let m = prob.m();
    let d = prob.dim();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut draw = || -> f64 { StandardNormal.sample(&mut rng) };
    let mut x0 = Array2::from_shape_simple_fn((m, d), &mut draw);
    let s0 = Array2::from_shape_simple_fn((m, d), &mut draw);
    for i in 0..m {
        if !prob.loss(i).in_domain(x0.row(i)) {
            let fixed = prob.reg().prox(x0.row(i), 1.0);
            x0.row_mut(i).assign(&fixed);
        }
    }
    (x0, s0)
}

enum Drive {
    Global(GlobalState),
    Local(LocalState),
    Reference(ReferenceState),
    PgExtra(PgExtraState),
}

impl Drive {
    /// The primal block a reader of the metrics would call "X".
    fn x(&self) -> &Array2<f64> {
        match self {
            Drive::Global(st) => &st.x,
            Drive::Local(st) => &st.x,
            Drive::Reference(st) => &st.t_b1,
            Drive::PgExtra(st) => &st.x,
        }
    }

    /// Advances one iteration. The third return is the ergodic sample
    /// `(α, T_𝔸, S)` for the shared-stepsize solvers; `T_𝔸` is
    /// reconstructed as `X⁺ + α(S⁺ − S)`, which equals the pre-prox point
    /// without widening the solver interfaces.
    #[allow(clippy::type_complexity)]
    fn step(
        self,
        prob: &CompositeProblem,
        mix: &MixingMatrix,
        delta: f64,
    ) -> Result<(Drive, StepMetrics, Option<(f64, Array2<f64>, Array2<f64>)>)> {
        match self {
            Drive::Global(st) => {
                let (next, m) = global_datos_step(&st, prob, mix, delta)?;
                let alpha = m.alpha_used.min();
                let t_a = &next.x + &((&next.s - &st.s) * alpha);
                let s = next.s.clone();
                Ok((Drive::Global(next), m, Some((alpha, t_a, s))))
            }
            Drive::Local(st) => {
                let (next, m) = local_datos_step(&st, prob, mix, delta, &LocalOptions::default())?;
                Ok((Drive::Local(next), m, None))
            }
            Drive::Reference(st) => {
                let (next, m) = davis_yin_reference_step(&st, prob, delta)?;
                let alpha = m.alpha_used.min();
                let t_a = &next.t_b1 + &((&next.s1 - &st.s1) * alpha);
                let s = next.s1.clone();
                Ok((Drive::Reference(next), m, Some((alpha, t_a, s))))
            }
            Drive::PgExtra(st) => {
                let (next, m) = pg_extra_step(&st, prob, mix)?;
                Ok((Drive::PgExtra(next), m, None))
            }
        }
    }
}

/// Folds per-iteration metrics into rows, cumulative counters, and the
/// divergence verdict.
struct Recorder<'a> {
    rows: Vec<MetricsRow>,
    ledger: CommLedger,
    trials: u64,
    nonfinite: u64,
    u_star: f64,
    x_star: Option<&'a Array1<f64>>,
    stride: u64,
    k_max: u64,
}

impl Recorder<'_> {
    /// Returns true when the iterate norm crossed the divergence threshold;
    /// that final row is always emitted.
    fn record(&mut self, k: u64, x: &Array2<f64>, m: &StepMetrics) -> bool {
        self.ledger.add(&m.comm);
        self.trials += m.linesearch_trials.iter().map(|&t| u64::from(t)).sum::<u64>();

        let mut sum = 0.0;
        let mut finite = 0usize;
        for &u in &m.objective_per_agent {
            if u.is_finite() {
                sum += u;
                finite += 1;
            }
        }
        self.nonfinite += (m.objective_per_agent.len() - finite) as u64;
        let gap = if finite > 0 { sum / finite as f64 - self.u_star } else { f64::NAN };

        let frob_sq: f64 = x.iter().map(|v| v * v).sum();
        let diverged = !frob_sq.is_finite() || frob_sq.sqrt() > DIVERGENCE_NORM;

        let dist_sq = match self.x_star {
            Some(xs) => {
                let mut s = 0.0;
                for row in x.rows() {
                    for (v, t) in row.iter().zip(xs.iter()) {
                        s += (v - t) * (v - t);
                    }
                }
                s
            }
            None => f64::NAN,
        };

        if k % self.stride == 0 || k == self.k_max || diverged {
            self.rows.push(MetricsRow {
                k,
                gap,
                consensus_err: m.consensus_error,
                dist_sq,
                alpha_min: m.alpha_used.min(),
                alpha_max: m.alpha_used.max(),
                vec_rounds: self.ledger.vector_rounds,
                scal_rounds: self.ledger.scalar_rounds,
                bcasts: self.ledger.broadcasts,
                ls_trials: self.trials,
            });
        }
        diverged
    }
}

/// Runs one configured experiment end to end.
///
/// # Errors
/// Configuration problems (graph/problem construction), oracle failure
/// (`u*` is required before any gap can be reported), and solver
/// breakdowns (stepsize underflow, non-finite anchors). Divergence is NOT
/// an error: the outcome carries the partial rows and the `diverged` flag.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<RunOutcome> {
    let graph = build_graph(cfg)?;
    let (prob, warnings) = build_problem(cfg)?;
    let mix = MixingMatrix::metropolis(graph, cfg.mixing_c)?;

    let oracle = centralized_proxgrad(&prob, ORACLE_DELTA, ORACLE_TOL, ORACLE_MAX_ITER)?;
    if !oracle.converged {
        return Err(Error::Numerical(format!(
            "centralized oracle still moving after {ORACLE_MAX_ITER} iterations \
             (step norm {:.3e}); refusing to report gaps against an unconverged u*",
            oracle.final_step_norm
        )));
    }
    let u_star = oracle.u_star;
    let x_star =
        (cfg.problem.kind == ProblemKind::ElasticNet).then(|| oracle.x.clone());

    let k_max = cfg.run.iters;
    let mut rec = Recorder {
        rows: Vec::new(),
        ledger: CommLedger::default(),
        trials: 0,
        nonfinite: 0,
        u_star,
        x_star: x_star.as_ref(),
        stride: cfg.run.stride,
        k_max,
    };
    let mut tracker = matches!(cfg.solver.kind, SolverKind::GlobalDatos | SolverKind::Reference)
        .then(|| ErgodicTracker::new(prob.m(), prob.dim()));

    let mut diverged = false;
    if k_max > 0 {
        let (x0, s0) = initial_state(&prob, cfg.seeds.init);
        let alpha_init = cfg.solver.alpha_init;
        let delta = cfg.solver.delta;

        // PG-EXTRA's initialization step already produces x¹ (and costs its
        // one vector round), so the main loop starts at k = 2 for it.
        let (d0, start_k) = match cfg.solver.kind {
            SolverKind::GlobalDatos => (Drive::Global(GlobalState::new(x0, s0, alpha_init)?), 1),
            SolverKind::LocalDatos => (Drive::Local(LocalState::new(x0, s0, alpha_init)?), 1),
            SolverKind::Reference => {
                (Drive::Reference(ReferenceState::new(x0, s0, alpha_init, &mix)?), 1)
            }
            SolverKind::PgExtra => {
                let alpha = cfg.solver.pg_alpha.expect("validated at parse time");
                let (st, m0) = pg_extra_init(x0, &prob, &mix, alpha)?;
                diverged = rec.record(1, &st.x, &m0);
                (Drive::PgExtra(st), 2)
            }
        };
        let mut d = d0;
        if !diverged {
            for k in start_k..=k_max {
                let (next, m, erg) = d.step(&prob, &mix, delta)?;
                if let (Some(t), Some((alpha, t_a, s))) = (tracker.as_mut(), erg) {
                    t.update(alpha, &t_a, &s);
                }
                d = next;
                if rec.record(k, d.x(), &m) {
                    diverged = true;
                    break;
                }
            }
        }
    }

    let (theta, ergodic_gap) = match &tracker {
        Some(t) if t.theta() > 0.0 => {
            let us = prob.objective_per_agent(t.tbar());
            let finite: Vec<f64> = us.into_iter().filter(|u| u.is_finite()).collect();
            let gap = if finite.is_empty() {
                f64::NAN
            } else {
                finite.iter().sum::<f64>() / finite.len() as f64 - u_star
            };
            (Some(t.theta()), Some(gap))
        }
        Some(_) | None => (None, None),
    };

    let Recorder { rows, ledger, nonfinite, .. } = rec;
    Ok(RunOutcome {
        rows,
        u_star,
        x_star,
        oracle_iterations: oracle.iterations,
        diverged,
        nonfinite_objective_rows: nonfinite,
        theta,
        ergodic_gap,
        comm: ledger,
        warnings,
    })
}

/// Writes `bytes` to `path` via a same-directory temp file and rename, so
/// readers never observe a truncated file.
///
/// # Errors
/// Propagates I/O failures from the write or the rename.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let mut tmp_name = path.as_os_str().to_owned();
    tmp_name.push(".tmp");
    let tmp = std::path::PathBuf::from(tmp_name);
    std::fs::write(&tmp, bytes)?;
    std::fs::rename(&tmp, path)?;
    Ok(())
}

/// Sidecar schema for `summary.json`.
#[derive(Serialize)]
struct RunSummary<'a> {
    config: &'a ExperimentConfig,
    u_star: f64,
    oracle_iterations: u64,
    rows_emitted: usize,
    final_gap: Option<f64>,
    final_consensus_err: Option<f64>,
    diverged: bool,
    nonfinite_objective_rows: u64,
    comm: CommLedger,
    theta: Option<f64>,
    ergodic_gap: Option<f64>,
    x_star: Option<&'a [f64]>,
    warnings: &'a [String],
}

/// Writes `metrics.csv` and `summary.json` into `dir` (created if needed).
///
/// # Errors
/// I/O failures; JSON encoding cannot fail for this schema.
pub fn write_run_outputs(dir: &Path, cfg: &ExperimentConfig, out: &RunOutcome) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    write_atomic(&dir.join("metrics.csv"), render_csv(&out.rows).as_bytes())?;

    let last = out.rows.last();
    let summary = RunSummary {
        config: cfg,
        u_star: out.u_star,
        oracle_iterations: out.oracle_iterations,
        rows_emitted: out.rows.len(),
        final_gap: last.map(|r| r.gap),
        final_consensus_err: last.map(|r| r.consensus_err),
        diverged: out.diverged,
        nonfinite_objective_rows: out.nonfinite_objective_rows,
        comm: out.comm,
        theta: out.theta,
        ergodic_gap: out.ergodic_gap,
        x_star: out.x_star.as_ref().map(|x| x.as_slice().expect("contiguous")),
        warnings: &out.warnings,
    };
    let mut text = serde_json::to_string_pretty(&summary).expect("fixed schema");
    text.push('\n');
    write_atomic(&dir.join("summary.json"), text.as_bytes())
}
