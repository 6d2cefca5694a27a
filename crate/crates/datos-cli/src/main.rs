//! Command-line driver: single experiment runs, solver × topology sweeps,
//! standalone oracle solves, and the built-in invariant checks.
//!
//! Exit codes: 0 on success, 1 for configuration/input problems, 2 for
//! numerical failures (stepsize underflow, divergence, a failed check).

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use datos::config::{ExperimentConfig, ProblemKind, SolverKind, SweepPlan};
use datos::harness::{
    build_problem, run_experiment, write_atomic, write_run_outputs, ORACLE_DELTA,
    ORACLE_MAX_ITER, ORACLE_TOL,
};
use datos::selftest::{run_selftest, Fault};
use datos::solvers::{centralized_proxgrad, kkt_residual};
use datos::{Error, Result};

#[derive(Parser)]
#[command(name = "datos", version, about = "Decentralized adaptive splitting experiments")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Run one experiment and write metrics.csv + summary.json.
    Run {
        /// Experiment config file.
        #[arg(long)]
        config: PathBuf,
        /// Override solver.kind.
        #[arg(long)]
        solver: Option<String>,
        /// Override graph.p (synthetic topologies only).
        #[arg(long)]
        graph_p: Option<f64>,
        /// Master seed: graph, problem, init streams get s, s+1, s+2.
        #[arg(long)]
        seed: Option<u64>,
        /// Override run.iters.
        #[arg(long)]
        iters: Option<u64>,
        /// Override run.stride (emit every Nth row).
        #[arg(long)]
        stride: Option<u64>,
        /// Override problem.data_file (problem kind `custom` only).
        #[arg(long)]
        data_file: Option<PathBuf>,
        /// Output directory (falls back to `[run] out` from the config).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run every (solver, p) cell of a sweep config under one directory.
    Sweep {
        /// Sweep config file: solver.kind and graph.p take comma lists.
        #[arg(long)]
        config: PathBuf,
        /// Master seed shared by every cell.
        #[arg(long)]
        seed: Option<u64>,
        /// Base output directory; each cell writes to `<out>/<solver>_p<p>`.
        #[arg(long)]
        out: PathBuf,
    },
    /// Solve the aggregate problem centrally; print the optimum as JSON.
    Oracle {
        /// Experiment config file (solver section is ignored).
        #[arg(long)]
        config: PathBuf,
        /// Write JSON here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run the built-in invariant checks (a few seconds).
    Selftest {
        /// Inject a deliberate defect; `biased_roots` must make the
        /// dual-route equivalence check fail.
        #[arg(long)]
        fault: Option<String>,
    },
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let res = match cli.cmd {
        Cmd::Run { config, solver, graph_p, seed, iters, stride, data_file, out } => {
            cmd_run(&config, solver, graph_p, seed, iters, stride, data_file, out)
        }
        Cmd::Sweep { config, seed, out } => cmd_sweep(&config, seed, &out),
        Cmd::Oracle { config, out } => cmd_oracle(&config, out),
        Cmd::Selftest { fault } => cmd_selftest(fault),
    };
    match res {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

#[allow(clippy::too_many_arguments)]
fn cmd_run(
    config: &Path,
    solver: Option<String>,
    graph_p: Option<f64>,
    seed: Option<u64>,
    iters: Option<u64>,
    stride: Option<u64>,
    data_file: Option<PathBuf>,
    out: Option<PathBuf>,
) -> Result<()> {
    let mut cfg = ExperimentConfig::read_file(config)?;
    if let Some(s) = solver {
        cfg.solver.kind = s.parse::<SolverKind>().map_err(Error::Config)?;
    }
    if let Some(p) = graph_p {
        if cfg.graph.file.is_some() {
            return Err(Error::Config(
                "graph is file-backed; --graph-p does not apply".into(),
            ));
        }
        cfg.graph.p = p;
    }
    if let Some(s) = seed {
        cfg.set_master_seed(s);
    }
    if let Some(i) = iters {
        cfg.run.iters = i;
    }
    if let Some(s) = stride {
        cfg.run.stride = s;
    }
    if let Some(f) = data_file {
        if cfg.problem.kind != ProblemKind::Custom {
            return Err(Error::Config(format!(
                "--data-file applies to problem kind custom only (config says {})",
                cfg.problem.kind
            )));
        }
        cfg.problem.data_file = Some(f);
    }
    if cfg.solver.kind == SolverKind::PgExtra && cfg.solver.pg_alpha.is_none() {
        return Err(Error::Config(
            "solver.pg_alpha is required when solver.kind = pg_extra".into(),
        ));
    }
    cfg.validate()?;
    let dir = match out.or_else(|| cfg.run.out.clone()) {
        Some(d) => d,
        None => {
            return Err(Error::Config(
                "no output directory: set `out` under [run] or pass --out".into(),
            ))
        }
    };

    let outcome = run_experiment(&cfg)?;
    for w in &outcome.warnings {
        eprintln!("warning: {w}");
    }
    write_run_outputs(&dir, &cfg, &outcome)?;
    eprintln!("wrote {} ({} rows)", dir.display(), outcome.rows.len());
    if outcome.diverged {
        let k = outcome.rows.last().map_or(0, |r| r.k);
        return Err(Error::Divergence(format!(
            "iterate norm blew up by k = {k}; partial outputs kept"
        )));
    }
    Ok(())
}

fn cmd_sweep(config: &Path, seed: Option<u64>, out: &Path) -> Result<()> {
    let mut plan = SweepPlan::read_file(config)?;
    if let Some(s) = seed {
        plan.set_master_seed(s);
    }
    let mut summary = String::from("solver,p,final_gap\n");
    let mut diverged_cells = Vec::new();
    for cfg in plan.cells() {
        let cell = SweepPlan::cell_dir(cfg.solver.kind, cfg.graph.p);
        let outcome = run_experiment(&cfg)?;
        for w in &outcome.warnings {
            eprintln!("warning [{cell}]: {w}");
        }
        write_run_outputs(&out.join(&cell), &cfg, &outcome)?;
        let final_gap = outcome.rows.last().map_or(f64::NAN, |r| r.gap);
        summary.push_str(&format!(
            "{},{},{:.16e}\n",
            cfg.solver.kind, cfg.graph.p, final_gap
        ));
        eprintln!("cell {cell}: {} rows", outcome.rows.len());
        if outcome.diverged {
            diverged_cells.push(cell);
        }
    }
    write_atomic(&out.join("summary.csv"), summary.as_bytes())?;
    if diverged_cells.is_empty() {
        Ok(())
    } else {
        Err(Error::Divergence(format!(
            "sweep cells diverged: {}",
            diverged_cells.join(", ")
        )))
    }
}

fn cmd_oracle(config: &Path, out: Option<PathBuf>) -> Result<()> {
    let cfg = ExperimentConfig::read_file(config)?;
    let (prob, warnings) = build_problem(&cfg)?;
    for w in &warnings {
        eprintln!("warning: {w}");
    }
    let o = centralized_proxgrad(&prob, ORACLE_DELTA, ORACLE_TOL, ORACLE_MAX_ITER)?;
    let body = serde_json::json!({
        "u_star": o.u_star,
        "iterations": o.iterations,
        "converged": o.converged,
        "final_step_norm": o.final_step_norm,
        "kkt_residual": kkt_residual(&prob, &o.x),
        "x": o.x.to_vec(),
    });
    let text = format!("{}\n", serde_json::to_string_pretty(&body).expect("plain JSON"));
    match out {
        Some(path) => write_atomic(&path, text.as_bytes())?,
        None => print!("{text}"),
    }
    if o.converged {
        Ok(())
    } else {
        Err(Error::Numerical(format!(
            "oracle still moving after {} iterations",
            o.iterations
        )))
    }
}

fn cmd_selftest(fault: Option<String>) -> Result<()> {
    let fault = match fault.as_deref() {
        None => None,
        Some("biased_roots") => Some(Fault::BiasedSquareRoots),
        Some(other) => {
            return Err(Error::Config(format!(
                "unknown fault '{other}' (valid: biased_roots)"
            )))
        }
    };
    let checks = run_selftest(fault);
    let mut all = true;
    for c in &checks {
        println!(
            "selftest {}: {} — {}",
            c.name,
            if c.passed { "PASS" } else { "FAIL" },
            c.detail
        );
        all &= c.passed;
    }
    if all {
        Ok(())
    } else {
        Err(Error::Numerical("self-test failed".into()))
    }
}
