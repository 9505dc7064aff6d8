//! Solve, simulate and measure one or many (scheme, N) cells.

use std::time::Instant;

use anyhow::{anyhow, Context, Result};
use bcos::metrics::{StrongErrors, WeakErrors};
use bcos::reference::brownian::BrownianBundle;
use bcos::reference::paths::{approx_paths, reference_paths_multi, PathSet};
use bcos::{solve, strong_errors, weak_errors_t0, BcosSolution, ErrorReport, FbsdeProblem, SchemeKind, SolverOptions, SpatialGrid};

use crate::config::StudyConfig;
use crate::output;

/// Common Brownian bundle and reference paths for every N of a study.
pub struct ReferenceSet {
    pub bundle: BrownianBundle,
    pub paths: Vec<(usize, PathSet)>,
}

impl ReferenceSet {
    pub fn build(cfg: &StudyConfig, problem: &dyn FbsdeProblem) -> Result<Self> {
        let bundle = BrownianBundle::new(cfg.seed, cfg.paths, cfg.n_fine, problem.horizon())?;
        let sets = reference_paths_multi(problem, &bundle, &cfg.n_list)?;
        Ok(Self { bundle, paths: cfg.n_list.iter().copied().zip(sets).collect() })
    }

    pub fn get(&self, n: usize) -> Option<&PathSet> {
        self.paths.iter().find(|(m, _)| *m == n).map(|(_, p)| p)
    }
}

/// A failed cell; the study carries on without it.
#[derive(Debug, Clone, PartialEq)]
pub struct CellFailure {
    pub scheme: SchemeKind,
    pub n: usize,
    pub message: String,
}

#[derive(Debug, Clone, Default)]
pub struct StudyOutcome {
    pub reports: Vec<ErrorReport>,
    pub failures: Vec<CellFailure>,
}

/// `(u(0, x0), v(0, x0))` from the problem's analytic fields.
pub fn reference_values(problem: &dyn FbsdeProblem) -> Result<(f64, f64)> {
    let exact = problem.analytic().ok_or_else(|| anyhow!("problem `{}` has no reference solution", problem.name()))?;
    let x0 = problem.x0();
    Ok((exact.u(0.0, x0).value, exact.v(0.0, x0).value))
}

pub fn solve_cell(cfg: &StudyConfig, problem: &dyn FbsdeProblem, scheme: SchemeKind, n: usize) -> Result<(BcosSolution, f64)> {
    let grid = SpatialGrid::shared(cfg.range.0, cfg.range.1, cfg.k)?;
    let start = Instant::now();
    let solution = solve(problem, &grid, n, cfg.theta_params()?, scheme, &SolverOptions::default())?;
    Ok((solution, start.elapsed().as_secs_f64()))
}

/// Errors of a solved cell. Strong errors are NaN when `reference` is `None`.
pub fn measure(
    cfg: &StudyConfig,
    problem: &dyn FbsdeProblem,
    solution: &BcosSolution,
    reference: Option<(&BrownianBundle, &PathSet)>,
) -> Result<ErrorReport> {
    let (u0, v0) = reference_values(problem)?;
    let weak = weak_errors_t0(solution, problem.x0(), u0, v0)?;
    let (strong, clamp_count) = match reference {
        Some((bundle, exact)) => {
            let approx = approx_paths(problem, solution, solution.scheme, bundle)?;
            (strong_errors(&approx, exact)?, approx.clamp_count)
        }
        None => (StrongErrors { x: f64::NAN, y: f64::NAN, z: f64::NAN }, 0),
    };
    Ok(ErrorReport {
        problem: cfg.problem.label(),
        scheme: solution.scheme,
        theta: cfg.theta,
        k: cfg.k,
        n: solution.n_steps(),
        paths: cfg.paths,
        seed: cfg.seed,
        strong,
        weak,
        picard_max: solution.picard_max(),
        clamp_count,
    })
}

fn failed_report(cfg: &StudyConfig, scheme: SchemeKind, n: usize) -> ErrorReport {
    ErrorReport {
        problem: cfg.problem.label(),
        scheme,
        theta: cfg.theta,
        k: cfg.k,
        n,
        paths: cfg.paths,
        seed: cfg.seed,
        strong: StrongErrors { x: f64::NAN, y: f64::NAN, z: f64::NAN },
        weak: WeakErrors { y0: f64::NAN, z0: f64::NAN },
        picard_max: 0,
        clamp_count: 0,
    }
}

/// Measure every (scheme, N) cell without writing files.
pub fn compute_study(cfg: &StudyConfig) -> Result<StudyOutcome> {
    cfg.validate()?;
    let problem = cfg.problem.build()?;
    let reference = ReferenceSet::build(cfg, problem.as_ref()).context("building reference paths")?;
    let mut outcome = StudyOutcome::default();
    for &scheme in &cfg.schemes {
        for &n in &cfg.n_list {
            let cell = solve_cell(cfg, problem.as_ref(), scheme, n).and_then(|(sol, secs)| {
                let exact = reference.get(n).expect("reference built for every N");
                let report = measure(cfg, problem.as_ref(), &sol, Some((&reference.bundle, exact)))?;
                Ok((report, secs))
            });
            match cell {
                Ok((report, secs)) => {
                    eprintln!("{} {scheme} N={n}: strong {:.3e} weak {:.3e} ({secs:.1}s)", report.problem, report.strong.total(), report.weak.total());
                    outcome.reports.push(report);
                }
                Err(e) => {
                    eprintln!("{} {scheme} N={n}: failed: {e:#}", cfg.problem.label());
                    outcome.reports.push(failed_report(cfg, scheme, n));
                    outcome.failures.push(CellFailure { scheme, n, message: format!("{e:#}") });
                }
            }
        }
    }
    Ok(outcome)
}

/// Measure every cell and write errors.csv, rates.csv and the plot script.
pub fn run_study(cfg: &StudyConfig) -> Result<StudyOutcome> {
    let outcome = compute_study(cfg)?;
    let horizon = cfg.problem.build()?.horizon();
    output::write_study(&cfg.out, &outcome, horizon)?;
    Ok(outcome)
}

/// One cell, strong and weak errors included.
pub fn run_single(cfg: &StudyConfig, scheme: SchemeKind, n: usize) -> Result<ErrorReport> {
    let cfg = StudyConfig { schemes: vec![scheme], n_list: vec![n], ..cfg.clone() };
    cfg.validate()?;
    let problem = cfg.problem.build()?;
    let reference = ReferenceSet::build(&cfg, problem.as_ref())?;
    let (solution, _) = solve_cell(&cfg, problem.as_ref(), scheme, n)?;
    measure(&cfg, problem.as_ref(), &solution, Some((&reference.bundle, reference.get(n).expect("single N"))))
}

/// Wall-clock of the backward solve per (scheme, K) at the configured N.
#[derive(Debug, Clone, PartialEq)]
pub struct TimingRow {
    pub problem: String,
    pub scheme: SchemeKind,
    pub k: usize,
    pub n: usize,
    pub seconds: f64,
    pub picard_max: usize,
}

/// Time every scheme at every K, keeping the fastest of `repeats` runs.
pub fn emit_timing(cfg: &StudyConfig) -> Result<Vec<TimingRow>> {
    cfg.validate()?;
    let problem = cfg.problem.build()?;
    let mut rows = Vec::new();
    for &k in &cfg.timing.k_list {
        let cell = StudyConfig { k, ..cfg.clone() };
        for &scheme in &cfg.schemes {
            let mut best = f64::INFINITY;
            let mut picard = 0;
            for _ in 0..cfg.timing.repeats {
                let (sol, secs) = solve_cell(&cell, problem.as_ref(), scheme, cfg.timing.n)?;
                best = best.min(secs);
                picard = sol.picard_max();
            }
            eprintln!("timing {scheme} K={k} N={}: {best:.3}s", cfg.timing.n);
            rows.push(TimingRow { problem: cfg.problem.label(), scheme, k, n: cfg.timing.n, seconds: best, picard_max: picard });
        }
    }
    Ok(rows)
}
