//! Runs the configured grid of solves and scores them.

use std::path::Path;
use std::sync::Arc;

use cpu_time::ThreadTime;
use imanpl::apg::{Apg, ApgOptions};
use imanpl::apps::spca::SpcaProblem;
use imanpl::apps::ssc::{Laplacian, SscProblem};
use imanpl::data::io::{load_matrix, MatrixFormat};
use imanpl::data::kmeans::kmeans_restarts;
use imanpl::data::laplacian::{normalized_laplacian, similarity_laplacian, DEFAULT_BANDWIDTH_FACTORS};
use imanpl::data::nmi::{mean_std, nmi};
use imanpl::data::synthetic::{gen_circle, gen_mixture, gen_spca_matrix};
use imanpl::manifold::{Retraction, StiefelPoint};
use imanpl::parallel::{map_slice, Execution};
use imanpl::problem::CompositeProblem;
use imanpl::solver::{solve, RunTrace, SolverConfig, Termination};
use imanpl::ssn::{Ssn, SsnOptions};
use imanpl::Mat;

use crate::config::{DataSource, ExperimentConfig, ProblemKind, SubsolverKind};
use crate::error::{BenchError, Result};
use crate::results::{ResultRow, STATUS_OK};

/// Default component count for SPCA and for unlabeled clustering data.
pub const DEFAULT_R: usize = 5;

/// A row together with the trace it was computed from.
#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub row: ResultRow,
    /// `None` when the solve failed.
    pub trace: Option<RunTrace>,
}

/// Seed-level data shared by every `u` in the grid.
enum Instance {
    Ssc {
        laplacian: Arc<Laplacian>,
        labels: Option<Vec<usize>>,
        r: usize,
    },
    Spca {
        a: Arc<Mat>,
        r: usize,
    },
}

fn read_labels(path: &Path) -> Result<Vec<usize>> {
    let text = std::fs::read_to_string(path)?;
    text.lines()
        .map(str::trim)
        .filter(|l| !l.is_empty())
        .enumerate()
        .map(|(i, l)| {
            l.parse::<usize>().map_err(|e| {
                BenchError::Config(format!("{}: line {}: {e}", path.display(), i + 1))
            })
        })
        .collect()
}

fn class_count(labels: &[usize]) -> usize {
    let mut seen: Vec<usize> = labels.to_vec();
    seen.sort_unstable();
    seen.dedup();
    seen.len()
}

/// Matrix Market files are read as similarity matrices, anything else as a
/// samples × features matrix.
fn ssc_from_file(cfg: &ExperimentConfig, path: &Path) -> Result<Instance> {
    let format = MatrixFormat::from_path(path);
    let m = load_matrix(path, format)?;
    let s = match format {
        MatrixFormat::MatrixMarket => normalized_laplacian(&m)?,
        MatrixFormat::Csv => similarity_laplacian(&m, &DEFAULT_BANDWIDTH_FACTORS, cfg.execution)?,
    };
    let labels = cfg.labels.as_deref().map(read_labels).transpose()?;
    if let Some(l) = &labels {
        if l.len() != s.nrows() {
            return Err(BenchError::Config(format!(
                "{} labels for {} samples",
                l.len(),
                s.nrows()
            )));
        }
    }
    let r = cfg
        .r
        .or_else(|| labels.as_deref().map(class_count))
        .unwrap_or(DEFAULT_R);
    Ok(Instance::Ssc {
        laplacian: Arc::new(Laplacian::new(s)?),
        labels,
        r,
    })
}

fn build_instance(cfg: &ExperimentConfig, seed: u64) -> Result<Instance> {
    match (cfg.problem, &cfg.data) {
        (ProblemKind::Ssc, DataSource::Circle | DataSource::Mixture) => {
            let ds = if cfg.data == DataSource::Circle {
                gen_circle(seed)
            } else {
                gen_mixture(seed)
            };
            let s = similarity_laplacian(&ds.x, &DEFAULT_BANDWIDTH_FACTORS, Execution::Sequential)?;
            let r = cfg.r.or(ds.n_classes()).unwrap_or(DEFAULT_R);
            Ok(Instance::Ssc {
                laplacian: Arc::new(Laplacian::new(s)?),
                labels: ds.labels,
                r,
            })
        }
        (ProblemKind::Ssc, DataSource::File(path)) => ssc_from_file(cfg, path),
        (ProblemKind::Spca, DataSource::SpcaRandom) => Ok(Instance::Spca {
            a: Arc::new(gen_spca_matrix(cfg.n1, cfg.n, seed)),
            r: cfg.r.unwrap_or(DEFAULT_R),
        }),
        (ProblemKind::Spca, DataSource::File(path)) => Ok(Instance::Spca {
            a: Arc::new(load_matrix(path, MatrixFormat::from_path(path))?),
            r: cfg.r.unwrap_or(DEFAULT_R),
        }),
        (problem, data) => Err(BenchError::Config(format!("{data} cannot be used with {problem:?}"))),
    }
}

/// Mean and standard deviation of NMI over the configured k-means repeats.
fn score(u: &Mat, labels: &[usize], r: usize, repeats: usize, seed: u64) -> imanpl::Result<(f64, f64)> {
    let fits = kmeans_restarts(u, r, repeats, seed, Execution::Sequential)?;
    let scores = fits
        .iter()
        .map(|f| nmi(f.assignment.labels(), labels))
        .collect::<imanpl::Result<Vec<f64>>>()?;
    Ok(mean_std(&scores))
}

fn solver_config(cfg: &ExperimentConfig, t0: f64, retraction: Retraction) -> SolverConfig {
    SolverConfig {
        rule: cfg.rule(),
        t0,
        schedule: cfg.step_schedule(),
        max_outer: cfg.max_outer,
        retraction,
        termination: match cfg.target_objective {
            Some(target) => Termination::TargetObjective(target),
            None => Termination::DecreaseBelow(cfg.tol_decrease),
        },
        warm_start: cfg.warm_start,
        ..Default::default()
    }
}

fn run_solver<P: CompositeProblem + ?Sized>(
    cfg: &ExperimentConfig,
    problem: &P,
    solver_cfg: &SolverConfig,
    z0: StiefelPoint,
) -> (imanpl::Result<RunTrace>, f64) {
    let start = ThreadTime::now();
    let trace = match cfg.subsolver {
        SubsolverKind::Apg => {
            let sub = Apg {
                options: ApgOptions {
                    max_iter: cfg.max_subiter,
                    ..Default::default()
                },
            };
            solve(problem, &sub, solver_cfg, z0)
        }
        SubsolverKind::Ssn => {
            let sub = Ssn {
                options: SsnOptions {
                    max_iter: cfg.max_subiter,
                    ..Default::default()
                },
            };
            solve(problem, &sub, solver_cfg, z0)
        }
    };
    (trace, start.elapsed().as_secs_f64())
}

struct Solved {
    trace: imanpl::Result<RunTrace>,
    cpu: f64,
    initial_objective: f64,
    nmi: Option<imanpl::Result<(f64, f64)>>,
}

fn run_one(cfg: &ExperimentConfig, instance: &Instance, u: f64, seed: u64) -> imanpl::Result<Solved> {
    match instance {
        Instance::Ssc { laplacian, labels, r } => {
            let p = SscProblem::with_laplacian(Arc::clone(laplacian), u, *r)?;
            // Initialization is outside the timed region.
            let z0 = p.spectral_initialize()?;
            let initial_objective = p.objective(z0.matrix());
            let t0 = cfg.t0.unwrap_or_else(|| 1.0 / p.constants().total());
            let (trace, cpu) = run_solver(cfg, &p, &solver_config(cfg, t0, Retraction::Qr), z0);
            let nmi = match (&trace, labels) {
                (Ok(t), Some(l)) => Some(score(t.final_point.matrix(), l, *r, cfg.kmeans_repeats, seed)),
                _ => None,
            };
            Ok(Solved {
                trace,
                cpu,
                initial_objective,
                nmi,
            })
        }
        Instance::Spca { a, r } => {
            let p = SpcaProblem::new(a.as_ref().clone(), u, *r)?;
            let z0 = p.initialize(seed)?;
            let initial_objective = p.objective(z0.matrix());
            let t0 = cfg.t0.unwrap_or_else(|| p.initial_step());
            let (trace, cpu) = run_solver(cfg, &p, &solver_config(cfg, t0, Retraction::Polar), z0);
            Ok(Solved {
                trace,
                cpu,
                initial_objective,
                nmi: None,
            })
        }
    }
}

fn outcome(cfg: &ExperimentConfig, instance: &Instance, u: f64, seed: u64) -> RunOutcome {
    let mut row = ResultRow {
        dataset: cfg.data.name(),
        algorithm: cfg.algorithm(),
        u,
        it_type: cfg.it_type.label().into(),
        seed,
        nmi_mean: None,
        nmi_std: None,
        cpu_seconds: 0.0,
        outer_iters: 0,
        total_subiters: 0,
        final_objective: f64::NAN,
        initial_objective: f64::NAN,
        status: STATUS_OK.into(),
    };
    let solved = match run_one(cfg, instance, u, seed) {
        Ok(s) => s,
        Err(e) => {
            row.status = format!("error: {e}");
            return RunOutcome { row, trace: None };
        }
    };
    row.cpu_seconds = solved.cpu;
    row.initial_objective = solved.initial_objective;
    let trace = match solved.trace {
        Ok(t) => t,
        Err(e) => {
            row.status = format!("error: {e}");
            return RunOutcome { row, trace: None };
        }
    };
    row.outer_iters = trace.outer_iterations();
    row.total_subiters = trace.total_sub_iterations();
    row.final_objective = trace.final_objective;
    match solved.nmi {
        Some(Ok((m, s))) => {
            row.nmi_mean = Some(m);
            row.nmi_std = Some(s);
        }
        Some(Err(e)) => row.status = format!("error: scoring failed: {e}"),
        None => {}
    }
    let problems = row.violations(cfg.max_outer);
    if row.is_ok() && !problems.is_empty() {
        row.status = format!("error: {}", problems.join("; "));
    }
    RunOutcome {
        row,
        trace: Some(trace),
    }
}

/// Every (u, seed) cell of the grid with its trace, sorted like the rows.
/// Solver failures are recorded in the row status; only data loading and
/// configuration problems return an error.
pub fn run_experiment_traced(cfg: &ExperimentConfig) -> Result<Vec<RunOutcome>> {
    cfg.validate()?;
    let seeds = cfg.seeds();
    // File data does not depend on the seed; load it once.
    let instances: Vec<Arc<Instance>> = if matches!(cfg.data, DataSource::File(_)) {
        let shared = Arc::new(build_instance(cfg, seeds[0])?);
        seeds.iter().map(|_| Arc::clone(&shared)).collect()
    } else {
        map_slice(cfg.execution, &seeds, |&s| build_instance(cfg, s).map(Arc::new))
            .into_iter()
            .collect::<Result<_>>()?
    };
    let cells: Vec<(f64, usize)> = cfg
        .u_grid
        .iter()
        .flat_map(|&u| (0..seeds.len()).map(move |i| (u, i)))
        .collect();
    let mut out = map_slice(cfg.execution, &cells, |&(u, i)| outcome(cfg, &instances[i], u, seeds[i]));
    out.sort_by(|a, b| ResultRow::order(&a.row, &b.row));
    Ok(out)
}

/// [`run_experiment_traced`] without the traces.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<Vec<ResultRow>> {
    Ok(run_experiment_traced(cfg)?.into_iter().map(|o| o.row).collect())
}
