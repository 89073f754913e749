use std::collections::BTreeMap;
use std::path::PathBuf;
use std::sync::Arc;
use std::time::Instant;

use dimineq::dynamics::{
    audit_contraction, audit_entropy_smoothing, audit_improved_rate, fp_solve, fundamental_entropy,
    langevin_simulate, max_stable_dt, mehler_trajectory, SmoothingBounds, SolverConfig, Trajectory,
};
use dimineq::functionals::geodesic_profile;
use dimineq::inequalities::{
    check_convexity_functional, check_geodesic_convexity, check_trace_bound, concentration_profile,
    evaluate_brascamp_lieb, evaluate_hwi, evaluate_lp_euclidean_lsi, evaluate_lsi_dimensional,
    evaluate_talagrand_dimensional, Accuracy, InequalityEvaluation, MIN_GEODESIC_NODES,
};
use dimineq::measures::{Measure, Potential};
use rayon::prelude::*;

use crate::report::ReportRow;
use crate::scenario::{
    AuditItem, InequalityItem, InequalityKind, Resolved, Scenario, SchemeName, TrajectorySpec, REFERENCE,
};
use crate::CliError;

/// Command-line overrides applied to every scenario.
#[derive(Debug, Clone)]
pub struct RunOptions {
    /// Multiplies every tolerance, including per-item overrides.
    pub tol_scale: f64,
    /// Seed for stochastic jobs that do not declare one.
    pub seed: Option<u64>,
    /// Directory receiving trajectory CSVs.
    pub out_dir: Option<PathBuf>,
}

impl Default for RunOptions {
    fn default() -> Self {
        Self {
            tol_scale: 1.0,
            seed: None,
            out_dir: None,
        }
    }
}

struct Job<'a> {
    scenario: &'a str,
    item: String,
    order: usize,
    tolerance: Option<f64>,
}

impl Job<'_> {
    fn rows(&self, evals: Vec<InequalityEvaluation>, started: Instant, opts: &RunOptions) -> Vec<ReportRow> {
        let wall_time = started.elapsed().as_secs_f64();
        evals
            .into_iter()
            .map(|mut e| {
                let tol = self.tolerance.unwrap_or(e.tolerance_used) * opts.tol_scale;
                e.set_tolerance(tol);
                ReportRow::new(self.scenario, &self.item, self.order, e, wall_time)
            })
            .collect()
    }

    fn fail(&self, source: dimineq::Error) -> CliError {
        CliError::Evaluation {
            item: format!("{}/{}", self.scenario, self.item),
            source,
        }
    }
}

fn label(explicit: &Option<String>, prefix: &str, k: usize) -> String {
    explicit.clone().unwrap_or_else(|| format!("{prefix}{k:03}"))
}

/// Evaluates every inequality, trajectory and audit of `scenario`; rows come
/// back sorted by scenario, id and declaration order.
pub fn run_scenario(scenario: &Scenario, opts: &RunOptions) -> Result<Vec<ReportRow>, CliError> {
    let resolved = scenario.resolve()?;
    let name = scenario.name.as_str();
    let mut rows: Vec<ReportRow> = scenario
        .inequalities
        .par_iter()
        .enumerate()
        .map(|(k, item)| {
            let job = Job {
                scenario: name,
                item: label(&item.label, "ineq", k),
                order: k,
                tolerance: item.tolerance,
            };
            let started = Instant::now();
            let evals = evaluate_item(item, &resolved).map_err(|e| job.fail(e))?;
            Ok(job.rows(evals, started, opts))
        })
        .collect::<Result<Vec<_>, CliError>>()?
        .into_iter()
        .flatten()
        .collect();

    let trajectories: BTreeMap<&String, Trajectory> = scenario
        .trajectories
        .par_iter()
        .map(|(tname, spec)| Ok((tname, solve(tname, spec, &resolved, opts)?)))
        .collect::<Result<Vec<_>, CliError>>()?
        .into_iter()
        .collect();
    if let Some(dir) = &opts.out_dir {
        for (tname, spec) in &scenario.trajectories {
            if let Some(file) = &spec.csv {
                let path = dir.join(file);
                trajectories[tname]
                    .write_csv(&path)
                    .map_err(|source| CliError::Io { path, source })?;
            }
        }
    }

    let offset = scenario.inequalities.len();
    let audit_rows: Vec<ReportRow> = scenario
        .audits
        .par_iter()
        .enumerate()
        .map(|(k, audit)| {
            let (explicit, tolerance) = match audit {
                AuditItem::Contraction { label, tolerance, .. }
                | AuditItem::EntropySmoothing { label, tolerance, .. }
                | AuditItem::ImprovedRate { label, tolerance, .. } => (label, *tolerance),
            };
            let job = Job {
                scenario: name,
                item: label(explicit, "audit", k),
                order: offset + k,
                tolerance,
            };
            let started = Instant::now();
            let report = match audit {
                AuditItem::Contraction { u, v, r, .. } => {
                    let u = &trajectories[u];
                    audit_contraction(u, &trajectories[v], *r, u.dim())
                }
                AuditItem::EntropySmoothing { u, r, m, t_max, .. } => audit_entropy_smoothing(
                    &trajectories[u],
                    SmoothingBounds {
                        r: *r,
                        m: *m,
                        t_max: *t_max,
                    },
                ),
                AuditItem::ImprovedRate { u, .. } => audit_improved_rate(&trajectories[u]),
            }
            .map_err(|e| job.fail(e))?;
            Ok(job.rows(report.evaluations, started, opts))
        })
        .collect::<Result<Vec<_>, CliError>>()?
        .into_iter()
        .flatten()
        .collect();
    rows.extend(audit_rows);
    crate::report::sort_rows(&mut rows);
    Ok(rows)
}

fn measure<'a>(resolved: &'a Resolved, name: &Option<String>) -> &'a Measure {
    let key = name.as_deref().unwrap_or(REFERENCE);
    &resolved.measures[key]
}

fn evaluate_item(item: &InequalityItem, res: &Resolved) -> dimineq::Result<Vec<InequalityEvaluation>> {
    let kind = InequalityKind::parse(&item.id).expect("validated");
    let mu = measure(res, &item.mu);
    let nu = || measure(res, &item.nu);
    let g = || measure(res, &item.g);
    Ok(match kind {
        InequalityKind::Talagrand => vec![evaluate_talagrand_dimensional(nu(), mu)?],
        InequalityKind::Hwi => {
            let r = match item.r {
                Some(r) => r,
                None => mu
                    .potential()
                    .and_then(|p| p.convexity_lower)
                    .ok_or_else(|| dimineq::Error::Precondition("HWI needs a curvature bound r".into()))?,
            };
            vec![evaluate_hwi(nu(), g(), mu, r)?]
        }
        InequalityKind::Lsi(v) => vec![evaluate_lsi_dimensional(nu(), mu, v)?],
        InequalityKind::LpEuclidean => {
            let cost = item.cost.as_ref().expect("validated").build().map_err(core_error)?;
            vec![evaluate_lp_euclidean_lsi(nu(), &cost)?]
        }
        InequalityKind::BrascampLieb(v) => {
            let f = item.function.as_ref().expect("validated").build();
            vec![evaluate_brascamp_lieb(&f, mu, v)?]
        }
        InequalityKind::Concentration => {
            let set = item.set.as_ref().expect("validated").build();
            let rs = item.r_values.as_ref().expect("validated");
            let acc = Accuracy::of(&[mu]);
            let mut out = Vec::new();
            for row in concentration_profile(mu, &set, rs)? {
                if !row.applicable {
                    continue;
                }
                let im = BTreeMap::from([
                    ("r".to_string(), row.r),
                    ("c_A".to_string(), row.c_a),
                    ("c_V".to_string(), row.c_v),
                    ("V_r".to_string(), row.v_r),
                    ("vacuous".to_string(), if row.vacuous { 1.0 } else { 0.0 }),
                ]);
                out.push(InequalityEvaluation::new(
                    "concentration.mass",
                    row.exact_mass,
                    row.dimensional_bound,
                    im.clone(),
                    acc,
                ));
                out.push(InequalityEvaluation::new(
                    "concentration.domination",
                    row.dimensional_bound,
                    row.classical_bound,
                    im,
                    acc,
                ));
            }
            out
        }
        InequalityKind::TraceBound => vec![check_trace_bound(nu(), g())?],
        InequalityKind::ConvexityFunctional => {
            let gp = item.g_potential.as_ref().expect("validated").build().map_err(core_error)?;
            let w = item.w.as_ref().expect("validated").build().map_err(core_error)?;
            let n = item.n.unwrap_or(w.dim());
            vec![check_convexity_functional(&gp, &w, n)?.to_evaluation()]
        }
        InequalityKind::Geodesic => {
            let nodes = item.nodes.unwrap_or(MIN_GEODESIC_NODES);
            let profile = geodesic_profile(nu(), g(), nodes)?;
            check_geodesic_convexity(&profile)?.to_evaluations()
        }
        InequalityKind::FundamentalEntropy => {
            let (n, t) = (item.n.expect("validated"), item.t.expect("validated"));
            let f = fundamental_entropy(n, t)?;
            let im = BTreeMap::from([("t".to_string(), t), ("n".to_string(), n as f64)]);
            vec![
                InequalityEvaluation::new(
                    "fundamental_entropy.log_bound",
                    f.value,
                    f.log_bound,
                    im.clone(),
                    Accuracy::Analytic,
                ),
                InequalityEvaluation::new(
                    "fundamental_entropy.regularization",
                    f.value,
                    f.regularization_bound,
                    im,
                    Accuracy::Analytic,
                ),
            ]
        }
    })
}

fn core_error(e: CliError) -> dimineq::Error {
    match e {
        CliError::Core(c) => c,
        other => dimineq::Error::Precondition(other.to_string()),
    }
}

fn solve(name: &str, spec: &TrajectorySpec, res: &Resolved, opts: &RunOptions) -> Result<Trajectory, CliError> {
    let init = &res.measures[&spec.init];
    let times = spec.times.times();
    let potential: Arc<Potential> = res.potential.clone();
    let fail = |source| CliError::Evaluation {
        item: format!("trajectory {name}"),
        source,
    };
    match spec.scheme {
        SchemeName::Mehler => {
            if !potential.is_standard_gaussian() {
                return Err(CliError::Validation(format!(
                    "trajectory {name}: mehler needs the standard Gaussian potential"
                )));
            }
            mehler_trajectory(init, &times).map_err(fail)
        }
        SchemeName::GridFv => {
            let grid = spec.grid.as_ref().expect("validated").build()?;
            let dt = spec.dt.unwrap_or_else(|| max_stable_dt(&potential, &grid));
            fp_solve(potential, init, &times, &SolverConfig::grid_fv(grid, dt)).map_err(fail)
        }
        SchemeName::LangevinEm => {
            let seed = spec.seed.or(opts.seed).ok_or_else(|| {
                CliError::Validation(format!("trajectory {name}: stochastic job needs a seed"))
            })?;
            let cfg = SolverConfig::langevin(
                spec.particle_count.expect("validated"),
                spec.dt.expect("validated"),
            );
            langevin_simulate(potential, init, &times, &cfg, seed).map_err(fail)
        }
    }
}
