use std::collections::BTreeMap;
use std::sync::Arc;

use dimineq::dynamics::equilibrium;
use dimineq::inequalities::{BlVariant, LsiVariant, SetDescriptor, TestFunction};
use dimineq::measures::{build_from_potential, build_gaussian, tensor_power, GridSpec, Measure, Potential};
use nalgebra::{DMatrix, DVector};
use serde::Deserialize;

use crate::CliError;

/// Name under which the equilibrium `e^{-V}` of the scenario potential is registered.
pub const REFERENCE: &str = "reference";

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub name: String,
    pub potential: PotentialDecl,
    /// Grid for the reference measure when the potential is not Gaussian.
    #[serde(default)]
    pub reference_grid: Option<GridDecl>,
    #[serde(default)]
    pub measures: BTreeMap<String, MeasureSpec>,
    #[serde(default)]
    pub inequalities: Vec<InequalityItem>,
    #[serde(default)]
    pub trajectories: BTreeMap<String, TrajectorySpec>,
    #[serde(default)]
    pub audits: Vec<AuditItem>,
    #[serde(default)]
    pub output: OutputPaths,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputPaths {
    #[serde(default = "default_csv")]
    pub csv: String,
    #[serde(default = "default_json")]
    pub json: String,
}

fn default_csv() -> String {
    "report.csv".into()
}

fn default_json() -> String {
    "report.json".into()
}

impl Default for OutputPaths {
    fn default() -> Self {
        Self {
            csv: default_csv(),
            json: default_json(),
        }
    }
}

/// Potential from the registry, with optional declared Hessian bounds.
#[derive(Debug, Clone, Deserialize)]
pub struct PotentialDecl {
    #[serde(flatten)]
    pub kind: PotentialSpec,
    #[serde(default)]
    pub convexity_lower: Option<f64>,
    #[serde(default)]
    pub convexity_upper: Option<f64>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "id", rename_all = "snake_case")]
pub enum PotentialSpec {
    StandardGaussian { dim: usize },
    Gaussian { mean: Vec<f64>, covariance: Vec<Vec<f64>> },
    Power { dim: usize, coef: f64, power: f64 },
    Quartic { dim: usize },
    GaussianPlusPower { dim: usize, power: f64 },
    Tabulated { lower: f64, upper: f64, values: Vec<f64> },
}

impl PotentialDecl {
    pub fn build(&self) -> Result<Potential, CliError> {
        let p = match &self.kind {
            PotentialSpec::StandardGaussian { dim } => Potential::standard_gaussian(*dim),
            PotentialSpec::Gaussian { mean, covariance } => {
                Potential::gaussian(DVector::from_vec(mean.clone()), matrix(covariance)?)?
            }
            PotentialSpec::Power { dim, coef, power } => Potential::power(*dim, *coef, *power)?,
            PotentialSpec::Quartic { dim } => Potential::quartic(*dim),
            PotentialSpec::GaussianPlusPower { dim, power } => {
                Potential::gaussian_plus_power(*dim, *power)?
            }
            PotentialSpec::Tabulated { lower, upper, values } => {
                Potential::tabulated(*lower, *upper, values.clone())?
            }
        };
        if self.convexity_lower.is_some() || self.convexity_upper.is_some() {
            let lower = self.convexity_lower.or(p.convexity_lower);
            let upper = self.convexity_upper.or(p.convexity_upper);
            Ok(p.with_convexity(lower, upper))
        } else {
            Ok(p)
        }
    }
}

fn matrix(rows: &[Vec<f64>]) -> Result<DMatrix<f64>, CliError> {
    let n = rows.len();
    if rows.iter().any(|r| r.len() != n) {
        return Err(CliError::Validation("covariance must be a square matrix".into()));
    }
    Ok(DMatrix::from_fn(n, n, |i, j| rows[i][j]))
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridDecl {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    pub counts: Vec<usize>,
}

impl GridDecl {
    pub fn build(&self) -> Result<GridSpec, CliError> {
        Ok(GridSpec::new(self.lower.clone(), self.upper.clone(), self.counts.clone())?)
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum MeasureSpec {
    Gaussian {
        mean: Vec<f64>,
        #[serde(default)]
        covariance: Option<Vec<Vec<f64>>>,
        #[serde(default)]
        variance: Option<f64>,
    },
    StandardGaussian { dim: usize },
    FromPotential { potential: PotentialDecl, grid: GridDecl },
    Discretized { of: String, grid: GridDecl },
    TensorPower { of: String, copies: usize },
}

#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum FunctionSpec {
    Linear { a: Vec<f64> },
    SquaredNorm,
    Hermite { k: usize },
}

impl FunctionSpec {
    pub fn build(&self) -> TestFunction {
        match self {
            FunctionSpec::Linear { a } => TestFunction::linear(a.clone()),
            FunctionSpec::SquaredNorm => TestFunction::squared_norm(),
            FunctionSpec::Hermite { k } => TestFunction::hermite(*k),
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "shape", rename_all = "snake_case", deny_unknown_fields)]
pub enum SetSpec {
    Ball { center: Vec<f64>, radius: f64 },
    HalfSpace { direction: Vec<f64>, threshold: f64 },
}

impl SetSpec {
    pub fn build(&self) -> SetDescriptor {
        match self {
            SetSpec::Ball { center, radius } => SetDescriptor::Ball {
                center: center.clone(),
                radius: *radius,
            },
            SetSpec::HalfSpace { direction, threshold } => SetDescriptor::HalfSpace {
                direction: direction.clone(),
                threshold: *threshold,
            },
        }
    }
}

/// One inequality instance; `mu` defaults to the scenario reference.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InequalityItem {
    pub id: String,
    #[serde(default)]
    pub label: Option<String>,
    #[serde(default)]
    pub tolerance: Option<f64>,
    #[serde(default)]
    pub mu: Option<String>,
    #[serde(default)]
    pub nu: Option<String>,
    #[serde(default)]
    pub g: Option<String>,
    #[serde(default)]
    pub r: Option<f64>,
    #[serde(default)]
    pub function: Option<FunctionSpec>,
    #[serde(default)]
    pub set: Option<SetSpec>,
    #[serde(default)]
    pub r_values: Option<Vec<f64>>,
    #[serde(default)]
    pub cost: Option<PotentialDecl>,
    #[serde(default)]
    pub w: Option<PotentialDecl>,
    #[serde(default)]
    pub g_potential: Option<PotentialDecl>,
    #[serde(default)]
    pub n: Option<usize>,
    #[serde(default)]
    pub t: Option<f64>,
    #[serde(default)]
    pub nodes: Option<usize>,
}

/// The inequality families understood by the runner.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum InequalityKind {
    Talagrand,
    Hwi,
    Lsi(LsiVariant),
    LpEuclidean,
    BrascampLieb(BlVariant),
    Concentration,
    TraceBound,
    ConvexityFunctional,
    Geodesic,
    FundamentalEntropy,
}

impl InequalityKind {
    pub fn parse(id: &str) -> Option<Self> {
        Some(match id {
            "talagrand.dimensional" => Self::Talagrand,
            "hwi.dimensional" => Self::Hwi,
            "lsi.lp_euclidean" => Self::LpEuclidean,
            "concentration" => Self::Concentration,
            "trace_bound" => Self::TraceBound,
            "convexity_functional" => Self::ConvexityFunctional,
            "geodesic" => Self::Geodesic,
            "fundamental_entropy" => Self::FundamentalEntropy,
            _ => {
                if let Some(v) = id.strip_prefix("lsi.") {
                    Self::Lsi(v.parse().ok()?)
                } else if let Some(v) = id.strip_prefix("bl.") {
                    Self::BrascampLieb(v.parse().ok()?)
                } else {
                    return None;
                }
            }
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SchemeName {
    Mehler,
    GridFv,
    LangevinEm,
}

/// Either explicit times or `count` equispaced times on `[start, stop]`.
#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
pub enum TimeGrid {
    Explicit(Vec<f64>),
    Uniform { start: f64, stop: f64, count: usize },
}

impl TimeGrid {
    pub fn times(&self) -> Vec<f64> {
        match self {
            TimeGrid::Explicit(t) => t.clone(),
            TimeGrid::Uniform { start, stop, count } => match count {
                0 => Vec::new(),
                1 => vec![*start],
                c => (0..*c)
                    .map(|k| start + (stop - start) * k as f64 / (c - 1) as f64)
                    .collect(),
            },
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrajectorySpec {
    pub scheme: SchemeName,
    pub init: String,
    pub times: TimeGrid,
    /// Time step; the grid solver defaults to its stability limit.
    #[serde(default)]
    pub dt: Option<f64>,
    #[serde(default)]
    pub grid: Option<GridDecl>,
    #[serde(default)]
    pub particle_count: Option<usize>,
    #[serde(default)]
    pub seed: Option<u64>,
    /// Optional file (relative to the output directory) for the record CSV.
    #[serde(default)]
    pub csv: Option<String>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "audit", rename_all = "snake_case", deny_unknown_fields)]
pub enum AuditItem {
    Contraction {
        u: String,
        v: String,
        r: f64,
        #[serde(default)]
        label: Option<String>,
        #[serde(default)]
        tolerance: Option<f64>,
    },
    EntropySmoothing {
        u: String,
        #[serde(default)]
        r: Option<f64>,
        #[serde(default)]
        m: Option<f64>,
        #[serde(default)]
        t_max: Option<f64>,
        #[serde(default)]
        label: Option<String>,
        #[serde(default)]
        tolerance: Option<f64>,
    },
    ImprovedRate {
        u: String,
        #[serde(default)]
        label: Option<String>,
        #[serde(default)]
        tolerance: Option<f64>,
    },
}

/// Scenario measures resolved to core objects.
pub struct Resolved {
    pub potential: Arc<Potential>,
    pub measures: BTreeMap<String, Measure>,
}

impl Scenario {
    pub fn parse(text: &str) -> Result<Self, CliError> {
        let s: Scenario = serde_json::from_str(text).map_err(CliError::from_json)?;
        s.validate()?;
        Ok(s)
    }

    pub fn from_value(value: serde_json::Value) -> Result<Self, CliError> {
        let s: Scenario = serde_json::from_value(value).map_err(CliError::from_json)?;
        s.validate()?;
        Ok(s)
    }

    /// Static checks: ids resolve, tolerances positive, stochastic jobs seeded
    /// (a command-line seed can fill in later, so only the scheme is checked here).
    pub fn validate(&self) -> Result<(), CliError> {
        let known = |name: &str| name == REFERENCE || self.measures.contains_key(name);
        let fail = |msg: String| Err(CliError::Validation(format!("{}: {msg}", self.name)));
        for (name, m) in &self.measures {
            if name == REFERENCE {
                return fail(format!("measure name {REFERENCE:?} is reserved"));
            }
            match m {
                MeasureSpec::Discretized { of, .. } | MeasureSpec::TensorPower { of, .. } => {
                    if !known(of) || of == name {
                        return fail(format!("measure {name} refers to unknown measure {of}"));
                    }
                }
                _ => {}
            }
        }
        for (k, item) in self.inequalities.iter().enumerate() {
            let kind = InequalityKind::parse(&item.id);
            let Some(kind) = kind else {
                return fail(format!("inequality #{k}: unknown id {:?}", item.id));
            };
            if let Some(tol) = item.tolerance {
                if !(tol >= 0.0) {
                    return fail(format!("inequality #{k}: tolerance must be nonnegative"));
                }
            }
            for name in [&item.mu, &item.nu, &item.g].into_iter().flatten() {
                if !known(name) {
                    return fail(format!("inequality #{k}: unknown measure {name:?}"));
                }
            }
            let need = |field: bool, what: &str| -> Result<(), CliError> {
                if field {
                    Ok(())
                } else {
                    Err(CliError::Validation(format!(
                        "{}: inequality #{k} ({}) needs {what}",
                        self.name, item.id
                    )))
                }
            };
            match kind {
                InequalityKind::Talagrand | InequalityKind::Lsi(_) | InequalityKind::LpEuclidean => {
                    need(item.nu.is_some(), "nu")?
                }
                InequalityKind::Hwi => {
                    need(item.nu.is_some(), "nu")?;
                    need(item.g.is_some(), "g")?;
                }
                InequalityKind::BrascampLieb(_) => need(item.function.is_some(), "function")?,
                InequalityKind::Concentration => {
                    need(item.set.is_some(), "set")?;
                    need(item.r_values.is_some(), "r_values")?;
                }
                InequalityKind::TraceBound | InequalityKind::Geodesic => {
                    need(item.nu.is_some(), "nu")?;
                    need(item.g.is_some(), "g")?;
                }
                InequalityKind::ConvexityFunctional => {
                    need(item.g_potential.is_some(), "g_potential")?;
                    need(item.w.is_some(), "w")?;
                }
                InequalityKind::FundamentalEntropy => {
                    need(item.n.is_some(), "n")?;
                    need(item.t.is_some(), "t")?;
                }
            }
            if kind == InequalityKind::LpEuclidean {
                need(item.cost.is_some(), "cost")?;
            }
        }
        for (name, tr) in &self.trajectories {
            if !known(&tr.init) {
                return fail(format!("trajectory {name}: unknown initial measure {:?}", tr.init));
            }
            match tr.scheme {
                SchemeName::GridFv if tr.grid.is_none() => {
                    return fail(format!("trajectory {name}: grid_fv needs a grid"))
                }
                SchemeName::LangevinEm if tr.particle_count.is_none() || tr.dt.is_none() => {
                    return fail(format!("trajectory {name}: langevin_em needs particle_count and dt"))
                }
                _ => {}
            }
        }
        for (k, audit) in self.audits.iter().enumerate() {
            let (names, tol): (Vec<&String>, _) = match audit {
                AuditItem::Contraction { u, v, tolerance, .. } => (vec![u, v], tolerance),
                AuditItem::EntropySmoothing { u, tolerance, .. } => (vec![u], tolerance),
                AuditItem::ImprovedRate { u, tolerance, .. } => (vec![u], tolerance),
            };
            for n in names {
                if !self.trajectories.contains_key(n) {
                    return fail(format!("audit #{k}: unknown trajectory {n:?}"));
                }
            }
            if tol.is_some_and(|t| !(t >= 0.0)) {
                return fail(format!("audit #{k}: tolerance must be nonnegative"));
            }
        }
        Ok(())
    }

    /// Builds the potential and every named measure.
    pub fn resolve(&self) -> Result<Resolved, CliError> {
        let potential = Arc::new(self.potential.build()?);
        let grid = self.reference_grid.as_ref().map(GridDecl::build).transpose()?;
        let reference = equilibrium(&potential, grid.as_ref())?.ok_or_else(|| {
            CliError::Validation(format!(
                "{}: non-Gaussian potential needs reference_grid",
                self.name
            ))
        })?;
        let mut measures = BTreeMap::from([(REFERENCE.to_string(), reference)]);
        // dependencies may be declared in any order
        let mut pending: Vec<(&String, &MeasureSpec)> = self.measures.iter().collect();
        while !pending.is_empty() {
            let before = pending.len();
            let mut rest = Vec::new();
            for (name, spec) in pending {
                match build_measure(spec, &measures)? {
                    Some(m) => {
                        measures.insert(name.clone(), m);
                    }
                    None => rest.push((name, spec)),
                }
            }
            if rest.len() == before {
                return Err(CliError::Validation(format!(
                    "{}: cyclic measure definitions",
                    self.name
                )));
            }
            pending = rest;
        }
        Ok(Resolved {
            potential,
            measures,
        })
    }
}

fn build_measure(spec: &MeasureSpec, done: &BTreeMap<String, Measure>) -> Result<Option<Measure>, CliError> {
    Ok(Some(match spec {
        MeasureSpec::Gaussian {
            mean,
            covariance,
            variance,
        } => {
            let n = mean.len();
            let cov = match (covariance, variance) {
                (Some(c), None) => matrix(c)?,
                (None, Some(v)) => DMatrix::from_diagonal_element(n, n, *v),
                (None, None) => DMatrix::identity(n, n),
                (Some(_), Some(_)) => {
                    return Err(CliError::Validation(
                        "give either covariance or variance, not both".into(),
                    ))
                }
            };
            build_gaussian(DVector::from_vec(mean.clone()), cov)?
        }
        MeasureSpec::StandardGaussian { dim } => dimineq::measures::standard_gaussian(*dim),
        MeasureSpec::FromPotential { potential, grid } => {
            build_from_potential(Arc::new(potential.build()?), grid.build()?)?
        }
        MeasureSpec::Discretized { of, grid } => match done.get(of) {
            Some(m) => m.discretize(&grid.build()?)?,
            None => return Ok(None),
        },
        MeasureSpec::TensorPower { of, copies } => match done.get(of) {
            Some(m) => tensor_power(m, *copies)?,
            None => return Ok(None),
        },
    }))
}
