use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;

use super::grid::{GridSpec, DENSITY_FLOOR, SUPPORT_FRACTION, TAIL_EPSILON};
use super::potential::{Potential, PotentialEval};
use crate::error::{Error, Result};
use crate::linalg;

#[derive(Debug, Clone)]
pub struct GaussianRepr {
    pub mean: DVector<f64>,
    pub covariance: DMatrix<f64>,
}

impl GaussianRepr {
    pub fn precision(&self) -> DMatrix<f64> {
        linalg::sym_inv(&self.covariance).expect("covariance validated at construction")
    }

    pub fn log_det(&self) -> f64 {
        linalg::log_det_spd(&self.covariance).expect("covariance validated at construction")
    }

    pub fn log_density(&self, x: &[f64]) -> f64 {
        let n = self.mean.len() as f64;
        let d = DVector::from_column_slice(x) - &self.mean;
        -0.5 * d.dot(&(self.precision() * &d))
            - 0.5 * (n * (2.0 * std::f64::consts::PI).ln() + self.log_det())
    }
}

/// Normalized cell masses on a [`GridSpec`].
#[derive(Debug, Clone)]
pub struct GridDensity {
    pub grid: GridSpec,
    pub weights: Vec<f64>,
    /// Estimated probability mass discarded outside the box.
    pub tail_mass: f64,
}

impl GridDensity {
    pub fn density(&self, k: usize) -> f64 {
        self.weights[k] / self.grid.cell_volume()
    }

    pub fn log_density(&self, k: usize) -> f64 {
        self.density(k).max(DENSITY_FLOOR).ln()
    }

    pub fn max_weight(&self) -> f64 {
        self.weights.iter().copied().fold(0.0, f64::max)
    }
}

#[derive(Debug, Clone)]
pub struct ParticleCloud {
    pub points: Vec<Vec<f64>>,
    pub weights: Vec<f64>,
}

#[derive(Debug, Clone)]
pub enum Representation {
    Gaussian(GaussianRepr),
    Grid(GridDensity),
    Particles(ParticleCloud),
    /// `copies`-fold product of a factor measure; functionals act additively.
    Product { factor: Box<Measure>, copies: usize },
}

/// A probability measure on `R^n` with an optional generating potential.
#[derive(Debug, Clone)]
pub struct Measure {
    repr: Representation,
    potential: Option<Arc<Potential>>,
}

fn renormalize(weights: &mut [f64]) -> Result<()> {
    let total: f64 = weights.iter().sum();
    if !(total > 0.0) || !total.is_finite() {
        return Err(Error::ZeroMass);
    }
    for w in weights.iter_mut() {
        *w /= total;
    }
    Ok(())
}

/// Gaussian measure `N(mean, covariance)` with its potential attached.
pub fn build_gaussian(mean: DVector<f64>, covariance: DMatrix<f64>) -> Result<Measure> {
    let potential = Potential::gaussian(mean.clone(), covariance.clone())?;
    Ok(Measure {
        repr: Representation::Gaussian(GaussianRepr { mean, covariance }),
        potential: Some(Arc::new(potential)),
    })
}

/// Standard Gaussian `gamma` on `R^n`.
pub fn standard_gaussian(n: usize) -> Measure {
    build_gaussian(DVector::zeros(n), DMatrix::identity(n, n)).expect("identity is SPD")
}

/// `N(mean e_1 ... , variance Id)` helper used throughout the tests and CLI.
pub fn isotropic_gaussian(mean: &[f64], variance: f64) -> Result<Measure> {
    let n = mean.len();
    build_gaussian(
        DVector::from_column_slice(mean),
        DMatrix::from_diagonal_element(n, n, variance),
    )
}

/// Discretizes `e^{-V}` on `grid`, renormalized to unit mass.
///
/// The truncated tail mass is estimated on each face by the Mills-ratio
/// approximation `rho(x_b) / (dV/dn)(x_b)`; the grid is rejected when the
/// estimate exceeds [`TAIL_EPSILON`].
pub fn build_from_potential(potential: Arc<Potential>, grid: GridSpec) -> Result<Measure> {
    let n = grid.dim();
    if potential.dim() != n {
        return Err(Error::DimensionMismatch {
            expected: potential.dim(),
            got: n,
        });
    }
    let values: Vec<f64> = (0..grid.len())
        .map(|k| potential.value(&grid.point(k)))
        .collect();
    if values.iter().any(|v| v.is_nan() || *v == f64::NEG_INFINITY) {
        return Err(Error::NonFinite(format!("potential {} on grid", potential.name)));
    }
    let vmin = values.iter().copied().fold(f64::INFINITY, f64::min);
    if !vmin.is_finite() {
        return Err(Error::ZeroMass);
    }
    let mut weights: Vec<f64> = values.iter().map(|v| (-(v - vmin)).exp()).collect();
    let vol = grid.cell_volume();
    let total: f64 = weights.iter().sum::<f64>() * vol;

    let mut tail = 0.0;
    for axis in 0..n {
        let face: f64 = (0..n).filter(|a| *a != axis).map(|a| grid.spacing(a)).product();
        for sign in [-1, 1] {
            for k in 0..grid.len() {
                if !grid.on_face(k, axis, sign) || weights[k] == 0.0 {
                    continue;
                }
                let x = grid.point(k);
                let slope = sign as f64 * potential.gradient(&x)[axis];
                let width = grid.upper()[axis] - grid.lower()[axis];
                let est = if slope > 0.0 {
                    weights[k] / slope
                } else {
                    weights[k] * width
                };
                tail += est * face;
            }
        }
    }
    let tail_mass = tail / total;
    if tail_mass > TAIL_EPSILON {
        return Err(Error::TailMassTooLarge {
            tail_mass,
            limit: TAIL_EPSILON,
        });
    }
    renormalize(&mut weights)?;
    Ok(Measure {
        repr: Representation::Grid(GridDensity {
            grid,
            weights,
            tail_mass,
        }),
        potential: Some(potential),
    })
}

/// `N`-fold product measure. Gaussian factors stay analytic; 1D grid factors
/// are kept in product form (never materialized beyond two dimensions).
pub fn tensor_power(m: &Measure, copies: usize) -> Result<Measure> {
    if copies == 0 {
        return Err(Error::Domain("tensor power needs N >= 1".into()));
    }
    if copies == 1 {
        return Ok(m.clone());
    }
    match &m.repr {
        Representation::Gaussian(_) => {}
        Representation::Grid(g) if g.grid.dim() == 1 => {}
        _ => {
            return Err(Error::Unsupported(
                "tensor power needs a Gaussian or 1D grid factor".into(),
            ))
        }
    }
    let potential = m
        .potential
        .as_ref()
        .map(|p| Arc::new(Potential::tensor(p.clone(), copies)));
    Ok(Measure {
        repr: Representation::Product {
            factor: Box::new(m.clone()),
            copies,
        },
        potential,
    })
}

/// Grid used when a Gaussian must be discretized: `mean +- 10 sd` per axis.
pub fn gaussian_auto_grid(g: &GaussianRepr, count: usize) -> Result<GridSpec> {
    let n = g.mean.len();
    if n > 2 {
        return Err(Error::GridDimension(n));
    }
    let center: Vec<f64> = g.mean.iter().copied().collect();
    let half: Vec<f64> = (0..n).map(|a| 10.0 * g.covariance[(a, a)].sqrt()).collect();
    GridSpec::centered(&center, &half, count)
}

/// `(1 + eps h) m`, renormalized. Gaussian inputs in one or two dimensions are
/// first discretized on their automatic grid. Cells below the support floor
/// where the factor is nonpositive are set to zero rather than rejected.
pub fn perturb_density(m: &Measure, h: &dyn Fn(&[f64]) -> f64, eps: f64) -> Result<Measure> {
    if eps == 0.0 {
        return Ok(m.clone());
    }
    let base = match &m.repr {
        Representation::Gaussian(g) => {
            let count = if g.mean.len() == 1 { 4097 } else { 257 };
            m.discretize(&gaussian_auto_grid(g, count)?)?
        }
        Representation::Grid(_) | Representation::Particles(_) => m.clone(),
        Representation::Product { .. } => {
            return Err(Error::Unsupported("perturbation of a product measure".into()))
        }
    };
    let (points, weights): (Vec<Vec<f64>>, &[f64]) = match &base.repr {
        Representation::Grid(g) => (g.grid.points(), &g.weights),
        Representation::Particles(p) => (p.points.clone(), &p.weights),
        _ => unreachable!(),
    };
    let hv: Vec<f64> = points.iter().map(|x| h(x)).collect();
    if hv.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("perturbation function".into()));
    }
    let mean: f64 = hv.iter().zip(weights).map(|(a, w)| a * w).sum();
    let abs_mean: f64 = hv.iter().zip(weights).map(|(a, w)| a.abs() * w).sum();
    if mean.abs() > 1e-6 * (1.0 + abs_mean) {
        return Err(Error::PerturbationNotCentered(mean));
    }
    let floor = SUPPORT_FRACTION * weights.iter().copied().fold(0.0, f64::max);
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    let mut min_factor = f64::INFINITY;
    let mut new_w = Vec::with_capacity(weights.len());
    for ((x, a), w) in points.iter().zip(&hv).zip(weights) {
        let factor = 1.0 + eps * a;
        if factor <= 0.0 && *w > floor {
            lo = lo.min(x[0]);
            hi = hi.max(x[0]);
            min_factor = min_factor.min(factor);
        }
        new_w.push(w * factor.max(0.0));
    }
    if min_factor <= 0.0 {
        return Err(Error::NegativePerturbation { lo, hi, min_factor });
    }
    renormalize(&mut new_w)?;
    let repr = match base.repr {
        Representation::Grid(g) => Representation::Grid(GridDensity {
            grid: g.grid,
            weights: new_w,
            tail_mass: g.tail_mass,
        }),
        Representation::Particles(p) => Representation::Particles(ParticleCloud {
            points: p.points,
            weights: new_w,
        }),
        _ => unreachable!(),
    };
    Ok(Measure {
        repr,
        potential: None,
    })
}

/// Value, gradient and Hessian of `p` at `x`.
pub fn potential_eval(p: &Potential, x: &[f64]) -> Result<PotentialEval> {
    p.eval(x)
}

impl Measure {
    /// Weighted particle cloud; weights are renormalized.
    pub fn from_particles(points: Vec<Vec<f64>>, weights: Option<Vec<f64>>) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::ZeroMass);
        }
        let n = points[0].len();
        if let Some(bad) = points.iter().find(|p| p.len() != n) {
            return Err(Error::DimensionMismatch {
                expected: n,
                got: bad.len(),
            });
        }
        let mut w = weights.unwrap_or_else(|| vec![1.0; points.len()]);
        if w.len() != points.len() || w.iter().any(|v| !(*v >= 0.0)) {
            return Err(Error::Domain("particle weights must be nonnegative".into()));
        }
        renormalize(&mut w)?;
        Ok(Self {
            repr: Representation::Particles(ParticleCloud { points, weights: w }),
            potential: None,
        })
    }

    /// Grid measure from raw nonnegative weights (renormalized).
    pub fn from_grid_weights(grid: GridSpec, mut weights: Vec<f64>) -> Result<Self> {
        if weights.len() != grid.len() {
            return Err(Error::DimensionMismatch {
                expected: grid.len(),
                got: weights.len(),
            });
        }
        if weights.iter().any(|w| !(*w >= 0.0) || !w.is_finite()) {
            return Err(Error::Domain("grid weights must be finite and nonnegative".into()));
        }
        renormalize(&mut weights)?;
        Ok(Self {
            repr: Representation::Grid(GridDensity {
                grid,
                weights,
                tail_mass: 0.0,
            }),
            potential: None,
        })
    }

    pub fn with_potential(mut self, p: Arc<Potential>) -> Self {
        self.potential = Some(p);
        self
    }

    pub fn repr(&self) -> &Representation {
        &self.repr
    }

    pub fn potential(&self) -> Option<&Arc<Potential>> {
        self.potential.as_ref()
    }

    pub fn dim(&self) -> usize {
        match &self.repr {
            Representation::Gaussian(g) => g.mean.len(),
            Representation::Grid(g) => g.grid.dim(),
            Representation::Particles(p) => p.points[0].len(),
            Representation::Product { factor, copies } => factor.dim() * copies,
        }
    }

    pub fn as_gaussian(&self) -> Option<&GaussianRepr> {
        match &self.repr {
            Representation::Gaussian(g) => Some(g),
            _ => None,
        }
    }

    pub fn as_grid(&self) -> Option<&GridDensity> {
        match &self.repr {
            Representation::Grid(g) => Some(g),
            _ => None,
        }
    }

    /// Grid spacing when the measure carries a grid (factor grid for products).
    pub fn grid_step(&self) -> Option<f64> {
        match &self.repr {
            Representation::Grid(g) => Some(g.grid.max_spacing()),
            Representation::Product { factor, .. } => factor.grid_step(),
            _ => None,
        }
    }

    pub fn mass(&self) -> f64 {
        match &self.repr {
            Representation::Gaussian(_) => 1.0,
            Representation::Grid(g) => g.weights.iter().sum(),
            Representation::Particles(p) => p.weights.iter().sum(),
            Representation::Product { factor, copies } => factor.mass().powi(*copies as i32),
        }
    }

    pub fn mean(&self) -> Vec<f64> {
        let n = self.dim();
        match &self.repr {
            Representation::Gaussian(g) => g.mean.iter().copied().collect(),
            Representation::Grid(g) => {
                let mut m = vec![0.0; n];
                for (k, w) in g.weights.iter().enumerate() {
                    for (mi, xi) in m.iter_mut().zip(g.grid.point(k)) {
                        *mi += w * xi;
                    }
                }
                m
            }
            Representation::Particles(p) => {
                let mut m = vec![0.0; n];
                for (x, w) in p.points.iter().zip(&p.weights) {
                    for (mi, xi) in m.iter_mut().zip(x) {
                        *mi += w * xi;
                    }
                }
                m
            }
            Representation::Product { factor, copies } => factor.mean().repeat(*copies),
        }
    }

    /// `int |x|^2 dm`
    pub fn second_moment(&self) -> f64 {
        match &self.repr {
            Representation::Gaussian(g) => g.mean.norm_squared() + g.covariance.trace(),
            Representation::Grid(g) => g
                .weights
                .iter()
                .enumerate()
                .map(|(k, w)| w * linalg::norm2(&g.grid.point(k)))
                .sum(),
            Representation::Particles(p) => p
                .points
                .iter()
                .zip(&p.weights)
                .map(|(x, w)| w * linalg::norm2(x))
                .sum(),
            Representation::Product { factor, copies } => *copies as f64 * factor.second_moment(),
        }
    }

    /// Covariance matrix (Gaussian: exact; others: weighted empirical).
    pub fn covariance(&self) -> DMatrix<f64> {
        let n = self.dim();
        let mean = self.mean();
        let accumulate = |pts: &mut dyn Iterator<Item = (Vec<f64>, f64)>| {
            let mut c = DMatrix::zeros(n, n);
            for (x, w) in pts {
                for i in 0..n {
                    for j in 0..n {
                        c[(i, j)] += w * (x[i] - mean[i]) * (x[j] - mean[j]);
                    }
                }
            }
            c
        };
        match &self.repr {
            Representation::Gaussian(g) => g.covariance.clone(),
            Representation::Grid(g) => accumulate(
                &mut g
                    .weights
                    .iter()
                    .enumerate()
                    .map(|(k, w)| (g.grid.point(k), *w)),
            ),
            Representation::Particles(p) => accumulate(
                &mut p.points.iter().cloned().zip(p.weights.iter().copied()),
            ),
            Representation::Product { factor, copies } => {
                linalg::block_diag(&factor.covariance(), *copies)
            }
        }
    }

    pub fn is_standard_gaussian(&self) -> bool {
        match &self.repr {
            Representation::Gaussian(g) => {
                g.mean.amax() == 0.0 && linalg::is_identity(&g.covariance, 1e-14)
            }
            Representation::Product { factor, .. } => factor.is_standard_gaussian(),
            Representation::Grid(_) => self
                .potential
                .as_ref()
                .is_some_and(|p| p.is_standard_gaussian()),
            Representation::Particles(_) => false,
        }
    }

    /// Discretizes the measure on `grid` through its potential.
    pub fn discretize(&self, grid: &GridSpec) -> Result<Measure> {
        match (&self.repr, &self.potential) {
            (Representation::Grid(g), _) if &g.grid == grid => Ok(self.clone()),
            (Representation::Gaussian(_), Some(p)) => build_from_potential(p.clone(), grid.clone()),
            (Representation::Product { .. }, _) => self.materialize()?.discretize(grid),
            _ => Err(Error::Unsupported(
                "only analytic measures can be discretized on a new grid".into(),
            )),
        }
    }

    /// Expands a product into a single representation: block-diagonal Gaussian,
    /// or a 2D grid for two copies of a 1D grid. Larger grids are refused.
    pub fn materialize(&self) -> Result<Measure> {
        let (factor, copies) = match &self.repr {
            Representation::Product { factor, copies } => (factor.as_ref(), *copies),
            _ => return Ok(self.clone()),
        };
        match &factor.repr {
            Representation::Gaussian(g) => Ok(Measure {
                repr: Representation::Gaussian(GaussianRepr {
                    mean: DVector::from_vec(
                        g.mean.iter().copied().collect::<Vec<_>>().repeat(copies),
                    ),
                    covariance: linalg::block_diag(&g.covariance, copies),
                }),
                potential: self.potential.clone(),
            }),
            Representation::Grid(g) if g.grid.dim() * copies == 2 => {
                let c = g.grid.counts()[0];
                let grid = GridSpec::new(
                    vec![g.grid.lower()[0]; 2],
                    vec![g.grid.upper()[0]; 2],
                    vec![c; 2],
                )?;
                let mut w = Vec::with_capacity(c * c);
                for i in 0..c {
                    for j in 0..c {
                        w.push(g.weights[i] * g.weights[j]);
                    }
                }
                Ok(Measure {
                    repr: Representation::Grid(GridDensity {
                        grid,
                        weights: w,
                        tail_mass: 2.0 * g.tail_mass,
                    }),
                    potential: self.potential.clone(),
                })
            }
            _ => Err(Error::GridDimension(factor.dim() * copies)),
        }
    }

    /// Draws `count` independent samples.
    pub fn sample<R: Rng + ?Sized>(&self, count: usize, rng: &mut R) -> Result<Vec<Vec<f64>>> {
        match &self.repr {
            Representation::Gaussian(g) => {
                let l = linalg::cholesky_lower(&g.covariance)?;
                let n = g.mean.len();
                Ok((0..count)
                    .map(|_| {
                        let z = DVector::from_iterator(
                            n,
                            (0..n).map(|_| rng.sample::<f64, _>(StandardNormal)),
                        );
                        (&g.mean + &l * z).iter().copied().collect()
                    })
                    .collect())
            }
            Representation::Grid(g) => {
                let cdf = cumulative(&g.weights);
                let hs: Vec<f64> = (0..g.grid.dim()).map(|a| g.grid.spacing(a)).collect();
                Ok((0..count)
                    .map(|_| {
                        let k = pick(&cdf, rng.random::<f64>());
                        let mut x = g.grid.point(k);
                        for (xi, h) in x.iter_mut().zip(&hs) {
                            *xi += (rng.random::<f64>() - 0.5) * h;
                        }
                        x
                    })
                    .collect())
            }
            Representation::Particles(p) => {
                let cdf = cumulative(&p.weights);
                Ok((0..count)
                    .map(|_| p.points[pick(&cdf, rng.random::<f64>())].clone())
                    .collect())
            }
            Representation::Product { factor, copies } => {
                let blocks: Vec<Vec<Vec<f64>>> = (0..*copies)
                    .map(|_| factor.sample(count, rng))
                    .collect::<Result<_>>()?;
                Ok((0..count)
                    .map(|i| blocks.iter().flat_map(|b| b[i].clone()).collect())
                    .collect())
            }
        }
    }
}

fn cumulative(w: &[f64]) -> Vec<f64> {
    let mut acc = 0.0;
    w.iter()
        .map(|v| {
            acc += v;
            acc
        })
        .collect()
}

fn pick(cdf: &[f64], u: f64) -> usize {
    let total = *cdf.last().unwrap();
    cdf.partition_point(|c| *c < u * total).min(cdf.len() - 1)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn translated_gaussian_second_moment() {
        let m = isotropic_gaussian(&[1.0, 1.0], 1.0).unwrap();
        assert!((m.second_moment() - 4.0).abs() < 1e-14);
    }

    #[test]
    fn rejects_non_spd() {
        let r = build_gaussian(
            DVector::zeros(2),
            DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 1.0]),
        );
        assert!(matches!(r, Err(Error::NotPositiveDefinite(_))));
    }

    #[test]
    fn gaussian_grid_moments() {
        let p = Arc::new(Potential::standard_gaussian(1));
        let g = GridSpec::uniform_1d(-8.0, 8.0, 1 << 12).unwrap();
        let m = build_from_potential(p, g).unwrap();
        assert!((m.mass() - 1.0).abs() < 1e-12);
        assert!((m.second_moment() - 1.0).abs() < 1e-6);
        assert!(m.as_grid().unwrap().tail_mass < 1e-12);
    }

    #[test]
    fn quartic_grid_is_symmetric() {
        let p = Arc::new(Potential::quartic(1));
        let g = GridSpec::uniform_1d(-4.0, 4.0, 2001).unwrap();
        let m = build_from_potential(p, g).unwrap();
        assert!(m.mean()[0].abs() < 1e-10);
    }

    #[test]
    fn small_box_is_rejected() {
        let p = Arc::new(Potential::standard_gaussian(1));
        let g = GridSpec::uniform_1d(-3.0, 3.0, 301).unwrap();
        assert!(matches!(
            build_from_potential(p, g),
            Err(Error::TailMassTooLarge { .. })
        ));
    }

    #[test]
    fn perturbation_shifts_mean() {
        let gamma = standard_gaussian(1);
        let m = perturb_density(&gamma, &|x| x[0], 0.1).unwrap();
        assert!((m.mean()[0] - 0.1).abs() < 1e-8);
        let same = perturb_density(&gamma, &|x| x[0], 0.0).unwrap();
        assert!(same.as_gaussian().is_some());
        let q = perturb_density(&gamma, &|x| x[0] * x[0] - 1.0, 0.05).unwrap();
        assert!((q.mass() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn perturbation_errors() {
        let gamma = standard_gaussian(1);
        assert!(matches!(
            perturb_density(&gamma, &|x| x[0] * x[0], 0.1),
            Err(Error::PerturbationNotCentered(_))
        ));
        match perturb_density(&gamma, &|x| x[0], 1.0) {
            Err(Error::NegativePerturbation { hi, .. }) => assert!(hi <= -1.0),
            other => panic!("expected negativity error, got {other:?}"),
        }
    }

    #[test]
    fn tensor_power_identity_and_materialization() {
        let g = standard_gaussian(1);
        assert!(tensor_power(&g, 1).unwrap().as_gaussian().is_some());
        let t = tensor_power(&g, 3).unwrap();
        assert_eq!(t.dim(), 3);
        let full = t.materialize().unwrap();
        assert!(full.is_standard_gaussian());

        let p = Arc::new(Potential::standard_gaussian(1));
        let grid = build_from_potential(p, GridSpec::uniform_1d(-8.0, 8.0, 101).unwrap()).unwrap();
        assert!(tensor_power(&grid, 2).unwrap().materialize().is_ok());
        assert!(matches!(
            tensor_power(&grid, 4).unwrap().materialize(),
            Err(Error::GridDimension(4))
        ));
    }
}
