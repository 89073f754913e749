use statrs::function::erf::erfc;

use super::evaluation::positive_curvature;
use crate::error::{Error, Result};
use crate::measures::{gaussian_auto_grid, Measure, Representation};

/// Sub-cells per axis used to estimate the covered fraction of a 2D cell.
const SUBCELLS_2D: usize = 8;
/// Grid size used when a 2D Gaussian has to be discretized.
const GAUSSIAN_GRID_2D: usize = 401;

/// Set `A` whose enlargements `A_r = {x : d(x, A) > r}` are tested.
#[derive(Debug, Clone, PartialEq)]
pub enum SetDescriptor {
    /// Closed Euclidean ball.
    Ball { center: Vec<f64>, radius: f64 },
    /// Half-space `{x . direction <= threshold}` with `direction` a unit vector;
    /// in 1D, `direction = [1]` gives `(-inf, threshold]` and `[-1]` gives `[-threshold, inf)`.
    HalfSpace { direction: Vec<f64>, threshold: f64 },
}

impl SetDescriptor {
    /// Signed distance-like coordinate: `A_r = {x : level(x) > r}`.
    fn level(&self, x: &[f64]) -> f64 {
        match self {
            SetDescriptor::Ball { center, radius } => {
                let d2: f64 = x.iter().zip(center).map(|(a, b)| (a - b).powi(2)).sum();
                d2.sqrt() - radius
            }
            SetDescriptor::HalfSpace {
                direction,
                threshold,
            } => x.iter().zip(direction).map(|(a, b)| a * b).sum::<f64>() - threshold,
        }
    }

    fn validate(&self, n: usize) -> Result<()> {
        let v = match self {
            SetDescriptor::Ball { center, radius } => {
                if !(*radius >= 0.0) {
                    return Err(Error::Domain(format!("negative radius {radius}")));
                }
                center
            }
            SetDescriptor::HalfSpace { direction, .. } => {
                let norm: f64 = direction.iter().map(|d| d * d).sum::<f64>().sqrt();
                if (norm - 1.0).abs() > 1e-12 {
                    return Err(Error::Domain("half-space direction must be a unit vector".into()));
                }
                direction
            }
        };
        if v.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                got: v.len(),
            });
        }
        Ok(())
    }
}

/// One row of the concentration table.
#[derive(Debug, Clone, PartialEq)]
pub struct ConcentrationRow {
    pub r: f64,
    /// `r > c_A` and `mu(A_r) > 0`.
    pub applicable: bool,
    /// Bracket `1 + (V_r - c_V - (R/2)(r - c_A)^2)/n` was nonpositive; bound reported as 0.
    pub vacuous: bool,
    pub dimensional_bound: f64,
    pub classical_bound: f64,
    pub exact_mass: f64,
    pub c_a: f64,
    pub c_v: f64,
    pub v_r: f64,
}

/// Mass and `V`-moment of the region `{level > t}`.
trait Regions {
    fn mass(&self, t: f64) -> f64;
    /// `(mu({level > t}), int_{level > t} V dmu)`
    fn moments(&self, t: f64) -> (f64, f64);
    fn mean_v(&self) -> f64;
}

/// 1D Gaussian with exact interval integrals of `V = (x-m)^2/(2s^2) + log(sqrt(2 pi) s)`.
struct Gaussian1d<'a> {
    mean: f64,
    sd: f64,
    set: &'a SetDescriptor,
}

/// `P(Z > a)` and `int_a^inf z^2/2 phi(z) dz` for a standard normal `Z`.
fn upper_tail(a: f64) -> (f64, f64) {
    if a == f64::NEG_INFINITY {
        return (1.0, 0.5);
    }
    if a == f64::INFINITY {
        return (0.0, 0.0);
    }
    let tail = 0.5 * erfc(a / std::f64::consts::SQRT_2);
    let phi = (-0.5 * a * a).exp() / (2.0 * std::f64::consts::PI).sqrt();
    (tail, 0.5 * (tail + a * phi))
}

/// Intervals making up `{level > t}` for a 1D set.
fn region_1d(set: &SetDescriptor, t: f64) -> Vec<(f64, f64)> {
    match set {
        SetDescriptor::Ball { center, radius } => {
            let reach = radius + t;
            if reach < 0.0 {
                return vec![(f64::NEG_INFINITY, f64::INFINITY)];
            }
            vec![
                (f64::NEG_INFINITY, center[0] - reach),
                (center[0] + reach, f64::INFINITY),
            ]
        }
        SetDescriptor::HalfSpace {
            direction,
            threshold,
        } => {
            if direction[0] > 0.0 {
                vec![(threshold + t, f64::INFINITY)]
            } else {
                vec![(f64::NEG_INFINITY, -(threshold + t))]
            }
        }
    }
}

impl Gaussian1d<'_> {
    /// Standardized intervals making up `{level > t}`.
    fn intervals(&self, t: f64) -> Vec<(f64, f64)> {
        let z = |x: f64| (x - self.mean) / self.sd;
        region_1d(self.set, t)
            .into_iter()
            .map(|(a, b)| (z(a), z(b)))
            .collect()
    }

    fn interval(a: f64, b: f64) -> (f64, f64) {
        // int_a^b = int_a^inf - int_b^inf, evaluated on the side with the smaller tail
        if a > 0.0 || b == f64::INFINITY {
            let (ta, ma) = upper_tail(a);
            let (tb, mb) = upper_tail(b);
            (ta - tb, ma - mb)
        } else {
            let (ta, ma) = upper_tail(-b);
            let (tb, mb) = upper_tail(-a);
            (ta - tb, ma - mb)
        }
    }

    fn log_norm(&self) -> f64 {
        0.5 * (2.0 * std::f64::consts::PI).ln() + self.sd.ln()
    }
}

impl Regions for Gaussian1d<'_> {
    fn mass(&self, t: f64) -> f64 {
        self.moments(t).0
    }

    fn moments(&self, t: f64) -> (f64, f64) {
        let (mut m, mut q) = (0.0, 0.0);
        for (a, b) in self.intervals(t) {
            let (dm, dq) = Self::interval(a, b);
            m += dm;
            q += dq;
        }
        (m, q + m * self.log_norm())
    }

    fn mean_v(&self) -> f64 {
        0.5 + self.log_norm()
    }
}

/// Grid measure with fractional cell coverage.
struct GridRegions<'a> {
    points: Vec<Vec<f64>>,
    weights: &'a [f64],
    potential: Vec<f64>,
    spacing: Vec<f64>,
    set: &'a SetDescriptor,
}

impl GridRegions<'_> {
    /// Fraction of the cell around node `k` lying in `{level > t}`.
    fn coverage(&self, k: usize, t: f64) -> f64 {
        let x = &self.points[k];
        if self.spacing.len() == 1 {
            let h = self.spacing[0];
            let (lo, hi) = (x[0] - 0.5 * h, x[0] + 0.5 * h);
            return region_1d(self.set, t)
                .into_iter()
                .map(|(a, b)| (b.min(hi) - a.max(lo)).max(0.0))
                .sum::<f64>()
                / h;
        }
        let (h0, h1) = (self.spacing[0], self.spacing[1]);
        let m = SUBCELLS_2D;
        let mut inside = 0;
        for i in 0..m {
            for j in 0..m {
                let p = [
                    x[0] + h0 * ((i as f64 + 0.5) / m as f64 - 0.5),
                    x[1] + h1 * ((j as f64 + 0.5) / m as f64 - 0.5),
                ];
                if self.set.level(&p) > t {
                    inside += 1;
                }
            }
        }
        inside as f64 / (m * m) as f64
    }
}

impl Regions for GridRegions<'_> {
    fn mass(&self, t: f64) -> f64 {
        self.moments(t).0
    }

    fn moments(&self, t: f64) -> (f64, f64) {
        let (mut m, mut q) = (0.0, 0.0);
        for (k, w) in self.weights.iter().enumerate() {
            if *w == 0.0 {
                continue;
            }
            let c = self.coverage(k, t);
            if c > 0.0 {
                m += w * c;
                q += w * c * self.potential[k];
            }
        }
        (m, q)
    }

    fn mean_v(&self) -> f64 {
        self.weights
            .iter()
            .zip(&self.potential)
            .map(|(w, v)| w * v)
            .sum()
    }
}

/// Dimensional concentration bound for `mu = e^{-V}` with `Hess V >= R`:
/// for `r > c_A`, `mu(A_r) <= e^{c_V - V_r} [1 + (V_r - c_V - (R/2)(r - c_A)^2)/n]^n`,
/// next to the classical `e^{-(R/2)(r - c_A)^2}` and the exact mass of `A_r`.
pub fn concentration_profile(
    mu: &Measure,
    set: &SetDescriptor,
    r_values: &[f64],
) -> Result<Vec<ConcentrationRow>> {
    let r_curv = positive_curvature(mu)?;
    let n = mu.dim();
    set.validate(n)?;
    let pot = mu.potential().expect("checked by positive_curvature").clone();
    let table = |regions: &dyn Regions| -> Vec<ConcentrationRow> {
        let mass_a = 1.0 - regions.mass(0.0);
        let c_a = (2.0 / r_curv * (1.0 / mass_a).ln()).sqrt();
        let c_v = regions.mean_v();
        r_values
            .iter()
            .map(|&r| concentration_row(regions, r, r_curv, n, c_a, c_v))
            .collect()
    };
    match mu.repr() {
        Representation::Gaussian(g) if n == 1 => {
            let regions = Gaussian1d {
                mean: g.mean[0],
                sd: g.covariance[(0, 0)].sqrt(),
                set,
            };
            Ok(table(&regions))
        }
        Representation::Gaussian(g) if n == 2 => {
            let grid = gaussian_auto_grid(g, GAUSSIAN_GRID_2D)?;
            concentration_profile(&mu.discretize(&grid)?, set, r_values)
        }
        Representation::Grid(g) if n <= 2 => {
            let points = g.grid.points();
            let potential = points.iter().map(|x| pot.value(x)).collect();
            let regions = GridRegions {
                points,
                weights: &g.weights,
                potential,
                spacing: (0..n).map(|a| g.grid.spacing(a)).collect(),
                set,
            };
            Ok(table(&regions))
        }
        _ => Err(Error::Unsupported(
            "concentration profiles need a 1D/2D grid or a 1D/2D Gaussian".into(),
        )),
    }
}

fn concentration_row(
    regions: &dyn Regions,
    r: f64,
    curvature: f64,
    n: usize,
    c_a: f64,
    c_v: f64,
) -> ConcentrationRow {
    let nf = n as f64;
    let (mass, moment) = regions.moments(r);
    let mut row = ConcentrationRow {
        r,
        applicable: false,
        vacuous: false,
        dimensional_bound: f64::NAN,
        classical_bound: f64::NAN,
        exact_mass: mass,
        c_a,
        c_v,
        v_r: f64::NAN,
    };
    if !(r > c_a) || !(mass > 0.0) {
        return row;
    }
    let gap = 0.5 * curvature * (r - c_a).powi(2);
    let v_r = moment / mass;
    let bracket = 1.0 + (v_r - c_v - gap) / nf;
    row.applicable = true;
    row.v_r = v_r;
    row.classical_bound = (-gap).exp();
    if bracket <= 0.0 {
        row.vacuous = true;
        row.dimensional_bound = 0.0;
    } else {
        row.dimensional_bound = (c_v - v_r + nf * bracket.ln()).exp();
    }
    row
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measures::{build_from_potential, standard_gaussian, GridSpec, Potential};
    use std::sync::Arc;

    #[test]
    fn gaussian_interval_dominations() {
        let g = standard_gaussian(1);
        let a = SetDescriptor::Ball {
            center: vec![0.0],
            radius: 1.0,
        };
        let rs: Vec<f64> = (0..60).map(|i| 0.1 * i as f64).collect();
        let rows = concentration_profile(&g, &a, &rs).unwrap();
        let mut used = 0;
        for row in rows.iter().filter(|r| r.applicable) {
            used += 1;
            assert!(row.exact_mass <= row.classical_bound);
            assert!(row.dimensional_bound <= row.classical_bound * (1.0 + 1e-12));
            assert!(row.exact_mass <= row.dimensional_bound * (1.0 + 1e-9) || row.vacuous);
        }
        assert!(used > 40);
        // exact oracle for one row: mu(|x| > 1 + r) = erfc((1+r)/sqrt 2)
        let row = &rows[10];
        assert!((row.exact_mass - erfc(2.0 / std::f64::consts::SQRT_2)).abs() < 1e-15);
    }

    #[test]
    fn grid_matches_closed_form() {
        let p = Arc::new(Potential::standard_gaussian(1));
        let mu = build_from_potential(p, GridSpec::uniform_1d(-12.0, 12.0, 24001).unwrap()).unwrap();
        let a = SetDescriptor::HalfSpace {
            direction: vec![1.0],
            threshold: 0.5,
        };
        let rs = [1.5, 2.5];
        let exact = concentration_profile(&standard_gaussian(1), &a, &rs).unwrap();
        let grid = concentration_profile(&mu, &a, &rs).unwrap();
        for (e, g) in exact.iter().zip(&grid) {
            assert!((e.exact_mass - g.exact_mass).abs() < 1e-6);
            assert!((e.dimensional_bound - g.dimensional_bound).abs() < 1e-5);
        }
    }
}
