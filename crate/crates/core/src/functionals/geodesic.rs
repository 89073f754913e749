use super::entropy::entropy_dx;
use super::transport::{brenier_transport, TransportPlan};
use crate::error::{Error, Result};
use crate::measures::Measure;

/// `psi(s) = Ent_dx(mu^s)` along the displacement interpolation
/// `mu^s = ((1-s) Id + s grad phi) # m0`.
#[derive(Debug, Clone)]
pub struct GeodesicProfile {
    pub dim: usize,
    pub s_grid: Vec<f64>,
    pub psi: Vec<f64>,
    /// `psi'(s)` by differentiating the change-of-variables formula.
    pub dpsi: Vec<f64>,
    /// `psi''(s)` likewise.
    pub d2psi: Vec<f64>,
    pub plan: TransportPlan,
    /// `Ent_dx(m1)` computed directly, for the endpoint check.
    pub target_entropy: f64,
}

impl GeodesicProfile {
    /// Profile from explicit values, for analytic or externally computed curves.
    pub fn from_values(
        dim: usize,
        s_grid: Vec<f64>,
        psi: Vec<f64>,
        dpsi: Vec<f64>,
        d2psi: Vec<f64>,
        plan: TransportPlan,
    ) -> Self {
        let target_entropy = *psi.last().unwrap_or(&f64::NAN);
        Self {
            dim,
            s_grid,
            psi,
            dpsi,
            d2psi,
            plan,
            target_entropy,
        }
    }

    /// Central-difference `(psi', psi'')` at interior nodes of the `s` grid.
    pub fn finite_differences(&self) -> Vec<(f64, f64, f64)> {
        let s = &self.s_grid;
        (1..s.len().saturating_sub(1))
            .map(|i| {
                let h = s[i + 1] - s[i];
                let d1 = (self.psi[i + 1] - self.psi[i - 1]) / (2.0 * h);
                let d2 = (self.psi[i + 1] - 2.0 * self.psi[i] + self.psi[i - 1]) / (h * h);
                (s[i], d1, d2)
            })
            .collect()
    }
}

/// Entropy profile on a uniform grid of `s_count` nodes in `[0, 1]`.
///
/// With `theta` the eigenvalues of `Hess phi - I`, `psi(s) = psi(0) -
/// int sum log(1 + s theta) dm0`, which is exact for affine and 1D monotone maps.
pub fn geodesic_profile(m0: &Measure, m1: &Measure, s_count: usize) -> Result<GeodesicProfile> {
    if s_count < 2 {
        return Err(Error::Domain("geodesic profile needs at least two nodes".into()));
    }
    let plan = brenier_transport(m0, m1)?;
    let spectrum = plan.hessian_spectrum()?;
    let psi0 = plan.source_entropy;
    let s_grid: Vec<f64> = (0..s_count)
        .map(|i| i as f64 / (s_count - 1) as f64)
        .collect();
    let mut psi = Vec::with_capacity(s_count);
    let mut dpsi = Vec::with_capacity(s_count);
    let mut d2psi = Vec::with_capacity(s_count);
    for &s in &s_grid {
        let (mut l, mut d1, mut d2) = (0.0, 0.0, 0.0);
        for (ev, w) in &spectrum {
            for lambda in ev {
                let theta = lambda - 1.0;
                let det = 1.0 + s * theta;
                if !(det > 0.0) {
                    return Err(Error::InvalidPlan(format!(
                        "det(I + s(Hess phi - I)) = {det} at s = {s}"
                    )));
                }
                l += w * det.ln();
                d1 += w * theta / det;
                d2 += w * (theta / det).powi(2);
            }
        }
        psi.push(psi0 - l);
        dpsi.push(-d1);
        d2psi.push(d2);
    }
    let target_entropy = entropy_dx(&plan.target)?;
    Ok(GeodesicProfile {
        dim: m0.dim(),
        s_grid,
        psi,
        dpsi,
        d2psi,
        plan,
        target_entropy,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measures::{isotropic_gaussian, standard_gaussian};

    #[test]
    fn gaussian_dilation_profile() {
        let g = standard_gaussian(1);
        let wide = isotropic_gaussian(&[0.0], 4.0).unwrap();
        let prof = geodesic_profile(&g, &wide, 33).unwrap();
        let e0 = -0.5 * (2.0 * std::f64::consts::PI * std::f64::consts::E).ln();
        for (i, s) in prof.s_grid.iter().enumerate() {
            assert!((prof.psi[i] - (e0 - (1.0 + s).ln())).abs() < 1e-12);
            assert!((prof.d2psi[i] - prof.dpsi[i].powi(2)).abs() < 1e-12);
        }
        assert!((prof.psi[32] - prof.target_entropy).abs() < 1e-12);
    }

    #[test]
    fn constant_profile() {
        let g = isotropic_gaussian(&[0.0, 0.0], 2.0).unwrap();
        let shifted = isotropic_gaussian(&[1.0, -1.0], 2.0).unwrap();
        let prof = geodesic_profile(&g, &shifted, 33).unwrap();
        assert!(prof.psi.iter().all(|p| (p - prof.psi[0]).abs() < 1e-12));
    }
}
