use crate::error::{Error, Result};

/// Truncated tail mass allowed when building a grid density.
pub const TAIL_EPSILON: f64 = 1e-9;
/// Floor applied to densities before any logarithm.
pub const DENSITY_FLOOR: f64 = 1e-300;
/// Cells below this fraction of the maximum weight are excluded from
/// gradient-based quadrature (Fisher information, scores).
pub const SUPPORT_FRACTION: f64 = 1e-15;

/// Uniform tensor grid on a box in one or two dimensions.
///
/// Nodes are `lower + i h` for `i = 0..count`, with `h = (upper - lower)/(count - 1)`.
/// Flat indices are row-major (last axis fastest).
#[derive(Debug, Clone, PartialEq)]
pub struct GridSpec {
    lower: Vec<f64>,
    upper: Vec<f64>,
    counts: Vec<usize>,
}

impl GridSpec {
    pub fn new(lower: Vec<f64>, upper: Vec<f64>, counts: Vec<usize>) -> Result<Self> {
        let n = lower.len();
        if n == 0 || n > 2 {
            return Err(Error::GridDimension(n));
        }
        if upper.len() != n || counts.len() != n {
            return Err(Error::InvalidGrid("bounds and counts differ in length".into()));
        }
        for a in 0..n {
            if !(upper[a] > lower[a]) || !lower[a].is_finite() || !upper[a].is_finite() {
                return Err(Error::InvalidGrid(format!(
                    "axis {a}: need finite lower < upper"
                )));
            }
            if counts[a] < 3 {
                return Err(Error::InvalidGrid(format!("axis {a}: need >= 3 points")));
            }
        }
        Ok(Self {
            lower,
            upper,
            counts,
        })
    }

    pub fn uniform_1d(lower: f64, upper: f64, count: usize) -> Result<Self> {
        Self::new(vec![lower], vec![upper], vec![count])
    }

    /// Square grid `[lower, upper]^2` with `count` points per axis.
    pub fn square_2d(lower: f64, upper: f64, count: usize) -> Result<Self> {
        Self::new(vec![lower; 2], vec![upper; 2], vec![count; 2])
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    pub fn lower(&self) -> &[f64] {
        &self.lower
    }

    pub fn upper(&self) -> &[f64] {
        &self.upper
    }

    pub fn counts(&self) -> &[usize] {
        &self.counts
    }

    pub fn spacing(&self, axis: usize) -> f64 {
        (self.upper[axis] - self.lower[axis]) / (self.counts[axis] - 1) as f64
    }

    /// Largest spacing over axes.
    pub fn max_spacing(&self) -> f64 {
        (0..self.dim())
            .map(|a| self.spacing(a))
            .fold(0.0, f64::max)
    }

    pub fn cell_volume(&self) -> f64 {
        (0..self.dim()).map(|a| self.spacing(a)).product()
    }

    pub fn len(&self) -> usize {
        self.counts.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn axis_nodes(&self, axis: usize) -> Vec<f64> {
        let h = self.spacing(axis);
        (0..self.counts[axis])
            .map(|i| self.lower[axis] + i as f64 * h)
            .collect()
    }

    pub fn multi_index(&self, flat: usize) -> Vec<usize> {
        if self.dim() == 1 {
            vec![flat]
        } else {
            vec![flat / self.counts[1], flat % self.counts[1]]
        }
    }

    pub fn flat_index(&self, idx: &[usize]) -> usize {
        if self.dim() == 1 {
            idx[0]
        } else {
            idx[0] * self.counts[1] + idx[1]
        }
    }

    /// Stride of one step along `axis` in flat indexing.
    pub fn stride(&self, axis: usize) -> usize {
        if self.dim() == 1 || axis == 1 {
            1
        } else {
            self.counts[1]
        }
    }

    pub fn point(&self, flat: usize) -> Vec<f64> {
        self.multi_index(flat)
            .iter()
            .enumerate()
            .map(|(a, &i)| self.lower[a] + i as f64 * self.spacing(a))
            .collect()
    }

    pub fn points(&self) -> Vec<Vec<f64>> {
        (0..self.len()).map(|k| self.point(k)).collect()
    }

    /// Whether `flat` lies on the face of `axis` in direction `sign` (+1/-1).
    pub fn on_face(&self, flat: usize, axis: usize, sign: i32) -> bool {
        let i = self.multi_index(flat)[axis];
        if sign > 0 {
            i == self.counts[axis] - 1
        } else {
            i == 0
        }
    }

    /// Symmetric box `center +- half_width` with `count` points per axis.
    pub fn centered(center: &[f64], half_width: &[f64], count: usize) -> Result<Self> {
        Self::new(
            center
                .iter()
                .zip(half_width)
                .map(|(c, w)| c - w)
                .collect(),
            center
                .iter()
                .zip(half_width)
                .map(|(c, w)| c + w)
                .collect(),
            vec![count; center.len()],
        )
    }
}
