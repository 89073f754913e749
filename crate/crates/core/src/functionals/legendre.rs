use crate::error::{Error, Result};
use crate::linalg;
use crate::measures::Potential;

const COARSE_1D: usize = 4001;
const COARSE_2D: usize = 161;
const MAX_DOUBLINGS: usize = 40;
const NEWTON_STEPS: usize = 60;

/// `p*(y) = sup_x { x.y - p(x) }`.
///
/// A coarse grid search on a box around the origin locates the maximizer;
/// the box is doubled while the maximizer sits on its boundary, and Newton
/// iterations (safeguarded by monotone ascent) polish the interior maximum.
/// A maximizer still on the boundary after the doublings is reported as
/// [`Error::LegendreBoundary`].
pub fn legendre_transform(p: &Potential, y: &[f64]) -> Result<f64> {
    let n = p.dim();
    if y.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: y.len(),
        });
    }
    let objective = |x: &[f64]| {
        let v = linalg::dot(x, y) - p.value(x);
        if v.is_nan() {
            f64::NEG_INFINITY
        } else {
            v
        }
    };
    let start = if n <= 2 {
        let mut half = 2.0 + 2.0 * y.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let mut found = None;
        for _ in 0..MAX_DOUBLINGS {
            let (x, on_boundary) = coarse_search(&objective, n, half);
            if !on_boundary {
                found = Some(x);
                break;
            }
            half *= 2.0;
        }
        found.ok_or_else(|| Error::LegendreBoundary(y.to_vec()))?
    } else {
        vec![0.0; n]
    };
    let x = newton_ascent(p, y, start, &objective);
    let v = objective(&x);
    if !v.is_finite() {
        return Err(Error::NonFinite(format!("Legendre transform of {}", p.name)));
    }
    Ok(v)
}

fn coarse_search(objective: &dyn Fn(&[f64]) -> f64, n: usize, half: f64) -> (Vec<f64>, bool) {
    let m = if n == 1 { COARSE_1D } else { COARSE_2D };
    let h = 2.0 * half / (m - 1) as f64;
    let coord = |i: usize| -half + i as f64 * h;
    let mut best = (f64::NEG_INFINITY, vec![0usize; n]);
    if n == 1 {
        for i in 0..m {
            let v = objective(&[coord(i)]);
            if v > best.0 {
                best = (v, vec![i]);
            }
        }
    } else {
        for i in 0..m {
            for j in 0..m {
                let v = objective(&[coord(i), coord(j)]);
                if v > best.0 {
                    best = (v, vec![i, j]);
                }
            }
        }
    }
    let boundary = best.1.iter().any(|&i| i == 0 || i == m - 1);
    (best.1.iter().map(|&i| coord(i)).collect(), boundary)
}

fn newton_ascent(
    p: &Potential,
    y: &[f64],
    mut x: Vec<f64>,
    objective: &dyn Fn(&[f64]) -> f64,
) -> Vec<f64> {
    let mut fx = objective(&x);
    for _ in 0..NEWTON_STEPS {
        let grad: Vec<f64> = y.iter().zip(p.gradient(&x)).map(|(a, b)| a - b).collect();
        let step = match linalg::spd_solve(&p.hessian(&x), &grad) {
            Ok(s) => s,
            Err(_) => break,
        };
        let mut t = 1.0;
        let mut improved = false;
        while t > 1e-8 {
            let cand: Vec<f64> = x.iter().zip(&step).map(|(a, s)| a + t * s).collect();
            let fc = objective(&cand);
            if fc >= fx {
                improved = fc > fx;
                x = cand;
                fx = fc;
                break;
            }
            t *= 0.5;
        }
        if !improved {
            break;
        }
    }
    x
}

/// Discrete conjugate `max_i { x_i y - v_i }` for every `y` in `ys`.
///
/// Linear-time after sorting: the maximizers are vertices of the lower convex
/// hull of `(x_i, v_i)`, visited in order of increasing slope.
pub fn legendre_discrete_1d(xs: &[f64], values: &[f64], ys: &[f64]) -> Vec<f64> {
    let mut pts: Vec<(f64, f64)> = xs
        .iter()
        .zip(values)
        .filter(|(_, v)| v.is_finite())
        .map(|(x, v)| (*x, *v))
        .collect();
    pts.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut hull: Vec<(f64, f64)> = Vec::with_capacity(pts.len());
    for p in pts {
        while hull.len() >= 2 {
            let (a, b) = (hull[hull.len() - 2], hull[hull.len() - 1]);
            let cross = (b.0 - a.0) * (p.1 - a.1) - (b.1 - a.1) * (p.0 - a.0);
            if cross <= 0.0 {
                hull.pop();
            } else {
                break;
            }
        }
        hull.push(p);
    }
    let mut order: Vec<usize> = (0..ys.len()).collect();
    order.sort_by(|&a, &b| ys[a].total_cmp(&ys[b]));
    let mut out = vec![f64::NEG_INFINITY; ys.len()];
    let mut j = 0;
    for i in order {
        let y = ys[i];
        while j + 1 < hull.len() && (hull[j + 1].1 - hull[j].1) <= y * (hull[j + 1].0 - hull[j].0) {
            j += 1;
        }
        if let Some(&(x, v)) = hull.get(j) {
            out[i] = x * y - v;
        }
    }
    out
}

/// Discrete conjugate of values on a tensor grid `x0s x x1s` (row-major,
/// last axis fastest), evaluated on `y0s x y1s` by two separable 1D passes.
pub fn legendre_discrete_2d(
    x0s: &[f64],
    x1s: &[f64],
    values: &[f64],
    y0s: &[f64],
    y1s: &[f64],
) -> Vec<f64> {
    let (n0, n1) = (x0s.len(), x1s.len());
    assert_eq!(values.len(), n0 * n1, "values must cover the grid");
    // pass 1: g(x0, y1) = sup_{x1} { x1 y1 - V(x0, x1) }
    let g: Vec<Vec<f64>> = (0..n0)
        .map(|i| legendre_discrete_1d(x1s, &values[i * n1..(i + 1) * n1], y1s))
        .collect();
    // pass 2: sup_{x0} { x0 y0 + g(x0, y1) }
    let mut out = vec![0.0; y0s.len() * y1s.len()];
    for (j, _) in y1s.iter().enumerate() {
        let col: Vec<f64> = g.iter().map(|row| -row[j]).collect();
        let conj = legendre_discrete_1d(x0s, &col, y0s);
        for (i, c) in conj.into_iter().enumerate() {
            out[i * y1s.len() + j] = c;
        }
    }
    out
}
