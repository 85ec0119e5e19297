//! Dense-grid reference envelope for one-dimensional models.

use super::ExtensionModel;
use crate::error::{JetError, Result};

/// Lower convex hull of planar points, as vertices sorted by abscissa.
#[derive(Debug, Clone, PartialEq)]
pub struct Hull1D {
    vertices: Vec<(f64, f64)>,
}

impl Hull1D {
    pub fn vertices(&self) -> &[(f64, f64)] {
        &self.vertices
    }

    /// Piecewise-linear hull value; `None` outside the sampled range.
    pub fn eval(&self, x: f64) -> Option<f64> {
        let v = &self.vertices;
        let (first, last) = (v.first()?, v.last()?);
        if x < first.0 || x > last.0 {
            return None;
        }
        let k = v.partition_point(|p| p.0 < x);
        if k == 0 {
            return Some(first.1);
        }
        let (a, b) = (v[k - 1], v[k]);
        if b.0 == x {
            return Some(b.1);
        }
        let w = (x - a.0) / (b.0 - a.0);
        Some(a.1 + w * (b.1 - a.1))
    }

    pub fn table(&self, grid: &[f64]) -> Vec<(f64, f64)> {
        grid.iter().filter_map(|&x| self.eval(x).map(|v| (x, v))).collect()
    }
}

#[inline]
fn cross(o: (f64, f64), a: (f64, f64), b: (f64, f64)) -> f64 {
    (a.0 - o.0) * (b.1 - o.1) - (a.1 - o.1) * (b.0 - o.0)
}

/// Monotone-chain lower hull. Collinear interior points are dropped.
pub fn lower_hull(points: &[(f64, f64)]) -> Hull1D {
    let mut pts = points.to_vec();
    pts.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)));
    pts.dedup_by(|b, a| a.0 == b.0);
    let mut hull: Vec<(f64, f64)> = Vec::with_capacity(pts.len());
    for p in pts {
        while hull.len() >= 2 && cross(hull[hull.len() - 2], hull[hull.len() - 1], p) <= 0.0 {
            hull.pop();
        }
        hull.push(p);
    }
    Hull1D { vertices: hull }
}

/// Sample `g` on `grid` and take the lower convex hull of the samples.
pub fn envelope_1d_oracle(model: &ExtensionModel, grid: &[f64]) -> Result<Hull1D> {
    if model.dataset().dim() != 1 {
        return Err(JetError::InvalidArgument("the hull oracle needs a one-dimensional model".into()));
    }
    let samples: Vec<(f64, f64)> = grid.iter().map(|&x| (x, model.g_value(&[x]).0)).collect();
    Ok(lower_hull(&samples))
}

/// `n + 1` evenly spaced points covering `[lo, hi]`.
pub fn uniform_grid(lo: f64, hi: f64, step: f64) -> Vec<f64> {
    let n = ((hi - lo) / step).round().max(1.0) as usize;
    (0..=n).map(|k| lo + (hi - lo) * k as f64 / n as f64).collect()
}

#[cfg(test)]
mod tests {
    use super::super::fixtures::*;
    use super::super::ExtensionConfig;
    use super::*;
    use crate::jet::fixtures::*;

    #[test]
    fn collinear_points_interpolate() {
        let h = lower_hull(&[(0.0, 0.0), (1.0, 1.0), (2.0, 2.0)]);
        assert_eq!(h.eval(1.0), Some(1.0));
        assert_eq!(h.eval(0.5), Some(0.5));
        assert_eq!(h.eval(2.5), None);
    }

    #[test]
    fn hull_skips_concave_bumps() {
        let h = lower_hull(&[(0.0, 0.0), (1.0, 5.0), (2.0, 0.0)]);
        assert_eq!(h.vertices(), &[(0.0, 0.0), (2.0, 0.0)]);
    }

    #[test]
    fn convex_g_reproduces_samples() {
        let m = model(&single(), 8, Some(parabola_box()), ExtensionConfig::default());
        let grid = uniform_grid(-3.0, 3.0, 0.01);
        let hull = envelope_1d_oracle(&m, &grid).unwrap();
        for &x in &grid {
            let g = m.g_eval(&[x]).unwrap().value;
            assert!((hull.eval(x).unwrap() - g).abs() < 1e-12);
        }
    }

    #[test]
    fn parabola_interpolates_data() {
        let m = model(&parabola(), 32, Some(parabola_box()), ExtensionConfig::default());
        let grid = uniform_grid(-3.0, 3.0, 1e-3);
        let hull = envelope_1d_oracle(&m, &grid).unwrap();
        for p in m.dataset().points() {
            assert!((hull.eval(p.x[0]).unwrap() - p.f).abs() < 1e-6);
        }
    }

    #[test]
    fn rejects_higher_dimension() {
        let m = model(&constant_gradient(), 0, None, ExtensionConfig::default());
        assert!(envelope_1d_oracle(&m, &[0.0]).is_err());
    }
}
