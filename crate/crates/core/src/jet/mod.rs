//! Finite 1-jets: anchor points with prescribed values and gradients.

mod slack;
mod validate;

pub use slack::{compute_slack, SlackMatrix};
pub use validate::{validate, Tolerances, ValidationReport, ValidationStatus, Violation, ViolationKind};

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::error::{JetError, Result};
use crate::linalg::{dist, norm};

/// One jet record: a point `x`, the value `f` there and the gradient `g`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JetPoint {
    pub x: Vec<f64>,
    pub f: f64,
    pub g: Vec<f64>,
}

impl JetPoint {
    pub fn new(x: Vec<f64>, f: f64, g: Vec<f64>) -> Self {
        Self { x, f, g }
    }

    /// Value of the tangent plane at this point, evaluated at `z`.
    #[inline]
    pub fn tangent(&self, z: &[f64]) -> f64 {
        self.f
            + self
                .g
                .iter()
                .zip(z.iter().zip(&self.x))
                .map(|(g, (z, x))| g * (z - x))
                .sum::<f64>()
    }
}

/// A validated-shape finite jet with derived norms.
///
/// Construct through [`JetDataset::new`], which merges exact duplicates and
/// rejects malformed input.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JetDataset {
    dim: usize,
    points: Vec<JetPoint>,
    grad_sup_norm: f64,
    grad_diameter: f64,
    data_scale: f64,
}

impl JetDataset {
    pub fn new(records: Vec<JetPoint>, dim: usize) -> Result<Self> {
        if dim == 0 {
            return Err(JetError::ZeroDimension);
        }
        if records.is_empty() {
            return Err(JetError::Empty);
        }
        let mut points: Vec<JetPoint> = Vec::with_capacity(records.len());
        // input index of each kept point, for error reporting
        let mut origin: Vec<usize> = Vec::with_capacity(records.len());
        let mut seen: HashMap<Vec<u64>, usize> = HashMap::new();
        for (index, rec) in records.into_iter().enumerate() {
            for (field, v) in [("x", &rec.x), ("g", &rec.g)] {
                if v.len() != dim {
                    return Err(JetError::DimensionMismatch {
                        index,
                        field,
                        expected: dim,
                        found: v.len(),
                    });
                }
                if v.iter().any(|c| !c.is_finite()) {
                    return Err(JetError::NonFinite { index, field });
                }
            }
            if !rec.f.is_finite() {
                return Err(JetError::NonFinite { index, field: "f" });
            }
            // +0.0 normalises -0.0 so both hash alike
            let key: Vec<u64> = rec.x.iter().map(|c| (c + 0.0).to_bits()).collect();
            match seen.get(&key) {
                Some(&k) => {
                    let kept = &points[k];
                    if kept.f != rec.f || kept.g != rec.g {
                        return Err(JetError::ConflictingDuplicate {
                            first: origin[k],
                            second: index,
                        });
                    }
                }
                None => {
                    seen.insert(key, points.len());
                    origin.push(index);
                    points.push(rec);
                }
            }
        }

        let grad_sup_norm = points.iter().map(|p| norm(&p.g)).fold(0.0, f64::max);
        let mut grad_diameter: f64 = 0.0;
        let mut point_diameter: f64 = 0.0;
        for (i, p) in points.iter().enumerate() {
            for q in &points[i + 1..] {
                grad_diameter = grad_diameter.max(dist(&p.g, &q.g));
                point_diameter = point_diameter.max(dist(&p.x, &q.x));
            }
        }
        let max_f = points.iter().map(|p| p.f.abs()).fold(0.0, f64::max);
        let data_scale = 1f64.max(max_f).max(point_diameter).max(grad_sup_norm);
        Ok(Self {
            dim,
            points,
            grad_sup_norm,
            grad_diameter,
            data_scale,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn points(&self) -> &[JetPoint] {
        &self.points
    }

    pub fn point(&self, i: usize) -> Result<&JetPoint> {
        self.points.get(i).ok_or(JetError::IndexOutOfRange {
            index: i,
            len: self.points.len(),
        })
    }

    /// `max_i |G_i|`.
    pub fn grad_sup_norm(&self) -> f64 {
        self.grad_sup_norm
    }

    /// `max_{i,j} |G_i - G_j|`.
    pub fn grad_diameter(&self) -> f64 {
        self.grad_diameter
    }

    /// Reference magnitude used to make every tolerance relative.
    pub fn data_scale(&self) -> f64 {
        self.data_scale
    }

    /// Multiply every value and gradient by `lambda`.
    pub fn scaled(&self, lambda: f64) -> Result<Self> {
        let recs = self
            .points
            .iter()
            .map(|p| JetPoint::new(p.x.clone(), lambda * p.f, p.g.iter().map(|g| lambda * g).collect()))
            .collect();
        Self::new(recs, self.dim)
    }
}

/// Build a dataset from raw records. Alias of [`JetDataset::new`].
pub fn load_dataset(records: Vec<JetPoint>, dim: usize) -> Result<JetDataset> {
    JetDataset::new(records, dim)
}

#[cfg(test)]
pub(crate) mod fixtures {
    use super::*;

    /// f = x^2 sampled at -1, 0, 1.
    pub fn parabola() -> JetDataset {
        JetDataset::new(
            vec![
                JetPoint::new(vec![-1.0], 1.0, vec![-2.0]),
                JetPoint::new(vec![0.0], 0.0, vec![0.0]),
                JetPoint::new(vec![1.0], 1.0, vec![2.0]),
            ],
            1,
        )
        .unwrap()
    }

    pub fn constant_gradient() -> JetDataset {
        let a = [0.5, -1.0];
        let recs = [[0.0, 0.0], [1.0, 2.0], [-1.0, 0.5], [0.3, -0.7]]
            .iter()
            .map(|x| JetPoint::new(x.to_vec(), 2.0 + a[0] * x[0] + a[1] * x[1], a.to_vec()))
            .collect();
        JetDataset::new(recs, 2).unwrap()
    }

    pub fn single() -> JetDataset {
        JetDataset::new(vec![JetPoint::new(vec![0.0], 3.0, vec![2.0])], 1).unwrap()
    }
}

#[cfg(test)]
mod tests {
    use super::fixtures::*;
    use super::*;

    #[test]
    fn single_record() {
        let ds = single();
        assert_eq!(ds.len(), 1);
        assert_eq!(ds.grad_sup_norm(), 2.0);
        assert_eq!(ds.grad_diameter(), 0.0);
        assert_eq!(ds.data_scale(), 3.0);
    }

    #[test]
    fn identical_records_merge() {
        let r = JetPoint::new(vec![1.0, 2.0], 0.5, vec![0.0, 1.0]);
        let ds = JetDataset::new(vec![r.clone(), r], 2).unwrap();
        assert_eq!(ds.len(), 1);
    }

    #[test]
    fn signed_zero_counts_as_duplicate() {
        let a = JetPoint::new(vec![0.0], 0.0, vec![1.0]);
        let b = JetPoint::new(vec![-0.0], 0.0, vec![1.0]);
        assert_eq!(JetDataset::new(vec![a, b], 1).unwrap().len(), 1);
    }

    #[test]
    fn parabola_norms() {
        let ds = parabola();
        assert_eq!(ds.len(), 3);
        assert_eq!(ds.grad_sup_norm(), 2.0);
        assert_eq!(ds.grad_diameter(), 4.0);
        assert!(ds.grad_diameter() <= 2.0 * ds.grad_sup_norm());
    }

    #[test]
    fn conflicting_duplicate_reports_both_indices() {
        let recs = vec![
            JetPoint::new(vec![0.0], 0.0, vec![1.0]),
            JetPoint::new(vec![5.0], 0.0, vec![1.0]),
            JetPoint::new(vec![0.0], 0.0, vec![2.0]),
        ];
        assert_eq!(
            JetDataset::new(recs, 1),
            Err(JetError::ConflictingDuplicate { first: 0, second: 2 })
        );
    }

    #[test]
    fn dimension_mismatch() {
        let recs = vec![JetPoint::new(vec![0.0, 1.0], 0.0, vec![1.0])];
        assert!(matches!(
            JetDataset::new(recs, 2),
            Err(JetError::DimensionMismatch { index: 0, field: "g", .. })
        ));
    }

    #[test]
    fn non_finite_rejected() {
        let recs = vec![JetPoint::new(vec![f64::NAN], 0.0, vec![1.0])];
        assert!(matches!(JetDataset::new(recs, 1), Err(JetError::NonFinite { field: "x", .. })));
        let recs = vec![JetPoint::new(vec![0.0], f64::INFINITY, vec![1.0])];
        assert!(matches!(JetDataset::new(recs, 1), Err(JetError::NonFinite { field: "f", .. })));
    }

    #[test]
    fn empty_rejected() {
        assert_eq!(JetDataset::new(vec![], 1), Err(JetError::Empty));
    }
}
