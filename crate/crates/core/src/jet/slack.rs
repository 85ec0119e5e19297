use serde::{Deserialize, Serialize};

use super::JetDataset;
use crate::linalg::dist;

/// Pairwise convexity slacks and gradient gaps of a jet.
///
/// `slack(i, j) = f_i - f_j - <G_j, y_i - y_j>` is the gap between the value
/// at `y_i` and the tangent plane at `y_j`; `gap(i, j) = |G_i - G_j|`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SlackMatrix {
    n: usize,
    slack: Vec<f64>,
    gap: Vec<f64>,
}

impl SlackMatrix {
    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    #[inline]
    pub fn slack(&self, i: usize, j: usize) -> f64 {
        self.slack[i * self.n + j]
    }

    #[inline]
    pub fn gap(&self, i: usize, j: usize) -> f64 {
        self.gap[i * self.n + j]
    }

    /// Ordered off-diagonal pairs `(i, j, slack(i,j), gap(i,j))`.
    pub fn pairs(&self) -> impl Iterator<Item = (usize, usize, f64, f64)> + '_ {
        (0..self.n).flat_map(move |i| {
            (0..self.n)
                .filter(move |&j| j != i)
                .map(move |j| (i, j, self.slack(i, j), self.gap(i, j)))
        })
    }
}

pub fn compute_slack(dataset: &JetDataset) -> SlackMatrix {
    let pts = dataset.points();
    let n = pts.len();
    let mut slack = vec![0.0; n * n];
    let mut gap = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..n {
            if i == j {
                continue;
            }
            slack[i * n + j] = pts[i].f - pts[j].tangent(&pts[i].x);
            if j > i {
                let b = dist(&pts[i].g, &pts[j].g);
                gap[i * n + j] = b;
                gap[j * n + i] = b;
            }
        }
    }
    SlackMatrix { n, slack, gap }
}
