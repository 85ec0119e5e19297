use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::jet::{JetDataset, JetPoint};
use crate::linalg::dot;

/// One affine piece `<a, x> + c`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AffinePiece {
    pub a: Vec<f64>,
    pub c: f64,
}

impl AffinePiece {
    fn at(&self, x: &[f64]) -> f64 {
        dot(&self.a, x) + self.c
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum ReferenceKind {
    /// `1/2 x'Ax + <b, x> + c` with `A` symmetric positive semidefinite.
    QuadraticForm { a: Vec<Vec<f64>>, b: Vec<f64>, c: f64 },
    /// `log sum_k exp(<a_k, x> + c_k)`.
    LogSumExp { pieces: Vec<AffinePiece> },
    /// `sum_k mu * softplus((<a_k, x> + c_k) / mu)`.
    SoftplusMaxAffine { pieces: Vec<AffinePiece>, mu: f64 },
}

/// A smooth convex function with closed-form value and gradient, plus an
/// optional ridge `ridge/2 |x|^2`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReferenceConvexFunction {
    pub dim: usize,
    pub kind: ReferenceKind,
    pub ridge: f64,
}

fn softplus(z: f64) -> f64 {
    if z > 0.0 {
        z + (-z).exp().ln_1p()
    } else {
        z.exp().ln_1p()
    }
}

fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

impl ReferenceConvexFunction {
    /// `sum_k coeffs[k] x_k^2`.
    pub fn diagonal_quadratic(coeffs: Vec<f64>) -> Self {
        let d = coeffs.len();
        let a = (0..d)
            .map(|i| (0..d).map(|j| if i == j { 2.0 * coeffs[i] } else { 0.0 }).collect())
            .collect();
        Self {
            dim: d,
            kind: ReferenceKind::QuadraticForm { a, b: vec![0.0; d], c: 0.0 },
            ridge: 0.0,
        }
    }

    pub fn name(&self) -> &'static str {
        match self.kind {
            ReferenceKind::QuadraticForm { .. } => "quadratic-form",
            ReferenceKind::LogSumExp { .. } => "log-sum-exp",
            ReferenceKind::SoftplusMaxAffine { .. } => "softplus-max-affine",
        }
    }

    pub fn value(&self, x: &[f64]) -> f64 {
        let base = match &self.kind {
            ReferenceKind::QuadraticForm { a, b, c } => {
                let ax: Vec<f64> = a.iter().map(|row| dot(row, x)).collect();
                0.5 * dot(&ax, x) + dot(b, x) + c
            }
            ReferenceKind::LogSumExp { pieces } => {
                let z: Vec<f64> = pieces.iter().map(|p| p.at(x)).collect();
                let top = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                top + z.iter().map(|v| (v - top).exp()).sum::<f64>().ln()
            }
            ReferenceKind::SoftplusMaxAffine { pieces, mu } => {
                pieces.iter().map(|p| mu * softplus(p.at(x) / mu)).sum()
            }
        };
        base + 0.5 * self.ridge * dot(x, x)
    }

    pub fn gradient(&self, x: &[f64]) -> Vec<f64> {
        let mut g = match &self.kind {
            ReferenceKind::QuadraticForm { a, b, .. } => {
                a.iter().zip(b).map(|(row, bk)| dot(row, x) + bk).collect()
            }
            ReferenceKind::LogSumExp { pieces } => {
                let z: Vec<f64> = pieces.iter().map(|p| p.at(x)).collect();
                let top = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                let w: Vec<f64> = z.iter().map(|v| (v - top).exp()).collect();
                let total: f64 = w.iter().sum();
                let mut g = vec![0.0; self.dim];
                for (p, wk) in pieces.iter().zip(&w) {
                    for (gk, ak) in g.iter_mut().zip(&p.a) {
                        *gk += wk / total * ak;
                    }
                }
                g
            }
            ReferenceKind::SoftplusMaxAffine { pieces, mu } => {
                let mut g = vec![0.0; self.dim];
                for p in pieces {
                    let s = sigmoid(p.at(x) / mu);
                    for (gk, ak) in g.iter_mut().zip(&p.a) {
                        *gk += s * ak;
                    }
                }
                g
            }
        };
        for (gk, xk) in g.iter_mut().zip(x) {
            *gk += self.ridge * xk;
        }
        g
    }

    /// A random instance of a random kind. Coefficients are O(1) and a small
    /// ridge keeps sampled jets strictly convex.
    pub fn random<R: Rng>(dim: usize, rng: &mut R) -> Self {
        let ridge = rng.gen_range(0.05..0.2);
        let pieces = |rng: &mut R| -> Vec<AffinePiece> {
            let k = rng.gen_range(2..=4);
            (0..k)
                .map(|_| AffinePiece {
                    a: (0..dim).map(|_| rng.gen_range(-1.5..1.5)).collect(),
                    c: rng.gen_range(-0.5..0.5),
                })
                .collect()
        };
        let kind = match rng.gen_range(0..3) {
            0 => {
                let m: Vec<Vec<f64>> = (0..dim)
                    .map(|_| (0..dim).map(|_| rng.gen_range(-1.0..1.0)).collect())
                    .collect();
                let a = (0..dim)
                    .map(|i| (0..dim).map(|j| (0..dim).map(|k| m[k][i] * m[k][j]).sum()).collect())
                    .collect();
                ReferenceKind::QuadraticForm {
                    a,
                    b: (0..dim).map(|_| rng.gen_range(-1.0..1.0)).collect(),
                    c: rng.gen_range(-1.0..1.0),
                }
            }
            1 => ReferenceKind::LogSumExp { pieces: pieces(rng) },
            _ => ReferenceKind::SoftplusMaxAffine {
                pieces: pieces(rng),
                mu: rng.gen_range(0.2..0.5),
            },
        };
        Self { dim, kind, ridge }
    }
}

/// The jet of `reference` at `points`.
pub fn sample_jet(reference: &ReferenceConvexFunction, points: &[Vec<f64>]) -> Result<JetDataset> {
    let records = points
        .iter()
        .map(|x| JetPoint::new(x.clone(), reference.value(x), reference.gradient(x)))
        .collect();
    JetDataset::new(records, reference.dim)
}

/// A random reference function sampled at `n` uniform points of `[-1, 1]^dim`.
pub fn random_jet<R: Rng>(dim: usize, n: usize, rng: &mut R) -> Result<(ReferenceConvexFunction, JetDataset)> {
    let reference = ReferenceConvexFunction::random(dim, rng);
    let points: Vec<Vec<f64>> = (0..n)
        .map(|_| (0..dim).map(|_| rng.gen_range(-1.0..1.0)).collect())
        .collect();
    let ds = sample_jet(&reference, &points)?;
    Ok((reference, ds))
}
