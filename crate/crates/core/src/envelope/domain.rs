use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{JetError, Result};
use crate::jet::JetDataset;

/// Axis-aligned evaluation box.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DomainBox {
    lo: Vec<f64>,
    hi: Vec<f64>,
}

const PRIMES: [u32; 16] = [2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37, 41, 43, 47, 53];

impl DomainBox {
    pub fn new(lo: Vec<f64>, hi: Vec<f64>) -> Result<Self> {
        if lo.is_empty() || lo.len() != hi.len() {
            return Err(JetError::InvalidArgument("box bounds must have equal, nonzero length".into()));
        }
        if lo.iter().zip(&hi).any(|(l, h)| !(l.is_finite() && h.is_finite() && l < h)) {
            return Err(JetError::InvalidArgument("box needs finite bounds with lo < hi".into()));
        }
        Ok(Self { lo, hi })
    }

    /// Bounding box of the data with half-widths scaled by 1.5, at least 1.
    pub fn around(dataset: &JetDataset) -> Self {
        let d = dataset.dim();
        let mut lo = vec![f64::INFINITY; d];
        let mut hi = vec![f64::NEG_INFINITY; d];
        for p in dataset.points() {
            for k in 0..d {
                lo[k] = lo[k].min(p.x[k]);
                hi[k] = hi[k].max(p.x[k]);
            }
        }
        for k in 0..d {
            let c = 0.5 * (lo[k] + hi[k]);
            let h = (0.75 * (hi[k] - lo[k])).max(1.0);
            lo[k] = c - h;
            hi[k] = c + h;
        }
        Self { lo, hi }
    }

    pub fn dim(&self) -> usize {
        self.lo.len()
    }

    pub fn lo(&self) -> &[f64] {
        &self.lo
    }

    pub fn hi(&self) -> &[f64] {
        &self.hi
    }

    pub fn contains(&self, x: &[f64], tol: f64) -> bool {
        x.len() == self.dim()
            && x
                .iter()
                .zip(self.lo.iter().zip(&self.hi))
                .all(|(v, (l, h))| *v >= l - tol && *v <= h + tol)
    }

    pub fn project(&self, x: &mut [f64]) {
        for (v, (l, h)) in x.iter_mut().zip(self.lo.iter().zip(&self.hi)) {
            *v = v.clamp(*l, *h);
        }
    }

    pub fn diameter(&self) -> f64 {
        self.lo
            .iter()
            .zip(&self.hi)
            .map(|(l, h)| (h - l) * (h - l))
            .sum::<f64>()
            .sqrt()
    }

    /// All `2^d` corners, in binary counting order over the axes.
    pub fn corners(&self) -> Vec<Vec<f64>> {
        let d = self.dim();
        (0..1usize << d)
            .map(|mask| {
                (0..d)
                    .map(|k| if mask >> k & 1 == 1 { self.hi[k] } else { self.lo[k] })
                    .collect()
            })
            .collect()
    }

    pub fn sample<R: Rng>(&self, rng: &mut R) -> Vec<f64> {
        self.lo
            .iter()
            .zip(&self.hi)
            .map(|(l, h)| rng.gen_range(*l..*h))
            .collect()
    }

    /// `count` Halton points with a random Cranley-Patterson shift.
    pub fn halton<R: Rng>(&self, count: usize, rng: &mut R) -> Vec<Vec<f64>> {
        let d = self.dim();
        let shift: Vec<f64> = (0..d).map(|_| rng.gen::<f64>()).collect();
        (1..=count)
            .map(|i| {
                (0..d)
                    .map(|k| {
                        let base = if k < PRIMES.len() { PRIMES[k] } else { next_prime(k) };
                        let u = (radical_inverse(i as u64, base) + shift[k]).fract();
                        self.lo[k] + u * (self.hi[k] - self.lo[k])
                    })
                    .collect()
            })
            .collect()
    }
}

fn radical_inverse(mut i: u64, base: u32) -> f64 {
    let b = base as u64;
    let inv = 1.0 / base as f64;
    let mut f = inv;
    let mut r = 0.0;
    while i > 0 {
        r += f * (i % b) as f64;
        i /= b;
        f *= inv;
    }
    r
}

/// The `k`-th prime (0-based).
fn next_prime(k: usize) -> u32 {
    let mut found = 0;
    let mut n = 1u32;
    loop {
        n += 1;
        if (2..n).take_while(|p| p * p <= n).all(|p| !n.is_multiple_of(p)) {
            if found == k {
                return n;
            }
            found += 1;
        }
    }
}
