//! Gradient modulus of a finite jet.
//!
//! For finite data the growth modulus `omega0(t) = sup psi_y(x)/|x-y|` reduces
//! to a maximum of per-pair profiles `(b - P/t)+`. Each profile has the
//! closed-form concave envelope `min(b^2/(4P) t, b - P/t)` and the concave
//! conjugate `min(0, 2 sqrt(P s) - b)`, so the envelope of the maximum is
//!
//! ```text
//! E(t) = inf_{s >= 0} [ s t + max_k (b_k - 2 sqrt(P_k s))+ ]
//! ```
//!
//! Every `s` yields an affine majorant `u -> s u + c(s)` of `E`; the model
//! keeps the minimum of a family of such lines, which is concave,
//! nondecreasing, zero at the origin and bounded by the gradient diameter.

use serde::{Deserialize, Serialize};

use crate::envelope::psi;
use crate::error::{JetError, Result};
use crate::jet::{JetDataset, SlackMatrix, Tolerances};
use crate::linalg::{norm, sub};

/// Slacks at or below this (relative to data scale) are clamped before use.
pub const SLACK_FLOOR: f64 = 1e-12;

const BISECTION_STEPS: usize = 60;

/// Default number of tangent nodes used by [`build_modulus`].
pub const DEFAULT_NODES: usize = 32;

/// One pair's contribution `(b - P/t)+` to the growth modulus.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PairPiece {
    pub slack: f64,
    pub gap: f64,
}

impl PairPiece {
    pub fn knee(&self) -> f64 {
        2.0 * self.slack / self.gap
    }

    pub fn initial_slope(&self) -> f64 {
        self.gap * self.gap / (4.0 * self.slack)
    }

    pub fn value(&self, t: f64) -> f64 {
        (self.gap - self.slack / t).max(0.0)
    }

    /// Concave envelope of [`PairPiece::value`] on `[0, inf)`.
    pub fn envelope(&self, t: f64) -> f64 {
        if self.gap == 0.0 {
            return 0.0;
        }
        if t <= self.knee() {
            self.initial_slope() * t
        } else {
            self.gap - self.slack / t
        }
    }

    /// `(b - 2 sqrt(P s))+`, the negated concave conjugate.
    #[inline]
    fn dual_term(&self, s: f64) -> f64 {
        (self.gap - 2.0 * (self.slack * s).sqrt()).max(0.0)
    }
}

/// `omega0(t)` for finite data: the maximum over ordered pairs of
/// `(b(i,j) - P(i,j)/t)+`.
pub fn omega0_closed(slack: &SlackMatrix, t: f64) -> Result<f64> {
    if t.is_nan() || t <= 0.0 {
        return Err(JetError::InvalidArgument(format!("t must be positive, got {t}")));
    }
    Ok(slack
        .pairs()
        .filter(|&(_, _, _, b)| b > 0.0)
        .map(|(_, _, p, b)| (b - p / t).max(0.0))
        .fold(0.0, f64::max))
}

/// Definitional evaluation of `omega0(t)` by sampling, for tests.
///
/// Around each data point the ratio `psi_i(x)/|x - y_i|` is sampled along
/// the gradient-difference directions plus a fixed set of pseudo-random unit
/// directions, at radii spaced `grid_step` apart in the band
/// `[t - search_radius, t]`. Returns a lower bound of the supremum.
pub fn omega0_oracle(dataset: &JetDataset, t: f64, grid_step: f64, search_radius: f64) -> f64 {
    use rand::{Rng, SeedableRng};
    let d = dataset.dim();
    let pts = dataset.points();
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(0x6f6d_6567_6130);
    let mut random_dirs: Vec<Vec<f64>> = Vec::new();
    while random_dirs.len() < 8 {
        let v: Vec<f64> = (0..d).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let n = norm(&v);
        if n > 1e-3 {
            random_dirs.push(v.iter().map(|c| c / n).collect());
        }
    }
    let r_lo = (t - search_radius).max(grid_step).min(t);
    let steps = ((t - r_lo) / grid_step).floor() as usize;

    let mut best: f64 = 0.0;
    for (i, yi) in pts.iter().enumerate() {
        let mut dirs = random_dirs.clone();
        for yj in pts {
            let v = sub(&yj.g, &yi.g);
            let n = norm(&v);
            if n > 0.0 {
                dirs.push(v.iter().map(|c| c / n).collect());
            }
        }
        for v in &dirs {
            for k in 0..=steps + 1 {
                let r = if k > steps { t } else { r_lo + k as f64 * grid_step };
                if r <= 0.0 || r > t {
                    continue;
                }
                let x: Vec<f64> = yi.x.iter().zip(v).map(|(y, v)| y + r * v).collect();
                let ratio = psi(dataset, i, &x).expect("index in range") / r;
                best = best.max(ratio);
            }
        }
    }
    best
}

/// The pair profiles that feed the concave envelope.
///
/// Pairs with zero gradient gap are dropped. Slacks are clamped below at
/// `SLACK_FLOOR * data_scale` so that forced (unvalidated) data still yields
/// finite slopes. Dominated pieces (another piece has a larger gap and a
/// smaller slack) are removed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GapProfile {
    pieces: Vec<PairPiece>,
    s0: f64,
    b_star: f64,
    degenerate: bool,
}

impl GapProfile {
    pub fn from_slack(slack: &SlackMatrix, data_scale: f64, tol: &Tolerances) -> Self {
        let floor = SLACK_FLOOR * data_scale;
        let mut b_star: f64 = 0.0;
        let mut degenerate = true;
        let mut raw: Vec<PairPiece> = Vec::new();
        for (_, _, p, b) in slack.pairs() {
            b_star = b_star.max(b);
            if b > tol.eps_g * data_scale {
                degenerate = false;
            }
            if b > 0.0 {
                raw.push(PairPiece {
                    slack: p.max(floor),
                    gap: b,
                });
            }
        }
        if degenerate {
            raw.clear();
        }
        // Pareto filter: larger gap first, then smaller slack.
        raw.sort_by(|a, b| b.gap.total_cmp(&a.gap).then(a.slack.total_cmp(&b.slack)));
        let mut pieces: Vec<PairPiece> = Vec::new();
        let mut min_slack = f64::INFINITY;
        for piece in raw {
            if piece.slack < min_slack {
                min_slack = piece.slack;
                pieces.push(piece);
            }
        }
        let s0 = pieces.iter().map(PairPiece::initial_slope).fold(0.0, f64::max);
        Self {
            pieces,
            s0,
            b_star,
            degenerate,
        }
    }

    pub fn pieces(&self) -> &[PairPiece] {
        &self.pieces
    }

    /// Largest initial slope `max b^2/(4P)`; 0 when degenerate.
    pub fn s0(&self) -> f64 {
        self.s0
    }

    pub fn b_star(&self) -> f64 {
        self.b_star
    }

    pub fn is_degenerate(&self) -> bool {
        self.degenerate
    }

    fn knees(&self) -> impl Iterator<Item = f64> + '_ {
        self.pieces.iter().map(PairPiece::knee)
    }

    /// Default tangent range: eight times the largest knee, or 1.
    pub fn default_t_max(&self) -> f64 {
        let k = self.knees().fold(0.0, f64::max);
        if k > 0.0 {
            8.0 * k
        } else {
            1.0
        }
    }

    /// Intercept of the majorant line with slope `s`.
    pub fn intercept(&self, s: f64) -> f64 {
        self.pieces.iter().map(|p| p.dual_term(s)).fold(0.0, f64::max)
    }

    /// The exact concave envelope `E(t)` and a supergradient of `E` at `t`.
    pub fn envelope(&self, t: f64) -> Result<(f64, f64)> {
        if !t.is_finite() || t < 0.0 {
            return Err(JetError::InvalidArgument(format!("t must be finite and >= 0, got {t}")));
        }
        if self.pieces.is_empty() {
            return Ok((0.0, 0.0));
        }
        let objective = |s: f64| s * t + self.intercept(s);
        // right derivative of the dual objective
        let slope_of = |s: f64| {
            let mut best = 0.0;
            let mut deriv = 0.0;
            for p in &self.pieces {
                let v = p.dual_term(s);
                if v > best {
                    best = v;
                    deriv = -(p.slack / s).sqrt();
                }
            }
            t + deriv
        };
        let (mut lo, mut hi) = (0.0, self.s0);
        for _ in 0..BISECTION_STEPS {
            let mid = 0.5 * (lo + hi);
            if slope_of(mid) >= 0.0 {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        let (s, v) = [lo, 0.5 * (lo + hi), hi]
            .into_iter()
            .map(|s| (s, objective(s)))
            .min_by(|a, b| a.1.total_cmp(&b.1))
            .unwrap();
        Ok((v, s))
    }

    /// `max_k env_k(t)`: a lower bound of `E(t)` built from per-pair envelopes.
    pub fn pairwise_envelope_max(&self, t: f64) -> f64 {
        self.pieces.iter().map(|p| p.envelope(t)).fold(0.0, f64::max)
    }
}

/// An affine function `slope * t + intercept`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Line {
    pub slope: f64,
    pub intercept: f64,
}

impl Line {
    #[inline]
    pub fn at(&self, t: f64) -> f64 {
        self.slope * t + self.intercept
    }
}

/// `phi(t) = value + omega * (t - start) + half_slope * (t - start)^2` on
/// one segment of the modulus.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhiSegment {
    pub start: f64,
    pub value: f64,
    pub omega: f64,
    pub half_slope: f64,
}

/// Concave piecewise-linear modulus and its integral.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModulusModel {
    /// Active lines, slopes strictly decreasing.
    pub lines: Vec<Line>,
    /// `breakpoints[k]` separates `lines[k]` and `lines[k+1]`.
    pub breakpoints: Vec<f64>,
    pub phi: Vec<PhiSegment>,
    pub b_star: f64,
    pub s0: f64,
    pub t_max: f64,
    pub degenerate: bool,
}

impl ModulusModel {
    fn segment(&self, t: f64) -> usize {
        self.breakpoints.partition_point(|&b| b <= t)
    }

    pub fn omega_hat(&self, t: f64) -> Result<f64> {
        check_t(t)?;
        Ok(self.omega_hat_unchecked(t))
    }

    pub fn phi_hat(&self, t: f64) -> Result<f64> {
        check_t(t)?;
        Ok(self.phi_hat_unchecked(t))
    }

    /// Smallest `t` with `omega_hat(t) >= v`, or `None` when `v` exceeds
    /// the supremum.
    pub fn omega_inverse(&self, v: f64) -> Option<f64> {
        if v <= 0.0 {
            return Some(0.0);
        }
        for (k, line) in self.lines.iter().enumerate() {
            let start = if k == 0 { 0.0 } else { self.breakpoints[k - 1] };
            let end = self.breakpoints.get(k).copied().unwrap_or(f64::INFINITY);
            if line.slope > 0.0 {
                let t = (v - line.intercept) / line.slope;
                if t <= end {
                    return Some(t.max(start));
                }
            } else if line.at(start) >= v {
                return Some(start);
            }
        }
        None
    }

    #[inline]
    pub(crate) fn omega_hat_unchecked(&self, t: f64) -> f64 {
        if self.lines.is_empty() {
            return 0.0;
        }
        self.lines[self.segment(t)].at(t)
    }

    #[inline]
    pub(crate) fn phi_hat_unchecked(&self, t: f64) -> f64 {
        if self.phi.is_empty() {
            return 0.0;
        }
        let seg = &self.phi[self.segment(t)];
        let tau = t - seg.start;
        seg.value + tau * (seg.omega + seg.half_slope * tau)
    }
}

fn check_t(t: f64) -> Result<()> {
    if t >= 0.0 && t.is_finite() {
        Ok(())
    } else {
        Err(JetError::InvalidArgument(format!("t must be finite and >= 0, got {t}")))
    }
}

/// Log-spaced tangent nodes in `[min_knee/8, t_max]`.
pub fn tangent_nodes(profile: &GapProfile, nodes: usize, t_max: f64) -> Vec<f64> {
    if nodes == 0 {
        return Vec::new();
    }
    let min_knee = profile.knees().fold(f64::INFINITY, f64::min);
    let lo = if min_knee.is_finite() { min_knee / 8.0 } else { t_max };
    let lo = lo.min(t_max);
    if nodes == 1 || lo >= t_max {
        return vec![t_max];
    }
    let ratio = (t_max / lo).ln();
    (0..nodes)
        .map(|k| {
            if k + 1 == nodes {
                t_max
            } else {
                lo * (ratio * k as f64 / (nodes - 1) as f64).exp()
            }
        })
        .collect()
}

/// Build the tangent-line hull `omega_hat` of the envelope and integrate it.
///
/// `t_max = None` picks [`GapProfile::default_t_max`].
pub fn build_modulus(profile: &GapProfile, nodes: usize, t_max: Option<f64>) -> Result<ModulusModel> {
    let t_max = t_max.unwrap_or_else(|| profile.default_t_max());
    if !t_max.is_finite() || t_max <= 0.0 {
        return Err(JetError::InvalidArgument(format!("t_max must be positive, got {t_max}")));
    }
    if profile.is_degenerate() || profile.pieces().is_empty() {
        return Ok(ModulusModel {
            lines: Vec::new(),
            breakpoints: Vec::new(),
            phi: Vec::new(),
            b_star: profile.b_star(),
            s0: 0.0,
            t_max,
            degenerate: profile.is_degenerate(),
        });
    }
    let s0 = profile.s0();
    let mut lines = vec![
        Line {
            slope: s0,
            intercept: 0.0,
        },
        Line {
            slope: 0.0,
            intercept: profile.b_star(),
        },
    ];
    for t in tangent_nodes(profile, nodes, t_max) {
        let (_, s) = profile.envelope(t)?;
        lines.push(Line {
            slope: s,
            intercept: profile.intercept(s),
        });
    }
    let lines = lower_hull(lines);
    let breakpoints: Vec<f64> = lines.windows(2).map(|w| crossing(&w[0], &w[1])).collect();
    let mut phi = Vec::with_capacity(lines.len());
    let mut start = 0.0;
    let mut value = 0.0;
    for (k, line) in lines.iter().enumerate() {
        let omega = line.at(start);
        phi.push(PhiSegment {
            start,
            value,
            omega,
            half_slope: 0.5 * line.slope,
        });
        if let Some(&end) = breakpoints.get(k) {
            let tau = end - start;
            value += tau * (omega + 0.5 * line.slope * tau);
            start = end;
        }
    }
    Ok(ModulusModel {
        lines,
        breakpoints,
        phi,
        b_star: profile.b_star(),
        s0,
        t_max,
        degenerate: false,
    })
}

fn crossing(steeper: &Line, flatter: &Line) -> f64 {
    (flatter.intercept - steeper.intercept) / (steeper.slope - flatter.slope)
}

/// Lines of `min_k line_k` that are active somewhere on `[0, inf)`, ordered
/// by decreasing slope.
fn lower_hull(mut lines: Vec<Line>) -> Vec<Line> {
    lines.sort_by(|a, b| b.slope.total_cmp(&a.slope).then(a.intercept.total_cmp(&b.intercept)));
    lines.dedup_by(|b, a| a.slope == b.slope);
    let mut hull: Vec<Line> = Vec::with_capacity(lines.len());
    for line in lines {
        while let Some(last) = hull.last() {
            // a line starting at or above the current minimum at t=0 with a
            // smaller slope only matters after a crossing
            if hull.len() >= 2 {
                let prev = &hull[hull.len() - 2];
                if crossing(prev, &line) <= crossing(prev, last) {
                    hull.pop();
                    continue;
                }
            } else if line.intercept <= last.intercept {
                // flatter and not higher at the origin: dominates on [0, inf)
                hull.pop();
                continue;
            }
            break;
        }
        hull.push(line);
    }
    while hull.len() >= 2 && crossing(&hull[0], &hull[1]) <= 0.0 {
        hull.remove(0);
    }
    hull
}
