//! Restricted convex envelope evaluation.
//!
//! `upper(x) = min { sum_j l_j g(s_j) : sum_j l_j s_j = x, sum_j l_j = 1, l >= 0 }`
//! over the candidate columns `s_j`. The LP is centred at the query
//! (columns `s_j - x`, costs shifted by `m(x)`) so that its tolerances act on
//! local differences.

use serde::{Deserialize, Serialize};

use super::{EvalMode, ExtensionModel};
use crate::error::{JetError, Result};
use crate::linalg::{dist, dot, norm, sub};
use crate::lp::{solve_lp, LpProblem, LpStatus};

/// LP tolerance used by gradient evaluation.
const GRADIENT_LP_TOL: f64 = 1e-13;
/// Stencil radius for gradient evaluation, relative to data scale.
const STENCIL_STEP: f64 = 1e-6;
/// Finite-difference step for the fallback gradient, relative to data scale.
pub const FD_STEP: f64 = 1e-5;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AffineMinorant {
    pub p: Vec<f64>,
    pub q: f64,
}

impl AffineMinorant {
    pub fn at(&self, z: &[f64]) -> f64 {
        dot(&self.p, z) + self.q
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SupportPoint {
    /// Index into the shared candidates; indices past the end refer to
    /// per-query columns.
    pub index: usize,
    pub point: Vec<f64>,
    pub weight: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EvalStatus {
    Ok,
    OutsideDomain,
    DegenerateAffine,
    NumericFailure,
}

impl EvalStatus {
    pub fn as_str(&self) -> &'static str {
        match self {
            EvalStatus::Ok => "ok",
            EvalStatus::OutsideDomain => "outside-domain",
            EvalStatus::DegenerateAffine => "degenerate-affine",
            EvalStatus::NumericFailure => "numeric-failure",
        }
    }

    pub fn has_values(&self) -> bool {
        matches!(self, EvalStatus::Ok | EvalStatus::DegenerateAffine)
    }
}

/// One envelope query. Values are NaN unless [`EvalStatus::has_values`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnvelopeResult {
    pub upper: f64,
    pub lower: f64,
    pub support: Vec<SupportPoint>,
    pub dual: Option<AffineMinorant>,
    pub gradient: Vec<f64>,
    pub status: EvalStatus,
    pub mode: EvalMode,
    /// Columns generated beyond the shared set (refined mode).
    pub columns_added: usize,
    /// Refined mode certified that no box point has a reduced cost below
    /// `-lp_tol * dataScale`.
    pub dual_verified: bool,
}

impl EnvelopeResult {
    fn empty(status: EvalStatus, mode: EvalMode, d: usize) -> Self {
        Self {
            upper: f64::NAN,
            lower: f64::NAN,
            support: Vec::new(),
            dual: None,
            gradient: vec![f64::NAN; d],
            status,
            mode,
            columns_added: 0,
            dual_verified: false,
        }
    }
}

struct Pricing {
    columns: Vec<Vec<f64>>,
    /// Certified lower bound of `g - l` over the box.
    lower_bound: f64,
}

struct Solved {
    upper: f64,
    lambda: Vec<f64>,
    dual: AffineMinorant,
}

impl ExtensionModel {
    /// Evaluate in the model's configured mode.
    pub fn evaluate(&self, x: &[f64]) -> Result<EnvelopeResult> {
        self.evaluate_with(x, self.config.mode)
    }

    pub fn evaluate_with(&self, x: &[f64], mode: EvalMode) -> Result<EnvelopeResult> {
        self.evaluate_inner(x, mode, &[], self.config.lp_tol)
    }

    /// `upper` and `lower` only, as a pair. NaN outside the domain.
    pub fn bracket(&self, x: &[f64], mode: EvalMode) -> Result<(f64, f64)> {
        let r = self.evaluate_with(x, mode)?;
        Ok((r.lower, r.upper))
    }

    fn evaluate_inner(&self, x: &[f64], mode: EvalMode, extra: &[Vec<f64>], lp_tol: f64) -> Result<EnvelopeResult> {
        self.check_dim(x)?;
        let d = self.dataset.dim();
        let scale = self.data_scale();
        if !self.domain_box.contains(x, 1e-12 * scale) {
            return Ok(EnvelopeResult::empty(EvalStatus::OutsideDomain, mode, d));
        }
        if self.is_degenerate() {
            let p0 = &self.dataset.points()[0];
            let v = p0.tangent(x);
            return Ok(EnvelopeResult {
                upper: v,
                lower: v,
                support: vec![SupportPoint {
                    index: 0,
                    point: p0.x.clone(),
                    weight: 1.0,
                }],
                dual: Some(AffineMinorant {
                    p: p0.g.clone(),
                    q: p0.f - dot(&p0.g, &p0.x),
                }),
                gradient: p0.g.clone(),
                status: EvalStatus::DegenerateAffine,
                mode,
                columns_added: 0,
                dual_verified: true,
            });
        }
        let m_x = self.minimal_extension(x);
        let shared = match self.solve_restricted(&self.candidates, &self.g_values, x, m_x, lp_tol) {
            Ok(s) => s,
            Err(LpStatus::Infeasible) => return Ok(EnvelopeResult::empty(EvalStatus::OutsideDomain, mode, d)),
            Err(_) => return Ok(EnvelopeResult::empty(EvalStatus::NumericFailure, mode, d)),
        };
        match mode {
            EvalMode::Shared => {
                let support = self.support(&shared.lambda, &self.candidates);
                Ok(EnvelopeResult {
                    upper: shared.upper,
                    lower: m_x.min(shared.upper),
                    support,
                    gradient: shared.dual.p.clone(),
                    dual: Some(shared.dual),
                    status: EvalStatus::Ok,
                    mode,
                    columns_added: 0,
                    dual_verified: false,
                })
            }
            EvalMode::Refined => Ok(self.refine(x, m_x, shared, extra, lp_tol)),
        }
    }

    fn solve_restricted(
        &self,
        points: &[Vec<f64>],
        values: &[f64],
        x: &[f64],
        shift: f64,
        lp_tol: f64,
    ) -> std::result::Result<Solved, LpStatus> {
        let centred: Vec<Vec<f64>> = points
            .iter()
            .map(|s| s.iter().zip(x).map(|(a, b)| a - b).collect())
            .collect();
        let cost: Vec<f64> = values.iter().map(|v| v - shift).collect();
        let zero = vec![0.0; x.len()];
        let sol = solve_lp(&LpProblem::convex_combination(&centred, cost, &zero, lp_tol));
        if sol.status != LpStatus::Optimal {
            return Err(sol.status);
        }
        let d = x.len();
        let p = sol.dual[..d].to_vec();
        let q = sol.dual[d] + shift - dot(&p, x);
        let upper = sol.lambda.iter().zip(values).map(|(l, v)| l * v).sum();
        Ok(Solved {
            upper,
            lambda: sol.lambda,
            dual: AffineMinorant { p, q },
        })
    }

    fn support(&self, lambda: &[f64], points: &[Vec<f64>]) -> Vec<SupportPoint> {
        lambda
            .iter()
            .enumerate()
            .filter(|&(_, &w)| w > 0.0)
            .map(|(index, &weight)| SupportPoint {
                index,
                point: points[index].clone(),
                weight,
            })
            .collect()
    }

    /// Column generation seeded with the query itself and any `extra`
    /// columns. Never returns a larger upper value than `shared`.
    ///
    /// Each round prices the dual exactly (see [`Self::price`]) and adds up
    /// to `d+1` of the most negative pieces' minimizers. The certified bound
    /// `min_box (g - l) >= lb` gives `lower = max(m(x), l(x) + min(lb, 0))`.
    fn refine(&self, x: &[f64], m_x: f64, shared: Solved, extra: &[Vec<f64>], lp_tol: f64) -> EnvelopeResult {
        let scale = self.data_scale();
        let d = x.len();
        let mut points = self.candidates.clone();
        let mut values = self.g_values.clone();
        for z in std::iter::once(x).chain(extra.iter().map(Vec::as_slice)) {
            points.push(z.to_vec());
            values.push(self.g_value(z).0);
        }
        let threshold = -self.config.lp_tol * scale;
        let mut added = 0;
        let mut verified = false;
        let mut best: Option<(Solved, f64)> = None;
        while let Ok(solved) = self.solve_restricted(&points, &values, x, m_x, lp_tol) {
            if solved.upper - m_x <= -threshold {
                // bracket already closed by the minimal extension
                best = Some((solved, f64::NEG_INFINITY));
                break;
            }
            let pricing = self.price(&solved.dual, threshold, d + 1);
            best = Some((solved, pricing.lower_bound));
            if pricing.lower_bound >= threshold {
                verified = true;
                break;
            }
            if added >= self.config.max_columns || pricing.columns.is_empty() {
                break;
            }
            for z in pricing.columns {
                values.push(self.g_value(&z).0);
                points.push(z);
                added += 1;
            }
        }

        // the refined program contains every shared column, so it loses only
        // to roundoff; keep its dual, which sees the extra columns, and report
        // the smaller of the two valid upper values
        let shared_upper = shared.upper;
        let (chosen, pts, bound) = match best {
            Some((s, lb)) => (s, &points, lb),
            None => (shared, &self.candidates, f64::NEG_INFINITY),
        };
        let upper = chosen.upper.min(shared_upper);
        let lower = m_x.max(chosen.dual.at(x) + bound.min(0.0)).min(upper);
        EnvelopeResult {
            upper,
            lower,
            support: self.support(&chosen.lambda, pts),
            gradient: chosen.dual.p.clone(),
            dual: Some(chosen.dual),
            status: EvalStatus::Ok,
            mode: EvalMode::Refined,
            columns_added: added,
            dual_verified: verified,
        }
    }

    /// Prices `g - l` over the box.
    ///
    /// `g` is the minimum of the convex bumps `f_i + <G_i, z - y_i> +
    /// 2 phi(|z - y_i|)`, so the minimum of `g - l` is the smallest of `N`
    /// convex minimizations. Each one is solved in closed form when its
    /// radial minimizer lies in the box and by projected accelerated
    /// gradient otherwise; the Frank-Wolfe gap of the iterates gives a
    /// certified lower bound. Returns up to `keep` distinct minimizers with
    /// reduced cost below `threshold`, most negative first.
    fn price(&self, dual: &AffineMinorant, threshold: f64, keep: usize) -> Pricing {
        let dbox = &self.domain_box;
        let modulus = &self.modulus;
        let lip = (2.0 * modulus.s0).max(f64::MIN_POSITIVE);
        let mut lower_bound = f64::INFINITY;
        let mut found: Vec<(Vec<f64>, f64)> = Vec::new();
        for p in self.dataset.points() {
            let a: Vec<f64> = p.g.iter().zip(&dual.p).map(|(g, q)| g - q).collect();
            let c = p.f - dual.at(&p.x);
            let piece = |z: &[f64]| c + dot(&a, &sub(z, &p.x)) + 2.0 * modulus.phi_hat_unchecked(dist(z, &p.x));
            let grad = |z: &[f64]| -> Vec<f64> {
                let w = sub(z, &p.x);
                let r = norm(&w);
                let k = if r > 0.0 { 2.0 * modulus.omega_hat_unchecked(r) / r } else { 0.0 };
                a.iter().zip(&w).map(|(ai, wi)| ai + k * wi).collect()
            };
            let an = norm(&a);
            let radial = if an == 0.0 {
                Some(p.x.clone())
            } else {
                modulus
                    .omega_inverse(0.5 * an)
                    .map(|r| p.x.iter().zip(&a).map(|(y, ai)| y - r * ai / an).collect::<Vec<f64>>())
            };
            let (z, value, lb) = match radial {
                Some(z) if dbox.contains(&z, 0.0) => {
                    let v = piece(&z);
                    (z, v, v)
                }
                other => {
                    let mut start = other.unwrap_or_else(|| {
                        let far = dbox.diameter() + dist(&p.x, dbox.lo());
                        p.x.iter().zip(&a).map(|(y, ai)| y - far * ai / an).collect()
                    });
                    dbox.project(&mut start);
                    self.projected_descent(start, &piece, &grad, lip, threshold)
                }
            };
            lower_bound = lower_bound.min(lb);
            if value < threshold {
                let rc = self.reduced_cost(&z, dual);
                if rc < threshold {
                    found.push((z, rc));
                }
            }
        }
        found.sort_by(|a, b| a.1.total_cmp(&b.1));
        let min_sep = 1e-12 * self.data_scale().max(dbox.diameter());
        let mut columns: Vec<Vec<f64>> = Vec::new();
        for (z, _) in found {
            if columns.len() == keep {
                break;
            }
            if columns.iter().all(|c| dist(c, &z) > min_sep) {
                columns.push(z);
            }
        }
        Pricing { columns, lower_bound }
    }

    /// FISTA over the box for a convex `h` with `lip`-Lipschitz gradient.
    /// Returns the best iterate, its value and the best Frank-Wolfe lower
    /// bound seen. Stops once the bound clears `threshold`, or once a value
    /// below it is known to within 10%.
    fn projected_descent(
        &self,
        start: Vec<f64>,
        h: &dyn Fn(&[f64]) -> f64,
        grad: &dyn Fn(&[f64]) -> Vec<f64>,
        lip: f64,
        threshold: f64,
    ) -> (Vec<f64>, f64, f64) {
        let dbox = &self.domain_box;
        let fw_bound = |z: &[f64], hz: f64, gz: &[f64]| -> f64 {
            let gap: f64 = gz
                .iter()
                .zip(z)
                .zip(dbox.lo().iter().zip(dbox.hi()))
                .map(|((g, zk), (lo, hi))| if *g > 0.0 { g * (zk - lo) } else { g * (zk - hi) })
                .sum();
            hz - gap
        };
        let mut best_z = start.clone();
        let mut best_v = h(&start);
        let mut lb = fw_bound(&start, best_v, &grad(&start));
        let mut z = start.clone();
        let mut y = start;
        let mut theta = 1.0f64;
        for _ in 0..self.config.pricing_iters {
            if lb >= threshold || (best_v < threshold && best_v - lb <= 0.1 * best_v.abs()) {
                break;
            }
            let gy = grad(&y);
            let mut next: Vec<f64> = y.iter().zip(&gy).map(|(v, g)| v - g / lip).collect();
            dbox.project(&mut next);
            let theta_next = 0.5 * (1.0 + (1.0 + 4.0 * theta * theta).sqrt());
            let beta = (theta - 1.0) / theta_next;
            y = next.iter().zip(&z).map(|(n, o)| n + beta * (n - o)).collect();
            dbox.project(&mut y);
            theta = theta_next;
            let v = h(&next);
            lb = lb.max(fw_bound(&next, v, &grad(&next)));
            if v < best_v {
                best_v = v;
                best_z = next.clone();
            }
            z = next;
        }
        (best_z, best_v, lb.min(best_v))
    }

    /// Gradient of the extension at `x`, read off the dual of a refined
    /// solve whose columns include a small coordinate stencil around `x`.
    /// Falls back to central differences of the refined upper value when the
    /// LP does not produce a finite dual.
    pub fn gradient(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.check_dim(x)?;
        let scale = self.data_scale();
        if !self.domain_box.contains(x, 1e-12 * scale) {
            return Err(JetError::InvalidArgument("query outside the domain box".into()));
        }
        if self.is_degenerate() {
            return Ok(self.dataset.points()[0].g.clone());
        }
        let delta = STENCIL_STEP * scale / self.modulus.s0.max(1.0);
        let mut stencil = Vec::with_capacity(2 * x.len());
        for k in 0..x.len() {
            for sign in [1.0, -1.0] {
                let mut z = x.to_vec();
                z[k] += sign * delta;
                self.domain_box.project(&mut z);
                if z[k] != x[k] {
                    stencil.push(z);
                }
            }
        }
        let r = self.evaluate_inner(x, EvalMode::Refined, &stencil, GRADIENT_LP_TOL)?;
        if r.status == EvalStatus::Ok && r.gradient.iter().all(|v| v.is_finite()) {
            return Ok(r.gradient);
        }
        self.finite_difference_gradient(x, FD_STEP * scale, EvalMode::Refined)
    }

    /// Central differences of `upper`, one-sided at the box boundary.
    pub fn finite_difference_gradient(&self, x: &[f64], h: f64, mode: EvalMode) -> Result<Vec<f64>> {
        let mut grad = Vec::with_capacity(x.len());
        for k in 0..x.len() {
            let mut plus = x.to_vec();
            let mut minus = x.to_vec();
            plus[k] += h;
            minus[k] -= h;
            self.domain_box.project(&mut plus);
            self.domain_box.project(&mut minus);
            let up = self.evaluate_with(&plus, mode)?.upper;
            let um = self.evaluate_with(&minus, mode)?.upper;
            grad.push((up - um) / (plus[k] - minus[k]));
        }
        Ok(grad)
    }
}
