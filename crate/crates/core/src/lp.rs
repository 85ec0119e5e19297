//! Dense two-phase simplex for small equality-form linear programs
//!
//! ```text
//! minimize c.lambda  subject to  A lambda = b,  lambda >= 0
//! ```
//!
//! Phase one starts from the artificial basis, entering variables are chosen
//! by Bland's rule (lowest index), ties in the ratio test go to the lowest
//! basic index. Rows are equilibrated before solving. After the last pivot
//! the basic primal values and the duals are recomputed from the original
//! data by a direct solve with the final basis.

use serde::{Deserialize, Serialize};

use crate::linalg::solve_dense;

pub const DEFAULT_LP_TOL: f64 = 1e-11;

const PIVOT_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct LpProblem {
    pub cost: Vec<f64>,
    /// Constraint columns, each of length `rhs.len()`.
    pub columns: Vec<Vec<f64>>,
    pub rhs: Vec<f64>,
    /// Relative feasibility and optimality tolerance.
    pub tol: f64,
}

impl LpProblem {
    /// The convex-combination program: columns `(s_j, 1)`, right-hand side
    /// `(x, 1)`.
    pub fn convex_combination(points: &[Vec<f64>], cost: Vec<f64>, x: &[f64], tol: f64) -> Self {
        let columns = points
            .iter()
            .map(|s| s.iter().copied().chain(std::iter::once(1.0)).collect())
            .collect();
        let rhs = x.iter().copied().chain(std::iter::once(1.0)).collect();
        Self {
            cost,
            columns,
            rhs,
            tol,
        }
    }

    /// `max(1, |rhs|_inf, max|cost|)`.
    pub fn scale(&self) -> f64 {
        let r = self.rhs.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let c = self.cost.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        1f64.max(r).max(c)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LpStatus {
    Optimal,
    Infeasible,
    NumericFailure,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LpSolution {
    pub lambda: Vec<f64>,
    pub objective: f64,
    /// One multiplier per row. For the convex-combination program this is
    /// `(p, q)` of the supporting affine function `z -> <p,z> + q`.
    pub dual: Vec<f64>,
    pub status: LpStatus,
    pub iterations: usize,
}

impl LpSolution {
    fn failed(status: LpStatus, n: usize, m: usize, iterations: usize) -> Self {
        Self {
            lambda: vec![0.0; n],
            objective: f64::NAN,
            dual: vec![f64::NAN; m],
            status,
            iterations,
        }
    }

    /// Indices with strictly positive weight.
    pub fn support(&self) -> impl Iterator<Item = (usize, f64)> + '_ {
        self.lambda.iter().copied().enumerate().filter(|&(_, w)| w > 0.0)
    }
}

struct Tableau {
    m: usize,
    /// real columns
    n: usize,
    width: usize,
    data: Vec<f64>,
    basis: Vec<usize>,
}

impl Tableau {
    #[inline]
    fn at(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.width + c]
    }

    #[inline]
    fn rhs(&self, r: usize) -> f64 {
        self.data[r * self.width + self.width - 1]
    }

    fn pivot(&mut self, row: usize, col: usize) {
        let w = self.width;
        let p = self.data[row * w + col];
        for k in 0..w {
            self.data[row * w + k] /= p;
        }
        self.data[row * w + col] = 1.0;
        for r in 0..self.m {
            if r == row {
                continue;
            }
            let f = self.data[r * w + col];
            if f == 0.0 {
                continue;
            }
            for k in 0..w {
                self.data[r * w + k] -= f * self.data[row * w + k];
            }
            self.data[r * w + col] = 0.0;
        }
        self.basis[row] = col;
    }

    /// Runs Bland's rule with the given costs until optimal. Columns at or
    /// beyond `enter_limit` never enter.
    fn optimize(&mut self, cost: &[f64], enter_limit: usize, rc_tol: f64, iters: &mut usize, max_iters: usize) -> Result<(), LpStatus> {
        loop {
            let mut entering = None;
            for j in 0..enter_limit {
                if self.basis.contains(&j) {
                    continue;
                }
                let mut rc = cost[j];
                for r in 0..self.m {
                    rc -= cost[self.basis[r]] * self.at(r, j);
                }
                if rc < -rc_tol {
                    entering = Some(j);
                    break;
                }
            }
            let Some(e) = entering else { return Ok(()) };
            let mut leave: Option<(usize, f64)> = None;
            for r in 0..self.m {
                let a = self.at(r, e);
                if a > PIVOT_TOL {
                    let ratio = self.rhs(r).max(0.0) / a;
                    leave = match leave {
                        None => Some((r, ratio)),
                        Some((lr, lratio)) => {
                            if ratio < lratio || (ratio == lratio && self.basis[r] < self.basis[lr]) {
                                Some((r, ratio))
                            } else {
                                Some((lr, lratio))
                            }
                        }
                    };
                }
            }
            // unbounded direction: impossible on the simplex, treat as breakdown
            let Some((row, _)) = leave else { return Err(LpStatus::NumericFailure) };
            self.pivot(row, e);
            *iters += 1;
            if *iters > max_iters {
                return Err(LpStatus::NumericFailure);
            }
        }
    }
}

pub fn solve_lp(problem: &LpProblem) -> LpSolution {
    let m = problem.rhs.len();
    let n = problem.columns.len();
    if n == 0 || m == 0 || problem.cost.len() != n || problem.columns.iter().any(|c| c.len() != m) {
        return LpSolution::failed(LpStatus::NumericFailure, n, m, 0);
    }
    let scale = problem.scale();
    let tol = problem.tol.max(f64::EPSILON);

    // row equilibration, then sign flip so the rhs is nonnegative
    let mut row_mult = vec![1.0; m];
    for (r, mult) in row_mult.iter_mut().enumerate() {
        let big = problem.columns.iter().fold(0.0f64, |acc, c| acc.max(c[r].abs()));
        if big > 0.0 {
            *mult = 1.0 / big;
        }
        if problem.rhs[r] * *mult < 0.0 {
            *mult = -*mult;
        }
    }

    let width = n + m + 1;
    let mut tab = Tableau {
        m,
        n,
        width,
        data: vec![0.0; m * width],
        basis: (n..n + m).collect(),
    };
    for r in 0..m {
        for (j, col) in problem.columns.iter().enumerate() {
            tab.data[r * width + j] = col[r] * row_mult[r];
        }
        tab.data[r * width + n + r] = 1.0;
        tab.data[r * width + width - 1] = problem.rhs[r] * row_mult[r];
    }

    let max_iters = 50 * (n + m) + 100;
    let mut iterations = 0;

    let mut phase1 = vec![0.0; n + m];
    phase1[n..].iter_mut().for_each(|c| *c = 1.0);
    if let Err(s) = tab.optimize(&phase1, n + m, tol * 1e-3, &mut iterations, max_iters) {
        return LpSolution::failed(s, n, m, iterations);
    }
    let infeasibility: f64 = (0..m).filter(|&r| tab.basis[r] >= n).map(|r| tab.rhs(r).abs()).sum();
    // rhs rows were scaled by row_mult, which is at most 1/|entry|; compare
    // against the scaled rhs magnitude
    let rhs_scale = (0..m).fold(1.0f64, |acc, r| acc.max((problem.rhs[r] * row_mult[r]).abs()));
    if infeasibility > tol * rhs_scale * 10.0 {
        return LpSolution::failed(LpStatus::Infeasible, n, m, iterations);
    }
    // drive remaining artificials out of the basis where possible
    for r in 0..m {
        if tab.basis[r] < n {
            continue;
        }
        let mut best: Option<(usize, f64)> = None;
        for j in 0..n {
            if tab.basis.contains(&j) {
                continue;
            }
            let a = tab.at(r, j).abs();
            if a > 1e-9 && best.is_none_or(|(_, b)| a > b) {
                best = Some((j, a));
            }
        }
        if let Some((j, _)) = best {
            tab.pivot(r, j);
            iterations += 1;
        }
    }

    let mut phase2 = vec![0.0; n + m];
    phase2[..n].copy_from_slice(&problem.cost);
    if let Err(s) = tab.optimize(&phase2, n, tol * scale, &mut iterations, max_iters) {
        return LpSolution::failed(s, n, m, iterations);
    }

    let (lambda, dual) = recover(problem, &tab, &row_mult);
    let objective = lambda.iter().zip(&problem.cost).map(|(l, c)| l * c).sum();
    LpSolution {
        lambda,
        objective,
        dual,
        status: LpStatus::Optimal,
        iterations,
    }
}

/// Primal and dual values from the final basis, solved directly against the
/// unscaled data. Falls back to the tableau when the basis matrix is
/// numerically singular.
fn recover(problem: &LpProblem, tab: &Tableau, row_mult: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let (m, n) = (tab.m, tab.n);
    // basis matrix B (m x m), column k = original column of basis[k]
    let mut bmat = vec![0.0; m * m];
    for (k, &j) in tab.basis.iter().enumerate() {
        for r in 0..m {
            bmat[r * m + k] = if j < n {
                problem.columns[j][r]
            } else if j - n == r {
                // artificial of row r, expressed in original row units
                1.0 / row_mult[r]
            } else {
                0.0
            };
        }
    }
    let cost_b: Vec<f64> = tab.basis.iter().map(|&j| if j < n { problem.cost[j] } else { 0.0 }).collect();
    let mut bt = vec![0.0; m * m];
    for r in 0..m {
        for k in 0..m {
            bt[k * m + r] = bmat[r * m + k];
        }
    }
    let direct = solve_dense(bmat, problem.rhs.clone(), m, 1e-14)
        .zip(solve_dense(bt, cost_b.clone(), m, 1e-14));

    let mut lambda = vec![0.0; n];
    let dual = match direct {
        Some((xb, y)) => {
            for (k, &j) in tab.basis.iter().enumerate() {
                if j < n {
                    lambda[j] = xb[k].max(0.0);
                }
            }
            y
        }
        None => {
            for (r, &j) in tab.basis.iter().enumerate() {
                if j < n {
                    lambda[j] = tab.rhs(r).max(0.0);
                }
            }
            // y_scaled = c_B^T B'^{-1}; B'^{-1} sits in the artificial block
            (0..m)
                .map(|r| {
                    let ys: f64 = (0..m).map(|k| cost_b[k] * tab.at(k, n + r)).sum();
                    ys * row_mult[r]
                })
                .collect()
        }
    };
    (lambda, dual)
}
