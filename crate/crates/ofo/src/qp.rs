//! Dense convex quadratic programs and polyhedral feasible sets.
//!
//! Solves
//!
//! ```text
//! minimize    0.5 x' H x + g' x
//! subject to  A x <= b
//!             C x  = d
//! ```
//!
//! with `H` symmetric positive semidefinite, using a primal active-set
//! method. Infeasible starts are handled by an internal phase-1 program.
//! Solutions carry the KKT multipliers so callers can certify them
//! independently with [`kkt_residual`]; infeasibility and unboundedness are
//! reported through [`QpStatus`] rather than errors. Errors are reserved for
//! malformed inputs and numerical breakdown.
//!
//! Problem sizes here are small (tens of variables and rows), so the solver
//! favors dense factorizations and explicit certification over speed.

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

/// Primal feasibility tolerance used when classifying points and solutions.
pub const FEAS_TOL: f64 = 1e-9;
/// Tolerance on multiplier signs at optimality.
pub const DUAL_TOL: f64 = 1e-9;
/// Step norms below this (relative to the iterate) count as stationary.
const STEP_TOL: f64 = 1e-11;
/// Predicted objective decreases below this (relative to the objective)
/// count as stationary. Catches steps that only drift across an optimal
/// face, e.g. regularization noise when the reduced Hessian is singular.
const PROGRESS_TOL: f64 = 1e-14;
/// Directional derivatives below this do not participate in the ratio test.
const DENOM_TOL: f64 = 1e-13;
/// Phase-1 objective above this certifies infeasibility.
const PHASE1_TOL: f64 = 1e-7;
/// Iterates beyond this norm are declared unbounded.
const UNBOUNDED_NORM: f64 = 1e10;
/// Target residual when repairing a near-feasible point.
const REPAIR_TOL: f64 = 1e-12;

#[derive(Debug, Error)]
pub enum QpError {
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("hessian asymmetry {0:.3e} exceeds tolerance")]
    AsymmetricHessian(f64),
    #[error("numerical breakdown in {0}")]
    Numerical(&'static str),
}

/// Termination status of a solve. Only `Optimal` solutions carry meaningful
/// multipliers.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum QpStatus {
    Optimal,
    Infeasible,
    Unbounded,
    MaxIter,
}

/// A dense convex QP. Empty constraint blocks are zero-row matrices with the
/// correct column count; the `with_*` builders keep that invariant for you.
#[derive(Debug, Clone)]
pub struct QpProblem {
    pub h: DMatrix<f64>,
    pub g: DVector<f64>,
    pub a_ineq: DMatrix<f64>,
    pub b_ineq: DVector<f64>,
    pub a_eq: DMatrix<f64>,
    pub b_eq: DVector<f64>,
}

impl QpProblem {
    pub fn new(h: DMatrix<f64>, g: DVector<f64>) -> Self {
        let n = g.len();
        Self {
            h,
            g,
            a_ineq: DMatrix::zeros(0, n),
            b_ineq: DVector::zeros(0),
            a_eq: DMatrix::zeros(0, n),
            b_eq: DVector::zeros(0),
        }
    }

    pub fn with_inequalities(mut self, a: DMatrix<f64>, b: DVector<f64>) -> Self {
        self.a_ineq = a;
        self.b_ineq = b;
        self
    }

    pub fn with_equalities(mut self, a: DMatrix<f64>, b: DVector<f64>) -> Self {
        self.a_eq = a;
        self.b_eq = b;
        self
    }

    pub fn dim(&self) -> usize {
        self.g.len()
    }

    pub fn objective(&self, x: &DVector<f64>) -> f64 {
        0.5 * (&self.h * x).dot(x) + self.g.dot(x)
    }

    fn validate(&self) -> Result<(), QpError> {
        let n = self.dim();
        if self.h.nrows() != n || self.h.ncols() != n {
            return Err(QpError::Dimension(format!(
                "hessian is {}x{}, expected {}x{}",
                self.h.nrows(),
                self.h.ncols(),
                n,
                n
            )));
        }
        if self.a_ineq.ncols() != n && self.a_ineq.nrows() > 0 {
            return Err(QpError::Dimension(format!(
                "inequality matrix has {} columns, expected {}",
                self.a_ineq.ncols(),
                n
            )));
        }
        if self.a_ineq.nrows() != self.b_ineq.len() {
            return Err(QpError::Dimension(format!(
                "{} inequality rows but {} right-hand sides",
                self.a_ineq.nrows(),
                self.b_ineq.len()
            )));
        }
        if self.a_eq.ncols() != n && self.a_eq.nrows() > 0 {
            return Err(QpError::Dimension(format!(
                "equality matrix has {} columns, expected {}",
                self.a_eq.ncols(),
                n
            )));
        }
        if self.a_eq.nrows() != self.b_eq.len() {
            return Err(QpError::Dimension(format!(
                "{} equality rows but {} right-hand sides",
                self.a_eq.nrows(),
                self.b_eq.len()
            )));
        }
        Ok(())
    }

    /// Symmetry check plus exact symmetrization. Asymmetry beyond roundoff is
    /// a modelling error we refuse to paper over.
    fn symmetrized(&self) -> Result<QpProblem, QpError> {
        let asym = (&self.h - self.h.transpose()).amax();
        let tol = 1e-12 * (1.0 + self.h.amax());
        if asym > tol {
            return Err(QpError::AsymmetricHessian(asym));
        }
        let mut p = self.clone();
        p.h = (&self.h + self.h.transpose()) * 0.5;
        Ok(p)
    }

    /// Worst constraint violation at `x`: one-sided for inequality rows,
    /// absolute for equality rows.
    pub fn max_violation(&self, x: &DVector<f64>) -> f64 {
        let mut worst: f64 = 0.0;
        for i in 0..self.a_ineq.nrows() {
            worst = worst.max(row_dot(&self.a_ineq, i, x) - self.b_ineq[i]);
        }
        for i in 0..self.a_eq.nrows() {
            worst = worst.max((row_dot(&self.a_eq, i, x) - self.b_eq[i]).abs());
        }
        worst
    }
}

/// Solution returned by [`solve_qp`]. `lambda` are inequality multipliers
/// (one per row, zero off the active set), `mu` equality multipliers.
/// `infeasibility` is the smallest maximum violation found by phase 1; it is
/// zero for feasible problems.
#[derive(Debug, Clone)]
pub struct QpSolution {
    pub x: DVector<f64>,
    pub lambda: DVector<f64>,
    pub mu: DVector<f64>,
    pub status: QpStatus,
    pub iterations: usize,
    pub infeasibility: f64,
}

/// Maximum KKT residual of a candidate solution: stationarity, primal
/// feasibility, multiplier signs, and complementarity, all in the infinity
/// norm. Independent of the solver path; use it to certify solutions.
pub fn kkt_residual(problem: &QpProblem, solution: &QpSolution) -> f64 {
    let x = &solution.x;
    let mut stationarity = &problem.h * x + &problem.g;
    if problem.a_ineq.nrows() > 0 {
        stationarity += problem.a_ineq.transpose() * &solution.lambda;
    }
    if problem.a_eq.nrows() > 0 {
        stationarity += problem.a_eq.transpose() * &solution.mu;
    }
    let mut worst = stationarity.amax();
    for i in 0..problem.a_ineq.nrows() {
        let residual = row_dot(&problem.a_ineq, i, x) - problem.b_ineq[i];
        worst = worst.max(residual);
        worst = worst.max(-solution.lambda[i]);
        worst = worst.max((solution.lambda[i] * residual).abs());
    }
    for i in 0..problem.a_eq.nrows() {
        worst = worst.max((row_dot(&problem.a_eq, i, x) - problem.b_eq[i]).abs());
    }
    worst
}

/// Solve from scratch: phase 1 finds a feasible point (or an infeasibility
/// certificate), then the active-set iteration runs to optimality.
pub fn solve_qp(problem: &QpProblem) -> Result<QpSolution, QpError> {
    problem.validate()?;
    let sym = problem.symmetrized()?;
    match initial_feasible_point(&sym)? {
        Start::Feasible(x0) => run_active_set(&sym, x0),
        Start::Infeasible { best, violation } => Ok(QpSolution {
            x: best,
            lambda: DVector::zeros(sym.a_ineq.nrows()),
            mu: DVector::zeros(sym.a_eq.nrows()),
            status: QpStatus::Infeasible,
            iterations: 0,
            infeasibility: violation,
        }),
    }
}

/// Solve starting from a caller-supplied point. The point must be feasible
/// within [`FEAS_TOL`]; otherwise this falls back to the cold-start path.
pub fn solve_qp_from(problem: &QpProblem, x0: &DVector<f64>) -> Result<QpSolution, QpError> {
    problem.validate()?;
    if x0.len() != problem.dim() {
        return Err(QpError::Dimension(format!(
            "start point has length {}, expected {}",
            x0.len(),
            problem.dim()
        )));
    }
    let sym = problem.symmetrized()?;
    let violation = sym.max_violation(x0);
    if violation > FEAS_TOL {
        return solve_qp(problem);
    }
    let start = if violation > REPAIR_TOL {
        let (x, score) = repair_feasibility(&sym, x0.clone());
        if score > FEAS_TOL {
            return solve_qp(problem);
        }
        x
    } else {
        x0.clone()
    };
    run_active_set(&sym, start)
}

enum Start {
    Feasible(DVector<f64>),
    Infeasible { best: DVector<f64>, violation: f64 },
}

/// Find a strictly feasible starting point. Equalities are met by a minimum
/// norm solve; inequalities through a slack-minimizing phase-1 QP whose
/// optimal slack doubles as an infeasibility certificate.
fn initial_feasible_point(problem: &QpProblem) -> Result<Start, QpError> {
    let n = problem.dim();
    let p = problem.a_eq.nrows();
    let mut x0 = DVector::zeros(n);
    if p > 0 {
        let svd = problem.a_eq.clone().svd(true, true);
        x0 = svd
            .solve(&problem.b_eq, 1e-12)
            .map_err(|_| QpError::Numerical("equality least-squares solve"))?;
        let residual = (&problem.a_eq * &x0 - &problem.b_eq).amax();
        if residual > 1e-8 * (1.0 + problem.b_eq.amax()) {
            return Ok(Start::Infeasible {
                best: x0,
                violation: residual,
            });
        }
    }

    let m = problem.a_ineq.nrows();
    let worst = (0..m)
        .map(|i| row_dot(&problem.a_ineq, i, &x0) - problem.b_ineq[i])
        .fold(0.0f64, f64::max);
    if worst <= 0.0 {
        return Ok(Start::Feasible(x0));
    }
    if worst <= FEAS_TOL {
        // Monotone repair keeps the point within the starting violation, so
        // the result is a valid start either way.
        let (x, _) = repair_feasibility(problem, x0);
        return Ok(Start::Feasible(x));
    }

    // Phase 1 in (x, t): minimize 0.5*delta*|x - x0|^2 + 0.5 t^2 + t subject
    // to the original rows relaxed by t and t >= -1. The x regularizer keeps
    // the Hessian positive definite without disturbing the slack objective.
    let delta = 1e-6;
    let dim = n + 1;
    let mut h = DMatrix::zeros(dim, dim);
    for i in 0..n {
        h[(i, i)] = delta;
    }
    h[(n, n)] = 1.0;
    let mut g = DVector::zeros(dim);
    for i in 0..n {
        g[i] = -delta * x0[i];
    }
    g[n] = 1.0;

    let mut a = DMatrix::zeros(m + 1, dim);
    let mut b = DVector::zeros(m + 1);
    for i in 0..m {
        for j in 0..n {
            a[(i, j)] = problem.a_ineq[(i, j)];
        }
        a[(i, n)] = -1.0;
        b[i] = problem.b_ineq[i];
    }
    a[(m, n)] = -1.0;
    b[m] = 1.0;

    let mut a_eq = DMatrix::zeros(p, dim);
    for i in 0..p {
        for j in 0..n {
            a_eq[(i, j)] = problem.a_eq[(i, j)];
        }
    }

    let mut start = DVector::zeros(dim);
    for i in 0..n {
        start[i] = x0[i];
    }
    start[n] = worst + 1.0;

    let phase1 = QpProblem {
        h,
        g,
        a_ineq: a,
        b_ineq: b,
        a_eq,
        b_eq: problem.b_eq.clone(),
    };
    let outcome = active_set_core(&phase1, start)?;
    if outcome.status != QpStatus::Optimal {
        return Err(QpError::Numerical("phase-1 solve"));
    }
    let t = outcome.x[n];
    let x = outcome.x.rows(0, n).into_owned();
    if t > PHASE1_TOL {
        return Ok(Start::Infeasible {
            best: x,
            violation: t,
        });
    }
    // The phase-1 gate is coarser than the feasibility tolerance, so a
    // marginally infeasible problem can reach this point; an unrepairable
    // residual is reported as infeasibility, not as a solver failure.
    let (x, score) = repair_feasibility(problem, x);
    if score <= FEAS_TOL {
        Ok(Start::Feasible(x))
    } else {
        Ok(Start::Infeasible {
            best: x,
            violation: score,
        })
    }
}

/// Drive residual violations of a near-feasible point toward roundoff and
/// return the best point found with its violation. Each pass tries one
/// least-norm correction that lands every violated inequality on its boundary
/// and restores the equalities; the combined solve handles nearly parallel
/// rows where row-by-row projection stalls. A correction is kept only if it
/// reduces the violation, with a cyclic projection sweep as the fallback, so
/// the repair never diverges; an infeasible problem simply stops improving.
fn repair_feasibility(problem: &QpProblem, x: DVector<f64>) -> (DVector<f64>, f64) {
    let m = problem.a_ineq.nrows();
    let p = problem.a_eq.nrows();
    let n = x.len();
    let mut best_score = problem.max_violation(&x);
    let mut best = x.clone();
    let mut x = x;
    for _ in 0..40 {
        if best_score <= REPAIR_TOL {
            return (best, best_score);
        }
        let violated: Vec<usize> = (0..m)
            .filter(|&i| row_dot(&problem.a_ineq, i, &x) - problem.b_ineq[i] > 0.0)
            .collect();
        let rows = p + violated.len();
        let mut a = DMatrix::zeros(rows, n);
        let mut r = DVector::zeros(rows);
        for i in 0..p {
            for j in 0..n {
                a[(i, j)] = problem.a_eq[(i, j)];
            }
            r[i] = problem.b_eq[i] - row_dot(&problem.a_eq, i, &x);
        }
        for (k, &i) in violated.iter().enumerate() {
            for j in 0..n {
                a[(p + k, j)] = problem.a_ineq[(i, j)];
            }
            r[p + k] = problem.b_ineq[i] - row_dot(&problem.a_ineq, i, &x);
        }
        let eps = 1e-8 * a.amax().max(1e-300);
        let corrected = a
            .svd(true, true)
            .solve(&r, eps)
            .ok()
            .map(|dx| &x + dx);
        match corrected {
            Some(next) if problem.max_violation(&next) < problem.max_violation(&x) => {
                x = next;
            }
            _ => {
                // The combined correction overshot or the rows were too
                // degenerate; fall back to one sweep of row projections.
                for i in 0..m {
                    let violation = row_dot(&problem.a_ineq, i, &x) - problem.b_ineq[i];
                    if violation > 0.0 {
                        let norm_sq: f64 =
                            (0..n).map(|j| problem.a_ineq[(i, j)].powi(2)).sum();
                        if norm_sq > 0.0 {
                            for j in 0..n {
                                x[j] -= problem.a_ineq[(i, j)] * violation / norm_sq;
                            }
                        }
                    }
                }
                if p > 0 {
                    let residual = &problem.b_eq - &problem.a_eq * &x;
                    let eps = 1e-10 * problem.a_eq.amax().max(1e-300);
                    if let Ok(dx) = problem.a_eq.clone().svd(true, true).solve(&residual, eps) {
                        x += dx;
                    }
                }
            }
        }
        let score = problem.max_violation(&x);
        if score < best_score {
            best_score = score;
            best = x.clone();
        }
    }
    (best, best_score)
}

fn run_active_set(problem: &QpProblem, start: DVector<f64>) -> Result<QpSolution, QpError> {
    let outcome = active_set_core(problem, start)?;
    Ok(outcome)
}

/// One primal active-set iteration loop from a feasible point. The working
/// set starts empty; rows enter through the ratio test and leave on negative
/// multipliers (most negative first, lowest row index on ties).
fn active_set_core(problem: &QpProblem, mut x: DVector<f64>) -> Result<QpSolution, QpError> {
    let n = problem.dim();
    let m = problem.a_ineq.nrows();
    let p = problem.a_eq.nrows();
    let max_iter = 50 * (n + m + p) + 100;

    let mut working: Vec<usize> = Vec::new();
    let mut in_working = vec![false; m];
    let mut iterations = 0;

    while iterations < max_iter {
        iterations += 1;
        let grad = &problem.h * &x + &problem.g;
        let nw = working.len();

        let mut c = DMatrix::zeros(nw + p, n);
        for (r, &row) in working.iter().enumerate() {
            for j in 0..n {
                c[(r, j)] = problem.a_ineq[(row, j)];
            }
        }
        for i in 0..p {
            for j in 0..n {
                c[(nw + i, j)] = problem.a_eq[(i, j)];
            }
        }

        let (step, mult) =
            solve_eqp(&problem.h, &grad, &c).ok_or(QpError::Numerical("working-set KKT system"))?;

        // An exact step on the working set never increases the objective and
        // decreases it strictly unless the point is already a minimizer
        // there, so roundoff-level predicted progress means stationarity
        // even when the step itself is long.
        let predicted = -(grad.dot(&step) + 0.5 * step.dot(&(&problem.h * &step)));
        let stationary = step.norm() <= STEP_TOL * (1.0 + x.norm())
            || predicted <= PROGRESS_TOL * (1.0 + problem.objective(&x).abs());

        if stationary {
            // Stationary on the working set; optimal unless a multiplier
            // says a constraint should leave.
            let mut drop: Option<(usize, usize, f64)> = None;
            for (pos, &row) in working.iter().enumerate() {
                let value = mult[pos];
                if value < -DUAL_TOL {
                    let better = match drop {
                        None => true,
                        Some((_, drow, dval)) => value < dval || (value == dval && row < drow),
                    };
                    if better {
                        drop = Some((pos, row, value));
                    }
                }
            }
            match drop {
                Some((pos, row, _)) => {
                    working.remove(pos);
                    in_working[row] = false;
                }
                None => {
                    let mut lambda = DVector::zeros(m);
                    for (pos, &row) in working.iter().enumerate() {
                        lambda[row] = mult[pos].max(0.0);
                    }
                    let mu = if p > 0 {
                        mult.rows(nw, p).into_owned()
                    } else {
                        DVector::zeros(0)
                    };
                    // Regularized working-set solves let boundary rows drift
                    // by a few ulps per iteration; polish the returned point
                    // so feasibility of the reported optimum is exact.
                    let (x, _) = repair_feasibility(problem, x);
                    return Ok(QpSolution {
                        x,
                        lambda,
                        mu,
                        status: QpStatus::Optimal,
                        iterations,
                        infeasibility: 0.0,
                    });
                }
            }
            continue;
        }

        // Ratio test: longest step along `step` keeping every inactive row
        // feasible. Slacks of rows that sit exactly on the boundary are
        // clamped so roundoff cannot produce negative ratios.
        let mut alpha = 1.0f64;
        let mut blocking: Option<usize> = None;
        for i in 0..m {
            if in_working[i] {
                continue;
            }
            let denom = row_dot(&problem.a_ineq, i, &step);
            if denom > DENOM_TOL {
                let slack = (problem.b_ineq[i] - row_dot(&problem.a_ineq, i, &x)).max(0.0);
                let ratio = slack / denom;
                if ratio < alpha {
                    alpha = ratio;
                    blocking = Some(i);
                }
            }
        }

        x.axpy(alpha, &step, 1.0);
        if x.amax() > UNBOUNDED_NORM {
            return Ok(QpSolution {
                x,
                lambda: DVector::zeros(m),
                mu: DVector::zeros(p),
                status: QpStatus::Unbounded,
                iterations,
                infeasibility: 0.0,
            });
        }
        if let Some(row) = blocking {
            working.push(row);
            in_working[row] = true;
        }
    }

    Ok(QpSolution {
        x,
        lambda: DVector::zeros(m),
        mu: DVector::zeros(p),
        status: QpStatus::MaxIter,
        iterations,
        infeasibility: 0.0,
    })
}

/// Solve the equality-constrained subproblem on the working set. The KKT
/// system is solved by LU with escalating regularization; a residual check
/// rejects factorizations that went numerically bad, e.g. when degenerate
/// entering steps made the working set linearly dependent.
fn solve_eqp(
    h: &DMatrix<f64>,
    grad: &DVector<f64>,
    c: &DMatrix<f64>,
) -> Option<(DVector<f64>, DVector<f64>)> {
    let n = grad.len();
    let k = c.nrows();
    let dim = n + k;
    let scale = 1.0 + h.amax();
    for &(reg_h, reg_c) in &[(1e-12, 0.0), (1e-12, 1e-14), (1e-9, 1e-10), (1e-6, 1e-8)] {
        let mut kkt = DMatrix::zeros(dim, dim);
        kkt.view_mut((0, 0), (n, n)).copy_from(h);
        for i in 0..n {
            kkt[(i, i)] += reg_h * scale;
        }
        if k > 0 {
            kkt.view_mut((0, n), (n, k)).copy_from(&c.transpose());
            kkt.view_mut((n, 0), (k, n)).copy_from(c);
            for i in 0..k {
                kkt[(n + i, n + i)] = -reg_c;
            }
        }
        let mut rhs = DVector::zeros(dim);
        for i in 0..n {
            rhs[i] = -grad[i];
        }
        let solution = match kkt.clone().lu().solve(&rhs) {
            Some(s) => s,
            None => continue,
        };
        if !solution.iter().all(|v| v.is_finite()) {
            continue;
        }
        let residual = (&kkt * &solution - &rhs).amax();
        if residual > 1e-8 * (1.0 + rhs.amax()) {
            continue;
        }
        let step = solution.rows(0, n).into_owned();
        let mult = if k > 0 {
            solution.rows(n, k).into_owned()
        } else {
            DVector::zeros(0)
        };
        return Some((step, mult));
    }
    None
}

fn row_dot(a: &DMatrix<f64>, row: usize, x: &DVector<f64>) -> f64 {
    (0..x.len()).map(|j| a[(row, j)] * x[j]).sum()
}

/// A set `{ x : A x <= b }` used as the feasible region for inputs and
/// outputs. Rows are plain halfspaces; boxes and budget rows are builders on
/// top.
#[derive(Debug, Clone)]
pub struct PolyhedralSet {
    a: DMatrix<f64>,
    b: DVector<f64>,
}

impl PolyhedralSet {
    pub fn new(a: DMatrix<f64>, b: DVector<f64>) -> Result<Self, QpError> {
        if a.nrows() != b.len() {
            return Err(QpError::Dimension(format!(
                "{} rows but {} right-hand sides",
                a.nrows(),
                b.len()
            )));
        }
        Ok(Self { a, b })
    }

    /// Box `lower <= x <= upper`. Infinite bounds are skipped rather than
    /// encoded as huge coefficients.
    pub fn from_bounds(lower: &DVector<f64>, upper: &DVector<f64>) -> Self {
        assert_eq!(lower.len(), upper.len(), "bound lengths differ");
        let n = lower.len();
        let mut rows = Vec::new();
        let mut rhs = Vec::new();
        for i in 0..n {
            if upper[i].is_finite() {
                let mut row = vec![0.0; n];
                row[i] = 1.0;
                rows.push(row);
                rhs.push(upper[i]);
            }
            if lower[i].is_finite() {
                let mut row = vec![0.0; n];
                row[i] = -1.0;
                rows.push(row);
                rhs.push(-lower[i]);
            }
        }
        let m = rows.len();
        let a = DMatrix::from_fn(m, n, |r, c| rows[r][c]);
        let b = DVector::from_vec(rhs);
        Self { a, b }
    }

    /// Unconstrained region in `n` dimensions.
    pub fn unbounded(n: usize) -> Self {
        Self {
            a: DMatrix::zeros(0, n),
            b: DVector::zeros(0),
        }
    }

    /// Append the halfspace `coeffs' x <= cap`.
    pub fn with_row(mut self, coeffs: &DVector<f64>, cap: f64) -> Self {
        assert_eq!(coeffs.len(), self.dim(), "row length differs from set dimension");
        let m = self.a.nrows();
        let n = self.dim();
        let mut a = DMatrix::zeros(m + 1, n);
        a.view_mut((0, 0), (m, n)).copy_from(&self.a);
        for j in 0..n {
            a[(m, j)] = coeffs[j];
        }
        let mut b = DVector::zeros(m + 1);
        b.rows_mut(0, m).copy_from(&self.b);
        b[m] = cap;
        self.a = a;
        self.b = b;
        self
    }

    pub fn dim(&self) -> usize {
        self.a.ncols()
    }

    pub fn num_constraints(&self) -> usize {
        self.a.nrows()
    }

    pub fn a(&self) -> &DMatrix<f64> {
        &self.a
    }

    pub fn b(&self) -> &DVector<f64> {
        &self.b
    }

    /// Replace the right-hand side of one row, e.g. a budget cap that moves
    /// over time.
    pub fn set_rhs(&mut self, row: usize, value: f64) -> Result<(), QpError> {
        if row >= self.b.len() {
            return Err(QpError::Dimension(format!(
                "row {} out of range for {} constraints",
                row,
                self.b.len()
            )));
        }
        self.b[row] = value;
        Ok(())
    }

    /// Largest violation `max_i (a_i' x - b_i)`; negative inside the
    /// interior, `-inf` when the set has no rows.
    pub fn max_violation(&self, x: &DVector<f64>) -> f64 {
        let mut worst = f64::NEG_INFINITY;
        for i in 0..self.a.nrows() {
            worst = worst.max(row_dot(&self.a, i, x) - self.b[i]);
        }
        worst
    }

    pub fn contains(&self, x: &DVector<f64>, tol: f64) -> bool {
        self.max_violation(x) <= tol
    }
}
