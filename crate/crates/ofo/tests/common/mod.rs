//! Independent reference solvers the integration suites check against.
//!
//! Everything here reaches results by a different route than the library:
//! exhaustive subset enumeration instead of active-set pivoting, batch
//! algebra instead of recursion, difference quotients instead of calculus.
//! None of it calls back into the solver paths under test.

#![allow(dead_code)]

use nalgebra::{DMatrix, DVector};
use ofo::controller::PeParameters;
use ofo::qp::QpProblem;

/// Try every subset of inequality rows as the active set, solve the pinned
/// equality system directly, and keep the best candidate that is feasible
/// with nonnegative multipliers on its pinned rows. For a strictly convex
/// problem the winner is the unique optimum.
pub fn enumerate_qp(problem: &QpProblem) -> Option<(DVector<f64>, f64)> {
    let n = problem.dim();
    let m = problem.a_ineq.nrows();
    let p = problem.a_eq.nrows();
    assert!(m <= 16, "enumeration oracle is exponential in rows");

    let mut best: Option<(DVector<f64>, f64)> = None;
    for mask in 0u32..(1 << m) {
        let active: Vec<usize> = (0..m).filter(|i| mask & (1 << i) != 0).collect();
        let k = active.len();
        if k > n {
            continue;
        }
        let dim = n + k + p;
        let mut kkt = DMatrix::zeros(dim, dim);
        let mut rhs = DVector::zeros(dim);
        for i in 0..n {
            for j in 0..n {
                kkt[(i, j)] = problem.h[(i, j)];
            }
            rhs[i] = -problem.g[i];
        }
        for (row, &ci) in active.iter().enumerate() {
            for j in 0..n {
                kkt[(n + row, j)] = problem.a_ineq[(ci, j)];
                kkt[(j, n + row)] = problem.a_ineq[(ci, j)];
            }
            rhs[n + row] = problem.b_ineq[ci];
        }
        for row in 0..p {
            for j in 0..n {
                kkt[(n + k + row, j)] = problem.a_eq[(row, j)];
                kkt[(j, n + k + row)] = problem.a_eq[(row, j)];
            }
            rhs[n + k + row] = problem.b_eq[row];
        }

        let Some(z) = kkt.clone().full_piv_lu().solve(&rhs) else {
            continue;
        };
        if (&kkt * &z - &rhs).amax() > 1e-8 * (1.0 + rhs.amax()) {
            continue;
        }

        let x = z.rows(0, n).into_owned();
        let lambda = z.rows(n, k);
        if lambda.iter().any(|&l| l < -1e-8) {
            continue;
        }
        let feasible = (0..m).all(|i| {
            problem.a_ineq.row(i).transpose().dot(&x) <= problem.b_ineq[i] + 1e-8
        });
        if !feasible {
            continue;
        }
        let value = problem.objective(&x);
        if best.as_ref().is_none_or(|(_, v)| value < *v) {
            best = Some((x, value));
        }
    }
    best
}

/// Central difference quotient of a vector map, column by column.
pub fn central_jacobian<F>(f: F, u: &DVector<f64>, h: f64) -> DMatrix<f64>
where
    F: Fn(&DVector<f64>) -> DVector<f64>,
{
    let n = u.len();
    let m = f(u).len();
    let mut jac = DMatrix::zeros(m, n);
    for j in 0..n {
        let mut hi = u.clone();
        let mut lo = u.clone();
        hi[j] += h;
        lo[j] -= h;
        let col = (f(&hi) - f(&lo)) / (2.0 * h);
        jac.set_column(j, &col);
    }
    jac
}

/// Least-squares fit of `delta_y = G * delta_u` over a whole batch at once:
/// the normal equations, no recursion. Requires the input deltas to span.
pub fn batch_least_squares(pairs: &[(DVector<f64>, DVector<f64>)]) -> DMatrix<f64> {
    let n_u = pairs[0].0.len();
    let n_y = pairs[0].1.len();
    let k = pairs.len();
    let mut u = DMatrix::zeros(n_u, k);
    let mut y = DMatrix::zeros(n_y, k);
    for (c, (du, dy)) in pairs.iter().enumerate() {
        u.set_column(c, du);
        y.set_column(c, dy);
    }
    let gram = &u * u.transpose();
    let cross = (&y * u.transpose()).transpose();
    let solved = gram
        .full_piv_lu()
        .solve(&cross)
        .expect("batch inputs must span the input space");
    solved.transpose()
}

/// One bilevel instance over two inputs: the data both the alternating solve
/// and the monolithic oracle see.
pub struct MpccInstance {
    pub grad: DVector<f64>,
    pub v_perp: DVector<f64>,
    pub u: DVector<f64>,
    pub input_a: DMatrix<f64>,
    pub input_b: DVector<f64>,
    pub params: PeParameters,
}

/// Globally minimize `|w + grad|^2` subject to the input rows on
/// `u + alpha*w + s` and the perturbation problem's complete first-order
/// conditions, by enumerating which perturbation rows carry a multiplier.
///
/// Per branch the conditions become linear: stationarity of the perturbation
/// Lagrangian, the pinned rows at equality, and the margin split identity.
/// The branch problem is then a convex QP in the stacked unknowns
/// `[w, s, z+, z-, lambda_active, mu]`, solved here by eliminating the
/// equalities against a singular-value null-space basis and enumerating
/// candidate active subsets of what remains. Returns the best objective over
/// all branches, or None if no branch admits a certified point.
pub fn mpcc_optimal_objective(inst: &MpccInstance) -> Option<f64> {
    let n = inst.grad.len();
    let xdim = n + 2;
    let rows = 2 * n + 3;
    let pr = &inst.params;

    // Perturbation problem data over x = [s, z+, z-]: quadratic grad*grad'
    // on the s block, linear gamma on the lifted pair, bound and margin
    // rows, and the split equality with coupling -alpha*vperp'w on its rhs.
    let mut h_l = DMatrix::zeros(xdim, xdim);
    for i in 0..n {
        for j in 0..n {
            h_l[(i, j)] = inst.grad[i] * inst.grad[j];
        }
    }
    let mut g_l = DVector::zeros(xdim);
    g_l[n] = pr.gamma;
    g_l[n + 1] = pr.gamma;
    let mut a_l = DMatrix::zeros(rows, xdim);
    let mut b_l = DVector::zeros(rows);
    for i in 0..n {
        a_l[(i, i)] = 1.0;
        b_l[i] = pr.s_hi;
        a_l[(n + i, i)] = -1.0;
        b_l[n + i] = -pr.s_lo;
    }
    a_l[(2 * n, n)] = -1.0;
    a_l[(2 * n + 1, n + 1)] = -1.0;
    a_l[(2 * n + 2, n)] = -1.0;
    a_l[(2 * n + 2, n + 1)] = -1.0;
    b_l[2 * n + 2] = -pr.epsilon;
    let mut lift = DVector::zeros(xdim);
    for i in 0..n {
        lift[i] = -inst.v_perp[i];
    }
    lift[n] = 1.0;
    lift[n + 1] = -1.0;

    let m_u = inst.input_a.nrows();
    let mut best: Option<f64> = None;

    for mask in 0u32..(1 << rows) {
        let active: Vec<usize> = (0..rows).filter(|i| mask & (1 << i) != 0).collect();
        let k = active.len();
        let dim = n + xdim + k + 1;

        // Equalities: stationarity (xdim), pinned rows (k), margin split (1).
        let n_eq = xdim + k + 1;
        let mut e = DMatrix::zeros(n_eq, dim);
        let mut f = DVector::zeros(n_eq);
        for r in 0..xdim {
            for c in 0..xdim {
                e[(r, n + c)] = h_l[(r, c)];
            }
            for (col, &ci) in active.iter().enumerate() {
                e[(r, n + xdim + col)] = a_l[(ci, r)];
            }
            e[(r, n + xdim + k)] = lift[r];
            f[r] = -g_l[r];
        }
        for (r, &ci) in active.iter().enumerate() {
            for c in 0..xdim {
                e[(xdim + r, n + c)] = a_l[(ci, c)];
            }
            f[xdim + r] = b_l[ci];
        }
        for c in 0..n {
            e[(xdim + k, c)] = -pr.alpha * inst.v_perp[c];
        }
        for c in 0..xdim {
            e[(xdim + k, n + c)] = lift[c];
        }

        // Inequalities: inactive rows, multiplier signs, input rows.
        let m_i = (rows - k) + k + m_u;
        let mut cmat = DMatrix::zeros(m_i, dim);
        let mut evec = DVector::zeros(m_i);
        let mut out = 0;
        for i in 0..rows {
            if mask & (1 << i) != 0 {
                continue;
            }
            for c in 0..xdim {
                cmat[(out, n + c)] = a_l[(i, c)];
            }
            evec[out] = b_l[i];
            out += 1;
        }
        for col in 0..k {
            cmat[(out, n + xdim + col)] = -1.0;
            out += 1;
        }
        for i in 0..m_u {
            for c in 0..n {
                cmat[(out, c)] = pr.alpha * inst.input_a[(i, c)];
                cmat[(out, n + c)] = inst.input_a[(i, c)];
            }
            evec[out] = inst.input_b[i] - inst.input_a.row(i).transpose().dot(&inst.u);
            out += 1;
        }

        // Objective |w + grad|^2 plus a vanishing ridge on the free block so
        // every reduced solve is definite; the reported value comes from the
        // returned w alone, so the ridge never biases the comparison.
        let mut h_v = DMatrix::identity(dim, dim) * 1e-10;
        for i in 0..n {
            h_v[(i, i)] = 2.0;
        }
        let mut g_v = DVector::zeros(dim);
        for i in 0..n {
            g_v[i] = 2.0 * inst.grad[i];
        }

        if let Some(value) = branch_minimum(&e, &f, &cmat, &evec, &h_v, &g_v, n, &inst.grad) {
            if best.is_none_or(|b| value < b) {
                best = Some(value);
            }
        }
    }
    best
}

/// Minimize over one branch: eliminate `E v = f` through an SVD null-space
/// basis, then enumerate candidate active subsets of the reduced rows. The
/// reduced Hessian is positive definite, so any subset whose pinned solve is
/// primal feasible with nonnegative pins certifies the branch optimum.
fn branch_minimum(
    e: &DMatrix<f64>,
    f: &DVector<f64>,
    cmat: &DMatrix<f64>,
    evec: &DVector<f64>,
    h_v: &DMatrix<f64>,
    g_v: &DVector<f64>,
    n_w: usize,
    grad: &DVector<f64>,
) -> Option<f64> {
    let dim = e.ncols();
    // Zero-pad to a square system so the decomposition carries the complete
    // right basis; a wide thin SVD would drop the null directions.
    let mut e_sq = DMatrix::zeros(dim.max(e.nrows()), dim);
    let mut f_sq = DVector::zeros(e_sq.nrows());
    for r in 0..e.nrows() {
        for c in 0..dim {
            e_sq[(r, c)] = e[(r, c)];
        }
        f_sq[r] = f[r];
    }
    let svd = e_sq.clone().svd(true, true);
    let v_t = svd.v_t.as_ref().expect("svd with v requested");
    let smax = svd.singular_values.max().max(1e-300);
    let v_p = svd.solve(&f_sq, 1e-10 * smax).ok()?;
    if (e * &v_p - f).amax() > 1e-7 * (1.0 + f.amax()) {
        return None;
    }
    let null_cols: Vec<usize> = (0..dim)
        .filter(|&i| svd.singular_values[i] <= 1e-10 * smax)
        .collect();
    let p = null_cols.len();
    let mut basis = DMatrix::zeros(dim, p);
    for (col, &row) in null_cols.iter().enumerate() {
        for j in 0..dim {
            basis[(j, col)] = v_t[(row, j)];
        }
    }

    let h_t = basis.transpose() * h_v * &basis;
    let g_t = basis.transpose() * (h_v * &v_p + g_v);
    let c_t = cmat * &basis;
    let e_t = evec - cmat * &v_p;
    let m = c_t.nrows();

    let value_at = |t: &DVector<f64>| -> Option<f64> {
        let v = &v_p + &basis * t;
        let slack = &c_t * t - &e_t;
        if slack.iter().any(|&s| s > 1e-7) {
            return None;
        }
        let mut r = 0.0;
        for i in 0..n_w {
            let d = v[i] + grad[i];
            r += d * d;
        }
        Some(r)
    };

    let mut best: Option<f64> = None;
    let mut consider = |t: &DVector<f64>| {
        if let Some(val) = value_at(t) {
            if best.is_none_or(|b| val < b) {
                best = Some(val);
            }
        }
    };

    if p == 0 {
        consider(&DVector::zeros(0));
        return best;
    }

    let mut subset = vec![0usize; p];
    enumerate_subsets(m, p, &mut subset, 0, 0, &mut |chosen: &[usize]| {
        let k = chosen.len();
        let dim_t = p + k;
        let mut kkt = DMatrix::zeros(dim_t, dim_t);
        let mut rhs = DVector::zeros(dim_t);
        for i in 0..p {
            for j in 0..p {
                kkt[(i, j)] = h_t[(i, j)];
            }
            rhs[i] = -g_t[i];
        }
        for (row, &ci) in chosen.iter().enumerate() {
            for j in 0..p {
                kkt[(p + row, j)] = c_t[(ci, j)];
                kkt[(j, p + row)] = c_t[(ci, j)];
            }
            rhs[p + row] = e_t[ci];
        }
        let Some(z) = kkt.clone().full_piv_lu().solve(&rhs) else {
            return;
        };
        if (&kkt * &z - &rhs).amax() > 1e-7 * (1.0 + rhs.amax()) {
            return;
        }
        if z.rows(p, k).iter().any(|&l| l < -1e-8) {
            return;
        }
        consider(&z.rows(0, p).into_owned());
    });
    best
}

/// All strictly increasing index subsets of `0..m` with size at most `cap`.
fn enumerate_subsets(
    m: usize,
    cap: usize,
    scratch: &mut [usize],
    depth: usize,
    from: usize,
    visit: &mut impl FnMut(&[usize]),
) {
    visit(&scratch[..depth]);
    if depth == cap {
        return;
    }
    for i in from..m {
        scratch[depth] = i;
        enumerate_subsets(m, cap, scratch, depth + 1, i + 1, visit);
    }
}
