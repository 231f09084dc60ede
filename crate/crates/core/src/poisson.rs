//! Mean-pinned conjugate gradients for pure-Neumann elliptic problems.

use crate::error::SolverError;
use crate::grid::{Grid, ScalarBc, ScalarField, VectorBc, VectorField};
use crate::ops;

/// A symmetric negative-semidefinite operator. When `singular` it has the
/// constants as null space and the solve is mean-pinned.
///
/// `apply` receives `u` with stale ghosts and must fill them itself.
pub trait NeumannOperator {
    fn apply(&self, grid: &Grid, u: &mut ScalarField) -> ScalarField;

    fn singular(&self) -> bool {
        true
    }
}

/// Compact Laplacian with homogeneous Neumann ghosts.
pub struct Laplacian;

impl NeumannOperator for Laplacian {
    fn apply(&self, grid: &Grid, u: &mut ScalarField) -> ScalarField {
        u.fill_ghosts(grid, ScalarBc::NEUMANN);
        ops::lap(grid, u)
    }
}

/// `div(beta grad u) - shift u` built from the centred first-difference
/// operators, so that `div(v - beta grad u)` is exactly what the projection
/// controls. `shift >= 0`; the operator is singular only when it vanishes.
pub struct ProjectionOperator<'a> {
    pub beta: &'a ScalarField,
    pub shift: Option<&'a ScalarField>,
}

impl NeumannOperator for ProjectionOperator<'_> {
    fn apply(&self, grid: &Grid, u: &mut ScalarField) -> ScalarField {
        u.fill_ghosts(grid, ScalarBc::NEUMANN);
        let flux = ops::grad(grid, u).scaled_by(self.beta);
        let mut out = ops::div(grid, &flux);
        if let Some(c) = self.shift {
            for k in grid.interior() {
                out[k] -= c[k] * u[k];
            }
        }
        out
    }

    fn singular(&self) -> bool {
        self.shift.is_none()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PoissonSolution {
    pub u: ScalarField,
    pub iterations: usize,
    /// Max-norm of `A u - (rhs - mean)` over the interior.
    pub residual: f64,
    /// Mean removed from the right side before solving.
    pub rhs_mean: f64,
    /// Set when `rhs_mean` was not negligible.
    pub incompatible: bool,
}

fn dot(grid: &Grid, a: &ScalarField, b: &ScalarField) -> f64 {
    grid.interior().map(|k| a[k] * b[k]).sum()
}

fn remove_mean(grid: &Grid, f: &mut ScalarField) -> f64 {
    let m = f.interior_mean(grid);
    for k in grid.interior().collect::<alloc::vec::Vec<_>>() {
        f[k] -= m;
    }
    m
}

/// Residual of `M u = -b` with `M = -A`.
fn residual_of(grid: &Grid, op: &impl NeumannOperator, u: &ScalarField, b: &ScalarField) -> ScalarField {
    let mut tmp = u.clone();
    let au = op.apply(grid, &mut tmp);
    let mut r = ScalarField::zeros(grid);
    for k in grid.interior() {
        r[k] = au[k] - b[k];
    }
    r
}

/// Solves `A u = rhs` to `max|residual| <= tol`. For a singular operator
/// the right side is replaced by `rhs - mean(rhs)` and `mean(u) = 0`.
pub fn solve_neumann(
    grid: &Grid,
    op: &impl NeumannOperator,
    rhs: &ScalarField,
    tol: f64,
    max_iter: usize,
) -> Result<PoissonSolution, SolverError> {
    let mut b = ScalarField::zeros(grid);
    for k in grid.interior() {
        b[k] = rhs[k];
    }
    let singular = op.singular();
    let rhs_mean = if singular { remove_mean(grid, &mut b) } else { 0.0 };
    let scale = rhs.interior_max_abs(grid).max(f64::MIN_POSITIVE);
    let incompatible = rhs_mean.abs() > 1e-12 * scale;
    let pin = |f: &mut ScalarField| {
        if singular {
            remove_mean(grid, f);
        }
    };

    let mut u = ScalarField::zeros(grid);
    let mut iterations = 0;
    // CG works on the positive operator M = -A with right side -b
    let mut r = b.map(|v| -v);
    // restarts recompute the true residual so roundoff drift cannot fake convergence
    loop {
        let mut res = r.interior_max_abs(grid);
        if res <= tol {
            pin(&mut u);
            return Ok(PoissonSolution { u, iterations, residual: res, rhs_mean, incompatible });
        }
        if iterations >= max_iter {
            return Err(SolverError::NotConverged { iterations, residual: res });
        }
        let mut p = r.clone();
        let mut rr = dot(grid, &r, &r);
        while iterations < max_iter {
            iterations += 1;
            let q = op.apply(grid, &mut p).map(|v| -v);
            let pq = dot(grid, &p, &q);
            if !(pq > 0.0) {
                break;
            }
            let alpha = rr / pq;
            for k in grid.interior() {
                u[k] += alpha * p[k];
                r[k] -= alpha * q[k];
            }
            pin(&mut r);
            res = r.interior_max_abs(grid);
            if res <= 0.5 * tol {
                break;
            }
            let rr_new = dot(grid, &r, &r);
            let beta = rr_new / rr;
            rr = rr_new;
            for k in grid.interior() {
                p[k] = r[k] + beta * p[k];
            }
        }
        r = residual_of(grid, op, &u, &b);
        pin(&mut r);
    }
}

/// Compact-Laplacian Neumann solve.
pub fn poisson_neumann(grid: &Grid, rhs: &ScalarField, tol: f64, max_iter: usize) -> Result<PoissonSolution, SolverError> {
    let mut sol = solve_neumann(grid, &Laplacian, rhs, tol, max_iter)?;
    sol.u.fill_ghosts(grid, ScalarBc::NEUMANN);
    Ok(sol)
}

/// Outcome of a velocity projection.
#[derive(Debug, Clone, PartialEq)]
pub struct Projection {
    pub velocity: VectorField,
    pub pressure: ScalarField,
    pub iterations: usize,
    /// `max |div v - (target - shift p)|` after correction.
    pub residual: f64,
}

/// Corrects `v_star` to `v = v_star - beta grad p` so that
/// `div v = target - shift p`.
///
/// With no shift the problem is pure Neumann: `target` is made compatible by
/// removing its mean and `p` has zero mean. `v_star` must have its no-slip
/// ghosts filled; `beta` and `shift` are even-reflected here.
pub fn project(
    grid: &Grid,
    v_star: &VectorField,
    beta: &ScalarField,
    shift: Option<&ScalarField>,
    target: &ScalarField,
    tol: f64,
    max_iter: usize,
) -> Result<Projection, SolverError> {
    let dv = ops::div(grid, v_star);
    let mut rhs = ScalarField::zeros(grid);
    for k in grid.interior() {
        rhs[k] = dv[k] - target[k];
    }
    let mut beta = beta.clone();
    beta.fill_ghosts(grid, ScalarBc::NEUMANN);
    let op = ProjectionOperator { beta: &beta, shift };
    let sol = solve_neumann(grid, &op, &rhs, tol, max_iter)?;
    let mut p = sol.u;
    p.fill_ghosts(grid, ScalarBc::NEUMANN);
    let gp = ops::grad(grid, &p);
    let mut v = v_star.clone();
    for k in grid.interior() {
        let b = beta[k];
        v.x[k] -= b * gp.x[k];
        v.y[k] -= b * gp.y[k];
    }
    v.fill_ghosts(grid, VectorBc::NoSlip);
    let dv = ops::div(grid, &v);
    let tmean = if shift.is_none() { target.interior_mean(grid) } else { 0.0 };
    let residual = grid
        .interior()
        .map(|k| {
            let t = target[k] - tmean - shift.map_or(0.0, |c| c[k] * p[k]);
            (dv[k] - t).abs()
        })
        .fold(0.0, f64::max);
    Ok(Projection { velocity: v, pressure: p, iterations: sol.iterations, residual })
}
