//! Centred second-order difference operators on the ghost-padded grid.
//!
//! Outputs are evaluated on the interior plus `GHOST - 1` ghost layers;
//! the outermost ghost layer of every output is left at zero. Inputs must
//! have their ghosts filled. In 1D every `y`/`z` derivative is zero, so
//! `curl` vanishes identically.

use crate::grid::{Grid, ScalarField, VectorField};

#[inline]
fn dx(grid: &Grid, f: &ScalarField, k: usize) -> f64 {
    (f[k + 1] - f[k - 1]) / (2.0 * grid.hx())
}

#[inline]
fn dy(grid: &Grid, f: &ScalarField, k: usize) -> f64 {
    if grid.is_2d() {
        let s = grid.ystep();
        (f[k + s] - f[k - s]) / (2.0 * grid.hy())
    } else {
        0.0
    }
}

/// Runs `body(k)` over the evaluation region.
#[inline]
fn for_eval(grid: &Grid, mut body: impl FnMut(usize)) {
    let (xr, yr) = grid.eval_ranges();
    for j in yr {
        for i in xr.clone() {
            body(grid.idx(i, j));
        }
    }
}

/// Builds a scalar field from a per-cell closure over the evaluation region.
pub fn eval_scalar(grid: &Grid, f: impl Fn(usize) -> f64) -> ScalarField {
    let mut out = ScalarField::zeros(grid);
    for_eval(grid, |k| out[k] = f(k));
    out
}

/// Builds a vector field from a per-cell closure over the evaluation region.
pub fn eval_vector(grid: &Grid, f: impl Fn(usize) -> [f64; 3]) -> VectorField {
    let mut out = VectorField::zeros(grid);
    for_eval(grid, |k| out.set(k, f(k)));
    out.enforce_dim(grid);
    out
}

/// Centred gradient at a single cell.
#[inline]
pub fn grad_at(grid: &Grid, f: &ScalarField, k: usize) -> [f64; 3] {
    [dx(grid, f, k), dy(grid, f, k), 0.0]
}

pub fn grad(grid: &Grid, f: &ScalarField) -> VectorField {
    eval_vector(grid, |k| grad_at(grid, f, k))
}

#[inline]
pub fn div_at(grid: &Grid, v: &VectorField, k: usize) -> f64 {
    dx(grid, &v.x, k) + dy(grid, &v.y, k)
}

pub fn div(grid: &Grid, v: &VectorField) -> ScalarField {
    eval_scalar(grid, |k| div_at(grid, v, k))
}

#[inline]
pub fn curl_at(grid: &Grid, v: &VectorField, k: usize) -> [f64; 3] {
    if !grid.is_2d() {
        return [0.0; 3];
    }
    [dy(grid, &v.z, k), -dx(grid, &v.z, k), dx(grid, &v.y, k) - dy(grid, &v.x, k)]
}

pub fn curl(grid: &Grid, v: &VectorField) -> VectorField {
    eval_vector(grid, |k| curl_at(grid, v, k))
}

/// Compact five-point (three-point in 1D) Laplacian.
#[inline]
pub fn lap_at(grid: &Grid, f: &ScalarField, k: usize) -> f64 {
    let hx2 = grid.hx() * grid.hx();
    let mut out = (f[k + 1] - 2.0 * f[k] + f[k - 1]) / hx2;
    if grid.is_2d() {
        let s = grid.ystep();
        out += (f[k + s] - 2.0 * f[k] + f[k - s]) / (grid.hy() * grid.hy());
    }
    out
}

pub fn lap(grid: &Grid, f: &ScalarField) -> ScalarField {
    eval_scalar(grid, |k| lap_at(grid, f, k))
}

/// Componentwise compact Laplacian of a vector field.
pub fn lap_vector(grid: &Grid, v: &VectorField) -> VectorField {
    v.map_components(|c| lap(grid, c))
}

/// Flux-form `div(c grad f)` with arithmetic face averages of `c`.
#[inline]
pub fn div_coeff_grad_at(grid: &Grid, c: &ScalarField, f: &ScalarField, k: usize) -> f64 {
    let hx2 = grid.hx() * grid.hx();
    let ce = 0.5 * (c[k] + c[k + 1]);
    let cw = 0.5 * (c[k] + c[k - 1]);
    let mut out = (ce * (f[k + 1] - f[k]) - cw * (f[k] - f[k - 1])) / hx2;
    if grid.is_2d() {
        let s = grid.ystep();
        let cn = 0.5 * (c[k] + c[k + s]);
        let cs = 0.5 * (c[k] + c[k - s]);
        out += (cn * (f[k + s] - f[k]) - cs * (f[k] - f[k - s])) / (grid.hy() * grid.hy());
    }
    out
}

pub fn div_coeff_grad(grid: &Grid, c: &ScalarField, f: &ScalarField) -> ScalarField {
    eval_scalar(grid, |k| div_coeff_grad_at(grid, c, f, k))
}

/// `div(a (x) a)`: row `r` is `sum_c d_c (a_r a_c)`.
pub fn div_outer(grid: &Grid, a: &VectorField) -> VectorField {
    let prod = |r: usize, c: usize| -> ScalarField {
        let ar = a.components()[r];
        let ac = a.components()[c];
        ar.zip_map(ac, |u, v| u * v)
    };
    // only x/y derivatives are nonzero
    let t: [[ScalarField; 2]; 3] = core::array::from_fn(|r| core::array::from_fn(|c| prod(r, c)));
    eval_vector(grid, |k| core::array::from_fn(|r| dx(grid, &t[r][0], k) + dy(grid, &t[r][1], k)))
}

/// `(v . grad) f`.
#[inline]
pub fn advect_at(grid: &Grid, v: &VectorField, f: &ScalarField, k: usize) -> f64 {
    v.x[k] * dx(grid, f, k) + v.y[k] * dy(grid, f, k)
}

pub fn advect(grid: &Grid, v: &VectorField, f: &ScalarField) -> ScalarField {
    eval_scalar(grid, |k| advect_at(grid, v, f, k))
}

pub fn advect_vector(grid: &Grid, v: &VectorField, w: &VectorField) -> VectorField {
    w.map_components(|c| advect(grid, v, c))
}

/// Full contraction `grad(v) : (a (x) a) = sum_ij (d_i v_j) a_i a_j`.
#[inline]
pub fn grad_contract_outer_at(grid: &Grid, v: &VectorField, a: &VectorField, k: usize) -> f64 {
    let ai = a.at(k);
    let mut out = 0.0;
    for (j, vj) in v.components().into_iter().enumerate() {
        out += (dx(grid, vj, k) * ai[0] + dy(grid, vj, k) * ai[1]) * ai[j];
    }
    out
}

/// Discrete boundary term of summation by parts for centred stencils:
///
/// `sum_interior (f div v + grad f . v) dV = sum_faces (f_in v_gh + f_gh v_in)/2 . n dA`
///
/// which vanishes when `f` is even and `v . n` odd across every wall.
pub fn sbp_boundary_term(grid: &Grid, f: &ScalarField, v: &VectorField) -> f64 {
    let nx = grid.nx() as isize;
    let ny = grid.ny() as isize;
    let face = |kin: usize, kgh: usize, comp: &ScalarField| 0.5 * (f[kin] * comp[kgh] + f[kgh] * comp[kin]);
    let mut total = 0.0;
    let ax = grid.hy();
    for j in 0..ny {
        total -= face(grid.idx(0, j), grid.idx(-1, j), &v.x) * ax;
        total += face(grid.idx(nx - 1, j), grid.idx(nx, j), &v.x) * ax;
    }
    if grid.is_2d() {
        let ay = grid.hx();
        for i in 0..nx {
            total -= face(grid.idx(i, 0), grid.idx(i, -1), &v.y) * ay;
            total += face(grid.idx(i, ny - 1), grid.idx(i, ny), &v.y) * ay;
        }
    }
    total
}

/// Left side of the summation-by-parts identity.
pub fn sbp_volume_term(grid: &Grid, f: &ScalarField, v: &VectorField) -> f64 {
    grid.interior()
        .map(|k| {
            let g = grad_at(grid, f, k);
            f[k] * div_at(grid, v, k) + g[0] * v.x[k] + g[1] * v.y[k]
        })
        .sum::<f64>()
        * grid.cell_volume()
}
