//! Power balances, first-law residual, entropy production and boundary
//! fluxes evaluated from pairs of snapshots.
//!
//! Time derivatives are backward differences between the two snapshots the
//! stepper produced, plus `v_n . grad` in advective mode. External powers
//! are divergences of face fluxes built from face-interpolated fields, so
//! their domain integrals telescope to the wall fluxes exactly.

use crate::dynamics::{MaterialDerivative, StepOutcome};
use crate::error::ThermoError;
use crate::grid::{Grid, ScalarField, VectorField};
use crate::ops;
use crate::params::ModelParams;
use crate::state::FieldState;
use crate::thermo;

/// Wall-face audit. Each entry is the sum over boundary faces of
/// `|flux . n| dA`, so cancellation between walls cannot hide a leak.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct BoundaryFluxes {
    /// Heat flux `q . n`.
    pub q: f64,
    /// `(rho phi_dot grad(phi) / kappa^2) . n`.
    pub phase: f64,
    /// `p v_n . n`.
    pub pvn: f64,
    /// The bracket of the external superfluid power, dotted with `n`.
    pub vs: f64,
    /// Tangential trace of `v_s`; not constrained to vanish.
    pub vs_tangential: f64,
}

impl BoundaryFluxes {
    /// Largest of the entries that must vanish.
    pub fn max_constrained(&self) -> f64 {
        self.q.max(self.phase).max(self.pvn).max(self.vs)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DiagnosticsReport {
    pub t: f64,
    pub e_total: f64,
    pub mass_total: f64,
    pub p_i_phi: f64,
    pub p_e_phi: f64,
    pub p_i_vs: f64,
    pub p_e_vs: f64,
    pub first_law_residual: f64,
    pub entropy_production_min: f64,
    pub constraint_residual: f64,
    pub boundary_flux: BoundaryFluxes,
}

/// Material time derivatives reconstructed from two snapshots, sampled on
/// the interior and the inner ghost layers.
#[derive(Debug, Clone, PartialEq)]
pub struct Dots {
    pub phi: ScalarField,
    pub v_s: VectorField,
    pub v_n: VectorField,
    pub theta: ScalarField,
}

impl Dots {
    pub fn zeros(grid: &Grid) -> Self {
        Self {
            phi: ScalarField::zeros(grid),
            v_s: VectorField::zeros(grid),
            v_n: VectorField::zeros(grid),
            theta: ScalarField::zeros(grid),
        }
    }
}

/// `(f - f_prev)/dt`, plus `v_n . grad f` in advective mode.
pub fn material_difference(
    grid: &Grid,
    f: &ScalarField,
    f_prev: &ScalarField,
    v_n: &VectorField,
    dt: f64,
    mode: MaterialDerivative,
) -> ScalarField {
    ops::eval_scalar(grid, |k| {
        let d = (f[k] - f_prev[k]) / dt;
        match mode {
            MaterialDerivative::Partial => d,
            MaterialDerivative::Advective => d + ops::advect_at(grid, v_n, f, k),
        }
    })
}

fn material_difference_vec(grid: &Grid, v: &VectorField, vp: &VectorField, vn: &VectorField, dt: f64, mode: MaterialDerivative) -> VectorField {
    VectorField {
        x: material_difference(grid, &v.x, &vp.x, vn, dt, mode),
        y: material_difference(grid, &v.y, &vp.y, vn, dt, mode),
        z: material_difference(grid, &v.z, &vp.z, vn, dt, mode),
    }
}

pub fn backward_dots(grid: &Grid, st: &FieldState, prev: &FieldState, dt: f64, mode: MaterialDerivative) -> Dots {
    Dots {
        phi: material_difference(grid, &st.phi, &prev.phi, &st.v_n, dt, mode),
        v_s: material_difference_vec(grid, &st.v_s, &prev.v_s, &st.v_n, dt, mode),
        v_n: material_difference_vec(grid, &st.v_n, &prev.v_n, &st.v_n, dt, mode),
        theta: material_difference(grid, &st.theta, &prev.theta, &st.v_n, dt, mode),
    }
}

#[inline]
fn dot3(a: [f64; 3], b: [f64; 3]) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

/// Gradient-plus-well energy `|grad phi|^2 / (2 kappa^2) + theta_lambda F(phi)`.
fn structure_energy(grid: &Grid, phi: &ScalarField, params: &ModelParams) -> ScalarField {
    let ik2 = params.inv_kappa2();
    ops::eval_scalar(grid, |k| {
        let g = ops::grad_at(grid, phi, k);
        0.5 * ik2 * dot3(g, g) + params.theta_lambda * thermo::potential_f(phi[k])
    })
}

/// `v_s_dot + grad phi_s - grad theta` at a cell.
fn drive_at(grid: &Grid, st: &FieldState, vs_dot: &VectorField, k: usize) -> [f64; 3] {
    let gps = ops::grad_at(grid, &st.phi_s, k);
    let gt = ops::grad_at(grid, &st.theta, k);
    let vd = vs_dot.at(k);
    core::array::from_fn(|c| vd[c] + gps[c] - gt[c])
}

struct PowerFields {
    p_i_phi: ScalarField,
    p_i_vs: ScalarField,
    rho_h: ScalarField,
}

fn power_fields(grid: &Grid, st: &FieldState, prev: &FieldState, dots: &Dots, dt: f64, params: &ModelParams, mode: MaterialDerivative) -> PowerFields {
    let ik2 = params.inv_kappa2();
    let k2 = params.kappa * params.kappa;
    let b = structure_energy(grid, &st.phi, params);
    let bp = structure_energy(grid, &prev.phi, params);
    let b_dot = material_difference(grid, &b, &bp, &st.v_n, dt, mode);
    let vn2 = ops::eval_scalar(grid, |k| st.v_n.norm2(k));
    let vn2p = ops::eval_scalar(grid, |k| prev.v_n.norm2(k));
    let vn2_dot = material_difference(grid, &vn2, &vn2p, &st.v_n, dt, mode);
    let gphi = ops::grad(grid, &st.phi);
    let dv = ops::div(grid, &st.v_n);
    let mut p_i_phi = ScalarField::zeros(grid);
    let mut p_i_vs = ScalarField::zeros(grid);
    let mut rho_h = ScalarField::zeros(grid);
    for k in grid.interior() {
        let (rho, phi, th) = (st.rho[k], st.phi[k], st.theta[k]);
        let w = rho * phi * phi;
        let pd = dots.phi[k];
        let vs = st.v_s.at(k);
        let vn = st.v_n.at(k);
        let gp = ops::grad_at(grid, &st.p, k);
        let gt = ops::grad_at(grid, &st.theta, k);
        let stress = ik2 * ops::grad_contract_outer_at(grid, &st.v_n, &gphi, k);
        let drive = drive_at(grid, st, &dots.v_s, k);
        let d2 = dot3(drive, drive);
        let visc = params.nu * dv[k] * dv[k];
        let ps2 = params.tau * k2 * w * st.phi_s[k] * st.phi_s[k];
        let rel_gt = w * (dot3(vs, gt) - dot3(vn, gt));
        p_i_phi[k] = rho * b_dot[k] + rho * (th + dot3(vs, vs) - dot3(vn, vn)) * phi * pd - dot3(vn, gp)
            + params.tau * rho * pd * pd
            + stress;
        p_i_vs[k] = d2 + 0.5 * rho * vn2_dot[k] - w * dot3(vn, dots.v_n.at(k)) + visc + dot3(vn, gp) - stress
            + w * dot3(vs, dots.v_s.at(k))
            + ps2
            - rel_gt;
        rho_h[k] = rho * params.c0 * dots.theta[k] - rho * th * phi * pd - params.tau * rho * pd * pd - d2 - visc - ps2 + rel_gt;
    }
    PowerFields { p_i_phi, p_i_vs, rho_h }
}

/// Geometry of one face between storage cells `l` and `r` along `axis`.
#[derive(Clone, Copy)]
struct Face {
    l: usize,
    r: usize,
    axis: usize,
}

fn favg(f: &ScalarField, fc: Face) -> f64 {
    0.5 * (f[fc.l] + f[fc.r])
}

fn fvec(v: &VectorField, fc: Face) -> [f64; 3] {
    let (a, b) = (v.at(fc.l), v.at(fc.r));
    core::array::from_fn(|c| 0.5 * (a[c] + b[c]))
}

/// Face gradient: compact normal difference, averaged centred tangential one.
fn fgrad(grid: &Grid, f: &ScalarField, fc: Face) -> [f64; 3] {
    let (gl, gr) = (ops::grad_at(grid, f, fc.l), ops::grad_at(grid, f, fc.r));
    let mut g: [f64; 3] = core::array::from_fn(|c| 0.5 * (gl[c] + gr[c]));
    let h = if fc.axis == 0 { grid.hx() } else { grid.hy() };
    g[fc.axis] = (f[fc.r] - f[fc.l]) / h;
    g
}

fn cross(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    [a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]]
}

/// Face fluxes along the face normal `e_axis`.
struct FaceFluxes {
    phase: f64,
    pvn: f64,
    vs: f64,
    q: f64,
    vs_tangential: f64,
}

struct FluxCtx<'a> {
    grid: &'a Grid,
    st: &'a FieldState,
    dots: &'a Dots,
    params: &'a ModelParams,
    weight: ScalarField,
    div_vn: ScalarField,
}

impl<'a> FluxCtx<'a> {
    fn new(grid: &'a Grid, st: &'a FieldState, dots: &'a Dots, params: &'a ModelParams) -> Self {
        let weight = st.rho.zip_map(&st.phi, |r, p| r * p * p);
        let div_vn = ops::div(grid, &st.v_n);
        Self { grid, st, dots, params, weight, div_vn }
    }

    fn at(&self, fc: Face) -> FaceFluxes {
        let (g, st, p) = (self.grid, self.st, self.params);
        let a = fc.axis;
        let ik2 = p.inv_kappa2();
        let gphi = fgrad(g, &st.phi, fc);
        let vn = fvec(&st.v_n, fc);
        let vs = fvec(&st.v_s, fc);
        let phase = ik2 * favg(&st.rho, fc) * favg(&self.dots.phi, fc) * gphi[a];
        let pvn = favg(&st.p, fc) * vn[a];
        let gps = fgrad(g, &st.phi_s, fc);
        let gt = fgrad(g, &st.theta, fc);
        let vsd = fvec(&self.dots.v_s, fc);
        let drive: [f64; 3] = core::array::from_fn(|c| vsd[c] + gps[c] - gt[c]);
        let vs_flux = cross(vn, drive)[a] - p.nu * vn[a] * favg(&self.div_vn, fc)
            + ik2 * gphi[a] * dot3(gphi, vn)
            + favg(&self.weight, fc) * vs[a] * favg(&st.phi_s, fc);
        let th = favg(&st.theta, fc);
        let q = -p.k0(th) * gt[a] - favg(&self.weight, fc) * th * (vs[a] - vn[a]);
        let vs_tangential = (0..3).filter(|&c| c != a).map(|c| vs[c].abs()).sum();
        FaceFluxes { phase, pvn, vs: vs_flux, q, vs_tangential }
    }
}

/// Faces of the interior cell `(i, j)` on the high side along each axis, and
/// on the low side; returned as (low, high) pairs per active axis.
fn cell_faces(grid: &Grid, i: isize, j: isize) -> impl Iterator<Item = (Face, Face, f64)> + '_ {
    let k = grid.idx(i, j);
    let axes = if grid.is_2d() { 2 } else { 1 };
    (0..axes).map(move |a| {
        let (lo, hi, h) = if a == 0 {
            (grid.idx(i - 1, j), grid.idx(i + 1, j), grid.hx())
        } else {
            (grid.idx(i, j - 1), grid.idx(i, j + 1), grid.hy())
        };
        (Face { l: lo, r: k, axis: a }, Face { l: k, r: hi, axis: a }, h)
    })
}

/// External powers as face-flux divergences:
/// `P_e_phi = div((rho phi_dot grad phi)/kappa^2 - p v_n)` and
/// `P_e_vs = -div(bracket) + rho g . v_n`.
fn external_power_fields(grid: &Grid, st: &FieldState, dots: &Dots, params: &ModelParams) -> (ScalarField, ScalarField) {
    let ctx = FluxCtx::new(grid, st, dots, params);
    let mut pe_phi = ScalarField::zeros(grid);
    let mut pe_vs = ScalarField::zeros(grid);
    for (i, j, k) in grid.interior_cells() {
        let (mut dphi, mut dvs) = (0.0, 0.0);
        for (lo, hi, h) in cell_faces(grid, i, j) {
            let (fl, fh) = (ctx.at(lo), ctx.at(hi));
            dphi += ((fh.phase - fh.pvn) - (fl.phase - fl.pvn)) / h;
            dvs += (fh.vs - fl.vs) / h;
        }
        pe_phi[k] = dphi;
        pe_vs[k] = -dvs + st.rho[k] * dot3(params.g.at(k), st.v_n.at(k));
    }
    (pe_phi, pe_vs)
}

/// Domain integrals `(P_i_phi, P_e_phi)`.
pub fn phase_powers(grid: &Grid, st: &FieldState, prev: &FieldState, dt: f64, params: &ModelParams, mode: MaterialDerivative) -> (f64, f64) {
    let dots = backward_dots(grid, st, prev, dt, mode);
    let pf = power_fields(grid, st, prev, &dots, dt, params, mode);
    let (pe, _) = external_power_fields(grid, st, &dots, params);
    (pf.p_i_phi.integral(grid), pe.integral(grid))
}

/// Domain integrals `(P_i_vs, P_e_vs)`.
pub fn vs_powers(grid: &Grid, st: &FieldState, prev: &FieldState, dt: f64, params: &ModelParams, mode: MaterialDerivative) -> (f64, f64) {
    let dots = backward_dots(grid, st, prev, dt, mode);
    let pf = power_fields(grid, st, prev, &dots, dt, params, mode);
    let (_, pe) = external_power_fields(grid, st, &dots, params);
    (pf.p_i_vs.integral(grid), pe.integral(grid))
}

fn energy_field(grid: &Grid, st: &FieldState, params: &ModelParams) -> Result<ScalarField, ThermoError> {
    let mut out = ScalarField::zeros(grid);
    let (xr, yr) = grid.eval_ranges();
    for j in yr {
        for i in xr.clone() {
            let k = grid.idx(i, j);
            let g = ops::grad_at(grid, &st.phi, k);
            out[k] = thermo::total_energy_density(st.phi[k], g, st.theta[k], st.v_s.at(k), st.v_n.at(k), params)?;
        }
    }
    Ok(out)
}

/// `int rho E dv`.
pub fn total_energy(grid: &Grid, st: &FieldState, params: &ModelParams) -> Result<f64, ThermoError> {
    let e = energy_field(grid, st, params)?;
    Ok(grid.interior().map(|k| st.rho[k] * e[k]).sum::<f64>() * grid.cell_volume())
}

/// `int rho eta dv`.
pub fn total_entropy(grid: &Grid, st: &FieldState, params: &ModelParams) -> Result<f64, ThermoError> {
    let mut s = 0.0;
    for k in grid.interior() {
        s += st.rho[k] * thermo::entropy_density(st.phi[k], st.theta[k], params)?;
    }
    Ok(s * grid.cell_volume())
}

/// `int (rho E_dot - P_i_phi - P_i_vs - rho h) dv` with `rho h` from the heat-rate balance.
pub fn first_law_residual(
    grid: &Grid,
    st: &FieldState,
    prev: &FieldState,
    dt: f64,
    params: &ModelParams,
    mode: MaterialDerivative,
) -> Result<f64, ThermoError> {
    let dots = backward_dots(grid, st, prev, dt, mode);
    let pf = power_fields(grid, st, prev, &dots, dt, params, mode);
    let e = energy_field(grid, st, params)?;
    let ep = energy_field(grid, prev, params)?;
    let e_dot = material_difference(grid, &e, &ep, &st.v_n, dt, mode);
    let total: f64 = grid
        .interior()
        .map(|k| st.rho[k] * e_dot[k] - pf.p_i_phi[k] - pf.p_i_vs[k] - pf.rho_h[k])
        .sum();
    Ok(total * grid.cell_volume())
}

/// Dissipation `sigma = tau rho phi_dot^2 + |v_s_dot + grad phi_s - grad theta|^2
/// + nu (div v_n)^2 + tau kappa^2 rho phi^2 phi_s^2 + k0 |grad theta|^2 / theta`.
pub fn entropy_production(
    grid: &Grid,
    st: &FieldState,
    phi_dot: &ScalarField,
    vs_dot: &VectorField,
    params: &ModelParams,
) -> ScalarField {
    let dv = ops::div(grid, &st.v_n);
    let k2 = params.kappa * params.kappa;
    let mut out = ScalarField::zeros(grid);
    for k in grid.interior() {
        let (rho, phi, th, pd) = (st.rho[k], st.phi[k], st.theta[k], phi_dot[k]);
        let drive = drive_at(grid, st, vs_dot, k);
        let gt = ops::grad_at(grid, &st.theta, k);
        out[k] = params.tau * rho * pd * pd
            + dot3(drive, drive)
            + params.nu * dv[k] * dv[k]
            + params.tau * k2 * rho * phi * phi * st.phi_s[k] * st.phi_s[k]
            + params.k0(th) / th * dot3(gt, gt);
    }
    out
}

/// Boundary audit with the given rates (only their wall traces matter).
pub fn boundary_flux_audit(grid: &Grid, st: &FieldState, dots: &Dots, params: &ModelParams) -> BoundaryFluxes {
    let ctx = FluxCtx::new(grid, st, dots, params);
    let mut out = BoundaryFluxes::default();
    let mut add = |fc: Face, area: f64| {
        let f = ctx.at(fc);
        out.q += f.q.abs() * area;
        out.phase += f.phase.abs() * area;
        out.pvn += f.pvn.abs() * area;
        out.vs += f.vs.abs() * area;
        out.vs_tangential += f.vs_tangential * area;
    };
    let (nx, ny) = (grid.nx() as isize, grid.ny() as isize);
    for j in 0..ny {
        add(Face { l: grid.idx(-1, j), r: grid.idx(0, j), axis: 0 }, grid.hy());
        add(Face { l: grid.idx(nx - 1, j), r: grid.idx(nx, j), axis: 0 }, grid.hy());
    }
    if grid.is_2d() {
        for i in 0..nx {
            add(Face { l: grid.idx(i, -1), r: grid.idx(i, 0), axis: 1 }, grid.hx());
            add(Face { l: grid.idx(i, ny - 1), r: grid.idx(i, ny), axis: 1 }, grid.hx());
        }
    }
    out
}

/// Full report for an accepted step from `prev` to `out.state`.
///
/// Entropy production uses the midpoint state and rates that drove the update.
pub fn report(
    grid: &Grid,
    prev: &FieldState,
    out: &StepOutcome,
    dt: f64,
    t: f64,
    params: &ModelParams,
    mode: MaterialDerivative,
) -> Result<DiagnosticsReport, ThermoError> {
    let st = &out.state;
    let dots = backward_dots(grid, st, prev, dt, mode);
    let pf = power_fields(grid, st, prev, &dots, dt, params, mode);
    let (pe_phi, pe_vs) = external_power_fields(grid, st, &dots, params);
    let sigma = entropy_production(grid, &out.midpoint, &out.rates.phi_dot, &out.rates.vs_dot, params);
    Ok(DiagnosticsReport {
        t,
        e_total: total_energy(grid, st, params)?,
        mass_total: st.rho.integral(grid),
        p_i_phi: pf.p_i_phi.integral(grid),
        p_e_phi: pe_phi.integral(grid),
        p_i_vs: pf.p_i_vs.integral(grid),
        p_e_vs: pe_vs.integral(grid),
        first_law_residual: first_law_residual(grid, st, prev, dt, params, mode)?,
        entropy_production_min: sigma.interior_min(grid),
        constraint_residual: out.info.constraint_residual,
        boundary_flux: boundary_flux_audit(grid, st, &dots, params),
    })
}

/// Entropy-jump estimate across `theta_c` from samples `(theta, S)` sorted by
/// `theta`: each side is extrapolated linearly from its two nearest samples.
/// Returns `None` without two samples strictly on each side.
pub fn entropy_jump(samples: &[(f64, f64)], theta_c: f64) -> Option<f64> {
    let below: alloc::vec::Vec<_> = samples.iter().filter(|s| s.0 < theta_c).collect();
    let above: alloc::vec::Vec<_> = samples.iter().filter(|s| s.0 > theta_c).collect();
    if below.len() < 2 || above.len() < 2 {
        return None;
    }
    let line = |a: &(f64, f64), b: &(f64, f64)| a.1 + (b.1 - a.1) * (theta_c - a.0) / (b.0 - a.0);
    let l = line(below[below.len() - 2], below[below.len() - 1]);
    let r = line(above[0], above[1]);
    Some((r - l).abs())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::{step, StepConfig};
    use crate::state::{new_state, Init, Profile, RandomSmooth, UniformInit};
    use core::f64::consts::PI;

    fn random_state(g: &Grid, seed: u64) -> FieldState {
        let r = RandomSmooth { seed, modes: 2, amp_phi: 0.1, amp_theta: 0.05, amp_rho: 0.05, amp_vs: 0.1, amp_vn: 0.05 };
        let base = UniformInit { phi: 0.4, theta: 1.5, ..Default::default() };
        new_state(g, &Init::Profile { base, profile: Profile::RandomSmooth(r) }, 0.0).unwrap()
    }

    #[test]
    fn stationary_state_has_zero_powers() {
        let g = Grid::new_1d(8, 0.2).unwrap();
        let params = ModelParams::default();
        let st = new_state(&g, &Init::Uniform(UniformInit { phi: 0.6, theta: 1.0, ..Default::default() }), 0.0).unwrap();
        let mode = MaterialDerivative::Advective;
        assert_eq!(phase_powers(&g, &st, &st, 0.1, &params, mode), (0.0, 0.0));
        assert_eq!(vs_powers(&g, &st, &st, 0.1, &params, mode), (0.0, 0.0));
        assert_eq!(first_law_residual(&g, &st, &st, 0.1, &params, mode).unwrap(), 0.0);
    }

    #[test]
    fn external_powers_integrate_to_body_force_work() {
        for g in [Grid::new_1d(24, 0.2).unwrap(), Grid::new_2d(12, 10, 0.2, 0.25).unwrap()] {
            let params = ModelParams { nu: 0.3, g: crate::params::BodyForce::Uniform([0.2, -0.1, 0.05]), ..Default::default() };
            let a = random_state(&g, 3);
            let mut b = random_state(&g, 4);
            b.p = ScalarField::from_fn(&g, |x, y| libm::cos(x) + y);
            b.apply_bcs(&g, 0.0);
            let mode = MaterialDerivative::Advective;
            let (_, pe_phi) = phase_powers(&g, &b, &a, 0.05, &params, mode);
            let (_, pe_vs) = vs_powers(&g, &b, &a, 0.05, &params, mode);
            let work: f64 = g.interior().map(|k| b.rho[k] * dot3(params.g.at(k), b.v_n.at(k))).sum::<f64>() * g.cell_volume();
            assert!(pe_phi.abs() < 1e-12, "{pe_phi}");
            assert!((pe_vs - work).abs() < 1e-12, "{pe_vs} {work}");
        }
    }

    #[test]
    fn sigma_single_term() {
        let g = Grid::new_1d(4, 0.5).unwrap();
        let params = ModelParams { tau: 2.0, nu: 0.0, ..Default::default() };
        let st = new_state(&g, &Init::Uniform(UniformInit { rho: 1.5, ..Default::default() }), 0.0).unwrap();
        let s = entropy_production(&g, &st, &ScalarField::constant(&g, 1.0), &VectorField::zeros(&g), &params);
        assert!((s[g.idx(2, 0)] - 3.0).abs() < 1e-15);
    }

    #[test]
    fn sigma_nonnegative_on_random_states() {
        let g = Grid::new_2d(8, 8, 0.3, 0.3).unwrap();
        let params = ModelParams { nu: 0.5, ..Default::default() };
        for seed in 0..10 {
            let st = random_state(&g, seed);
            let pd = ScalarField::from_fn(&g, |x, y| libm::sin(x * seed as f64 + y));
            let vd = VectorField::from_fn(&g, |x, y| [x - y, libm::cos(x), y]);
            assert!(entropy_production(&g, &st, &pd, &vd, &params).interior_min(&g) >= 0.0);
        }
    }

    #[test]
    fn wall_audit_zero_then_detects_violation() {
        let g = Grid::new_2d(10, 8, 0.25, 0.25).unwrap();
        let params = ModelParams { nu: 0.2, ..Default::default() };
        let mut st = random_state(&g, 11);
        st.p = ScalarField::constant(&g, 1.0);
        let dots = Dots { phi: ScalarField::constant(&g, 0.3), ..Dots::zeros(&g) };
        let audit = boundary_flux_audit(&g, &st, &dots, &params);
        assert!(audit.max_constrained() < 1e-14, "{audit:?}");
        // v_n . n = 1 on the x = 0 wall
        for j in 0..g.ny() as isize {
            let (kg, ki) = (g.idx(-1, j), g.idx(0, j));
            st.v_n.x[kg] = 2.0 - st.v_n.x[ki];
        }
        let bad = boundary_flux_audit(&g, &st, &dots, &params);
        assert!((bad.pvn - g.ly()).abs() < 1e-12, "{}", bad.pvn);
    }

    #[test]
    fn vorticity_datum_changes_tangential_trace_only() {
        let g = Grid::new_2d(8, 8, 0.25, 0.25).unwrap();
        let params = ModelParams::default();
        let a = random_state(&g, 5);
        let mut b = a.clone();
        b.apply_bcs(&g, 0.7);
        let dots = Dots::zeros(&g);
        let fa = boundary_flux_audit(&g, &a, &dots, &params);
        let fb = boundary_flux_audit(&g, &b, &dots, &params);
        assert!((fa.vs_tangential - fb.vs_tangential).abs() > 1e-3);
        assert!(fb.q < 1e-14);
    }

    #[test]
    fn first_law_residual_shrinks_under_refinement() {
        let run = |n: usize, dt: f64| {
            let g = Grid::new_1d(n, 8.0 / n as f64).unwrap();
            let params = ModelParams { nu: 0.5, ..Default::default() };
            let mut st = random_state(&g, 2);
            st.phi = ScalarField::from_fn(&g, |x, _| 0.4 + 0.1 * libm::cos(PI * x / 8.0));
            st.apply_bcs(&g, 0.0);
            let cfg = StepConfig { dt, ..Default::default() };
            // the first steps absorb the inconsistency of the initial p and v_n,
            // so the residual is read at a fixed final time
            let mut last = 0.0;
            let steps = (0.2 / dt).round() as u64;
            for i in 0..steps {
                let out = step(&g, &st, &cfg, &params, i).unwrap();
                last = first_law_residual(&g, &out.state, &st, dt, &params, cfg.material_derivative).unwrap();
                st = out.state;
            }
            f64::abs(last)
        };
        let r1 = run(32, 0.004);
        let r2 = run(64, 0.002);
        let r3 = run(128, 0.001);
        assert!(r1 > r2 && r2 > r3 && r1 / r3 >= 3.0, "{r1} {r2} {r3}");
    }

    #[test]
    fn entropy_jump_of_continuous_and_discontinuous_curves() {
        let ramp: alloc::vec::Vec<_> = (0..20).map(|i| {
            let t = 1.0 + 0.1 * i as f64;
            (t, if t < 1.95 { 2.0 * t } else { 2.0 * t + 0.5 })
        }).collect();
        assert!((entropy_jump(&ramp, 1.95).unwrap() - 0.5).abs() < 1e-12);
        let smooth: alloc::vec::Vec<_> = (0..20).map(|i| (1.0 + 0.1 * i as f64, 3.0)).collect();
        assert_eq!(entropy_jump(&smooth, 1.95), Some(0.0));
    }
}
