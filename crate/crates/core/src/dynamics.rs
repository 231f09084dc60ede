//! Explicit midpoint integration of the coupled phase / two-velocity /
//! density / temperature system, with a pressure projection enforcing
//! `div v_n = lambda rho phi phi_dot`.

use crate::error::StepError;
use crate::grid::{Grid, ScalarBc, ScalarField, VectorBc, VectorField};
use crate::ops;
use crate::params::ModelParams;
use crate::poisson;
use crate::state::FieldState;

/// Interpretation of overdots.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum MaterialDerivative {
    /// `f_dot = d_t f + v_n . grad f`.
    #[default]
    Advective,
    /// `f_dot = d_t f`.
    Partial,
}

/// Fields held fixed by the stepper (used for homogeneous studies).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct Pins {
    pub theta: bool,
    pub rho: bool,
    /// Freezes `v_s`, `v_n` and `p`; the projection is skipped.
    pub velocities: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepConfig {
    pub dt: f64,
    pub t_end: f64,
    /// Bound on `max |div v_n - lambda rho phi phi_dot|` after projection.
    pub projection_tol: f64,
    pub material_derivative: MaterialDerivative,
    pub record_every: usize,
    /// Abort threshold for `min rho (1 - phi^2)`.
    pub eps_mass: f64,
    pub max_projection_iter: usize,
    pub pins: Pins,
}

impl Default for StepConfig {
    fn default() -> Self {
        Self {
            dt: 1e-3,
            t_end: 1.0,
            projection_tol: 1e-8,
            material_derivative: MaterialDerivative::Advective,
            record_every: 10,
            eps_mass: 1e-8,
            max_projection_iter: 20_000,
            pins: Pins::default(),
        }
    }
}

impl StepConfig {
    pub fn validate(&self) -> Result<(), StepError> {
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(StepError::Config("dt must be positive"));
        }
        if !(self.projection_tol > 0.0) {
            return Err(StepError::Config("projection_tol must be positive"));
        }
        if !(self.t_end >= 0.0) {
            return Err(StepError::Config("t_end must be nonnegative"));
        }
        if self.record_every == 0 {
            return Err(StepError::Config("record_every must be at least 1"));
        }
        Ok(())
    }
}

/// `m = theta + lambda p + |v_s|^2 - |v_n|^2`.
pub fn tilt_m(grid: &Grid, st: &FieldState, params: &ModelParams) -> ScalarField {
    ops::eval_scalar(grid, |k| st.theta[k] + params.lambda * st.p[k] + st.v_s.norm2(k) - st.v_n.norm2(k))
}

/// Material rate `phi_dot` from the phase equation.
pub fn phase_rhs(grid: &Grid, st: &FieldState, m: &ScalarField, params: &ModelParams) -> ScalarField {
    let ik2 = params.inv_kappa2();
    let tl = params.theta_lambda;
    let mut out = ScalarField::zeros(grid);
    for k in grid.interior() {
        let (phi, rho) = (st.phi[k], st.rho[k]);
        let diff = ik2 * ops::div_coeff_grad_at(grid, &st.rho, &st.phi, k);
        out[k] = (diff - rho * tl * phi * (phi * phi - 1.0) - rho * m[k] * phi) / (params.tau * rho);
    }
    out
}

/// Algebraic superfluid pressure, `-div(rho phi^2 v_s) / (tau kappa^2 (rho phi^2 + eps))`.
pub fn solve_phi_s(grid: &Grid, st: &FieldState, params: &ModelParams) -> ScalarField {
    let w = superfluid_weight(grid, st);
    let flux = st.v_s.scaled_by(&w);
    let k2 = params.kappa * params.kappa;
    let mut out = ScalarField::zeros(grid);
    for k in grid.interior() {
        out[k] = -ops::div_at(grid, &flux, k) / (params.tau * k2 * (w[k] + params.eps_reg));
    }
    out.fill_ghosts(grid, ScalarBc::NEUMANN);
    out
}

/// `rho phi^2` on every stored cell.
pub fn superfluid_weight(_grid: &Grid, st: &FieldState) -> ScalarField {
    st.rho.zip_map(&st.phi, |r, p| r * p * p)
}

/// `v_s_dot = -grad phi_s - curl v_n - rho phi^2 v_s + grad theta`.
pub fn vs_rhs(grid: &Grid, st: &FieldState, _params: &ModelParams) -> VectorField {
    let mut out = VectorField::zeros(grid);
    for k in grid.interior() {
        let gps = ops::grad_at(grid, &st.phi_s, k);
        let cv = ops::curl_at(grid, &st.v_n, k);
        let gt = ops::grad_at(grid, &st.theta, k);
        let w = st.rho[k] * st.phi[k] * st.phi[k];
        let vs = st.v_s.at(k);
        out.set(k, core::array::from_fn(|c| -gps[c] - cv[c] - w * vs[c] + gt[c]));
    }
    out.enforce_dim(grid);
    out
}

/// Every normal-velocity force except `-grad p`.
pub fn vn_force(grid: &Grid, st: &FieldState, params: &ModelParams) -> VectorField {
    let cc = ops::curl(grid, &ops::curl(grid, &st.v_n));
    let gd = ops::grad(grid, &ops::div(grid, &st.v_n));
    let gphi = ops::grad(grid, &st.phi);
    let dout = ops::div_outer(grid, &gphi);
    let w = superfluid_weight(grid, st);
    let cw = ops::curl(grid, &st.v_s.scaled_by(&w));
    let ik2 = params.inv_kappa2();
    let mut out = VectorField::zeros(grid);
    for k in grid.interior() {
        let gt = ops::grad_at(grid, &st.theta, k);
        let g = params.g.at(k);
        let (a, b, d, e) = (cc.at(k), gd.at(k), dout.at(k), cw.at(k));
        let rho = st.rho[k];
        out.set(k, core::array::from_fn(|c| {
            -a[c] + params.nu * b[c] - ik2 * d[c] - w[k] * gt[c] - e[c] + rho * g[c]
        }));
    }
    out.enforce_dim(grid);
    out
}

/// `rho (1 - phi^2)` and its interior minimum.
pub fn normal_mass(grid: &Grid, st: &FieldState) -> (ScalarField, f64) {
    let mass = st.rho.zip_map(&st.phi, |r, p| r * (1.0 - p * p));
    let min = mass.interior_min(grid);
    (mass, min)
}

/// Material rate `rho_dot = -rho div((1 - phi^2) v_n + phi^2 v_s)`.
pub fn continuity_rhs(grid: &Grid, st: &FieldState) -> ScalarField {
    let mix = VectorField {
        x: mixture_component(&st.phi, &st.v_n.x, &st.v_s.x),
        y: mixture_component(&st.phi, &st.v_n.y, &st.v_s.y),
        z: mixture_component(&st.phi, &st.v_n.z, &st.v_s.z),
    };
    let mut out = ScalarField::zeros(grid);
    for k in grid.interior() {
        out[k] = -st.rho[k] * ops::div_at(grid, &mix, k);
    }
    out
}

fn mixture_component(phi: &ScalarField, vn: &ScalarField, vs: &ScalarField) -> ScalarField {
    let w = phi.map(|p| p * p);
    let a = w.zip_map(vn, |w, v| (1.0 - w) * v);
    let b = w.zip_map(vs, |w, v| w * v);
    a.zip_map(&b, |x, y| x + y)
}

/// Material rate `theta_dot` from the temperature equation, given the
/// same `phi_dot` and `vs_dot` used for the phase and velocity updates.
pub fn temperature_rhs(
    grid: &Grid,
    st: &FieldState,
    phi_dot: &ScalarField,
    vs_dot: &VectorField,
    params: &ModelParams,
) -> ScalarField {
    let k0 = st.theta.map(|t| params.k0(t));
    let w = superfluid_weight(grid, st);
    let rel = st.v_s.zip_map(&st.v_n, |a, b| a - b).scaled_by(&w);
    let dv = ops::div(grid, &st.v_n);
    let k2 = params.kappa * params.kappa;
    let mut out = ScalarField::zeros(grid);
    for k in grid.interior() {
        let (rho, phi, th, pd) = (st.rho[k], st.phi[k], st.theta[k], phi_dot[k]);
        let gps = ops::grad_at(grid, &st.phi_s, k);
        let gt = ops::grad_at(grid, &st.theta, k);
        let vd = vs_dot.at(k);
        let drive: f64 = (0..3).map(|c| { let d = vd[c] + gps[c] - gt[c]; d * d }).sum();
        let rhs = rho * th * phi * pd
            + params.tau * rho * pd * pd
            + drive
            + params.nu * dv[k] * dv[k]
            + params.tau * k2 * w[k] * st.phi_s[k] * st.phi_s[k]
            + ops::div_coeff_grad_at(grid, &k0, &st.theta, k)
            + ops::div_at(grid, &rel, k) * th
            + rho * params.r.at(k);
        out[k] = rhs / (rho * params.c0);
    }
    out
}

/// `max |div v_n - lambda rho phi phi_dot|` over the interior.
pub fn constraint_residual(grid: &Grid, st: &FieldState, phi_dot: &ScalarField, params: &ModelParams) -> f64 {
    let target = constraint_target(grid, st, phi_dot, params);
    let dv = ops::div(grid, &st.v_n);
    grid.interior().map(|k| (dv[k] - target[k]).abs()).fold(0.0, f64::max)
}

fn constraint_target(grid: &Grid, st: &FieldState, phi_dot: &ScalarField, params: &ModelParams) -> ScalarField {
    let mut t = ScalarField::zeros(grid);
    for k in grid.interior() {
        t[k] = params.lambda * st.rho[k] * st.phi[k] * phi_dot[k];
    }
    t
}

/// All rates at one state. Material rates carry the overdot meaning; the
/// `*_t` fields are the partial time derivatives the integrator uses.
#[derive(Debug, Clone, PartialEq)]
pub struct Rates {
    pub phi_s: ScalarField,
    pub m: ScalarField,
    pub phi_dot: ScalarField,
    pub vs_dot: VectorField,
    pub rho_dot: ScalarField,
    pub theta_dot: ScalarField,
    /// `1 / (rho (1 - phi^2))`.
    pub inv_normal_mass: ScalarField,
    pub phi_t: ScalarField,
    pub vs_t: VectorField,
    /// Normal-velocity rate without the pressure gradient.
    pub vn_t: VectorField,
    pub rho_t: ScalarField,
    pub theta_t: ScalarField,
}

pub(crate) fn minus_advection(grid: &Grid, st: &FieldState, dot: &ScalarField, f: &ScalarField, mode: MaterialDerivative) -> ScalarField {
    match mode {
        MaterialDerivative::Partial => dot.clone(),
        MaterialDerivative::Advective => {
            let mut out = dot.clone();
            for k in grid.interior() {
                out[k] -= ops::advect_at(grid, &st.v_n, f, k);
            }
            out
        }
    }
}

pub(crate) fn minus_advection_vec(grid: &Grid, st: &FieldState, dot: &VectorField, f: &VectorField, mode: MaterialDerivative) -> VectorField {
    VectorField {
        x: minus_advection(grid, st, &dot.x, &f.x, mode),
        y: minus_advection(grid, st, &dot.y, &f.y, mode),
        z: minus_advection(grid, st, &dot.z, &f.z, mode),
    }
}

/// Evaluates every rate at `st`, recomputing `st.phi_s` in place.
///
/// The pressure is taken from `st`; [`step`] re-evaluates the
/// pressure-dependent rates after each projection.
pub fn evaluate_rates(
    grid: &Grid,
    st: &mut FieldState,
    params: &ModelParams,
    cfg: &StepConfig,
    step: u64,
) -> Result<Rates, StepError> {
    let mode = cfg.material_derivative;
    st.phi_s = solve_phi_s(grid, st, params);
    let (mass, min) = normal_mass(grid, st);
    let inv_normal_mass = mass.map(|v| 1.0 / v);
    let (vs_dot, vn_t) = if cfg.pins.velocities {
        (VectorField::zeros(grid), VectorField::zeros(grid))
    } else {
        if !(min >= cfg.eps_mass) {
            return Err(StepError::DegenerateMass { step, min, guard: cfg.eps_mass });
        }
        let force = vn_force(grid, st, params).scaled_by(&inv_normal_mass);
        (vs_rhs(grid, st, params), minus_advection_vec(grid, st, &force, &st.v_n, mode))
    };
    let vs_t = if cfg.pins.velocities { vs_dot.clone() } else { minus_advection_vec(grid, st, &vs_dot, &st.v_s, mode) };
    let rho_dot = if cfg.pins.rho { ScalarField::zeros(grid) } else { continuity_rhs(grid, st) };
    let rho_t = if cfg.pins.rho { rho_dot.clone() } else { minus_advection(grid, st, &rho_dot, &st.rho, mode) };
    let z = ScalarField::zeros(grid);
    let mut r = Rates {
        phi_s: st.phi_s.clone(),
        m: z.clone(),
        phi_dot: z.clone(),
        vs_dot,
        rho_dot,
        theta_dot: z.clone(),
        inv_normal_mass,
        phi_t: z.clone(),
        vs_t,
        vn_t,
        rho_t,
        theta_t: z,
    };
    refresh_pressure_rates(grid, st, &mut r, params, cfg);
    Ok(r)
}

/// Recomputes the rates that depend on `p`: the tilt, `phi_dot` and, through
/// it, `theta_dot`.
fn refresh_pressure_rates(grid: &Grid, st: &FieldState, r: &mut Rates, params: &ModelParams, cfg: &StepConfig) {
    let mode = cfg.material_derivative;
    r.m = tilt_m(grid, st, params);
    r.phi_dot = phase_rhs(grid, st, &r.m, params);
    r.phi_t = minus_advection(grid, st, &r.phi_dot, &st.phi, mode);
    if cfg.pins.theta {
        r.theta_dot = ScalarField::zeros(grid);
        r.theta_t = r.theta_dot.clone();
    } else {
        r.theta_dot = temperature_rhs(grid, st, &r.phi_dot, &r.vs_dot, params);
        r.theta_t = minus_advection(grid, st, &r.theta_dot, &st.theta, mode);
    }
}

/// Diagnostics of one projection.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct StageInfo {
    /// `max |div v_n - lambda rho phi phi_dot|` at the accepted state, with
    /// `phi_dot` evaluated at that state and its pressure.
    pub constraint_residual: f64,
    pub projection_iterations: usize,
}

/// The parts a formulation supplies to the shared midpoint driver.
///
/// The constraint is always written `div v_n = g0 - c p` with `c >= 0`.
pub(crate) trait Formulation {
    type State: Clone;
    type Rates;
    fn grid(&self) -> &Grid;
    fn cfg(&self) -> &StepConfig;
    /// Evaluates every rate, refreshing algebraic fields of `st` in place.
    fn rates(&self, st: &mut Self::State, step: u64) -> Result<Self::Rates, StepError>;
    /// Re-evaluates the pressure-dependent rates after `p` changed.
    fn refresh(&self, st: &Self::State, r: &mut Self::Rates);
    /// `(g0, c)` from already evaluated rates.
    fn constraint(&self, st: &Self::State, r: &Self::Rates) -> (ScalarField, ScalarField);
    /// `(g0, c)` at a state without rates.
    fn constraint_at(&self, st: &Self::State) -> (ScalarField, ScalarField);
    fn inv_normal_mass<'r>(&self, r: &'r Self::Rates) -> &'r ScalarField;
    fn vn_t<'r>(&self, r: &'r Self::Rates) -> &'r VectorField;
    fn flow<'s>(&self, st: &'s mut Self::State) -> (&'s mut VectorField, &'s mut ScalarField);
    fn v_n<'s>(&self, st: &'s Self::State) -> &'s VectorField;
    fn p<'s>(&self, st: &'s Self::State) -> &'s ScalarField;
    /// `base + h * rates` for every field other than `v_n` and `p`.
    fn advance(&self, base: &Self::State, r: &Self::Rates, h: f64) -> Self::State;
    /// Boundary rules.
    fn seal(&self, st: &mut Self::State);
    fn check(&self, st: &Self::State, step: u64) -> Result<(), StepError>;
    /// Recomputes the algebraic potential of an accepted state.
    fn finish(&self, st: &mut Self::State);
}

struct PressureSolve {
    v: VectorField,
    q: ScalarField,
    shifted: bool,
    info: StageInfo,
}

/// Solves `div(v - beta grad q) = target - c q`. Where `c` vanishes
/// everywhere the problem is pure Neumann and `q` has zero mean.
fn solve_pressure(
    grid: &Grid,
    v: &VectorField,
    beta: &ScalarField,
    c: &ScalarField,
    target: &ScalarField,
    cfg: &StepConfig,
    step: u64,
) -> Result<PressureSolve, StepError> {
    let mut v = v.clone();
    v.fill_ghosts(grid, VectorBc::NoSlip);
    let mut c = c.clone();
    c.fill_ghosts(grid, ScalarBc::NEUMANN);
    let shifted = grid.interior().any(|k| c[k] > 0.0);
    // the pressure inherits the solve error divided by the small shift
    let tol = (cfg.projection_tol * 1e-5).max(1e-15);
    let pr = poisson::project(grid, &v, beta, shifted.then_some(&c), target, tol, cfg.max_projection_iter)
        .map_err(|source| StepError::Projection { step, source })?;
    let info = StageInfo { constraint_residual: pr.residual, projection_iterations: pr.iterations };
    Ok(PressureSolve { v: pr.velocity, q: pr.pressure, shifted, info })
}

fn sum_scaled(grid: &Grid, a: &ScalarField, b: &ScalarField, wa: f64, wb: f64) -> ScalarField {
    let mut out = a.zip_map(b, |x, y| wa * x + wb * y);
    out.fill_ghosts(grid, ScalarBc::NEUMANN);
    out
}

/// `g0 - c p`.
fn shifted_target(g: &ScalarField, c: &ScalarField, p: &ScalarField) -> ScalarField {
    let cp = c.zip_map(p, |c, p| c * p);
    g.zip_map(&cp, |g, cp| g - cp)
}

/// `v + h vn_t - beta grad p` on the interior.
fn explicit_velocity(grid: &Grid, v: &VectorField, vn_t: &VectorField, h: f64, beta: &ScalarField, p: &ScalarField) -> VectorField {
    let mut out = v.plus_scaled(h, vn_t);
    for k in grid.interior() {
        let g = ops::grad_at(grid, p, k);
        let u = out.at(k);
        out.set(k, core::array::from_fn(|c| u[c] - beta[k] * g[c]));
    }
    out.enforce_dim(grid);
    out.fill_ghosts(grid, VectorBc::NoSlip);
    out
}

const MAX_END_PASSES: usize = 8;

pub(crate) struct Midpoint<S, R> {
    pub state: S,
    pub rates: R,
    pub midpoint: S,
    pub info: StageInfo,
}

/// Half-explicit midpoint step.
///
/// The start is first made consistent with the constraint (a no-op when it
/// already is). The predictor uses the start pressure. The corrector solves
/// for the end pressure with `g0` and `c` extrapolated linearly to the end
/// time, and drives the update with the average of start and end pressure.
/// A last solve at the accepted state makes the constraint hold there.
pub(crate) fn midpoint_step<F: Formulation>(
    f: &F,
    state: &F::State,
    index: u64,
) -> Result<Midpoint<F::State, F::Rates>, StepError> {
    let grid = f.grid();
    let cfg = f.cfg();
    let dt = cfg.dt;
    let h = 0.5 * dt;
    let free = !cfg.pins.velocities;

    let mut base = state.clone();
    let mut r0 = f.rates(&mut base, index)?;
    if free {
        let (g, c) = f.constraint(&base, &r0);
        let target = shifted_target(&g, &c, f.p(&base));
        let beta = f.inv_normal_mass(&r0).map(|v| h * v);
        let sol = solve_pressure(grid, f.v_n(&base), &beta, &c, &target, cfg, index)?;
        if sol.info.projection_iterations > 0 {
            let (v, p) = f.flow(&mut base);
            *p = sum_scaled(grid, p, &sol.q, 1.0, 1.0);
            *v = sol.v;
            f.seal(&mut base);
            r0 = f.rates(&mut base, index)?;
        }
    }
    let p_start = f.p(&base).clone();

    let mut half = f.advance(&base, &r0, h);
    if free {
        let beta = f.inv_normal_mass(&r0).map(|v| h * v);
        let v = explicit_velocity(grid, f.v_n(&base), f.vn_t(&r0), h, &beta, &p_start);
        *f.flow(&mut half).0 = v;
    }
    f.seal(&mut half);
    f.check(&half, index)?;
    let mut r1 = f.rates(&mut half, index)?;

    let mut end = None;
    if free {
        let (g_b, c_b) = f.constraint(&base, &r0);
        let (g_h, c_h) = f.constraint(&half, &r1);
        let g_e = sum_scaled(grid, &g_h, &g_b, 2.0, -1.0);
        let c_e = c_h.zip_map(&c_b, |a, b| (2.0 * a - b).max(0.0));
        let beta = f.inv_normal_mass(&r1).map(|v| h * v);
        let v_star = explicit_velocity(grid, f.v_n(&base), f.vn_t(&r1), dt, &beta, &p_start);
        let sol = solve_pressure(grid, &v_star, &beta, &c_e, &g_e, cfg, index)?;
        let p_end = if sol.shifted {
            sol.q
        } else {
            let mean = p_start.interior_mean(grid);
            sol.q.map(|v| v + mean)
        };
        *f.flow(&mut half).1 = sum_scaled(grid, &p_start, &p_end, 0.5, 0.5);
        f.refresh(&half, &mut r1);
        end = Some((sol.v, p_end, beta));
    }

    let mut new = f.advance(&base, &r1, dt);
    let mut info = StageInfo::default();
    if let Some((v, p_end, beta)) = end {
        {
            let (vn, p) = f.flow(&mut new);
            *vn = v;
            *p = p_end;
        }
        f.seal(&mut new);
        f.check(&new, index)?;
        // |v_n|^2 enters the tilt, so the correction moves phi_dot again;
        // repeat until a pass leaves the velocity untouched
        for _ in 0..MAX_END_PASSES {
            let (g, c) = f.constraint_at(&new);
            let target = shifted_target(&g, &c, f.p(&new));
            let sol = solve_pressure(grid, f.v_n(&new), &beta, &c, &target, cfg, index)?;
            info.constraint_residual = sol.info.constraint_residual;
            info.projection_iterations += sol.info.projection_iterations;
            if sol.info.projection_iterations == 0 {
                break;
            }
            let (vn, p) = f.flow(&mut new);
            *p = sum_scaled(grid, p, &sol.q, 1.0, 1.0);
            *vn = sol.v;
            f.seal(&mut new);
        }
    }
    f.seal(&mut new);
    f.check(&new, index)?;
    f.finish(&mut new);
    Ok(Midpoint { state: new, rates: r1, midpoint: half, info })
}

struct Real<'a> {
    grid: &'a Grid,
    cfg: &'a StepConfig,
    params: &'a ModelParams,
}

impl Real<'_> {
    fn parts(&self, st: &FieldState, phi_dot: &ScalarField) -> (ScalarField, ScalarField) {
        let lam = self.params.lambda;
        let tau = self.params.tau;
        let mut g0 = ScalarField::zeros(self.grid);
        let mut c = ScalarField::zeros(self.grid);
        for k in self.grid.interior() {
            let (rho, phi) = (st.rho[k], st.phi[k]);
            c[k] = lam * lam * rho * phi * phi / tau;
            // phi_dot with the lambda p contribution removed
            g0[k] = lam * rho * phi * (phi_dot[k] + lam * phi * st.p[k] / tau);
        }
        (g0, c)
    }
}

impl Formulation for Real<'_> {
    type State = FieldState;
    type Rates = Rates;
    fn grid(&self) -> &Grid {
        self.grid
    }
    fn cfg(&self) -> &StepConfig {
        self.cfg
    }
    fn rates(&self, st: &mut FieldState, step: u64) -> Result<Rates, StepError> {
        evaluate_rates(self.grid, st, self.params, self.cfg, step)
    }
    fn refresh(&self, st: &FieldState, r: &mut Rates) {
        refresh_pressure_rates(self.grid, st, r, self.params, self.cfg);
    }
    fn constraint(&self, st: &FieldState, r: &Rates) -> (ScalarField, ScalarField) {
        self.parts(st, &r.phi_dot)
    }
    fn constraint_at(&self, st: &FieldState) -> (ScalarField, ScalarField) {
        let m = tilt_m(self.grid, st, self.params);
        self.parts(st, &phase_rhs(self.grid, st, &m, self.params))
    }
    fn inv_normal_mass<'r>(&self, r: &'r Rates) -> &'r ScalarField {
        &r.inv_normal_mass
    }
    fn vn_t<'r>(&self, r: &'r Rates) -> &'r VectorField {
        &r.vn_t
    }
    fn flow<'s>(&self, st: &'s mut FieldState) -> (&'s mut VectorField, &'s mut ScalarField) {
        (&mut st.v_n, &mut st.p)
    }
    fn v_n<'s>(&self, st: &'s FieldState) -> &'s VectorField {
        &st.v_n
    }
    fn p<'s>(&self, st: &'s FieldState) -> &'s ScalarField {
        &st.p
    }
    fn advance(&self, base: &FieldState, r: &Rates, h: f64) -> FieldState {
        let mut new = base.clone();
        new.v_s = base.v_s.plus_scaled(h, &r.vs_t);
        new.phi = base.phi.plus_scaled(h, &r.phi_t);
        new.rho = base.rho.plus_scaled(h, &r.rho_t);
        new.theta = base.theta.plus_scaled(h, &r.theta_t);
        new.phi_s = r.phi_s.clone();
        new
    }
    fn seal(&self, st: &mut FieldState) {
        st.apply_bcs(self.grid, self.params.omega_bc);
    }
    fn check(&self, st: &FieldState, step: u64) -> Result<(), StepError> {
        check_state(self.grid, st, step)
    }
    fn finish(&self, st: &mut FieldState) {
        st.phi_s = solve_phi_s(self.grid, st, self.params);
    }
}

pub(crate) fn check_state(grid: &Grid, st: &FieldState, step: u64) -> Result<(), StepError> {
    let scalars = [("phi", &st.phi), ("p", &st.p), ("rho", &st.rho), ("theta", &st.theta)];
    for (field, f) in scalars {
        if !f.interior_all_finite(grid) {
            return Err(StepError::NotFinite { step, field });
        }
    }
    for (field, v) in [("v_s", &st.v_s), ("v_n", &st.v_n)] {
        if !v.interior_all_finite(grid) {
            return Err(StepError::NotFinite { step, field });
        }
    }
    for (field, f) in [("rho", &st.rho), ("theta", &st.theta)] {
        let min = f.interior_min(grid);
        if !(min > 0.0) {
            return Err(StepError::Nonpositive { step, field, min });
        }
    }
    Ok(())
}

/// One accepted step.
#[derive(Debug, Clone, PartialEq)]
pub struct StepOutcome {
    pub state: FieldState,
    /// Rates at the midpoint stage (with the midpoint pressure); these
    /// drive the full update.
    pub rates: Rates,
    /// The midpoint state the rates were evaluated at.
    pub midpoint: FieldState,
    pub info: StageInfo,
}

/// Midpoint (two-stage) step. The returned state carries the end pressure,
/// satisfies the constraint to `projection_tol`, and has `phi_s`
/// recomputed from the new fields.
pub fn step(
    grid: &Grid,
    state: &FieldState,
    cfg: &StepConfig,
    params: &ModelParams,
    index: u64,
) -> Result<StepOutcome, StepError> {
    let f = Real { grid, cfg, params };
    let out = midpoint_step(&f, state, index)?;
    Ok(StepOutcome { state: out.state, rates: out.rates, midpoint: out.midpoint, info: out.info })
}

/// Stability numbers for the explicit scheme: `dt max|v| / h` and
/// `dt D / h^2` for the stiffest diffusivity present.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CflReport {
    pub advective: f64,
    pub diffusive: f64,
}

pub fn cfl_report(grid: &Grid, st: &FieldState, dt: f64, params: &ModelParams) -> CflReport {
    let h = if grid.is_2d() { grid.hx().min(grid.hy()) } else { grid.hx() };
    let mut vmax: f64 = 0.0;
    let mut dmax: f64 = 0.0;
    for k in grid.interior() {
        vmax = vmax.max(libm::sqrt(st.v_n.norm2(k))).max(libm::sqrt(st.v_s.norm2(k)));
        let rho = st.rho[k];
        let mass = rho * (1.0 - st.phi[k] * st.phi[k]);
        let d_phase = params.inv_kappa2() / params.tau;
        let d_heat = params.k0(st.theta[k]).abs() / (rho * params.c0);
        let d_visc = if mass > 0.0 { 1.0f64.max(params.nu) / mass } else { f64::INFINITY };
        dmax = dmax.max(d_phase).max(d_heat).max(d_visc);
    }
    CflReport { advective: dt * vmax / h, diffusive: dt * dmax / (h * h) }
}
