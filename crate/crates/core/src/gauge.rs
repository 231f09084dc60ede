//! Complex formulation: `psi = phi e^{i chi}`, the potential
//! `A = v_s + grad(chi) / kappa` and the scalar potential
//! `phi_pot = phi_s - chi_dot / kappa`.
//!
//! Derivatives of `psi` are covariant. A neighbour value is transported by
//! the phase difference read off `psi` itself (reduced mod pi), and the
//! matching connection `w` is the centred gradient of those link phases
//! divided by `kappa`. A static gauge change then acts on the discrete
//! system exactly, not just to truncation order. In these variables the
//! `A` cross terms of the collected phase equation combine into
//! `|A - w|^2` plus a conservative current term that cancels against the
//! potential term wherever `phi_pot` obeys its closure.
//!
//! The complex stepper closes `phi_pot` with the static-gauge condition,
//! so gauge equivalence with the real stepper holds for time-independent
//! `chi` and partial time derivatives. The material derivative does not
//! commute with the gradient in the map for `A`, so advective runs are
//! only equivalent at `chi = 0`.

use alloc::vec::Vec;
use core::f64::consts::FRAC_PI_2;

use num_complex::Complex64 as C64;

use crate::dynamics::{self, MaterialDerivative, StageInfo, StepConfig};
use crate::error::{StateError, StepError};
use crate::grid::{Grid, ScalarBc, ScalarField, VectorBc, VectorField};
use crate::ops;
use crate::params::ModelParams;
use crate::state::FieldState;

/// Analytic gauge functions with a known time derivative.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum GaugeProfile {
    Constant(f64),
    /// `amp cos(kx x) cos(ky y) (1 + rate t)`. Even about both walls when
    /// `kx L / pi` and `ky L / pi` are integers.
    Cosine { amp: f64, kx: f64, ky: f64, rate: f64 },
}

/// A gauge function sampled on every cell, ghosts included.
#[derive(Debug, Clone, PartialEq)]
pub struct GaugeField {
    pub chi: ScalarField,
    pub chi_dot: ScalarField,
}

impl GaugeField {
    pub fn zero(grid: &Grid) -> Self {
        Self { chi: ScalarField::zeros(grid), chi_dot: ScalarField::zeros(grid) }
    }

    pub fn analytic(grid: &Grid, profile: GaugeProfile, t: f64) -> Result<Self, StateError> {
        let (chi, chi_dot) = match profile {
            GaugeProfile::Constant(c) => (ScalarField::constant(grid, c), ScalarField::zeros(grid)),
            GaugeProfile::Cosine { amp, kx, ky, rate } => {
                let shape = move |x: f64, y: f64| amp * libm::cos(kx * x) * libm::cos(ky * y);
                (
                    ScalarField::from_fn(grid, |x, y| shape(x, y) * (1.0 + rate * t)),
                    ScalarField::from_fn(grid, |x, y| shape(x, y) * rate),
                )
            }
        };
        Self { chi, chi_dot }.checked()
    }

    /// Static gauge from samples; ghosts are even-reflected.
    pub fn sampled(grid: &Grid, mut chi: ScalarField) -> Result<Self, StateError> {
        chi.fill_ghosts(grid, ScalarBc::NEUMANN);
        Self { chi, chi_dot: ScalarField::zeros(grid) }.checked()
    }

    fn checked(self) -> Result<Self, StateError> {
        if !self.chi.as_slice().iter().all(|v| v.is_finite()) {
            return Err(StateError::NotFinite { field: "chi" });
        }
        if !self.chi_dot.as_slice().iter().all(|v| v.is_finite()) {
            return Err(StateError::NotFinite { field: "chi_dot" });
        }
        Ok(self)
    }
}

/// Fields of the complex formulation. `v_n`, `p`, `rho`, `theta` are
/// gauge invariant and shared with [`FieldState`].
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexState {
    pub psi_re: ScalarField,
    pub psi_im: ScalarField,
    pub a: VectorField,
    pub phi_pot: ScalarField,
    pub v_n: VectorField,
    pub p: ScalarField,
    pub rho: ScalarField,
    pub theta: ScalarField,
}

impl ComplexState {
    #[inline]
    pub fn psi(&self, k: usize) -> C64 {
        C64::new(self.psi_re[k], self.psi_im[k])
    }

    /// `|psi|` inherits the even rule of `phi`, `A` the rules of `v_s`.
    pub fn apply_bcs(&mut self, grid: &Grid, omega_bc: f64) {
        self.a.enforce_dim(grid);
        self.v_n.enforce_dim(grid);
        for f in [&mut self.psi_re, &mut self.psi_im, &mut self.phi_pot, &mut self.p, &mut self.rho, &mut self.theta] {
            f.fill_ghosts(grid, ScalarBc::NEUMANN);
        }
        self.a.fill_ghosts(grid, VectorBc::Slip { omega: omega_bc });
        self.v_n.fill_ghosts(grid, VectorBc::NoSlip);
    }
}

fn map_a(grid: &Grid, v: &VectorField, chi: &GaugeField, sign: f64, params: &ModelParams) -> VectorField {
    let mut out = v.clone();
    let s = sign / params.kappa;
    for k in grid.interior() {
        let g = ops::grad_at(grid, &chi.chi, k);
        out.x[k] += s * g[0];
        out.y[k] += s * g[1];
    }
    out.fill_ghosts(grid, VectorBc::Slip { omega: params.omega_bc });
    out
}

pub fn gauge_forward(grid: &Grid, real: &FieldState, chi: &GaugeField, params: &ModelParams) -> ComplexState {
    let n = grid.storage_len();
    let mut psi_re = ScalarField::zeros(grid);
    let mut psi_im = ScalarField::zeros(grid);
    for k in 0..n {
        let z = C64::from_polar(real.phi[k], chi.chi[k]);
        psi_re[k] = z.re;
        psi_im[k] = z.im;
    }
    let ik = 1.0 / params.kappa;
    ComplexState {
        psi_re,
        psi_im,
        a: map_a(grid, &real.v_s, chi, 1.0, params),
        phi_pot: real.phi_s.zip_map(&chi.chi_dot, |s, d| s - ik * d),
        v_n: real.v_n.clone(),
        p: real.p.clone(),
        rho: real.rho.clone(),
        theta: real.theta.clone(),
    }
}

pub fn gauge_backward(grid: &Grid, cplx: &ComplexState, chi: &GaugeField, params: &ModelParams) -> FieldState {
    let n = grid.storage_len();
    let mut phi = ScalarField::zeros(grid);
    for k in 0..n {
        phi[k] = (cplx.psi(k) * C64::from_polar(1.0, -chi.chi[k])).re;
    }
    let ik = 1.0 / params.kappa;
    FieldState {
        phi,
        v_s: map_a(grid, &cplx.a, chi, -1.0, params),
        phi_s: cplx.phi_pot.zip_map(&chi.chi_dot, |s, d| s + ik * d),
        v_n: cplx.v_n.clone(),
        p: cplx.p.clone(),
        rho: cplx.rho.clone(),
        theta: cplx.theta.clone(),
    }
}

/// Phase of `b` relative to `a`, reduced to `(-pi/2, pi/2]`. Zero when
/// either vanishes.
#[inline]
fn link(a: C64, b: C64) -> f64 {
    let z = b * a.conj();
    if z.re == 0.0 {
        if z.im == 0.0 {
            0.0
        } else {
            FRAC_PI_2.copysign(z.im)
        }
    } else {
        libm::atan(z.im / z.re)
    }
}

/// `psi[j]` carried to the phase frame of `psi[k]`.
#[inline]
fn transported(c: &ComplexState, k: usize, j: usize) -> C64 {
    let (a, b) = (c.psi(k), c.psi(j));
    b * C64::from_polar(1.0, -link(a, b))
}

fn axes(grid: &Grid) -> impl Iterator<Item = (usize, usize, f64)> {
    let x = core::iter::once((0, 1, grid.hx()));
    let y = grid.is_2d().then(|| (1, grid.ystep(), grid.hy()));
    x.chain(y)
}

/// Connection `w` at `k`: centred gradient of the link phases over `kappa`.
fn connection_at(grid: &Grid, c: &ComplexState, k: usize, kappa: f64) -> [f64; 3] {
    let mut w = [0.0; 3];
    for (ax, s, h) in axes(grid) {
        let up = link(c.psi(k), c.psi(k + s));
        let down = link(c.psi(k - s), c.psi(k));
        w[ax] = (up + down) / (2.0 * h * kappa);
    }
    w
}

/// Covariant centred gradient at `k`.
fn cov_grad_at(grid: &Grid, c: &ComplexState, k: usize) -> [C64; 3] {
    let mut g = [C64::new(0.0, 0.0); 3];
    for (ax, s, h) in axes(grid) {
        g[ax] = (transported(c, k, k + s) - transported(c, k, k - s)) / (2.0 * h);
    }
    g
}

/// Covariant `div(rho grad psi)` with face-averaged `rho`.
fn cov_div_rho_grad_at(grid: &Grid, rho: &ScalarField, c: &ComplexState, k: usize) -> C64 {
    let psi = c.psi(k);
    let mut out = C64::new(0.0, 0.0);
    for (_, s, h) in axes(grid) {
        let ce = 0.5 * (rho[k] + rho[k + s]);
        let cw = 0.5 * (rho[k] + rho[k - s]);
        out += ((transported(c, k, k + s) - psi) * ce - (psi - transported(c, k, k - s)) * cw) / (h * h);
    }
    out
}

/// Gauge-invariant real fields of a complex state: `phi = |psi|`,
/// `v_s = A - w`, `phi_s = phi_pot` and the shared fields, with ghosts
/// filled. Valid for `phi >= 0`.
pub fn observables(grid: &Grid, c: &ComplexState, params: &ModelParams) -> FieldState {
    let mut phi = ScalarField::zeros(grid);
    let mut v_s = c.a.clone();
    for k in grid.interior() {
        phi[k] = c.psi(k).norm();
        let w = connection_at(grid, c, k, params.kappa);
        v_s.x[k] -= w[0];
        v_s.y[k] -= w[1];
    }
    let mut st = FieldState {
        phi,
        v_s,
        phi_s: c.phi_pot.clone(),
        v_n: c.v_n.clone(),
        p: c.p.clone(),
        rho: c.rho.clone(),
        theta: c.theta.clone(),
    };
    st.apply_bcs(grid, params.omega_bc);
    st
}

/// Static-gauge closure `phi_pot = -div(rho J) / (tau kappa^2 (rho |psi|^2 + eps))`
/// with the current `J = |psi|^2 (A - w)`.
pub fn static_gauge_potential(grid: &Grid, obs: &FieldState, params: &ModelParams) -> ScalarField {
    dynamics::solve_phi_s(grid, obs, params)
}

/// Material `psi_dot` from the collected complex phase equation, using the
/// stored `phi_pot`. `m` is the tilt of the observables, which carries
/// `|A - w|^2`.
pub fn complex_phase_rhs(
    grid: &Grid,
    c: &ComplexState,
    obs: &FieldState,
    m: &ScalarField,
    params: &ModelParams,
) -> (ScalarField, ScalarField) {
    let ik2 = params.inv_kappa2();
    let kappa = params.kappa;
    let tl = params.theta_lambda;
    let rho_j = obs.v_s.scaled_by(&dynamics::superfluid_weight(grid, obs));
    let mut re = ScalarField::zeros(grid);
    let mut im = ScalarField::zeros(grid);
    for k in grid.interior() {
        let psi = c.psi(k);
        let rho = c.rho[k];
        let mod2 = psi.norm_sqr();
        let diff = cov_div_rho_grad_at(grid, &c.rho, c, k) * ik2;
        let bulk = psi * (rho * (tl * (mod2 - 1.0) + m[k]));
        let cross = C64::i() * psi * (-rho * ops::div_at(grid, &rho_j, k) / (kappa * (rho * mod2 + params.eps_reg)));
        let pot = C64::i() * psi * (-params.tau * kappa * rho * c.phi_pot[k]);
        let z = (diff - bulk + cross + pot) / (params.tau * rho);
        re[k] = z.re;
        im[k] = z.im;
    }
    (re, im)
}

/// `A_dot = -grad phi_pot - curl v_n - rho J + grad theta`.
pub fn a_rhs(grid: &Grid, c: &ComplexState, obs: &FieldState) -> VectorField {
    let w = dynamics::superfluid_weight(grid, obs);
    let mut out = VectorField::zeros(grid);
    for k in grid.interior() {
        let gp = ops::grad_at(grid, &c.phi_pot, k);
        let cv = ops::curl_at(grid, &c.v_n, k);
        let gt = ops::grad_at(grid, &c.theta, k);
        let j = obs.v_s.at(k);
        out.set(k, core::array::from_fn(|i| -gp[i] - cv[i] - w[k] * j[i] + gt[i]));
    }
    out.enforce_dim(grid);
    out
}

/// `phi phi_dot = Re(psi* psi_dot)`, divided by `|psi|`; at a zero of `psi`
/// the modulus of the rate is used.
fn modulus_rate(c: &ComplexState, re: &ScalarField, im: &ScalarField, k: usize) -> f64 {
    let psi = c.psi(k);
    let d = C64::new(re[k], im[k]);
    let r = psi.norm();
    if r > 0.0 {
        (psi.conj() * d).re / r
    } else {
        d.norm()
    }
}

struct ComplexRates {
    psi_dot_re: ScalarField,
    psi_dot_im: ScalarField,
    psi_t_re: ScalarField,
    psi_t_im: ScalarField,
    a_dot: VectorField,
    a_t: VectorField,
    vn_t: VectorField,
    rho_t: ScalarField,
    theta_t: ScalarField,
    inv_normal_mass: ScalarField,
    /// Observables of the state the rates were taken at.
    obs: FieldState,
}

fn complex_rates(
    grid: &Grid,
    c: &mut ComplexState,
    params: &ModelParams,
    cfg: &StepConfig,
    step: u64,
) -> Result<ComplexRates, StepError> {
    let mode = cfg.material_derivative;
    let mut obs = observables(grid, c, params);
    c.phi_pot = static_gauge_potential(grid, &obs, params);
    obs.phi_s = c.phi_pot.clone();
    let (mass, min) = dynamics::normal_mass(grid, &obs);
    let inv_normal_mass = mass.map(|v| 1.0 / v);
    let (a_dot, vn_t) = if cfg.pins.velocities {
        (VectorField::zeros(grid), VectorField::zeros(grid))
    } else {
        if !(min >= cfg.eps_mass) {
            return Err(StepError::DegenerateMass { step, min, guard: cfg.eps_mass });
        }
        let force = dynamics::vn_force(grid, &obs, params).scaled_by(&inv_normal_mass);
        (a_rhs(grid, c, &obs), dynamics::minus_advection_vec(grid, &obs, &force, &obs.v_n, mode))
    };
    let a_t = if cfg.pins.velocities { a_dot.clone() } else { dynamics::minus_advection_vec(grid, &obs, &a_dot, &c.a, mode) };
    let rho_t = if cfg.pins.rho {
        ScalarField::zeros(grid)
    } else {
        dynamics::minus_advection(grid, &obs, &dynamics::continuity_rhs(grid, &obs), &obs.rho, mode)
    };
    let z = ScalarField::zeros(grid);
    let mut r = ComplexRates {
        psi_dot_re: z.clone(),
        psi_dot_im: z.clone(),
        psi_t_re: z.clone(),
        psi_t_im: z.clone(),
        a_dot,
        a_t,
        vn_t,
        rho_t,
        theta_t: z,
        inv_normal_mass,
        obs,
    };
    refresh_complex(grid, c, &mut r, params, cfg);
    Ok(r)
}

/// Rates that depend on `p`: `psi_dot` and, through it, `theta_dot`.
fn refresh_complex(grid: &Grid, c: &ComplexState, r: &mut ComplexRates, params: &ModelParams, cfg: &StepConfig) {
    let obs = &r.obs;
    let m = dynamics::tilt_m(grid, obs, params);
    let (re, im) = complex_phase_rhs(grid, c, obs, &m, params);
    r.psi_t_re = re.clone();
    r.psi_t_im = im.clone();
    if cfg.material_derivative == MaterialDerivative::Advective {
        // covariant advection
        for k in grid.interior() {
            let g = cov_grad_at(grid, c, k);
            let v = c.v_n.at(k);
            let adv = g[0] * v[0] + g[1] * v[1];
            r.psi_t_re[k] -= adv.re;
            r.psi_t_im[k] -= adv.im;
        }
    }
    r.theta_t = if cfg.pins.theta {
        ScalarField::zeros(grid)
    } else {
        let mut phi_dot = ScalarField::zeros(grid);
        for k in grid.interior() {
            phi_dot[k] = modulus_rate(c, &re, &im, k);
        }
        let td = dynamics::temperature_rhs(grid, obs, &phi_dot, &r.a_dot, params);
        dynamics::minus_advection(grid, obs, &td, &obs.theta, cfg.material_derivative)
    };
    r.psi_dot_re = re;
    r.psi_dot_im = im;
}

struct Complex<'a> {
    grid: &'a Grid,
    cfg: &'a StepConfig,
    params: &'a ModelParams,
}

impl Complex<'_> {
    /// `g0 = lambda rho (Re(psi* psi_dot) + lambda |psi|^2 p / tau)` and
    /// `c = lambda^2 rho |psi|^2 / tau`.
    fn parts(&self, c: &ComplexState, re: &ScalarField, im: &ScalarField) -> (ScalarField, ScalarField) {
        let lam = self.params.lambda;
        let tau = self.params.tau;
        let mut g0 = ScalarField::zeros(self.grid);
        let mut shift = ScalarField::zeros(self.grid);
        for k in self.grid.interior() {
            let psi = c.psi(k);
            let mod2 = psi.norm_sqr();
            let rho = c.rho[k];
            shift[k] = lam * lam * rho * mod2 / tau;
            let flux = (psi.conj() * C64::new(re[k], im[k])).re;
            g0[k] = lam * rho * (flux + lam * mod2 * c.p[k] / tau);
        }
        (g0, shift)
    }
}

impl dynamics::Formulation for Complex<'_> {
    type State = ComplexState;
    type Rates = ComplexRates;
    fn grid(&self) -> &Grid {
        self.grid
    }
    fn cfg(&self) -> &StepConfig {
        self.cfg
    }
    fn rates(&self, st: &mut ComplexState, step: u64) -> Result<ComplexRates, StepError> {
        complex_rates(self.grid, st, self.params, self.cfg, step)
    }
    fn refresh(&self, st: &ComplexState, r: &mut ComplexRates) {
        r.obs.p = st.p.clone();
        refresh_complex(self.grid, st, r, self.params, self.cfg);
    }
    fn constraint(&self, st: &ComplexState, r: &ComplexRates) -> (ScalarField, ScalarField) {
        self.parts(st, &r.psi_dot_re, &r.psi_dot_im)
    }
    fn constraint_at(&self, st: &ComplexState) -> (ScalarField, ScalarField) {
        let mut c = st.clone();
        let mut obs = observables(self.grid, &c, self.params);
        c.phi_pot = static_gauge_potential(self.grid, &obs, self.params);
        obs.phi_s = c.phi_pot.clone();
        let m = dynamics::tilt_m(self.grid, &obs, self.params);
        let (re, im) = complex_phase_rhs(self.grid, &c, &obs, &m, self.params);
        self.parts(&c, &re, &im)
    }
    fn inv_normal_mass<'r>(&self, r: &'r ComplexRates) -> &'r ScalarField {
        &r.inv_normal_mass
    }
    fn vn_t<'r>(&self, r: &'r ComplexRates) -> &'r VectorField {
        &r.vn_t
    }
    fn flow<'s>(&self, st: &'s mut ComplexState) -> (&'s mut VectorField, &'s mut ScalarField) {
        (&mut st.v_n, &mut st.p)
    }
    fn v_n<'s>(&self, st: &'s ComplexState) -> &'s VectorField {
        &st.v_n
    }
    fn p<'s>(&self, st: &'s ComplexState) -> &'s ScalarField {
        &st.p
    }
    fn advance(&self, base: &ComplexState, r: &ComplexRates, h: f64) -> ComplexState {
        let mut new = base.clone();
        new.a = base.a.plus_scaled(h, &r.a_t);
        new.psi_re = base.psi_re.plus_scaled(h, &r.psi_t_re);
        new.psi_im = base.psi_im.plus_scaled(h, &r.psi_t_im);
        new.rho = base.rho.plus_scaled(h, &r.rho_t);
        new.theta = base.theta.plus_scaled(h, &r.theta_t);
        new.phi_pot = r.obs.phi_s.clone();
        new
    }
    fn seal(&self, st: &mut ComplexState) {
        st.apply_bcs(self.grid, self.params.omega_bc);
    }
    fn check(&self, st: &ComplexState, step: u64) -> Result<(), StepError> {
        check_complex(self.grid, st, step)
    }
    fn finish(&self, st: &mut ComplexState) {
        st.phi_pot = static_gauge_potential(self.grid, &observables(self.grid, st, self.params), self.params);
    }
}

fn check_complex(grid: &Grid, c: &ComplexState, step: u64) -> Result<(), StepError> {
    let scalars = [("psi", &c.psi_re), ("psi", &c.psi_im), ("p", &c.p), ("rho", &c.rho), ("theta", &c.theta)];
    for (field, f) in scalars {
        if !f.interior_all_finite(grid) {
            return Err(StepError::NotFinite { step, field });
        }
    }
    for (field, v) in [("A", &c.a), ("v_n", &c.v_n)] {
        if !v.interior_all_finite(grid) {
            return Err(StepError::NotFinite { step, field });
        }
    }
    for (field, f) in [("rho", &c.rho), ("theta", &c.theta)] {
        let min = f.interior_min(grid);
        if !(min > 0.0) {
            return Err(StepError::Nonpositive { step, field, min });
        }
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq)]
pub struct ComplexStepOutcome {
    pub state: ComplexState,
    pub midpoint: ComplexState,
    pub info: StageInfo,
}

/// One midpoint step of the complex system, with the stage structure,
/// pins and guards of [`dynamics::step`].
pub fn complex_step(
    grid: &Grid,
    state: &ComplexState,
    cfg: &StepConfig,
    params: &ModelParams,
    index: u64,
) -> Result<ComplexStepOutcome, StepError> {
    let f = Complex { grid, cfg, params };
    let out = dynamics::midpoint_step(&f, state, index)?;
    Ok(ComplexStepOutcome { state: out.state, midpoint: out.midpoint, info: out.info })
}

/// Max-norm mismatch of one identity and the largest magnitude among its
/// terms.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Residual {
    pub max_abs: f64,
    pub scale: f64,
}

impl Residual {
    fn push(&mut self, lhs: f64, rhs: f64) {
        self.max_abs = self.max_abs.max((lhs - rhs).abs());
        self.scale = self.scale.max(lhs.abs()).max(rhs.abs());
    }

    pub fn relative(&self) -> f64 {
        if self.scale > 0.0 {
            self.max_abs / self.scale
        } else {
            self.max_abs
        }
    }
}

/// Residuals of the relations between a real state and its complex image.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct IdentityReport {
    /// The map itself: `psi`, `A`, `phi_pot` against the real fields.
    pub transform: Residual,
    /// `v_s_dot + grad phi_s` against `A_dot + grad phi_pot`.
    pub potential: Residual,
    /// `phi^2 v_s` against `|psi|^2 A - Im(psi* grad psi) / kappa`.
    pub current: Residual,
    /// `phi phi_dot` against `Re(psi* psi_dot)`.
    pub phase_rate: Residual,
    /// `phi_dot^2 + kappa^2 phi^2 phi_s^2` against its complex form.
    pub dissipation: Residual,
    /// `grad phi (x) grad phi` against the `|psi|^-2` form.
    pub gradient_tensor: Residual,
    /// Cells left out of `gradient_tensor` because `|psi|^2 < eps_reg`.
    pub skipped: usize,
}

impl IdentityReport {
    pub fn worst_relative(&self) -> f64 {
        [self.transform, self.potential, self.current, self.phase_rate, self.dissipation, self.gradient_tensor]
            .iter()
            .map(Residual::relative)
            .fold(0.0, f64::max)
    }
}

/// Evaluates every identity on the interior with the discrete operators.
/// The plain gradient of `psi` is the covariant one plus `i kappa w psi`.
pub fn check_identities(
    grid: &Grid,
    real: &FieldState,
    cplx: &ComplexState,
    chi: &GaugeField,
    params: &ModelParams,
) -> IdentityReport {
    let kappa = params.kappa;
    let mut rep = IdentityReport::default();

    let mut r = real.clone();
    r.phi_s = dynamics::solve_phi_s(grid, &r, params);
    let m_r = dynamics::tilt_m(grid, &r, params);
    let phi_dot = dynamics::phase_rhs(grid, &r, &m_r, params);
    let vs_dot = dynamics::vs_rhs(grid, &r, params);

    let obs = observables(grid, cplx, params);
    let m_c = dynamics::tilt_m(grid, &obs, params);
    let (pd_re, pd_im) = complex_phase_rhs(grid, cplx, &obs, &m_c, params);
    let a_dot = a_rhs(grid, cplx, &obs);

    for k in grid.interior() {
        let want = C64::from_polar(real.phi[k], chi.chi[k]);
        let psi = cplx.psi(k);
        rep.transform.push(psi.re, want.re);
        rep.transform.push(psi.im, want.im);
        let gchi = ops::grad_at(grid, &chi.chi, k);
        let (ac, vc) = (cplx.a.components(), real.v_s.components());
        for (i, g) in gchi.iter().take(2).enumerate() {
            rep.transform.push(ac[i][k], vc[i][k] + g / kappa);
        }
        rep.transform.push(cplx.phi_pot[k], real.phi_s[k] - chi.chi_dot[k] / kappa);

        let gs = ops::grad_at(grid, &r.phi_s, k);
        let gp = ops::grad_at(grid, &cplx.phi_pot, k);
        let (vd, ad) = (vs_dot.at(k), a_dot.at(k));
        for i in 0..3 {
            rep.potential.push(vd[i] + gs[i], ad[i] + gp[i]);
        }

        let mod2 = psi.norm_sqr();
        let w = connection_at(grid, cplx, k, kappa);
        let cg = cov_grad_at(grid, cplx, k);
        let dpsi: [C64; 3] = core::array::from_fn(|i| cg[i] + C64::i() * psi * (kappa * w[i]));
        let phi = real.phi[k];
        let a = cplx.a.at(k);
        let vs = real.v_s.at(k);
        for i in 0..3 {
            rep.current.push(phi * phi * vs[i], mod2 * a[i] - (psi.conj() * dpsi[i]).im / kappa);
        }

        let pd = C64::new(pd_re[k], pd_im[k]);
        rep.phase_rate.push(phi * phi_dot[k], 0.5 * (psi * pd.conj() + psi.conj() * pd).re);

        let lhs = phi_dot[k] * phi_dot[k] + kappa * kappa * phi * phi * r.phi_s[k] * r.phi_s[k];
        let pot = cplx.phi_pot[k];
        let cross = -C64::i() * (kappa * pot) * (pd * psi.conj() - psi * pd.conj());
        let rhs = pd.norm_sqr() + kappa * kappa * mod2 * pot * pot + cross.re;
        rep.dissipation.push(lhs, rhs);

        if mod2 < params.eps_reg {
            rep.skipped += 1;
        } else {
            let gphi = ops::grad_at(grid, &real.phi, k);
            let s: [f64; 3] = core::array::from_fn(|i| (psi.conj() * dpsi[i] + psi * dpsi[i].conj()).re);
            for i in 0..3 {
                for j in 0..3 {
                    rep.gradient_tensor.push(gphi[i] * gphi[j], s[i] * s[j] / (4.0 * mod2));
                }
            }
        }
    }
    rep
}

/// Per-step differences between two gauge runs and against the direct
/// real run. Every entry is a max-norm over the interior.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GaugeCompareRow {
    pub step: u64,
    pub t: f64,
    pub modulus2: f64,
    pub v_s: f64,
    pub phi_s: f64,
    pub v_n: f64,
    pub rho: f64,
    pub theta: f64,
    pub p: f64,
    /// First gauge mapped back against the real run, all fields.
    pub real: f64,
}

impl GaugeCompareRow {
    pub fn max(&self) -> f64 {
        [self.modulus2, self.v_s, self.phi_s, self.v_n, self.rho, self.theta, self.p, self.real]
            .into_iter()
            .fold(0.0, f64::max)
    }
}

/// Evolves `real0` directly and in the two static gauges `chi_a`, `chi_b`
/// for `steps` steps. `chi_dot` is ignored: the complex stepper fixes a
/// static gauge.
pub fn gauge_compare(
    grid: &Grid,
    real0: &FieldState,
    chi_a: &GaugeField,
    chi_b: &GaugeField,
    cfg: &StepConfig,
    params: &ModelParams,
    steps: u64,
) -> Result<Vec<GaugeCompareRow>, StepError> {
    let stat = |g: &GaugeField| GaugeField { chi: g.chi.clone(), chi_dot: ScalarField::zeros(grid) };
    let (chi_a, chi_b) = (stat(chi_a), stat(chi_b));
    let mut real = real0.clone();
    let mut ca = gauge_forward(grid, real0, &chi_a, params);
    let mut cb = gauge_forward(grid, real0, &chi_b, params);
    let mut rows = Vec::with_capacity(steps as usize);
    for i in 0..steps {
        real = dynamics::step(grid, &real, cfg, params, i)?.state;
        ca = complex_step(grid, &ca, cfg, params, i)?.state;
        cb = complex_step(grid, &cb, cfg, params, i)?.state;
        let ba = gauge_backward(grid, &ca, &chi_a, params);
        let bb = gauge_backward(grid, &cb, &chi_b, params);
        let modulus2 = grid
            .interior()
            .map(|k| (ca.psi(k).norm_sqr() - cb.psi(k).norm_sqr()).abs())
            .fold(0.0, f64::max);
        rows.push(GaugeCompareRow {
            step: i + 1,
            t: (i + 1) as f64 * cfg.dt,
            modulus2,
            v_s: ba.v_s.max_diff(&bb.v_s, grid),
            phi_s: ba.phi_s.max_diff(&bb.phi_s, grid),
            v_n: ba.v_n.max_diff(&bb.v_n, grid),
            rho: ba.rho.max_diff(&bb.rho, grid),
            theta: ba.theta.max_diff(&bb.theta, grid),
            p: ba.p.max_diff(&bb.p, grid),
            real: ba.max_diff(&real, grid),
        });
    }
    Ok(rows)
}
