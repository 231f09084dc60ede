//! The real-formulation unknowns and their initialisation.

use alloc::string::String;
use core::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::StateError;
use crate::grid::{Grid, ScalarBc, ScalarField, VectorBc, VectorField};

#[derive(Debug, Clone, PartialEq)]
pub struct FieldState {
    pub phi: ScalarField,
    pub v_s: VectorField,
    pub phi_s: ScalarField,
    pub v_n: VectorField,
    /// Dynamic pressure, mean pinned to zero.
    pub p: ScalarField,
    pub rho: ScalarField,
    pub theta: ScalarField,
}

/// Constant values for every field.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UniformInit {
    pub phi: f64,
    pub v_s: [f64; 3],
    pub v_n: [f64; 3],
    pub p: f64,
    pub rho: f64,
    pub theta: f64,
}

impl Default for UniformInit {
    fn default() -> Self {
        Self { phi: 0.0, v_s: [0.0; 3], v_n: [0.0; 3], p: 0.0, rho: 1.0, theta: 2.5 }
    }
}

/// Named analytic profiles layered over a uniform base.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Profile {
    /// `phi = low + (high - low)(1 + tanh((x - center Lx)/width))/2`.
    TanhInterface { center: f64, width: f64, low: f64, high: f64 },
    /// Seeded superposition of wall-compatible modes: cosines for the
    /// scalars, sines (vanishing on the walls) for the velocities.
    RandomSmooth(RandomSmooth),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RandomSmooth {
    pub seed: u64,
    pub modes: usize,
    pub amp_phi: f64,
    pub amp_theta: f64,
    pub amp_rho: f64,
    pub amp_vs: f64,
    pub amp_vn: f64,
}

impl Default for RandomSmooth {
    fn default() -> Self {
        Self { seed: 0, modes: 3, amp_phi: 0.1, amp_theta: 0.05, amp_rho: 0.05, amp_vs: 0.05, amp_vn: 0.0 }
    }
}

impl Profile {
    /// Parses a profile name into its default parameters.
    pub fn from_name(name: &str) -> Result<Self, StateError> {
        match name {
            "tanh-interface" => Ok(Profile::TanhInterface { center: 0.5, width: 0.1, low: 0.0, high: 0.8 }),
            "random-smooth" => Ok(Profile::RandomSmooth(RandomSmooth::default())),
            other => Err(StateError::UnknownProfile(String::from(other))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Init {
    Uniform(UniformInit),
    Profile { base: UniformInit, profile: Profile },
    /// Raw fields, e.g. read back from a snapshot.
    Fields(FieldState),
}

impl FieldState {
    pub fn uniform(grid: &Grid, u: &UniformInit) -> Self {
        Self {
            phi: ScalarField::constant(grid, u.phi),
            v_s: VectorField::constant(grid, u.v_s),
            phi_s: ScalarField::zeros(grid),
            v_n: VectorField::constant(grid, u.v_n),
            p: ScalarField::constant(grid, u.p),
            rho: ScalarField::constant(grid, u.rho),
            theta: ScalarField::constant(grid, u.theta),
        }
    }

    /// Re-imposes every wall rule by ghost reflection.
    pub fn apply_bcs(&mut self, grid: &Grid, omega_bc: f64) {
        self.v_s.enforce_dim(grid);
        self.v_n.enforce_dim(grid);
        for f in [&mut self.phi, &mut self.phi_s, &mut self.p, &mut self.rho, &mut self.theta] {
            f.fill_ghosts(grid, ScalarBc::NEUMANN);
        }
        self.v_s.fill_ghosts(grid, VectorBc::Slip { omega: omega_bc });
        self.v_n.fill_ghosts(grid, VectorBc::NoSlip);
    }

    /// Checks positivity of `rho`, `theta` and finiteness of everything.
    pub fn validate(&self, grid: &Grid) -> Result<(), StateError> {
        let len = grid.storage_len();
        for f in self.scalars() {
            if f.as_slice().len() != len {
                return Err(StateError::Shape { expected: len, got: f.as_slice().len() });
            }
        }
        for (name, f) in self.named_scalars() {
            if !f.interior_all_finite(grid) {
                return Err(StateError::NotFinite { field: name });
            }
        }
        for (name, v) in [("v_s", &self.v_s), ("v_n", &self.v_n)] {
            if !v.interior_all_finite(grid) {
                return Err(StateError::NotFinite { field: name });
            }
        }
        for (name, f) in [("rho", &self.rho), ("theta", &self.theta)] {
            let min = f.interior_min(grid);
            if !(min > 0.0) {
                return Err(StateError::Nonpositive { field: name, min });
            }
        }
        Ok(())
    }

    /// `max(phi^2) - 1` over the interior; positive values exceed the unit bound.
    pub fn phase_excess(&self, grid: &Grid) -> f64 {
        grid.interior().map(|k| self.phi[k] * self.phi[k]).fold(f64::NEG_INFINITY, f64::max) - 1.0
    }

    fn scalars(&self) -> [&ScalarField; 11] {
        [
            &self.phi, &self.phi_s, &self.p, &self.rho, &self.theta,
            &self.v_s.x, &self.v_s.y, &self.v_s.z, &self.v_n.x, &self.v_n.y, &self.v_n.z,
        ]
    }

    fn named_scalars(&self) -> [(&'static str, &ScalarField); 5] {
        [("phi", &self.phi), ("phi_s", &self.phi_s), ("p", &self.p), ("rho", &self.rho), ("theta", &self.theta)]
    }

    /// Max-norm distance over the interior across all fields.
    pub fn max_diff(&self, other: &Self, grid: &Grid) -> f64 {
        let a = self.scalars();
        let b = other.scalars();
        a.iter().zip(b.iter()).map(|(x, y)| x.max_diff(y, grid)).fold(0.0, f64::max)
    }
}

fn random_modes(rng: &mut ChaCha8Rng, modes: usize, amp: f64) -> alloc::vec::Vec<(usize, usize, f64)> {
    let mut out = alloc::vec::Vec::new();
    if amp == 0.0 {
        return out;
    }
    for a in 1..=modes {
        for b in 0..=modes {
            let c: f64 = rng.gen_range(-1.0..1.0);
            out.push((a, b, amp * c / (a * a + b * b) as f64));
        }
    }
    out
}

fn apply_random(grid: &Grid, st: &mut FieldState, base: &UniformInit, r: &RandomSmooth) {
    let mut rng = ChaCha8Rng::seed_from_u64(r.seed);
    let lx = grid.lx();
    let ly = grid.ly();
    let two_d = grid.is_2d();
    let cos_sum = |m: &[(usize, usize, f64)], x: f64, y: f64| -> f64 {
        m.iter()
            .map(|&(a, b, c)| {
                let ky = if two_d { libm::cos(b as f64 * PI * y / ly) } else if b == 0 { 1.0 } else { 0.0 };
                // a starts at 1, so shift to include the x-constant mode via a-1
                c * libm::cos((a - 1) as f64 * PI * x / lx) * ky
            })
            .sum()
    };
    let sin_sum = |m: &[(usize, usize, f64)], x: f64, y: f64| -> f64 {
        m.iter()
            .map(|&(a, b, c)| {
                let ky = if two_d { libm::sin((b + 1) as f64 * PI * y / ly) } else if b == 0 { 1.0 } else { 0.0 };
                c * libm::sin(a as f64 * PI * x / lx) * ky
            })
            .sum()
    };
    let mphi = random_modes(&mut rng, r.modes, r.amp_phi);
    let mth = random_modes(&mut rng, r.modes, r.amp_theta);
    let mrho = random_modes(&mut rng, r.modes, r.amp_rho);
    let mvs: [_; 3] = core::array::from_fn(|_| random_modes(&mut rng, r.modes, r.amp_vs));
    let mvn: [_; 3] = core::array::from_fn(|_| random_modes(&mut rng, r.modes, r.amp_vn));
    st.phi = ScalarField::from_fn(grid, |x, y| base.phi + cos_sum(&mphi, x, y));
    st.theta = ScalarField::from_fn(grid, |x, y| base.theta * (1.0 + cos_sum(&mth, x, y)));
    st.rho = ScalarField::from_fn(grid, |x, y| base.rho * (1.0 + cos_sum(&mrho, x, y)));
    st.v_s = VectorField::from_fn(grid, |x, y| core::array::from_fn(|c| base.v_s[c] + sin_sum(&mvs[c], x, y)));
    st.v_n = VectorField::from_fn(grid, |x, y| core::array::from_fn(|c| base.v_n[c] + sin_sum(&mvn[c], x, y)));
}

/// Builds a validated state with every wall rule imposed.
pub fn new_state(grid: &Grid, init: &Init, omega_bc: f64) -> Result<FieldState, StateError> {
    let mut st = match init {
        Init::Uniform(u) => FieldState::uniform(grid, u),
        Init::Profile { base, profile } => {
            let mut st = FieldState::uniform(grid, base);
            match profile {
                Profile::TanhInterface { center, width, low, high } => {
                    let xc = center * grid.lx();
                    st.phi = ScalarField::from_fn(grid, |x, _| {
                        low + (high - low) * 0.5 * (1.0 + libm::tanh((x - xc) / width))
                    });
                }
                Profile::RandomSmooth(r) => apply_random(grid, &mut st, base, r),
            }
            st
        }
        Init::Fields(f) => f.clone(),
    };
    st.validate(grid)?;
    st.apply_bcs(grid, omega_bc);
    Ok(st)
}
