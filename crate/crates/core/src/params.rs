//! Constitutive constants and source terms.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use crate::grid::{ScalarField, VectorField};

/// Body force per unit mass.
#[derive(Debug, Clone, PartialEq)]
pub enum BodyForce {
    Uniform([f64; 3]),
    Sampled(VectorField),
}

impl BodyForce {
    #[inline]
    pub fn at(&self, k: usize) -> [f64; 3] {
        match self {
            BodyForce::Uniform(g) => *g,
            BodyForce::Sampled(f) => f.at(k),
        }
    }

    pub fn is_zero(&self) -> bool {
        matches!(self, BodyForce::Uniform(g) if g.iter().all(|&c| c == 0.0))
    }
}

/// Heat supply per unit mass.
#[derive(Debug, Clone, PartialEq)]
pub enum HeatSupply {
    Uniform(f64),
    Sampled(ScalarField),
}

impl HeatSupply {
    #[inline]
    pub fn at(&self, k: usize) -> f64 {
        match self {
            HeatSupply::Uniform(r) => *r,
            HeatSupply::Sampled(f) => f[k],
        }
    }
}

/// All model constants. Dimensionless; `theta_lambda` defaults to 2.17.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams {
    /// Relaxation coefficient of the order parameter.
    pub tau: f64,
    /// Gradient-penalty coefficient (enters as `1/kappa^2`).
    pub kappa: f64,
    /// Bulk viscosity of the normal component.
    pub nu: f64,
    /// Pressure coupling: slope of the transition line is `-1/lambda`.
    pub lambda: f64,
    pub theta_lambda: f64,
    /// Constant specific heat, `e0(theta) = c0 * theta`.
    pub c0: f64,
    pub k0_const: f64,
    pub k0_slope: f64,
    /// Regularisation of the superfluid-pressure division.
    pub eps_reg: f64,
    pub g: BodyForce,
    pub r: HeatSupply,
    /// Wall datum for `(curl v_s) x n`.
    pub omega_bc: f64,
}

impl Default for ModelParams {
    fn default() -> Self {
        Self {
            tau: 1.0,
            kappa: 1.0,
            nu: 0.0,
            lambda: 0.1,
            theta_lambda: 2.17,
            c0: 1.0,
            k0_const: 1.0,
            k0_slope: 0.0,
            eps_reg: 1e-10,
            g: BodyForce::Uniform([0.0; 3]),
            r: HeatSupply::Uniform(0.0),
            omega_bc: 0.0,
        }
    }
}

impl ModelParams {
    /// Thermal conductivity `k0(theta) = k0_const + k0_slope * theta`.
    #[inline]
    pub fn k0(&self, theta: f64) -> f64 {
        self.k0_const + self.k0_slope * theta
    }

    #[inline]
    pub fn inv_kappa2(&self) -> f64 {
        1.0 / (self.kappa * self.kappa)
    }

    /// Checks the sign constraints on `theta_range = [lo, hi]`.
    ///
    /// Returns an empty list when the parameters are admissible. The
    /// conductivity law is affine, so its sign is checked at the endpoints.
    pub fn validate(&self, theta_range: (f64, f64)) -> Vec<String> {
        let mut out = Vec::new();
        let (lo, hi) = theta_range;
        if !(lo > 0.0 && hi >= lo && hi.is_finite()) {
            out.push(format!("theta range [{lo}, {hi}] must be nonempty and positive"));
        }
        let positive = [("tau", self.tau), ("kappa", self.kappa), ("theta_lambda", self.theta_lambda), ("c0", self.c0)];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                out.push(format!("{name} must be positive"));
            }
        }
        if !(self.nu >= 0.0) {
            out.push(String::from("nu negative"));
        }
        if !(self.lambda >= 0.0) {
            out.push(String::from("lambda negative"));
        }
        if !(self.eps_reg >= 0.0) {
            out.push(String::from("eps_reg negative"));
        }
        let worst = if self.k0(hi) < self.k0(lo) { hi } else { lo };
        if self.k0(worst) < 0.0 {
            out.push(format!("k0 negative at θ={worst}"));
        }
        out
    }
}

/// Free-function form of [`ModelParams::validate`].
pub fn validate_params(params: &ModelParams, theta_range: (f64, f64)) -> Vec<String> {
    params.validate(theta_range)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn admissible_defaults() {
        let p = ModelParams { nu: 0.0, lambda: 0.1, ..Default::default() };
        assert!(validate_params(&p, (1.0, 3.0)).is_empty());
    }

    #[test]
    fn negative_viscosity_reported() {
        let p = ModelParams { nu: -0.1, ..Default::default() };
        assert_eq!(validate_params(&p, (1.0, 3.0)), ["nu negative"]);
    }

    #[test]
    fn conductivity_sign_checked_at_endpoints() {
        // 0.1 - 1*theta: positive at theta=0.05, negative from theta=0.1 on
        let p = ModelParams { k0_const: 0.1, k0_slope: -1.0, ..Default::default() };
        let v = validate_params(&p, (1.0, 3.0));
        assert_eq!(v, ["k0 negative at θ=3"]);
        assert!(validate_params(&p, (0.01, 0.05)).is_empty());
    }
}
