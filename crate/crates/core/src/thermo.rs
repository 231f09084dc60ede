//! Pointwise constitutive functions: the double-well potentials, the
//! stationary order parameter, energies, entropy, heat flux, latent heat.
//!
//! The purely thermal parts of the free and internal energies are closed
//! with a constant specific heat:
//!
//! ```text
//! Psi0(theta) = -c0 theta ln(theta),   e0(theta) = c0 theta
//! ```
//!
//! which satisfies `Psi0 - theta Psi0' = e0`, the relation obtained by
//! differentiating the free energy directly.

use crate::error::ThermoError;
use crate::params::ModelParams;

/// `F(phi) = phi^4/4 - phi^2/2`, `G(phi) = phi^2/2`, `W = theta_lambda F + m G`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PotentialEval {
    pub f: f64,
    pub df: f64,
    pub g: f64,
    pub dg: f64,
    pub w: f64,
    pub dw: f64,
}

#[inline]
pub fn potential_f(phi: f64) -> f64 {
    let p2 = phi * phi;
    0.25 * p2 * p2 - 0.5 * p2
}

#[inline]
pub fn potential_f_prime(phi: f64) -> f64 {
    phi * phi * phi - phi
}

pub fn potential_w(phi: f64, m: f64, params: &ModelParams) -> PotentialEval {
    let f = potential_f(phi);
    let df = potential_f_prime(phi);
    let g = 0.5 * phi * phi;
    let dg = phi;
    PotentialEval { f, df, g, dg, w: params.theta_lambda * f + m * g, dw: params.theta_lambda * df + m * dg }
}

/// Nonnegative global minimiser of `W` for tilt `m`.
///
/// Lies in `[0, 1]` for `m >= 0`; a negative tilt (possible when the normal
/// velocity dominates) pushes the minimiser above 1.
pub fn stationary_phase(m: f64, params: &ModelParams) -> f64 {
    if m >= params.theta_lambda {
        0.0
    } else {
        libm::sqrt(1.0 - m / params.theta_lambda)
    }
}

#[inline]
fn check_theta(theta: f64) -> Result<(), ThermoError> {
    if theta > 0.0 {
        Ok(())
    } else {
        Err(ThermoError::NonpositiveTemperature(theta))
    }
}

#[inline]
pub fn psi0(theta: f64, params: &ModelParams) -> f64 {
    -params.c0 * theta * libm::log(theta)
}

#[inline]
pub fn psi0_prime(theta: f64, params: &ModelParams) -> f64 {
    -params.c0 * (libm::log(theta) + 1.0)
}

#[inline]
pub fn e0(theta: f64, params: &ModelParams) -> f64 {
    params.c0 * theta
}

#[inline]
pub fn e0_prime(_theta: f64, params: &ModelParams) -> f64 {
    params.c0
}

#[inline]
fn norm2(v: [f64; 3]) -> f64 {
    v[0] * v[0] + v[1] * v[1] + v[2] * v[2]
}

/// Helmholtz free energy density.
pub fn free_energy_density(phi: f64, grad_phi: [f64; 3], theta: f64, params: &ModelParams) -> Result<f64, ThermoError> {
    check_theta(theta)?;
    Ok(params.theta_lambda * potential_f(phi)
        + 0.5 * theta * phi * phi
        + 0.5 * params.inv_kappa2() * norm2(grad_phi)
        + psi0(theta, params))
}

/// `d Psi / d phi = theta_lambda phi (phi^2 - 1) + theta phi`.
pub fn free_energy_dphi(phi: f64, theta: f64, params: &ModelParams) -> f64 {
    params.theta_lambda * phi * (phi * phi - 1.0) + theta * phi
}

/// Entropy density `-phi^2/2 - Psi0'(theta)`.
pub fn entropy_density(phi: f64, theta: f64, params: &ModelParams) -> Result<f64, ThermoError> {
    check_theta(theta)?;
    Ok(-0.5 * phi * phi - psi0_prime(theta, params))
}

pub fn internal_energy_density(phi: f64, grad_phi: [f64; 3], theta: f64, params: &ModelParams) -> Result<f64, ThermoError> {
    check_theta(theta)?;
    Ok(0.5 * params.inv_kappa2() * norm2(grad_phi) + params.theta_lambda * potential_f(phi) + e0(theta, params))
}

/// Kinetic part `phi^2 |v_s|^2 / 2 + (1 - phi^2) |v_n|^2 / 2`.
#[inline]
pub fn kinetic_energy_density(phi: f64, v_s: [f64; 3], v_n: [f64; 3]) -> f64 {
    let p2 = phi * phi;
    0.5 * p2 * norm2(v_s) + 0.5 * (1.0 - p2) * norm2(v_n)
}

pub fn total_energy_density(
    phi: f64,
    grad_phi: [f64; 3],
    theta: f64,
    v_s: [f64; 3],
    v_n: [f64; 3],
    params: &ModelParams,
) -> Result<f64, ThermoError> {
    Ok(internal_energy_density(phi, grad_phi, theta, params)? + kinetic_energy_density(phi, v_s, v_n))
}

/// `q = -k0(theta) grad(theta) - rho phi^2 theta (v_s - v_n)`.
pub fn heat_flux(
    phi: f64,
    theta: f64,
    grad_theta: [f64; 3],
    v_s: [f64; 3],
    v_n: [f64; 3],
    rho: f64,
    params: &ModelParams,
) -> [f64; 3] {
    let k = params.k0(theta);
    let w = rho * phi * phi * theta;
    core::array::from_fn(|c| -k * grad_theta[c] - w * (v_s[c] - v_n[c]))
}

/// Latent heat of the transition, `theta_lambda [eta(phi0) - eta(0)]` at
/// `theta = theta_lambda`, with `phi0` the stationary phase at `m = theta_lambda`.
pub fn latent_heat(params: &ModelParams) -> f64 {
    latent_heat_with_phase(stationary_phase(params.theta_lambda, params), params)
}

/// Latent heat for a prescribed order parameter of the ordered branch.
pub fn latent_heat_with_phase(phi0: f64, params: &ModelParams) -> f64 {
    let theta = params.theta_lambda;
    let ordered = entropy_density(phi0, theta, params).unwrap_or(f64::NAN);
    let normal = entropy_density(0.0, theta, params).unwrap_or(f64::NAN);
    theta * (ordered - normal)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params() -> ModelParams {
        ModelParams::default()
    }

    /// Golden-section minimisation on [a, b].
    fn golden_min(f: impl Fn(f64) -> f64, mut a: f64, mut b: f64, tol: f64) -> f64 {
        let r = (libm::sqrt(5.0) - 1.0) / 2.0;
        let mut c = b - r * (b - a);
        let mut d = a + r * (b - a);
        while (b - a).abs() > tol {
            if f(c) < f(d) {
                b = d;
            } else {
                a = c;
            }
            c = b - r * (b - a);
            d = a + r * (b - a);
        }
        0.5 * (a + b)
    }

    #[test]
    fn origin_is_stationary() {
        for m in [0.0, 1.0, 5.0] {
            let e = potential_w(0.0, m, &params());
            assert_eq!((e.w, e.dw), (0.0, 0.0));
        }
    }

    #[test]
    fn w_at_one_with_m_theta_lambda() {
        let p = params();
        let e = potential_w(1.0, p.theta_lambda, &p);
        assert!((e.w - p.theta_lambda / 4.0).abs() < 1e-15);
    }

    #[test]
    fn derivatives_match_finite_differences() {
        let p = params();
        let m = 1.3;
        let h = 1e-5;
        for k in 0..=400 {
            let phi = -2.0 + 4.0 * k as f64 / 400.0;
            let e = potential_w(phi, m, &p);
            let ep = potential_w(phi + h, m, &p);
            let em = potential_w(phi - h, m, &p);
            for (exact, fd) in [
                (e.df, (ep.f - em.f) / (2.0 * h)),
                (e.dg, (ep.g - em.g) / (2.0 * h)),
                (e.dw, (ep.w - em.w) / (2.0 * h)),
            ] {
                assert!((exact - fd).abs() <= 1e-6 * exact.abs().max(1.0), "phi={phi}: {exact} vs {fd}");
            }
            assert_eq!(e.df, phi * phi * phi - phi);
        }
    }

    #[test]
    fn potentials_even_derivatives_odd() {
        let p = params();
        for phi in [0.1, 0.7, 1.3, 2.0] {
            let a = potential_w(phi, 0.8, &p);
            let b = potential_w(-phi, 0.8, &p);
            assert_eq!(a.f, b.f);
            assert_eq!(a.g, b.g);
            assert_eq!(a.df, -b.df);
            assert_eq!(a.dg, -b.dg);
        }
    }

    #[test]
    fn stationary_phase_limits() {
        let p = params();
        assert_eq!(stationary_phase(p.theta_lambda, &p), 0.0);
        assert_eq!(stationary_phase(0.0, &p), 1.0);
        assert_eq!(stationary_phase(3.0 * p.theta_lambda, &p), 0.0);
    }

    #[test]
    fn stationary_phase_half_tilt_against_golden_section() {
        let p = params();
        let m = 1.085;
        let oracle = golden_min(|x| potential_w(x, m, &p).w, 0.0, 1.0, 1e-10);
        assert!((oracle - core::f64::consts::FRAC_1_SQRT_2).abs() < 1e-8);
        assert!((stationary_phase(m, &p) - oracle).abs() < 1e-8);
    }

    #[test]
    fn dw_changes_sign_across_minimiser() {
        let p = params();
        let m = 0.9;
        let phi0 = golden_min(|x| potential_w(x, m, &p).w, 0.0, 1.0, 1e-12);
        assert!(potential_w(phi0 - 1e-3, m, &p).dw < 0.0);
        assert!(potential_w(phi0 + 1e-3, m, &p).dw > 0.0);
    }

    #[test]
    fn stationary_phase_is_global_minimiser() {
        let p = params();
        for a in 0..=40 {
            let m = 2.0 * p.theta_lambda * a as f64 / 40.0;
            let phi0 = stationary_phase(m, &p);
            let w0 = potential_w(phi0, m, &p).w;
            for k in 0..1000 {
                let phi = -1.5 + 3.0 * k as f64 / 999.0;
                assert!(w0 <= potential_w(phi, m, &p).w + 1e-14, "m={m} phi={phi}");
            }
        }
    }

    #[test]
    fn stationary_phase_monotone_and_continuous() {
        let p = params();
        let mut prev = stationary_phase(0.0, &p);
        for k in 1..=2000 {
            let m = p.theta_lambda * k as f64 / 2000.0;
            let v = stationary_phase(m, &p);
            assert!(v <= prev);
            // sqrt modulus of continuity: |dphi| <= sqrt(dm/theta_lambda)
            assert!(prev - v <= libm::sqrt(p.theta_lambda / 2000.0 / p.theta_lambda) + 1e-12);
            prev = v;
        }
        assert_eq!(stationary_phase(p.theta_lambda * 1.5, &p), 0.0);
    }

    #[test]
    fn free_energy_values() {
        let p = params();
        assert_eq!(free_energy_density(0.0, [0.0; 3], 1.0, &p).unwrap(), 0.0);
        let th = 1.7;
        let got = free_energy_density(1.0, [0.0; 3], th, &p).unwrap();
        assert!((got - (-p.theta_lambda / 4.0 + th / 2.0 + psi0(th, &p))).abs() < 1e-14);
        assert!(free_energy_density(0.5, [0.0; 3], 0.0, &p).is_err());
    }

    #[test]
    fn free_energy_phase_derivative() {
        let p = params();
        let h = 1e-6;
        for (phi, th) in [(0.3, 1.2), (0.9, 2.5), (-0.4, 0.7)] {
            let fd = (free_energy_density(phi + h, [0.0; 3], th, &p).unwrap()
                - free_energy_density(phi - h, [0.0; 3], th, &p).unwrap())
                / (2.0 * h);
            assert!((fd - free_energy_dphi(phi, th, &p)).abs() < 1e-8);
        }
    }

    #[test]
    fn entropy_values() {
        let p = params();
        assert!((entropy_density(0.0, 1.0, &p).unwrap() - 1.0).abs() < 1e-15);
        let s = |th| entropy_density(0.4, th, &p).unwrap();
        for th in [0.5, 1.0, 2.17, 3.0] {
            let h = 1e-6;
            let fd = (s(th + h) - s(th - h)) / (2.0 * h);
            assert!((fd - p.c0 / th).abs() < 1e-7);
            assert!(fd > 0.0);
        }
        assert!(entropy_density(0.0, -1.0, &p).is_err());
    }

    #[test]
    fn thermodynamic_consistency_pointwise() {
        let p = ModelParams { c0: 1.7, ..params() };
        let h = 1e-5;
        for (phi, th, gp) in [(0.2, 1.1, [0.3, 0.0, 0.1]), (0.8, 2.4, [0.0, -1.0, 0.0]), (0.0, 0.6, [0.0; 3])] {
            let psi = |t| free_energy_density(phi, gp, t, &p).unwrap();
            let dpsi = (psi(th + h) - psi(th - h)) / (2.0 * h);
            let e = internal_energy_density(phi, gp, th, &p).unwrap();
            let eta = entropy_density(phi, th, &p).unwrap();
            assert!((e - (psi(th) - th * dpsi)).abs() < 1e-9);
            assert!((eta + dpsi).abs() < 1e-9);
            // exact identity with the analytic derivative
            assert!((e - (psi(th) + th * eta)).abs() < 1e-12);
        }
    }

    #[test]
    fn internal_energy_values() {
        let p = params();
        assert_eq!(internal_energy_density(0.0, [0.0; 3], 1.5, &p).unwrap(), 1.5);
        let e = internal_energy_density(1.0, [0.0; 3], 2.0, &p).unwrap();
        assert!((e - (-0.5425 + 2.0)).abs() < 1e-14);
    }

    #[test]
    fn total_energy_kinetic_parts() {
        let p = params();
        let e = internal_energy_density(0.3, [0.1, 0.0, 0.0], 2.0, &p).unwrap();
        assert_eq!(total_energy_density(0.3, [0.1, 0.0, 0.0], 2.0, [0.0; 3], [0.0; 3], &p).unwrap(), e);
        assert_eq!(kinetic_energy_density(1.0, [0.6, 0.8, 0.0], [5.0, 0.0, 0.0]), 0.5);
        let phi = libm::sqrt(0.5);
        assert!((kinetic_energy_density(phi, [1.0, 0.0, 0.0], [0.0, 1.0, 0.0]) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn heat_flux_cases() {
        let p = ModelParams { k0_const: 0.7, k0_slope: 0.1, ..params() };
        let gt = [0.3, -0.2, 0.0];
        let q = heat_flux(0.0, 2.0, gt, [1.0, 2.0, 3.0], [0.0; 3], 1.0, &p);
        let k = p.k0(2.0);
        assert_eq!(q, [-k * 0.3, k * 0.2, 0.0]);
        assert_eq!(heat_flux(0.7, 2.0, [0.0; 3], [0.5; 3], [0.5; 3], 1.3, &p), [0.0; 3]);
        assert_eq!(heat_flux(1.0, 2.0, [0.0; 3], [1.0, 0.0, 0.0], [0.0; 3], 1.0, &p), [-2.0, 0.0, 0.0]);
    }

    #[test]
    fn latent_heat_vanishes() {
        assert_eq!(latent_heat(&params()), 0.0);
        for c0 in [0.1, 1.0, 17.0] {
            for tl in [0.5, 2.17, 4.0] {
                let p = ModelParams { c0, theta_lambda: tl, ..params() };
                assert_eq!(latent_heat(&p), 0.0);
            }
        }
    }

    #[test]
    fn latent_heat_formula_is_wired() {
        let p = params();
        let l = latent_heat_with_phase(0.5, &p);
        assert!((l - (-p.theta_lambda * 0.125)).abs() < 1e-14);
    }
}
