//! Homogeneous equilibria over the (θ, p) plane, extraction of the
//! transition line, and relaxation of the spatially uniform phase equation.

use alloc::vec::Vec;

use crate::error::SweepError;
use crate::params::ModelParams;
use crate::thermo::stationary_phase;

/// Equilibrium order parameter of a uniform state. Requires `theta > 0`.
pub fn equilibrium_phase(theta: f64, p: f64, vs2: f64, vn2: f64, params: &ModelParams) -> f64 {
    stationary_phase(theta + params.lambda * p + vs2 - vn2, params)
}

/// Equilibrium map on a rectangular grid, stored p-major:
/// `phi[ip * theta.len() + it]`.
#[derive(Debug, Clone, PartialEq)]
pub struct PhaseMap {
    pub theta: Vec<f64>,
    pub p: Vec<f64>,
    pub phi: Vec<f64>,
}

impl PhaseMap {
    pub fn at(&self, it: usize, ip: usize) -> f64 {
        self.phi[ip * self.theta.len() + it]
    }
}

/// Least-squares fit `theta = intercept + theta_slope * p`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LineFit {
    pub intercept: f64,
    pub theta_slope: f64,
}

impl LineFit {
    /// `dp/dθ`, or `None` for a vertical line.
    pub fn slope(&self) -> Option<f64> {
        if self.theta_slope.abs() < 1e-12 {
            None
        } else {
            Some(1.0 / self.theta_slope)
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LambdaLine {
    /// `(p, theta_line)` for every pressure with a crossing in the window.
    pub points: Vec<(f64, f64)>,
    /// Pressures whose row has no crossing.
    pub skipped: Vec<f64>,
    /// Needs at least two points.
    pub fit: Option<LineFit>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Sweep {
    pub map: PhaseMap,
    pub line: LambdaLine,
}

fn strictly_increasing(v: &[f64]) -> bool {
    v.len() >= 2 && v.windows(2).all(|w| w[0] < w[1]) && v.iter().all(|x| x.is_finite())
}

pub fn sweep(theta_grid: &[f64], p_grid: &[f64], params: &ModelParams) -> Result<Sweep, SweepError> {
    sweep_with_flow(theta_grid, p_grid, 0.0, 0.0, params)
}

/// Sweep at fixed squared velocities.
pub fn sweep_with_flow(
    theta_grid: &[f64],
    p_grid: &[f64],
    vs2: f64,
    vn2: f64,
    params: &ModelParams,
) -> Result<Sweep, SweepError> {
    if !strictly_increasing(theta_grid) {
        return Err(SweepError::BadAxis { axis: "theta" });
    }
    if !strictly_increasing(p_grid) {
        return Err(SweepError::BadAxis { axis: "p" });
    }
    let nt = theta_grid.len();
    let mut phi = Vec::with_capacity(nt * p_grid.len());
    for &p in p_grid {
        for &th in theta_grid {
            phi.push(equilibrium_phase(th, p, vs2, vn2, params));
        }
    }
    let mut points = Vec::new();
    let mut skipped = Vec::new();
    for (ip, &p) in p_grid.iter().enumerate() {
        let row = &phi[ip * nt..(ip + 1) * nt];
        match row_crossing(theta_grid, row) {
            Some(th) => points.push((p, th)),
            None => skipped.push(p),
        }
    }
    if points.is_empty() {
        return Err(SweepError::NoContour);
    }
    let fit = fit_line(&points);
    Ok(Sweep { map: PhaseMap { theta: theta_grid.to_vec(), p: p_grid.to_vec(), phi }, line: LambdaLine { points, skipped, fit } })
}

/// Zero crossing of one row. `phi^2` is affine in θ on the ordered side, so
/// it is extrapolated from the last two ordered samples and clamped to the
/// bracketing interval; a single ordered sample falls back to interpolating
/// `phi` itself.
fn row_crossing(theta: &[f64], phi: &[f64]) -> Option<f64> {
    let j = phi.iter().position(|&v| v <= 0.0)?;
    if j == 0 {
        return None;
    }
    let (ta, tb) = (theta[j - 1], theta[j]);
    let a2 = phi[j - 1] * phi[j - 1];
    let est = if j >= 2 {
        let t0 = theta[j - 2];
        let b2 = phi[j - 2] * phi[j - 2];
        let slope = (a2 - b2) / (ta - t0);
        if slope < 0.0 {
            ta - a2 / slope
        } else {
            tb
        }
    } else {
        ta + phi[j - 1] / (phi[j - 1] - phi[j]) * (tb - ta)
    };
    Some(est.clamp(ta, tb))
}

fn fit_line(points: &[(f64, f64)]) -> Option<LineFit> {
    if points.len() < 2 {
        return None;
    }
    let n = points.len() as f64;
    let mp = points.iter().map(|q| q.0).sum::<f64>() / n;
    let mt = points.iter().map(|q| q.1).sum::<f64>() / n;
    let spp: f64 = points.iter().map(|q| (q.0 - mp) * (q.0 - mp)).sum();
    let spt: f64 = points.iter().map(|q| (q.0 - mp) * (q.1 - mt)).sum();
    let theta_slope = spt / spp;
    Some(LineFit { intercept: mt - theta_slope * mp, theta_slope })
}

/// Time samples of a homogeneous relaxation.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub t: Vec<f64>,
    pub phi: Vec<f64>,
}

impl Trajectory {
    pub fn terminal(&self) -> f64 {
        *self.phi.last().unwrap_or(&f64::NAN)
    }
}

fn phase_rate(phi: f64, m: f64, params: &ModelParams) -> f64 {
    (-params.theta_lambda * phi * (phi * phi - 1.0) - m * phi) / params.tau
}

/// Integration time long enough for the linearised decay to shrink the
/// initial offset below roundoff.
pub fn default_t_end(m: f64, phi0: f64, params: &ModelParams) -> f64 {
    let rate = 2.0 * (params.theta_lambda - m).abs().max(1e-6 * params.theta_lambda) / params.tau;
    let lead = libm::log(1.0 / phi0.max(1e-300)).max(0.0);
    ((40.0 + lead) / rate).min(1e8 * params.tau)
}

/// `tau phi' = -theta_lambda phi (phi^2 - 1) - m phi` at fixed tilt.
pub fn relax_tilt(m: f64, phi0: f64, t_end: f64, params: &ModelParams) -> Trajectory {
    dopri45(|y| phase_rate(y, m, params), phi0, t_end, 1e-12, 1e-13)
}

pub fn relax_to_equilibrium(
    theta: f64,
    p: f64,
    vs2: f64,
    phi0: f64,
    t_end: Option<f64>,
    params: &ModelParams,
) -> Trajectory {
    let m = theta + params.lambda * p + vs2;
    let t_end = t_end.unwrap_or_else(|| default_t_end(m, phi0, params));
    relax_tilt(m, phi0, t_end, params)
}

/// Scalar autonomous Dormand–Prince 5(4) with step-size control.
fn dopri45(f: impl Fn(f64) -> f64, y0: f64, t_end: f64, rtol: f64, atol: f64) -> Trajectory {
    const A: [[f64; 6]; 7] = [
        [0.0; 6],
        [0.2, 0.0, 0.0, 0.0, 0.0, 0.0],
        [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
        [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
        [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0, 0.0, 0.0],
        [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0, 0.0],
        [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
    ];
    const B5: [f64; 7] = [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0, 0.0];
    const B4: [f64; 7] =
        [5179.0 / 57600.0, 0.0, 7571.0 / 16695.0, 393.0 / 640.0, -92097.0 / 339200.0, 187.0 / 2100.0, 1.0 / 40.0];

    let mut t = 0.0;
    let mut y = y0;
    let mut out = Trajectory { t: Vec::from([0.0]), phi: Vec::from([y0]) };
    let mut h = (t_end * 1e-3).clamp(1e-12, 1e-2);
    let mut k = [0.0; 7];
    k[0] = f(y);
    while t < t_end {
        h = h.min(t_end - t);
        for s in 1..7 {
            let mut ys = y;
            for j in 0..s {
                ys += h * A[s][j] * k[j];
            }
            k[s] = f(ys);
        }
        let mut y5 = y;
        let mut y4 = y;
        for s in 0..7 {
            y5 += h * B5[s] * k[s];
            y4 += h * B4[s] * k[s];
        }
        let sc = atol + rtol * y.abs().max(y5.abs());
        let err = (y5 - y4).abs() / sc;
        if err <= 1.0 {
            t += h;
            y = y5;
            // first-same-as-last
            k[0] = k[6];
            out.t.push(t);
            out.phi.push(y);
        }
        let fac = if err == 0.0 { 5.0 } else { (0.9 * libm::pow(err, -0.2)).clamp(0.2, 5.0) };
        h *= fac;
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn axis(lo: f64, hi: f64, n: usize) -> Vec<f64> {
        (0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect()
    }

    #[test]
    fn equilibrium_examples() {
        let params = ModelParams::default();
        assert_eq!(equilibrium_phase(params.theta_lambda, 0.0, 0.0, 0.0, &params), 0.0);
        for p in [0.0, 0.7, 2.5] {
            let th = params.theta_lambda - params.lambda * p;
            assert!(equilibrium_phase(th, p, 0.0, 0.0, &params) < 1e-7);
        }
        let p0 = ModelParams { lambda: 0.0, ..Default::default() };
        let want = libm::sqrt(1.0 - 1.0 / 2.17);
        assert!((equilibrium_phase(1.0, 0.0, 0.0, 0.0, &p0) - want).abs() < 1e-14);
        assert!((want - 0.73428).abs() < 1e-5);
    }

    #[test]
    fn vertical_line_without_pressure_coupling() {
        let params = ModelParams { lambda: 0.0, ..Default::default() };
        let s = sweep(&axis(0.5, 3.0, 200), &axis(0.0, 3.0, 50), &params).unwrap();
        assert_eq!(s.line.points.len(), 50);
        for &(_, th) in &s.line.points {
            assert!((th - 2.17).abs() < 1e-9);
        }
        assert!(s.line.fit.unwrap().slope().is_none());
    }

    #[test]
    fn slope_is_minus_inverse_lambda() {
        let params = ModelParams { lambda: 0.5, ..Default::default() };
        let th = axis(0.5, 3.0, 200);
        let s = sweep(&th, &axis(0.0, 3.0, 50), &params).unwrap();
        let slope = s.line.fit.unwrap().slope().unwrap();
        assert!((slope + 2.0).abs() < 0.04, "{slope}");
        let dth = th[1] - th[0];
        for &(p, t) in &s.line.points {
            assert!((t - (2.17 - 0.5 * p)).abs() <= dth);
        }
    }

    #[test]
    fn superfluid_flow_shifts_the_line() {
        let params = ModelParams { lambda: 0.1, ..Default::default() };
        let s = sweep_with_flow(&axis(0.5, 3.0, 200), &axis(0.0, 3.0, 50), 0.3, 0.0, &params).unwrap();
        for &(p, t) in &s.line.points {
            assert!((t + 0.1 * p - (2.17 - 0.3)).abs() < 1e-9);
        }
    }

    #[test]
    fn sweep_errors() {
        let params = ModelParams::default();
        assert_eq!(sweep(&[1.0, 1.0, 2.0], &[0.0, 1.0], &params), Err(SweepError::BadAxis { axis: "theta" }));
        assert_eq!(sweep(&[1.0, 2.0], &[0.0], &params), Err(SweepError::BadAxis { axis: "p" }));
        assert_eq!(sweep(&[0.5, 1.0, 1.5], &[0.0, 1.0], &params), Err(SweepError::NoContour));
    }

    #[test]
    fn partial_window_skips_rows() {
        let params = ModelParams { lambda: 1.0, ..Default::default() };
        let s = sweep(&axis(1.0, 3.0, 100), &axis(0.0, 2.0, 21), &params).unwrap();
        assert!(!s.line.skipped.is_empty());
        assert!(s.line.points.iter().all(|&(p, _)| p <= 1.17 + 1e-9));
    }

    #[test]
    fn relaxation_examples() {
        let params = ModelParams::default();
        let tl = params.theta_lambda;
        let normal = relax_tilt(tl + 0.5, 0.9, default_t_end(tl + 0.5, 0.9, &params), &params);
        assert!(normal.terminal().abs() < 1e-6);
        let grow = relax_tilt(0.0, 0.1, default_t_end(0.0, 0.1, &params), &params);
        assert!((grow.terminal() - 1.0).abs() < 1e-6);
        let half = relax_tilt(tl / 2.0, 0.5, default_t_end(tl / 2.0, 0.5, &params), &params);
        assert!((half.terminal() - core::f64::consts::FRAC_1_SQRT_2).abs() < 1e-6);
    }

    #[test]
    fn dopri_matches_logistic_closed_form() {
        // y' = y (1 - y), y(0) = 0.1
        let tr = dopri45(|y| y * (1.0 - y), 0.1, 5.0, 1e-12, 1e-13);
        let exact = 1.0 / (1.0 + 9.0 * libm::exp(-5.0));
        assert!((tr.terminal() - exact).abs() < 1e-10);
        assert_eq!(*tr.t.last().unwrap(), 5.0);
    }
}
