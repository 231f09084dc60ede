//! The four subcommands. Each returns a [`Failure`] whose exit code tells
//! a bad config (1) from a numerical failure (2) and a violated invariant (3).

use std::f64::consts::PI;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use helium_gl_core::diagnostics::{self, DiagnosticsReport};
use helium_gl_core::gauge::{gauge_compare as compare, GaugeField, GaugeProfile};
use helium_gl_core::phase_diagram::sweep_with_flow;
use helium_gl_core::{dynamics, grid, ops, thermo};
use helium_gl_core::{new_state, FieldState, Grid, Init, MaterialDerivative, ModelParams, ScalarField, SweepError, VectorField};
use thiserror::Error;

use crate::config::{Config, InitSpec};
use crate::{output, snapshot};

#[derive(Debug, Error)]
pub enum Failure {
    #[error("config error: {0}")]
    Config(String),
    #[error("numerical failure: {0}")]
    Numerical(String),
    #[error("invariant violated: {0}")]
    Invariant(String),
}

impl Failure {
    pub fn exit_code(&self) -> i32 {
        match self {
            Failure::Config(_) => 1,
            Failure::Numerical(_) => 2,
            Failure::Invariant(_) => 3,
        }
    }
}

fn io(path: &Path, e: std::io::Error) -> Failure {
    Failure::Config(format!("{}: {e}", path.display()))
}

fn write(path: PathBuf, text: &str) -> Result<(), Failure> {
    fs::write(&path, text).map_err(|e| io(&path, e))
}

fn out_dir(cfg: &Config) -> Result<&Path, Failure> {
    let dir = cfg.output.dir.as_path();
    fs::create_dir_all(dir).map_err(|e| io(dir, e))?;
    Ok(dir)
}

/// Grid and initial state. Generated states get `phi_s` solved from the
/// other fields; a snapshot keeps its own.
pub fn initial_state(cfg: &Config) -> Result<(Grid, FieldState), Failure> {
    let (grid, mut st) = match &cfg.init {
        InitSpec::Snapshot(path) => {
            let (g, s) = snapshot::read(path).map_err(|e| Failure::Config(format!("{}: {e}", path.display())))?;
            if g != cfg.grid.build().map_err(|e| Failure::Config(e.to_string()))? {
                eprintln!("note: grid taken from the snapshot header");
            }
            (g, s)
        }
        spec => {
            let g = cfg.grid.build().map_err(|e| Failure::Config(e.to_string()))?;
            let init = match spec {
                InitSpec::Uniform(u) => Init::Uniform(*u),
                InitSpec::Profile { base, profile } => Init::Profile { base: *base, profile: *profile },
                InitSpec::Snapshot(_) => unreachable!(),
            };
            let s = new_state(&g, &init, cfg.params.omega_bc).map_err(|e| Failure::Config(e.to_string()))?;
            (g, s)
        }
    };
    let (lo, hi) = theta_range(&grid, &st);
    let problems = cfg.params.validate((lo, hi));
    if !problems.is_empty() {
        return Err(Failure::Config(problems.join("; ")));
    }
    st.apply_bcs(&grid, cfg.params.omega_bc);
    if !matches!(cfg.init, InitSpec::Snapshot(_)) {
        st.phi_s = dynamics::solve_phi_s(&grid, &st, &cfg.params);
    }
    Ok((grid, st))
}

fn theta_range(grid: &Grid, st: &FieldState) -> (f64, f64) {
    grid.interior().map(|k| st.theta[k]).fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), t| (a.min(t), b.max(t)))
}

fn step_count(cfg: &Config) -> u64 {
    (cfg.step.t_end / cfg.step.dt).round() as u64
}

pub struct RunSummary {
    pub steps: u64,
    pub last: Option<DiagnosticsReport>,
    pub phase_warnings: u64,
}

/// Integrates to `t_end`, writing one `timeseries.csv` row per step and a
/// snapshot every `record_every` steps (plus the initial one).
pub fn simulate(cfg: &Config) -> Result<RunSummary, Failure> {
    let (grid, mut st) = initial_state(cfg)?;
    let dir = out_dir(cfg)?;
    let n = step_count(cfg);
    let every = if cfg.output.snapshots { cfg.step.record_every as u64 } else { 0 };
    if every > 0 {
        snapshot::write(&dir.join(format!("snapshot_{:06}.csv", 0)), &grid, &st).map_err(|e| Failure::Config(e.to_string()))?;
    }
    let mut series = format!("{}\n", output::SERIES_HEADER);
    let mut summary = RunSummary { steps: 0, last: None, phase_warnings: 0 };
    let mut failure = None;
    for i in 0..n {
        let out = match dynamics::step(&grid, &st, &cfg.step, &cfg.params, i) {
            Ok(o) => o,
            Err(e) => {
                failure = Some(Failure::Numerical(format!(
                    "blow-up at t = {}: {e}; last good state in snapshot_failed.csv",
                    i as f64 * cfg.step.dt
                )));
                break;
            }
        };
        let t = (i + 1) as f64 * cfg.step.dt;
        let r = diagnostics::report(&grid, &st, &out, cfg.step.dt, t, &cfg.params, cfg.step.material_derivative)
            .map_err(|e| Failure::Numerical(e.to_string()))?;
        output::series_row(&mut series, &r);
        summary.last = Some(r);
        st = out.state;
        summary.steps = i + 1;
        let excess = st.phase_excess(&grid);
        if excess > cfg.output.tol_phase {
            if summary.phase_warnings == 0 {
                eprintln!("warning: max phi^2 exceeds 1 by {excess:.3e} at t = {t}");
            }
            summary.phase_warnings += 1;
        }
        if every > 0 && (i + 1) % every == 0 {
            snapshot::write(&dir.join(format!("snapshot_{:06}.csv", i + 1)), &grid, &st)
                .map_err(|e| Failure::Config(e.to_string()))?;
        }
    }
    write(dir.join("timeseries.csv"), &series)?;
    match failure {
        Some(f) => {
            let _ = snapshot::write(&dir.join("snapshot_failed.csv"), &grid, &st);
            Err(f)
        }
        None => Ok(summary),
    }
}

fn linspace(a: f64, b: f64, n: usize) -> Vec<f64> {
    if n < 2 {
        return vec![a];
    }
    (0..n).map(|i| a + (b - a) * i as f64 / (n - 1) as f64).collect()
}

pub struct DiagramSummary {
    pub points: usize,
    pub skipped: usize,
    /// `(intercept, d theta / d p)` of the fitted line.
    pub fit: Option<(f64, f64)>,
}

/// Writes `phase_map.csv` and `lambda_line.csv`.
pub fn phase_diagram(cfg: &Config) -> Result<DiagramSummary, Failure> {
    let s = &cfg.sweep;
    let thetas = linspace(s.theta_min, s.theta_max, s.n_theta);
    let ps = linspace(s.p_min, s.p_max, s.n_p);
    let problems = cfg.params.validate((s.theta_min, s.theta_max));
    if !problems.is_empty() {
        return Err(Failure::Config(problems.join("; ")));
    }
    let dir = out_dir(cfg)?;
    match sweep_with_flow(&thetas, &ps, s.vs2, s.vn2, &cfg.params) {
        Ok(sw) => {
            write(dir.join("phase_map.csv"), &output::phase_map(&sw))?;
            write(dir.join("lambda_line.csv"), &output::lambda_line(&sw.line.points))?;
            Ok(DiagramSummary {
                points: sw.line.points.len(),
                skipped: sw.line.skipped.len(),
                fit: sw.line.fit.map(|f| (f.intercept, f.theta_slope)),
            })
        }
        Err(SweepError::NoContour) => {
            // The map is still useful; the line is empty.
            let mut map = format!("{}\n", output::PHASE_MAP_HEADER);
            for &p in &ps {
                for &th in &thetas {
                    let phi = helium_gl_core::equilibrium_phase(th, p, s.vs2, s.vn2, &cfg.params);
                    let _ = writeln!(map, "{th:?},{p:?},{phi:?}");
                }
            }
            write(dir.join("phase_map.csv"), &map)?;
            write(dir.join("lambda_line.csv"), &output::lambda_line(&[]))?;
            Ok(DiagramSummary { points: 0, skipped: ps.len(), fit: None })
        }
        Err(e) => Err(Failure::Config(e.to_string())),
    }
}

/// Runs `gauge.steps` steps directly and in two static gauges (zero and a
/// cosine), writing `gauge_compare.csv`. Always uses partial time
/// derivatives, where the complex form is exact.
pub fn gauge_compare(cfg: &Config) -> Result<f64, Failure> {
    let (grid, st) = initial_state(cfg)?;
    let gs = &cfg.gauge;
    let kx = 2.0 * PI * gs.mode_x / grid.lx();
    let ky = if grid.is_2d() { PI * gs.mode_y / grid.ly() } else { 0.0 };
    let chi = GaugeField::analytic(&grid, GaugeProfile::Cosine { amp: gs.amp, kx, ky, rate: 0.0 }, 0.0)
        .map_err(|e| Failure::Config(e.to_string()))?;
    let step = dynamics::StepConfig { material_derivative: MaterialDerivative::Partial, ..cfg.step };
    let dir = out_dir(cfg)?;
    let rows = compare(&grid, &st, &GaugeField::zero(&grid), &chi, &step, &cfg.params, gs.steps)
        .map_err(|e| Failure::Numerical(e.to_string()))?;
    write(dir.join("gauge_compare.csv"), &output::gauge_rows(&rows))?;
    let worst = rows.iter().map(|r| r.max()).fold(0.0, f64::max);
    if worst > gs.tol {
        return Err(Failure::Invariant(format!("gauge mismatch {worst:.3e} exceeds {:.1e}", gs.tol)));
    }
    Ok(worst)
}

/// One line of the `check` report.
#[derive(Debug, Clone, PartialEq)]
pub struct CheckLine {
    pub name: &'static str,
    pub pass: bool,
    pub detail: String,
}

impl std::fmt::Display for CheckLine {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{} {}: {}", if self.pass { "PASS" } else { "FAIL" }, self.name, self.detail)
    }
}

const DIV_CURL_TOL: f64 = 1e-12;
const ORDER_RATIO: (f64, f64) = (3.5, 4.5);
const SBP_TOL: f64 = 1e-10;
const STATIONARY_DW_TOL: f64 = 1e-12;
const ENTROPY_FD_TOL: f64 = 1e-7;
const SIGMA_REL_TOL: f64 = 1e-12;
const WALL_FLUX_TOL: f64 = 1e-10;

fn line(name: &'static str, pass: bool, detail: String) -> CheckLine {
    CheckLine { name, pass, detail }
}

fn check_operators() -> CheckLine {
    let g2 = Grid::new_2d(20, 16, 0.05, 0.0625).unwrap();
    let v = VectorField::from_fn(&g2, |x, y| [(2.0 * x).sin() * (3.0 * y).cos(), x * y * y, (x + y).cos()]);
    let dc = ops::div(&g2, &ops::curl(&g2, &v)).interior_max_abs(&g2);

    let lap_err = |n: usize| {
        let h = 1.0 / n as f64;
        let g = Grid::new_2d(n, n, h, h).unwrap();
        let (kx, ky) = (2.0 * PI, PI);
        let f = ScalarField::from_fn(&g, |x, y| (kx * x).sin() * (ky * y).cos());
        let d = ops::lap(&g, &f);
        g.interior_cells()
            .map(|(i, j, k)| {
                let (x, y) = g.center(i, j);
                (d[k] + (kx * kx + ky * ky) * (kx * x).sin() * (ky * y).cos()).abs()
            })
            .fold(0.0, f64::max)
    };
    let ratio = lap_err(32) / lap_err(64);

    let g = Grid::new_2d(10, 7, 0.3, 0.2).unwrap();
    let mut f = ScalarField::from_fn(&g, |x, y| x.cos() + y * y);
    let mut u = VectorField::from_fn(&g, |x, y| [(x + 2.0 * y).sin(), x * y, 1.0]);
    f.fill_ghosts(&g, grid::ScalarBc::NEUMANN);
    u.fill_ghosts(&g, grid::VectorBc::Slip { omega: 0.0 });
    let sbp = (ops::sbp_volume_term(&g, &f, &u) - ops::sbp_boundary_term(&g, &f, &u)).abs();

    line(
        "operators",
        dc <= DIV_CURL_TOL && (ORDER_RATIO.0..=ORDER_RATIO.1).contains(&ratio) && sbp <= SBP_TOL,
        format!("div curl {dc:.2e}, laplacian refinement ratio {ratio:.3}, summation by parts {sbp:.2e}"),
    )
}

fn check_thermo(params: &ModelParams, theta: (f64, f64)) -> CheckLine {
    let tl = params.theta_lambda;
    let mut worst_dw = 0.0f64;
    let mut not_min = 0usize;
    for n in 0..=40 {
        let m = -0.5 * tl + 2.0 * tl * n as f64 / 40.0;
        let phi = thermo::stationary_phase(m, params);
        let w = thermo::potential_w(phi, m, params);
        if phi > 0.0 {
            worst_dw = worst_dw.max(w.dw.abs() / tl);
        }
        let beaten = (0..=2000).any(|s| thermo::potential_w(1.5 * s as f64 / 2000.0, m, params).w < w.w - 1e-14);
        not_min += beaten as usize;
    }
    let h = 1e-4;
    let mut worst_s = 0.0f64;
    for n in 0..=8 {
        let th = theta.0 + (theta.1 - theta.0) * n as f64 / 8.0;
        for phi in [0.0, 0.3, 0.8] {
            let psi = |t: f64| thermo::free_energy_density(phi, [0.0; 3], t, params).unwrap_or(f64::NAN);
            let fd = -(psi(th + h) - psi(th - h)) / (2.0 * h);
            let s = thermo::entropy_density(phi, th, params).unwrap_or(f64::NAN);
            worst_s = worst_s.max((fd - s).abs() / s.abs().max(1.0));
        }
    }
    let latent = thermo::latent_heat(params);
    line(
        "thermodynamics",
        worst_dw <= STATIONARY_DW_TOL && not_min == 0 && worst_s <= ENTROPY_FD_TOL && latent.abs() <= 1e-14,
        format!(
            "stationary phase |dW| {worst_dw:.2e} with {not_min} non-minimal; entropy vs -dPsi/dtheta {worst_s:.2e}; latent heat {latent:e}"
        ),
    )
}

/// Self-checks on the configured model plus the configured run, which is
/// audited step by step. Numerical failures abort with exit code 2; any
/// failed line gives exit code 3.
pub fn check(cfg: &Config) -> Result<Vec<CheckLine>, Failure> {
    let (grid, mut st) = initial_state(cfg)?;
    let (lo, hi) = theta_range(&grid, &st);
    let mut lines = vec![
        line("parameters", true, format!("admissible for theta in [{lo:.4}, {hi:.4}]")),
        check_operators(),
        check_thermo(&cfg.params, (lo.min(cfg.params.theta_lambda * 0.5), hi.max(cfg.params.theta_lambda * 1.5))),
    ];

    let n = step_count(cfg);
    let mode = cfg.step.material_derivative;
    let mass0 = st.rho.integral(&grid);
    let (mut sigma, mut constraint, mut wall) = (0.0f64, 0.0f64, 0.0f64);
    let mut reports = 0;
    for i in 0..n {
        let out = dynamics::step(&grid, &st, &cfg.step, &cfg.params, i)
            .map_err(|e| Failure::Numerical(format!("step {}: {e}", i + 1)))?;
        let t = (i + 1) as f64 * cfg.step.dt;
        let r = diagnostics::report(&grid, &st, &out, cfg.step.dt, t, &cfg.params, mode)
            .map_err(|e| Failure::Numerical(e.to_string()))?;
        let scale = diagnostics::entropy_production(&grid, &out.midpoint, &out.rates.phi_dot, &out.rates.vs_dot, &cfg.params)
            .interior_max_abs(&grid)
            .max(1.0);
        sigma = sigma.min(r.entropy_production_min / scale);
        constraint = constraint.max(r.constraint_residual);
        wall = wall.max(r.boundary_flux.max_constrained());
        reports += 1;
        st = out.state;
    }
    let drift = (st.rho.integral(&grid) - mass0).abs() / mass0.abs().max(1e-300);
    lines.push(line(
        "entropy production",
        sigma >= -SIGMA_REL_TOL,
        format!("min sigma/scale {sigma:.2e} over {reports} steps"),
    ));
    let free_flow = !cfg.step.pins.velocities;
    lines.push(line(
        "constraint",
        !free_flow || constraint <= cfg.step.projection_tol,
        format!("max residual {constraint:.2e} (tolerance {:.1e}); mass drift {drift:.2e}", cfg.step.projection_tol),
    ));
    lines.push(line("wall fluxes", wall <= WALL_FLUX_TOL, format!("max {wall:.2e}")));
    Ok(lines)
}
