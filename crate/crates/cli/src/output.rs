//! CSV writers. Floats use shortest round-trip formatting, so identical runs
//! produce byte-identical files.

use std::fmt::Write as _;

use helium_gl_core::gauge::GaugeCompareRow;
use helium_gl_core::{DiagnosticsReport, Sweep};

pub const SERIES_HEADER: &str = "t,E_total,mass_total,P_i_phi,P_e_phi,P_i_vs,P_e_vs,first_law_residual,\
entropy_production_min,constraint_residual,flux_q,flux_phase,flux_pvn,flux_vs";
pub const PHASE_MAP_HEADER: &str = "theta,p,phi_eq";
pub const LAMBDA_LINE_HEADER: &str = "p,theta_line";
pub const GAUGE_HEADER: &str = "step,t,modulus2,v_s,phi_s,v_n,rho,theta,p,real";

fn push_row(out: &mut String, values: &[f64]) {
    for (n, v) in values.iter().enumerate() {
        if n > 0 {
            out.push(',');
        }
        let _ = write!(out, "{v:?}");
    }
    out.push('\n');
}

pub fn series_row(out: &mut String, r: &DiagnosticsReport) {
    let b = &r.boundary_flux;
    push_row(
        out,
        &[
            r.t,
            r.e_total,
            r.mass_total,
            r.p_i_phi,
            r.p_e_phi,
            r.p_i_vs,
            r.p_e_vs,
            r.first_law_residual,
            r.entropy_production_min,
            r.constraint_residual,
            b.q,
            b.phase,
            b.pvn,
            b.vs,
        ],
    );
}

/// Rows ordered by pressure, then temperature.
pub fn phase_map(sweep: &Sweep) -> String {
    let m = &sweep.map;
    let mut out = format!("{PHASE_MAP_HEADER}\n");
    for (ip, &p) in m.p.iter().enumerate() {
        for (it, &th) in m.theta.iter().enumerate() {
            push_row(&mut out, &[th, p, m.phi[ip * m.theta.len() + it]]);
        }
    }
    out
}

pub fn lambda_line(points: &[(f64, f64)]) -> String {
    let mut out = format!("{LAMBDA_LINE_HEADER}\n");
    for &(p, th) in points {
        push_row(&mut out, &[p, th]);
    }
    out
}

pub fn gauge_rows(rows: &[GaugeCompareRow]) -> String {
    let mut out = format!("{GAUGE_HEADER}\n");
    for r in rows {
        let _ = write!(out, "{},", r.step);
        push_row(&mut out, &[r.t, r.modulus2, r.v_s, r.phi_s, r.v_n, r.rho, r.theta, r.p, r.real]);
    }
    out
}
