//! Plain-text snapshot of a `FieldState`: one header line, then a CSV row
//! per interior cell in the order of [`COLUMNS`]. Floats use Rust's shortest
//! round-trip formatting, so a write/read cycle is bit-exact.

use std::fmt::Write as _;
use std::path::Path;

use helium_gl_core::{FieldState, Grid};
use thiserror::Error;

pub const COLUMNS: &str = "ix,iy,phi,vsx,vsy,vsz,phis,vnx,vny,vnz,p,rho,theta";
const MAGIC: &str = "helium-gl snapshot v1";

#[derive(Debug, Error)]
pub enum SnapshotError {
    #[error("snapshot io: {0}")]
    Io(#[from] std::io::Error),
    #[error("snapshot line {line}: {msg}")]
    Format { line: usize, msg: String },
    #[error("snapshot grid: {0}")]
    Grid(String),
}

fn bad(line: usize, msg: impl Into<String>) -> SnapshotError {
    SnapshotError::Format { line, msg: msg.into() }
}

pub fn to_string(grid: &Grid, st: &FieldState) -> String {
    let dim = if grid.is_2d() { 2 } else { 1 };
    let mut out = format!(
        "{MAGIC}; dim={dim}; nx={}; ny={}; hx={:?}; hy={:?}\n",
        grid.nx(),
        grid.ny(),
        grid.hx(),
        grid.hy()
    );
    for (i, j, k) in grid.interior_cells() {
        let (vs, vn) = (st.v_s.at(k), st.v_n.at(k));
        let row = [st.phi[k], vs[0], vs[1], vs[2], st.phi_s[k], vn[0], vn[1], vn[2], st.p[k], st.rho[k], st.theta[k]];
        let _ = write!(out, "{i},{j}");
        for v in row {
            let _ = write!(out, ",{v:?}");
        }
        out.push('\n');
    }
    out
}

fn header_value<'a>(part: &'a str, key: &str) -> Option<&'a str> {
    part.trim().strip_prefix(key)?.strip_prefix('=')
}

pub fn parse(text: &str) -> Result<(Grid, FieldState), SnapshotError> {
    let mut lines = text.lines();
    let header = lines.next().ok_or_else(|| bad(1, "empty file"))?;
    let parts: Vec<&str> = header.split(';').collect();
    if parts.len() != 6 || parts[0].trim() != MAGIC {
        return Err(bad(1, format!("expected `{MAGIC}; dim=..; nx=..; ny=..; hx=..; hy=..`")));
    }
    let field = |idx: usize, key: &str| header_value(parts[idx], key).ok_or_else(|| bad(1, format!("missing {key}")));
    let int = |idx: usize, key: &str| field(idx, key)?.parse::<usize>().map_err(|e| bad(1, format!("{key}: {e}")));
    let float = |idx: usize, key: &str| field(idx, key)?.parse::<f64>().map_err(|e| bad(1, format!("{key}: {e}")));
    let dim = int(1, "dim")?;
    let (nx, ny) = (int(2, "nx")?, int(3, "ny")?);
    let (hx, hy) = (float(4, "hx")?, float(5, "hy")?);
    let grid = Grid::from_parts(dim as u8, nx, ny, hx, hy).map_err(|e| SnapshotError::Grid(e.to_string()))?;

    let mut st = FieldState::uniform(&grid, &Default::default());
    let mut seen = vec![false; grid.storage_len()];
    let mut rows = 0;
    for (n, line) in lines.enumerate() {
        let lno = n + 2;
        if line.trim().is_empty() {
            continue;
        }
        let cols: Vec<&str> = line.split(',').collect();
        if cols.len() != 13 {
            return Err(bad(lno, format!("expected 13 columns, got {}", cols.len())));
        }
        let i: isize = cols[0].trim().parse().map_err(|_| bad(lno, "bad ix"))?;
        let j: isize = cols[1].trim().parse().map_err(|_| bad(lno, "bad iy"))?;
        if i < 0 || j < 0 || i as usize >= nx || j as usize >= grid.ny() {
            return Err(bad(lno, format!("cell ({i}, {j}) outside the grid")));
        }
        let mut v = [0.0; 11];
        for (slot, c) in v.iter_mut().zip(&cols[2..]) {
            *slot = c.trim().parse().map_err(|_| bad(lno, format!("bad number `{c}`")))?;
        }
        let k = grid.idx(i, j);
        if std::mem::replace(&mut seen[k], true) {
            return Err(bad(lno, format!("cell ({i}, {j}) repeated")));
        }
        st.phi[k] = v[0];
        st.v_s.set(k, [v[1], v[2], v[3]]);
        st.phi_s[k] = v[4];
        st.v_n.set(k, [v[5], v[6], v[7]]);
        st.p[k] = v[8];
        st.rho[k] = v[9];
        st.theta[k] = v[10];
        rows += 1;
    }
    if rows != grid.interior_len() {
        return Err(bad(0, format!("expected {} cells, got {rows}", grid.interior_len())));
    }
    st.apply_bcs(&grid, 0.0);
    Ok((grid, st))
}

pub fn write(path: &Path, grid: &Grid, st: &FieldState) -> Result<(), SnapshotError> {
    std::fs::write(path, to_string(grid, st))?;
    Ok(())
}

pub fn read(path: &Path) -> Result<(Grid, FieldState), SnapshotError> {
    parse(&std::fs::read_to_string(path)?)
}
