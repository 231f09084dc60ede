//! Rectangular cell-centred lattice with ghost layers, scalar/vector field
//! containers, and the reflection rules that realise the wall conditions.
//!
//! Every field carries `GHOST` layers on each side of every active axis.
//! Operators evaluate on the interior plus `GHOST - 1` layers, so a chain
//! of up to `GHOST` first-neighbour stencils is exact on the interior.

use alloc::vec;
use alloc::vec::Vec;
use core::ops::{Index, IndexMut};

use crate::error::GridError;

/// Ghost layers per side.
pub const GHOST: usize = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Dim {
    /// Fields depend on `x` only; vectors carry an `x` component only.
    One,
    /// Fields depend on `(x, y)`; vectors carry three components with `d/dz = 0`.
    Two,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid {
    dim: Dim,
    nx: usize,
    ny: usize,
    hx: f64,
    hy: f64,
}

impl Grid {
    pub fn new_1d(nx: usize, hx: f64) -> Result<Self, GridError> {
        if nx < 4 {
            return Err(GridError::TooFewCells { axis: 'x', n: nx });
        }
        if !(hx > 0.0 && hx.is_finite()) {
            return Err(GridError::BadSpacing { axis: 'x', h: hx });
        }
        Ok(Self { dim: Dim::One, nx, ny: 1, hx, hy: 1.0 })
    }

    pub fn new_2d(nx: usize, ny: usize, hx: f64, hy: f64) -> Result<Self, GridError> {
        if nx < 4 {
            return Err(GridError::TooFewCells { axis: 'x', n: nx });
        }
        if ny < 4 {
            return Err(GridError::TooFewCells { axis: 'y', n: ny });
        }
        if !(hx > 0.0 && hx.is_finite()) {
            return Err(GridError::BadSpacing { axis: 'x', h: hx });
        }
        if !(hy > 0.0 && hy.is_finite()) {
            return Err(GridError::BadSpacing { axis: 'y', h: hy });
        }
        Ok(Self { dim: Dim::Two, nx, ny, hx, hy })
    }

    /// Builds a grid from raw header values (`dim` is 1 or 2).
    pub fn from_parts(dim: u8, nx: usize, ny: usize, hx: f64, hy: f64) -> Result<Self, GridError> {
        match dim {
            1 => Self::new_1d(nx, hx),
            2 => Self::new_2d(nx, ny, hx, hy),
            d => Err(GridError::BadDim(d)),
        }
    }

    #[inline]
    pub fn dim(&self) -> Dim {
        self.dim
    }
    #[inline]
    pub fn is_2d(&self) -> bool {
        self.dim == Dim::Two
    }
    #[inline]
    pub fn nx(&self) -> usize {
        self.nx
    }
    #[inline]
    pub fn ny(&self) -> usize {
        self.ny
    }
    #[inline]
    pub fn hx(&self) -> f64 {
        self.hx
    }
    /// `y` spacing; 1 in 1D so that cell volumes reduce to `hx`.
    #[inline]
    pub fn hy(&self) -> f64 {
        self.hy
    }
    pub fn lx(&self) -> f64 {
        self.nx as f64 * self.hx
    }
    pub fn ly(&self) -> f64 {
        self.ny as f64 * self.hy
    }
    pub fn cell_volume(&self) -> f64 {
        self.hx * self.hy
    }
    pub fn interior_len(&self) -> usize {
        self.nx * self.ny
    }

    #[inline]
    fn gy(&self) -> usize {
        if self.is_2d() {
            GHOST
        } else {
            0
        }
    }
    #[inline]
    pub fn stride(&self) -> usize {
        self.nx + 2 * GHOST
    }
    pub fn storage_len(&self) -> usize {
        self.stride() * (self.ny + 2 * self.gy())
    }

    /// Storage index of cell `(i, j)`; interior cells are `0..nx`, `0..ny`,
    /// ghosts have negative or `>= n` indices.
    #[inline]
    pub fn idx(&self, i: isize, j: isize) -> usize {
        let gi = (i + GHOST as isize) as usize;
        let gj = (j + self.gy() as isize) as usize;
        gj * self.stride() + gi
    }

    /// Offset between `(i, j)` and `(i, j + 1)`; zero in 1D.
    #[inline]
    pub fn ystep(&self) -> usize {
        if self.is_2d() {
            self.stride()
        } else {
            0
        }
    }

    /// Cell centre coordinates.
    #[inline]
    pub fn center(&self, i: isize, j: isize) -> (f64, f64) {
        let x = (i as f64 + 0.5) * self.hx;
        let y = if self.is_2d() { (j as f64 + 0.5) * self.hy } else { 0.0 };
        (x, y)
    }

    /// Index ranges of the region where one-neighbour stencils are evaluated.
    pub(crate) fn eval_ranges(&self) -> (core::ops::Range<isize>, core::ops::Range<isize>) {
        let m = GHOST as isize - 1;
        let xr = -m..self.nx as isize + m;
        let yr = if self.is_2d() { -m..self.ny as isize + m } else { 0..1 };
        (xr, yr)
    }

    /// Full index ranges including all ghosts.
    pub(crate) fn full_ranges(&self) -> (core::ops::Range<isize>, core::ops::Range<isize>) {
        let g = GHOST as isize;
        let xr = -g..self.nx as isize + g;
        let yr = if self.is_2d() { -g..self.ny as isize + g } else { 0..1 };
        (xr, yr)
    }

    /// Iterator over interior storage indices in row-major order.
    pub fn interior(&self) -> impl Iterator<Item = usize> + '_ {
        let nx = self.nx as isize;
        (0..self.ny as isize).flat_map(move |j| (0..nx).map(move |i| self.idx(i, j)))
    }

    /// Iterator over interior `(i, j, storage_index)`.
    pub fn interior_cells(&self) -> impl Iterator<Item = (isize, isize, usize)> + '_ {
        let nx = self.nx as isize;
        (0..self.ny as isize).flat_map(move |j| (0..nx).map(move |i| (i, j, self.idx(i, j))))
    }
}

/// Reflection parity across a wall.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Parity {
    Even,
    Odd,
}

/// Ghost-fill rule for a scalar quantity: mirror with `parity`, plus an
/// outward normal-derivative datum (only meaningful for `Even`).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScalarBc {
    pub parity: Parity,
    pub normal_derivative: f64,
}

impl ScalarBc {
    pub const NEUMANN: Self = Self { parity: Parity::Even, normal_derivative: 0.0 };
    pub const DIRICHLET_ZERO: Self = Self { parity: Parity::Odd, normal_derivative: 0.0 };
}

/// Ghost-fill rule for a vector quantity.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum VectorBc {
    /// Every component vanishes on the wall (`v = 0`).
    NoSlip,
    /// Normal component vanishes; tangential components obey
    /// `d(v_t)/dn = omega`, which on a wall with `v.n = 0` is
    /// `(curl v) x n = omega` componentwise.
    Slip { omega: f64 },
}

impl VectorBc {
    fn component_rule(&self, component: usize, axis: usize) -> ScalarBc {
        match *self {
            VectorBc::NoSlip => ScalarBc::DIRICHLET_ZERO,
            VectorBc::Slip { omega } => {
                if component == axis {
                    ScalarBc::DIRICHLET_ZERO
                } else {
                    ScalarBc { parity: Parity::Even, normal_derivative: omega }
                }
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScalarField {
    data: Vec<f64>,
}

impl ScalarField {
    pub fn zeros(grid: &Grid) -> Self {
        Self { data: vec![0.0; grid.storage_len()] }
    }

    pub fn constant(grid: &Grid, value: f64) -> Self {
        Self { data: vec![value; grid.storage_len()] }
    }

    /// Samples `f(x, y)` at every cell centre, ghosts included.
    pub fn from_fn(grid: &Grid, f: impl Fn(f64, f64) -> f64) -> Self {
        let mut out = Self::zeros(grid);
        let (xr, yr) = grid.full_ranges();
        for j in yr {
            for i in xr.clone() {
                let (x, y) = grid.center(i, j);
                out.data[grid.idx(i, j)] = f(x, y);
            }
        }
        out
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }
    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    /// Applies `f` to every stored value, ghosts included.
    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Self { data: self.data.iter().map(|&v| f(v)).collect() }
    }

    pub fn zip_map(&self, other: &Self, f: impl Fn(f64, f64) -> f64) -> Self {
        Self { data: self.data.iter().zip(&other.data).map(|(&a, &b)| f(a, b)).collect() }
    }

    pub fn axpy(&mut self, a: f64, x: &Self) {
        for (d, &s) in self.data.iter_mut().zip(&x.data) {
            *d += a * s;
        }
    }

    /// `self + a * x` as a new field.
    pub fn plus_scaled(&self, a: f64, x: &Self) -> Self {
        self.zip_map(x, |u, v| u + a * v)
    }

    pub fn fill_ghosts(&mut self, grid: &Grid, bc: ScalarBc) {
        fill_x(grid, &mut self.data, bc);
        if grid.is_2d() {
            fill_y(grid, &mut self.data, bc);
        }
    }

    pub fn interior_max_abs(&self, grid: &Grid) -> f64 {
        grid.interior().map(|k| self.data[k].abs()).fold(0.0, f64::max)
    }

    pub fn interior_min(&self, grid: &Grid) -> f64 {
        grid.interior().map(|k| self.data[k]).fold(f64::INFINITY, f64::min)
    }

    pub fn interior_max(&self, grid: &Grid) -> f64 {
        grid.interior().map(|k| self.data[k]).fold(f64::NEG_INFINITY, f64::max)
    }

    /// Sum of interior values (fixed row-major order).
    pub fn interior_sum(&self, grid: &Grid) -> f64 {
        grid.interior().map(|k| self.data[k]).sum()
    }

    /// Domain integral with the cell-volume weight.
    pub fn integral(&self, grid: &Grid) -> f64 {
        self.interior_sum(grid) * grid.cell_volume()
    }

    pub fn interior_mean(&self, grid: &Grid) -> f64 {
        self.interior_sum(grid) / grid.interior_len() as f64
    }

    pub fn interior_all_finite(&self, grid: &Grid) -> bool {
        grid.interior().all(|k| self.data[k].is_finite())
    }

    /// Max-norm of the interior difference.
    pub fn max_diff(&self, other: &Self, grid: &Grid) -> f64 {
        grid.interior().map(|k| (self.data[k] - other.data[k]).abs()).fold(0.0, f64::max)
    }
}

impl Index<usize> for ScalarField {
    type Output = f64;
    #[inline]
    fn index(&self, k: usize) -> &f64 {
        &self.data[k]
    }
}

impl IndexMut<usize> for ScalarField {
    #[inline]
    fn index_mut(&mut self, k: usize) -> &mut f64 {
        &mut self.data[k]
    }
}

/// Three-component vector field; in 1D only `x` is active.
#[derive(Debug, Clone, PartialEq)]
pub struct VectorField {
    pub x: ScalarField,
    pub y: ScalarField,
    pub z: ScalarField,
}

impl VectorField {
    pub fn zeros(grid: &Grid) -> Self {
        Self { x: ScalarField::zeros(grid), y: ScalarField::zeros(grid), z: ScalarField::zeros(grid) }
    }

    pub fn constant(grid: &Grid, v: [f64; 3]) -> Self {
        let mut out = Self {
            x: ScalarField::constant(grid, v[0]),
            y: ScalarField::constant(grid, v[1]),
            z: ScalarField::constant(grid, v[2]),
        };
        out.enforce_dim(grid);
        out
    }

    pub fn from_fn(grid: &Grid, f: impl Fn(f64, f64) -> [f64; 3]) -> Self {
        let mut out = Self {
            x: ScalarField::from_fn(grid, |x, y| f(x, y)[0]),
            y: ScalarField::from_fn(grid, |x, y| f(x, y)[1]),
            z: ScalarField::from_fn(grid, |x, y| f(x, y)[2]),
        };
        out.enforce_dim(grid);
        out
    }

    /// Zeroes the inactive components of a 1D field.
    pub fn enforce_dim(&mut self, grid: &Grid) {
        if !grid.is_2d() {
            self.y.as_mut_slice().fill(0.0);
            self.z.as_mut_slice().fill(0.0);
        }
    }

    #[inline]
    pub fn at(&self, k: usize) -> [f64; 3] {
        [self.x[k], self.y[k], self.z[k]]
    }

    #[inline]
    pub fn set(&mut self, k: usize, v: [f64; 3]) {
        self.x[k] = v[0];
        self.y[k] = v[1];
        self.z[k] = v[2];
    }

    pub fn components(&self) -> [&ScalarField; 3] {
        [&self.x, &self.y, &self.z]
    }

    pub fn components_mut(&mut self) -> [&mut ScalarField; 3] {
        [&mut self.x, &mut self.y, &mut self.z]
    }

    #[inline]
    pub fn norm2(&self, k: usize) -> f64 {
        self.x[k] * self.x[k] + self.y[k] * self.y[k] + self.z[k] * self.z[k]
    }

    pub fn map_components(&self, f: impl Fn(&ScalarField) -> ScalarField) -> Self {
        Self { x: f(&self.x), y: f(&self.y), z: f(&self.z) }
    }

    pub fn zip_map(&self, other: &Self, f: impl Fn(f64, f64) -> f64 + Copy) -> Self {
        Self { x: self.x.zip_map(&other.x, f), y: self.y.zip_map(&other.y, f), z: self.z.zip_map(&other.z, f) }
    }

    /// Pointwise product with a scalar field.
    pub fn scaled_by(&self, s: &ScalarField) -> Self {
        self.map_components(|c| c.zip_map(s, |a, b| a * b))
    }

    pub fn plus_scaled(&self, a: f64, x: &Self) -> Self {
        self.zip_map(x, move |u, v| u + a * v)
    }

    pub fn axpy(&mut self, a: f64, x: &Self) {
        self.x.axpy(a, &x.x);
        self.y.axpy(a, &x.y);
        self.z.axpy(a, &x.z);
    }

    pub fn fill_ghosts(&mut self, grid: &Grid, bc: VectorBc) {
        self.enforce_dim(grid);
        for (c, comp) in self.components_mut().into_iter().enumerate() {
            fill_x(grid, comp.as_mut_slice(), bc.component_rule(c, 0));
            if grid.is_2d() {
                fill_y(grid, comp.as_mut_slice(), bc.component_rule(c, 1));
            }
        }
    }

    /// Fills ghosts of each component with its own scalar rule.
    pub fn fill_ghosts_componentwise(&mut self, grid: &Grid, bc: ScalarBc) {
        self.enforce_dim(grid);
        for comp in self.components_mut() {
            comp.fill_ghosts(grid, bc);
        }
    }

    pub fn interior_max_abs(&self, grid: &Grid) -> f64 {
        self.components().iter().map(|c| c.interior_max_abs(grid)).fold(0.0, f64::max)
    }

    pub fn max_diff(&self, other: &Self, grid: &Grid) -> f64 {
        self.x.max_diff(&other.x, grid).max(self.y.max_diff(&other.y, grid)).max(self.z.max_diff(&other.z, grid))
    }

    pub fn interior_all_finite(&self, grid: &Grid) -> bool {
        self.components().iter().all(|c| c.interior_all_finite(grid))
    }
}

#[inline]
fn mirror(parity: Parity, interior: f64, offset: f64) -> f64 {
    match parity {
        Parity::Even => interior + offset,
        Parity::Odd => -interior,
    }
}

fn fill_x(grid: &Grid, data: &mut [f64], bc: ScalarBc) {
    let nx = grid.nx() as isize;
    let ny = grid.ny() as isize;
    let h = grid.hx();
    for j in 0..ny {
        for k in 1..=GHOST as isize {
            let off = (2 * k - 1) as f64 * h * bc.normal_derivative;
            let lo = data[grid.idx(k - 1, j)];
            data[grid.idx(-k, j)] = mirror(bc.parity, lo, off);
            let hi = data[grid.idx(nx - k, j)];
            data[grid.idx(nx - 1 + k, j)] = mirror(bc.parity, hi, off);
        }
    }
}

fn fill_y(grid: &Grid, data: &mut [f64], bc: ScalarBc) {
    let ny = grid.ny() as isize;
    let h = grid.hy();
    let (xr, _) = grid.full_ranges();
    for i in xr {
        for k in 1..=GHOST as isize {
            let off = (2 * k - 1) as f64 * h * bc.normal_derivative;
            let lo = data[grid.idx(i, k - 1)];
            data[grid.idx(i, -k)] = mirror(bc.parity, lo, off);
            let hi = data[grid.idx(i, ny - k)];
            data[grid.idx(i, ny - 1 + k)] = mirror(bc.parity, hi, off);
        }
    }
}
