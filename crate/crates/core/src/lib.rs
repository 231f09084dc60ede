//! Thermodynamically consistent Ginzburg–Landau model of the superfluid
//! transition in liquid helium, discretised on 1D and 2D-slab grids.
//!
//! The crate is `no_std` (with `alloc`) unless the `std` feature is on.

#![cfg_attr(not(any(feature = "std", test)), no_std)]

// `!(x > 0.0)` is used on purpose so that NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

extern crate alloc;

pub mod diagnostics;
pub mod dynamics;
pub mod error;
pub mod gauge;
pub mod grid;
pub mod ops;
pub mod params;
pub mod phase_diagram;
pub mod poisson;
pub mod state;
pub mod thermo;

pub use error::{GridError, SolverError, StateError, StepError, SweepError, ThermoError};
pub use grid::{Dim, Grid, Parity, ScalarBc, ScalarField, VectorBc, VectorField, GHOST};
pub use params::{validate_params, BodyForce, HeatSupply, ModelParams};
pub use state::{new_state, FieldState, Init, Profile, RandomSmooth, UniformInit};
pub use dynamics::{step, MaterialDerivative, Pins, StepConfig, StepOutcome};
pub use diagnostics::{BoundaryFluxes, DiagnosticsReport};
pub use gauge::{check_identities, complex_step, gauge_backward, gauge_forward, ComplexState, GaugeField, GaugeProfile, IdentityReport};
pub use phase_diagram::{equilibrium_phase, relax_to_equilibrium, sweep, LambdaLine, PhaseMap, Sweep};
