use alloc::string::String;

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GridError {
    #[error("grid needs at least 4 cells along {axis}, got {n}")]
    TooFewCells { axis: char, n: usize },
    #[error("grid spacing along {axis} must be positive and finite, got {h}")]
    BadSpacing { axis: char, h: f64 },
    #[error("grid dimension must be 1 or 2, got {0}")]
    BadDim(u8),
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum StateError {
    #[error("{field} nonpositive (min {min})")]
    Nonpositive { field: &'static str, min: f64 },
    #[error("{field} is not finite")]
    NotFinite { field: &'static str },
    #[error("field length {got} does not match grid storage {expected}")]
    Shape { expected: usize, got: usize },
    #[error("unknown initial profile `{0}`")]
    UnknownProfile(String),
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SolverError {
    #[error("Neumann solve did not converge in {iterations} iterations (residual {residual:e})")]
    NotConverged { iterations: usize, residual: f64 },
}

/// Failure of a single time step, tagged with the step index.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum StepError {
    #[error("step {step}: {field} nonpositive (min {min})")]
    Nonpositive { step: u64, field: &'static str, min: f64 },
    #[error("step {step}: {field} became non-finite")]
    NotFinite { step: u64, field: &'static str },
    #[error("step {step}: normal-component mass rho(1-phi^2) fell to {min:e} (guard {guard:e})")]
    DegenerateMass { step: u64, min: f64, guard: f64 },
    #[error("step {step}: pressure projection failed: {source}")]
    Projection { step: u64, source: SolverError },
    #[error("invalid step configuration: {0}")]
    Config(&'static str),
}

impl StepError {
    pub fn step(&self) -> Option<u64> {
        match *self {
            StepError::Nonpositive { step, .. }
            | StepError::NotFinite { step, .. }
            | StepError::DegenerateMass { step, .. }
            | StepError::Projection { step, .. } => Some(step),
            StepError::Config(_) => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ThermoError {
    #[error("temperature must be positive, got {0}")]
    NonpositiveTemperature(f64),
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SweepError {
    #[error("{axis} grid must be strictly increasing with at least two points")]
    BadAxis { axis: &'static str },
    #[error("no phase boundary inside the sweep window")]
    NoContour,
}
