//! Energy-constrained population codes: closed-form optimal tuning, numerical
//! reference solvers, a conductance-based neuron for measuring the
//! noise-energy tradeoff, and fitting of the resulting surfaces.

pub mod analytic;
pub mod checks;
pub mod error;
pub mod fit;
pub mod grid;
pub mod neuron;
pub mod oracle;
pub mod repro;
pub mod scalar;

pub use analytic::{
    closed_form_with_exponent, solve_optimal_code, BaseShape, EnergyConstraint, Objective, PopulationSolution,
    PopulationSpec, SolutionRow, TuningCurveBank,
};
pub use error::{Error, Result};
pub use grid::{Prior, RateTarget, StimulusGrid};
pub use scalar::Real;

pub type GridF64 = StimulusGrid<f64>;
pub type GridF32 = StimulusGrid<f32>;
pub type PriorF64 = Prior<f64>;
pub type PriorF32 = Prior<f32>;
pub type SpecF64 = PopulationSpec<f64>;
pub type SpecF32 = PopulationSpec<f32>;
pub type SolutionF64 = PopulationSolution<f64>;
pub type SolutionF32 = PopulationSolution<f32>;
