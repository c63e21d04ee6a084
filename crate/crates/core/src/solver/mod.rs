//! Spectral–Galerkin solver for the perturbation equation
//! `∂_t f + p̂·∇_x f + Lf = Γ(f,f)` on a periodic box.

pub mod assembly;
pub mod basis;
pub mod decay;
pub mod field;
pub mod stepper;

pub use assembly::{AssemblySpec, GalerkinOperators};
pub use field::DistributionField;
pub use stepper::{InitialData, Solver, SolverConfig, Splitting, StepInfo};
pub use decay::{energy_functionals, fit_decay, run_decay, DecayFit, EnergyRecord, EnergySnapshot, EnergyTrace};
