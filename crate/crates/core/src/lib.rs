//! Rate-independent infinitesimal gradient plasticity with plastic spin and
//! kinematic or isotropic hardening on structured hexahedral grids.
//!
//! The numerical core is generic over the scalar type ([`Real`]); the aliases
//! at the crate root fix it to `f64`.

pub mod assembly;
pub mod dofs;
pub mod error;
pub mod grid;
pub mod korn;
pub mod linalg;
pub mod models;
pub mod oracles;
pub mod scalar;
pub mod solver;
pub mod sparse;
pub mod tensor;

pub use error::{Error, Result};
pub use scalar::Real;

pub type Mat3 = tensor::Mat3<f64>;
pub type Vec3 = tensor::Vec3<f64>;
pub type MaterialParams = tensor::MaterialParams<f64>;
pub type Grid = grid::Grid<f64>;
pub type VectorField = grid::VectorField<f64>;
pub type TensorField = grid::TensorField<f64>;
pub type ScalarField = grid::ScalarField<f64>;
pub type BoundaryConfig = grid::BoundaryConfig<f64>;
pub type Discretization = assembly::Discretization<f64>;
pub type CsrMatrix = sparse::CsrMatrix<f64>;
pub type PolyTensorField = oracles::PolyTensorField<f64>;
pub type ModelVariant = models::ModelVariant<f64>;
pub type SimState = models::SimState<f64>;
pub type EnergySplit = models::EnergySplit<f64>;
pub type Problem = solver::Problem<f64>;
pub type SolverConfig = solver::SolverConfig<f64>;
pub type LoadStep = solver::LoadStep<f64>;
pub type StepReport = solver::StepReport<f64>;
pub type KornProblem = korn::KornProblem<f64>;
/// Polynomial with exact rational coefficients.
pub type ExactPoly = oracles::Poly<num_rational::Rational64>;

pub use assembly::{BlockTag, DefectForm};
pub use dofs::TensorSpace;
pub use grid::{Face, FaceSet};
pub use models::VariantTag;
