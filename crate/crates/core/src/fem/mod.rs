//! Continuous Lagrange finite elements for the Poisson problem.

mod coupled;
mod element;
mod field;
mod poisson;
mod space;
mod vtk;

pub use coupled::{energy_norm_error, solution_energy_norm, solve_coupled, CoupledSolution};
pub use element::{ElementMap, LagrangeElement, Tabulation};
pub use field::ScalarField;
pub use poisson::{hat_residuals, solve_poisson};
pub use space::LagrangeSpace;
pub use vtk::write_vtk;
