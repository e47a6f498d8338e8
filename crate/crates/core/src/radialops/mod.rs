//! Radial discretization of the Gagliardo form and of `(−Δ)^{α/2}` on a
//! log-uniform grid, with the exterior of the grid treated as a complement.

mod forms;
mod grid;
mod identities;
mod kernel;

pub use forms::{assemble, exterior_potential, kernel_for, AssembledForms, Extension, PowerLaw};
pub use grid::{RadialField, RadialGrid};
pub use identities::{
    b_eta_double_integral, b_eta_form, cutoff_cross_energy, ground_state_identity_gap, ground_state_terms,
    kelvin_transform, power_law_residual, GroundStateTerms,
};
pub use kernel::{angular_kernel, diagonal_coefficient, log_kernel, KernelTable};
