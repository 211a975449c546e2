//! Brute-force reference computations for the sliced-reconciliation model.
//!
//! Nothing here depends on `cvqkd-core`: each oracle takes plain numbers
//! and recomputes its quantity by a different route (sampling, fixed grids,
//! truncated Fock space) so it can be compared against the adaptive
//! quadratures and closed forms of the main crate.

mod fock;
mod grid;
mod model;
mod monte_carlo;

pub use fock::{
    coherent_state, fock_holevo_direct, fock_holevo_reverse, gauss_hermite,
    von_neumann_entropy_bits,
};
pub use grid::grid_joint_state;
pub use model::SliceModel;
pub use monte_carlo::{monte_carlo_bit_errors, McCounts};
