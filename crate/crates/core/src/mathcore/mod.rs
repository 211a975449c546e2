//! Numerical primitives shared by the rest of the crate: entropies, Gaussian
//! functions, adaptive quadrature, seeded random streams and a few
//! goodness-of-fit statistics.

mod entropy;
mod probability;
mod quadrature;
mod random;
mod special;
pub mod stats;

pub use entropy::{binary_entropy, gaussian_state_entropy};
pub use probability::Probability;
pub use quadrature::{
    integrate, integrate_2d, integrate_vec, try_integrate, QuadOptions, Quadrature, VecQuadrature,
};
pub use random::RandomStream;
pub use special::{
    gaussian_cdf, gaussian_pdf, gaussian_quantile, gaussian_sf, inverse_erf, inverse_erfc,
    log_sum_exp, normal_interval_mass,
};
