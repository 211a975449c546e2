//! Analysis and simulation toolkit for Gaussian-modulated coherent-state
//! quantum key distribution with sliced error correction.

// Domain checks are written `!(x > 0)` so that NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod channel;
pub mod distill;
pub mod epanalysis;
mod error;
pub mod estimate;
pub mod mathcore;
pub mod rates;
mod real;
pub mod slicing;

pub use error::{Error, Result};
pub use real::Real;

/// Double-precision instantiations of the generic types.
pub type ChannelModel = channel::ChannelModel<f64>;
pub type ModulationSpec = channel::ModulationSpec<f64>;
pub type SliceSpec = slicing::SliceSpec<f64>;
pub type ReducedJointState = epanalysis::ReducedJointState<f64>;
pub type Probability = mathcore::Probability<f64>;

/// Single-precision instantiations, for the analytic parts only.
pub mod f32 {
    pub type ChannelModel = crate::channel::ChannelModel<f32>;
    pub type ModulationSpec = crate::channel::ModulationSpec<f32>;
    pub type SliceSpec = crate::slicing::SliceSpec<f32>;
    pub type ReducedJointState = crate::epanalysis::ReducedJointState<f32>;
    pub type Probability = crate::mathcore::Probability<f32>;
}
