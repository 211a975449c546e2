//! Sliced error correction: slice functions `S_i`, the continuous side
//! information `S̄`, Bob's MAP slice estimators `E_i` with their own side
//! information `Ē`, the resulting bit error rates, and slice-boundary
//! optimisation.

mod error_rate;
mod estimator;
mod optimize;
mod spec;

pub use error_rate::{
    classical_bit_error_rate, classical_bit_error_rates, classical_bit_error_rates_with,
    common_bit_rate_from, sec_common_bit_rate, ERROR_RATE_REL_TOL,
};
pub use estimator::{
    ebar, map_estimate_bit, slice_log_odds, DecisionRegions, EstimatorPartition, SbarContext,
};
pub use optimize::{optimize_slices, OptimizeOptions, OptimizeOutcome};
pub use spec::{
    cell_from_bits, default_equiprobable_spec, slice_bit, Inversion, SliceSpec,
    SymbolDecomposition, MAX_SLICES, SLICE_SPEC_VERSION, TAIL_CLAMP_SD,
};
