//! Reduced slice/estimator density matrices, their bit and phase error
//! rates, and the resulting per-slice EPR rates.

mod state;
mod table;

pub use state::{
    bit_error_rate, pair_marginal, phase_error_rate, reduced_joint_state, reduced_joint_state_with,
    reduced_joint_states, slice_error_rates, PairState, ReducedJointState, ELEMENT_ABS_TOL,
    ELEMENT_REL_TOL, MAX_STATE_SLICES,
};
pub use table::{
    csv_header, rate_row, rate_table, slice_rate, write_rate_csv, RateRow, SliceRate, SliceRow,
    UNAVAILABLE,
};
