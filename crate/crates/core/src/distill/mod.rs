//! Prepare-and-measure key distillation: slice-sequential syndrome
//! reconciliation with belief-propagation decoding, leakage accounting,
//! random-parity verification and Toeplitz privacy amplification.

mod code;
mod decoder;
mod hash;
mod pipeline;
pub mod transcript;

pub use code::{
    build_code, build_code_with_rows, size_code_rate, syndrome, CodeSizing, ParityCheck,
    COLUMN_WEIGHT, MIN_BLOCK_LENGTH,
};
pub use decoder::{decode_syndrome, DecodeOutcome, MAX_BP_ITERATIONS, OSD_MAX_ROWS};
pub use hash::{pack_bits, pack_bytes, unpack_bits, unpack_bytes, ParityVerifier, ToeplitzHash};
pub use pipeline::{
    build_slice_codes, key_length, privacy_amplify, reconcile, run_distillation, slice_key_budget,
    slice_llrs, DistillConfig, DistillReport, DistillRun, FrameResult, KeyMaterial, KeyProvenance,
    LeakageLedger, ReconcileOptions, ReconcileOutcome, ReconciliationFrame, SliceOutcome,
    DEFAULT_BETA, DEFAULT_MARGIN, DEFAULT_VERIFICATION_BITS,
};
