use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::channel::{sample_pair, ChannelModel, ModulationSpec};
use crate::distill::code::{build_code_with_rows, size_code_rate, syndrome, ParityCheck};
use crate::distill::decoder::{decode_syndrome, MAX_BP_ITERATIONS};
use crate::distill::hash::{ParityVerifier, ToeplitzHash};
use crate::distill::transcript::{PayloadKind, Record};
use crate::error::{Error, Result};
use crate::mathcore::{binary_entropy, Probability, RandomStream};
use crate::slicing::{slice_log_odds, SliceSpec};

pub const DEFAULT_BETA: f64 = 0.15;
pub const DEFAULT_VERIFICATION_BITS: usize = 32;
pub const DEFAULT_MARGIN: usize = 64;
/// Channel LLR magnitude used when Bob holds Alice's value exactly.
const CERTAIN_LLR: f64 = 40.0;

// Stream ids separating the independent random sources of a run.
const STREAM_CODES: u64 = 1;
const STREAM_SAMPLES: u64 = 2;
const STREAM_VERIFY: u64 = 3;
const STREAM_HASH: u64 = 4;

/// Bits disclosed on the public channel for one frame.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct LeakageLedger {
    /// Per slice; 0 for slices never reached.
    pub syndrome_bits: Vec<usize>,
    pub verification_bits: Vec<usize>,
    /// `S̄` is always published; it is independent of the slice bits and
    /// not charged as leakage.
    pub sbar_disclosed: bool,
}

impl LeakageLedger {
    pub fn new(m: usize) -> Self {
        LeakageLedger {
            syndrome_bits: vec![0; m],
            verification_bits: vec![0; m],
            sbar_disclosed: true,
        }
    }

    pub fn syndrome_bits_total(&self) -> usize {
        self.syndrome_bits.iter().sum()
    }

    pub fn verification_bits_total(&self) -> usize {
        self.verification_bits.iter().sum()
    }

    pub fn total(&self) -> usize {
        self.syndrome_bits_total() + self.verification_bits_total()
    }

    pub fn absorb(&mut self, other: &LeakageLedger) {
        for (a, b) in self.syndrome_bits.iter_mut().zip(&other.syndrome_bits) {
            *a += b;
        }
        for (a, b) in self
            .verification_bits
            .iter_mut()
            .zip(&other.verification_bits)
        {
            *a += b;
        }
    }
}

/// One block of `l` samples as seen by both parties.
#[derive(Debug, Clone, PartialEq)]
pub struct ReconciliationFrame {
    pub frame_id: u64,
    /// `alice_bits[i - 1][k]` is `S_i(X_k)`.
    pub alice_bits: Vec<Vec<u8>>,
    pub sbar: Vec<f64>,
    pub x_prime: Vec<f64>,
    /// Bob was handed Alice's value (debug mode).
    pub noiseless: bool,
}

impl ReconciliationFrame {
    pub fn len(&self) -> usize {
        self.sbar.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sbar.is_empty()
    }

    pub fn from_pairs(
        frame_id: u64,
        pairs: &[(f64, f64)],
        spec: &SliceSpec<f64>,
        noiseless: bool,
    ) -> Self {
        let m = spec.m();
        let mut alice_bits = vec![Vec::with_capacity(pairs.len()); m];
        let mut sbar = Vec::with_capacity(pairs.len());
        let mut x_prime = Vec::with_capacity(pairs.len());
        for &(x, xp) in pairs {
            let d = spec.decompose(x);
            for (i, bits) in alice_bits.iter_mut().enumerate() {
                bits.push(d.bit(i + 1));
            }
            sbar.push(d.sbar);
            x_prime.push(if noiseless { x } else { xp });
        }
        ReconciliationFrame {
            frame_id,
            alice_bits,
            sbar,
            x_prime,
            noiseless,
        }
    }

    pub fn simulate(
        frame_id: u64,
        l: usize,
        spec: &SliceSpec<f64>,
        modulation: &ModulationSpec<f64>,
        channel: &ChannelModel<f64>,
        stream: &RandomStream,
        noiseless: bool,
    ) -> Self {
        let mut rs = stream.clone();
        let pairs = sample_pair(modulation, channel, &mut rs, l);
        Self::from_pairs(frame_id, &pairs, spec, noiseless)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SliceOutcome {
    pub converged: bool,
    pub iterations: usize,
    pub flips: usize,
    pub verified: bool,
    /// Belief propagation failed and ordered-statistics decoding supplied
    /// the word.
    pub post_processed: bool,
    /// Positions where Bob's corrected bits still differ from Alice's.
    pub residual_errors: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReconcileOutcome {
    /// Bob's corrected bits for the slices reached.
    pub corrected: Vec<Vec<u8>>,
    pub ledger: LeakageLedger,
    pub slices: Vec<SliceOutcome>,
    pub accepted: bool,
    /// Public messages in the order sent.
    pub records: Vec<Record>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReconcileOptions {
    pub verification_bits: usize,
    pub max_iterations: usize,
}

impl Default for ReconcileOptions {
    fn default() -> Self {
        ReconcileOptions {
            verification_bits: DEFAULT_VERIFICATION_BITS,
            max_iterations: MAX_BP_ITERATIONS,
        }
    }
}

/// Bob's channel LLRs `ln P(0)/P(1)` for slice `i`, given his corrected
/// lower slices.
pub fn slice_llrs(
    frame: &ReconciliationFrame,
    i: usize,
    lower: &[Vec<u8>],
    channel: &ChannelModel<f64>,
    spec: &SliceSpec<f64>,
) -> Vec<f64> {
    (0..frame.len())
        .map(|k| {
            if frame.noiseless {
                let bit = spec.decompose(frame.x_prime[k]).bit(i);
                return if bit == 0 { CERTAIN_LLR } else { -CERTAIN_LLR };
            }
            let prefix = lower
                .iter()
                .enumerate()
                .fold(0usize, |acc, (j, bits)| acc | (bits[k] as usize) << j);
            -slice_log_odds(i, frame.x_prime[k], frame.sbar[k], prefix, channel, spec)
        })
        .collect()
}

/// Slice-sequential syndrome reconciliation of one frame.
///
/// For each slice Alice publishes `H_i S_i`, Bob decodes it with his soft
/// estimates (conditioned on his already corrected lower slices), and the
/// result is confirmed with random parities. The frame is rejected at the
/// first slice that fails to decode or verify.
pub fn reconcile(
    frame: &ReconciliationFrame,
    codes: &[ParityCheck],
    channel: &ChannelModel<f64>,
    spec: &SliceSpec<f64>,
    opts: ReconcileOptions,
    verify_stream: &RandomStream,
) -> Result<ReconcileOutcome> {
    let m = spec.m();
    if codes.len() != m || frame.alice_bits.len() != m {
        return Err(Error::LengthMismatch {
            expected: m,
            found: codes.len().min(frame.alice_bits.len()),
        });
    }
    let mut ledger = LeakageLedger::new(m);
    let mut records = vec![Record::sbar(frame.frame_id, frame.sbar.clone())];
    let mut corrected: Vec<Vec<u8>> = Vec::with_capacity(m);
    let mut slices = Vec::with_capacity(m);
    let mut accepted = true;
    for i in 1..=m {
        let h = &codes[i - 1];
        let alice = &frame.alice_bits[i - 1];
        let xi = syndrome(h, alice)?;
        ledger.syndrome_bits[i - 1] = xi.len();
        records.push(Record::bits(
            frame.frame_id,
            PayloadKind::Syndrome,
            i as u8,
            xi.clone(),
        ));

        let llr = slice_llrs(frame, i, &corrected, channel, spec);
        let out = decode_syndrome(h, &llr, &xi, opts.max_iterations)?;

        let verifier = ParityVerifier::new(
            frame.len(),
            opts.verification_bits,
            &verify_stream.substream(i as u64),
        );
        let tag = verifier.parities(alice)?;
        ledger.verification_bits[i - 1] = tag.len();
        records.push(Record::bits(
            frame.frame_id,
            PayloadKind::Verify,
            i as u8,
            tag.clone(),
        ));
        let verified = out.converged && verifier.parities(&out.bits)? == tag;

        slices.push(SliceOutcome {
            converged: out.converged,
            iterations: out.iterations,
            flips: out.flips,
            verified,
            post_processed: out.post_processed,
            residual_errors: out.bits.iter().zip(alice).filter(|(a, b)| a != b).count(),
        });
        corrected.push(out.bits);
        if !verified {
            accepted = false;
            break;
        }
    }
    Ok(ReconcileOutcome {
        corrected,
        ledger,
        slices,
        accepted,
        records,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KeyProvenance {
    pub frame_ids: Vec<u64>,
    pub hash_seed: u64,
    pub hash_stream: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KeyMaterial {
    pub bits: Vec<u8>,
    pub length: usize,
    /// 1-based slices that entered the hash.
    pub slices: Vec<usize>,
    pub provenance: KeyProvenance,
    /// Why the key is empty, when it is.
    pub diagnostic: Option<String>,
}

/// Net bits slice `i` can contribute before the margin:
/// `l - syndrome_i - verification_i - ⌈l h(e_p,i)⌉`.
pub fn slice_key_budget(l: usize, ledger: &LeakageLedger, i: usize, e_p: Probability<f64>) -> i64 {
    let pa = (l as f64 * binary_entropy(e_p)).ceil() as i64;
    l as i64 - ledger.syndrome_bits[i] as i64 - ledger.verification_bits[i] as i64 - pa
}

/// Final key length `ℓ` and the slices entering the hash.
pub fn key_length(
    l: usize,
    ledger: &LeakageLedger,
    e_p: &[Probability<f64>],
    margin: usize,
) -> (usize, Vec<usize>) {
    let mut total = 0i64;
    let mut included = Vec::new();
    for (i, &e) in e_p.iter().enumerate() {
        let b = slice_key_budget(l, ledger, i, e);
        if b > 0 {
            total += b;
            included.push(i + 1);
        }
    }
    ((total - margin as i64).max(0) as usize, included)
}

/// Toeplitz-hashes the reconciled slices into the final key. Slices whose
/// budget is not positive are left out of the hash input.
pub fn privacy_amplify(
    bits_per_slice: &[Vec<u8>],
    ledger: &LeakageLedger,
    e_p: &[Probability<f64>],
    margin: usize,
    seed: &RandomStream,
    frame_ids: Vec<u64>,
) -> Result<KeyMaterial> {
    if bits_per_slice.len() != e_p.len() || ledger.syndrome_bits.len() != e_p.len() {
        return Err(Error::LengthMismatch {
            expected: e_p.len(),
            found: bits_per_slice.len(),
        });
    }
    let l = bits_per_slice.first().map_or(0, Vec::len);
    let (length, slices) = key_length(l, ledger, e_p, margin);
    let provenance = KeyProvenance {
        frame_ids,
        hash_seed: seed.seed(),
        hash_stream: seed.stream_id(),
    };
    if length == 0 {
        return Ok(KeyMaterial {
            bits: Vec::new(),
            length: 0,
            slices,
            provenance,
            diagnostic: Some("leakage and phase-error charge exceed the reconciled bits".into()),
        });
    }
    let input: Vec<u8> = slices
        .iter()
        .flat_map(|&i| bits_per_slice[i - 1].iter().copied())
        .collect();
    let bits = ToeplitzHash::from_stream(input.len(), length, seed).apply(&input)?;
    Ok(KeyMaterial {
        bits,
        length,
        slices,
        provenance,
        diagnostic: None,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DistillConfig {
    pub block_length: usize,
    pub frames: usize,
    pub beta: f64,
    pub margin: usize,
    pub verification_bits: usize,
    pub max_iterations: usize,
    pub seed: u64,
    /// Hand Bob Alice's values instead of channel outputs.
    pub noiseless: bool,
}

impl Default for DistillConfig {
    fn default() -> Self {
        DistillConfig {
            block_length: 16384,
            frames: 100,
            beta: DEFAULT_BETA,
            margin: DEFAULT_MARGIN,
            verification_bits: DEFAULT_VERIFICATION_BITS,
            max_iterations: MAX_BP_ITERATIONS,
            seed: 0,
            noiseless: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrameResult {
    pub frame_id: u64,
    pub accepted: bool,
    pub slices: Vec<SliceOutcome>,
    pub ledger: LeakageLedger,
    pub key_bits: usize,
    pub keys_identical: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DistillReport {
    pub frames: usize,
    pub accepted: usize,
    pub frame_error_rate: f64,
    pub block_length: usize,
    pub code_rows: Vec<usize>,
    pub leakage: LeakageLedger,
    pub key_bits: usize,
    pub key_rate_per_sample: f64,
    /// Key bits per sample of the accepted frames only.
    pub key_rate_per_accepted_sample: f64,
    pub keys_identical: bool,
    pub bit_error_rates: Vec<f64>,
    pub phase_error_rates: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DistillRun {
    pub report: DistillReport,
    pub frames: Vec<FrameResult>,
    pub records: Vec<Record>,
    pub alice_key: Vec<u8>,
    pub bob_key: Vec<u8>,
}

/// Codes for every slice, sized from `e_b` with inefficiency `beta`.
pub fn build_slice_codes(
    bit_errors: &[Probability<f64>],
    l: usize,
    beta: f64,
    seed: u64,
) -> Result<Vec<ParityCheck>> {
    let base = RandomStream::new(seed, STREAM_CODES);
    bit_errors
        .par_iter()
        .enumerate()
        .map(|(i, &e)| {
            let rows = size_code_rate(e, beta)?.rows(l);
            build_code_with_rows(rows, l, &base.substream(i as u64))
        })
        .collect::<Vec<_>>()
        .into_iter()
        .collect()
}

/// Full prepare-and-measure distillation over `config.frames` frames.
///
/// `error_rates` holds each slice's `(e_b, e_p)`: `e_b` sizes the codes and
/// `e_p` sets the privacy-amplification charge. Frames run in parallel and
/// are merged in frame order, so the output depends only on the inputs.
pub fn run_distillation(
    spec: &SliceSpec<f64>,
    modulation: &ModulationSpec<f64>,
    channel: &ChannelModel<f64>,
    error_rates: &[(Probability<f64>, Probability<f64>)],
    config: &DistillConfig,
) -> Result<DistillRun> {
    let m = spec.m();
    if error_rates.len() != m {
        return Err(Error::LengthMismatch {
            expected: m,
            found: error_rates.len(),
        });
    }
    if config.frames == 0 {
        return Err(Error::InvalidSpec("frame count must be positive".into()));
    }
    let l = config.block_length;
    let bit_errors: Vec<_> = error_rates.iter().map(|e| e.0).collect();
    let phase_errors: Vec<_> = error_rates.iter().map(|e| e.1).collect();
    let codes = build_slice_codes(&bit_errors, l, config.beta, config.seed)?;
    let opts = ReconcileOptions {
        verification_bits: config.verification_bits,
        max_iterations: config.max_iterations,
    };

    type FrameOutput = (FrameResult, Vec<Record>, Vec<u8>, Vec<u8>);
    let outputs: Vec<FrameOutput> = (0..config.frames as u64)
        .into_par_iter()
        .map(|id| -> Result<FrameOutput> {
            let samples = RandomStream::new(config.seed, STREAM_SAMPLES).substream(id);
            let frame = ReconciliationFrame::simulate(
                id,
                l,
                spec,
                modulation,
                channel,
                &samples,
                config.noiseless,
            );
            let verify = RandomStream::new(config.seed, STREAM_VERIFY).substream(id);
            let out = reconcile(&frame, &codes, channel, spec, opts, &verify)?;
            let (mut alice_key, mut bob_key) = (Vec::new(), Vec::new());
            if out.accepted {
                let hash = RandomStream::new(config.seed, STREAM_HASH).substream(id);
                alice_key = privacy_amplify(
                    &frame.alice_bits,
                    &out.ledger,
                    &phase_errors,
                    config.margin,
                    &hash,
                    vec![id],
                )?
                .bits;
                bob_key = privacy_amplify(
                    &out.corrected,
                    &out.ledger,
                    &phase_errors,
                    config.margin,
                    &hash,
                    vec![id],
                )?
                .bits;
            }
            let result = FrameResult {
                frame_id: id,
                accepted: out.accepted,
                slices: out.slices,
                ledger: out.ledger,
                key_bits: alice_key.len(),
                keys_identical: alice_key == bob_key,
            };
            Ok((result, out.records, alice_key, bob_key))
        })
        .collect::<Vec<_>>()
        .into_iter()
        .collect::<Result<_>>()?;

    let mut frames = Vec::with_capacity(outputs.len());
    let mut records = Vec::new();
    let mut alice_key = Vec::new();
    let mut bob_key = Vec::new();
    let mut leakage = LeakageLedger::new(m);
    for (f, r, a, b) in outputs {
        leakage.absorb(&f.ledger);
        records.extend(r);
        alice_key.extend(a);
        bob_key.extend(b);
        frames.push(f);
    }
    let accepted = frames.iter().filter(|f| f.accepted).count();
    let key_bits = alice_key.len();
    let report = DistillReport {
        frames: frames.len(),
        accepted,
        frame_error_rate: (frames.len() - accepted) as f64 / frames.len() as f64,
        block_length: l,
        code_rows: codes.iter().map(ParityCheck::rows).collect(),
        leakage,
        key_bits,
        key_rate_per_sample: key_bits as f64 / (frames.len() * l) as f64,
        key_rate_per_accepted_sample: if accepted == 0 {
            0.0
        } else {
            key_bits as f64 / (accepted * l) as f64
        },
        keys_identical: alice_key == bob_key && frames.iter().all(|f| f.keys_identical),
        bit_error_rates: bit_errors.iter().map(|p| p.value()).collect(),
        phase_error_rates: phase_errors.iter().map(|p| p.value()).collect(),
    };
    Ok(DistillRun {
        report,
        frames,
        records,
        alice_key,
        bob_key,
    })
}
