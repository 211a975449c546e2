use crate::channel::ChannelModel;
use crate::error::{Error, Result};
use crate::mathcore::{binary_entropy, integrate_vec, Probability, QuadOptions};
use crate::slicing::estimator::SbarContext;
use crate::slicing::spec::SliceSpec;
use crate::Real;

/// Relative tolerance of the error-rate integrals.
pub const ERROR_RATE_REL_TOL: f64 = 1e-6;

/// `e_i^b = Pr[S_i(X) ≠ E_i(X', S̄(X), S_1 … S_{i-1}(X))]`, with the lower
/// slices taken as perfectly corrected.
pub fn classical_bit_error_rate<T: Real>(
    i: usize,
    spec: &SliceSpec<T>,
    channel: &ChannelModel<T>,
) -> Result<Probability<T>> {
    if i == 0 || i > spec.m() {
        return Err(Error::InvalidSpec(format!(
            "slice index {i} not in 1..={}",
            spec.m()
        )));
    }
    Ok(classical_bit_error_rates(spec, channel)?[i - 1])
}

/// All `e_i^b` at once.
///
/// The integral over `(x, x')` is taken in the coordinates `(s̄, cell, x')`:
/// the joint density of `(s̄, cell)` is the cell probability, and for fixed
/// `s̄` the `x'` integral over each estimator's decision region is an exact
/// Gaussian interval mass. What remains is a smooth one-dimensional
/// adaptive integral over `s̄ ∈ [0, 1]`.
pub fn classical_bit_error_rates<T: Real>(
    spec: &SliceSpec<T>,
    channel: &ChannelModel<T>,
) -> Result<Vec<Probability<T>>> {
    classical_bit_error_rates_with(
        spec,
        channel,
        QuadOptions::with_rel_tol(T::lit(ERROR_RATE_REL_TOL)),
    )
}

pub fn classical_bit_error_rates_with<T: Real>(
    spec: &SliceSpec<T>,
    channel: &ChannelModel<T>,
    opts: QuadOptions<T>,
) -> Result<Vec<Probability<T>>> {
    channel.validate()?;
    let m = spec.m();
    let q = integrate_vec(
        |sbar, out: &mut [T]| {
            let ctx = SbarContext::new(spec, channel, sbar);
            for (k, o) in out.iter_mut().enumerate() {
                *o = (0..spec.cells())
                    .map(|c| spec.cell_probability(c) * ctx.slice_error(k + 1, c))
                    .sum();
            }
            Ok(())
        },
        m,
        T::zero(),
        T::one(),
        opts,
    )
    .map_err(|(_, e)| e)?;
    Ok(q.values.into_iter().map(Probability::clamped).collect())
}

/// Common bits per sample produced by sliced error correction,
/// `H(S_1 … S_m) - Σ_i h(e_i^b)`.
pub fn sec_common_bit_rate<T: Real>(spec: &SliceSpec<T>, channel: &ChannelModel<T>) -> Result<T> {
    let rates = classical_bit_error_rates(spec, channel)?;
    Ok(common_bit_rate_from(spec, &rates))
}

/// `H(S) - Σ h(e_i^b)` for given error rates.
pub fn common_bit_rate_from<T: Real>(spec: &SliceSpec<T>, bit_errors: &[Probability<T>]) -> T {
    spec.label_entropy() - bit_errors.iter().map(|&e| binary_entropy(e)).sum::<T>()
}
