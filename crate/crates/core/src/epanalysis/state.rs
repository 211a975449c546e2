use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::channel::{eve_overlap_kernel, ChannelModel};
use crate::error::{Error, Result};
use crate::mathcore::{integrate_vec, Probability, QuadOptions};
use crate::slicing::{SbarContext, SliceSpec};
use crate::Real;

/// Relative tolerance for each density-matrix element.
pub const ELEMENT_REL_TOL: f64 = 1e-6;
/// Absolute floor below which an element counts as converged.
pub const ELEMENT_ABS_TOL: f64 = 1e-12;
/// Largest slice count for which the joint state is built.
pub const MAX_STATE_SLICES: usize = 3;

/// Reduced density matrix over the slice and estimator registers after
/// tracing out `s̄`, `ē` and Eve.
///
/// The basis index of `|s_1 … s_m, e_1 … e_m⟩` is `(s << m) | e`, where `s`
/// and `e` pack the slice and estimator bits with slice 1 least significant.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReducedJointState<T> {
    m: usize,
    dim: usize,
    /// Row-major `dim × dim`.
    matrix: Vec<T>,
}

/// Two-qubit state of `(s_i, e_i)`, basis index `2 s_i + e_i`.
pub type PairState<T> = [[T; 4]; 4];

impl<T: Real> ReducedJointState<T> {
    /// Wraps a symmetric matrix given row-major.
    pub fn from_matrix(m: usize, matrix: Vec<T>) -> Result<Self> {
        let dim = 1usize << (2 * m);
        if matrix.len() != dim * dim {
            return Err(Error::LengthMismatch {
                expected: dim * dim,
                found: matrix.len(),
            });
        }
        Ok(ReducedJointState { m, dim, matrix })
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn index(&self, s: usize, e: usize) -> usize {
        (s << self.m) | e
    }

    pub fn get(&self, row: usize, col: usize) -> T {
        self.matrix[row * self.dim + col]
    }

    pub fn as_slice(&self) -> &[T] {
        &self.matrix
    }

    pub fn trace(&self) -> T {
        (0..self.dim).map(|k| self.get(k, k)).sum()
    }

    /// `Tr(ρ²)`, which for a symmetric matrix is the sum of squared entries.
    pub fn purity(&self) -> T {
        self.matrix.iter().map(|&v| v * v).sum()
    }

    pub fn eigenvalues(&self) -> Vec<f64> {
        let m = DMatrix::from_fn(self.dim, self.dim, |r, c| self.get(r, c).as_f64());
        let mut ev: Vec<f64> = m.symmetric_eigenvalues().iter().copied().collect();
        ev.sort_by(f64::total_cmp);
        ev
    }

    pub fn min_eigenvalue(&self) -> f64 {
        self.eigenvalues()[0]
    }

    pub fn max_asymmetry(&self) -> T {
        let mut worst = T::zero();
        for r in 0..self.dim {
            for c in r + 1..self.dim {
                worst = worst.max((self.get(r, c) - self.get(c, r)).abs());
            }
        }
        worst
    }
}

/// `ρ_i = Tr_{all but s_i, e_i} ρ`.
pub fn pair_marginal<T: Real>(state: &ReducedJointState<T>, i: usize) -> Result<PairState<T>> {
    let m = state.m();
    if i == 0 || i > m {
        return Err(Error::InvalidSpec(format!(
            "slice index {i} not in 1..={m}"
        )));
    }
    let n = 1usize << m;
    let bit = |v: usize| (v >> (i - 1)) & 1;
    let mut out = [[T::zero(); 4]; 4];
    for s in 0..n {
        for e in 0..n {
            let row = state.index(s, e);
            let a = 2 * bit(s) + bit(e);
            // Columns agree with the row on every traced register.
            let rest_s = s & !(1 << (i - 1));
            let rest_e = e & !(1 << (i - 1));
            for bs in 0..2 {
                for be in 0..2 {
                    let col = state.index(rest_s | bs << (i - 1), rest_e | be << (i - 1));
                    out[a][2 * bs + be] += state.get(row, col);
                }
            }
        }
    }
    Ok(out)
}

/// `(1 - Tr((Z ⊗ Z) ρ)) / 2`.
pub fn bit_error_rate<T: Real>(rho: &PairState<T>) -> Probability<T> {
    let zz = rho[0][0] - rho[1][1] - rho[2][2] + rho[3][3];
    Probability::clamped((T::one() - zz) / T::two())
}

/// `(1 - Tr((X ⊗ X) ρ)) / 2`.
pub fn phase_error_rate<T: Real>(rho: &PairState<T>) -> Probability<T> {
    let xx = rho[0][3] + rho[1][2] + rho[2][1] + rho[3][0];
    Probability::clamped((T::one() - xx) / T::two())
}

/// Builds the reduced joint state for the pure attenuation channel.
///
/// For fixed `s̄` and slice label `s`, Bob's normalised amplitude in the
/// `ē` coordinate is `√P(e | s̄, s)` whatever the value of `ē`, because
/// `Ē` is the conditional CDF of `x'` within the estimator cell. The `ē`
/// integral is therefore exact and each element reduces to
///
/// `ρ[(s,e),(s',e')] = ∫₀¹ ds̄ √(p_s p_s' P(e|s̄,s) P(e'|s̄,s')) κ(x(s̄,s), x(s̄,s'))`
///
/// with `κ` Eve's overlap kernel. `P(e | s̄, s)` is an exact Gaussian mass
/// over the estimator decision pieces. The upper triangle is integrated as
/// one vector-valued adaptive quadrature and mirrored.
pub fn reduced_joint_state<T: Real>(
    spec: &SliceSpec<T>,
    channel: &ChannelModel<T>,
) -> Result<ReducedJointState<T>> {
    reduced_joint_state_with(
        spec,
        channel,
        QuadOptions {
            rel_tol: T::lit(ELEMENT_REL_TOL),
            abs_tol: T::lit(ELEMENT_ABS_TOL),
            ..QuadOptions::default()
        },
    )
}

pub fn reduced_joint_state_with<T: Real>(
    spec: &SliceSpec<T>,
    channel: &ChannelModel<T>,
    opts: QuadOptions<T>,
) -> Result<ReducedJointState<T>> {
    channel.require_pure("reduced_joint_state")?;
    let m = spec.m();
    if m > MAX_STATE_SLICES {
        return Err(Error::InvalidSpec(format!(
            "joint state limited to {MAX_STATE_SLICES} slices, got {m}"
        )));
    }
    let n = spec.cells();
    let dim = n * n;
    let pairs: Vec<(usize, usize)> = (0..dim)
        .flat_map(|r| (r..dim).map(move |c| (r, c)))
        .collect();
    let mut amp = vec![T::zero(); dim];
    let mut kappa = vec![T::zero(); n * n];
    let q = integrate_vec(
        |sbar, out: &mut [T]| {
            let ctx = SbarContext::new(spec, channel, sbar);
            for s in 0..n {
                let p = spec.cell_probability(s);
                for (e, pe) in ctx.estimator_distribution(s).into_iter().enumerate() {
                    amp[(s << m) | e] = (p * pe).sqrt();
                }
                for t in 0..n {
                    kappa[s * n + t] = eve_overlap_kernel(ctx.x(s), ctx.x(t), channel);
                }
            }
            for (o, &(r, c)) in out.iter_mut().zip(&pairs) {
                *o = amp[r] * amp[c] * kappa[(r >> m) * n + (c >> m)];
            }
            Ok(())
        },
        pairs.len(),
        T::zero(),
        T::one(),
        opts,
    )
    .map_err(|(k, e)| match e {
        Error::NonConvergence {
            error_estimate,
            target,
            ..
        } => Error::ElementNonConvergence {
            row: pairs[k].0,
            col: pairs[k].1,
            error_estimate,
            target,
        },
        other => other,
    })?;
    let mut matrix = vec![T::zero(); dim * dim];
    for (&(r, c), &v) in pairs.iter().zip(&q.values) {
        matrix[r * dim + c] = v;
        matrix[c * dim + r] = v;
    }
    ReducedJointState::from_matrix(m, matrix)
}

/// Per-slice `(e_b, e_p)` of a joint state.
pub fn slice_error_rates<T: Real>(
    state: &ReducedJointState<T>,
) -> Vec<(Probability<T>, Probability<T>)> {
    (1..=state.m())
        .map(|i| {
            let rho = pair_marginal(state, i).expect("slice index in range");
            (bit_error_rate(&rho), phase_error_rate(&rho))
        })
        .collect()
}

/// States for several channels, built in parallel; output order follows
/// the input.
pub fn reduced_joint_states<T: Real>(
    spec: &SliceSpec<T>,
    channels: &[ChannelModel<T>],
) -> Vec<Result<ReducedJointState<T>>> {
    channels
        .par_iter()
        .map(|c| reduced_joint_state(spec, c))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn bell(sign: f64) -> PairState<f64> {
        // (|00⟩ ± |11⟩)/√2
        let mut r = [[0.0; 4]; 4];
        r[0][0] = 0.5;
        r[3][3] = 0.5;
        r[0][3] = 0.5 * sign;
        r[3][0] = 0.5 * sign;
        r
    }

    #[test]
    fn error_rates_of_reference_states() {
        let mixed = [
            [0.25, 0.0, 0.0, 0.0],
            [0.0, 0.25, 0.0, 0.0],
            [0.0, 0.0, 0.25, 0.0],
            [0.0, 0.0, 0.0, 0.25],
        ];
        assert_eq!(bit_error_rate(&mixed).value(), 0.5);
        assert_eq!(phase_error_rate(&mixed).value(), 0.5);
        assert_eq!(bit_error_rate(&bell(1.0)).value(), 0.0);
        assert_eq!(phase_error_rate(&bell(1.0)).value(), 0.0);
        assert_eq!(phase_error_rate(&bell(-1.0)).value(), 1.0);
    }

    #[test]
    fn marginal_of_product_state() {
        // ρ = ρ_A ⊗ ρ_B on m = 1 with both diagonal: marginal is itself.
        let m = 1;
        let diag = [0.1, 0.2, 0.3, 0.4];
        let mut matrix = vec![0.0; 16];
        for k in 0..4 {
            matrix[k * 4 + k] = diag[k];
        }
        let st = ReducedJointState::from_matrix(m, matrix).unwrap();
        let r = pair_marginal(&st, 1).unwrap();
        for k in 0..4 {
            assert_abs_diff_eq!(r[k][k], diag[k]);
        }
        assert!(pair_marginal(&st, 2).is_err());
        assert_abs_diff_eq!(st.trace(), 1.0);
        assert_abs_diff_eq!(st.min_eigenvalue(), 0.1, epsilon = 1e-12);
    }

    #[test]
    fn marginal_traces_out_the_other_slice() {
        // m = 2: |s, e⟩ = |s1 s2, e1 e2⟩; take a pure product of a Bell pair
        // on slice 1 and |00⟩ on slice 2, so ρ_1 is Bell and ρ_2 is |00⟩.
        let m = 2;
        let dim = 16;
        let mut psi = vec![0.0; dim];
        let idx = |s: usize, e: usize| (s << m) | e;
        psi[idx(0, 0)] = 0.5f64.sqrt();
        psi[idx(1, 1)] = 0.5f64.sqrt();
        let mut matrix = vec![0.0; dim * dim];
        for r in 0..dim {
            for c in 0..dim {
                matrix[r * dim + c] = psi[r] * psi[c];
            }
        }
        let st = ReducedJointState::from_matrix(m, matrix).unwrap();
        let r1 = pair_marginal(&st, 1).unwrap();
        let b = bell(1.0);
        for a in 0..4 {
            for c in 0..4 {
                assert_abs_diff_eq!(r1[a][c], b[a][c], epsilon = 1e-15);
            }
        }
        let r2 = pair_marginal(&st, 2).unwrap();
        assert_abs_diff_eq!(r2[0][0], 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(st.purity(), 1.0, epsilon = 1e-15);
    }
}
