use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mathcore::{gaussian_quantile, inverse_erfc, normal_interval_mass, Probability};
use crate::Real;

/// Schema version written into every serialized [`SliceSpec`].
pub const SLICE_SPEC_VERSION: u32 = 1;

/// Largest slice count accepted. Cells are indexed by `usize` bit patterns
/// and the joint state grows as `4^m`, so this is already generous.
pub const MAX_SLICES: usize = 16;

/// Number of modulation standard deviations at which unbounded cells are
/// cut off when inverting `S̄`.
pub const TAIL_CLAMP_SD: f64 = 8.0;

/// Partition of Alice's quadrature value into `2^m` cells, each labelled by
/// `m` bits.
///
/// Cell `c` is `(b[c-1], b[c]]` counted left to right, with `b[-1] = -∞`
/// and `b[2^m - 1] = +∞`. Its label is the natural binary expansion of
/// `c`, slice 1 being the least significant bit, so the most significant
/// slice is the sign bit of a symmetric spec.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "SliceSpecDocument<T>", into = "SliceSpecDocument<T>")]
#[serde(bound(
    serialize = "T: Real + Serialize",
    deserialize = "T: Real + Deserialize<'de>"
))]
pub struct SliceSpec<T> {
    m: usize,
    boundaries: Vec<T>,
    variance: T,
    cell_mass: Vec<T>,
}

#[derive(Serialize, Deserialize)]
struct SliceSpecDocument<T> {
    version: u32,
    m: usize,
    boundaries: Vec<T>,
    variance: T,
}

impl<T: Real> TryFrom<SliceSpecDocument<T>> for SliceSpec<T> {
    type Error = Error;

    fn try_from(doc: SliceSpecDocument<T>) -> Result<Self> {
        if doc.version != SLICE_SPEC_VERSION {
            return Err(Error::InvalidSpec(format!(
                "unsupported slice spec version {} (expected {SLICE_SPEC_VERSION})",
                doc.version
            )));
        }
        SliceSpec::new(doc.m, doc.boundaries, doc.variance)
    }
}

impl<T: Real> From<SliceSpec<T>> for SliceSpecDocument<T> {
    fn from(spec: SliceSpec<T>) -> Self {
        SliceSpecDocument {
            version: SLICE_SPEC_VERSION,
            m: spec.m,
            boundaries: spec.boundaries,
            variance: spec.variance,
        }
    }
}

/// `(S̄(x), S_1(x) … S_m(x))`, with the bits packed as a cell index.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SymbolDecomposition<T> {
    pub cell: usize,
    pub sbar: T,
}

impl<T: Real> SymbolDecomposition<T> {
    pub fn from_bits(bits: &[u8], sbar: T) -> Result<Self> {
        Ok(SymbolDecomposition {
            cell: cell_from_bits(bits)?,
            sbar,
        })
    }

    /// Bit of slice `i` (1-based).
    pub fn bit(&self, i: usize) -> u8 {
        slice_bit(self.cell, i)
    }

    pub fn bits(&self, m: usize) -> Vec<u8> {
        (1..=m).map(|i| self.bit(i)).collect()
    }
}

/// Bit of slice `i` (1-based) in the label of `cell`.
#[inline]
pub fn slice_bit(cell: usize, i: usize) -> u8 {
    ((cell >> (i - 1)) & 1) as u8
}

/// Packs slice bits (slice 1 first) into a cell index.
pub fn cell_from_bits(bits: &[u8]) -> Result<usize> {
    if bits.len() > MAX_SLICES {
        return Err(Error::InvalidSpec(format!(
            "{} bits exceed the slice limit",
            bits.len()
        )));
    }
    bits.iter()
        .enumerate()
        .try_fold(0usize, |acc, (k, &b)| match b {
            0 | 1 => Ok(acc | (b as usize) << k),
            _ => Err(Error::InvalidSpec(format!(
                "bit value {b} at slice {}",
                k + 1
            ))),
        })
}

/// Result of inverting a decomposition.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Inversion<T> {
    pub x: T,
    /// The exact preimage lay beyond `±8√V` (or at an infinite cell
    /// endpoint) and was clamped there.
    pub clamped: bool,
}

impl<T: Real> SliceSpec<T> {
    pub fn new(m: usize, boundaries: Vec<T>, variance: T) -> Result<Self> {
        if m == 0 || m > MAX_SLICES {
            return Err(Error::InvalidSpec(format!(
                "slice count {m} not in 1..={MAX_SLICES}"
            )));
        }
        if !(variance > T::zero()) || !variance.is_finite() {
            return Err(Error::InvalidSpec(format!(
                "variance {variance} must be finite and > 0"
            )));
        }
        let expected = (1usize << m) - 1;
        if boundaries.len() != expected {
            return Err(Error::InvalidSpec(format!(
                "{m} slices need {expected} boundaries, got {}",
                boundaries.len()
            )));
        }
        if boundaries.iter().any(|b| !b.is_finite()) {
            return Err(Error::InvalidSpec("boundaries must be finite".into()));
        }
        if boundaries.windows(2).any(|w| !(w[0] < w[1])) {
            return Err(Error::InvalidSpec(
                "boundaries must be strictly increasing".into(),
            ));
        }
        let sd = variance.sqrt();
        let cell_mass: Vec<T> = (0..=expected)
            .map(|c| {
                let lo = if c == 0 {
                    T::neg_infinity()
                } else {
                    boundaries[c - 1]
                };
                let hi = if c == expected {
                    T::infinity()
                } else {
                    boundaries[c]
                };
                normal_interval_mass(lo, hi, T::zero(), sd)
            })
            .collect();
        if let Some(c) = cell_mass.iter().position(|&p| !(p > T::zero())) {
            return Err(Error::InvalidSpec(format!("cell {c} has zero probability")));
        }
        Ok(SliceSpec {
            m,
            boundaries,
            variance,
            cell_mass,
        })
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn cells(&self) -> usize {
        1 << self.m
    }

    pub fn boundaries(&self) -> &[T] {
        &self.boundaries
    }

    pub fn variance(&self) -> T {
        self.variance
    }

    pub fn sd(&self) -> T {
        self.variance.sqrt()
    }

    pub fn tail_clamp(&self) -> T {
        T::lit(TAIL_CLAMP_SD) * self.sd()
    }

    /// `(lo, hi]` of `cell`, with infinite outer endpoints.
    pub fn cell_bounds(&self, cell: usize) -> (T, T) {
        let last = self.boundaries.len();
        let lo = if cell == 0 {
            T::neg_infinity()
        } else {
            self.boundaries[cell - 1]
        };
        let hi = if cell == last {
            T::infinity()
        } else {
            self.boundaries[cell]
        };
        (lo, hi)
    }

    pub fn cell_probability(&self, cell: usize) -> T {
        self.cell_mass[cell]
    }

    pub fn cell_probabilities(&self) -> &[T] {
        &self.cell_mass
    }

    pub fn cell_of(&self, x: T) -> usize {
        self.boundaries.partition_point(|&b| b < x)
    }

    /// Entropy of the slice bits, `H(S_1 … S_m)`, in bits.
    pub fn label_entropy(&self) -> T {
        -self.cell_mass.iter().map(|&p| p * p.log2()).sum::<T>()
    }

    /// Within-cell conditional CDF of `N(0, V)` at `x`, for `x` in `cell`.
    pub fn sbar_in_cell(&self, x: T, cell: usize) -> T {
        let (lo, hi) = self.cell_bounds(cell);
        let sd = self.sd();
        let mass = self.cell_mass[cell];
        let s = if lo >= T::zero() {
            T::one() - normal_interval_mass(x, hi, T::zero(), sd) / mass
        } else {
            normal_interval_mass(lo, x, T::zero(), sd) / mass
        };
        s.max(T::zero()).min(T::one())
    }

    pub fn decompose(&self, x: T) -> SymbolDecomposition<T> {
        let cell = self.cell_of(x);
        SymbolDecomposition {
            cell,
            sbar: self.sbar_in_cell(x, cell),
        }
    }

    /// The unique `x` with `decompose(x) == d`, from the closed-form
    /// within-cell quantile.
    pub fn invert(&self, d: &SymbolDecomposition<T>) -> Result<Inversion<T>> {
        if d.cell >= self.cells() {
            return Err(Error::InvalidSpec(format!("cell {} out of range", d.cell)));
        }
        if !(d.sbar >= T::zero() && d.sbar <= T::one()) {
            return Err(Error::domain(
                "invert",
                format!("sbar = {} not in [0, 1]", d.sbar),
            ));
        }
        Ok(self.invert_unchecked(d.sbar, d.cell))
    }

    /// Value of cell `cell` at conditional CDF `sbar`, without argument checks.
    pub(crate) fn invert_unchecked(&self, sbar: T, cell: usize) -> Inversion<T> {
        let (lo, hi) = self.cell_bounds(cell);
        let sd = self.sd();
        let mass = self.cell_mass[cell];
        let clamp = self.tail_clamp();
        // Mass of N(0, V) below and above the target point.
        let below = normal_interval_mass(T::neg_infinity(), lo, T::zero(), sd) + sbar * mass;
        let above =
            normal_interval_mass(hi, T::infinity(), T::zero(), sd) + (T::one() - sbar) * mass;
        let z = if below <= above {
            if below <= T::zero() {
                T::neg_infinity()
            } else {
                -T::SQRT_2() * inverse_erfc(T::two() * below).unwrap_or(T::infinity())
            }
        } else if above <= T::zero() {
            T::infinity()
        } else {
            T::SQRT_2() * inverse_erfc(T::two() * above).unwrap_or(T::infinity())
        };
        // Rounding can push the quantile a hair outside the cell.
        let x = (z * sd).max(lo).min(hi);
        if x.abs() > clamp || !x.is_finite() {
            Inversion {
                x: x.max(-clamp).min(clamp),
                clamped: true,
            }
        } else {
            Inversion { x, clamped: false }
        }
    }

    /// Whether the boundaries are mirror images about 0 within `tol`.
    pub fn is_symmetric(&self, tol: T) -> bool {
        let b = &self.boundaries;
        let n = b.len();
        (0..n).all(|k| (b[k] + b[n - 1 - k]).abs() <= tol)
    }
}

/// Spec whose boundaries are the `2^m`-quantiles of `N(0, V)`, so every
/// cell has probability `2^-m`.
pub fn default_equiprobable_spec<T: Real>(m: usize, variance: T) -> Result<SliceSpec<T>> {
    if m == 0 || m > MAX_SLICES {
        return Err(Error::InvalidSpec(format!(
            "slice count {m} not in 1..={MAX_SLICES}"
        )));
    }
    if !(variance > T::zero()) {
        return Err(Error::InvalidSpec(format!(
            "variance {variance} must be > 0"
        )));
    }
    let n = 1usize << m;
    let sd = variance.sqrt();
    let boundaries = (1..n)
        .map(|k| {
            if 2 * k == n {
                Ok(T::zero())
            } else {
                let q = T::from_usize(k).unwrap() / T::from_usize(n).unwrap();
                Ok(sd * gaussian_quantile(Probability::new(q)?)?)
            }
        })
        .collect::<Result<Vec<T>>>()?;
    SliceSpec::new(m, boundaries, variance)
}
