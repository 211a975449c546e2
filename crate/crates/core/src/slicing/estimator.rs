use crate::channel::ChannelModel;
use crate::error::{Error, Result};
use crate::mathcore::{log_sum_exp, normal_interval_mass, Probability};
use crate::slicing::spec::{cell_from_bits, slice_bit, SliceSpec};
use crate::Real;

/// Points per noise standard deviation in the sign-change scan.
const SCAN_PER_SD: f64 = 4.0;
/// Half-width of the scanned window beyond the outermost candidates, in
/// noise standard deviations. Decision changes further out carry no mass.
const SCAN_MARGIN_SD: f64 = 12.0;

/// The sets `{x' : E_i(x') = 1}` and its complement for one `(i, s̄,
/// prefix)`, as the sorted points where the decision flips.
#[derive(Debug, Clone, PartialEq)]
pub struct DecisionRegions<T> {
    pub roots: Vec<T>,
    /// Decision on `(-∞, roots[0]]`.
    pub leftmost: u8,
}

impl<T: Real> DecisionRegions<T> {
    pub fn bit_at(&self, x: T) -> u8 {
        let flips = self.roots.partition_point(|&r| r < x);
        self.leftmost ^ (flips & 1) as u8
    }

    /// Probability that `N(mean, sd²)` falls where the decision is `bit`.
    pub fn mass(&self, bit: u8, mean: T, sd: T) -> T {
        let mut total = T::zero();
        let mut lo = T::neg_infinity();
        let mut current = self.leftmost;
        for &r in self.roots.iter().chain(std::iter::once(&T::infinity())) {
            if current == bit {
                total += normal_interval_mass(lo, r, mean, sd);
            }
            lo = r;
            current ^= 1;
        }
        total
    }
}

/// Joint estimator output `e = (E_1 … E_m)` as a function of `x'`, for a
/// fixed `s̄` and true cell. Piece `k` is `(breaks[k-1], breaks[k]]`.
#[derive(Debug, Clone, PartialEq)]
pub struct EstimatorPartition<T> {
    pub breaks: Vec<T>,
    pub codes: Vec<usize>,
}

impl<T: Real> EstimatorPartition<T> {
    pub fn piece(&self, k: usize) -> (T, T) {
        let lo = if k == 0 {
            T::neg_infinity()
        } else {
            self.breaks[k - 1]
        };
        let hi = if k == self.breaks.len() {
            T::infinity()
        } else {
            self.breaks[k]
        };
        (lo, hi)
    }

    pub fn code_at(&self, x: T) -> usize {
        self.codes[self.breaks.partition_point(|&b| b < x)]
    }
}

/// Everything the estimators need at one value of `s̄`: the candidate
/// preimages of every cell and the decision regions of every slice for
/// every possible prefix of lower bits.
#[derive(Debug, Clone)]
pub struct SbarContext<T> {
    m: usize,
    sbar: T,
    xs: Vec<T>,
    log_prior: Vec<T>,
    gain: T,
    var: T,
    sd: T,
    /// `regions[i - 1][prefix]`.
    regions: Vec<Vec<DecisionRegions<T>>>,
}

impl<T: Real> SbarContext<T> {
    pub fn new(spec: &SliceSpec<T>, channel: &ChannelModel<T>, sbar: T) -> Self {
        let xs: Vec<T> = (0..spec.cells())
            .map(|c| spec.invert_unchecked(sbar, c).x)
            .collect();
        // The joint density of (S̄, cell) is the cell probability, since S̄
        // is uniform within each cell.
        let log_prior = spec.cell_probabilities().iter().map(|p| p.ln()).collect();
        let mut ctx = SbarContext {
            m: spec.m(),
            sbar,
            xs,
            log_prior,
            gain: channel.gain(),
            var: channel.conditional_variance(),
            sd: channel.conditional_sd(),
            regions: Vec::new(),
        };
        ctx.regions = (1..=ctx.m)
            .map(|i| {
                (0..1usize << (i - 1))
                    .map(|p| ctx.find_regions(i, p))
                    .collect()
            })
            .collect();
        ctx
    }

    pub fn sbar(&self) -> T {
        self.sbar
    }

    /// Preimage of `cell` at this `s̄`.
    pub fn x(&self, cell: usize) -> T {
        self.xs[cell]
    }

    pub fn candidates(&self) -> &[T] {
        &self.xs
    }

    pub fn mean(&self, cell: usize) -> T {
        self.gain * self.xs[cell]
    }

    pub fn noise_sd(&self) -> T {
        self.sd
    }

    fn members(
        &self,
        i: usize,
        prefix: usize,
        bit: u8,
    ) -> impl Iterator<Item = usize> + Clone + '_ {
        let mask = (1usize << (i - 1)) - 1;
        (0..self.xs.len()).filter(move |&c| c & mask == prefix && slice_bit(c, i) == bit)
    }

    /// `log P(S_i = 1 | …) - log P(S_i = 0 | …)` given `x'`, `s̄` and the
    /// lower bits `prefix`.
    pub fn log_odds(&self, i: usize, prefix: usize, x_prime: T) -> T {
        let ll = |c: usize| {
            let d = x_prime - self.gain * self.xs[c];
            self.log_prior[c] - d * d / (T::two() * self.var)
        };
        let l1 = log_sum_exp(self.members(i, prefix, 1).map(ll));
        let l0 = log_sum_exp(self.members(i, prefix, 0).map(ll));
        l1 - l0
    }

    /// MAP estimate of slice `i`; exact ties go to 0.
    pub fn decide(&self, i: usize, prefix: usize, x_prime: T) -> u8 {
        (self.log_odds(i, prefix, x_prime) > T::zero()) as u8
    }

    pub fn regions(&self, i: usize, prefix: usize) -> &DecisionRegions<T> {
        &self.regions[i - 1][prefix]
    }

    fn find_regions(&self, i: usize, prefix: usize) -> DecisionRegions<T> {
        let mut means: Vec<T> = self
            .members(i, prefix, 0)
            .chain(self.members(i, prefix, 1))
            .map(|c| self.gain * self.xs[c])
            .collect();
        means.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let margin = T::lit(SCAN_MARGIN_SD) * self.sd;
        let lo = means[0] - margin;
        let hi = means[means.len() - 1] + margin;
        let step = self.sd / T::lit(SCAN_PER_SD);

        // Scan points: a uniform grid plus every candidate mean and the
        // midpoints between neighbours, where close candidates may hide a
        // pair of flips inside one grid step.
        let mut grid: Vec<T> = Vec::new();
        let n = ((hi - lo) / step).ceil().to_usize().unwrap_or(0).max(1);
        for k in 0..=n {
            grid.push(lo + (hi - lo) * T::from_usize(k).unwrap() / T::from_usize(n).unwrap());
        }
        for w in means.windows(2) {
            grid.push(w[0]);
            grid.push(T::half() * (w[0] + w[1]));
        }
        grid.push(means[means.len() - 1]);
        grid.sort_by(|a, b| a.partial_cmp(b).unwrap());
        grid.dedup();

        let f = |x: T| self.log_odds(i, prefix, x);
        let mut roots = Vec::new();
        let mut prev_x = grid[0];
        let mut prev_bit = (f(prev_x) > T::zero()) as u8;
        let leftmost = prev_bit;
        for &x in &grid[1..] {
            let bit = (f(x) > T::zero()) as u8;
            if bit != prev_bit {
                roots.push(bisect(&f, prev_x, x, prev_bit));
                prev_bit = bit;
            }
            prev_x = x;
        }
        DecisionRegions { roots, leftmost }
    }

    /// Joint decision pieces when the true cell is `cell` (each slice's
    /// estimator conditions on the true lower bits).
    pub fn partition(&self, cell: usize) -> EstimatorPartition<T> {
        let slice_regions: Vec<&DecisionRegions<T>> = (1..=self.m)
            .map(|i| self.regions(i, cell & ((1usize << (i - 1)) - 1)))
            .collect();
        let mut breaks: Vec<T> = slice_regions
            .iter()
            .flat_map(|r| r.roots.iter().copied())
            .collect();
        breaks.sort_by(|a, b| a.partial_cmp(b).unwrap());
        breaks.dedup();
        let code_at = |x: T| {
            slice_regions
                .iter()
                .enumerate()
                .fold(0usize, |acc, (k, r)| acc | (r.bit_at(x) as usize) << k)
        };
        let mut codes = Vec::with_capacity(breaks.len() + 1);
        for k in 0..=breaks.len() {
            // A representative point strictly inside piece k.
            let x = match (k, breaks.len()) {
                (_, 0) => T::zero(),
                (0, _) => breaks[0] - T::one(),
                (k, n) if k == n => breaks[n - 1] + T::one(),
                (k, _) => T::half() * (breaks[k - 1] + breaks[k]),
            };
            codes.push(code_at(x));
        }
        EstimatorPartition { breaks, codes }
    }

    /// `P(E = e | s̄, cell)` for every estimator code `e`.
    pub fn estimator_distribution(&self, cell: usize) -> Vec<T> {
        let part = self.partition(cell);
        let mut out = vec![T::zero(); 1 << self.m];
        let mean = self.mean(cell);
        for (k, &code) in part.codes.iter().enumerate() {
            let (lo, hi) = part.piece(k);
            out[code] += normal_interval_mass(lo, hi, mean, self.sd);
        }
        out
    }

    /// Probability that slice `i`'s estimate differs from the true bit of
    /// `cell`, given the true lower bits.
    pub fn slice_error(&self, i: usize, cell: usize) -> T {
        let prefix = cell & ((1usize << (i - 1)) - 1);
        let wrong = 1 - slice_bit(cell, i);
        self.regions(i, prefix)
            .mass(wrong, self.mean(cell), self.sd)
    }
}

fn bisect<T: Real>(f: &impl Fn(T) -> T, mut a: T, mut b: T, bit_at_a: u8) -> T {
    for _ in 0..200 {
        let mid = T::half() * (a + b);
        if mid <= a || mid >= b {
            break;
        }
        if ((f(mid) > T::zero()) as u8) == bit_at_a {
            a = mid;
        } else {
            b = mid;
        }
    }
    T::half() * (a + b)
}

fn check_slice(spec: &SliceSpec<impl Real>, i: usize) -> Result<()> {
    if i == 0 || i > spec.m() {
        return Err(Error::InvalidSpec(format!(
            "slice index {i} not in 1..={}",
            spec.m()
        )));
    }
    Ok(())
}

/// `log P(S_i = 1 | x', s̄, lower bits) - log P(S_i = 0 | …)`, marginalising
/// over the unknown higher slices. `prefix` packs the lower bits.
pub fn slice_log_odds<T: Real>(
    i: usize,
    x_prime: T,
    sbar: T,
    prefix: usize,
    channel: &ChannelModel<T>,
    spec: &SliceSpec<T>,
) -> T {
    let gain = channel.gain();
    let var = channel.conditional_variance();
    let mask = (1usize << (i - 1)) - 1;
    let mut l = [Vec::with_capacity(4), Vec::with_capacity(4)];
    for c in (0..spec.cells()).filter(|c| c & mask == prefix) {
        let x = spec.invert_unchecked(sbar, c).x;
        let d = x_prime - gain * x;
        l[slice_bit(c, i) as usize].push(spec.cell_probability(c).ln() - d * d / (T::two() * var));
    }
    log_sum_exp(l[1].iter().copied()) - log_sum_exp(l[0].iter().copied())
}

/// Bob's MAP estimate `E_i(x', s̄, β_1 … β_{i-1})` of Alice's slice-`i` bit.
/// Exact ties go to 0.
pub fn map_estimate_bit<T: Real>(
    i: usize,
    x_prime: T,
    sbar: T,
    prev_bits: &[u8],
    channel: &ChannelModel<T>,
    spec: &SliceSpec<T>,
) -> Result<u8> {
    check_slice(spec, i)?;
    if prev_bits.len() != i - 1 {
        return Err(Error::LengthMismatch {
            expected: i - 1,
            found: prev_bits.len(),
        });
    }
    let prefix = cell_from_bits(prev_bits)?;
    Ok((slice_log_odds(i, x_prime, sbar, prefix, channel, spec) > T::zero()) as u8)
}

/// `Ē(x', s̄, s)`: conditional CDF of `X'` given `S̄ = s̄`, the slice bits
/// `s` and the estimator outputs `E_1 … E_m` observed at `x'`.
pub fn ebar<T: Real>(
    x_prime: T,
    sbar: T,
    bits: &[u8],
    channel: &ChannelModel<T>,
    spec: &SliceSpec<T>,
) -> Result<Probability<T>> {
    if bits.len() != spec.m() {
        return Err(Error::LengthMismatch {
            expected: spec.m(),
            found: bits.len(),
        });
    }
    let cell = cell_from_bits(bits)?;
    let ctx = SbarContext::new(spec, channel, sbar);
    Ok(ctx.ebar(x_prime, cell))
}

impl<T: Real> SbarContext<T> {
    /// `Ē` for true cell `cell`; see [`ebar`].
    pub fn ebar(&self, x_prime: T, cell: usize) -> Probability<T> {
        let part = self.partition(cell);
        let code = part.code_at(x_prime);
        let mean = self.mean(cell);
        let mut below = T::zero();
        let mut total = T::zero();
        for (k, &c) in part.codes.iter().enumerate() {
            if c != code {
                continue;
            }
            let (lo, hi) = part.piece(k);
            let m = normal_interval_mass(lo, hi, mean, self.sd);
            total += m;
            if hi <= x_prime {
                below += m;
            } else if lo < x_prime {
                below += normal_interval_mass(lo, x_prime, mean, self.sd);
            }
        }
        if total > T::zero() {
            Probability::clamped(below / total)
        } else {
            Probability::clamped(T::half())
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mathcore::{stats, RandomStream};
    use crate::slicing::default_equiprobable_spec;

    fn setup(eta: f64) -> (SliceSpec<f64>, ChannelModel<f64>) {
        (
            default_equiprobable_spec(2, 31.0).unwrap(),
            ChannelModel::attenuation(eta).unwrap(),
        )
    }

    #[test]
    fn dominant_candidate_wins() {
        let (spec, ch) = setup(0.8);
        let sbar = 0.3;
        // Slice 2 with s1 = 0: candidates are cells 0 and 2.
        let x2 = spec.invert_unchecked(sbar, 2).x;
        let xp = ch.gain() * x2;
        assert_eq!(map_estimate_bit(2, xp, sbar, &[0], &ch, &spec).unwrap(), 1);
        let x0 = spec.invert_unchecked(sbar, 0).x;
        assert_eq!(
            map_estimate_bit(2, ch.gain() * x0, sbar, &[0], &ch, &spec).unwrap(),
            0
        );
    }

    #[test]
    fn exact_tie_breaks_to_zero() {
        let spec = SliceSpec::new(1, vec![0.0], 4.0).unwrap();
        let ch = ChannelModel::attenuation(1.0).unwrap();
        let a = spec.invert_unchecked(0.5, 0).x;
        let b = spec.invert_unchecked(0.5, 1).x;
        assert_eq!(a, -b);
        // x' = 0 is equidistant from both equiprobable candidates.
        let ctx = SbarContext::new(&spec, &ch, 0.5);
        assert_eq!(ctx.log_odds(1, 0, 0.0), 0.0);
        assert_eq!(map_estimate_bit(1, 0.0, 0.5, &[], &ch, &spec).unwrap(), 0);
        assert_eq!(map_estimate_bit(1, 1e-9, 0.5, &[], &ch, &spec).unwrap(), 1);
    }

    #[test]
    fn slice_two_matches_exhaustive_posterior() {
        let (spec, ch) = setup(1.0);
        let sbar = 0.5;
        let x_prime = 0.2;
        // Brute force over both candidates sharing s1 = 0.
        let post = |c: usize| {
            let x = spec
                .invert(&crate::slicing::SymbolDecomposition { cell: c, sbar })
                .unwrap()
                .x;
            0.25 * (-(x_prime - x) * (x_prime - x) / 2.0).exp()
        };
        let expected = (post(2) > post(0)) as u8;
        assert_eq!(
            map_estimate_bit(2, x_prime, sbar, &[0], &ch, &spec).unwrap(),
            expected
        );
        assert_eq!(expected, 1);
    }

    #[test]
    fn argument_validation() {
        let (spec, ch) = setup(1.0);
        assert!(map_estimate_bit(3, 0.0, 0.5, &[0, 0], &ch, &spec).is_err());
        assert!(map_estimate_bit(2, 0.0, 0.5, &[], &ch, &spec).is_err());
        assert!(ebar(0.0, 0.5, &[0], &ch, &spec).is_err());
    }

    #[test]
    fn regions_agree_with_pointwise_decisions() {
        for eta in [1.0, 0.7, 0.3] {
            let (spec, ch) = setup(eta);
            for &sbar in &[0.01, 0.2, 0.5, 0.77, 0.999] {
                let ctx = SbarContext::new(&spec, &ch, sbar);
                for (i, prefixes) in [(1usize, 1usize), (2, 2)] {
                    for p in 0..prefixes {
                        let r = ctx.regions(i, p);
                        for k in 0..2000 {
                            let x = -60.0 + 120.0 * (k as f64 + 0.37) / 2000.0;
                            let prev: Vec<u8> = (1..i).map(|j| slice_bit(p, j)).collect();
                            let direct = map_estimate_bit(i, x, sbar, &prev, &ch, &spec).unwrap();
                            assert_eq!(r.bit_at(x), direct, "eta {eta} sbar {sbar} i {i} x {x}");
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn estimator_distribution_sums_to_one() {
        let (spec, ch) = setup(0.8);
        let ctx = SbarContext::new(&spec, &ch, 0.42);
        for c in 0..4 {
            let p: f64 = ctx.estimator_distribution(c).iter().sum();
            assert!((p - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn ebar_limits_and_median() {
        let (spec, ch) = setup(0.8);
        let sbar = 0.6;
        let ctx = SbarContext::new(&spec, &ch, sbar);
        let cell = 2;
        let part = ctx.partition(cell);
        // Conditional median: bisect the CDF on the piece set of the code
        // found at the cell's own mean.
        let mean = ctx.mean(cell);
        let code = part.code_at(mean);
        let (mut a, mut b) = (-60.0, 60.0);
        for _ in 0..200 {
            let mid = 0.5 * (a + b);
            let v = if part.code_at(mid) == code {
                ctx.ebar(mid, cell).value()
            } else {
                f64::NAN
            };
            // Outside the code's pieces, fall back to the mass-based order.
            let below = if v.is_nan() {
                if mid < mean {
                    0.0
                } else {
                    1.0
                }
            } else {
                v
            };
            if below < 0.5 {
                a = mid;
            } else {
                b = mid;
            }
        }
        assert!((ctx.ebar(0.5 * (a + b), cell).value() - 0.5).abs() < 1e-9);
        // Lower endpoint of the estimator piece containing the mean.
        let k = part.breaks.partition_point(|&x| x < mean);
        let (lo, _) = part.piece(k);
        if lo.is_finite() && part.codes[..k].iter().all(|&c| c != code) {
            assert!(ctx.ebar(lo + 1e-12, cell).value() < 1e-9);
        }
        let bits = [0u8, 1];
        let via_api = ebar(mean, sbar, &bits, &ch, &spec).unwrap().value();
        assert_eq!(via_api, ctx.ebar(mean, cell).value());
    }

    #[test]
    fn ebar_is_uniform_on_simulated_data() {
        let (spec, ch) = setup(10f64.powf(-0.04));
        let mut rs = RandomStream::new(2024, 3);
        let pairs = crate::channel::sample_pair(
            &crate::channel::ModulationSpec::new(31.0).unwrap(),
            &ch,
            &mut rs,
            100_000,
        );
        let values: Vec<f64> = pairs
            .iter()
            .map(|&(x, xp)| {
                let d = spec.decompose(x);
                ebar(xp, d.sbar, &d.bits(2), &ch, &spec).unwrap().value()
            })
            .collect();
        assert!(stats::ks_uniform_p_value(&values) > 0.01);
    }
}
