//! Parameter estimation from sacrificed samples: homodyne measurements in
//! random quadrature directions, moment estimates of the channel, phase
//! error rates with confidence intervals, and the photon-number cutoff test.
//!
//! The channel family is Gaussian, so the estimation reduces to the pair
//! `(η, ε)`: `√η` is the regression slope of Bob's outcome on Alice's
//! quadrature in the measured direction and the residual variance gives the
//! noise. Everything here works in `f64`.

use std::cmp::Ordering;
use std::f64::consts::TAU;
use std::io::{Read, Write};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::channel::{ChannelModel, ModulationSpec, VACUUM_NOISE};
use crate::epanalysis::{reduced_joint_state, slice_error_rates};
use crate::error::{Error, Result};
use crate::mathcore::stats::clopper_pearson_upper;
use crate::mathcore::{Probability, RandomStream};
use crate::slicing::SliceSpec;

/// Samples drawn from one substream; the split makes sampling parallel
/// without depending on the worker count.
const SAMPLE_BLOCK: usize = 8192;
/// Smallest sample count accepted by [`estimate_channel`].
pub const MIN_ESTIMATION_SAMPLES: usize = 100;
/// Confidence of the Clopper–Pearson bound in [`photon_cutoff_test`].
pub const CUTOFF_CONFIDENCE: f64 = 0.99;

/// One homodyne measurement and the modulation that produced it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuadratureSample {
    pub theta: f64,
    pub outcome: f64,
    pub alice_x: f64,
    pub alice_p: f64,
}

impl QuadratureSample {
    /// Alice's amplitude along the measured direction, `x cosθ + p sinθ`.
    pub fn alice_quadrature(&self) -> f64 {
        self.alice_x * self.theta.cos() + self.alice_p * self.theta.sin()
    }

    fn canonical_cmp(&self, other: &Self) -> Ordering {
        self.theta
            .total_cmp(&other.theta)
            .then(self.outcome.total_cmp(&other.outcome))
            .then(self.alice_x.total_cmp(&other.alice_x))
            .then(self.alice_p.total_cmp(&other.alice_p))
    }
}

/// How measurement directions are chosen.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ThetaPolicy {
    /// Uniform on `[0, 2π)`.
    UniformRandom,
    /// Uniform choice among the listed angles.
    Fixed(Vec<f64>),
}

impl ThetaPolicy {
    fn draw(&self, rs: &mut RandomStream) -> f64 {
        match self {
            ThetaPolicy::UniformRandom => TAU * rs.uniform(),
            ThetaPolicy::Fixed(list) if list.len() == 1 => list[0],
            ThetaPolicy::Fixed(list) => list[rs.below(list.len())],
        }
    }

    fn validate(&self) -> Result<()> {
        match self {
            ThetaPolicy::Fixed(list) if list.is_empty() => Err(Error::domain(
                "sample_homodyne",
                "fixed theta list is empty",
            )),
            ThetaPolicy::Fixed(list) if list.iter().any(|t| !t.is_finite()) => Err(Error::domain(
                "sample_homodyne",
                "fixed theta list has a non-finite angle",
            )),
            _ => Ok(()),
        }
    }
}

/// `n` homodyne samples: Alice's `(x, p)` are independent `N(0, V)` and the
/// outcome is `N(√η (x cosθ + p sinθ), N₀(1 + ε))`.
pub fn sample_homodyne(
    modulation: &ModulationSpec<f64>,
    channel: &ChannelModel<f64>,
    policy: &ThetaPolicy,
    n: usize,
    stream: &RandomStream,
) -> Result<Vec<QuadratureSample>> {
    if n == 0 {
        return Err(Error::domain("sample_homodyne", "need at least one sample"));
    }
    policy.validate()?;
    channel.validate()?;
    let sd_a = modulation.sd();
    let gain = channel.gain();
    let sd_b = channel.conditional_sd();
    let blocks = n.div_ceil(SAMPLE_BLOCK);
    let out = (0..blocks)
        .into_par_iter()
        .flat_map_iter(|b| {
            let mut rs = stream.substream(b as u64);
            let len = SAMPLE_BLOCK.min(n - b * SAMPLE_BLOCK);
            let policy = policy.clone();
            (0..len)
                .map(move |_| {
                    let theta = policy.draw(&mut rs);
                    let alice_x = rs.normal(0.0, sd_a);
                    let alice_p = rs.normal(0.0, sd_a);
                    let mean = gain * (alice_x * theta.cos() + alice_p * theta.sin());
                    QuadratureSample {
                        theta,
                        outcome: rs.normal(mean, sd_b),
                        alice_x,
                        alice_p,
                    }
                })
                .collect::<Vec<_>>()
        })
        .collect();
    Ok(out)
}

/// Channel parameters fitted from homodyne samples.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChannelEstimate {
    /// Regression slope `ĝ`; `η̂ = ĝ²`.
    pub gain_hat: f64,
    pub gain_se: f64,
    pub eta_hat: f64,
    pub eta_se: f64,
    /// Residual variance minus `N₀`, clamped at 0.
    pub noise_hat: f64,
    pub noise_se: f64,
    /// Unclamped residual variance of the fit.
    pub residual_variance: f64,
    pub n: usize,
}

impl ChannelEstimate {
    /// Channel used to price the estimate: `η̂` clamped into `(0, 1]`.
    pub fn channel(&self) -> Result<ChannelModel<f64>> {
        ChannelModel::attenuation(self.eta_hat.min(1.0))
    }
}

fn canonical_order(samples: &[QuadratureSample]) -> Vec<QuadratureSample> {
    let mut sorted = samples.to_vec();
    sorted.sort_by(QuadratureSample::canonical_cmp);
    sorted
}

/// Least-squares fit of `outcome = g·a_θ + noise` (no intercept).
///
/// Sums are taken over the samples in a canonical order, so the result is
/// exactly invariant under permutation of the input.
pub fn estimate_channel(samples: &[QuadratureSample]) -> Result<ChannelEstimate> {
    let n = samples.len();
    if n < MIN_ESTIMATION_SAMPLES {
        return Err(Error::Degenerate(format!(
            "{n} samples, need at least {MIN_ESTIMATION_SAMPLES}"
        )));
    }
    let sorted = canonical_order(samples);
    let (mut saa, mut say) = (0.0, 0.0);
    for s in &sorted {
        let a = s.alice_quadrature();
        saa += a * a;
        say += a * s.outcome;
    }
    if !(saa > 0.0) || !saa.is_finite() {
        return Err(Error::Degenerate(
            "modulation has no spread along the measured directions".into(),
        ));
    }
    let g = say / saa;
    let rss: f64 = sorted
        .iter()
        .map(|s| {
            let r = s.outcome - g * s.alice_quadrature();
            r * r
        })
        .sum();
    let s2 = rss / (n - 1) as f64;
    let gain_se = (s2 / saa).sqrt();
    Ok(ChannelEstimate {
        gain_hat: g,
        gain_se,
        eta_hat: g * g,
        eta_se: 2.0 * g.abs() * gain_se,
        noise_hat: (s2 - VACUUM_NOISE).max(0.0) / VACUUM_NOISE,
        noise_se: s2 * (2.0 / (n - 1) as f64).sqrt() / VACUUM_NOISE,
        residual_variance: s2,
        n,
    })
}

/// Standard deviation of an estimated phase error rate, from the formula
/// `σ₁² = 2e_p(1 - e_p)/n`.
pub fn phase_error_sigma1(e_p: Probability<f64>, n: usize) -> Result<f64> {
    if n == 0 {
        return Err(Error::domain("phase_error_sigma1", "n must be positive"));
    }
    let e = e_p.value();
    Ok((2.0 * e * (1.0 - e) / n as f64).sqrt())
}

/// Binomial standard deviation `√(e_p(1 - e_p)/n)`, reported alongside
/// [`phase_error_sigma1`] as a cross-check.
pub fn phase_error_sigma1_binomial(e_p: Probability<f64>, n: usize) -> Result<f64> {
    if n == 0 {
        return Err(Error::domain(
            "phase_error_sigma1_binomial",
            "n must be positive",
        ));
    }
    let e = e_p.value();
    Ok((e * (1.0 - e) / n as f64).sqrt())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CutoffVerdict {
    Pass,
    Fail,
    /// Too few samples for the requested bound even with no exceedance.
    Inconclusive,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CutoffReport {
    pub verdict: CutoffVerdict,
    pub threshold: f64,
    pub exceedances: usize,
    pub n: usize,
    /// Fraction of outcomes beyond the threshold.
    pub tail_estimate: f64,
    /// One-sided Clopper–Pearson upper bound at [`CUTOFF_CONFIDENCE`].
    pub upper_bound: f64,
    pub epsilon: f64,
}

/// Quadrature amplitude matched to photon number `n_max`:
/// `√(2N₀(2n_max + 1))`.
pub fn cutoff_threshold(n_max: u32) -> f64 {
    (2.0 * VACUUM_NOISE * (2.0 * n_max as f64 + 1.0)).sqrt()
}

/// Tests whether the mass beyond `n_max` photons is below `epsilon`, using
/// the frequency of large homodyne outcomes as the surrogate.
pub fn photon_cutoff_test(
    samples: &[QuadratureSample],
    n_max: u32,
    epsilon: Probability<f64>,
) -> CutoffReport {
    photon_cutoff_test_at(samples, cutoff_threshold(n_max), epsilon)
}

/// [`photon_cutoff_test`] with an explicit amplitude threshold.
pub fn photon_cutoff_test_at(
    samples: &[QuadratureSample],
    threshold: f64,
    epsilon: Probability<f64>,
) -> CutoffReport {
    let n = samples.len();
    let eps = epsilon.value();
    let k = samples
        .iter()
        .filter(|s| !(s.outcome.abs() <= threshold))
        .count();
    let tail = if n == 0 { 0.0 } else { k as f64 / n as f64 };
    let upper = clopper_pearson_upper(k, n, CUTOFF_CONFIDENCE);
    let verdict = if upper <= eps {
        CutoffVerdict::Pass
    } else if clopper_pearson_upper(0, n, CUTOFF_CONFIDENCE) > eps && tail <= eps {
        CutoffVerdict::Inconclusive
    } else {
        CutoffVerdict::Fail
    };
    CutoffReport {
        verdict,
        threshold,
        exceedances: k,
        n,
        tail_estimate: tail,
        upper_bound: upper,
        epsilon: eps,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SliceEstimate {
    pub e_b: f64,
    pub e_p: f64,
    /// `√(2e_p(1 - e_p)/n)`.
    pub sigma1: f64,
    /// `√(e_p(1 - e_p)/n)`.
    pub sigma1_binomial: f64,
    /// Propagated from the standard error of `η̂`.
    pub sigma2: f64,
    /// `√(σ₁² + σ₂²)`.
    pub sigma_total: f64,
    /// Finite-difference slope `∂e_p/∂η` behind `sigma2`.
    pub sensitivity: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimationReport {
    pub eta_hat: f64,
    pub eta_se: f64,
    pub noise_hat: f64,
    pub noise_se: f64,
    pub residual_variance: f64,
    pub n: usize,
    /// Transmittance the error rates were computed at (`η̂` clamped to 1).
    pub eta_used: f64,
    pub slices: Vec<SliceEstimate>,
}

impl EstimationReport {
    /// `true` when the fitted noise exceeds zero by more than three standard
    /// errors. The error rates assume a pure attenuation channel.
    pub fn excess_noise_detected(&self) -> bool {
        self.noise_hat > 3.0 * self.noise_se
    }
}

fn phase_errors_at(spec: &SliceSpec<f64>, eta: f64) -> Result<Vec<(f64, f64)>> {
    let state = reduced_joint_state(spec, &ChannelModel::attenuation(eta)?)?;
    Ok(slice_error_rates(&state)
        .into_iter()
        .map(|(b, p)| (b.value(), p.value()))
        .collect())
}

/// Estimates the channel from the samples and prices each slice at the
/// estimate. `σ₂` is a central finite difference of `e_p` in `η` (one-sided
/// at `η = 1`) times the standard error of `η̂`.
pub fn estimated_rate_report(
    samples: &[QuadratureSample],
    spec: &SliceSpec<f64>,
    modulation: &ModulationSpec<f64>,
) -> Result<EstimationReport> {
    if (spec.variance() - modulation.variance).abs() > 1e-9 * spec.variance() {
        return Err(Error::InvalidSpec(format!(
            "slice spec variance {} differs from modulation variance {}",
            spec.variance(),
            modulation.variance
        )));
    }
    let est = estimate_channel(samples)?;
    let eta = est.channel()?.transmittance;
    let h = (2.0 * est.eta_se).clamp(1e-4, 0.05).min(eta / 2.0);
    let (lo, hi) = (eta - h, (eta + h).min(1.0));
    let centre = phase_errors_at(spec, eta)?;
    let below = phase_errors_at(spec, lo)?;
    let above = if hi > eta {
        phase_errors_at(spec, hi)?
    } else {
        centre.clone()
    };
    let n = est.n;
    let slices = centre
        .iter()
        .zip(below.iter().zip(&above))
        .map(|(&(e_b, e_p), (&(_, p_lo), &(_, p_hi)))| {
            let p = Probability::clamped(e_p);
            let sigma1 = phase_error_sigma1(p, n)?;
            let sensitivity = (p_hi - p_lo) / (hi - lo);
            let sigma2 = sensitivity.abs() * est.eta_se;
            Ok(SliceEstimate {
                e_b,
                e_p,
                sigma1,
                sigma1_binomial: phase_error_sigma1_binomial(p, n)?,
                sigma2,
                sigma_total: sigma1.hypot(sigma2),
                sensitivity,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(EstimationReport {
        eta_hat: est.eta_hat,
        eta_se: est.eta_se,
        noise_hat: est.noise_hat,
        noise_se: est.noise_se,
        residual_variance: est.residual_variance,
        n,
        eta_used: eta,
        slices,
    })
}

/// Writes samples as CSV with columns `theta,outcome,alice_x,alice_p`.
pub fn write_samples_csv<W: Write>(samples: &[QuadratureSample], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for s in samples {
        w.serialize(s)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_samples_csv<R: Read>(input: R) -> Result<Vec<QuadratureSample>> {
    let mut r = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .from_reader(input);
    r.deserialize()
        .map(|row| row.map_err(Error::from))
        .collect()
}
