//! Gaussian modulation, the beam-splitter attenuation channel and the
//! quantities derived from it.
//!
//! All variances are in shot-noise units (`N₀ = 1`). Bob's phase-space
//! compensation of the p-quadrature modulation is taken as already applied,
//! so every amplitude and overlap here is real and only the x-quadrature
//! enters the key-rate computations.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mathcore::RandomStream;
use crate::Real;

/// Shot-noise variance of the vacuum quadrature.
pub const VACUUM_NOISE: f64 = 1.0;

/// Attenuation channel of transmittance `η` with optional excess noise `ε`
/// (in units of `N₀`, added to Bob's conditional variance).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChannelModel<T> {
    pub transmittance: T,
    #[serde(default)]
    pub excess_noise: T,
}

impl<T: Real> ChannelModel<T> {
    pub fn new(transmittance: T, excess_noise: T) -> Result<Self> {
        let c = ChannelModel {
            transmittance,
            excess_noise,
        };
        c.validate()?;
        Ok(c)
    }

    pub fn attenuation(transmittance: T) -> Result<Self> {
        Self::new(transmittance, T::zero())
    }

    /// `η = 10^(-loss/10)`.
    pub fn from_loss_db(loss_db: T) -> Result<Self> {
        if loss_db.is_nan() || loss_db < T::zero() {
            return Err(Error::InvalidChannel(format!("negative loss {loss_db} dB")));
        }
        Self::attenuation(T::lit(10.0).powf(-loss_db / T::lit(10.0)))
    }

    pub fn validate(&self) -> Result<()> {
        let eta = self.transmittance;
        if !(eta > T::zero() && eta <= T::one()) {
            return Err(Error::InvalidChannel(format!(
                "transmittance {eta} not in (0, 1]"
            )));
        }
        if !(self.excess_noise >= T::zero()) || !self.excess_noise.is_finite() {
            return Err(Error::InvalidChannel(format!(
                "excess noise {} must be finite and non-negative",
                self.excess_noise
            )));
        }
        Ok(())
    }

    pub fn loss_db(&self) -> T {
        -T::lit(10.0) * self.transmittance.log10()
    }

    pub fn vacuum_noise(&self) -> T {
        T::lit(VACUUM_NOISE)
    }

    /// `√η`, the gain applied to Alice's quadrature value.
    pub fn gain(&self) -> T {
        self.transmittance.sqrt()
    }

    /// Variance of Bob's outcome conditioned on Alice's value, `N₀(1 + ε)`.
    pub fn conditional_variance(&self) -> T {
        self.vacuum_noise() * (T::one() + self.excess_noise)
    }

    pub fn conditional_sd(&self) -> T {
        self.conditional_variance().sqrt()
    }

    pub fn is_pure_attenuation(&self) -> bool {
        self.excess_noise == T::zero()
    }

    pub(crate) fn require_pure(&self, op: &'static str) -> Result<()> {
        if self.is_pure_attenuation() {
            Ok(())
        } else {
            Err(Error::InvalidChannel(format!(
                "{op} is defined for the pure attenuation channel only (excess noise {})",
                self.excess_noise
            )))
        }
    }

    /// Density of Bob's outcome `x'` given Alice's value `x`.
    pub fn conditional_density(&self, x_prime: T, x: T) -> T {
        let var = self.conditional_variance();
        let d = x_prime - self.gain() * x;
        (-d * d / (T::two() * var)).exp() / (T::TAU() * var).sqrt()
    }
}

/// Per-quadrature Gaussian modulation variance `V`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModulationSpec<T> {
    pub variance: T,
}

impl<T: Real> ModulationSpec<T> {
    pub fn new(variance: T) -> Result<Self> {
        if !(variance > T::zero()) || !variance.is_finite() {
            return Err(Error::InvalidChannel(format!(
                "modulation variance {variance} must be > 0"
            )));
        }
        Ok(ModulationSpec { variance })
    }

    pub fn sd(&self) -> T {
        self.variance.sqrt()
    }

    /// Density of Alice's quadrature value, `N(0, V)`.
    pub fn density(&self, x: T) -> T {
        let v = self.variance;
        (-x * x / (T::two() * v)).exp() / (T::TAU() * v).sqrt()
    }
}

/// Draws `count` pairs `(x, x')` with `x ~ N(0, V)` and
/// `x' ~ N(√η x, N₀(1 + ε))`.
pub fn sample_pair<T: Real>(
    modulation: &ModulationSpec<T>,
    channel: &ChannelModel<T>,
    stream: &mut RandomStream,
    count: usize,
) -> Vec<(T, T)> {
    let sd_a = modulation.sd().as_f64();
    let gain = channel.gain().as_f64();
    let sd_b = channel.conditional_sd().as_f64();
    (0..count)
        .map(|_| {
            let x = stream.normal(0.0, sd_a);
            let xp = stream.normal(gain * x, sd_b);
            (T::lit(x), T::lit(xp))
        })
        .collect()
}

/// Overlap of the two coherent states Eve holds when Alice sent `x1` and
/// `x2`: `exp(-(1 - η)(x1 - x2)² / 8N₀)`.
pub fn eve_overlap_kernel<T: Real>(x1: T, x2: T, channel: &ChannelModel<T>) -> T {
    let d = x1 - x2;
    (-(T::one() - channel.transmittance) * d * d / (T::lit(8.0) * channel.vacuum_noise())).exp()
}

/// Bob's real x-representation amplitude for Alice's value `x`: a Gaussian
/// with mean `√η x` and variance `N₀`. Only defined without excess noise.
pub fn bob_wavefunction<T: Real>(x_prime: T, x: T, channel: &ChannelModel<T>) -> Result<T> {
    channel.require_pure("bob_wavefunction")?;
    Ok(channel.conditional_density(x_prime, x).sqrt())
}

/// `I(X; X') = ½ log₂(1 + ηV / N₀(1 + ε))`, in bits.
pub fn mutual_information<T: Real>(modulation: &ModulationSpec<T>, channel: &ChannelModel<T>) -> T {
    let snr = channel.transmittance * modulation.variance / channel.conditional_variance();
    T::half() * snr.ln_1p() / T::LN_2()
}
