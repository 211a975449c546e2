//! Asymptotic secret-key rates of the attenuation channel for direct and
//! reverse reconciliation, from Gaussian von Neumann entropies.
//!
//! Eve holds the reflected beam `|√(1-η) α⟩`. Given Alice's `(x, p)` her
//! state is pure; the protocol only correlates the key with `x`, so the
//! direct-reconciliation Holevo quantity conditions Eve on `x` alone with
//! `p` traced out.

use serde::{Deserialize, Serialize};

use crate::channel::{mutual_information, ChannelModel, ModulationSpec};
use crate::error::Result;
use crate::mathcore::gaussian_state_entropy;
use crate::Real;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AsymptoticRateReport<T> {
    pub i_xy: T,
    pub i_xe: T,
    pub i_xpe: T,
    pub direct_rate: T,
    pub reverse_rate: T,
}

/// Variance of each of Eve's quadratures averaged over the modulation.
fn eve_variance<T: Real>(modulation: &ModulationSpec<T>, channel: &ChannelModel<T>) -> T {
    T::one() + (T::one() - channel.transmittance) * modulation.variance
}

/// `I(X; E) = S(ρ_E) - S(ρ_E | x)`.
pub fn holevo_eve_direct<T: Real>(
    modulation: &ModulationSpec<T>,
    channel: &ChannelModel<T>,
) -> Result<T> {
    channel.require_pure("holevo_eve_direct")?;
    let v = eve_variance(modulation, channel);
    // Given x, Eve's x-quadrature is back at vacuum; p keeps its spread.
    let nu_cond = v.sqrt();
    Ok((gaussian_state_entropy(v)? - gaussian_state_entropy(nu_cond)?).max(T::zero()))
}

/// `I(X'; E) = S(ρ_E) - S(ρ_E | x')`, conditioning Eve's x-quadrature on
/// Bob's homodyne outcome.
pub fn holevo_eve_reverse<T: Real>(
    modulation: &ModulationSpec<T>,
    channel: &ChannelModel<T>,
) -> Result<T> {
    channel.require_pure("holevo_eve_reverse")?;
    let eta = channel.transmittance;
    let var = modulation.variance;
    let v = eve_variance(modulation, channel);
    // Cov(x_E, x') = √(η(1-η)) V; Var(x') = 1 + ηV.
    let vx = v - eta * (T::one() - eta) * var * var / (T::one() + eta * var);
    let nu_cond = (vx * v).sqrt().max(T::one());
    Ok((gaussian_state_entropy(v)? - gaussian_state_entropy(nu_cond)?).max(T::zero()))
}

pub fn asymptotic_rates<T: Real>(
    modulation: &ModulationSpec<T>,
    channel: &ChannelModel<T>,
) -> Result<AsymptoticRateReport<T>> {
    let i_xy = mutual_information(modulation, channel);
    let i_xe = holevo_eve_direct(modulation, channel)?;
    let i_xpe = holevo_eve_reverse(modulation, channel)?;
    Ok(AsymptoticRateReport {
        i_xy,
        i_xe,
        i_xpe,
        direct_rate: i_xy - i_xe,
        reverse_rate: i_xy - i_xpe,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn setup(eta: f64, v: f64) -> (ModulationSpec<f64>, ChannelModel<f64>) {
        (
            ModulationSpec::new(v).unwrap(),
            ChannelModel::attenuation(eta).unwrap(),
        )
    }

    #[test]
    fn no_loss_means_no_eve_information() {
        let (m, c) = setup(1.0, 31.0);
        let r = asymptotic_rates(&m, &c).unwrap();
        assert_eq!(r.i_xe, 0.0);
        assert_eq!(r.i_xpe, 0.0);
        assert_abs_diff_eq!(r.direct_rate, 2.5, epsilon = 1e-12);
        assert_abs_diff_eq!(r.reverse_rate, 2.5, epsilon = 1e-12);
    }

    #[test]
    fn three_db_behaviour() {
        let (m, c) = setup(0.5, 31.0);
        let r = asymptotic_rates(&m, &c).unwrap();
        assert!(r.reverse_rate > 0.0);
        assert!(r.i_xpe <= r.i_xe);
        assert!(r.direct_rate <= r.i_xy);
        assert_eq!(r.direct_rate, r.i_xy - r.i_xe);
    }

    #[test]
    fn direct_holevo_is_monotone_in_loss() {
        let m = ModulationSpec::new(31.0).unwrap();
        let mut prev = f64::INFINITY;
        for k in 1..=100 {
            let c = ChannelModel::attenuation(k as f64 / 100.0).unwrap();
            let v = holevo_eve_direct(&m, &c).unwrap();
            assert!(v <= prev + 1e-12 && v >= 0.0);
            prev = v;
        }
    }

    #[test]
    fn excess_noise_is_rejected() {
        let m = ModulationSpec::new(31.0).unwrap();
        let c = ChannelModel::new(0.5, 0.01).unwrap();
        assert!(holevo_eve_direct(&m, &c).is_err());
        assert!(asymptotic_rates(&m, &c).is_err());
    }
}
