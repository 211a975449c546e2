use crate::error::{Error, Result};
use crate::mathcore::Probability;
use crate::Real;

/// Shannon entropy of a Bernoulli(p) variable, in bits.
///
/// The argument is folded onto `[0, 1/2]` before evaluation so that
/// `h(p)` and `h(1 - p)` share one code path; `h(0) = h(1) = 0`.
pub fn binary_entropy<T: Real>(p: Probability<T>) -> T {
    let p = p.value();
    let q = if p <= T::half() { p } else { T::one() - p };
    if q <= T::zero() {
        return T::zero();
    }
    // (1 - q) ln(1 - q) through ln_1p keeps precision for tiny q.
    let nats = -q * q.ln() - (T::one() - q) * (-q).ln_1p();
    nats / T::LN_2()
}

/// Von Neumann entropy (bits) of a single-mode Gaussian state with
/// symplectic eigenvalue `nu`, in shot-noise units.
pub fn gaussian_state_entropy<T: Real>(nu: T) -> Result<T> {
    if nu.is_nan() || nu < T::one() {
        return Err(Error::domain(
            "gaussian_state_entropy",
            format!("nu = {nu} < 1"),
        ));
    }
    let a = (nu + T::one()) / T::two();
    let b = (nu - T::one()) / T::two();
    let xlog2x = |x: T| {
        if x <= T::zero() {
            T::zero()
        } else {
            x * x.log2()
        }
    };
    Ok(xlog2x(a) - xlog2x(b))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn p(x: f64) -> Probability<f64> {
        Probability::new(x).unwrap()
    }

    #[test]
    fn binary_entropy_reference_values() {
        assert_eq!(binary_entropy(p(0.5)), 1.0);
        assert_eq!(binary_entropy(p(0.0)), 0.0);
        assert_eq!(binary_entropy(p(1.0)), 0.0);
        // -0.0071 log2 0.0071 - 0.9929 log2 0.9929, evaluated with mpmath.
        assert_abs_diff_eq!(binary_entropy(p(0.0071)), 0.060_886_238_6, epsilon = 1e-9);
    }

    #[test]
    fn binary_entropy_is_symmetric_where_complement_is_exact() {
        for k in 0..=4096 {
            let x = k as f64 / 4096.0;
            assert_eq!(binary_entropy(p(x)), binary_entropy(p(1.0 - x)));
        }
    }

    #[test]
    fn binary_entropy_rejects_out_of_range() {
        assert!(Probability::new(-1e-12).is_err());
        assert!(Probability::new(1.0 + 1e-12).is_err());
        assert!(Probability::new(f64::NAN).is_err());
    }

    #[test]
    fn gaussian_entropy_closed_forms() {
        assert_eq!(gaussian_state_entropy(1.0).unwrap(), 0.0);
        assert_abs_diff_eq!(gaussian_state_entropy(3.0).unwrap(), 2.0, epsilon = 1e-14);
        assert!(gaussian_state_entropy(0.999).is_err());
    }

    #[test]
    fn gaussian_entropy_matches_truncated_thermal_spectrum() {
        // Thermal state with mean photon number 0.5: p_n = nbar^n / (1+nbar)^(n+1).
        let nbar = 0.5_f64;
        let fock: f64 = (0..64)
            .map(|n| {
                let pn = nbar.powi(n) / (1.0 + nbar).powi(n + 1);
                -pn * pn.log2()
            })
            .sum();
        let nu = 2.0 * nbar + 1.0;
        assert_abs_diff_eq!(gaussian_state_entropy(nu).unwrap(), fock, epsilon = 1e-6);
    }

    #[test]
    fn gaussian_entropy_is_monotone() {
        let mut prev = -1.0;
        for k in 0..2000 {
            let nu = 1.0 + k as f64 * 0.05;
            let s = gaussian_state_entropy(nu).unwrap();
            assert!(s > prev, "not increasing at nu = {nu}");
            prev = s;
        }
    }

    #[test]
    fn works_in_single_precision() {
        let h = binary_entropy(Probability::new(0.11_f32).unwrap());
        assert!((h - 0.4999).abs() < 1e-3);
    }
}
