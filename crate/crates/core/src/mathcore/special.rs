use crate::error::{Error, Result};
use crate::mathcore::Probability;
use crate::Real;

/// Starting point for the inverse error function (Giles' single-precision
/// rational fit). `w` is `-ln((1 - y)(1 + y))`, passed in so callers working
/// from a complement can compute it without cancellation.
fn erfinv_seed<T: Real>(y: T, w: T) -> T {
    let l = T::lit;
    let p = if w < l(5.0) {
        let w = w - l(2.5);
        let mut p = l(2.810_226_36e-08);
        for c in [
            3.432_739_39e-07,
            -3.523_387_7e-06,
            -4.391_506_54e-06,
            0.000_218_580_87,
            -0.001_253_725_03,
            -0.004_177_681_64,
            0.246_640_727,
            1.501_409_41,
        ] {
            p = l(c) + p * w;
        }
        p
    } else {
        let w = w.sqrt() - l(3.0);
        let mut p = l(-0.000_200_214_257);
        for c in [
            0.000_100_950_558,
            0.001_349_343_22,
            -0.003_673_428_44,
            0.005_739_507_73,
            -0.007_622_461_3,
            0.009_438_870_47,
            1.001_674_06,
            2.832_976_82,
        ] {
            p = l(c) + p * w;
        }
        p
    };
    p * y
}

/// Halley refinement of `x` towards a root of `residual`, whose derivative
/// is `±(2/√π) e^{-x²}` (sign given by `slope_sign`).
fn halley_refine<T: Real>(mut x: T, slope_sign: T, residual: impl Fn(T) -> T) -> T {
    let two_over_sqrt_pi = T::FRAC_2_SQRT_PI();
    for _ in 0..4 {
        let d = slope_sign * two_over_sqrt_pi * (-x * x).exp();
        if d == T::zero() {
            break;
        }
        let u = residual(x) / d;
        let step = u / (T::one() + x * u);
        x -= step;
        if step.abs() <= T::epsilon() * x.abs() {
            break;
        }
    }
    x
}

/// Inverse of the error function on `(-1, 1)`.
pub fn inverse_erf<T: Real>(y: T) -> Result<T> {
    if y.is_nan() || y.abs() >= T::one() {
        return Err(Error::domain(
            "inverse_erf",
            format!("|y| = {} >= 1", y.abs()),
        ));
    }
    if y == T::zero() {
        return Ok(T::zero());
    }
    if y.abs() <= T::half() {
        let w = -((T::one() - y) * (T::one() + y)).ln();
        let x0 = erfinv_seed(y, w);
        Ok(halley_refine(x0, T::one(), |x| x.erf() - y))
    } else {
        // 1 - |y| is exact here (Sterbenz), so work from the complement.
        let t = T::one() - y.abs();
        Ok(inverse_erfc(t)?.copysign(y))
    }
}

/// Inverse of the complementary error function on `(0, 2)`.
pub fn inverse_erfc<T: Real>(t: T) -> Result<T> {
    if t.is_nan() || t <= T::zero() || t >= T::two() {
        return Err(Error::domain(
            "inverse_erfc",
            format!("t = {t} not in (0, 2)"),
        ));
    }
    if t > T::one() {
        return Ok(-inverse_erfc(T::two() - t)?);
    }
    if t < T::lit(1e-12) {
        return Ok(inverse_erfc_tail(t));
    }
    let y = T::one() - t;
    let w = -(t * (T::two() - t)).ln();
    let x0 = erfinv_seed(y, w);
    Ok(halley_refine(x0, -T::one(), |x| x.erfc() - t))
}

/// Deep tail of `inverse_erfc`, beyond the range of the rational seed.
/// Starts from `erfc(x) ≈ e^{-x²}/(x√π)` and runs Newton on `ln erfc`.
fn inverse_erfc_tail<T: Real>(t: T) -> T {
    let ln_t = t.ln();
    let mut x = (-ln_t).sqrt();
    for _ in 0..3 {
        x = (-ln_t - (x * T::PI().sqrt()).ln()).sqrt();
    }
    for _ in 0..6 {
        let e = x.erfc();
        if e <= T::zero() {
            break;
        }
        let slope = -T::FRAC_2_SQRT_PI() * (-x * x).exp() / e;
        let step = (e.ln() - ln_t) / slope;
        x -= step;
        if step.abs() <= T::epsilon() * x {
            break;
        }
    }
    x
}

pub fn gaussian_pdf<T: Real>(z: T) -> T {
    (-z * z / T::two()).exp() / (T::TAU()).sqrt()
}

/// Standard normal CDF.
pub fn gaussian_cdf<T: Real>(z: T) -> Probability<T> {
    Probability::clamped(T::half() * (-z / T::SQRT_2()).erfc())
}

/// Standard normal upper tail `1 - Φ(z)`, accurate for large positive `z`.
pub fn gaussian_sf<T: Real>(z: T) -> T {
    T::half() * (z / T::SQRT_2()).erfc()
}

/// Standard normal quantile on `(0, 1)`.
pub fn gaussian_quantile<T: Real>(q: Probability<T>) -> Result<T> {
    let q = q.value();
    if q <= T::zero() || q >= T::one() {
        return Err(Error::domain(
            "gaussian_quantile",
            format!("q = {q} not in (0, 1)"),
        ));
    }
    if q < T::half() {
        Ok(-T::SQRT_2() * inverse_erfc(T::two() * q)?)
    } else {
        Ok(T::SQRT_2() * inverse_erfc(T::two() * (T::one() - q))?)
    }
}

/// Mass of `N(mean, sd²)` on `(a, b]`, evaluated on whichever tail keeps
/// the subtraction well conditioned.
pub fn normal_interval_mass<T: Real>(a: T, b: T, mean: T, sd: T) -> T {
    if b <= a {
        return T::zero();
    }
    let za = (a - mean) / sd;
    let zb = (b - mean) / sd;
    let mass = if za >= T::zero() {
        gaussian_sf(za) - gaussian_sf(zb)
    } else if zb <= T::zero() {
        gaussian_sf(-zb) - gaussian_sf(-za)
    } else {
        T::one() - gaussian_sf(-za) - gaussian_sf(zb)
    };
    mass.max(T::zero())
}

/// `ln Σ exp(v)`, returning `-∞` for an empty or all `-∞` input.
pub fn log_sum_exp<T: Real>(values: impl IntoIterator<Item = T> + Clone) -> T {
    let max = values
        .clone()
        .into_iter()
        .fold(T::neg_infinity(), |m, v| m.max(v));
    if max == T::neg_infinity() {
        return max;
    }
    let sum: T = values.into_iter().map(|v| (v - max).exp()).sum();
    max + sum.ln()
}
