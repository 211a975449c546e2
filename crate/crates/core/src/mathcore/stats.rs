//! Goodness-of-fit and interval statistics used by the simulation checks.

use statrs::function::beta::beta_reg;

/// Two-sided Kolmogorov–Smirnov statistic of `samples` against `cdf`.
pub fn ks_statistic(samples: &[f64], cdf: impl Fn(f64) -> f64) -> f64 {
    let mut sorted = samples.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len() as f64;
    sorted
        .iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = cdf(x);
            let lo = f - i as f64 / n;
            let hi = (i + 1) as f64 / n - f;
            lo.max(hi)
        })
        .fold(0.0, f64::max)
}

/// Asymptotic p-value of a KS statistic `d` on `n` samples
/// (Stephens' small-sample correction).
pub fn ks_p_value(d: f64, n: usize) -> f64 {
    let sn = (n as f64).sqrt();
    let lambda = (sn + 0.12 + 0.11 / sn) * d;
    if lambda < 1e-3 {
        return 1.0;
    }
    let mut sum = 0.0;
    for k in 1..=200 {
        let k = k as f64;
        let term = 2.0 * (-1.0_f64).powf(k - 1.0) * (-2.0 * k * k * lambda * lambda).exp();
        sum += term;
        if term.abs() < 1e-16 {
            break;
        }
    }
    sum.clamp(0.0, 1.0)
}

/// KS test against the uniform distribution on `[0, 1]`; returns the p-value.
pub fn ks_uniform_p_value(samples: &[f64]) -> f64 {
    let d = ks_statistic(samples, |x| x.clamp(0.0, 1.0));
    ks_p_value(d, samples.len())
}

/// Pearson correlation coefficient.
pub fn correlation(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len().min(ys.len()) as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (&x, &y) in xs.iter().zip(ys) {
        sxy += (x - mx) * (y - my);
        sxx += (x - mx) * (x - mx);
        syy += (y - my) * (y - my);
    }
    sxy / (sxx * syy).sqrt()
}

/// One-sided upper Clopper–Pearson bound on a binomial proportion after
/// `k` successes in `n` trials, at the given confidence (e.g. 0.99).
pub fn clopper_pearson_upper(k: usize, n: usize, confidence: f64) -> f64 {
    if n == 0 || k >= n {
        return 1.0;
    }
    let alpha = 1.0 - confidence;
    if k == 0 {
        return 1.0 - alpha.powf(1.0 / n as f64);
    }
    // Upper bound p solves P[Bin(n, p) <= k] = alpha, i.e. I_{p}(k+1, n-k) = 1 - alpha.
    let (a, b) = ((k + 1) as f64, (n - k) as f64);
    let (mut lo, mut hi) = (k as f64 / n as f64, 1.0);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if beta_reg(a, b, mid) < 1.0 - alpha {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo < 1e-15 {
            break;
        }
    }
    hi
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mathcore::RandomStream;

    #[test]
    fn uniform_samples_pass_and_skewed_fail() {
        let mut rs = RandomStream::new(11, 0);
        let u: Vec<f64> = (0..20_000).map(|_| rs.uniform()).collect();
        assert!(ks_uniform_p_value(&u) > 0.01);
        let skew: Vec<f64> = u.iter().map(|x| x * x).collect();
        assert!(ks_uniform_p_value(&skew) < 1e-6);
    }

    #[test]
    fn clopper_pearson_reference() {
        // k = 0: closed form
        let u = clopper_pearson_upper(0, 100_000, 0.99);
        assert!((u - (1.0 - 0.01_f64.powf(1e-5))).abs() < 1e-15);
        // k = 5, n = 100 at 99%: upper bound from the beta quantile, ≈ 0.1239
        let u = clopper_pearson_upper(5, 100, 0.99);
        assert!((beta_reg(6.0, 95.0, u) - 0.99).abs() < 1e-9);
        assert!(u > 0.05 && u < 0.15);
    }

    #[test]
    fn clopper_pearson_is_monotone_in_k() {
        let mut prev = 0.0;
        for k in 0..50 {
            let u = clopper_pearson_upper(k, 1000, 0.99);
            assert!(u > prev);
            prev = u;
        }
    }
}
