//! Globally adaptive Gauss–Kronrod (7/15) quadrature.

// Tabulated nodes and weights are kept at their published precision.
#![allow(clippy::excessive_precision)]

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use crate::error::{Error, Result};
use crate::Real;

const XGK: [f64; 8] = [
    0.991_455_371_120_812_639_206_854_697_526_329,
    0.949_107_912_342_758_524_526_189_684_047_851,
    0.864_864_423_359_769_072_789_712_788_640_926,
    0.741_531_185_599_394_439_863_864_773_280_788,
    0.586_087_235_467_691_130_294_144_845_693_013,
    0.405_845_151_377_397_166_906_606_412_076_961,
    0.207_784_955_007_898_467_600_689_403_773_245,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_224_963_732_008_058_970,
    0.063_092_092_629_978_553_290_700_663_189_204,
    0.104_790_010_322_250_183_839_876_322_541_518,
    0.140_653_259_715_525_918_745_189_590_510_238,
    0.169_004_726_639_267_902_826_583_426_598_550,
    0.190_350_578_064_785_409_913_256_402_421_014,
    0.204_432_940_075_298_892_414_161_999_234_649,
    0.209_482_141_084_727_828_012_999_174_891_714,
];
// Gauss weights for the odd-indexed Kronrod nodes (1, 3, 5, 7).
const WG: [f64; 4] = [
    0.129_484_966_168_869_693_270_611_432_679_082,
    0.279_705_391_489_276_667_901_467_771_423_780,
    0.381_830_050_505_118_944_950_369_775_488_975,
    0.417_959_183_673_469_387_755_102_040_816_327,
];

#[derive(Debug, Clone, Copy)]
pub struct QuadOptions<T> {
    pub rel_tol: T,
    pub abs_tol: T,
    /// Upper bound on the number of subintervals kept by the adaptive loop.
    pub max_intervals: usize,
}

impl<T: Real> Default for QuadOptions<T> {
    fn default() -> Self {
        QuadOptions {
            rel_tol: T::lit(1e-8),
            abs_tol: T::lit(1e-12),
            max_intervals: 4000,
        }
    }
}

impl<T: Real> QuadOptions<T> {
    pub fn with_rel_tol(rel_tol: T) -> Self {
        QuadOptions {
            rel_tol,
            ..Self::default()
        }
    }

    /// Tolerances below what the scalar type can resolve are raised to it.
    fn effective(self) -> Self {
        let floor = T::lit(50.0) * T::epsilon();
        QuadOptions {
            rel_tol: self.rel_tol.max(floor),
            ..self
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Quadrature<T> {
    pub value: T,
    /// Estimated absolute error.
    pub error: T,
    pub evaluations: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct VecQuadrature<T> {
    pub values: Vec<T>,
    pub errors: Vec<T>,
    pub evaluations: usize,
}

struct Segment<T> {
    a: T,
    b: T,
    value: T,
    error: T,
}

impl<T: Real> PartialEq for Segment<T> {
    fn eq(&self, other: &Self) -> bool {
        self.error == other.error
    }
}
impl<T: Real> Eq for Segment<T> {}
impl<T: Real> PartialOrd for Segment<T> {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl<T: Real> Ord for Segment<T> {
    fn cmp(&self, other: &Self) -> Ordering {
        self.error
            .partial_cmp(&other.error)
            .unwrap_or(Ordering::Equal)
    }
}

fn gk15<T: Real, F>(f: &mut F, a: T, b: T) -> Result<(T, T)>
where
    F: FnMut(T) -> Result<T>,
{
    let center = (a + b) * T::half();
    let half = (b - a) * T::half();
    let fc = f(center)?;
    let mut kronrod = fc * T::lit(WGK[7]);
    let mut gauss = fc * T::lit(WG[3]);
    for j in 0..7 {
        let dx = half * T::lit(XGK[j]);
        let f1 = f(center - dx)?;
        let f2 = f(center + dx)?;
        kronrod += (f1 + f2) * T::lit(WGK[j]);
        if j % 2 == 1 {
            gauss += (f1 + f2) * T::lit(WG[j / 2]);
        }
    }
    let value = kronrod * half;
    let error = ((kronrod - gauss) * half).abs();
    if !value.is_finite() {
        return Err(Error::domain(
            "integrate",
            "integrand is not finite on the domain",
        ));
    }
    Ok((value, error))
}

/// Adaptive integral of a fallible integrand over `[a, b]`.
///
/// Converged when the summed error estimate is at most
/// `max(rel_tol · |value|, abs_tol)`. Running out of subintervals is an
/// error rather than a silently truncated result.
pub fn try_integrate<T: Real, F>(
    mut f: F,
    a: T,
    b: T,
    opts: QuadOptions<T>,
) -> Result<Quadrature<T>>
where
    F: FnMut(T) -> Result<T>,
{
    let opts = opts.effective();
    if !(a.is_finite() && b.is_finite()) {
        return Err(Error::domain("integrate", "bounds must be finite"));
    }
    if a == b {
        return Ok(Quadrature {
            value: T::zero(),
            error: T::zero(),
            evaluations: 0,
        });
    }
    if b < a {
        let q = try_integrate(f, b, a, opts)?;
        return Ok(Quadrature {
            value: -q.value,
            ..q
        });
    }
    let mut heap = BinaryHeap::new();
    let (value, error) = gk15(&mut f, a, b)?;
    let mut evaluations = 15;
    heap.push(Segment { a, b, value, error });
    loop {
        let (total, err): (T, T) = heap.iter().fold((T::zero(), T::zero()), |(v, e), s| {
            (v + s.value, e + s.error)
        });
        let target = (opts.rel_tol * total.abs()).max(opts.abs_tol);
        if err <= target {
            return Ok(Quadrature {
                value: total,
                error: err,
                evaluations,
            });
        }
        if heap.len() >= opts.max_intervals {
            return Err(Error::NonConvergence {
                evaluations,
                error_estimate: err.as_f64(),
                target: target.as_f64(),
            });
        }
        let worst = heap.pop().expect("non-empty");
        let mid = (worst.a + worst.b) * T::half();
        if mid <= worst.a || mid >= worst.b {
            // Interval cannot be split further in this precision.
            return Err(Error::NonConvergence {
                evaluations,
                error_estimate: err.as_f64(),
                target: target.as_f64(),
            });
        }
        let (v1, e1) = gk15(&mut f, worst.a, mid)?;
        let (v2, e2) = gk15(&mut f, mid, worst.b)?;
        evaluations += 30;
        heap.push(Segment {
            a: worst.a,
            b: mid,
            value: v1,
            error: e1,
        });
        heap.push(Segment {
            a: mid,
            b: worst.b,
            value: v2,
            error: e2,
        });
    }
}

/// Adaptive integral of `f` over `[a, b]`.
pub fn integrate<T: Real, F>(mut f: F, a: T, b: T, opts: QuadOptions<T>) -> Result<Quadrature<T>>
where
    F: FnMut(T) -> T,
{
    try_integrate(|x| Ok(f(x)), a, b, opts)
}

/// Integral over the rectangle `[x0, x1] × [y0, y1]` by nested adaptive
/// quadrature. The inner integrals run at a tenth of the outer tolerance and
/// their error is folded into the reported bound.
pub fn integrate_2d<T: Real, F>(
    mut f: F,
    (x0, x1): (T, T),
    (y0, y1): (T, T),
    opts: QuadOptions<T>,
) -> Result<Quadrature<T>>
where
    F: FnMut(T, T) -> T,
{
    let inner_opts = QuadOptions {
        rel_tol: opts.rel_tol / T::lit(10.0),
        abs_tol: opts.abs_tol / T::lit(10.0) / (x1 - x0).abs().max(T::one()),
        ..opts
    };
    let mut inner_error = T::zero();
    let mut inner_evals = 0usize;
    let outer = try_integrate(
        |x| {
            let q = integrate(|y| f(x, y), y0, y1, inner_opts)?;
            inner_error = inner_error.max(q.error);
            inner_evals += q.evaluations;
            Ok(q.value)
        },
        x0,
        x1,
        opts,
    )?;
    Ok(Quadrature {
        value: outer.value,
        error: outer.error + inner_error * (x1 - x0).abs(),
        evaluations: inner_evals,
    })
}

struct VecSegment<T> {
    a: T,
    b: T,
    values: Vec<T>,
    errors: Vec<T>,
}

fn gk15_vec<T: Real, F>(
    f: &mut F,
    a: T,
    b: T,
    dim: usize,
    buf: &mut [T],
) -> Result<(Vec<T>, Vec<T>)>
where
    F: FnMut(T, &mut [T]) -> Result<()>,
{
    let center = (a + b) * T::half();
    let half = (b - a) * T::half();
    let mut kronrod = vec![T::zero(); dim];
    let mut gauss = vec![T::zero(); dim];
    let mut accumulate = |x: T, wk: T, wg: Option<T>, buf: &mut [T], f: &mut F| -> Result<()> {
        f(x, buf)?;
        for k in 0..dim {
            kronrod[k] += wk * buf[k];
            if let Some(wg) = wg {
                gauss[k] += wg * buf[k];
            }
        }
        Ok(())
    };
    accumulate(center, T::lit(WGK[7]), Some(T::lit(WG[3])), buf, f)?;
    for j in 0..7 {
        let dx = half * T::lit(XGK[j]);
        let wg = (j % 2 == 1).then(|| T::lit(WG[j / 2]));
        accumulate(center - dx, T::lit(WGK[j]), wg, buf, f)?;
        accumulate(center + dx, T::lit(WGK[j]), wg, buf, f)?;
    }
    let values: Vec<T> = kronrod.iter().map(|&k| k * half).collect();
    let errors: Vec<T> = kronrod
        .iter()
        .zip(&gauss)
        .map(|(&k, &g)| ((k - g) * half).abs())
        .collect();
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::domain(
            "integrate",
            "integrand is not finite on the domain",
        ));
    }
    Ok((values, errors))
}

/// Adaptive integral of a vector-valued integrand `f(x, out)` of dimension
/// `dim` over `[a, b]`.
///
/// Every component must meet `error_k ≤ max(rel_tol · |value_k|, abs_tol)`.
/// On failure the error names the first component that missed its target.
pub fn integrate_vec<T: Real, F>(
    mut f: F,
    dim: usize,
    a: T,
    b: T,
    opts: QuadOptions<T>,
) -> std::result::Result<VecQuadrature<T>, (usize, Error)>
where
    F: FnMut(T, &mut [T]) -> Result<()>,
{
    let opts = opts.effective();
    let mut buf = vec![T::zero(); dim];
    let first = gk15_vec(&mut f, a, b, dim, &mut buf).map_err(|e| (0, e))?;
    let mut segments = vec![VecSegment {
        a,
        b,
        values: first.0,
        errors: first.1,
    }];
    let mut evaluations = 15;
    loop {
        let mut values = vec![T::zero(); dim];
        let mut errors = vec![T::zero(); dim];
        for s in &segments {
            for k in 0..dim {
                values[k] += s.values[k];
                errors[k] += s.errors[k];
            }
        }
        let targets: Vec<T> = values
            .iter()
            .map(|v| (opts.rel_tol * v.abs()).max(opts.abs_tol))
            .collect();
        let failing = (0..dim).find(|&k| errors[k] > targets[k]);
        let Some(failing) = failing else {
            return Ok(VecQuadrature {
                values,
                errors,
                evaluations,
            });
        };
        if segments.len() >= opts.max_intervals {
            return Err((
                failing,
                Error::NonConvergence {
                    evaluations,
                    error_estimate: errors[failing].as_f64(),
                    target: targets[failing].as_f64(),
                },
            ));
        }
        // Split, in one sweep, every segment that carries a large share of
        // some component's excess error.
        let weights: Vec<T> = targets.iter().map(|t| T::one() / *t).collect();
        let scores: Vec<T> = segments
            .iter()
            .map(|s| {
                s.errors
                    .iter()
                    .zip(&weights)
                    .fold(T::zero(), |m, (&e, &w)| m.max(e * w))
            })
            .collect();
        let best = scores.iter().fold(T::zero(), |m, &s| m.max(s));
        let threshold = best / T::lit(4.0);
        let mut next = Vec::with_capacity(segments.len() * 2);
        let mut split_any = false;
        for (s, score) in segments.into_iter().zip(scores) {
            let mid = (s.a + s.b) * T::half();
            if score >= threshold && score > T::zero() && mid > s.a && mid < s.b {
                let l = gk15_vec(&mut f, s.a, mid, dim, &mut buf).map_err(|e| (failing, e))?;
                let r = gk15_vec(&mut f, mid, s.b, dim, &mut buf).map_err(|e| (failing, e))?;
                evaluations += 30;
                next.push(VecSegment {
                    a: s.a,
                    b: mid,
                    values: l.0,
                    errors: l.1,
                });
                next.push(VecSegment {
                    a: mid,
                    b: s.b,
                    values: r.0,
                    errors: r.1,
                });
                split_any = true;
            } else {
                next.push(s);
            }
        }
        segments = next;
        if !split_any {
            return Err((
                failing,
                Error::NonConvergence {
                    evaluations,
                    error_estimate: errors[failing].as_f64(),
                    target: targets[failing].as_f64(),
                },
            ));
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mathcore::gaussian_pdf;
    use approx::assert_abs_diff_eq;

    #[test]
    fn constant_and_normal_pdf() {
        let q = integrate(|_| 1.0_f64, 0.0, 1.0, QuadOptions::default()).unwrap();
        assert_abs_diff_eq!(q.value, 1.0, epsilon = 1e-14);
        let q = integrate(gaussian_pdf::<f64>, -8.0, 8.0, QuadOptions::default()).unwrap();
        assert_abs_diff_eq!(q.value, 1.0, epsilon = 1e-10);
    }

    #[test]
    fn separable_polynomial_on_square() {
        let q = integrate_2d(
            |x: f64, y| x * y,
            (0.0, 1.0),
            (0.0, 1.0),
            QuadOptions::default(),
        )
        .unwrap();
        assert_abs_diff_eq!(q.value, 0.25, epsilon = 1e-14);
    }

    #[test]
    fn low_degree_polynomials_are_exact() {
        // ∫_{-1}^{2} (3 - x + 2x² - x³ + 0.5x⁴ + 0.25x⁵) dx
        let f = |x: f64| 3.0 - x + 2.0 * x * x - x.powi(3) + 0.5 * x.powi(4) + 0.25 * x.powi(5);
        let antider = |x: f64| {
            3.0 * x - x * x / 2.0 + 2.0 * x.powi(3) / 3.0 - x.powi(4) / 4.0
                + 0.1 * x.powi(5)
                + x.powi(6) / 24.0
        };
        let q = integrate(f, -1.0, 2.0, QuadOptions::default()).unwrap();
        assert_abs_diff_eq!(q.value, antider(2.0) - antider(-1.0), epsilon = 1e-12);
        assert_eq!(q.evaluations, 15);
    }

    #[test]
    fn reversed_bounds_and_kinks() {
        let q = integrate(|x: f64| x.abs(), 1.0, -1.0, QuadOptions::default()).unwrap();
        assert_abs_diff_eq!(q.value, -1.0, epsilon = 1e-10);
    }

    #[test]
    fn non_convergence_is_reported() {
        let opts = QuadOptions {
            max_intervals: 8,
            ..QuadOptions::default()
        };
        let r = integrate(|x: f64| (1.0 / x).sin(), 1e-6, 1.0, opts);
        assert!(matches!(r, Err(Error::NonConvergence { .. })));
    }

    #[test]
    fn vector_integrand_componentwise() {
        let q = integrate_vec(
            |x: f64, out: &mut [f64]| {
                out[0] = x;
                out[1] = (x * 10.0).sin();
                out[2] = 1e-9 * x * x;
                Ok(())
            },
            3,
            0.0,
            1.0,
            QuadOptions::with_rel_tol(1e-10),
        )
        .unwrap();
        assert_abs_diff_eq!(q.values[0], 0.5, epsilon = 1e-14);
        assert_abs_diff_eq!(q.values[1], (1.0 - 10.0_f64.cos()) / 10.0, epsilon = 1e-12);
        assert_abs_diff_eq!(q.values[2], 1e-9 / 3.0, epsilon = 1e-20);
    }
}
