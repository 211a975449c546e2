use crate::error::{Error, Result};
use crate::slicing::spec::SliceSpec;
use crate::Real;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OptimizeOptions {
    pub max_evaluations: usize,
    /// Stop once every simplex vertex lies within this distance of the best
    /// one in every coordinate.
    pub tolerance: f64,
    /// Initial simplex step relative to each parameter (absolute when the
    /// parameter is 0).
    pub initial_step: f64,
}

impl Default for OptimizeOptions {
    fn default() -> Self {
        OptimizeOptions {
            max_evaluations: 200,
            tolerance: 1e-3,
            initial_step: 0.05,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OptimizeOutcome<T> {
    pub spec: SliceSpec<T>,
    pub objective: T,
    pub initial_objective: T,
    pub evaluations: usize,
    pub converged: bool,
    /// The evaluation budget ran out before convergence; `spec` is the best
    /// point seen.
    pub budget_exhausted: bool,
    /// The search kept the boundaries mirror-symmetric about 0.
    pub symmetric: bool,
}

/// Maps search parameters to boundary vectors. A symmetric start is
/// searched over its positive boundaries only, so a symmetric channel
/// yields a symmetric result.
struct Parameterization<T> {
    m: usize,
    variance: T,
    symmetric: bool,
}

impl<T: Real> Parameterization<T> {
    fn params(&self, spec: &SliceSpec<T>) -> Vec<f64> {
        let b = spec.boundaries();
        if self.symmetric {
            b[b.len() / 2 + 1..].iter().map(|v| v.as_f64()).collect()
        } else {
            b.iter().map(|v| v.as_f64()).collect()
        }
    }

    fn spec(&self, params: &[f64]) -> Option<SliceSpec<T>> {
        let boundaries: Vec<T> = if self.symmetric {
            if params.iter().any(|&p| p <= 0.0) {
                return None;
            }
            let pos = params.iter().map(|&p| T::lit(p));
            let neg = params.iter().rev().map(|&p| -T::lit(p));
            neg.chain(std::iter::once(T::zero())).chain(pos).collect()
        } else {
            params.iter().map(|&p| T::lit(p)).collect()
        };
        SliceSpec::new(self.m, boundaries, self.variance).ok()
    }
}

/// Derivative-free Nelder–Mead search over the slice boundaries maximising
/// `objective`. The returned spec is never worse than `initial`.
pub fn optimize_slices<T: Real, F>(
    initial: &SliceSpec<T>,
    mut objective: F,
    opts: OptimizeOptions,
) -> Result<OptimizeOutcome<T>>
where
    F: FnMut(&SliceSpec<T>) -> Result<T>,
{
    let param = Parameterization {
        m: initial.m(),
        variance: initial.variance(),
        symmetric: initial.m() > 1 && initial.is_symmetric(T::lit(1e-9)),
    };
    let initial_objective = objective(initial)?;
    if !initial_objective.is_finite() {
        return Err(Error::domain(
            "optimize_slices",
            "objective is not finite at the initial spec",
        ));
    }
    let mut evaluations = 1usize;
    let mut best = (initial.clone(), initial_objective);

    // Minimise the negated objective; infeasible or failing points score +∞.
    let mut eval = |x: &[f64], evaluations: &mut usize, best: &mut (SliceSpec<T>, T)| -> f64 {
        *evaluations += 1;
        let Some(spec) = param.spec(x) else {
            return f64::INFINITY;
        };
        match objective(&spec) {
            Ok(v) if v.is_finite() => {
                if v > best.1 {
                    *best = (spec, v);
                }
                -v.as_f64()
            }
            _ => f64::INFINITY,
        }
    };

    let x0 = param.params(initial);
    let n = x0.len();
    let mut simplex: Vec<(Vec<f64>, f64)> = vec![(x0.clone(), -initial_objective.as_f64())];
    for k in 0..n {
        if evaluations >= opts.max_evaluations {
            break;
        }
        let mut x = x0.clone();
        x[k] += if x[k] == 0.0 {
            opts.initial_step
        } else {
            opts.initial_step * x[k].abs()
        };
        let f = eval(&x, &mut evaluations, &mut best);
        simplex.push((x, f));
    }

    let mut converged = false;
    while simplex.len() == n + 1 && evaluations < opts.max_evaluations {
        simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
        let spread = simplex[1..]
            .iter()
            .flat_map(|(x, _)| x.iter().zip(&simplex[0].0).map(|(a, b)| (a - b).abs()))
            .fold(0.0, f64::max);
        if spread < opts.tolerance {
            converged = true;
            break;
        }
        let centroid: Vec<f64> = (0..n)
            .map(|k| simplex[..n].iter().map(|(x, _)| x[k]).sum::<f64>() / n as f64)
            .collect();
        let worst = simplex[n].clone();
        let along = |t: f64| -> Vec<f64> {
            centroid
                .iter()
                .zip(&worst.0)
                .map(|(c, w)| c + t * (c - w))
                .collect()
        };
        let xr = along(1.0);
        let fr = eval(&xr, &mut evaluations, &mut best);
        if fr < simplex[0].1 {
            let xe = along(2.0);
            let fe = if evaluations < opts.max_evaluations {
                eval(&xe, &mut evaluations, &mut best)
            } else {
                f64::INFINITY
            };
            simplex[n] = if fe < fr { (xe, fe) } else { (xr, fr) };
            continue;
        }
        if fr < simplex[n - 1].1 {
            simplex[n] = (xr, fr);
            continue;
        }
        if evaluations >= opts.max_evaluations {
            break;
        }
        let (xc, fc) = if fr < worst.1 {
            let x = along(0.5);
            let f = eval(&x, &mut evaluations, &mut best);
            (x, f)
        } else {
            let x = along(-0.5);
            let f = eval(&x, &mut evaluations, &mut best);
            (x, f)
        };
        if fc < worst.1.min(fr) {
            simplex[n] = (xc, fc);
            continue;
        }
        // Shrink towards the best vertex.
        let x_best = simplex[0].0.clone();
        for v in simplex[1..].iter_mut() {
            if evaluations >= opts.max_evaluations {
                break;
            }
            let x: Vec<f64> = x_best
                .iter()
                .zip(&v.0)
                .map(|(b, x)| b + 0.5 * (x - b))
                .collect();
            let f = eval(&x, &mut evaluations, &mut best);
            *v = (x, f);
        }
    }

    Ok(OptimizeOutcome {
        spec: best.0,
        objective: best.1,
        initial_objective,
        evaluations,
        converged,
        budget_exhausted: !converged,
        symmetric: param.symmetric,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::slicing::default_equiprobable_spec;
    use approx::assert_abs_diff_eq;

    fn quadratic(target: f64) -> impl FnMut(&SliceSpec<f64>) -> Result<f64> {
        move |s| Ok(-(s.boundaries()[2] - target).powi(2))
    }

    #[test]
    fn finds_a_shifted_optimum_symmetrically() {
        let init = default_equiprobable_spec(2, 31.0).unwrap();
        let out = optimize_slices(&init, quadratic(5.0), OptimizeOptions::default()).unwrap();
        assert!(out.converged && out.symmetric);
        assert_abs_diff_eq!(out.spec.boundaries()[2], 5.0, epsilon = 2e-3);
        assert!(out.spec.is_symmetric(1e-12));
        assert!(out.objective >= out.initial_objective);
        assert!(out.evaluations <= 200);
    }

    #[test]
    fn fixed_point_is_kept() {
        let init = default_equiprobable_spec(2, 31.0).unwrap();
        let tau = init.boundaries()[2];
        let out = optimize_slices(&init, quadratic(tau), OptimizeOptions::default()).unwrap();
        assert_abs_diff_eq!(out.spec.boundaries()[2], tau, epsilon = 1e-3);
        assert_eq!(out.objective, 0.0);
    }

    #[test]
    fn asymmetric_start_and_budget() {
        let init = SliceSpec::new(2, vec![-3.0, 0.5, 4.0], 31.0).unwrap();
        let f = |s: &SliceSpec<f64>| {
            let b = s.boundaries();
            Ok(-(b[0] + 2.0).powi(2) - (b[1] - 1.0).powi(2) - (b[2] - 6.0).powi(2))
        };
        let out = optimize_slices(&init, f, OptimizeOptions::default()).unwrap();
        assert!(!out.symmetric);
        let b = out.spec.boundaries();
        assert!(
            (b[0] + 2.0).abs() < 0.01 && (b[1] - 1.0).abs() < 0.01 && (b[2] - 6.0).abs() < 0.01
        );

        let tight = OptimizeOptions {
            max_evaluations: 5,
            ..OptimizeOptions::default()
        };
        let out = optimize_slices(&init, f, tight).unwrap();
        assert!(out.budget_exhausted && out.evaluations <= 5);
        assert!(out.objective >= out.initial_objective);
    }

    #[test]
    fn failing_objective_points_are_skipped() {
        let init = default_equiprobable_spec(2, 31.0).unwrap();
        let f = |s: &SliceSpec<f64>| {
            let t = s.boundaries()[2];
            if t > 3.8 {
                Err(Error::Degenerate("synthetic failure".into()))
            } else {
                Ok(-(t - 3.0).powi(2))
            }
        };
        let out = optimize_slices(&init, f, OptimizeOptions::default()).unwrap();
        assert!(out.objective >= out.initial_objective);
        assert!(out.spec.boundaries()[2] <= 3.8);
    }
}
