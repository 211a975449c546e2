use crate::SliceModel;

/// Joint slice/estimator density matrix built on fixed grids.
///
/// `s̄` takes `n_sbar` midpoints in `(0, 1)`; for each, every cell
/// contributes one point `x(s̄, c)`. Bob's outcome runs over `n_xprime`
/// points spanning 12 noise widths past the extreme means, where the
/// estimator bits are decided by explicit likelihood comparison. Eve is
/// traced through the coherent overlap `exp(-(1-η)Δx²/8)`. The result is
/// row-major over the basis index `(s << m) | e`.
pub fn grid_joint_state(model: &SliceModel, n_sbar: usize, n_xprime: usize) -> Vec<f64> {
    let m = model.m();
    let cells = model.cells();
    let dim = cells * cells;
    let g = model.gain();
    let eta = model.transmittance;
    let mut rho = vec![0.0; dim * dim];
    let mut xs = vec![0.0; cells];
    let mut lik = vec![0.0; n_xprime * cells];
    let mut amp = vec![0.0; dim];
    for j in 0..n_sbar {
        let sbar = (j as f64 + 0.5) / n_sbar as f64;
        for (c, x) in xs.iter_mut().enumerate() {
            *x = model.point(c, sbar);
        }
        let lo = xs.iter().fold(f64::INFINITY, |a, &x| a.min(g * x)) - 12.0;
        let hi = xs.iter().fold(f64::NEG_INFINITY, |a, &x| a.max(g * x)) + 12.0;
        let dx = (hi - lo) / (n_xprime - 1) as f64;
        for k in 0..n_xprime {
            let xp = lo + k as f64 * dx;
            for c in 0..cells {
                let d = xp - g * xs[c];
                lik[k * cells + c] = (-0.5 * d * d).exp();
            }
        }
        amp.iter_mut().for_each(|a| *a = 0.0);
        for s in 0..cells {
            let mut p = vec![0.0; cells];
            for k in 0..n_xprime {
                let xp = lo + k as f64 * dx;
                let mut e = 0;
                for i in 1..=m {
                    e |= model.map_bit(i, s, &xs, xp) << (i - 1);
                }
                p[e] += lik[k * cells + s] * dx / (2.0 * std::f64::consts::PI).sqrt();
            }
            for (e, pe) in p.iter().enumerate() {
                amp[(s << m) | e] = (model.mass(s) * pe).sqrt();
            }
        }
        for r in 0..dim {
            for c in 0..dim {
                let d = xs[r >> m] - xs[c >> m];
                let kappa = (-(1.0 - eta) * d * d / 8.0).exp();
                rho[r * dim + c] += amp[r] * amp[c] * kappa / n_sbar as f64;
            }
        }
    }
    rho
}
