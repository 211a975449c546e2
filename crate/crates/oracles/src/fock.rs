use nalgebra::{Complex, DMatrix, SymmetricEigen};

/// Gauss–Hermite rule for expectations under `N(0, 1)`: nodes and weights
/// from the eigen-decomposition of the Jacobi matrix.
pub fn gauss_hermite(n: usize) -> Vec<(f64, f64)> {
    let mut j = DMatrix::<f64>::zeros(n, n);
    for k in 1..n {
        let b = (k as f64 / 2.0).sqrt();
        j[(k, k - 1)] = b;
        j[(k - 1, k)] = b;
    }
    let eig = SymmetricEigen::new(j);
    let mut rule: Vec<(f64, f64)> = (0..n)
        .map(|k| {
            let v0 = eig.eigenvectors[(0, k)];
            (std::f64::consts::SQRT_2 * eig.eigenvalues[k], v0 * v0)
        })
        .collect();
    rule.sort_by(|a, b| a.0.total_cmp(&b.0));
    rule
}

/// Fock amplitudes `⟨n|β⟩` for `n < cutoff`.
pub fn coherent_state(beta: Complex<f64>, cutoff: usize) -> Vec<Complex<f64>> {
    let mut c = Vec::with_capacity(cutoff);
    c.push(Complex::new((-beta.norm_sqr() / 2.0).exp(), 0.0));
    for n in 1..cutoff {
        let next = c[n - 1] * beta / (n as f64).sqrt();
        c.push(next);
    }
    c
}

/// `-Tr ρ log₂ ρ`, ignoring eigenvalues at rounding level.
pub fn von_neumann_entropy_bits(rho: &DMatrix<f64>) -> f64 {
    SymmetricEigen::new(rho.clone())
        .eigenvalues
        .iter()
        .filter(|&&l| l > 1e-15)
        .map(|&l| -l * l.log2())
        .sum()
}

/// `Σ w |β⟩⟨β|` over a quadrature-variable rule, keeping the real part.
/// The imaginary parts cancel for the rules used here, which are
/// symmetric in `p`.
fn mixture(points: impl Iterator<Item = (f64, f64, f64)>, cutoff: usize) -> DMatrix<f64> {
    let mut rho = DMatrix::<f64>::zeros(cutoff, cutoff);
    for (x, p, w) in points {
        // Quadratures with vacuum variance 1: α = (x + ip)/2.
        let c = coherent_state(Complex::new(x, p) / 2.0, cutoff);
        for a in 0..cutoff {
            for b in 0..=a {
                let v = w * (c[a] * c[b].conj()).re;
                rho[(a, b)] += v;
                if a != b {
                    rho[(b, a)] += v;
                }
            }
        }
    }
    rho
}

/// Hermite nodes per quadrature variable; the mixtures converge to ~1e-6 bits here.
const NODES: usize = 128;

/// Eve's unconditional state: the reflected beam `√(1-η)(x + ip)` with
/// `x, p ~ N(0, V)`.
fn eve_state(eta: f64, v: f64, cutoff: usize) -> DMatrix<f64> {
    let rule = gauss_hermite(NODES);
    let s = ((1.0 - eta) * v).sqrt();
    mixture(
        rule.iter()
            .flat_map(|&(a, wa)| rule.iter().map(move |&(b, wb)| (s * a, s * b, wa * wb))),
        cutoff,
    )
}

/// Mean entropy of Eve's state when `x` is known to be `N(mean(t), sd_x)`
/// and `p ~ N(0, V)`, averaged over the rule for the conditioning value `t`.
fn conditional_entropy(
    eta: f64,
    v: f64,
    cutoff: usize,
    sd_x: f64,
    mean: impl Fn(f64) -> f64,
) -> f64 {
    let rule = gauss_hermite(NODES);
    let outer = gauss_hermite(3);
    let r = (1.0 - eta).sqrt();
    outer
        .iter()
        .map(|&(t, wt)| {
            let mu = mean(t);
            let x_rule: &[(f64, f64)] = if sd_x == 0.0 { &[(0.0, 1.0)] } else { &rule };
            let pts = x_rule.iter().flat_map(|&(a, wa)| {
                rule.iter()
                    .map(move |&(b, wb)| (r * (mu + sd_x * a), r * v.sqrt() * b, wa * wb))
            });
            wt * von_neumann_entropy_bits(&mixture(pts, cutoff))
        })
        .sum()
}

/// `S(ρ_E) - E_x S(ρ_E | x)` in a truncated Fock space.
pub fn fock_holevo_direct(eta: f64, v: f64, cutoff: usize) -> f64 {
    let s = von_neumann_entropy_bits(&eve_state(eta, v, cutoff));
    // Given x, only p is uncertain: a degenerate x-rule at the known value.
    let cond = conditional_entropy(eta, v, cutoff, 0.0, |t| v.sqrt() * t);
    s - cond
}

/// `S(ρ_E) - E_{x'} S(ρ_E | x')`, with the Bayes posterior
/// `x | x' ~ N(√η V x'/(1 + ηV), V/(1 + ηV))`.
pub fn fock_holevo_reverse(eta: f64, v: f64, cutoff: usize) -> f64 {
    let s = von_neumann_entropy_bits(&eve_state(eta, v, cutoff));
    let post_var = v / (1.0 + eta * v);
    let sd_xp = (1.0 + eta * v).sqrt();
    let cond = conditional_entropy(eta, v, cutoff, post_var.sqrt(), |t| {
        eta.sqrt() * v * sd_xp * t / (1.0 + eta * v)
    });
    s - cond
}
