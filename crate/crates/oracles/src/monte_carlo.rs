use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::SliceModel;

/// Slice error counts from direct simulation.
#[derive(Debug, Clone, PartialEq)]
pub struct McCounts {
    pub samples: usize,
    /// Errors of slice `i` at index `i - 1`, each decoded with Alice's true
    /// lower bits.
    pub errors: Vec<usize>,
}

impl McCounts {
    pub fn rate(&self, i: usize) -> f64 {
        self.errors[i - 1] as f64 / self.samples as f64
    }

    /// Binomial standard error of [`rate`](Self::rate).
    pub fn standard_error(&self, i: usize) -> f64 {
        let p = self.rate(i);
        (p * (1.0 - p) / self.samples as f64).sqrt()
    }
}

/// Samples `(x, x')`, recomputes `s̄` and every candidate point, and counts
/// how often the MAP estimate of each slice disagrees with Alice's bit.
pub fn monte_carlo_bit_errors(model: &SliceModel, samples: usize, seed: u64) -> McCounts {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let alice = Normal::new(0.0, model.variance.sqrt()).unwrap();
    let noise = Normal::new(0.0, 1.0).unwrap();
    let m = model.m();
    let mut errors = vec![0; m];
    let mut xs = vec![0.0; model.cells()];
    for _ in 0..samples {
        let x = alice.sample(&mut rng);
        let xp = model.gain() * x + noise.sample(&mut rng);
        let c = model.cell_of(x);
        let sbar = model.sbar(x, c);
        for (k, v) in xs.iter_mut().enumerate() {
            *v = if k == c { x } else { model.point(k, sbar) };
        }
        for (i, e) in errors.iter_mut().enumerate() {
            let bit = (c >> i) & 1;
            if model.map_bit(i + 1, c, &xs, xp) != bit {
                *e += 1;
            }
        }
    }
    McCounts { samples, errors }
}
