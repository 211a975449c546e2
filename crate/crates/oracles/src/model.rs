use statrs::function::erf::{erfc, erfc_inv};

/// Gaussian modulation `N(0, V)` cut into `2^m` cells by `boundaries`, seen
/// through a pure-loss channel of transmittance `η` with unit vacuum noise.
#[derive(Debug, Clone)]
pub struct SliceModel {
    pub variance: f64,
    pub transmittance: f64,
    pub boundaries: Vec<f64>,
    /// Standard-normal CDF at each cell's lower edge, and the cell mass.
    lower_cdf: Vec<f64>,
    mass: Vec<f64>,
}

fn phi(z: f64) -> f64 {
    0.5 * erfc(-z / std::f64::consts::SQRT_2)
}

fn phi_inv(q: f64) -> f64 {
    -std::f64::consts::SQRT_2 * erfc_inv(2.0 * q)
}

impl SliceModel {
    pub fn new(variance: f64, transmittance: f64, boundaries: Vec<f64>) -> Self {
        assert!(
            (boundaries.len() + 1).is_power_of_two(),
            "need 2^m - 1 boundaries"
        );
        let sd = variance.sqrt();
        let mut edges = vec![0.0];
        edges.extend(boundaries.iter().map(|b| phi(b / sd)));
        edges.push(1.0);
        let lower_cdf = edges[..edges.len() - 1].to_vec();
        let mass = edges.windows(2).map(|w| w[1] - w[0]).collect();
        SliceModel {
            variance,
            transmittance,
            boundaries,
            lower_cdf,
            mass,
        }
    }

    /// Quantile boundaries of `N(0, V)` for `m` slices.
    pub fn equiprobable(m: u32, variance: f64, transmittance: f64) -> Self {
        let n = 1usize << m;
        let sd = variance.sqrt();
        let b = (1..n).map(|k| sd * phi_inv(k as f64 / n as f64)).collect();
        Self::new(variance, transmittance, b)
    }

    pub fn m(&self) -> usize {
        (self.boundaries.len() + 1).trailing_zeros() as usize
    }

    pub fn cells(&self) -> usize {
        self.boundaries.len() + 1
    }

    pub fn mass(&self, c: usize) -> f64 {
        self.mass[c]
    }

    pub fn gain(&self) -> f64 {
        self.transmittance.sqrt()
    }

    /// Cells are `(b[c-1], b[c]]`.
    pub fn cell_of(&self, x: f64) -> usize {
        self.boundaries.partition_point(|&b| b < x)
    }

    pub fn sbar(&self, x: f64, c: usize) -> f64 {
        ((phi(x / self.variance.sqrt()) - self.lower_cdf[c]) / self.mass[c]).clamp(0.0, 1.0)
    }

    /// The point of cell `c` at within-cell CDF value `sbar`.
    pub fn point(&self, c: usize, sbar: f64) -> f64 {
        let q = (self.lower_cdf[c] + sbar * self.mass[c]).clamp(1e-300, 1.0 - 1e-16);
        self.variance.sqrt() * phi_inv(q)
    }

    /// MAP guess of bit `i` (1-based) from the candidate points `xs[c]`
    /// sharing the lower bits `prefix`. Ties go to 0.
    pub fn map_bit(&self, i: usize, prefix: usize, xs: &[f64], x_prime: f64) -> usize {
        let low = (1usize << (i - 1)) - 1;
        let g = self.gain();
        let mut w = [0.0f64; 2];
        for (c, &x) in xs.iter().enumerate() {
            if c & low == prefix & low {
                let d = x_prime - g * x;
                w[(c >> (i - 1)) & 1] += self.mass[c] * (-0.5 * d * d).exp();
            }
        }
        usize::from(w[1] > w[0])
    }
}
