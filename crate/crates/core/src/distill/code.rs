use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mathcore::{binary_entropy, Probability, RandomStream};

/// Column weight used by [`build_code`] (reduced when there are fewer rows).
pub const COLUMN_WEIGHT: usize = 3;
/// Smallest block length accepted by [`build_code`].
pub const MIN_BLOCK_LENGTH: usize = 1024;
/// Random placement attempts per edge before the deterministic fallback.
const PLACEMENT_TRIES: usize = 64;

/// Sparse binary parity-check matrix `H` (rows × cols) stored as adjacency
/// lists in both directions.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParityCheck {
    rows: usize,
    cols: usize,
    code_id: u64,
    /// Columns of each row, ascending.
    row_adj: Vec<Vec<u32>>,
    /// Rows of each column, ascending.
    col_adj: Vec<Vec<u32>>,
}

impl ParityCheck {
    /// Builds a matrix from the row lists. Duplicate entries cancel over
    /// GF(2) and are rejected.
    pub fn from_rows(cols: usize, row_adj: Vec<Vec<u32>>, code_id: u64) -> Result<Self> {
        let rows = row_adj.len();
        let mut col_adj = vec![Vec::new(); cols];
        let mut sorted = row_adj;
        for (r, row) in sorted.iter_mut().enumerate() {
            row.sort_unstable();
            if row.windows(2).any(|w| w[0] == w[1]) {
                return Err(Error::InfeasibleCode(format!("row {r} repeats a column")));
            }
            for &c in row.iter() {
                if c as usize >= cols {
                    return Err(Error::InfeasibleCode(format!(
                        "row {r} references column {c}"
                    )));
                }
                col_adj[c as usize].push(r as u32);
            }
        }
        Ok(ParityCheck {
            rows,
            cols,
            code_id,
            row_adj: sorted,
            col_adj,
        })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn code_id(&self) -> u64 {
        self.code_id
    }

    pub fn row(&self, r: usize) -> &[u32] {
        &self.row_adj[r]
    }

    pub fn col(&self, c: usize) -> &[u32] {
        &self.col_adj[c]
    }

    pub fn edges(&self) -> usize {
        self.row_adj.iter().map(Vec::len).sum()
    }

    pub fn max_row_degree(&self) -> usize {
        self.row_adj.iter().map(Vec::len).max().unwrap_or(0)
    }

    pub fn max_col_degree(&self) -> usize {
        self.col_adj.iter().map(Vec::len).max().unwrap_or(0)
    }

    /// Number of length-4 cycles: pairs of rows sharing `k ≥ 2` columns
    /// contribute `k(k-1)/2` each.
    pub fn four_cycles(&self) -> u64 {
        let mut shared = vec![0u32; self.rows];
        let mut total = 0u64;
        for r in 0..self.rows {
            let mut touched = Vec::new();
            for &c in &self.row_adj[r] {
                for &r2 in &self.col_adj[c as usize] {
                    if (r2 as usize) > r {
                        if shared[r2 as usize] == 0 {
                            touched.push(r2 as usize);
                        }
                        shared[r2 as usize] += 1;
                    }
                }
            }
            for r2 in touched {
                let k = shared[r2] as u64;
                total += k * (k - 1) / 2;
                shared[r2] = 0;
            }
        }
        total
    }
}

/// `H · bits` over GF(2).
pub fn syndrome(h: &ParityCheck, bits: &[u8]) -> Result<Vec<u8>> {
    if bits.len() != h.cols {
        return Err(Error::LengthMismatch {
            expected: h.cols,
            found: bits.len(),
        });
    }
    Ok(h.row_adj
        .iter()
        .map(|row| row.iter().fold(0u8, |acc, &c| acc ^ (bits[c as usize] & 1)))
        .collect())
}

/// Syndrome size for a slice with bit error rate `e_b` and finite-length
/// inefficiency `beta`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CodeSizing {
    /// Syndrome bits per key bit, `min(1, h(e_b)(1 + β))`.
    pub syndrome_fraction: f64,
    pub rate: f64,
}

impl CodeSizing {
    /// Rows of a length-`l` code, kept within `1 ..= l - 1`.
    pub fn rows(&self, l: usize) -> usize {
        ((l as f64 * self.syndrome_fraction).ceil() as usize).clamp(1, l - 1)
    }
}

pub fn size_code_rate(e_b: Probability<f64>, beta: f64) -> Result<CodeSizing> {
    if !(e_b.value() <= 0.5) || !(beta >= 0.0) {
        return Err(Error::domain(
            "size_code_rate",
            format!(
                "need e_b <= 0.5 and beta >= 0, got {} and {beta}",
                e_b.value()
            ),
        ));
    }
    let fraction = (binary_entropy(e_b) * (1.0 + beta)).min(1.0);
    Ok(CodeSizing {
        syndrome_fraction: fraction,
        rate: 1.0 - fraction,
    })
}

/// Random sparse parity-check matrix with `⌈l(1 - rate)⌉` rows and column
/// weight 3.
///
/// Edges are placed column by column onto checks that still have room
/// below the balanced row degree. Random candidates that would close a
/// 4-cycle with the column's other checks are skipped; when none is found
/// the least-loaded check is used anyway, which only happens once the rows
/// are too few for a 4-cycle-free code.
pub fn build_code(target_rate: f64, l: usize, stream: &RandomStream) -> Result<ParityCheck> {
    if !(target_rate > 0.0 && target_rate < 1.0) {
        return Err(Error::InfeasibleCode(format!(
            "rate {target_rate} not in (0, 1)"
        )));
    }
    if l < MIN_BLOCK_LENGTH {
        return Err(Error::InfeasibleCode(format!(
            "block length {l} below the minimum {MIN_BLOCK_LENGTH}"
        )));
    }
    let rows = (l as f64 * (1.0 - target_rate)).ceil() as usize;
    build_code_with_rows(rows, l, stream)
}

/// As [`build_code`], with the row count given directly.
pub fn build_code_with_rows(rows: usize, l: usize, stream: &RandomStream) -> Result<ParityCheck> {
    if rows == 0 || rows >= l {
        return Err(Error::InfeasibleCode(format!("{rows} rows for length {l}")));
    }
    let mut rng = stream.clone();
    let code_id = rng.next_u64();
    let w = COLUMN_WEIGHT.min(rows);
    let cap = (l * w).div_ceil(rows);
    let mut degree = vec![0usize; rows];
    let mut neighbours: Vec<HashSet<u32>> = vec![HashSet::new(); rows];
    let mut row_adj: Vec<Vec<u32>> = vec![Vec::with_capacity(cap); rows];
    let mut chosen: Vec<usize> = Vec::with_capacity(w);
    let mut by_load: Vec<usize> = (0..rows).collect();

    for col in 0..l {
        chosen.clear();
        for _ in 0..w {
            let closes_cycle = |r: usize, chosen: &[usize]| {
                chosen.iter().any(|&o| neighbours[r].contains(&(o as u32)))
            };
            let mut pick = None;
            for _ in 0..PLACEMENT_TRIES {
                let r = rng.below(rows);
                if degree[r] < cap && !chosen.contains(&r) && !closes_cycle(r, &chosen) {
                    pick = Some(r);
                    break;
                }
            }
            let r = match pick {
                Some(r) => r,
                None => {
                    by_load.sort_by_key(|&r| (degree[r], r));
                    let free = by_load.iter().copied().filter(|r| !chosen.contains(r));
                    let mut fallback = None;
                    for r in free.clone() {
                        if degree[r] < cap && !closes_cycle(r, &chosen) {
                            fallback = Some(r);
                            break;
                        }
                    }
                    fallback
                        .or_else(|| free.clone().next())
                        .ok_or_else(|| Error::InfeasibleCode("no check available".into()))?
                }
            };
            chosen.push(r);
        }
        for (k, &a) in chosen.iter().enumerate() {
            degree[a] += 1;
            row_adj[a].push(col as u32);
            for &b in &chosen[k + 1..] {
                neighbours[a].insert(b as u32);
                neighbours[b].insert(a as u32);
            }
        }
    }
    ParityCheck::from_rows(l, row_adj, code_id)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn row_count_contract() {
        let h = build_code(0.8, 10_000, &RandomStream::new(1, 0)).unwrap();
        assert_eq!(h.rows(), 2000);
        assert_eq!(h.cols(), 10_000);
        assert!(h.max_col_degree() <= COLUMN_WEIGHT);
        assert_eq!(h.edges(), 30_000);
        assert!(h.max_row_degree() <= 15);
    }

    #[test]
    fn deterministic_under_stream() {
        let a = build_code(0.7, 2048, &RandomStream::new(5, 9)).unwrap();
        let b = build_code(0.7, 2048, &RandomStream::new(5, 9)).unwrap();
        let c = build_code(0.7, 2048, &RandomStream::new(5, 10)).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn moderate_rate_codes_avoid_four_cycles() {
        let h = build_code(0.75, 4096, &RandomStream::new(3, 0)).unwrap();
        assert_eq!(h.four_cycles(), 0);
    }

    #[test]
    fn tiny_row_counts_still_build() {
        let h = build_code_with_rows(2, 1024, &RandomStream::new(3, 0)).unwrap();
        assert_eq!(h.rows(), 2);
        assert!(h.max_col_degree() <= 2);
        assert!(build_code(1.0, 2048, &RandomStream::new(0, 0)).is_err());
        assert!(build_code(0.5, 100, &RandomStream::new(0, 0)).is_err());
    }

    #[test]
    fn syndrome_is_linear() {
        let h = build_code(0.6, 1024, &RandomStream::new(8, 0)).unwrap();
        assert!(syndrome(&h, &vec![0; 1024])
            .unwrap()
            .iter()
            .all(|&b| b == 0));
        let mut rs = RandomStream::new(8, 1);
        for _ in 0..20 {
            let a: Vec<u8> = (0..1024).map(|_| rs.bit()).collect();
            let b: Vec<u8> = (0..1024).map(|_| rs.bit()).collect();
            let ab: Vec<u8> = a.iter().zip(&b).map(|(x, y)| x ^ y).collect();
            let sa = syndrome(&h, &a).unwrap();
            let sb = syndrome(&h, &b).unwrap();
            let sab = syndrome(&h, &ab).unwrap();
            assert!(sa.iter().zip(&sb).zip(&sab).all(|((x, y), z)| x ^ y == *z));
        }
        assert!(syndrome(&h, &[0; 10]).is_err());
    }

    #[test]
    fn toy_code_matches_exhaustive_multiplication() {
        let mut rs = RandomStream::new(77, 0);
        let dense: Vec<Vec<u8>> = (0..8)
            .map(|_| (0..12).map(|_| rs.bit()).collect())
            .collect();
        let rows = dense
            .iter()
            .map(|r| {
                r.iter()
                    .enumerate()
                    .filter(|(_, &b)| b == 1)
                    .map(|(c, _)| c as u32)
                    .collect()
            })
            .collect();
        let h = ParityCheck::from_rows(12, rows, 0).unwrap();
        for word in 0u32..1 << 12 {
            let bits: Vec<u8> = (0..12).map(|k| ((word >> k) & 1) as u8).collect();
            let expect: Vec<u8> = dense
                .iter()
                .map(|r| r.iter().zip(&bits).map(|(a, b)| a * b).sum::<u8>() % 2)
                .collect();
            assert_eq!(syndrome(&h, &bits).unwrap(), expect);
        }
    }

    #[test]
    fn sizing_examples() {
        let p = |v| Probability::new(v).unwrap();
        assert_eq!(size_code_rate(p(0.0), 0.15).unwrap().rate, 1.0);
        assert_abs_diff_eq!(
            size_code_rate(p(0.0311), 0.15).unwrap().syndrome_fraction,
            0.230,
            epsilon = 1e-3
        );
        assert_eq!(size_code_rate(p(0.5), 0.0).unwrap().rate, 0.0);
        assert!(size_code_rate(p(0.6), 0.0).is_err());
        assert!(size_code_rate(p(0.1), -0.1).is_err());
    }
}
