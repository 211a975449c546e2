use crate::distill::code::ParityCheck;
use crate::error::{Error, Result};

/// Iteration limit of the belief-propagation decoder.
pub const MAX_BP_ITERATIONS: usize = 100;
/// Messages are clipped to this magnitude to keep `φ` finite.
const LLR_CLIP: f64 = 40.0;
const LLR_FLOOR: f64 = 1e-12;
/// Codes with at most this many checks get ordered-statistics
/// post-processing.
pub const OSD_MAX_ROWS: usize = 512;
/// Least reliable non-basis columns tried by the order-2 search.
const OSD_SEARCH_WIDTH: usize = 64;

#[derive(Debug, Clone, PartialEq)]
pub struct DecodeOutcome {
    pub bits: Vec<u8>,
    /// Iterations run; 0 when the hard decisions already met the syndrome.
    pub iterations: usize,
    pub converged: bool,
    /// Positions changed relative to the channel hard decisions.
    pub flips: usize,
    /// The word came from ordered-statistics post-processing.
    pub post_processed: bool,
}

/// `φ(x) = -ln tanh(x/2)`, its own inverse on `(0, ∞)`.
fn phi(x: f64) -> f64 {
    let x = x.clamp(LLR_FLOOR, LLR_CLIP);
    ((x.exp() + 1.0) / (x.exp() - 1.0)).ln()
}

fn hard(llr: f64) -> u8 {
    (llr < 0.0) as u8
}

/// Sum-product syndrome decoding.
///
/// `llr[j] = ln P(bit_j = 0) - ln P(bit_j = 1)` from the channel; the
/// decoder searches for the word with `H · word = target` and stops as soon
/// as the hard decisions satisfy every check.
pub fn decode_syndrome(
    h: &ParityCheck,
    llr: &[f64],
    target: &[u8],
    max_iterations: usize,
) -> Result<DecodeOutcome> {
    if llr.len() != h.cols() {
        return Err(Error::LengthMismatch {
            expected: h.cols(),
            found: llr.len(),
        });
    }
    if target.len() != h.rows() {
        return Err(Error::LengthMismatch {
            expected: h.rows(),
            found: target.len(),
        });
    }
    let initial: Vec<u8> = llr.iter().map(|&l| hard(l)).collect();
    let satisfied = |bits: &[u8]| {
        (0..h.rows()).all(|r| h.row(r).iter().fold(0u8, |a, &c| a ^ bits[c as usize]) == target[r])
    };
    if satisfied(&initial) {
        return Ok(DecodeOutcome {
            bits: initial,
            iterations: 0,
            converged: true,
            flips: 0,
            post_processed: false,
        });
    }

    // Edges are numbered row by row; `col_edges[c]` lists the edges of
    // column c.
    let mut row_start = Vec::with_capacity(h.rows() + 1);
    let mut edge_col = Vec::with_capacity(h.edges());
    row_start.push(0);
    for r in 0..h.rows() {
        edge_col.extend(h.row(r).iter().map(|&c| c as usize));
        row_start.push(edge_col.len());
    }
    let mut col_edges: Vec<Vec<usize>> = vec![Vec::new(); h.cols()];
    for (e, &c) in edge_col.iter().enumerate() {
        col_edges[c].push(e);
    }

    let mut v2c: Vec<f64> = edge_col.iter().map(|&c| llr[c]).collect();
    let mut c2v = vec![0.0; edge_col.len()];
    let mut bits = initial.clone();
    for it in 1..=max_iterations {
        for r in 0..h.rows() {
            let edges = row_start[r]..row_start[r + 1];
            let mut sign = if target[r] == 1 { -1.0 } else { 1.0 };
            let mut sum = 0.0;
            for e in edges.clone() {
                if v2c[e] < 0.0 {
                    sign = -sign;
                }
                sum += phi(v2c[e].abs());
            }
            for e in edges {
                let s = if v2c[e] < 0.0 { -sign } else { sign };
                let rest = (sum - phi(v2c[e].abs())).max(0.0);
                c2v[e] = s * phi(rest);
            }
        }
        for c in 0..h.cols() {
            let total: f64 = llr[c] + col_edges[c].iter().map(|&e| c2v[e]).sum::<f64>();
            bits[c] = hard(total);
            for &e in &col_edges[c] {
                v2c[e] = (total - c2v[e]).clamp(-LLR_CLIP, LLR_CLIP);
            }
        }
        if satisfied(&bits) {
            // Short syndromes admit many consistent words; keep the cheaper
            // of the one found here and the ordered-statistics candidate.
            let mut post_processed = false;
            if h.rows() <= OSD_MAX_ROWS {
                if let Some(alt) = ordered_statistics(h, llr, target, &initial) {
                    if flip_cost(&alt, &initial, llr) < flip_cost(&bits, &initial, llr) {
                        bits = alt;
                        post_processed = true;
                    }
                }
            }
            let flips = bits.iter().zip(&initial).filter(|(a, b)| a != b).count();
            return Ok(DecodeOutcome {
                bits,
                iterations: it,
                converged: true,
                flips,
                post_processed,
            });
        }
    }
    if h.rows() <= OSD_MAX_ROWS {
        if let Some(bits) = ordered_statistics(h, llr, target, &initial) {
            let flips = bits.iter().zip(&initial).filter(|(a, b)| a != b).count();
            return Ok(DecodeOutcome {
                bits,
                iterations: max_iterations,
                converged: true,
                flips,
                post_processed: true,
            });
        }
    }
    let flips = bits.iter().zip(&initial).filter(|(a, b)| a != b).count();
    Ok(DecodeOutcome {
        bits,
        iterations: max_iterations,
        converged: false,
        flips,
        post_processed: false,
    })
}

/// `Σ|llr|` over the positions where `bits` departs from the hard decisions.
fn flip_cost(bits: &[u8], initial: &[u8], llr: &[f64]) -> f64 {
    bits.iter()
        .zip(initial)
        .zip(llr)
        .filter(|((a, b), _)| a != b)
        .map(|(_, l)| l.abs())
        .sum()
}

type Bits = Vec<u64>;

fn xor_into(a: &mut [u64], b: &[u64]) {
    for (x, y) in a.iter_mut().zip(b) {
        *x ^= y;
    }
}

fn flip_bit(a: &mut [u64], k: usize) {
    a[k / 64] ^= 1 << (k % 64);
}

fn set_bits(a: &[u64]) -> impl Iterator<Item = usize> + '_ {
    a.iter().enumerate().flat_map(|(w, &word)| {
        (0..64)
            .filter(move |b| word >> b & 1 == 1)
            .map(move |b| w * 64 + b)
    })
}

/// Order-2 ordered-statistics decoding.
///
/// The least reliable independent columns of `H` form a basis in which the
/// residual syndrome of the hard decisions is solved. Flipping up to two of
/// the next least reliable columns first gives further candidates; the one
/// with the smallest total `|llr|` over its flipped positions wins.
fn ordered_statistics(
    h: &ParityCheck,
    llr: &[f64],
    target: &[u8],
    initial: &[u8],
) -> Option<Vec<u8>> {
    let rows = h.rows();
    let words = rows.div_ceil(64);
    let column = |c: usize| {
        let mut v = vec![0u64; words];
        for &r in h.col(c) {
            flip_bit(&mut v, r as usize);
        }
        v
    };
    let mut residual = vec![0u64; words];
    for (r, &t) in target.iter().enumerate() {
        if h.row(r).iter().fold(t, |a, &c| a ^ initial[c as usize]) == 1 {
            flip_bit(&mut residual, r);
        }
    }
    let mut order: Vec<usize> = (0..h.cols()).collect();
    order.sort_by(|&a, &b| llr[a].abs().total_cmp(&llr[b].abs()).then(a.cmp(&b)));

    // basis[b]: reduced vector with highest set bit b, and the pivot columns
    // whose sum it is.
    let mut basis: Vec<Option<(Bits, Bits)>> = vec![None; rows];
    let mut pivots: Vec<usize> = Vec::new();
    let mut others: Vec<(usize, Bits)> = Vec::new();
    let reduce = |mut v: Bits, basis: &[Option<(Bits, Bits)>]| -> (Bits, Bits) {
        let mut combo = vec![0u64; words];
        for b in (0..rows).rev() {
            if v[b / 64] >> (b % 64) & 1 == 1 {
                match &basis[b] {
                    Some((bv, bc)) => {
                        xor_into(&mut v, bv);
                        xor_into(&mut combo, bc);
                    }
                    None => return (v, combo),
                }
            }
        }
        (v, combo)
    };
    for &c in &order {
        if pivots.len() == rows && others.len() >= OSD_SEARCH_WIDTH {
            break;
        }
        let (v, mut combo) = reduce(column(c), &basis);
        match set_bits(&v).last() {
            Some(lead) => {
                flip_bit(&mut combo, pivots.len());
                pivots.push(c);
                basis[lead] = Some((v, combo));
            }
            None if others.len() < OSD_SEARCH_WIDTH => others.push((c, combo)),
            None => {}
        }
    }
    let (left, start) = reduce(residual, &basis);
    if left.iter().any(|&w| w != 0) {
        return None;
    }
    let cost = |mask: &[u64]| set_bits(mask).map(|k| llr[pivots[k]].abs()).sum::<f64>();
    let mut best = (cost(&start), start.clone(), Vec::new());
    let mut consider = |extra: &[usize], mask: Bits| {
        let c = cost(&mask) + extra.iter().map(|&j| llr[j].abs()).sum::<f64>();
        if c < best.0 {
            best = (c, mask, extra.to_vec());
        }
    };
    for (i, (a, ca)) in others.iter().enumerate() {
        let mut m1 = start.clone();
        xor_into(&mut m1, ca);
        consider(&[*a], m1.clone());
        for (b, cb) in &others[i + 1..] {
            let mut m2 = m1.clone();
            xor_into(&mut m2, cb);
            consider(&[*a, *b], m2);
        }
    }
    let mut bits = initial.to_vec();
    for k in set_bits(&best.1) {
        bits[pivots[k]] ^= 1;
    }
    for &j in &best.2 {
        bits[j] ^= 1;
    }
    Some(bits)
}
