use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::channel::{ChannelModel, ModulationSpec};
use crate::epanalysis::state::{reduced_joint_state, slice_error_rates};
use crate::error::{Error, Result};
use crate::mathcore::{binary_entropy, Probability};
use crate::rates::{asymptotic_rates, AsymptoticRateReport};
use crate::slicing::SliceSpec;
use crate::Real;

/// Placeholder written for rates that are not positive.
pub const UNAVAILABLE: &str = "-";

/// `1 - h(e_b) - h(e_p)`, keeping the raw (possibly negative) value.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SliceRate<T> {
    pub raw: T,
}

impl<T: Real> SliceRate<T> {
    /// EPR pairs per sample this slice contributes, `max(0, raw)`.
    pub fn value(&self) -> T {
        self.raw.max(T::zero())
    }

    pub fn available(&self) -> bool {
        self.raw > T::zero()
    }
}

pub fn slice_rate<T: Real>(e_b: Probability<T>, e_p: Probability<T>) -> SliceRate<T> {
    SliceRate {
        raw: T::one() - binary_entropy(e_b) - binary_entropy(e_p),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SliceRow<T> {
    pub e_b: Probability<T>,
    pub e_p: Probability<T>,
    pub rate: SliceRate<T>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateRow<T> {
    pub loss_db: T,
    pub slices: Vec<SliceRow<T>>,
    /// `Σ_i max(0, R_i)`.
    pub total_rate: T,
    pub purity: T,
    pub asymptotic: Option<AsymptoticRateReport<T>>,
}

impl<T: Real> RateRow<T> {
    pub fn from_error_rates(
        loss_db: T,
        errors: &[(Probability<T>, Probability<T>)],
        purity: T,
    ) -> Self {
        let slices: Vec<SliceRow<T>> = errors
            .iter()
            .map(|&(e_b, e_p)| SliceRow {
                e_b,
                e_p,
                rate: slice_rate(e_b, e_p),
            })
            .collect();
        let total_rate = slices.iter().map(|s| s.rate.value()).sum();
        RateRow {
            loss_db,
            slices,
            total_rate,
            purity,
            asymptotic: None,
        }
    }
}

/// One row of the two-slice table for a single channel.
pub fn rate_row<T: Real>(
    spec: &SliceSpec<T>,
    loss_db: T,
    modulation: &ModulationSpec<T>,
) -> Result<RateRow<T>> {
    check_modulation(spec, modulation)?;
    let channel = ChannelModel::from_loss_db(loss_db)?;
    let state = reduced_joint_state(spec, &channel)?;
    let mut row = RateRow::from_error_rates(loss_db, &slice_error_rates(&state), state.purity());
    row.asymptotic = Some(asymptotic_rates(modulation, &channel)?);
    Ok(row)
}

/// Error and EPR rates for each loss value, computed in parallel and
/// returned in input order.
pub fn rate_table<T: Real>(
    spec: &SliceSpec<T>,
    losses: &[T],
    modulation: &ModulationSpec<T>,
) -> Result<Vec<RateRow<T>>> {
    check_modulation(spec, modulation)?;
    losses
        .par_iter()
        .map(|&l| rate_row(spec, l, modulation))
        .collect::<Vec<_>>()
        .into_iter()
        .collect()
}

fn check_modulation<T: Real>(spec: &SliceSpec<T>, modulation: &ModulationSpec<T>) -> Result<()> {
    let (a, b) = (spec.variance(), modulation.variance);
    if (a - b).abs() > T::lit(1e-9) * a.abs().max(b.abs()) {
        return Err(Error::InvalidSpec(format!(
            "slice spec variance {a} differs from modulation variance {b}"
        )));
    }
    Ok(())
}

/// Column names for an `m`-slice table, in output order.
pub fn csv_header(m: usize, with_asymptotic: bool) -> Vec<String> {
    let mut h = vec!["loss_db".to_string()];
    for i in 1..=m {
        h.push(format!("e{i}_b"));
        h.push(format!("e{i}_p"));
        h.push(format!("R{i}"));
    }
    h.push("R_total".into());
    if with_asymptotic {
        h.extend(["I_xy", "direct_rate", "reverse_rate"].map(String::from));
    }
    h
}

/// Writes rows as CSV. `preamble` lines are emitted first, each prefixed
/// with `# `. Non-positive slice rates are written as `-`.
pub fn write_rate_csv<T: Real, W: Write>(
    rows: &[RateRow<T>],
    preamble: &[String],
    mut out: W,
) -> Result<()> {
    for line in preamble {
        writeln!(out, "# {line}")?;
    }
    let m = rows.first().map_or(0, |r| r.slices.len());
    let with_asymptotic = rows.iter().all(|r| r.asymptotic.is_some()) && !rows.is_empty();
    let mut w = csv::Writer::from_writer(out);
    w.write_record(csv_header(m, with_asymptotic))?;
    for row in rows {
        if row.slices.len() != m {
            return Err(Error::LengthMismatch {
                expected: m,
                found: row.slices.len(),
            });
        }
        let mut rec = vec![row.loss_db.to_string()];
        for s in &row.slices {
            rec.push(s.e_b.value().to_string());
            rec.push(s.e_p.value().to_string());
            rec.push(if s.rate.available() {
                s.rate.raw.to_string()
            } else {
                UNAVAILABLE.to_string()
            });
        }
        rec.push(row.total_rate.to_string());
        if let (true, Some(a)) = (with_asymptotic, &row.asymptotic) {
            rec.extend([a.i_xy, a.direct_rate, a.reverse_rate].map(|v| v.to_string()));
        }
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}
