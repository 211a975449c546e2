use std::fs;
use std::path::Path;

use cvqkd::channel::ChannelModel;
use cvqkd::distill::transcript::{read_transcript, transcript_totals};
use cvqkd::distill::{key_length, run_distillation, DistillConfig, LeakageLedger};
use cvqkd::epanalysis::{
    rate_row, rate_table, reduced_joint_state, slice_error_rates, slice_rate, write_rate_csv,
};
use cvqkd::estimate::{
    estimated_rate_report, photon_cutoff_test, sample_homodyne, CutoffVerdict, ThetaPolicy,
    MIN_ESTIMATION_SAMPLES,
};
use cvqkd::mathcore::{Probability, RandomStream};
use cvqkd::slicing::{optimize_slices, OptimizeOptions, SliceSpec};
use serde_json::{json, Value};

use crate::config::{ErrorRates, Resolved};
use crate::error::CliError;
use crate::output::{key_file, split_transcript, stamp, transcript_file, OutDir};

/// Stream kind for tomography samples; distillation uses kinds 1 to 4.
const TOMOGRAPHY_STREAM: u64 = 5;

fn require_pure_attenuation(run: &Resolved, command: &str) -> Result<(), CliError> {
    if run.config.excess_noise != 0.0 {
        return Err(CliError::config(
            "excess_noise",
            format!("`{command}` models a pure attenuation channel; set excess_noise to 0"),
        ));
    }
    Ok(())
}

pub fn rates(run: &Resolved, out: &mut OutDir) -> Result<Value, CliError> {
    require_pure_attenuation(run, "rates")?;
    let rows = rate_table(&run.spec, &run.config.loss_db.values(), &run.modulation())?;
    let mut csv = Vec::new();
    write_rate_csv(&rows, &[stamp(run)], &mut csv)?;
    out.write("rates.csv", &csv)?;
    out.write_json("rates.json", run, json!({ "spec": run.spec, "rows": rows }))?;
    Ok(json!({ "rows": rows.len() }))
}

fn computed_error_rates(spec: &SliceSpec<f64>, loss_db: f64) -> Result<ErrorRates, CliError> {
    let state = reduced_joint_state(spec, &ChannelModel::from_loss_db(loss_db)?)?;
    Ok(slice_error_rates(&state))
}

pub fn distill(run: &Resolved, out: &mut OutDir) -> Result<Value, CliError> {
    let c = &run.config;
    let loss = run.single_loss()?;
    let rates = match run.error_rates() {
        Some(r) => r,
        None => computed_error_rates(&run.spec, loss)?,
    };
    let cfg = DistillConfig {
        block_length: c.block_length,
        frames: c.frames,
        beta: c.beta,
        margin: c.margin,
        verification_bits: c.verification_bits,
        max_iterations: c.max_iterations,
        seed: run.seed,
        noiseless: c.noiseless,
    };
    let result = run_distillation(
        &run.spec,
        &run.modulation(),
        &run.channel(loss),
        &rates,
        &cfg,
    )?;
    let rep = &result.report;

    // Key length the sized codes allow per frame, before any frame fails.
    let m = run.spec.m();
    let mut planned = LeakageLedger::new(m);
    planned.syndrome_bits = rep.code_rows.clone();
    planned.verification_bits = vec![c.verification_bits; m];
    let e_p: Vec<_> = rates.iter().map(|r| r.1).collect();
    let (planned_len, _) = key_length(c.block_length, &planned, &e_p, c.margin);
    let planned_rate = planned_len as f64 / c.block_length as f64;
    let table_rate: f64 = rates.iter().map(|&(b, p)| slice_rate(b, p).value()).sum();

    out.write("alice.key", &key_file(run, &result.alice_key))?;
    out.write("bob.key", &key_file(run, &result.bob_key))?;
    out.write("transcript.bin", &transcript_file(run, &result.records)?)?;
    let error_rates: Vec<[f64; 2]> = rates.iter().map(|&(b, p)| [b.value(), p.value()]).collect();
    out.write_json(
        "distill_report.json",
        run,
        json!({
            "loss_db": loss,
            "error_rates": error_rates,
            "table_rate": table_rate,
            "planned_key_rate_per_sample": planned_rate,
            "report": rep,
            "frames": result.frames,
        }),
    )?;
    let summary = json!({
        "frames": rep.frames,
        "accepted": rep.accepted,
        "frame_error_rate": rep.frame_error_rate,
        "key_bits": rep.key_bits,
        "key_rate_per_sample": rep.key_rate_per_sample,
        "planned_key_rate_per_sample": planned_rate,
        "keys_identical": rep.keys_identical,
    });
    if rep.accepted == 0 {
        return Err(CliError::Protocol(format!(
            "all {} frames failed reconciliation",
            rep.frames
        )));
    }
    if !rep.keys_identical {
        return Err(CliError::Protocol("accepted keys differ".into()));
    }
    Ok(summary)
}

pub fn tomography(run: &Resolved, out: &mut OutDir) -> Result<Value, CliError> {
    let c = &run.config;
    let loss = run.single_loss()?;
    let stream = RandomStream::new(run.seed, TOMOGRAPHY_STREAM);
    let samples = sample_homodyne(
        &run.modulation(),
        &run.channel(loss),
        &ThetaPolicy::UniformRandom,
        c.samples,
        &stream,
    )?;
    let epsilon = Probability::new(c.cutoff_epsilon).expect("validated");
    let cutoff = photon_cutoff_test(&samples, c.cutoff_n_max, epsilon);
    let estimate = if samples.len() >= MIN_ESTIMATION_SAMPLES {
        Some(estimated_rate_report(
            &samples,
            &run.spec,
            &run.modulation(),
        )?)
    } else {
        None
    };
    let slices: Vec<Value> = estimate
        .iter()
        .flat_map(|e| &e.slices)
        .map(|s| {
            let rate = slice_rate(Probability::clamped(s.e_b), Probability::clamped(s.e_p)).raw;
            json!({
                "e_p_interval": [s.e_p - 3.0 * s.sigma_total, s.e_p + 3.0 * s.sigma_total],
                "rate": rate,
            })
        })
        .collect();
    out.write_json(
        "tomography.json",
        run,
        json!({
            "loss_db": loss,
            "samples": samples.len(),
            "cutoff": cutoff,
            "estimate": estimate,
            "excess_noise_detected": estimate.as_ref().map(|e| e.excess_noise_detected()),
            "slice_summary": slices,
        }),
    )?;
    match cutoff.verdict {
        CutoffVerdict::Pass => Ok(json!({
            "verdict": cutoff.verdict,
            "eta_hat": estimate.as_ref().map(|e| e.eta_hat),
            "e_p": estimate.as_ref().map(|e| e.slices.iter().map(|s| s.e_p).collect::<Vec<_>>()),
        })),
        v => Err(CliError::Protocol(format!(
            "photon-number cutoff test {v:?}: {} of {} outcomes beyond {:.3}, upper bound {:.3e} vs epsilon {:.1e}",
            cutoff.exceedances, cutoff.n, cutoff.threshold, cutoff.upper_bound, cutoff.epsilon
        ))),
    }
}

fn total_rate(spec: &SliceSpec<f64>, channel: &ChannelModel<f64>) -> cvqkd::Result<f64> {
    let state = reduced_joint_state(spec, channel)?;
    Ok(slice_error_rates(&state)
        .into_iter()
        .map(|(b, p)| slice_rate(b, p).value())
        .sum())
}

pub fn optimize(run: &Resolved, out: &mut OutDir) -> Result<Value, CliError> {
    require_pure_attenuation(run, "optimize")?;
    let c = &run.config;
    let loss = run.single_loss()?;
    let channel = ChannelModel::from_loss_db(loss)?;
    let opts = OptimizeOptions {
        max_evaluations: c.max_evaluations,
        tolerance: c.tolerance,
        ..OptimizeOptions::default()
    };
    let result = optimize_slices(&run.spec, |s| total_rate(s, &channel), opts)?;
    let before = rate_row(&run.spec, loss, &run.modulation())?;
    let after = rate_row(&result.spec, loss, &run.modulation())?;
    let mut csv = Vec::new();
    write_rate_csv(
        &[before.clone(), after.clone()],
        &[stamp(run), "rows: initial spec, optimized spec".into()],
        &mut csv,
    )?;
    out.write("optimize.csv", &csv)?;
    let outcome = json!({
        "loss_db": loss,
        "spec": result.spec,
        "initial_spec": run.spec,
        "objective": result.objective,
        "initial_objective": result.initial_objective,
        "evaluations": result.evaluations,
        "converged": result.converged,
        "budget_exhausted": result.budget_exhausted,
        "symmetric": result.symmetric,
        "before": before,
        "after": after,
    });
    out.write_json("optimized_spec.json", run, &outcome)?;
    Ok(json!({
        "before_total_rate": result.initial_objective,
        "after_total_rate": result.objective,
        "evaluations": result.evaluations,
        "budget_exhausted": result.budget_exhausted,
    }))
}

/// Recomputes leakage totals from a transcript, optionally checking them
/// against a distillation report.
pub fn verify_transcript(path: &Path, report: Option<&Path>) -> Result<Value, CliError> {
    let data =
        fs::read(path).map_err(|e| CliError::config_file(format!("{}: {e}", path.display())))?;
    let (header, body) = split_transcript(&data);
    let records = read_transcript(body)
        .map_err(|e| CliError::config_file(format!("{}: {e}", path.display())))?;
    let totals = transcript_totals(&records);
    let mut summary = json!({ "header": header, "totals": totals });
    let Some(report) = report else {
        return Ok(summary);
    };
    let text = fs::read_to_string(report)
        .map_err(|e| CliError::config_file(format!("{}: {e}", report.display())))?;
    let doc: Value = serde_json::from_str(&text)
        .map_err(|e| CliError::config_file(format!("{}: {e}", report.display())))?;
    let rep = &doc["report"];
    let ledger: LeakageLedger = serde_json::from_value(rep["leakage"].clone())
        .map_err(|e| CliError::config("report.leakage", format!("{}: {e}", report.display())))?;
    let frames = rep["frames"].as_u64().unwrap_or(u64::MAX) as usize;
    let expected = json!({
        "frames": frames,
        "syndrome_bits": ledger.syndrome_bits_total(),
        "verification_bits": ledger.verification_bits_total(),
    });
    let found = json!({
        "frames": totals.frames,
        "syndrome_bits": totals.syndrome_bits,
        "verification_bits": totals.verification_bits,
    });
    let matches = expected == found;
    summary["report_matches"] = json!(matches);
    if let (Some(h), Some(hash)) = (header.as_deref(), doc["config_hash"].as_str()) {
        summary["config_hash_matches"] = json!(h.contains(&format!("config={hash}")));
    }
    if !matches {
        return Err(CliError::Protocol(format!(
            "transcript totals {found} do not match the report ledger {expected}"
        )));
    }
    Ok(summary)
}
