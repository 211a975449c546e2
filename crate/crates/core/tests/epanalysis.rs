use cvqkd::channel::{ChannelModel, ModulationSpec};
use cvqkd::epanalysis::{
    bit_error_rate, pair_marginal, rate_table, reduced_joint_state, slice_error_rates,
    write_rate_csv, RateRow,
};
use cvqkd::slicing::{classical_bit_error_rates, default_equiprobable_spec};
use cvqkd_oracles::{grid_joint_state, SliceModel};

const GRID_DB: [f64; 5] = [0.0, 0.4, 0.7, 1.0, 1.4];

fn table() -> Vec<RateRow<f64>> {
    let spec = default_equiprobable_spec(2, 31.0).unwrap();
    rate_table(&spec, &GRID_DB, &ModulationSpec::new(31.0).unwrap()).unwrap()
}

#[test]
fn matches_the_grid_discretisation_oracle() {
    let spec = default_equiprobable_spec(2, 31.0).unwrap();
    for db in [0.0, 0.7] {
        let ch = ChannelModel::from_loss_db(db).unwrap();
        let state = reduced_joint_state(&spec, &ch).unwrap();
        let oracle = grid_joint_state(
            &SliceModel::equiprobable(2, 31.0, ch.transmittance),
            2000,
            4000,
        );
        let worst = state
            .as_slice()
            .iter()
            .zip(&oracle)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        assert!(worst <= 1e-3, "{db} dB: max element difference {worst}");
    }
}

#[test]
fn states_are_normalised_symmetric_and_positive() {
    let spec = default_equiprobable_spec(2, 31.0).unwrap();
    for &db in &GRID_DB {
        let state = reduced_joint_state(&spec, &ChannelModel::from_loss_db(db).unwrap()).unwrap();
        assert!(
            (state.trace() - 1.0).abs() < 1e-6,
            "{db} dB trace {}",
            state.trace()
        );
        assert_eq!(state.max_asymmetry(), 0.0);
        assert!(state.min_eigenvalue() >= -1e-8, "{db} dB");
        for i in 1..=2 {
            let rho = pair_marginal(&state, i).unwrap();
            let tr: f64 = (0..4).map(|k| rho[k][k]).sum();
            assert!((tr - 1.0).abs() < 1e-6);
            let m = nalgebra::Matrix4::from_fn(|r, c| rho[r][c]);
            let min = m.symmetric_eigen().eigenvalues.min();
            assert!(min >= -1e-8, "{db} dB slice {i}: {min}");
        }
    }
}

#[test]
fn density_matrix_and_classical_bit_errors_agree() {
    let spec = default_equiprobable_spec(2, 31.0).unwrap();
    for &db in &GRID_DB {
        let ch = ChannelModel::from_loss_db(db).unwrap();
        let state = reduced_joint_state(&spec, &ch).unwrap();
        let classical = classical_bit_error_rates(&spec, &ch).unwrap();
        for i in 1..=2 {
            let dm = bit_error_rate(&pair_marginal(&state, i).unwrap()).value();
            let cl = classical[i - 1].value();
            assert!((dm - cl).abs() <= 1e-4, "{db} dB slice {i}: {dm} vs {cl}");
        }
    }
}

#[test]
fn phase_errors_grow_with_loss_and_fastest_for_the_sign_slice() {
    let rows = table();
    for i in 0..2 {
        for w in rows.windows(2) {
            assert!(w[1].slices[i].e_p.value() >= w[0].slices[i].e_p.value());
        }
    }
    let d = |i: usize| rows[1].slices[i].e_p.value() - rows[0].slices[i].e_p.value();
    assert!(d(1) > d(0));
}

#[test]
fn slice_one_stops_after_point_seven_db() {
    for row in table() {
        let r1 = row.slices[0].rate.raw;
        if row.loss_db >= 1.0 {
            assert!(
                r1 <= 0.0 && !row.slices[0].rate.available(),
                "{} dB",
                row.loss_db
            );
        } else {
            assert!(r1 > 0.0, "{} dB", row.loss_db);
        }
    }
}

#[test]
fn rates_follow_their_own_error_rates() {
    for row in table() {
        let mut total = 0.0;
        for s in &row.slices {
            let h = |p: f64| {
                if p <= 0.0 {
                    0.0
                } else {
                    -p * p.log2() - (1.0 - p) * (1.0 - p).log2()
                }
            };
            assert!((s.rate.raw - (1.0 - h(s.e_b.value()) - h(s.e_p.value()))).abs() < 1e-9);
            total += s.rate.raw.max(0.0);
        }
        assert_eq!(row.total_rate, total);
    }
}

#[test]
fn sign_slice_phase_error_at_highest_loss() {
    let rows = table();
    assert!((rows[4].slices[1].e_p.value() - 0.456).abs() < 0.01);
}

#[test]
fn table_serialises_to_csv_and_json() {
    let rows = table();
    let mut buf = Vec::new();
    write_rate_csv(&rows, &["generated for a test".into()], &mut buf).unwrap();
    let text = String::from_utf8(buf).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("# generated for a test"));
    assert_eq!(
        lines.next(),
        Some("loss_db,e1_b,e1_p,R1,e2_b,e2_p,R2,R_total,I_xy,direct_rate,reverse_rate")
    );
    let r4: Vec<&str> = text.lines().nth(5).unwrap().split(',').collect();
    assert_eq!(r4[0], "1");
    assert_eq!(r4[3], "-");
    assert_ne!(r4[6], "-");
    let json = serde_json::to_string(&rows).unwrap();
    let back: Vec<RateRow<f64>> = serde_json::from_str(&json).unwrap();
    assert_eq!(back, rows);
}

#[test]
fn single_precision_tracks_double_precision() {
    let spec32 = default_equiprobable_spec(2, 31.0f32).unwrap();
    let spec64 = default_equiprobable_spec(2, 31.0).unwrap();
    for db in [0.0, 0.7] {
        let s32 =
            reduced_joint_state(&spec32, &ChannelModel::from_loss_db(db as f32).unwrap()).unwrap();
        let s64 = reduced_joint_state(&spec64, &ChannelModel::from_loss_db(db).unwrap()).unwrap();
        for (a, b) in slice_error_rates(&s32).iter().zip(slice_error_rates(&s64)) {
            assert!((a.1.value() as f64 - b.1.value()).abs() < 1e-4);
            assert!((a.0.value() as f64 - b.0.value()).abs() < 1e-4);
        }
    }
}
