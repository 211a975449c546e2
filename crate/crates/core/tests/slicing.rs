use cvqkd::channel::{sample_pair, ChannelModel, ModulationSpec};
use cvqkd::epanalysis::{reduced_joint_state, slice_error_rates, slice_rate};
use cvqkd::mathcore::stats::{correlation, ks_uniform_p_value};
use cvqkd::mathcore::{binary_entropy, Probability, RandomStream};
use cvqkd::slicing::{
    classical_bit_error_rates, common_bit_rate_from, default_equiprobable_spec, optimize_slices,
    OptimizeOptions, SliceSpec,
};
use cvqkd_oracles::{monte_carlo_bit_errors, SliceModel};
use proptest::prelude::*;

const GRID_DB: [f64; 5] = [0.0, 0.4, 0.7, 1.0, 1.4];
const MC_SAMPLES: usize = 10_000_000;

#[test]
fn bit_errors_agree_with_monte_carlo_on_every_row() {
    let spec = default_equiprobable_spec(2, 31.0).unwrap();
    for (k, &db) in GRID_DB.iter().enumerate() {
        let ch = ChannelModel::from_loss_db(db).unwrap();
        let e = classical_bit_error_rates(&spec, &ch).unwrap();
        let mc = monte_carlo_bit_errors(
            &SliceModel::equiprobable(2, 31.0, ch.transmittance),
            MC_SAMPLES,
            100 + k as u64,
        );
        for i in 1..=2 {
            let (a, b, se) = (e[i - 1].value(), mc.rate(i), mc.standard_error(i));
            assert!(
                (a - b).abs() <= 4.0 * se,
                "{db} dB slice {i}: integral {a}, Monte Carlo {b} ± {se}"
            );
        }
    }
}

#[test]
fn sign_slice_has_the_fewest_errors() {
    let spec = default_equiprobable_spec(2, 31.0).unwrap();
    for &db in &GRID_DB {
        let e = classical_bit_error_rates(&spec, &ChannelModel::from_loss_db(db).unwrap()).unwrap();
        assert!(e[1].value() <= e[0].value(), "{db} dB");
    }
}

#[test]
fn common_bit_rate_composes_entropies() {
    let spec = default_equiprobable_spec(2, 31.0).unwrap();
    let p = |v: f64| Probability::new(v).unwrap();
    assert_eq!(common_bit_rate_from(&spec, &[p(0.0), p(0.0)]), 2.0);
    let r: f64 = common_bit_rate_from(&spec, &[p(0.0311), p(4.01e-5)]);
    assert!((r - 1.799).abs() < 2e-3, "{r}");
    let one = default_equiprobable_spec(1, 31.0).unwrap();
    assert_eq!(common_bit_rate_from(&one, &[p(0.0)]), 1.0);
    let direct = 2.0 - binary_entropy(p(0.0311)) - binary_entropy(p(4.01e-5));
    assert!((r - direct).abs() < 1e-12);
}

#[test]
fn roundtrip_on_ten_thousand_points() {
    let spec = default_equiprobable_spec(2, 31.0).unwrap();
    let mut rs = RandomStream::new(3, 0);
    for _ in 0..10_000 {
        let x = rs.normal(0.0, spec.sd());
        let back = spec.invert(&spec.decompose(x)).unwrap();
        assert!(
            (back.x - x).abs() <= 1e-9 * x.abs().max(1.0),
            "{x} -> {}",
            back.x
        );
    }
}

#[test]
fn sbar_is_uniform_and_independent_of_the_bits() {
    let spec = default_equiprobable_spec(2, 31.0).unwrap();
    let m = ModulationSpec::new(31.0).unwrap();
    let ch = ChannelModel::from_loss_db(0.7).unwrap();
    let pairs = sample_pair(&m, &ch, &mut RandomStream::new(4, 0), 100_000);
    let d: Vec<_> = pairs.iter().map(|&(x, _)| spec.decompose(x)).collect();
    let sbar: Vec<f64> = d.iter().map(|d| d.sbar).collect();
    assert!(ks_uniform_p_value(&sbar) > 0.01);
    let bound = 3.0 / (sbar.len() as f64).sqrt();
    for i in 1..=2 {
        let bits: Vec<f64> = d.iter().map(|d| d.bit(i) as f64).collect();
        let r = correlation(&sbar, &bits);
        assert!(r.abs() < bound, "slice {i}: {r}");
    }
}

fn total_rate(spec: &SliceSpec<f64>, ch: &ChannelModel<f64>) -> cvqkd::Result<f64> {
    let state = reduced_joint_state(spec, ch)?;
    Ok(slice_error_rates(&state)
        .into_iter()
        .map(|(b, p)| slice_rate(b, p).value())
        .sum())
}

#[test]
fn optimiser_does_not_lose_to_the_default_spec() {
    let spec = default_equiprobable_spec(2, 31.0).unwrap();
    let ch = ChannelModel::from_loss_db(0.7).unwrap();
    let out = optimize_slices(&spec, |s| total_rate(s, &ch), OptimizeOptions::default()).unwrap();
    assert!(out.objective >= out.initial_objective - 1e-9);
    assert!(out.objective >= 0.0638, "{}", out.objective);
    assert!(out.evaluations <= 200);
    assert!((total_rate(&out.spec, &ch).unwrap() - out.objective).abs() < 1e-12);
}

#[test]
fn far_upper_tail_roundtrip_is_limited_by_sbar_resolution() {
    // Near the top of the last cell S̄ sits within a few ulps of 1, so the
    // roundtrip error grows like ulp(1)·p_c / density(x).
    let spec = default_equiprobable_spec(2, 31.0).unwrap();
    for z in [5.5f64, 6.0, 6.5, 7.0, 7.5] {
        let x = z * spec.sd();
        let back = spec.invert(&spec.decompose(x)).unwrap().x;
        let density = (-0.5 * z * z).exp() / (std::f64::consts::TAU.sqrt() * spec.sd());
        let bound = 4.0 * f64::EPSILON * spec.cell_probability(3) / density;
        assert!(
            (back - x).abs() <= bound.max(1e-9),
            "z={z}: {} > {bound}",
            (back - x).abs()
        );
        let low = spec.invert(&spec.decompose(-x)).unwrap().x;
        assert!((low + x).abs() <= 1e-9 * x, "lower tail z={z}");
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn decompose_invert_roundtrip(m in 1usize..=4, v in 0.5f64..100.0, z in -5.0f64..5.0) {
        let spec = default_equiprobable_spec(m, v).unwrap();
        let x = z * v.sqrt();
        let d = spec.decompose(x);
        prop_assert!((0.0..=1.0).contains(&d.sbar));
        let back = spec.invert(&d).unwrap();
        prop_assert!(!back.clamped);
        prop_assert!((back.x - x).abs() <= 1e-9 * x.abs().max(1.0));
    }

    #[test]
    fn invert_decompose_roundtrip(cell in 0usize..4, sbar in 0.001f64..0.999) {
        let spec = default_equiprobable_spec(2, 31.0).unwrap();
        let bits = [(cell & 1) as u8, (cell >> 1) as u8];
        let d = cvqkd::slicing::SymbolDecomposition::from_bits(&bits, sbar).unwrap();
        let x = spec.invert(&d).unwrap().x;
        let again = spec.decompose(x);
        prop_assert_eq!(again.cell, cell);
        prop_assert!((again.sbar - sbar).abs() < 1e-9);
    }
}
