use approx::assert_relative_eq;
use proptest::prelude::*;

use mfmp::column::{hypothetical_liquid, Column, ColumnError};
use mfmp::specfile::bundled;

fn column(name: &str) -> Column {
    bundled(name).unwrap().column().unwrap()
}

#[test]
fn bundled_examples_validate() {
    let s1 = column("ex1_scenario1");
    assert_eq!(s1.section_count(), 3);
    assert_eq!(s1.alphas(), &[1.0, 2.25, 5.1168]);
    let ex3 = column("ex3_fixed");
    assert_eq!(ex3.section_count(), 4);
    assert_eq!(ex3.alphas(), &[1.0, 2.3, 5.361, 12.332]);
    let ex2 = column("ex2");
    assert_eq!(
        ex2.streams().iter().map(|s| s.flows.clone()).find(|f| f[0] > 0.0),
        Some(vec![30.0, 40.0, 30.0])
    );
}

#[test]
fn excess_distillate_is_mass_balance_violation() {
    let mut spec = bundled("ex1_scenario1").unwrap();
    spec.distillate[0] = 60.0;
    let err = spec.column().unwrap_err();
    assert!(err.to_string().contains("mass balance"), "{err}");
}

#[test]
fn example2_net_flows() {
    let d = column("ex2").net_flows().to_vec();
    let expected = [
        [0.0, 6.0, 24.0],
        [0.0, 30.0, 30.0],
        [-30.0, -10.0, 0.0],
        [-20.0, 0.0, 0.0],
    ];
    for (k, e) in expected.iter().enumerate() {
        for i in 0..3 {
            assert_relative_eq!(d[k][i], e[i], epsilon = 1e-9);
        }
    }
}

#[test]
fn scenario1_second_section() {
    let d = column("ex1_scenario1").net_flows()[1].clone();
    for (a, b) in d.iter().zip([-10.0, -57.376, 19.852]) {
        assert_relative_eq!(*a, b, epsilon = 1e-3);
    }
}

#[test]
fn sections_differ_by_stream_flows() {
    for name in ["ex1_scenario1", "ex1_scenario2", "ex2", "ex3_fixed"] {
        let col = column(name);
        let d = col.net_flows();
        for (k, s) in col.streams().iter().enumerate() {
            for i in 0..col.count() {
                assert_eq!(d[k][i] - d[k + 1][i], s.flows[i], "{name} section {k} component {i}");
            }
        }
        let fed: Vec<f64> = (0..col.count())
            .map(|i| col.streams().iter().map(|s| s.flows[i]).sum())
            .collect();
        for i in 0..col.count() {
            let closure = fed[i] - d[0][i] + d[d.len() - 1][i];
            assert!(closure.abs() <= 1e-9 * col.total_feed(), "{name}: closure {closure}");
        }
    }
}

#[test]
fn single_feed_column_sections() {
    let mut spec = bundled("ex2").unwrap();
    spec.sidedraws.clear();
    spec.feeds[0].position = 1;
    spec.distillate = vec![30.0, 2.0, 0.0];
    spec.bottoms = None;
    let col = spec.column().unwrap();
    assert_eq!(col.section_count(), 2);
    assert_eq!(col.net_flows()[0], vec![0.0, 2.0, 30.0]);
    assert_eq!(col.net_flows()[1], vec![-30.0, -38.0, 0.0]);
    // a column without bottoms has an empty stripping section
    spec.distillate = spec.feeds[0].flows.clone();
    assert!(spec.column().is_err());
}

#[test]
fn vapor_propagation() {
    let s1 = column("ex1_scenario1");
    let v = s1.vapor_profile(2, 165.95).unwrap();
    assert!(v.iter().all(|x| (x - 165.95).abs() < 1e-12));
    assert!((s1.reflux_from_reboiler(165.95).unwrap() - 2.162).abs() <= 1e-3);
    let ex3 = column("ex3_fixed");
    let v = ex3.vapor_profile(3, 110.14).unwrap();
    assert_relative_eq!(v[0], 210.14, max_relative = 1e-12);
    for col in [s1, ex3, column("ex2")] {
        let d = col.distillate_total();
        let v = col.vapor_profile(0, 2.0 * d).unwrap();
        let last = col.section_count() - 1;
        assert_relative_eq!(col.reflux_from_reboiler(v[last]).unwrap(), 1.0, max_relative = 1e-12);
        let back = col.vapor_profile(last, v[last]).unwrap();
        assert_relative_eq!(back[0], 2.0 * d, max_relative = 1e-12);
    }
}

#[test]
fn hypothetical_liquid_cases() {
    assert_eq!(
        hypothetical_liquid(&[0.0, 0.0, 1.0], &[1.0, 2.0, 3.0]).unwrap(),
        vec![0.0, 0.0, 1.0]
    );
    let l = hypothetical_liquid(&[1.0, 1.0], &[1.0, 2.0]).unwrap();
    assert_relative_eq!(l[0], 2.0 / 3.0, max_relative = 1e-15);
    let alphas = [2.3, 5.361, 12.332];
    let l = hypothetical_liquid(&[40.0, 30.0, 30.0], &alphas).unwrap();
    let raw = [40.0 / 2.3, 30.0 / 5.361, 30.0 / 12.332];
    let t: f64 = raw.iter().sum();
    for (a, b) in l.iter().zip(raw) {
        assert_relative_eq!(*a, b / t, max_relative = 1e-14);
    }
    assert_relative_eq!(l.iter().sum::<f64>(), 1.0, max_relative = 1e-15);
    assert_eq!(
        hypothetical_liquid(&[0.0, 0.0], &[1.0, 2.0]),
        Err(ColumnError::ZeroVapor)
    );
}

proptest! {
    #[test]
    fn hypothetical_liquid_is_scale_free(v in prop::collection::vec(0.01f64..100.0, 2..6), k in 0.01f64..100.0) {
        let alphas: Vec<f64> = (0..v.len()).map(|i| 1.0 + i as f64 * 0.7).collect();
        let a = hypothetical_liquid(&v, &alphas).unwrap();
        let scaled: Vec<f64> = v.iter().map(|x| x * k).collect();
        let b = hypothetical_liquid(&scaled, &alphas).unwrap();
        let again = hypothetical_liquid(&a, &vec![1.0; a.len()]).unwrap();
        for i in 0..a.len() {
            prop_assert!((a[i] - b[i]).abs() <= 1e-13);
            prop_assert!((a[i] - again[i]).abs() <= 1e-13);
        }
    }

    #[test]
    fn scaling_flows_scales_sections(lambda in 0.01f64..100.0) {
        for name in ["ex1_scenario1", "ex2", "ex3_fixed"] {
            let col = column(name);
            let scaled = col.scaled(lambda).unwrap();
            for (a, b) in col.net_flows().iter().flatten().zip(scaled.net_flows().iter().flatten()) {
                prop_assert!((a * lambda - b).abs() <= 1e-12 * (1.0 + b.abs()));
            }
            let last = col.section_count() - 1;
            let v = col.reboiler_from_reflux(2.5).unwrap();
            let vs = scaled.reboiler_from_reflux(2.5).unwrap();
            prop_assert!((v * lambda - vs).abs() <= 1e-10 * vs.abs());
            let r = scaled.reflux_from_reboiler(scaled.vapor_profile(last, vs).unwrap()[last]).unwrap();
            prop_assert!((r - 2.5).abs() <= 1e-10);
        }
    }
}
