use approx::assert_relative_eq;
use proptest::prelude::*;

use mfmp::column::{Stream, StreamKind};
use mfmp::roots::{
    characteristic, classify_and_indicators, solve_characteristic, solve_stream_roots, solve_stream_roots_full,
    Location, RootError,
};

/// Ascending volatilities with alpha_1 = 1 and a random net-flow vector in
/// canonical sign order: `h` negative, then zeros up to `l - 1`, then positive.
fn section() -> impl Strategy<Value = (Vec<f64>, Vec<f64>, usize, usize, f64)> {
    (2usize..=6).prop_flat_map(|c| {
        (
            prop::collection::vec(0.05f64..3.0, c - 1),
            prop::collection::vec(0.1f64..50.0, c),
            (0..=c).prop_flat_map(move |h| (Just(h), (h + 1)..=(c + 1))),
            0.1f64..100.0,
        )
            .prop_map(move |(steps, mags, (h, l), liquid)| {
                let mut alphas = vec![1.0];
                for s in steps {
                    alphas.push(alphas[alphas.len() - 1] + s);
                }
                let d: Vec<f64> = (1..=c)
                    .map(|i| {
                        if i <= h {
                            -mags[i - 1]
                        } else if i < l {
                            0.0
                        } else {
                            mags[i - 1]
                        }
                    })
                    .collect();
                (alphas, d, h, l, liquid)
            })
    })
}

fn interval_of(alphas: &[f64], g: f64) -> (f64, f64) {
    let c = alphas.len();
    let k = alphas.iter().filter(|a| **a < g).count();
    let lo = if k == 0 { 0.0 } else { alphas[k - 1] };
    let hi = if k == c { f64::INFINITY } else { alphas[k] };
    (lo, hi)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn roots_interlace_by_sign_pattern((alphas, d, h, l, liquid) in section()) {
        let c = alphas.len();
        prop_assume!(d.iter().any(|x| *x != 0.0));
        let v = d.iter().sum::<f64>() + liquid;
        prop_assume!(v > 0.0);
        let rs = match solve_characteristic(&d, v, &alphas) {
            Ok(rs) => rs,
            // the negative/positive pair may have no real roots
            Err(RootError::BracketFailure { .. }) if h >= 1 && l <= c => return Ok(()),
            Err(e) => return Err(TestCaseError::fail(format!("{e}"))),
        };
        let g = rs.values();
        prop_assert_eq!(g.len(), c);
        prop_assert!(g.windows(2).all(|w| w[0] <= w[1]));
        let alpha = |i: usize| if i == 0 { 0.0 } else if i > c { f64::INFINITY } else { alphas[i - 1] };
        // zero components are pinned at their volatility
        let pinned: Vec<f64> = g.iter().zip(rs.pinned()).filter(|(_, p)| **p).map(|(g, _)| *g).collect();
        let zeros: Vec<f64> = (1..=c).filter(|&i| d[i - 1] == 0.0).map(alpha).collect();
        prop_assert_eq!(pinned, zeros);
        // solved roots in ascending interval order; zero blocks at either end
        // of the volatility range are dropped, which widens the pinch interval,
        // and zero terms between the last negative and first positive flow
        // have no pole, so that pair shares (alpha_h, alpha_l)
        let mixed = h >= 1 && l <= c;
        let mut expected: Vec<(f64, f64)> = Vec::new();
        for i in 1..=h {
            let hi = if i == h && l == c + 1 {
                f64::INFINITY
            } else if i == h && mixed {
                alpha(l)
            } else {
                alpha(i + 1)
            };
            expected.push((alpha(i), hi));
        }
        for i in l..=c {
            let lo = if i == l && h == 0 {
                0.0
            } else if i == l && mixed {
                alpha(h)
            } else {
                alpha(i - 1)
            };
            expected.push((lo, alpha(i)));
        }
        let solved: Vec<f64> = g.iter().zip(rs.pinned()).filter(|(_, p)| !**p).map(|(g, _)| *g).collect();
        prop_assert_eq!(solved.len(), expected.len());
        for (r, (lo, hi)) in solved.iter().zip(&expected) {
            prop_assert!(r > lo && r < hi, "root {} outside ({}, {})", r, lo, hi);
            let res = characteristic(&d, &alphas, *r) - v;
            prop_assert!(res.abs() <= 1e-8 * v, "residual {}", res);
        }
        let ind = classify_and_indicators(&rs, c);
        prop_assert_eq!(ind.mu.iter().map(|m| *m as usize).sum::<usize>(), 1);
        prop_assert_eq!(*ind.k.last().unwrap(), 1);
        prop_assert!(ind.k.windows(2).all(|w| w[0] <= w[1]));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn solved_roots_are_monotone_in_vapor((alphas, d, h, l, liquid) in section()) {
        prop_assume!(d.iter().any(|x| *x != 0.0));
        let v0 = d.iter().sum::<f64>() + liquid;
        prop_assume!(v0 > 0.0);
        let vs = [v0, v0 * 1.01, v0 * 1.02];
        let sets: Vec<_> = vs.iter().map(|v| solve_characteristic(&d, *v, &alphas)).collect();
        if sets.iter().any(|s| s.is_err()) {
            prop_assume!(h >= 1 && l <= alphas.len());
            return Ok(());
        }
        let sets: Vec<_> = sets.into_iter().map(|s| s.unwrap()).collect();
        for r in 0..alphas.len() {
            if sets[0].pinned()[r] || sets[0].locations()[r] != sets[2].locations()[r] {
                continue;
            }
            let a = sets[1].values()[r] - sets[0].values()[r];
            let b = sets[2].values()[r] - sets[1].values()[r];
            prop_assert!(a != 0.0 && a.signum() == b.signum(), "root {} not monotone: {} then {}", r, a, b);
        }
    }

    #[test]
    fn liquid_and_full_stream_forms_agree(
        liquid in prop::collection::vec(0.0f64..40.0, 4),
        frac in 0.05f64..0.95,
    ) {
        let alphas = [1.0, 2.3, 5.361, 12.332];
        prop_assume!(liquid.iter().filter(|x| **x > 0.5).count() >= 2);
        let s: f64 = liquid.iter().zip(&alphas).map(|(l, a)| l * a).sum();
        let total: f64 = liquid.iter().sum();
        // vapor in equilibrium with the liquid, frac of the liquid total
        let vapor: Vec<f64> = liquid.iter().zip(&alphas).map(|(l, a)| a * l / s * frac * total).collect();
        let stream = Stream::two_phase("F", StreamKind::Feed, &liquid, &vapor);
        let lf = solve_stream_roots(&stream, &alphas).unwrap();
        let ff = solve_stream_roots_full(&stream, &alphas).unwrap();
        for (j, r) in &lf.rho {
            prop_assert!(((r - ff.rho[j]) / r).abs() <= 1e-9, "rho_{}: {} vs {}", j, r, ff.rho[j]);
        }
    }
}

#[test]
fn figure_two_sections() {
    let alphas = [1.0, 2.0, 3.0, 4.0, 5.0];
    let top = solve_characteristic(&[-0.4, 0.1, 0.2, 0.3, 0.2], 8.0, &alphas).unwrap();
    assert_eq!(top.pinch_interval(), 2);
    let p = top.pinch_root();
    assert!(p > 1.0 && p < 2.0);
    let bot = solve_characteristic(&[-0.5, -0.4, -0.3, 0.2, 0.1], 8.0, &alphas).unwrap();
    assert_eq!(bot.pinch_interval(), 4);
    let p = bot.pinch_root();
    assert!(p > 3.0 && p < 4.0);
}

#[test]
fn single_term_closed_form() {
    let alphas = [1.0, 2.0, 3.0];
    let (dc, v) = (2.0, 8.0);
    let rs = solve_characteristic(&[0.0, 0.0, dc], v, &alphas).unwrap();
    assert_eq!(rs.values()[0], 1.0);
    assert_eq!(rs.values()[1], 2.0);
    assert_relative_eq!(rs.values()[2], 3.0 * (1.0 - dc / v), max_relative = 1e-12);
    assert_eq!(rs.locations()[2], Location::Interval(3));
}

#[test]
fn example3_stream_roots() {
    let alphas = [1.0, 2.3, 5.361, 12.332];
    let f1 = Stream::vapor_feed("F1", &[0.0, 40.0, 30.0, 30.0]);
    let r = solve_stream_roots(&f1, &alphas).unwrap();
    assert_eq!(r.rho.keys().copied().collect::<Vec<_>>(), vec![2, 3]);
    for (j, rho) in &r.rho {
        let (lo, hi) = interval_of(&alphas, *rho);
        assert_eq!((lo, hi), (alphas[j - 1], alphas[*j]));
    }
}
