use mfmp::column::Column;
use mfmp::feasibility::{ConstraintRecord, Family, FeasibilityOptions, FeasibilityReport, Status};
use mfmp::minreflux::{vreb_min_column, MinRefluxOptions, Prepared};
use mfmp::specfile::bundled;

fn prepared(name: &str) -> Prepared {
    Prepared::new(bundled(name).unwrap().column().unwrap()).unwrap()
}

fn report_at(prep: &Prepared, v_reb: f64) -> FeasibilityReport {
    let out = prep.check_at_reboiler(v_reb, &FeasibilityOptions::default()).unwrap();
    out.evaluation().expect("roots exist").report.clone()
}

fn v_reb_at(column: &Column, reflux: f64) -> f64 {
    column.reboiler_from_reflux(reflux).unwrap()
}

/// Enforced inequalities; the support records of absent sidedraw components
/// hold with zero slack by construction.
fn strict(c: &ConstraintRecord) -> bool {
    c.enforced && c.family != Family::SidedrawSupport
}

fn index_set(report: &FeasibilityReport, stream: &str) -> Vec<usize> {
    report
        .streams
        .iter()
        .find(|s| s.name == stream)
        .unwrap()
        .index_set
        .clone()
}

#[test]
fn scenario1_index_sets_and_binding() {
    let prep = prepared("ex1_scenario1");
    let r = report_at(&prep, 165.95);
    assert_eq!(index_set(&r, "F1"), vec![2, 3]);
    assert_eq!(index_set(&r, "F2"), vec![3]);
    let exact = vreb_min_column(prep.column().clone(), &MinRefluxOptions::default()).unwrap();
    let r = &exact.evaluation.report;
    assert!(r.feasible);
    let f1 = r.streams.iter().find(|s| s.name == "F1").unwrap();
    let binding: Vec<_> = f1.records.iter().filter(|c| c.status == Status::Binding).collect();
    assert!(binding.iter().any(|c| c.index == 3), "{binding:?}");
}

#[test]
fn scenario1_slack_around_minimum() {
    let prep = prepared("ex1_scenario1");
    let above = report_at(&prep, 180.0);
    let f1 = above.streams.iter().find(|s| s.name == "F1").unwrap();
    assert!(f1
        .records
        .iter()
        .filter(|c| strict(c))
        .all(|c| c.status == Status::Satisfied && c.slack > 0.0));
    assert!(above.feasible);
    // at 150 mol/s the second section has no real roots at all
    let out = prep.check_at_reboiler(150.0, &FeasibilityOptions::default()).unwrap();
    assert!(!out.is_feasible());
    let below = report_at(&prep, 165.95 * 0.999);
    assert!(!below.feasible);
    assert!(below.records().any(|c| c.violated()));
}

#[test]
fn example2_sidedraws() {
    let prep = prepared("ex2");
    let col = prep.column().clone();
    let exact = vreb_min_column(col.clone(), &MinRefluxOptions::default()).unwrap();
    let r = &exact.evaluation.report;
    assert_eq!(index_set(r, "S1"), vec![2]);
    assert_eq!(index_set(r, "F1"), vec![2, 3]);
    assert_eq!(index_set(r, "S2"), vec![2, 3]);
    // S1 has only rho_2, so gamma_3(top) = gamma_3(bottom) = rho_2 shows up
    // in the two profile constraints of index 3
    let s1 = r.streams.iter().find(|s| s.name == "S1").unwrap();
    let pair: Vec<_> = s1
        .records
        .iter()
        .filter(|c| c.index == 3 && c.status == Status::Binding)
        .collect();
    assert_eq!(pair.len(), 2, "{:?}", s1.records);
    assert_eq!(
        pair.iter().map(|c| c.family).collect::<Vec<_>>(),
        [Family::ProfileTopLower, Family::ProfileBottomLower]
    );

    let at3 = report_at(&prep, v_reb_at(&col, 3.0));
    assert!(at3.feasible);
    let s1 = at3.streams.iter().find(|s| s.name == "S1").unwrap();
    assert!(s1.records.iter().filter(|c| strict(c)).all(|c| c.slack > 0.0));

    let low = report_at(&prep, v_reb_at(&col, 2.533));
    assert!(low.records().any(|c| c.violated()
        && matches!(
            c.family,
            Family::ProfileTopLower | Family::ProfileBottomLower | Family::ProfileTopUpper | Family::ProfileBottomUpper
        )));
    let without = FeasibilityOptions {
        profile_constraints: false,
        ..FeasibilityOptions::default()
    };
    let out = prep.check_at_reboiler(v_reb_at(&col, 2.54), &without).unwrap();
    assert!(out.is_feasible());
    let at_min = report_at(&prep, v_reb_at(&col, 2.6935));
    assert!(at_min.feasible);
}

#[test]
fn feasible_at_twice_the_minimum() {
    for name in ["ex1_scenario1", "ex1_scenario2", "ex2", "ex3_fixed"] {
        let prep = prepared(name);
        let res = vreb_min_column(prep.column().clone(), &MinRefluxOptions::default()).unwrap();
        let r = report_at(&prep, 2.0 * res.v_reb_min);
        assert!(r.feasible, "{name}");
        assert!(r.records().filter(|c| strict(c)).all(|c| c.slack > 0.0), "{name}");
    }
}

#[test]
fn feed_slacks_grow_with_duty() {
    let prep = prepared("ex1_scenario1");
    let res = vreb_min_column(prep.column().clone(), &MinRefluxOptions::default()).unwrap();
    let duties: Vec<f64> = (0..20).map(|k| res.v_reb_min * (1.0 + 0.05 * k as f64)).collect();
    let reports: Vec<_> = duties.iter().map(|v| report_at(&prep, *v)).collect();
    let intervals = |r: &FeasibilityReport| r.streams.iter().map(|s| s.index_set.clone()).collect::<Vec<_>>();
    for w in reports.windows(2) {
        if intervals(&w[0]) != intervals(&w[1]) {
            continue;
        }
        for (a, b) in w[0].records().zip(w[1].records()) {
            if matches!(a.family, Family::FeedTop | Family::FeedBottom) {
                assert_eq!(a.id, b.id);
                assert!(b.slack >= a.slack - 1e-12, "{}: {} -> {}", a.id, a.slack, b.slack);
            }
        }
    }
}
