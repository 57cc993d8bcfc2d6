use mfmp::column::Column;
use mfmp::export::{profile_csv, ternary_export};
use mfmp::minreflux::{vreb_min_column, MinRefluxOptions, MinRefluxResult};
use mfmp::simulator::{
    check_products, equilibrium, min_reflux_by_bisection, pinch_compositions, simulate_column, stage_map_down, ternary,
    Criterion, OracleConfig, SimError,
};
use mfmp::specfile::bundled;

const EXAMPLES: [&str; 4] = ["ex1_scenario1", "ex1_scenario2", "ex2", "ex3_fixed"];

fn column(name: &str) -> Column {
    bundled(name).unwrap().column().unwrap()
}

fn minimum(col: &Column) -> MinRefluxResult {
    vreb_min_column(col.clone(), &MinRefluxOptions::default()).unwrap()
}

fn oracle(name: &str, stages: usize) -> f64 {
    let config = OracleConfig {
        stages_per_section: stages,
        ..OracleConfig::default()
    };
    min_reflux_by_bisection(&column(name), &config).unwrap().r_min
}

#[test]
fn pinch_vertices_are_stage_map_fixed_points() {
    for name in EXAMPLES {
        let col = column(name);
        let res = minimum(&col);
        for state in &res.evaluation.sections {
            let g = pinch_compositions(state, col.alphas()).unwrap();
            assert!(
                g.fixed_point_residual <= 1e-10,
                "{name} section {}: {}",
                g.section,
                g.fixed_point_residual
            );
            // vertices outside the composition simplex are fixed points of the
            // algebraic map but not of the physical stage map
            for z in g.vertices.iter().filter(|z| z.iter().all(|x| *x >= 0.0)) {
                let back = stage_map_down(z, col.alphas(), state.liquid(), state.vapor, &state.net_flows).unwrap();
                for (a, b) in z.iter().zip(&back) {
                    assert!((a - b).abs() <= 1e-10);
                }
            }
        }
    }
}

fn distance_to_line(p: (f64, f64), a: [f64; 2], b: [f64; 2]) -> f64 {
    let (dx, dy) = (b[0] - a[0], b[1] - a[1]);
    ((p.0 - a[0]) * dy - (p.1 - a[1]) * dx).abs() / dx.hypot(dy)
}

#[test]
fn scenario1_pinch_geometry() {
    let col = column("ex1_scenario1");
    let res = minimum(&col);
    let doc = ternary_export(&col, &res, None).unwrap();
    assert_eq!(doc.sections.len(), 3);
    assert_eq!(doc.sections[0].pinch_vertex, 1);
    // the controlling feed sits on an edge shared by the simplices above and below it
    let f1 = col.streams()[0].liquid_equivalent(col.alphas()).unwrap();
    let p = ternary(&f1).unwrap();
    let (top, bottom) = (&doc.sections[0].vertices, &doc.sections[1].vertices);
    assert!(distance_to_line(p, top[0].xy, top[1].xy) <= 1e-9);
    assert!(distance_to_line(p, bottom[0].xy, bottom[2].xy) <= 1e-9);
}

#[test]
fn profile_closes_and_stays_in_equilibrium() {
    for name in EXAMPLES {
        let col = column(name);
        let res = minimum(&col);
        let p = simulate_column(&col, 1.2 * res.r_min, 20).unwrap();
        for (x, y) in p.x.iter().zip(&p.y) {
            assert!((x.iter().sum::<f64>() - 1.0).abs() <= 1e-9);
            for (a, b) in equilibrium(x, col.alphas()).iter().zip(y) {
                assert!((a - b).abs() <= 1e-9, "{name}");
            }
        }
        let fed: Vec<f64> = (0..col.count())
            .map(|i| {
                col.streams()
                    .iter()
                    .filter(|s| s.flows[i] > 0.0)
                    .map(|s| s.flows[i])
                    .sum()
            })
            .collect();
        for i in 0..col.count() {
            let out: f64 = p.products.iter().map(|q| q.flows[i]).sum();
            assert!((out - fed[i]).abs() <= 1e-9 * col.total_feed(), "{name} component {i}");
        }
    }
}

#[test]
fn scenario1_bottoms_purity() {
    let col = column("ex1_scenario1");
    let hexane = col.components().names().iter().position(|n| n == "n-hexane").unwrap();
    let bottoms = |r: f64| {
        let p = simulate_column(&col, r, 50).unwrap();
        p.products.last().unwrap().composition[hexane]
    };
    let near = bottoms(2.145);
    assert!(near > 1e-4 && near < 5e-3, "{near}");
    assert!(bottoms(1.01 * 2.162) < 1e-5);
}

#[test]
fn one_stage_per_section_misses_the_specification() {
    let col = column("ex1_scenario1");
    match simulate_column(&col, 2.162, 1) {
        Ok(p) => assert!(!check_products(&col, &p, &Criterion::Sharpness, 5e-4).feasible),
        Err(e) => assert!(matches!(e, SimError::NotConverged { .. })),
    }
}

#[test]
fn oracle_agrees_with_the_shortcut() {
    for (name, want) in [("ex1_scenario1", 2.145), ("ex2", 2.668)] {
        let r = oracle(name, 50);
        assert!(((r - want) / want).abs() <= 0.02, "{name}: {r}");
        let shortcut = minimum(&column(name)).r_min;
        assert!(((r - shortcut) / shortcut).abs() <= 0.02, "{name}: {r} vs {shortcut}");
    }
}

#[test]
fn oracle_does_not_grow_with_stages() {
    let width = OracleConfig::default().width;
    for name in ["ex2", "ex3_fixed"] {
        let (few, many) = (oracle(name, 25), oracle(name, 50));
        assert!(many <= few + 2.0 * width, "{name}: {few} then {many}");
    }
}

#[test]
fn exports() {
    let col = column("ex1_scenario1");
    let res = minimum(&col);
    let p = simulate_column(&col, 2.5, 10).unwrap();
    let csv = profile_csv(&col, &p);
    let mut lines = csv.lines();
    let header = lines.next().unwrap();
    assert!(header.starts_with("stage,section,x_"));
    assert_eq!(header.split(',').count(), 2 + 2 * col.count());
    assert_eq!(lines.count(), p.x.len());
    let doc = ternary_export(&col, &res, Some(&p)).unwrap();
    assert_eq!(doc.profile.len(), p.x.len());
    let svg = doc.to_svg();
    assert!(svg.starts_with("<svg") && svg.trim_end().ends_with("</svg>"));
    assert_eq!(svg.matches("<polygon").count(), 1 + doc.sections.len());
    assert!(ternary_export(&column("ex2"), &minimum(&column("ex2")), None).is_ok());
    assert!(matches!(
        ternary_export(&column("ex3_fixed"), &minimum(&column("ex3_fixed")), None),
        Err(SimError::NotTernary(4))
    ));
}
