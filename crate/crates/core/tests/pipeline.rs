use proptest::prelude::*;
use rabi_stark::analytic;
use rabi_stark::observables::analyze;
use rabi_stark::sweep::{
    build_collapse, detect_boundaries, run_sweep, AxisSpec, BoundaryKind, BoundaryOptions,
    CollapseLaw, GridSpec, Param, ReducedParams,
};
use rabi_stark::table::{self, Table, Value, ANALYSIS_COLUMNS};
use rabi_stark::ModelParams;

fn params(omega: f64, g: f64, lambda: f64, chi: f64) -> ModelParams {
    ModelParams::scaled(omega, g, lambda, chi).unwrap()
}

#[test]
fn topology_is_symmetric_under_lambda_sign() {
    for (lambda, g) in [(1.1, 2.6), (2.0, 2.6), (2.0, 3.3)] {
        let a = analyze(&params(0.5, g, lambda, 0.1), 1e-10).unwrap();
        let b = analyze(&params(0.5, g, -lambda, 0.1), 1e-10).unwrap();
        assert_eq!((a.parity, a.n_z), (b.parity, b.n_z));
        assert!((a.e0 - b.e0).abs() < 1e-10);
        match (a.zeta, b.zeta) {
            (Some(x), Some(y)) => assert!((x - y).abs() < 1e-3, "{x} {y}"),
            other => panic!("zeta missing: {other:?}"),
        }
    }
}

#[test]
fn energy_parts_rebuild_the_ground_energy() {
    for (w, g, l, c) in [
        (0.5, 3.355, 0.538, -0.3),
        (0.1, 1.5, 0.7, 0.4),
        (1.0, 0.8, 0.0, -0.6),
    ] {
        let a = analyze(&params(w, g, l, c), 1e-10).unwrap();
        let e = a.energy_parts;
        let sum =
            e.e_omega + e.e_gy + e.e_p2 + e.e_x2 + e.e_stark_offset + e.e_kinetic + e.e_potential;
        assert!((sum - e.total).abs() < 1e-12);
        assert!((e.total - a.e0).abs() < 1e-5);
    }
}

#[test]
fn sweep_serializes_one_row_per_cell() {
    let spec = GridSpec {
        x_axis: AxisSpec::new(Param::G, 1.0, 3.0, 6),
        y_axis: AxisSpec::new(Param::Lambda, 0.0, 0.4, 3),
        fixed: ReducedParams {
            omega: 0.5,
            g: 0.0,
            lambda: 0.0,
            chi: 0.2,
        },
        tol: 1e-10,
    };
    let d = run_sweep(&spec, 2).unwrap();
    let t = table::sweep_table(d.cells.iter().map(|c| (spec.point(c.ix, c.iy), c)));
    assert_eq!(t.rows.len(), 18);
    let e0 = t.column("E0").unwrap();
    let g = t.column("g").unwrap();
    for (row, cell) in t.rows.iter().zip(&d.cells) {
        assert_eq!(row.len(), 6 + ANALYSIS_COLUMNS.len() + 1);
        assert_eq!(row[g], Value::Float(cell.x));
        assert_eq!(row[e0], Value::Float(cell.analysis.as_ref().unwrap().e0));
    }
    let back = Table::from_json(&t.to_json()).unwrap();
    assert_eq!(back, t);

    let d = detect_boundaries(d, &BoundaryOptions::default()).unwrap();
    let flips: Vec<_> = d.boundaries_of(BoundaryKind::ParityFlip).collect();
    assert!(!flips.is_empty());
    let lines = table::boundary_table(&d.boundaries, &d.junctions, "g", "lambda");
    let vertices: usize = d.boundaries.iter().map(|b| b.points.len()).sum();
    assert_eq!(lines.rows.len(), vertices + d.junctions.len());
}

#[test]
fn parity_flip_matches_exact_crossing() {
    let (lambda, chi) = (0.4, 0.2);
    let spec = GridSpec {
        x_axis: AxisSpec::new(Param::G, 1.6, 2.2, 7),
        y_axis: AxisSpec::new(Param::Lambda, 0.3, 0.5, 3),
        fixed: ReducedParams {
            omega: 0.5,
            g: 0.0,
            lambda: 0.0,
            chi,
        },
        tol: 1e-10,
    };
    let opts = BoundaryOptions {
        kinds: vec![BoundaryKind::ParityFlip],
        ..Default::default()
    };
    let d = detect_boundaries(run_sweep(&spec, 1).unwrap(), &opts).unwrap();
    let g = d
        .boundaries_of(BoundaryKind::ParityFlip)
        .flat_map(|b| b.points.iter())
        .filter(|p| (p[1] - lambda).abs() < 1e-9)
        .map(|p| p[0])
        .fold(f64::INFINITY, f64::min);
    let exact = analytic::g_t1e(lambda, chi).unwrap();
    assert!((g - exact).abs() / exact < 1e-4, "{g} vs {exact}");
}

#[test]
fn collapse_table_layout() {
    let d = build_collapse(
        CollapseLaw::Sx,
        &[(0.5, 0.4), (1.0, 0.4)],
        (1.05, 2.0),
        4,
        0.5,
        1e-10,
        1,
    )
    .unwrap();
    let t = table::collapse_table(&d);
    assert_eq!(t.rows.len(), 8);
    assert_eq!(t.meta["law"], "sx");
    assert!(t.meta["discontinuities"].contains("0.5:0.4="));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn jc_exact_solution_is_the_numerical_ground_state(
        w in 0.05f64..1.5, g in 0.0f64..4.0, chi in -0.9f64..0.9,
    ) {
        let p = params(w, g, 0.0, chi);
        let a = analyze(&p, 1e-11).unwrap();
        let exact = analytic::jc_ground_energy(&p, None);
        prop_assert!((a.e0 - exact.energy).abs() < 1e-8);
    }

    #[test]
    fn quadrature_sum_tracks_photon_number(
        w in 0.1f64..1.5, g in 0.0f64..3.5, l in -1.5f64..1.5, chi in -0.8f64..0.8,
    ) {
        let a = analyze(&params(w, g, l, chi), 1e-10).unwrap();
        prop_assert!((a.mean_x2 + a.mean_p2 - 2.0 * a.mean_n - 1.0).abs() < 1e-8);
        prop_assert!(a.mean_sx.abs() <= 1.0 + 1e-12);
        prop_assert!(a.gap >= 0.0);
    }
}
