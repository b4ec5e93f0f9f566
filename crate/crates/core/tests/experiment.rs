use wiener_lab::experiment::*;
use wiener_lab::io::BoundaryFile;

#[test]
fn property_suite_passes_and_is_deterministic() {
    let sizes = SuiteSizes::small();
    let a = run_property_suite(0, &sizes, Fault::None);
    for e in &a.entries {
        assert!(e.pass, "{e:?}");
    }
    assert_eq!(a.exit_code(), 0);
    let b = run_property_suite(0, &sizes, Fault::None);
    assert_eq!(serde_json::to_string(&a).unwrap(), serde_json::to_string(&b).unwrap());
}

#[test]
fn negated_weights_fail_the_suite() {
    let ledger = run_property_suite(3, &SuiteSizes::small(), Fault::NegateWeights);
    assert!(!ledger.pass);
    assert_eq!(ledger.exit_code(), 2);
    let failed: Vec<&str> = ledger.entries.iter().filter(|e| !e.pass).map(|e| e.check.as_str()).collect();
    assert!(failed.contains(&"recursion-monotone"));
    assert!(failed.contains(&"recursion-product-bound"));
}

#[test]
fn constant_data_verifies_trivially() {
    let config = ExperimentConfig {
        boundary: BoundaryFile::Expr { expr: "0.25".into() },
        bench: wiener_lab::geometry::BenchParams {
            h: 1.0 / 16.0,
            half_extent: 1.0,
            ..Default::default()
        },
        solver: SolverConfig {
            dt: Some(0.05),
            ..Default::default()
        },
        t_o: 0.2,
        r_o: 0.5,
        scales: 3,
        ..Default::default()
    };
    let r = run_verification(&config).unwrap();
    assert!(r.failure.is_none(), "{:?}", r.failure);
    assert!(r.rows.iter().all(|row| row.measured < 1e-12));
    assert!(r.rows.iter().all(|row| row.bound > 0.0));
    assert!(r.pass);
}

#[test]
fn probe_off_the_boundary_is_rejected() {
    let config = ExperimentConfig {
        x_o: Some(vec![0.5, 0.5]),
        ..Default::default()
    };
    let err = run_verification(&config).unwrap_err();
    assert_eq!(err.exit_code(), 4);
}
