use dpw_core::monodromy::{newton_solve, residuals, MonodromyOptions, Solution, SolveOptions};
use dpw_core::suites::{two_rays, unit_chain};
use dpw_core::Error;

#[test]
fn state_survives_a_json_round_trip() {
    let sol = newton_solve(&two_rays(), 0.03, &SolveOptions::default()).unwrap();
    assert!(sol.residual <= 1e-9);
    let text = serde_json::to_string(&sol).unwrap();
    let back: Solution = serde_json::from_str(&text).unwrap();
    assert_eq!(serde_json::to_string(&back).unwrap(), text);
    let lay = back.layout().unwrap();
    let r = residuals(&lay, &back.unknowns, back.t, &MonodromyOptions::for_modes(back.modes)).unwrap();
    assert!(r.max_abs() <= 1e-8, "reloaded residual {:.3e}", r.max_abs());
}

#[test]
fn chain_at_time_zero_is_the_central_value() {
    let sol = newton_solve(&unit_chain(), 0.0, &SolveOptions::default()).unwrap();
    assert!(sol.distance_from_central <= 1e-12);
    assert!((sol.graph.edge_length(0) - 2.0).abs() <= 1e-12);
}

#[test]
fn solver_is_deterministic() {
    let a = newton_solve(&unit_chain(), 0.01, &SolveOptions::default()).unwrap();
    let b = newton_solve(&unit_chain(), 0.01, &SolveOptions::default()).unwrap();
    assert_eq!(serde_json::to_string(&a).unwrap(), serde_json::to_string(&b).unwrap());
}

#[test]
fn unbalanced_input_is_refused() {
    let mut g = unit_chain();
    g.rays[0].weight = 1.5;
    assert!(matches!(newton_solve(&g, 0.01, &SolveOptions::default()), Err(Error::NotBalanced(_))));
}
