use qssm_demo::{
    contraction_values, gate_point_value, gate_surface_values, SineDemo, SINE_HORIZON, SINE_WINDOW,
};

#[test]
fn surface_is_half_at_default_mixer_and_within_clamp() {
    let v = gate_surface_values(0.3, -0.2, 0.0, 0.0, 0.0, 9).unwrap();
    assert_eq!(v.len(), 81);
    assert!(v.iter().all(|&g| g == 0.5));
    let v = gate_surface_values(0.0, 0.0, 50.0, -50.0, 0.0, 17).unwrap();
    assert!(v.iter().all(|&g| (0.05..=0.95).contains(&g)));
    assert!(gate_surface_values(0.0, 0.0, 1.0, 1.0, 0.0, 1).is_err());
}

#[test]
fn point_gradients_agree_and_respect_bound() {
    let p = gate_point_value(0.7, -0.4, 1.1, 0.2, 2.0, -1.0, 0.1).unwrap();
    assert!(!p.clipped);
    assert!((p.dtheta1_analytic - p.dtheta1_shift).abs() < 1e-12);
    assert!(p.dtheta1_analytic.abs() <= p.lipschitz_bound);
    assert!((p.z1 - 0.7f64.cos() * (-0.4f64).cos()).abs() < 1e-12);
}

#[test]
fn contraction_matches_geometric_decay() {
    let v = contraction_values(0.3, 20, 8, 1).unwrap();
    assert_eq!(v.len(), 42);
    for pair in v.chunks(2) {
        assert!((pair[0] - pair[1]).abs() <= 1e-9 * pair[1].max(1.0), "{pair:?}");
    }
    assert!(contraction_values(0.99, 5, 8, 1).is_err());
}

#[test]
fn sine_demo_trains_and_forecasts() {
    let mut demo = SineDemo::create(48.0, "quantum", 2021).unwrap();
    let before = demo.test_mse_value().unwrap();
    let log = demo.run_epochs(3).unwrap();
    assert_eq!(log.len(), 15);
    assert_eq!(log[10], 3.0);
    assert!(demo.test_mse_value().unwrap() < before);
    let f = demo.forecast_values(0).unwrap();
    assert_eq!(f.len(), SINE_WINDOW + 2 * SINE_HORIZON);
    assert!(demo.forecast_values(100_000).is_err());
    assert!(SineDemo::create(48.0, "bogus", 0).is_err());
}
