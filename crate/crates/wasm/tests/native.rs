use dpslab_wasm::{posterior_scatter_impl, score_curve_impl, trajectories_impl};

#[test]
fn scatter_layout_and_weight() {
    let n = 200;
    let out = posterior_scatter_impl(4.0, n, 200, 3).unwrap();
    assert_eq!(out.len(), 2 + 4 * n);
    let oracle = 1.0 / (1.0 + (-16.0f64 / 2.42).exp());
    assert!((out[0] - oracle).abs() < 1e-12);
    // The guided heuristic leans the right way but underweights the upper mode.
    assert!(out[1] > 0.5 && out[1] < out[0] - 0.1, "{}", out[1]);
    assert!(out.iter().all(|v| v.is_finite()));
}

#[test]
fn curve_relu_matches_piecewise() {
    let out = score_curve_impl(1.0, 0.04, -8.0, 8.0, 401).unwrap();
    assert!(out[0] >= 2.0 && out[1] > 0.0);
    let rows: Vec<&[f64]> = out[2..].chunks(4).collect();
    assert_eq!(rows.len(), 401);
    assert_eq!(rows[0][0], -8.0);
    assert_eq!(rows[400][0], 8.0);
    for r in rows {
        assert!((r[2] - r[3]).abs() <= 1e-9 * r[2].abs().max(1.0));
        assert!((r[1] - r[2]).abs() < 0.5);
    }
}

#[test]
fn trajectories_are_deterministic() {
    let a = trajectories_impl(4.0, 5, 100, 9).unwrap();
    let b = trajectories_impl(4.0, 5, 100, 9).unwrap();
    assert_eq!(a, b);
    let len = a[0] as usize;
    assert_eq!(len, 101);
    assert_eq!(a.len(), 1 + len + 5 * len);
    let times = &a[1..=len];
    assert!(times.windows(2).all(|w| w[0] > w[1]));
    // Every path ends near one of the two modes.
    for p in a[1 + len..].chunks(len) {
        let end = p[len - 1];
        assert!((end.abs() - 4.0).abs() < 4.0, "{end}");
    }
}
