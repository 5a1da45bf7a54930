use bdl_core::pathint::*;
use std::f64::consts::PI;

fn mc(paths: usize, tol: f64) -> McConfig {
    McConfig { paths, tol, ..McConfig::default() }
}

#[test]
fn laplace_transform_is_laplace_of_density() {
    let p = FkParams { beta: 1.0, mu: -0.3, lambda: 1.0 };
    let m = mc(1000, 1e-8);
    let table = build_g_table(p, &m).unwrap();
    // ∫ e^{−tε}F(ε)dε with ε = k²/2
    let lap = |t: f64| {
        let n = 400;
        let h = 8.0 / n as f64;
        (1..=n)
            .map(|i| {
                let k = i as f64 * h;
                let w = if i == n { 1.0 } else if i % 2 == 1 { 4.0 } else { 2.0 };
                w * (-t * k * k / 2.0).exp() * table.density(k * k / 2.0).unwrap().value * k
            })
            .sum::<f64>()
            * h
            / 3.0
    };
    for t in [0.5, 2.0] {
        let f = ls_laplace_transform(t, p, &m).unwrap();
        assert!((f.value - lap(t)).abs() < 4.0 * f.se + 2e-3, "t={t}: {} vs {}", f.value, lap(t));
    }
}

#[test]
fn laplace_transform_decreases_in_t_and_in_lambda() {
    let m = mc(500, 1e-8);
    let p = FkParams { beta: 1.0, mu: -0.5, lambda: 1.0 };
    let a = ls_laplace_transform(0.5, p, &m).unwrap().value;
    let b = ls_laplace_transform(2.0, p, &m).unwrap().value;
    assert!(b < a);
    let free = ls_laplace_transform(0.5, FkParams { lambda: 0.0, ..p }, &m).unwrap().value;
    assert!(a < free);
    let strong = ls_laplace_transform(0.5, FkParams { lambda: 1000.0, ..p }, &m).unwrap();
    assert!(strong.value < 1e-6 * free);
}

#[test]
fn refined_mean_range_is_sqrt_half_pi() {
    let (r, se) = mean_range(1.0, 4000, 1024, 21).unwrap();
    // the grid range underestimates and refines upward
    assert!(r.values[0] < r.values[1] && r.values[1] < r.values[2]);
    assert!((r.extrapolated[1] - (PI / 2.0).sqrt()).abs() < 4.0 * se + 5e-3);
}

#[test]
fn exit_probability_grows_toward_the_wall() {
    let d = exit_decay(&[0.0, 0.4, 0.8], 1.0, 4.0, 4000, 256, 5).unwrap();
    assert!(d.points.windows(2).all(|w| w[1].1.probability > w[0].1.probability));
    assert!(d.fit.slope < 0.0);
}

#[test]
fn table_is_reproducible() {
    let p = FkParams { beta: 1.0, mu: -0.5, lambda: 1.0 };
    let a = build_g_table(p, &mc(64, 1e-6)).unwrap().g(0.7).unwrap();
    let b = build_g_table(p, &mc(64, 1e-6)).unwrap().g(0.7).unwrap();
    assert_eq!(a, b);
}
