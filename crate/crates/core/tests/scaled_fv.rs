use bdl_core::occupation::EnergyBins;
use bdl_core::scaledpot::*;

fn bins(l: f64) -> EnergyBins {
    let approx: Vec<f64> = (0..=18).map(|i| 0.2 + 0.1 * i as f64).collect();
    EnergyBins::kinetic_aligned(l, &approx).unwrap()
}

#[test]
fn zero_potential_kinetic_equals_random() {
    let v = ScaledPotential::new(PotentialKind::Zero, 1).unwrap();
    let fv = scaled_finite_volume_measure(&v, 50.0, 1.0, 0.5, 60.0, &bins(50.0)).unwrap();
    let k = &fv.kinetic.total;
    for (a, b) in fv.random.levels.iter().zip(&k.levels) {
        // grid eigenvectors are the sampled sine modes themselves
        assert!((a.1 - b.1).abs() < 1e-9 * (1.0 + a.1));
    }
}

#[test]
fn subcritical_density_matches_limit() {
    let v = ScaledPotential::new(PotentialKind::Abs, 1).unwrap();
    let rc = scaled_critical_density(&v, 1.0).unwrap().density.finite().unwrap();
    let mu = scaled_limiting_mu(&v, 1.0, 0.5 * rc).unwrap();
    let l = 100.0;
    let fv = scaled_finite_volume_measure(&v, l, 1.0, 0.5 * rc, 60.0, &bins(l)).unwrap();
    assert!((fv.kinetic.total.total_mass + fv.kinetic.total.truncation_deficit - 0.5 * rc).abs() < 1e-8);
    let rows = compare_with_limit(&fv, &v, mu, 0.2, 2.0).unwrap();
    assert!(rows.len() > 5);
    assert!(rows.iter().all(|r| r.rel_err.abs() < 0.03), "{}", comparison_csv(&rows));
}
