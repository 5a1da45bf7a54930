use bdl_core::ids::weyl_ids;
use bdl_core::thermo::*;
use std::f64::consts::PI;

/// Dirichlet cube levels (π²/2l²)(a²+b²+c²) below cap, sorted.
fn cube_levels(l: f64, cap: f64) -> Vec<f64> {
    let u = PI * PI / (2.0 * l * l);
    let m = (cap / u).sqrt() as usize + 1;
    let mut e = Vec::new();
    for a in 1..=m {
        for b in 1..=m {
            for c in 1..=m {
                let x = u * (a * a + b * b + c * c) as f64;
                if x <= cap {
                    e.push(x);
                }
            }
        }
    }
    e.sort_by(f64::total_cmp);
    e
}

#[test]
fn zeta_three_halves() {
    let rc = critical_density(&IdsModel::Weyl { dim: 3 }, 1.0 / (2.0 * PI)).unwrap();
    assert!((rc.finite().unwrap() - 2.612_375_348_685_488).abs() < 1e-6);
    assert_eq!(critical_density(&IdsModel::Weyl { dim: 1 }, 1.0).unwrap(), Density::Divergent);
}

#[test]
fn ls_critical_density_pinned() {
    let rc = critical_density(&IdsModel::LuttingerSy { intensity: 1.0 }, 1.0).unwrap();
    assert!((rc.finite().unwrap() - 0.277_033_151_446).abs() < 1e-9);
}

#[test]
fn free_cube_chemical_potential_converges() {
    let beta = 1.0;
    let model = IdsModel::Weyl { dim: 3 };
    let rc = critical_density(&model, beta).unwrap().finite().unwrap();
    let rho = 0.5 * rc;
    let lim = limiting_mu(beta, rho, &model).unwrap();
    let mut errs = Vec::new();
    for l in [10.0, 20.0, 40.0] {
        let levels = cube_levels(l, 40.0);
        let t = solve_chemical_potential(&levels, beta, rho, l * l * l).unwrap();
        assert!(t.residual < 1e-10);
        errs.push((t.mu - lim.mu).abs());
    }
    assert!(errs.windows(2).all(|w| w[1] < w[0]), "{errs:?}");
    // Dirichlet surface correction: error·l settles to a constant
    let scaled: Vec<f64> = errs.iter().zip([10.0, 20.0, 40.0]).map(|(e, l)| e * l).collect();
    assert!((scaled[2] / scaled[1] - 1.0).abs() < 0.05, "{scaled:?}");
    // level counting agrees with Weyl at the largest box
    let n = cube_levels(40.0, 2.0).len() as f64 / 40f64.powi(3);
    assert!((n / weyl_ids(2.0, 3) - 1.0).abs() < 0.1);
}
