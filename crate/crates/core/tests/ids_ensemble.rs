use bdl_core::ids::*;
use bdl_core::numerics::log_grid;

#[test]
fn small_ensemble_matches_oracle() {
    let grid = log_grid(0.1, 3.0, 20);
    let ens = ls_ensemble_ids(1.0, 1000.0, 40, 3, &grid).unwrap();
    let se = ens.mean.se.clone().unwrap();
    for (j, &e) in grid.iter().enumerate() {
        let o = ls_ids_oracle(e, 1.0).unwrap();
        // finite-box edge effects are O(1/l)
        assert!((ens.mean.values[j] - o).abs() <= 4.0 * se[j] + 2e-3, "E={e}");
    }
}

#[test]
fn spread_shrinks_with_volume() {
    let grid = [0.5, 1.0, 2.0];
    let a = ls_ensemble_ids(1.0, 250.0, 60, 4, &grid).unwrap();
    let b = ls_ensemble_ids(1.0, 4000.0, 60, 4, &grid).unwrap();
    let (sa, sb) = (a.mean.se.unwrap(), b.mean.se.unwrap());
    for j in 0..grid.len() {
        assert!(sb[j] < sa[j]);
    }
}

#[test]
fn oracle_is_lifshitz_and_weyl_is_not() {
    let grid = log_grid(0.02, 0.2, 30);
    let o = IdsCurve::from_fn(&grid, IdsKind::Oracle, |e| ls_ids_oracle(e, 1.0).unwrap()).unwrap();
    let fit = lifshitz_fit(&o, (0.02, 0.2)).unwrap();
    assert!(fit.lifshitz_like);
    assert!((fit.gamma - 0.5).abs() < 0.1, "{}", fit.gamma);
    let w = IdsCurve::from_fn(&grid, IdsKind::Weyl, |e| weyl_ids(e, 1)).unwrap();
    assert!(!lifshitz_fit(&w, (0.02, 0.2)).unwrap().lifshitz_like);
}

#[test]
fn neumann_probability_decays_like_empty_box() {
    let lambda = 0.05;
    let r = neumann_ground_probability(lambda, &[20.0, 40.0, 80.0], 400, 1.0, 8).unwrap();
    for p in &r.points {
        assert!(p.probability >= p.empty_box - 4.0 * p.se.max(1e-3));
    }
    let fit = r.fit.unwrap();
    assert!(fit.slope < 0.0);
    let free = neumann_ground_probability(0.0, &[20.0, 40.0], 100, 1.0, 8).unwrap();
    assert!(free.points.iter().all(|p| p.probability == 1.0));
    assert!(free.fit.is_none());
}
