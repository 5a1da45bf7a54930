use std::fmt::Write as _;

use log::warn;
use rayon::prelude::*;

use bdl_core::disorder::{interval_decomposition, sample_poisson_configuration, PoissonParams};
use bdl_core::ids::{ids_csv, lifshitz_fit, ls_ensemble_ids};
use bdl_core::numerics::{derive_seed, log_grid, summarize};
use bdl_core::occupation::{
    condensate_csv, ls_realization, solved_ls_spectrum, CondensateReport, EnergyBins, LsRunParams, WindowSchedule,
};
use bdl_core::pathint::{build_g_table, ls_laplace_transform, FkParams, McConfig};
use bdl_core::scaledpot::{
    compare_with_limit, comparison_csv, scaled_critical_density, scaled_finite_volume_measure, scaled_limiting_mu,
    PotentialKind, ScaledPotential,
};
use bdl_core::thermo::{critical_density, limiting_mu, IdsModel, ThermoSolution};

use crate::config::{Config, ExperimentKind};
use crate::{HarnessError, RunOutput};

pub(crate) fn run(config: &Config, kind: ExperimentKind) -> Result<RunOutput, HarnessError> {
    match kind {
        ExperimentKind::Ids => ids(config),
        ExperimentKind::Thermo => thermo(config),
        ExperimentKind::Occupation => occupation(config),
        ExperimentKind::Fk => fk(config),
        ExperimentKind::Scaled => scaled(config),
        ExperimentKind::Sweep => unreachable!("sweeps are driven by the caller"),
    }
}

fn ls_critical(lambda: f64, beta: f64) -> Result<f64, HarnessError> {
    critical_density(&IdsModel::LuttingerSy { intensity: lambda }, beta)?
        .finite()
        .ok_or_else(|| HarnessError::Numerical("critical density diverges".into()))
}

fn seeds(master: u64, n: usize) -> Vec<u64> {
    (0..n as u64).map(|i| derive_seed(master, i)).collect()
}

fn ids(config: &Config) -> Result<RunOutput, HarnessError> {
    let s = config.ids.as_ref().expect("validated");
    let grid = log_grid(s.e_lo, s.e_hi, s.points);
    let ens = ls_ensemble_ids(s.lambda, s.length, s.realizations, config.seed, &grid)?;
    let mut fit_text = String::new();
    let mut metrics = Vec::new();
    let window = (s.lifshitz_window[0], s.lifshitz_window[1]);
    writeln!(fit_text, "window = [{:.6e}, {:.6e}]", window.0, window.1).unwrap();
    // the fit uses the ensemble mean on its own grid inside the window
    let fit_grid = log_grid(window.0, window.1, 24);
    let fit_ens = ls_ensemble_ids(s.lambda, s.length, s.realizations, config.seed, &fit_grid)?;
    match lifshitz_fit(&fit_ens.mean, window) {
        Ok(f) => {
            writeln!(fit_text, "status = ok").unwrap();
            writeln!(fit_text, "gamma = {:.16e}", f.gamma).unwrap();
            writeln!(fit_text, "amplitude = {:.16e}", f.amplitude).unwrap();
            writeln!(fit_text, "r2 = {:.16e}", f.line.r2).unwrap();
            writeln!(fit_text, "points = {}", f.points).unwrap();
            writeln!(fit_text, "exponent_drift = {:.16e}", f.exponent_drift).unwrap();
            writeln!(fit_text, "lifshitz_like = {}", f.lifshitz_like).unwrap();
            metrics.push(("lifshitz_gamma".into(), f.gamma));
            metrics.push(("lifshitz_r2".into(), f.line.r2));
        }
        Err(e) => writeln!(fit_text, "status = failed\nreason = {e}").unwrap(),
    }
    Ok(RunOutput {
        files: vec![("ids.csv".into(), ids_csv(&ens.mean, s.lambda)), ("lifshitz_fit.txt".into(), fit_text)],
        seeds: seeds(config.seed, s.realizations),
        failed_realizations: 0,
        metrics,
    })
}

fn thermo(config: &Config) -> Result<RunOutput, HarnessError> {
    let s = config.thermo.as_ref().expect("validated");
    let model = IdsModel::LuttingerSy { intensity: s.lambda };
    let rho_bar = s.rho_ratio * ls_critical(s.lambda, s.beta)?;
    let seeds = seeds(config.seed, s.realizations);
    let results: Vec<Result<ThermoSolution, bdl_core::Error>> = seeds
        .par_iter()
        .map(|&seed| {
            let p = PoissonParams::new(s.lambda, s.length, seed)?;
            let d = interval_decomposition(&sample_poisson_configuration(p)?);
            solved_ls_spectrum(&d, s.beta, rho_bar)?.1.with_limits(&model)
        })
        .collect();
    let mut csv = format!("{}\n", ThermoSolution::csv_header());
    let mut failed = 0;
    let mut mus = Vec::new();
    for (seed, r) in seeds.iter().zip(results) {
        match r {
            Ok(t) => {
                csv.push_str(&t.csv_row(s.lambda, s.length, *seed));
                csv.push('\n');
                mus.push(t.mu);
            }
            Err(e) => {
                warn!("realization with seed {seed} failed: {e}");
                failed += 1;
            }
        }
    }
    if mus.is_empty() {
        return Err(HarnessError::Numerical("every realization failed".into()));
    }
    let lim = limiting_mu(s.beta, rho_bar, &model)?;
    Ok(RunOutput {
        files: vec![("thermo.csv".into(), csv)],
        seeds,
        failed_realizations: failed,
        metrics: vec![("mu_mean".into(), summarize(&mus).mean), ("mu_inf".into(), lim.mu), ("rho_bar".into(), rho_bar)],
    })
}

fn occupation(config: &Config) -> Result<RunOutput, HarnessError> {
    let s = config.occupation.as_ref().expect("validated");
    let rc = ls_critical(s.lambda, s.beta)?;
    let rho_bar = s.rho_ratio * rc;
    let schedule = WindowSchedule::new(s.window_scale, s.window_exponent)?;
    let bins = EnergyBins::standard(1e-3, 12, 5.0, 16)?;
    let mut rows = String::from(
        "l,seed,mu,atom_random,atom_kinetic,max_mode,ground_random,split_first,split_second,mass_error_random,mass_error_kinetic\n",
    );
    let mut means = Vec::new();
    let mut all_seeds = Vec::new();
    let mut failed = 0;
    let mut metrics = Vec::new();
    for (li, &l) in s.lengths.iter().enumerate() {
        let p = LsRunParams {
            intensity: s.lambda,
            length: l,
            beta: s.beta,
            rho_bar,
            gamma_tail: s.gamma_tail,
            schedule,
            kappa: s.kappa,
        };
        let seeds = seeds(derive_seed(config.seed, li as u64), s.realizations);
        let results: Vec<_> = seeds.par_iter().map(|&seed| ls_realization(&p, seed, &bins)).collect();
        let mut ok = Vec::new();
        for (seed, r) in seeds.iter().zip(results) {
            match r {
                Ok(r) => {
                    let c = &r.report;
                    writeln!(
                        rows,
                        "{l:.16e},{seed},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e}",
                        r.thermo.mu,
                        c.atom_random,
                        c.atom_kinetic,
                        c.max_mode,
                        c.ground_random,
                        r.split_window.0,
                        r.split_window.1,
                        r.random_mass_error(),
                        r.kinetic_mass_error()
                    )
                    .unwrap();
                    ok.push(r.report);
                }
                Err(e) => {
                    warn!("l={l} seed {seed} failed: {e}");
                    failed += 1;
                }
            }
        }
        if ok.is_empty() {
            return Err(HarnessError::Numerical(format!("every realization at l={l} failed")));
        }
        let avg = |f: fn(&CondensateReport) -> f64| ok.iter().map(f).sum::<f64>() / ok.len() as f64;
        let mean = CondensateReport {
            l,
            window: ok[0].window,
            atom_random: avg(|r| r.atom_random),
            atom_kinetic: avg(|r| r.atom_kinetic),
            max_mode: avg(|r| r.max_mode),
            ground_random: avg(|r| r.ground_random),
            bound: ok[0].bound,
        };
        if s.lengths.len() == 1 {
            metrics.extend([
                ("atom_random".to_string(), mean.atom_random),
                ("atom_kinetic".to_string(), mean.atom_kinetic),
                ("ground_random".to_string(), mean.ground_random),
                ("max_mode".to_string(), mean.max_mode),
                ("excess".to_string(), (rho_bar - rc).max(0.0)),
            ]);
        }
        means.push(mean);
        all_seeds.extend(seeds);
    }
    Ok(RunOutput {
        files: vec![("condensate.csv".into(), condensate_csv(&means)), ("realizations.csv".into(), rows)],
        seeds: all_seeds,
        failed_realizations: failed,
        metrics,
    })
}

fn fk(config: &Config) -> Result<RunOutput, HarnessError> {
    let s = config.fk.as_ref().expect("validated");
    let mu = match (s.mu, s.rho_ratio) {
        (Some(mu), _) => mu,
        (None, Some(r)) => {
            let model = IdsModel::LuttingerSy { intensity: s.lambda };
            limiting_mu(s.beta, r * ls_critical(s.lambda, s.beta)?, &model)?.mu
        }
        _ => unreachable!("validated"),
    };
    let params = FkParams { beta: s.beta, mu, lambda: s.lambda };
    let mc = McConfig { paths: s.paths, n_steps: s.n_steps, seed: config.seed, tol: s.tol, batches: 20.min(s.paths), ..McConfig::default() };
    let mut files = Vec::new();
    let mut metrics = vec![("mu".to_string(), mu)];
    if !s.epsilon.is_empty() {
        let table = build_g_table(params, &mc)?;
        files.push(("fk.csv".to_string(), table.density_csv(&s.epsilon)?));
        let t = &table.truncation;
        files.push((
            "truncation.txt".to_string(),
            format!(
                "n_max = {}\nremainder_bound = {:.16e}\nreference = {:.16e}\ntol = {:.16e}\n",
                t.n_max, t.remainder_bound, t.reference, t.tol
            ),
        ));
        metrics.push(("n_max".into(), t.n_max as f64));
    }
    if !s.laplace_t.is_empty() {
        let mut csv = String::from("t,f,f_se,n_max,refinement_converged\n");
        for &t in &s.laplace_t {
            let e = ls_laplace_transform(t, params, &mc)?;
            writeln!(csv, "{t:.16e},{:.16e},{:.16e},{},{}", e.value, e.se, e.n_max, e.refinement.converged).unwrap();
        }
        files.push(("laplace.csv".into(), csv));
    }
    Ok(RunOutput { files, seeds: seeds(config.seed, s.paths), failed_realizations: 0, metrics })
}

fn scaled(config: &Config) -> Result<RunOutput, HarnessError> {
    let s = config.scaled.as_ref().expect("validated");
    let kind = match s.potential.as_str() {
        "zero" => PotentialKind::Zero,
        "abs" => PotentialKind::Abs,
        _ => PotentialKind::Square,
    };
    let v = ScaledPotential::new(kind, 1)?.scaled_by(s.amplitude)?;
    let rc = scaled_critical_density(&v, s.beta)?
        .density
        .finite()
        .ok_or_else(|| HarnessError::Validation("scaled: critical density diverges, rho_ratio is undefined".into()))?;
    let rho_bar = s.rho_ratio * rc;
    let mu = scaled_limiting_mu(&v, s.beta, rho_bar)?;
    let excess = (rho_bar - rc).max(0.0);
    let mut files = Vec::new();
    let mut atoms = String::from("l,window,atom_random,atom_kinetic,excess\n");
    let mut metrics = vec![("rho_c".to_string(), rc), ("mu_inf".to_string(), mu)];
    let approx: Vec<f64> = (0..=36).map(|i| s.compare[0] + (s.compare[1] - s.compare[0]) * i as f64 / 36.0).collect();
    for &l in &s.lengths {
        let bins = EnergyBins::kinetic_aligned(l, &approx)?;
        let fv = scaled_finite_volume_measure(&v, l, s.beta, rho_bar, s.gamma_tail, &bins)?;
        let rows = compare_with_limit(&fv, &v, mu, s.compare[0], s.compare[1])?;
        let window = l.powf(-2.0 / 3.0);
        let (ar, ak) = fv.atoms(window);
        writeln!(atoms, "{l:.16e},{window:.16e},{ar:.16e},{ak:.16e},{excess:.16e}").unwrap();
        let worst = rows.iter().map(|r| r.rel_err.abs()).fold(0.0, f64::max);
        if s.lengths.len() == 1 {
            metrics.extend([
                ("atom_random".to_string(), ar),
                ("atom_kinetic".to_string(), ak),
                ("worst_rel_err".to_string(), worst),
            ]);
        }
        files.push((format!("scaled_l{l}.csv"), comparison_csv(&rows)));
    }
    files.push(("atoms.csv".into(), atoms));
    Ok(RunOutput { files, seeds: Vec::new(), failed_realizations: 0, metrics })
}
