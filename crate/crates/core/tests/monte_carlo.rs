use std::f64::consts::PI;

use needlets::asymptotics::variance_exact;
use needlets::mcharness::{
    covariance_with_se, excursion_clt_table, kstat_cum4_with_se, q2_exact_cumulants, run_experiment, summarize,
    variance_table, write_variance_csv, ExperimentConfig, Moments,
};
use needlets::model::band_profile;
use needlets::specfun::gaussian_cdf;

fn config(js: Vec<u32>, qs: Vec<usize>, zs: Vec<f64>, replicates: usize) -> ExperimentConfig {
    ExperimentConfig { js, qs, zs, replicates, master_seed: 20_240_601, ..Default::default() }
}

#[test]
fn polyspectra_moments_match_exact_values() {
    let cfg = config(vec![3], vec![2, 3], vec![], 800);
    let rep = run_experiment(&cfg).unwrap();
    let s = cfg.spectrum().unwrap();
    let w = cfg.window().unwrap();
    let sc = &rep.scales[0];
    let (nu2, nu3) = (sc.nu(0), sc.nu(1));
    for (k, xs) in [nu2.clone(), nu3.clone()].iter().enumerate() {
        let m = Moments::of(xs);
        assert!(m.mean.abs() < 4.0 * (m.variance / m.n as f64).sqrt(), "q = {}: mean {}", k + 2, m.mean);
        let exact = variance_exact(3, k + 2, &s, &w).unwrap();
        assert!((m.variance - exact).abs() < 4.0 * m.se_variance, "q = {}: {} vs {exact}", k + 2, m.variance);
    }
    let (cov, se) = covariance_with_se(&nu2, &nu3).unwrap();
    assert!(cov.abs() < 4.0 * se, "cov {cov} se {se}");
}

#[test]
fn q2_fourth_cumulant_matches_decomposition() {
    let cfg = config(vec![3], vec![2], vec![], 3000);
    let rep = run_experiment(&cfg).unwrap();
    let p = band_profile(&cfg.spectrum().unwrap(), &cfg.window().unwrap(), 3).unwrap();
    let (_, k4_exact, _) = q2_exact_cumulants(&p);
    let (k4, se) = kstat_cum4_with_se(&rep.scales[0].nu(0)).unwrap();
    assert!((k4 - k4_exact).abs() < 4.0 * se, "{k4} ± {se} vs {k4_exact}");
}

#[test]
fn runs_are_reproducible() {
    let cfg = config(vec![2, 3], vec![2], vec![], 120);
    let a = run_experiment(&cfg).unwrap();
    let b = run_experiment(&cfg).unwrap();
    assert_eq!(a.scales, b.scales);
    let (mut ca, mut cb) = (Vec::new(), Vec::new());
    write_variance_csv(&variance_table(&a).unwrap(), &mut ca).unwrap();
    write_variance_csv(&variance_table(&b).unwrap(), &mut cb).unwrap();
    assert_eq!(ca, cb);
    let other = run_experiment(&ExperimentConfig { master_seed: 1, ..cfg }).unwrap();
    assert_ne!(a.scales[0].records[0], other.scales[0].records[0]);
}

#[test]
fn summaries_are_well_formed() {
    let cfg = config(vec![3], vec![2], vec![0.0], 200);
    let rep = run_experiment(&cfg).unwrap();
    let again = summarize(&cfg, &rep.scales).unwrap();
    assert_eq!(rep.summaries, again);
    for s in &rep.summaries {
        assert!(s.variance >= 0.0);
        assert!((0.0..=1.0).contains(&s.ks_distance));
        assert!(s.wasserstein1 >= 0.0);
    }
}

#[test]
fn excursion_means_and_defect() {
    let zs = vec![-1.0, 0.0, 1.0];
    let cfg = config(vec![3], vec![], zs.clone(), 600);
    let rep = run_experiment(&cfg).unwrap();
    for r in &rep.scales[0].records {
        assert!((r.defect - (4.0 * PI - 2.0 * r.phis[1])).abs() < 1e-12);
    }
    for &z in &zs {
        let row = &excursion_clt_table(&rep, z).unwrap()[0];
        assert!((row.mean - 4.0 * PI * gaussian_cdf(z)).abs() < 4.0 * row.se_mean, "z = {z}: {row:?}");
        if z == 0.0 {
            assert!(row.skewness.abs() < 4.0 * (6.0 / 600.0f64).sqrt());
        }
    }
}
