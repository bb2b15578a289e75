use sparseci::gaussian::std_normal_cdf;
use sparseci::intervals::Method;
use sparseci::model::ProblemParams;
use sparseci::sim::{
    cardinality_trace, default_alpha_prime_grid, run_experiment, run_sensitivity, ExperimentSpec,
};

fn spec(methods: Vec<Method>, snr_grid: Vec<f64>, reps: usize) -> ExperimentSpec {
    ExperimentSpec {
        params: ProblemParams::new(1000, 100, 1.0, 1.0, 0.05, 0.025, 0.7).unwrap(),
        snr_grid,
        methods,
        reps,
        seed: 99,
        alpha_prime_grid: None,
        force: false,
    }
}

#[test]
fn bonferroni_matches_closed_form() {
    let s = run_experiment(&spec(vec![Method::Bonferroni], vec![2.0, 6.0], 300)).unwrap();
    // Phi(c)^d with c = Phi^{-1}(1 - alpha/d), independent of theta
    let c = 3.890591886413094;
    let exact = std_normal_cdf(c).unwrap().value().powi(1000);
    for row in &s.rows {
        assert!((row.coverage_exact.unwrap() - exact).abs() < 1e-9);
        assert!(row.coverage_z(300).unwrap() <= 3.0);
    }
}

#[test]
fn plug_in_plateaus_below_nominal() {
    let s = run_experiment(&spec(
        vec![Method::PlugIn, Method::OneSidedHat, Method::OneSidedBar],
        vec![9.0, 10.0],
        300,
    ))
    .unwrap();
    for snr in [9.0, 10.0] {
        let plug = s.row(Method::PlugIn, snr).unwrap().coverage_exact.unwrap();
        assert!((0.85..0.9).contains(&plug), "plug-in exact {plug}");
        for m in [Method::OneSidedHat, Method::OneSidedBar] {
            assert!(s.row(m, snr).unwrap().coverage_exact.unwrap() >= 0.95);
        }
    }
}

#[test]
fn sensitivity_trends() {
    let mut sp = spec(vec![Method::OneSidedHat], vec![3.8, 9.0], 300);
    sp.force = true;
    sp.alpha_prime_grid = Some(default_alpha_prime_grid(0.05));
    let s = run_sensitivity(&sp).unwrap();
    let at = |snr: f64| -> Vec<_> { s.rows.iter().filter(|r| r.snr == snr).collect() };

    let low = at(3.8);
    let cov: Vec<f64> = low.iter().map(|r| r.coverage_hat.unwrap()).collect();
    let n = cov.len() as f64;
    let xbar = (n - 1.0) / 2.0;
    let ybar = cov.iter().sum::<f64>() / n;
    let slope: f64 = cov.iter().enumerate().map(|(i, y)| (i as f64 - xbar) * (y - ybar)).sum();
    assert!(slope > 0.0, "coverage should trend up with alpha': {cov:?}");
    assert!(cov[cov.len() - 1] > cov[0]);

    let high = at(9.0);
    let dist: Vec<f64> = high.iter().map(|r| r.dist_mean.unwrap()).collect();
    assert!(dist[dist.len() - 1] > dist[0] * 1.1, "{dist:?}");
}

#[test]
fn cardinality_curves() {
    let sp = spec(
        vec![Method::OneSidedHat, Method::OneSidedBar, Method::PlugIn],
        vec![2.0, 2.4, 9.0, 10.0],
        200,
    );
    let s = cardinality_trace(&sp).unwrap();
    for row in &s.rows {
        assert!(row.coverage_hat.is_none() && row.dist_mean.is_none());
    }
    for snr in [2.0, 2.4] {
        let row = s.row(Method::OneSidedHat, snr).unwrap();
        let (mean, exact, se) = (
            row.card_mean.unwrap(),
            row.card_exact.unwrap(),
            row.card_se.unwrap(),
        );
        assert!((mean - exact).abs() <= 3.0 * se, "{snr}: {mean} vs {exact}");
    }
    let hat2 = s.row(Method::OneSidedHat, 2.0).unwrap().card_mean.unwrap();
    let hat24 = s.row(Method::OneSidedHat, 2.4).unwrap().card_mean.unwrap();
    assert!((hat2 - hat24).abs() < 10.0, "flat low-SNR level");
    assert!(s.row(Method::PlugIn, 2.0).unwrap().card_mean.unwrap() < 10.0);
    assert!((s.row(Method::OneSidedHat, 10.0).unwrap().card_mean.unwrap() - 100.0).abs() < 2.0);
}

#[test]
fn outputs_are_reproducible() {
    let sp = spec(Method::ALL.to_vec(), vec![4.2, 8.0], 20);
    let dir = std::env::temp_dir().join(format!("sparseci-sim-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let (a, b) = (dir.join("a.csv"), dir.join("b.csv"));
    for path in [&a, &b] {
        let s = run_experiment(&sp).unwrap();
        sparseci::sim::write_outputs(&s, &sp, "experiment", path).unwrap();
    }
    assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
    let meta = std::fs::read_to_string(dir.join("a.csv.meta.json")).unwrap();
    let v: serde_json::Value = serde_json::from_str(&meta).unwrap();
    assert_eq!(v["seed"], 99);
    assert_eq!(v["params"]["d"], 1000);
    std::fs::remove_dir_all(&dir).unwrap();
}
