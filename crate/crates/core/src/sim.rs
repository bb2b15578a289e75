//! Deterministic Monte Carlo harness: coverage, distance, and cardinality
//! curves over an SNR grid, with analytic oracle columns.
//!
//! Replication `r` always uses the seed `replication_seed(seed, r)`, whatever
//! the SNR, `alpha'`, or thread count, so every grid cell sees the same noise
//! and results are reproducible bit for bit.

use std::io::Write;
use std::path::Path;

use rayon::prelude::*;
use serde_json::json;

use crate::bounds::oracle::expected_selection_count;
use crate::error::{Error, Result};
use crate::intervals::{Method, Procedure};
use crate::model::{
    make_spike_vector, replication_seed, standard_noise, MeanVector, ProblemParams, SignPattern,
};
use crate::numfmt::csv_num;

/// Description of one experiment.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentSpec {
    /// Base parameters; `a` is overridden by each grid point as `snr * sigma`.
    pub params: ProblemParams,
    pub snr_grid: Vec<f64>,
    pub methods: Vec<Method>,
    pub reps: usize,
    pub seed: u64,
    /// Sensitivity mode: sweep `alpha'` over these values.
    pub alpha_prime_grid: Option<Vec<f64>>,
    /// Run constructions below their feasibility cutoff instead of
    /// recording the cell as infeasible.
    pub force: bool,
}

/// 21 evenly spaced points on [2, 10].
pub fn default_snr_grid() -> Vec<f64> {
    (0..21).map(|i| (20 + 4 * i) as f64 / 10.0).collect()
}

/// SNR values used by the sensitivity sweep unless overridden.
pub const SENSITIVITY_SNRS: [f64; 2] = [3.8, 9.0];

/// `alpha'` values used by the sensitivity sweep unless overridden.
pub fn default_alpha_prime_grid(alpha: f64) -> Vec<f64> {
    (1..=9).map(|i| alpha * i as f64 / 10.0).collect()
}

impl ExperimentSpec {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidParams(m));
        if self.reps == 0 {
            return bad("reps must be at least 1".into());
        }
        if self.methods.is_empty() {
            return bad("at least one method is required".into());
        }
        if self.snr_grid.is_empty() {
            return bad("the SNR grid is empty".into());
        }
        if self.snr_grid.iter().any(|v| !(v.is_finite() && *v > 0.0)) {
            return bad("SNR grid values must be finite and positive".into());
        }
        if self.snr_grid.windows(2).any(|w| w[0] >= w[1]) {
            return bad("the SNR grid must be strictly increasing".into());
        }
        if let Some(g) = &self.alpha_prime_grid {
            if g.is_empty() {
                return bad("the alpha' grid is empty".into());
            }
            for &ap in g {
                self.params.with_alpha_prime(ap)?;
            }
        }
        Ok(())
    }

    fn alpha_primes(&self) -> Vec<f64> {
        self.alpha_prime_grid
            .clone()
            .unwrap_or_else(|| vec![self.params.alpha_prime()])
    }
}

/// Mean and standard error of a sample.
fn mean_se(xs: impl Iterator<Item = f64>) -> (f64, f64) {
    let v: Vec<f64> = xs.collect();
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    if v.len() < 2 {
        return (mean, 0.0);
    }
    let ss: f64 = v.iter().map(|x| (x - mean) * (x - mean)).sum();
    (mean, (ss / (n - 1.0)).sqrt() / n.sqrt())
}

/// Binomial standard error `sqrt(p (1 - p) / n)`; zero at `p` in {0, 1}.
pub fn binomial_se(p: f64, n: usize) -> f64 {
    (p * (1.0 - p) / n as f64).max(0.0).sqrt()
}

/// One output row.
#[derive(Debug, Clone, PartialEq)]
pub struct SimRow {
    pub method: Method,
    pub snr: f64,
    pub alpha_prime: f64,
    /// The method's feasibility cutoff exceeds this SNR.
    pub infeasible: bool,
    pub coverage_hat: Option<f64>,
    pub coverage_se: Option<f64>,
    pub coverage_exact: Option<f64>,
    pub dist_mean: Option<f64>,
    pub dist_se: Option<f64>,
    pub card_mean: Option<f64>,
    pub card_se: Option<f64>,
    /// Analytic `E|S|`.
    pub card_exact: Option<f64>,
    /// Mean fraction of null coordinates selected.
    pub fpr_mean: Option<f64>,
    pub fpr_se: Option<f64>,
    /// Analytic null selection probability, where the rule is a threshold.
    pub null_select_prob: Option<f64>,
    /// Whether the selection rule claims the `1 - delta` null rate.
    pub claims_fdelta: bool,
}

impl SimRow {
    fn empty(method: Method, snr: f64, alpha_prime: f64, infeasible: bool) -> Self {
        SimRow {
            method,
            snr,
            alpha_prime,
            infeasible,
            coverage_hat: None,
            coverage_se: None,
            coverage_exact: None,
            dist_mean: None,
            dist_se: None,
            card_mean: None,
            card_se: None,
            card_exact: None,
            fpr_mean: None,
            fpr_se: None,
            null_select_prob: None,
            claims_fdelta: false,
        }
    }

    /// `|coverage_hat - coverage_exact|` in binomial SEs. The SE is the larger
    /// of those at `p_hat` and at the exact value, so `p_hat` in {0, 1} still
    /// yields a usable scale.
    pub fn coverage_z(&self, reps: usize) -> Option<f64> {
        let (hat, exact) = (self.coverage_hat?, self.coverage_exact?);
        let se = self.coverage_se?.max(binomial_se(exact, reps));
        if se == 0.0 {
            return Some(if (hat - exact).abs() < 1e-12 { 0.0 } else { f64::INFINITY });
        }
        Some((hat - exact).abs() / se)
    }
}

/// The rows of an experiment plus the number of replications behind them.
#[derive(Debug, Clone, PartialEq)]
pub struct SimSummary {
    pub reps: usize,
    pub rows: Vec<SimRow>,
}

pub const CSV_HEADER: [&str; 11] = [
    "method",
    "snr",
    "alpha_prime",
    "coverage_hat",
    "coverage_se",
    "coverage_exact",
    "dist_mean",
    "dist_se",
    "card_mean",
    "card_se",
    "infeasible",
];

fn opt(x: Option<f64>) -> String {
    x.map(csv_num).unwrap_or_default()
}

impl SimSummary {
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        let io = |e: csv::Error| Error::Io(e.to_string());
        w.write_record(CSV_HEADER).map_err(io)?;
        for r in &self.rows {
            w.write_record([
                r.method.name().to_string(),
                csv_num(r.snr),
                csv_num(r.alpha_prime),
                opt(r.coverage_hat),
                opt(r.coverage_se),
                opt(r.coverage_exact),
                opt(r.dist_mean),
                opt(r.dist_se),
                opt(r.card_mean),
                opt(r.card_se),
                if r.infeasible { "1" } else { "0" }.to_string(),
            ])
            .map_err(io)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn row(&self, method: Method, snr: f64) -> Option<&SimRow> {
        self.rows
            .iter()
            .find(|r| r.method == method && (r.snr - snr).abs() < 1e-9)
    }

    pub fn rows_for(&self, method: Method) -> impl Iterator<Item = &SimRow> {
        self.rows.iter().filter(move |r| r.method == method)
    }
}

/// Per-replication outcome for one method.
#[derive(Debug, Clone, Copy)]
struct RepStat {
    covered: bool,
    dist: f64,
    card: usize,
    false_pos: usize,
}

fn build(method: Method, p: &ProblemParams, support: &[usize], force: bool) -> Result<Procedure> {
    match method {
        Method::OneSidedHat => Procedure::one_sided_hat(p, force),
        Method::OneSidedBar => Procedure::one_sided_bar(p, force),
        Method::Adaptive => Procedure::adaptive(p.d(), p.sigma(), p.alpha(), p.alpha_prime(), true),
        Method::TwoSidedHat => Procedure::two_sided_hat(p, force),
        Method::TwoSidedBar => Procedure::two_sided_bar(p, force),
        Method::Bonferroni => Procedure::bonferroni(p.d(), p.sigma(), p.alpha()),
        Method::Oracle => Procedure::oracle(p.d(), p.sigma(), support.to_vec(), p.alpha()),
        Method::PlugIn => Procedure::plug_in(p.d(), p.sigma(), p.alpha()),
    }
}

/// Runs one `(snr, alpha')` cell for every method.
fn run_cell(spec: &ExperimentSpec, snr: f64, alpha_prime: f64) -> Result<Vec<SimRow>> {
    let base = spec.params.with_alpha_prime(alpha_prime)?;
    let p = base.with_a(snr * base.sigma())?;
    let theta: MeanVector = make_spike_vector(&p, snr, SignPattern::AllPositive)?;
    let support = theta.support();
    let n_null = p.d() - support.len();

    let mut procs: Vec<(Method, Option<Procedure>)> = Vec::new();
    for &m in &spec.methods {
        match build(m, &p, &support, spec.force) {
            Ok(proc) => procs.push((m, Some(proc))),
            Err(e) if e.is_infeasible() => procs.push((m, None)),
            Err(e) => return Err(e),
        }
    }

    let th = theta.theta();
    let sigma = p.sigma();
    let per_rep: Vec<Vec<Option<RepStat>>> = (0..spec.reps as u64)
        .into_par_iter()
        .map(|rep| {
            let z = standard_noise(p.d(), replication_seed(spec.seed, rep));
            let x: Vec<f64> = th.iter().zip(&z).map(|(t, z)| t + sigma * z).collect();
            procs
                .iter()
                .map(|(_, proc)| {
                    let proc = proc.as_ref()?;
                    let c = proc.apply(&x).expect("dimension checked at build");
                    let set = c.set;
                    Some(RepStat {
                        covered: set.covers(th),
                        dist: set.support_distance(th).unwrap_or(0.0),
                        card: set.selected().len(),
                        false_pos: set.selected().iter().filter(|&&j| th[j] == 0.0).count(),
                    })
                })
                .collect()
        })
        .collect();

    let n = spec.reps;
    let mut rows = Vec::with_capacity(procs.len());
    for (k, (method, proc)) in procs.iter().enumerate() {
        let Some(proc) = proc else {
            rows.push(SimRow::empty(*method, snr, alpha_prime, true));
            continue;
        };
        let stats = || per_rep.iter().map(move |r| r[k].expect("feasible method"));
        let hits = stats().filter(|s| s.covered).count();
        let cov = hits as f64 / n as f64;
        let (dist_mean, dist_se) = mean_se(stats().map(|s| s.dist));
        let (card_mean, card_se) = mean_se(stats().map(|s| s.card as f64));
        let (fpr_mean, fpr_se) = if n_null > 0 {
            let (m, s) = mean_se(stats().map(|s| s.false_pos as f64 / n_null as f64));
            (Some(m), Some(s))
        } else {
            (None, None)
        };
        let rule = proc.rule();
        rows.push(SimRow {
            method: *method,
            snr,
            alpha_prime,
            infeasible: proc.forced(),
            coverage_hat: Some(cov),
            coverage_se: Some(binomial_se(cov, n)),
            coverage_exact: Some(proc.exact_coverage(th)?),
            dist_mean: Some(dist_mean),
            dist_se: Some(dist_se),
            card_mean: Some(card_mean),
            card_se: Some(card_se),
            card_exact: Some(expected_selection_count(rule, th, sigma)),
            fpr_mean,
            fpr_se,
            null_select_prob: rule.threshold().map(|_| rule.null_selection_prob()),
            claims_fdelta: rule.claims_fdelta(),
        });
    }
    Ok(rows)
}

fn run_grid(spec: &ExperimentSpec) -> Result<SimSummary> {
    spec.validate()?;
    let mut rows = Vec::new();
    for ap in spec.alpha_primes() {
        for &snr in &spec.snr_grid {
            rows.extend(run_cell(spec, snr, ap)?);
        }
    }
    Ok(SimSummary {
        reps: spec.reps,
        rows,
    })
}

/// Coverage, distance, and cardinality for every method at every SNR.
pub fn run_experiment(spec: &ExperimentSpec) -> Result<SimSummary> {
    if spec.alpha_prime_grid.is_some() {
        return Err(Error::InvalidParams(
            "an alpha' grid selects the sensitivity sweep; use run_sensitivity".into(),
        ));
    }
    run_grid(spec)
}

/// Sweeps `alpha'` at each SNR of the spec's grid. The spec must carry an
/// `alpha'` grid.
pub fn run_sensitivity(spec: &ExperimentSpec) -> Result<SimSummary> {
    if spec.alpha_prime_grid.is_none() {
        return Err(Error::InvalidParams("sensitivity needs an alpha' grid".into()));
    }
    run_grid(spec)
}

/// Mean `|S|` per SNR for each method's selector; coverage and distance
/// columns are left empty. Constructions run in forced mode so that the
/// curves extend below the feasibility cutoffs.
pub fn cardinality_trace(spec: &ExperimentSpec) -> Result<SimSummary> {
    let forced = ExperimentSpec {
        force: true,
        alpha_prime_grid: None,
        ..spec.clone()
    };
    let mut summary = run_grid(&forced)?;
    for r in &mut summary.rows {
        r.coverage_hat = None;
        r.coverage_se = None;
        r.coverage_exact = None;
        r.dist_mean = None;
        r.dist_se = None;
    }
    Ok(summary)
}

/// Sidecar metadata: seed, grids, software version, and parameters.
pub fn metadata_json(spec: &ExperimentSpec, kind: &str) -> serde_json::Value {
    let p = &spec.params;
    json!({
        "kind": kind,
        "version": env!("CARGO_PKG_VERSION"),
        "seed": spec.seed,
        "reps": spec.reps,
        "force": spec.force,
        "snr_grid": spec.snr_grid,
        "alpha_prime_grid": spec.alpha_prime_grid,
        "methods": spec.methods.iter().map(|m| m.name()).collect::<Vec<_>>(),
        "params": {
            "d": p.d(),
            "s": p.s(),
            "sigma": p.sigma(),
            "alpha": p.alpha(),
            "alpha_prime": p.alpha_prime(),
            "delta": p.delta(),
        },
        "design": "first s coordinates equal snr * sigma, the rest zero",
    })
}

/// Writes `summary` to `out` and the metadata to `<out>.meta.json`.
pub fn write_outputs(summary: &SimSummary, spec: &ExperimentSpec, kind: &str, out: &Path) -> Result<()> {
    let file = std::fs::File::create(out)?;
    summary.write_csv(std::io::BufWriter::new(file))?;
    let mut meta_path = out.as_os_str().to_owned();
    meta_path.push(".meta.json");
    let text = serde_json::to_string_pretty(&metadata_json(spec, kind))
        .map_err(|e| Error::Io(e.to_string()))?;
    std::fs::write(meta_path, text + "\n")?;
    Ok(())
}
