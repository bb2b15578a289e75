//! Confidence-set constructions and the classical baselines.
//!
//! A [`Procedure`] bundles a selection rule with its width constant so that
//! the expensive quantile work is done once and the procedure can then be
//! applied to many observations, possibly from several threads.

use std::collections::BTreeMap;
use std::fmt;
use std::io::{Read, Write};
use std::str::FromStr;

use crate::bounds::oracle;
use crate::bounds::thresholds::{self, asym_root};
use crate::error::{Error, Result};
use crate::gaussian::{quantile, sf, upper_quantile};
use crate::model::{Observation, ProblemParams, Side, SparseConfidenceSet};
use crate::numfmt::{csv_num, parse_num};
use crate::selectors::{
    dyadic_round, one_sided_bar_is_high, two_sided_bar_is_high, DyadicRound, SelectionRule,
};

/// The available constructions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Method {
    OneSidedHat,
    OneSidedBar,
    Adaptive,
    TwoSidedHat,
    TwoSidedBar,
    Bonferroni,
    Oracle,
    PlugIn,
}

impl Method {
    pub const ALL: [Method; 8] = [
        Method::OneSidedHat,
        Method::OneSidedBar,
        Method::Adaptive,
        Method::TwoSidedHat,
        Method::TwoSidedBar,
        Method::Bonferroni,
        Method::Oracle,
        Method::PlugIn,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Method::OneSidedHat => "hat",
            Method::OneSidedBar => "bar",
            Method::Adaptive => "adaptive",
            Method::TwoSidedHat => "ts-hat",
            Method::TwoSidedBar => "ts-bar",
            Method::Bonferroni => "bonferroni",
            Method::Oracle => "oracle",
            Method::PlugIn => "plug-in",
        }
    }

    pub fn side(self) -> Side {
        match self {
            Method::TwoSidedHat | Method::TwoSidedBar => Side::TwoSided,
            _ => Side::OneSided,
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Method::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| {
                let names: Vec<_> = Method::ALL.iter().map(|m| m.name()).collect();
                Error::InvalidParams(format!("unknown method {s:?}; expected one of {}", names.join(", ")))
            })
    }
}

/// SNR region a construction was built in.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Region {
    Infeasible,
    LowSnr,
    HighSnr,
}

impl Region {
    pub fn as_str(self) -> &'static str {
        match self {
            Region::Infeasible => "infeasible",
            Region::LowSnr => "low_snr",
            Region::HighSnr => "high_snr",
        }
    }
}

/// Region plus the cutoff values that decided it.
#[derive(Debug, Clone, PartialEq)]
pub struct RegionTag {
    pub region: Region,
    pub cutoffs: BTreeMap<&'static str, f64>,
}

/// How the width constant `u` (sigma units) is obtained.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum WidthRule {
    Fixed(f64),
    /// `Phi^{-1}(1 - alpha / |S|)`, none when `S` is empty.
    PlugIn { alpha: f64 },
    /// `sqrt(2 log(4 s_hat / ((alpha-alpha') C_{2 s_hat, alpha-alpha'})))`
    /// with `s_hat` the dyadic rounding of `|S|`.
    Adaptive { alpha: f64, alpha_prime: f64 },
}

impl WidthRule {
    /// Width used when `size` coordinates are selected out of `d`.
    pub fn width_for(&self, size: usize, d: usize) -> Result<(Option<f64>, Option<DyadicRound>)> {
        Ok(match *self {
            WidthRule::Fixed(u) => (Some(u), None),
            WidthRule::PlugIn { alpha } => {
                if size == 0 {
                    (None, None)
                } else {
                    (Some(upper_quantile(alpha / size as f64)), None)
                }
            }
            WidthRule::Adaptive { alpha, alpha_prime } => {
                let r = dyadic_round(size, d)?;
                (Some(adaptive_width(r.value, alpha, alpha_prime)), Some(r))
            }
        })
    }

    pub fn is_fixed(&self) -> bool {
        matches!(self, WidthRule::Fixed(_))
    }
}

/// Adaptive width for a rounded sparsity `s_hat`.
pub fn adaptive_width(s_hat: usize, alpha: f64, alpha_prime: f64) -> f64 {
    let s = s_hat as f64;
    asym_root(4.0 * s, 2.0 * s, alpha - alpha_prime)
}

/// Output of [`Procedure::construct_with_info`].
#[derive(Debug, Clone, PartialEq)]
pub struct Construction {
    pub set: SparseConfidenceSet,
    /// Width constant applied, absent when nothing was selected and the
    /// width is size dependent.
    pub width: Option<f64>,
    pub s_hat: Option<DyadicRound>,
}

/// A ready-to-apply construction: selection rule plus width.
#[derive(Debug, Clone, PartialEq)]
pub struct Procedure {
    method: Method,
    d: usize,
    sigma: f64,
    rule: SelectionRule,
    width: WidthRule,
    region: Option<RegionTag>,
    forced: bool,
    warnings: Vec<String>,
}

fn infeasible(method: &'static str, snr: f64, cutoff_name: &'static str, cutoff: f64) -> Error {
    Error::Infeasible {
        method,
        snr,
        cutoff_name,
        cutoff,
    }
}

fn tag(region: Region, cutoffs: &[(&'static str, f64)]) -> Option<RegionTag> {
    Some(RegionTag {
        region,
        cutoffs: cutoffs.iter().copied().collect(),
    })
}

/// One-sided high-SNR width `Phi^{-1}(1 - (alpha-alpha' - (d-s)(1-eta+))/s)`.
pub fn hat_high_width(p: &ProblemParams) -> Result<f64> {
    let (d, s) = (p.d() as f64, p.s() as f64);
    let one_minus_eta = sf(p.snr() + quantile(p.alpha_prime() / s));
    let q = (p.alpha() - p.alpha_prime() - (d - s) * one_minus_eta) / s;
    if !(q > 0.0 && q < 1.0) {
        return Err(Error::Internal(format!(
            "high-SNR width argument {q} outside (0, 1) at a/sigma = {}",
            p.snr()
        )));
    }
    Ok(upper_quantile(q))
}

/// One-sided low-SNR width `Phi^{-1}(1 - (alpha-alpha')/d)`.
pub fn hat_low_width(p: &ProblemParams) -> f64 {
    upper_quantile((p.alpha() - p.alpha_prime()) / p.d() as f64)
}

/// Two-sided high-SNR width `Phi^{-1}(1 - (alpha-alpha' - 2(d-s)(1-eta))/(2s))`.
pub fn ts_hat_high_width(p: &ProblemParams) -> Result<f64> {
    let (d, s) = (p.d() as f64, p.s() as f64);
    let one_minus_eta = sf(p.snr() + quantile(p.alpha_prime() / (2.0 * s)));
    let q = (p.alpha() - p.alpha_prime() - 2.0 * (d - s) * one_minus_eta) / (2.0 * s);
    if !(q > 0.0 && q < 1.0) {
        return Err(Error::Internal(format!(
            "two-sided high-SNR width argument {q} outside (0, 1) at a/sigma = {}",
            p.snr()
        )));
    }
    Ok(upper_quantile(q))
}

/// Two-sided low-SNR width `Phi^{-1}(1 - (alpha-alpha')/(2d))`.
pub fn ts_hat_low_width(p: &ProblemParams) -> f64 {
    upper_quantile((p.alpha() - p.alpha_prime()) / (2.0 * p.d() as f64))
}

/// Asymptotic one-sided width: `sqrt(2 log(d / ((alpha-alpha') C_{d,alpha-alpha'})))`
/// in the low branch, `sqrt(2 log(2s / ((alpha-alpha') C_{s,alpha-alpha'})))`
/// in the high branch.
pub fn bar_width(p: &ProblemParams, high: bool) -> f64 {
    let b = p.alpha() - p.alpha_prime();
    if high {
        let s = p.s() as f64;
        asym_root(2.0 * s, s, b)
    } else {
        let d = p.d() as f64;
        asym_root(d, d, b)
    }
}

/// Asymptotic two-sided width: `sqrt(2 log(2d / ((alpha-alpha') C_{2d,alpha-alpha'})))`
/// in the low branch, `sqrt(2 log(4s / ((alpha-alpha') C_{2s,alpha-alpha'})))`
/// in the high branch.
pub fn ts_bar_width(p: &ProblemParams, high: bool) -> f64 {
    let b = p.alpha() - p.alpha_prime();
    if high {
        let s = p.s() as f64;
        asym_root(4.0 * s, 2.0 * s, b)
    } else {
        let d = p.d() as f64;
        asym_root(2.0 * d, 2.0 * d, b)
    }
}

fn check_alpha(alpha: f64) -> Result<()> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::InvalidParams(format!("alpha = {alpha} must be in (0, 1)")));
    }
    Ok(())
}

fn check_sigma(sigma: f64) -> Result<()> {
    if !(sigma.is_finite() && sigma > 0.0) {
        return Err(Error::InvalidParams(format!("sigma = {sigma} must be positive")));
    }
    Ok(())
}

impl Procedure {
    /// Non-asymptotic one-sided set. Requires `a/sigma >= kappa^*` unless
    /// `force` is set, in which case the region check is bypassed and the
    /// result is tagged infeasible.
    pub fn one_sided_hat(p: &ProblemParams, force: bool) -> Result<Self> {
        let (ks, kh) = (thresholds::kappa_star(p), thresholds::kappa_hat(p));
        let snr = p.snr();
        if snr < ks && !force {
            return Err(infeasible("one-sided hat set", snr, "kappa*", ks));
        }
        let high = snr >= kh;
        let u = if high { hat_high_width(p)? } else { hat_low_width(p) };
        let region = if snr < ks {
            Region::Infeasible
        } else if high {
            Region::HighSnr
        } else {
            Region::LowSnr
        };
        Ok(Procedure {
            method: Method::OneSidedHat,
            d: p.d(),
            sigma: p.sigma(),
            rule: SelectionRule::one_sided_hat(p),
            width: WidthRule::Fixed(u),
            region: tag(region, &[("kappa_star", ks), ("kappa_hat", kh)]),
            forced: force && snr < ks,
            warnings: Vec::new(),
        })
    }

    /// Asymptotic one-sided set; branch chosen by `a/sigma` against
    /// `kappa_bar`. Below `kappa^**` it fails unless forced (low branch).
    pub fn one_sided_bar(p: &ProblemParams, force: bool) -> Result<Self> {
        let k2 = thresholds::kappa_2star(p);
        let kb = thresholds::kappa_bar(p)?;
        let snr = p.snr();
        let high = match one_sided_bar_is_high(p) {
            Ok(h) => h,
            Err(e) if e.is_infeasible() && force => false,
            Err(_) => return Err(infeasible("one-sided bar set", snr, "kappa**", k2)),
        };
        let region = if snr < k2 {
            Region::Infeasible
        } else if high {
            Region::HighSnr
        } else {
            Region::LowSnr
        };
        Ok(Procedure {
            method: Method::OneSidedBar,
            d: p.d(),
            sigma: p.sigma(),
            rule: SelectionRule::one_sided_bar_branch(p, high)?,
            width: WidthRule::Fixed(bar_width(p, high)),
            region: tag(region, &[("kappa_2star", k2), ("kappa_bar", kb)]),
            forced: force && snr < k2,
            warnings: Vec::new(),
        })
    }

    /// Fully adaptive set: needs neither `s` nor `a`. The coverage guarantee
    /// assumes `2s <= d`; with `assume_d_ge_2s` off the procedure carries a
    /// warning saying so.
    pub fn adaptive(
        d: usize,
        sigma: f64,
        alpha: f64,
        alpha_prime: f64,
        assume_d_ge_2s: bool,
    ) -> Result<Self> {
        check_sigma(sigma)?;
        let rule = SelectionRule::adaptive(d, alpha, alpha_prime)?;
        let mut warnings = Vec::new();
        if !assume_d_ge_2s {
            warnings.push("coverage guarantee requires 2s <= d, which was not assumed".to_string());
        }
        Ok(Procedure {
            method: Method::Adaptive,
            d,
            sigma,
            rule,
            width: WidthRule::Adaptive { alpha, alpha_prime },
            region: None,
            forced: false,
            warnings,
        })
    }

    /// Non-asymptotic two-sided set. Requires `a/sigma >= phi^*` unless
    /// forced.
    pub fn two_sided_hat(p: &ProblemParams, force: bool) -> Result<Self> {
        let (ps, ph) = (thresholds::phi_star(p), thresholds::phi_hat(p));
        let snr = p.snr();
        if snr < ps && !force {
            return Err(infeasible("two-sided hat set", snr, "phi*", ps));
        }
        let high = snr >= ph;
        let u = if high { ts_hat_high_width(p)? } else { ts_hat_low_width(p) };
        let region = if snr < ps {
            Region::Infeasible
        } else if high {
            Region::HighSnr
        } else {
            Region::LowSnr
        };
        Ok(Procedure {
            method: Method::TwoSidedHat,
            d: p.d(),
            sigma: p.sigma(),
            rule: SelectionRule::two_sided_hat(p),
            width: WidthRule::Fixed(u),
            region: tag(region, &[("phi_star", ps), ("phi_hat", ph)]),
            forced: force && snr < ps,
            warnings: Vec::new(),
        })
    }

    /// Asymptotic two-sided set, intervals `[X_j - u sigma, X_j + u sigma]`.
    pub fn two_sided_bar(p: &ProblemParams, force: bool) -> Result<Self> {
        let p2 = thresholds::phi_2star(p);
        let pb = thresholds::phi_bar(p)?;
        let snr = p.snr();
        let high = match two_sided_bar_is_high(p) {
            Ok(h) => h,
            Err(e) if e.is_infeasible() && force => false,
            Err(_) => return Err(infeasible("two-sided bar set", snr, "phi**", p2)),
        };
        let region = if snr < p2 {
            Region::Infeasible
        } else if high {
            Region::HighSnr
        } else {
            Region::LowSnr
        };
        Ok(Procedure {
            method: Method::TwoSidedBar,
            d: p.d(),
            sigma: p.sigma(),
            rule: SelectionRule::two_sided_bar_branch(p, high)?,
            width: WidthRule::Fixed(ts_bar_width(p, high)),
            region: tag(region, &[("phi_2star", p2), ("phi_bar", pb)]),
            forced: force && snr < p2,
            warnings: Vec::new(),
        })
    }

    /// Bonferroni: every coordinate, width `Phi^{-1}(1 - alpha/d)`.
    pub fn bonferroni(d: usize, sigma: f64, alpha: f64) -> Result<Self> {
        check_alpha(alpha)?;
        check_sigma(sigma)?;
        if d == 0 {
            return Err(Error::InvalidParams("d must be at least 1".into()));
        }
        Ok(Procedure {
            method: Method::Bonferroni,
            d,
            sigma,
            rule: SelectionRule::full(),
            width: WidthRule::Fixed(upper_quantile(alpha / d as f64)),
            region: None,
            forced: false,
            warnings: Vec::new(),
        })
    }

    /// Oracle intervals on a known support, width `Phi^{-1}(1 - alpha/|support|)`.
    pub fn oracle(d: usize, sigma: f64, support: Vec<usize>, alpha: f64) -> Result<Self> {
        check_alpha(alpha)?;
        check_sigma(sigma)?;
        let rule = SelectionRule::known(support, d)?;
        let k = rule.select_raw(&vec![0.0; d], 1.0).len();
        if k == 0 {
            return Err(Error::InvalidParams("oracle intervals need a nonempty support".into()));
        }
        Ok(Procedure {
            method: Method::Oracle,
            d,
            sigma,
            rule,
            width: WidthRule::Fixed(upper_quantile(alpha / k as f64)),
            region: None,
            forced: false,
            warnings: Vec::new(),
        })
    }

    /// Oracle formula applied to the estimated support `X_j/sigma > sqrt(2 log d)`.
    pub fn plug_in(d: usize, sigma: f64, alpha: f64) -> Result<Self> {
        check_alpha(alpha)?;
        check_sigma(sigma)?;
        Ok(Procedure {
            method: Method::PlugIn,
            d,
            sigma,
            rule: SelectionRule::plug_in(d)?,
            width: WidthRule::PlugIn { alpha },
            region: None,
            forced: false,
            warnings: Vec::new(),
        })
    }

    pub fn method(&self) -> Method {
        self.method
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    pub fn rule(&self) -> &SelectionRule {
        &self.rule
    }

    pub fn width_rule(&self) -> WidthRule {
        self.width
    }

    pub fn region(&self) -> Option<&RegionTag> {
        self.region.as_ref()
    }

    /// True when the region check was bypassed below the cutoff.
    pub fn forced(&self) -> bool {
        self.forced
    }

    pub fn warnings(&self) -> &[String] {
        &self.warnings
    }

    pub fn side(&self) -> Side {
        self.method.side()
    }

    pub fn construct(&self, obs: &Observation) -> Result<SparseConfidenceSet> {
        Ok(self.construct_with_info(obs)?.set)
    }

    pub fn construct_with_info(&self, obs: &Observation) -> Result<Construction> {
        if obs.dim() != self.d {
            return Err(Error::InvalidParams(format!(
                "observation has {} coordinates, procedure expects d = {}",
                obs.dim(),
                self.d
            )));
        }
        if obs.sigma() != self.sigma {
            return Err(Error::InvalidParams(format!(
                "observation sigma {} differs from the procedure's sigma {}",
                obs.sigma(),
                self.sigma
            )));
        }
        self.apply(obs.x())
    }

    /// Applies the procedure to raw data of the right length.
    pub(crate) fn apply(&self, x: &[f64]) -> Result<Construction> {
        let selected = self.rule.select_raw(x, self.sigma);
        let (width, s_hat) = self.width.width_for(selected.len(), self.d)?;
        let mut set = SparseConfidenceSet::degenerate(self.d, selected);
        if let Some(u) = width {
            let half = u * self.sigma;
            let two_sided = self.side() == Side::TwoSided;
            for k in 0..set.selected().len() {
                let j = set.selected()[k];
                if two_sided {
                    set.set_interval(j, x[j] - half, x[j] + half);
                } else {
                    let l = x[j] - half;
                    set.set_interval(j, if l > 0.0 { l } else { 0.0 }, f64::INFINITY);
                }
            }
        }
        Ok(Construction { set, width, s_hat })
    }

    /// Exact `P_theta(theta in M)`.
    pub fn exact_coverage(&self, theta: &[f64]) -> Result<f64> {
        oracle::procedure_coverage(self, theta)
    }
}

pub fn build_one_sided_hat(obs: &Observation, params: &ProblemParams) -> Result<SparseConfidenceSet> {
    obs.check_dim(params)?;
    Procedure::one_sided_hat(params, false)?.construct(obs)
}

pub fn build_one_sided_bar(obs: &Observation, params: &ProblemParams) -> Result<SparseConfidenceSet> {
    obs.check_dim(params)?;
    Procedure::one_sided_bar(params, false)?.construct(obs)
}

pub fn build_adaptive(obs: &Observation, alpha: f64, alpha_prime: f64) -> Result<SparseConfidenceSet> {
    Procedure::adaptive(obs.dim(), obs.sigma(), alpha, alpha_prime, true)?.construct(obs)
}

pub fn build_two_sided_hat(obs: &Observation, params: &ProblemParams) -> Result<SparseConfidenceSet> {
    obs.check_dim(params)?;
    Procedure::two_sided_hat(params, false)?.construct(obs)
}

pub fn build_two_sided_bar(obs: &Observation, params: &ProblemParams) -> Result<SparseConfidenceSet> {
    obs.check_dim(params)?;
    Procedure::two_sided_bar(params, false)?.construct(obs)
}

pub fn build_bonferroni_one_sided(obs: &Observation, alpha: f64) -> Result<SparseConfidenceSet> {
    Procedure::bonferroni(obs.dim(), obs.sigma(), alpha)?.construct(obs)
}

pub fn build_oracle_one_sided(
    obs: &Observation,
    support: &[usize],
    alpha: f64,
) -> Result<SparseConfidenceSet> {
    Procedure::oracle(obs.dim(), obs.sigma(), support.to_vec(), alpha)?.construct(obs)
}

pub fn build_plug_in_oracle(obs: &Observation, alpha: f64) -> Result<SparseConfidenceSet> {
    Procedure::plug_in(obs.dim(), obs.sigma(), alpha)?.construct(obs)
}

/// Writes the `j,selected,lower,upper` interval CSV.
pub fn write_interval_csv<W: Write>(set: &SparseConfidenceSet, writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    let io = |e: csv::Error| Error::Io(e.to_string());
    w.write_record(["j", "selected", "lower", "upper"]).map_err(io)?;
    for j in 0..set.dim() {
        let sel = if set.is_selected(j) { "1" } else { "0" };
        w.write_record([
            j.to_string(),
            sel.to_string(),
            csv_num(set.lower()[j]),
            csv_num(set.upper()[j]),
        ])
        .map_err(io)?;
    }
    w.flush()?;
    Ok(())
}

/// Reads an interval CSV back, checking the structural invariants.
pub fn read_interval_csv<R: Read>(reader: R) -> Result<SparseConfidenceSet> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let headers = rdr
        .headers()
        .map_err(|e| Error::Csv { line: 1, msg: e.to_string() })?
        .clone();
    if headers.iter().collect::<Vec<_>>() != ["j", "selected", "lower", "upper"] {
        return Err(Error::Csv {
            line: 1,
            msg: "expected header \"j,selected,lower,upper\"".into(),
        });
    }
    let (mut selected, mut lower, mut upper) = (Vec::new(), Vec::new(), Vec::new());
    for rec in rdr.records() {
        let rec = rec.map_err(|e| Error::Csv {
            line: e.position().map_or(0, |p| p.line()),
            msg: e.to_string(),
        })?;
        let line = rec.position().map_or(0, |p| p.line());
        let bad = |msg: String| Error::Csv { line, msg };
        if rec.len() != 4 {
            return Err(bad(format!("expected 4 fields, found {}", rec.len())));
        }
        let j: usize = rec[0].parse().map_err(|_| bad(format!("invalid index {:?}", &rec[0])))?;
        if j != lower.len() {
            return Err(bad(format!("expected j = {}, found {j}", lower.len())));
        }
        match &rec[1] {
            "1" => selected.push(j),
            "0" => {}
            other => return Err(bad(format!("selected must be 0 or 1, found {other:?}"))),
        }
        let l = parse_num(&rec[2]).ok_or_else(|| bad(format!("invalid lower {:?}", &rec[2])))?;
        let u = parse_num(&rec[3]).ok_or_else(|| bad(format!("invalid upper {:?}", &rec[3])))?;
        lower.push(l);
        upper.push(u);
    }
    SparseConfidenceSet::new(selected, lower, upper)
}

#[cfg(test)]
#[allow(clippy::excessive_precision)]
mod tests {
    use super::*;

    fn sec6(a: f64) -> ProblemParams {
        ProblemParams::new(1000, 100, a, 1.0, 0.05, 0.025, 0.7).unwrap()
    }

    #[test]
    fn low_region_width_reference() {
        let proc = Procedure::one_sided_hat(&sec6(4.1), false).unwrap();
        assert_eq!(proc.region().unwrap().region, Region::LowSnr);
        match proc.width_rule() {
            WidthRule::Fixed(u) => assert!((u - 4.055_626_981_122_401_2).abs() < 1e-12),
            w => panic!("unexpected {w:?}"),
        }
        assert!((ts_hat_low_width(&sec6(5.0)) - 4.214_799_669_992_512_9).abs() < 1e-12);
    }

    #[test]
    fn below_kappa_star_is_infeasible() {
        let err = Procedure::one_sided_hat(&sec6(3.0), false).unwrap_err();
        assert!(matches!(err, Error::Infeasible { cutoff_name: "kappa*", .. }));
        let forced = Procedure::one_sided_hat(&sec6(3.0), true).unwrap();
        assert!(forced.forced());
        assert_eq!(forced.region().unwrap().region, Region::Infeasible);
    }

    #[test]
    fn high_region_width_is_well_defined() {
        let p = sec6(8.0);
        assert!(p.snr() >= thresholds::kappa_hat(&p));
        let u = hat_high_width(&p).unwrap();
        assert!(u > 0.0 && u < hat_low_width(&p));
    }

    #[test]
    fn clamp_boundary() {
        let proc = Procedure::bonferroni(2, 1.0, 0.05).unwrap();
        let c = upper_quantile(0.025);
        let set = proc.construct(&Observation::new(vec![c, c + 1.0], 1.0).unwrap()).unwrap();
        assert_eq!(set.lower()[0], 0.0);
        assert!((set.lower()[1] - 1.0).abs() < 1e-12);
        assert_eq!(set.upper()[1], f64::INFINITY);
    }

    #[test]
    fn baseline_constants() {
        match Procedure::bonferroni(1000, 1.0, 0.05).unwrap().width_rule() {
            WidthRule::Fixed(c) => assert!((c - 3.890_591_886_413_093_97).abs() < 1e-12),
            _ => unreachable!(),
        }
        match Procedure::oracle(1000, 1.0, (0..100).collect(), 0.05).unwrap().width_rule() {
            WidthRule::Fixed(c) => assert!((c - 3.290_526_731_491_894_79).abs() < 1e-12),
            _ => unreachable!(),
        }
        assert!(Procedure::oracle(10, 1.0, vec![], 0.05).is_err());
        let (u, _) = WidthRule::PlugIn { alpha: 0.05 }.width_for(1, 10).unwrap();
        assert!((u.unwrap() - upper_quantile(0.05)).abs() < 1e-15);
    }

    #[test]
    fn oracle_on_full_support_matches_bonferroni() {
        let obs = Observation::new(vec![0.5, 4.0, -1.0, 7.0], 1.0).unwrap();
        let a = build_oracle_one_sided(&obs, &[0, 1, 2, 3], 0.05).unwrap();
        let b = build_bonferroni_one_sided(&obs, 0.05).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn plug_in_with_empty_selection_is_all_zero() {
        let obs = Observation::new(vec![0.0; 50], 1.0).unwrap();
        let set = build_plug_in_oracle(&obs, 0.05).unwrap();
        assert!(set.selected().is_empty());
        assert!(set.covers(&[0.0; 50]));
    }

    #[test]
    fn adaptive_width_uses_rounded_size() {
        let mut x = vec![0.0; 1000];
        for v in x.iter_mut().take(5) {
            *v = 10.0;
        }
        let proc = Procedure::adaptive(1000, 1.0, 0.05, 0.025, true).unwrap();
        let info = proc.construct_with_info(&Observation::new(x, 1.0).unwrap()).unwrap();
        assert_eq!(info.s_hat.unwrap().value, 8);
        let c = thresholds::c_const(16.0, 0.025);
        let expect = (2.0 * (32.0 / (0.025 * c)).ln()).sqrt();
        assert!((info.width.unwrap() - expect).abs() < 1e-14);
        assert!(proc.warnings().is_empty());
        assert!(!Procedure::adaptive(1000, 1.0, 0.05, 0.025, false).unwrap().warnings().is_empty());
    }

    #[test]
    fn two_sided_width_is_symmetric() {
        let p = sec6(6.0);
        let obs = Observation::new(
            (0..1000).map(|j| if j < 3 { 7.0 } else if j < 6 { -7.0 } else { 0.0 }).collect(),
            1.0,
        )
        .unwrap();
        let set = build_two_sided_bar(&obs, &p).unwrap();
        let u = ts_bar_width(&p, Procedure::two_sided_bar(&p, false).unwrap().rule().kind()
            == crate::selectors::SelectionKind::TwoSidedBarHigh);
        for &j in set.selected() {
            assert!((set.upper()[j] - set.lower()[j] - 2.0 * u).abs() < 1e-12);
        }
        assert_eq!(set.selected(), &[0, 1, 2, 3, 4, 5]);
    }

    #[test]
    fn interval_csv_round_trip() {
        let obs = Observation::new(vec![0.0, 5.0, 0.0], 1.0).unwrap();
        let set = build_bonferroni_one_sided(&obs, 0.05).unwrap();
        let mut buf = Vec::new();
        write_interval_csv(&set, &mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("j,selected,lower,upper\n0,1,0,inf\n"));
        let back = read_interval_csv(&buf[..]).unwrap();
        assert_eq!(back.selected(), set.selected());
        assert_eq!(back.upper(), set.upper());
        for (a, b) in back.lower().iter().zip(set.lower()) {
            assert!((a - b).abs() <= 1e-8 * b.abs());
        }
    }

    #[test]
    fn method_names_round_trip() {
        for m in Method::ALL {
            assert_eq!(m.name().parse::<Method>().unwrap(), m);
        }
        assert!("nope".parse::<Method>().is_err());
    }
}
