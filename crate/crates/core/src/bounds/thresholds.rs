//! SNR cutoffs separating the infeasible, low-SNR, and high-SNR regimes.
//!
//! Every cutoff is in sigma units and compared against `a / sigma`.

use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::gaussian::{quantile, upper_quantile};
use crate::model::ProblemParams;

/// Default `c_s` sequence value, `log(s + 1)`.
pub fn default_c_s(s: usize) -> f64 {
    (s as f64 + 1.0).ln()
}

/// Default constant `C'` used by the asymptotic cutoffs.
pub const DEFAULT_C_PRIME: f64 = 10.0;

/// `C_{n,beta} = 2 sqrt(pi log(n / beta))`.
pub fn c_const(n: f64, beta: f64) -> f64 {
    2.0 * (PI * (n / beta).ln()).sqrt()
}

/// `sqrt(2 log x)`, with the radicand clamped at zero for `x < 1`.
pub(crate) fn sqrt_2log(x: f64) -> f64 {
    (2.0 * x.ln()).max(0.0).sqrt()
}

/// `sqrt(2 log(n / (beta C_{n,beta})))`, the recurring asymptotic root.
pub(crate) fn asym_root(scale: f64, n: f64, beta: f64) -> f64 {
    sqrt_2log(scale / (beta * c_const(n, beta)))
}

fn beta(p: &ProblemParams) -> f64 {
    p.alpha() - p.alpha_prime()
}

fn need_gap(p: &ProblemParams, name: &'static str) -> Result<f64> {
    if p.d() <= p.s() {
        return Err(Error::DegenerateThreshold {
            name,
            msg: format!("requires d > s, got d = s = {}", p.s()),
        });
    }
    Ok((p.d() - p.s()) as f64)
}

/// `kappa^* = Phi^{-1}(delta) - Phi^{-1}(alpha'/s)`.
pub fn kappa_star(p: &ProblemParams) -> f64 {
    quantile(p.delta()) - quantile(p.alpha_prime() / p.s() as f64)
}

/// `kappa_hat = -Phi^{-1}((alpha - alpha')/d) - Phi^{-1}(alpha'/s)`.
pub fn kappa_hat(p: &ProblemParams) -> f64 {
    upper_quantile(beta(p) / p.d() as f64) - quantile(p.alpha_prime() / p.s() as f64)
}

fn kappa_root(p: &ProblemParams) -> f64 {
    let s = p.s() as f64;
    asym_root(s, s, p.alpha_prime())
}

/// `kappa^** = Phi^{-1}(delta) + sqrt(2 log(s / (C_{s,alpha'} alpha')))`.
pub fn kappa_2star(p: &ProblemParams) -> f64 {
    quantile(p.delta()) + kappa_root(p)
}

/// `kappa_bar`, the switch between the two branches of the asymptotic set.
pub fn kappa_bar(p: &ProblemParams) -> Result<f64> {
    let n = need_gap(p, "kappa_bar")?;
    Ok(asym_root(2.0 * n, n, beta(p)) + kappa_root(p))
}

/// High-branch selection cut of the asymptotic one-sided set.
pub fn bar_high_cut(p: &ProblemParams) -> Result<f64> {
    let n = need_gap(p, "kappa_bar")?;
    Ok(asym_root(2.0 * n, n, beta(p)))
}

fn check_c_s(p: &ProblemParams, c_s: f64) -> Result<f64> {
    let s = p.s() as f64;
    if !(c_s > 0.0 && c_s < s) {
        return Err(Error::InvalidParams(format!("c_s = {c_s} must lie in (0, s = {s})")));
    }
    Ok(c_s / s)
}

/// `kappa_* = Phi^{-1}(delta) - Phi^{-1}(c_s / s)`; below it no one-sided
/// sparse confidence set has coverage bounded away from zero.
pub fn kappa_star_lower(p: &ProblemParams, c_s: f64) -> Result<f64> {
    let r = check_c_s(p, c_s)?;
    Ok(quantile(p.delta()) - quantile(r))
}

/// `phi_* = Phi^{-1}((1 + delta)/2) - Phi^{-1}(c_s / s)`.
pub fn phi_star_lower(p: &ProblemParams, c_s: f64) -> Result<f64> {
    let r = check_c_s(p, c_s)?;
    Ok(quantile((1.0 + p.delta()) / 2.0) - quantile(r))
}

/// `phi^* = Phi^{-1}((1 + delta)/2) - Phi^{-1}(alpha'/(2s))`.
pub fn phi_star(p: &ProblemParams) -> f64 {
    quantile((1.0 + p.delta()) / 2.0) - quantile(p.alpha_prime() / (2.0 * p.s() as f64))
}

/// Two-sided analogue of `kappa_hat`.
pub fn phi_hat(p: &ProblemParams) -> f64 {
    upper_quantile(beta(p) / (2.0 * p.d() as f64))
        - quantile(p.alpha_prime() / (2.0 * p.s() as f64))
}

fn phi_root(p: &ProblemParams) -> f64 {
    let s = p.s() as f64;
    asym_root(2.0 * s, 2.0 * s, p.alpha_prime())
}

/// `phi^** = Phi^{-1}((1 + delta)/2) + sqrt(2 log(2s / (C_{2s,alpha'} alpha')))`.
pub fn phi_2star(p: &ProblemParams) -> f64 {
    quantile((1.0 + p.delta()) / 2.0) + phi_root(p)
}

/// `phi_bar`, the branch switch of the asymptotic two-sided set.
pub fn phi_bar(p: &ProblemParams) -> Result<f64> {
    Ok(bar_ts_high_cut_named(p, "phi_bar")? + phi_root(p))
}

/// High-branch selection cut of the asymptotic two-sided set.
pub fn bar_ts_high_cut(p: &ProblemParams) -> Result<f64> {
    bar_ts_high_cut_named(p, "phi_bar")
}

fn bar_ts_high_cut_named(p: &ProblemParams, name: &'static str) -> Result<f64> {
    let n = need_gap(p, name)?;
    Ok(asym_root(4.0 * n, 2.0 * n, beta(p)))
}

fn loglog_terms(p: &ProblemParams, c_prime: f64, name: &'static str) -> Result<(f64, f64, f64, f64)> {
    if !(c_prime.is_finite() && c_prime > 0.0) {
        return Err(Error::InvalidParams(format!("C' = {c_prime} must be positive")));
    }
    let n = need_gap(p, name)?;
    if p.s() < 2 || n < 2.0 {
        return Err(Error::DegenerateThreshold {
            name,
            msg: "log log terms need s >= 2 and d - s >= 2".into(),
        });
    }
    let s = p.s() as f64;
    let lln = n.ln().ln();
    let lls = s.ln().ln();
    let first = (2.0 * n.ln() - lln + c_prime).sqrt();
    let second = (2.0 * s.ln() - lls + c_prime).sqrt();
    Ok((first, second, lln, lls))
}

/// `kappa_tilde = sqrt(2 log(d-s) - log log(d-s) + C')
///     + max(sqrt(2 log s - log log s + C'), xi_d)` with
/// `xi_d = sqrt((log log(d-s) - log log s)_+)`.
pub fn kappa_tilde(p: &ProblemParams, c_prime: f64) -> Result<f64> {
    let (first, second, lln, lls) = loglog_terms(p, c_prime, "kappa_tilde")?;
    let xi = (lln - lls).max(0.0).sqrt();
    Ok(first + second.max(xi))
}

/// Adaptive-set counterpart of [`kappa_tilde`] with
/// `xi_bar_d = sqrt((2 log log(d-s) - log log s)_+)`.
pub fn kappa_tilde_adaptive(p: &ProblemParams, c_prime: f64) -> Result<f64> {
    let (first, second, lln, lls) = loglog_terms(p, c_prime, "kappa_tilde_adaptive")?;
    let xi = (2.0 * lln - lls).max(0.0).sqrt();
    Ok(first + second.max(xi))
}

/// Where a given `a/sigma` falls relative to the non-asymptotic cutoffs.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Regime {
    /// Below the lower-bound cutoff: no valid construction exists.
    ProvablyInfeasible,
    /// Between the lower-bound cutoff and the construction's requirement.
    Undetermined,
    LowSnr,
    HighSnr,
}

impl Regime {
    pub fn as_str(self) -> &'static str {
        match self {
            Regime::ProvablyInfeasible => "infeasible",
            Regime::Undetermined => "gap",
            Regime::LowSnr => "low_snr",
            Regime::HighSnr => "high_snr",
        }
    }
}

/// Branch of an asymptotic construction at a given `a/sigma`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BarRegime {
    Undefined,
    Low,
    High,
}

impl BarRegime {
    pub fn as_str(self) -> &'static str {
        match self {
            BarRegime::Undefined => "undefined",
            BarRegime::Low => "low",
            BarRegime::High => "high",
        }
    }
}

/// All cutoffs for one parameter set.
#[derive(Debug, Clone, PartialEq)]
pub struct ThresholdReport {
    pub kappa_star_lower: f64,
    pub kappa_star: f64,
    pub kappa_hat: f64,
    pub kappa_2star: f64,
    pub kappa_bar: f64,
    pub kappa_tilde: f64,
    pub kappa_tilde_adaptive: f64,
    pub phi_star_lower: f64,
    pub phi_star: f64,
    pub phi_hat: f64,
    pub phi_2star: f64,
    pub phi_bar: f64,
    pub c_s: f64,
    pub c_prime: f64,
}

/// Evaluates every cutoff for `p`.
///
/// Fails with a [`Error::DegenerateThreshold`] naming the first cutoff that
/// is undefined, e.g. `kappa_bar` when `s = d`.
pub fn thresholds(p: &ProblemParams, c_s: f64, c_prime: f64) -> Result<ThresholdReport> {
    Ok(ThresholdReport {
        kappa_star_lower: kappa_star_lower(p, c_s)?,
        kappa_star: kappa_star(p),
        kappa_hat: kappa_hat(p),
        kappa_2star: kappa_2star(p),
        kappa_bar: kappa_bar(p)?,
        kappa_tilde: kappa_tilde(p, c_prime)?,
        kappa_tilde_adaptive: kappa_tilde_adaptive(p, c_prime)?,
        phi_star_lower: phi_star_lower(p, c_s)?,
        phi_star: phi_star(p),
        phi_hat: phi_hat(p),
        phi_2star: phi_2star(p),
        phi_bar: phi_bar(p)?,
        c_s,
        c_prime,
    })
}

fn classify(snr: f64, lower: f64, start: f64, high: f64) -> Regime {
    if snr >= start {
        if snr >= high {
            Regime::HighSnr
        } else {
            Regime::LowSnr
        }
    } else if snr < lower {
        Regime::ProvablyInfeasible
    } else {
        Regime::Undetermined
    }
}

impl ThresholdReport {
    /// One-sided regime: `[kappa^*, kappa_hat)` is low SNR and
    /// `a/sigma >= max(kappa^*, kappa_hat)` is high SNR.
    pub fn classify_one_sided(&self, snr: f64) -> Regime {
        classify(snr, self.kappa_star_lower, self.kappa_star, self.kappa_hat)
    }

    pub fn classify_two_sided(&self, snr: f64) -> Regime {
        classify(snr, self.phi_star_lower, self.phi_star, self.phi_hat)
    }

    pub fn bar_one_sided(&self, snr: f64) -> BarRegime {
        bar_regime(snr, self.kappa_2star, self.kappa_bar)
    }

    pub fn bar_two_sided(&self, snr: f64) -> BarRegime {
        bar_regime(snr, self.phi_2star, self.phi_bar)
    }

    /// `(name, value)` pairs in a fixed order.
    pub fn entries(&self) -> Vec<(&'static str, f64)> {
        vec![
            ("kappa_star_lower", self.kappa_star_lower),
            ("kappa_star", self.kappa_star),
            ("kappa_hat", self.kappa_hat),
            ("kappa_2star", self.kappa_2star),
            ("kappa_bar", self.kappa_bar),
            ("kappa_tilde", self.kappa_tilde),
            ("kappa_tilde_adaptive", self.kappa_tilde_adaptive),
            ("phi_star_lower", self.phi_star_lower),
            ("phi_star", self.phi_star),
            ("phi_hat", self.phi_hat),
            ("phi_2star", self.phi_2star),
            ("phi_bar", self.phi_bar),
            ("c_s", self.c_s),
            ("c_prime", self.c_prime),
        ]
    }
}

pub(crate) fn bar_regime(snr: f64, lower: f64, switch: f64) -> BarRegime {
    if snr < lower {
        BarRegime::Undefined
    } else if snr < switch {
        BarRegime::Low
    } else {
        BarRegime::High
    }
}

#[cfg(test)]
#[allow(clippy::excessive_precision)]
mod tests {
    use super::*;

    fn sec6() -> ProblemParams {
        ProblemParams::new(1000, 100, 5.0, 1.0, 0.05, 0.025, 0.7).unwrap()
    }

    #[test]
    fn kappa_star_reference() {
        // 50-digit reference: Phi^{-1}(0.7) - Phi^{-1}(0.00025).
        assert!((kappa_star(&sec6()) - 4.005_156_917_054_253_56).abs() < 1e-12);
    }

    #[test]
    fn asymptotic_cutoffs_reference() {
        let p = sec6();
        let c = c_const(900.0, 0.025);
        let by_hand = (2.0 * (1800.0 / (0.025 * c)).ln()).sqrt();
        assert!((bar_high_cut(&p).unwrap() - by_hand).abs() < 1e-14);
        assert!((bar_high_cut(&p).unwrap() - 4.181_778_887_539_194_82).abs() < 1e-12);
    }

    #[test]
    fn ordering_at_reference_config() {
        let p = sec6();
        let r = thresholds(&p, default_c_s(100), DEFAULT_C_PRIME).unwrap();
        // The asymptotic root sqrt(2 log(s/(C alpha'))) = 3.4557 undercuts
        // -Phi^{-1}(alpha'/s) = 3.4808 here, so kappa** sits just below kappa*.
        assert!((r.kappa_2star - (0.524_400_512_708_040_78 + 3.455_652_859_644_144_08)).abs() < 1e-12);
        assert!(r.kappa_2star < r.kappa_star);
        assert!(r.kappa_bar > r.kappa_2star);
        assert!(r.kappa_star_lower < r.kappa_star);
        assert!(r.phi_star > r.kappa_star);
    }

    #[test]
    fn zero_signal_is_infeasible() {
        let p = sec6();
        let r = thresholds(&p, default_c_s(100), DEFAULT_C_PRIME).unwrap();
        // delta = 0.7 > c_s / s, so kappa_* > 0.
        assert!(r.kappa_star_lower > 0.0);
        assert_eq!(r.classify_one_sided(0.0), Regime::ProvablyInfeasible);
        assert_eq!(r.classify_one_sided(r.kappa_star), Regime::LowSnr);
        assert_eq!(r.classify_one_sided(r.kappa_hat.max(r.kappa_star)), Regime::HighSnr);
        assert_eq!(r.classify_one_sided(0.5 * (r.kappa_star_lower + r.kappa_star)), Regime::Undetermined);
    }

    #[test]
    fn low_region_empties_as_delta_grows() {
        let p = ProblemParams::new(1000, 100, 5.0, 1.0, 0.05, 0.025, 1.0 - 1e-9).unwrap();
        assert!(kappa_star(&p) > kappa_hat(&p));
    }

    #[test]
    fn degenerate_gap_names_threshold() {
        let p = ProblemParams::new(10, 10, 5.0, 1.0, 0.05, 0.025, 0.7).unwrap();
        match thresholds(&p, 1.0, 10.0) {
            Err(Error::DegenerateThreshold { name, .. }) => assert_eq!(name, "kappa_bar"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn kappa_tilde_takes_max_inside_second_term() {
        let p = sec6();
        let n: f64 = 900.0;
        let s: f64 = 100.0;
        let first = (2.0 * n.ln() - n.ln().ln() + 10.0).sqrt();
        let second = (2.0 * s.ln() - s.ln().ln() + 10.0).sqrt();
        assert!((kappa_tilde(&p, 10.0).unwrap() - (first + second)).abs() < 1e-12);
        assert!(kappa_tilde_adaptive(&p, 10.0).unwrap() >= kappa_tilde(&p, 10.0).unwrap());
    }
}
