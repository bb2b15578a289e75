//! Support estimators: coordinate-wise thresholding rules for every
//! construction, plus the dyadic rounding used by the adaptive set.

use crate::bounds::thresholds::{self, bar_regime, BarRegime};
use crate::error::{Error, Result};
use crate::gaussian::{cdf, quantile, sf};
use crate::model::{Observation, ProblemParams};

/// Which estimator a [`SelectionRule`] implements.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SelectionKind {
    OneSidedHat,
    OneSidedBarLow,
    OneSidedBarHigh,
    AdaptiveBar,
    TwoSidedHat,
    TwoSidedBarLow,
    TwoSidedBarHigh,
    PlugInSupport,
    Full,
    KnownSupport,
}

#[derive(Debug, Clone, PartialEq)]
enum Cut {
    /// `X_j / sigma >= t`
    AtLeast(f64),
    /// `X_j / sigma > t`
    Above(f64),
    /// `|X_j| / sigma >= t`
    AbsAtLeast(f64),
    All,
    /// Sorted, deduplicated indices.
    Known(Vec<usize>),
}

/// A selection rule with its cut precomputed.
///
/// Every rule decides on coordinate `j` from `X_j` alone.
#[derive(Debug, Clone, PartialEq)]
pub struct SelectionRule {
    kind: SelectionKind,
    cut: Cut,
}

impl SelectionRule {
    /// `X_j/sigma >= max(Phi^{-1}(alpha'/s) + a/sigma, Phi^{-1}(delta))`.
    pub fn one_sided_hat(p: &ProblemParams) -> Self {
        let t = (quantile(p.alpha_prime() / p.s() as f64) + p.snr()).max(quantile(p.delta()));
        SelectionRule {
            kind: SelectionKind::OneSidedHat,
            cut: Cut::AtLeast(t),
        }
    }

    /// `|X_j|/sigma >= max((Phi^{-1}(alpha'/(2s)) + a/sigma)_+, Phi^{-1}((1+delta)/2))`.
    pub fn two_sided_hat(p: &ProblemParams) -> Self {
        let first = (quantile(p.alpha_prime() / (2.0 * p.s() as f64)) + p.snr()).max(0.0);
        let t = first.max(quantile((1.0 + p.delta()) / 2.0));
        SelectionRule {
            kind: SelectionKind::TwoSidedHat,
            cut: Cut::AbsAtLeast(t),
        }
    }

    /// Selector of the asymptotic one-sided set for the given branch.
    ///
    /// Low branch cuts at `Phi^{-1}(delta)`; the high branch at
    /// `sqrt(2 log(2(d-s) / ((alpha-alpha') C_{d-s,alpha-alpha'})))`.
    pub fn one_sided_bar_branch(p: &ProblemParams, high: bool) -> Result<Self> {
        Ok(if high {
            SelectionRule {
                kind: SelectionKind::OneSidedBarHigh,
                cut: Cut::AtLeast(thresholds::bar_high_cut(p)?),
            }
        } else {
            SelectionRule {
                kind: SelectionKind::OneSidedBarLow,
                cut: Cut::AtLeast(quantile(p.delta())),
            }
        })
    }

    /// Two-sided counterpart of [`SelectionRule::one_sided_bar_branch`].
    pub fn two_sided_bar_branch(p: &ProblemParams, high: bool) -> Result<Self> {
        Ok(if high {
            SelectionRule {
                kind: SelectionKind::TwoSidedBarHigh,
                cut: Cut::AbsAtLeast(thresholds::bar_ts_high_cut(p)?),
            }
        } else {
            SelectionRule {
                kind: SelectionKind::TwoSidedBarLow,
                cut: Cut::AbsAtLeast(quantile((1.0 + p.delta()) / 2.0)),
            }
        })
    }

    /// Cut `sqrt(2 log(2d / ((alpha-alpha') C_{d,alpha-alpha'})))`; uses no
    /// knowledge of `s` or `a`.
    pub fn adaptive(d: usize, alpha: f64, alpha_prime: f64) -> Result<Self> {
        check_levels(alpha, alpha_prime)?;
        if d == 0 {
            return Err(Error::InvalidParams("d must be at least 1".into()));
        }
        let d = d as f64;
        let b = alpha - alpha_prime;
        Ok(SelectionRule {
            kind: SelectionKind::AdaptiveBar,
            cut: Cut::AtLeast(thresholds::asym_root(2.0 * d, d, b)),
        })
    }

    /// `X_j / sigma > sqrt(2 log d)`, strict.
    pub fn plug_in(d: usize) -> Result<Self> {
        if d < 2 {
            return Err(Error::InvalidParams(format!("plug-in selection needs d >= 2, got {d}")));
        }
        Ok(SelectionRule {
            kind: SelectionKind::PlugInSupport,
            cut: Cut::Above((2.0 * (d as f64).ln()).sqrt()),
        })
    }

    /// Selects every coordinate.
    pub fn full() -> Self {
        SelectionRule {
            kind: SelectionKind::Full,
            cut: Cut::All,
        }
    }

    /// Selects exactly `support`, regardless of the data.
    pub fn known(mut support: Vec<usize>, d: usize) -> Result<Self> {
        support.sort_unstable();
        support.dedup();
        if let Some(&j) = support.last().filter(|&&j| j >= d) {
            return Err(Error::InvalidParams(format!("support index {j} out of range for d = {d}")));
        }
        Ok(SelectionRule {
            kind: SelectionKind::KnownSupport,
            cut: Cut::Known(support),
        })
    }

    pub fn kind(&self) -> SelectionKind {
        self.kind
    }

    /// The cut in sigma units; `-inf` for [`SelectionKind::Full`] and `None`
    /// for a known support.
    pub fn threshold(&self) -> Option<f64> {
        match self.cut {
            Cut::AtLeast(t) | Cut::Above(t) | Cut::AbsAtLeast(t) => Some(t),
            Cut::All => Some(f64::NEG_INFINITY),
            Cut::Known(_) => None,
        }
    }

    pub fn is_two_sided(&self) -> bool {
        matches!(self.cut, Cut::AbsAtLeast(_))
    }

    /// Whether the rule is claimed to keep the null selection rate at or
    /// below `1 - delta`.
    pub fn claims_fdelta(&self) -> bool {
        !matches!(
            self.kind,
            SelectionKind::Full | SelectionKind::PlugInSupport | SelectionKind::KnownSupport
        )
    }

    /// Decision for coordinate `j` with observed value `x_j`.
    pub fn selects(&self, j: usize, x_j: f64, sigma: f64) -> bool {
        let z = x_j / sigma;
        match &self.cut {
            Cut::AtLeast(t) => z >= *t,
            Cut::Above(t) => z > *t,
            Cut::AbsAtLeast(t) => z.abs() >= *t,
            Cut::All => true,
            Cut::Known(set) => set.binary_search(&j).is_ok(),
        }
    }

    /// Selected indices in increasing order.
    pub fn select_raw(&self, x: &[f64], sigma: f64) -> Vec<usize> {
        if let Cut::Known(set) = &self.cut {
            return set.iter().copied().filter(|&j| j < x.len()).collect();
        }
        (0..x.len()).filter(|&j| self.selects(j, x[j], sigma)).collect()
    }

    pub fn select(&self, obs: &Observation) -> Vec<usize> {
        self.select_raw(obs.x(), obs.sigma())
    }

    /// `P(j selected)` when `theta_j / sigma = mu`.
    pub fn selection_prob(&self, j: usize, mu: f64) -> f64 {
        match &self.cut {
            Cut::AtLeast(t) | Cut::Above(t) => sf(t - mu),
            Cut::AbsAtLeast(t) => {
                if *t <= 0.0 {
                    1.0
                } else {
                    sf(t - mu) + cdf(-t - mu)
                }
            }
            Cut::All => 1.0,
            Cut::Known(set) => f64::from(u8::from(set.binary_search(&j).is_ok())),
        }
    }

    /// Selection probability of a null coordinate that is not in a known
    /// support; for threshold rules this does not depend on the index.
    pub fn null_selection_prob(&self) -> f64 {
        match &self.cut {
            Cut::Known(_) => 0.0,
            _ => self.selection_prob(usize::MAX, 0.0),
        }
    }

    pub(crate) fn cut_kind(&self) -> CutView<'_> {
        match &self.cut {
            Cut::AtLeast(t) | Cut::Above(t) => CutView::Upper(*t),
            Cut::AbsAtLeast(t) => CutView::Abs(*t),
            Cut::All => CutView::Upper(f64::NEG_INFINITY),
            Cut::Known(set) => CutView::Known(set),
        }
    }
}

/// Read-only view of a rule's cut, for the analytic oracles.
#[derive(Debug, Clone, Copy)]
pub(crate) enum CutView<'a> {
    Upper(f64),
    Abs(f64),
    Known(&'a [usize]),
}

fn check_levels(alpha: f64, alpha_prime: f64) -> Result<()> {
    if !(alpha > 0.0 && alpha < 1.0 && alpha_prime > 0.0 && alpha_prime < alpha) {
        return Err(Error::InvalidParams(format!(
            "levels must satisfy 0 < alpha' < alpha < 1, got alpha = {alpha}, alpha' = {alpha_prime}"
        )));
    }
    Ok(())
}

/// Which branch the asymptotic one-sided construction uses at the declared
/// `a/sigma`: `Ok(false)` for low, `Ok(true)` for high.
pub fn one_sided_bar_is_high(p: &ProblemParams) -> Result<bool> {
    let lower = thresholds::kappa_2star(p);
    let switch = thresholds::kappa_bar(p)?;
    match bar_regime(p.snr(), lower, switch) {
        BarRegime::Undefined => Err(Error::Regime(format!(
            "bar construction undefined below kappa** = {lower}: a/sigma = {}",
            p.snr()
        ))),
        r => Ok(r == BarRegime::High),
    }
}

/// Two-sided counterpart of [`one_sided_bar_is_high`].
pub fn two_sided_bar_is_high(p: &ProblemParams) -> Result<bool> {
    let lower = thresholds::phi_2star(p);
    let switch = thresholds::phi_bar(p)?;
    match bar_regime(p.snr(), lower, switch) {
        BarRegime::Undefined => Err(Error::Regime(format!(
            "two-sided bar construction undefined below phi** = {lower}: a/sigma = {}",
            p.snr()
        ))),
        r => Ok(r == BarRegime::High),
    }
}

pub fn select_one_sided_hat(obs: &Observation, params: &ProblemParams) -> Vec<usize> {
    SelectionRule::one_sided_hat(params).select(obs)
}

pub fn select_two_sided_hat(obs: &Observation, params: &ProblemParams) -> Vec<usize> {
    SelectionRule::two_sided_hat(params).select(obs)
}

/// Applies the branch chosen from the declared `(s, a)`; fails below
/// `kappa^**`.
pub fn select_one_sided_bar(obs: &Observation, params: &ProblemParams) -> Result<Vec<usize>> {
    let high = one_sided_bar_is_high(params)?;
    Ok(SelectionRule::one_sided_bar_branch(params, high)?.select(obs))
}

pub fn select_adaptive(obs: &Observation, alpha: f64, alpha_prime: f64) -> Result<Vec<usize>> {
    Ok(SelectionRule::adaptive(obs.dim(), alpha, alpha_prime)?.select(obs))
}

pub fn select_plug_in(obs: &Observation) -> Result<Vec<usize>> {
    Ok(SelectionRule::plug_in(obs.dim())?.select(obs))
}

/// Result of [`dyadic_round`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DyadicRound {
    pub value: usize,
    /// Set when the natural value `2^m` exceeded the cap and was reduced.
    pub capped: bool,
}

/// `2^m` with `2^{m-1} <= size < 2^m`, at least 2, capped at `2^T` where `T`
/// is the largest integer with `2^T <= d` (and never below 2).
pub fn dyadic_round(size: usize, d: usize) -> Result<DyadicRound> {
    if d == 0 || size > d {
        return Err(Error::InvalidParams(format!(
            "dyadic_round needs 0 <= size <= d with d >= 1, got size = {size}, d = {d}"
        )));
    }
    let natural = if size <= 1 {
        2
    } else {
        // Smallest power of two strictly greater than size.
        1usize << (usize::BITS - size.leading_zeros())
    };
    let cap = (1usize << (usize::BITS - 1 - d.leading_zeros())).max(2);
    Ok(if natural > cap {
        DyadicRound { value: cap, capped: true }
    } else {
        DyadicRound { value: natural, capped: false }
    })
}

#[cfg(test)]
#[allow(clippy::excessive_precision)]
mod tests {
    use super::*;

    fn sec6(a: f64) -> ProblemParams {
        ProblemParams::new(1000, 100, a, 1.0, 0.05, 0.025, 0.7).unwrap()
    }

    #[test]
    fn hat_threshold_reference() {
        let t = SelectionRule::one_sided_hat(&sec6(5.0)).threshold().unwrap();
        assert!((t - (5.0 - 3.480_756_404_346_212_78)).abs() < 1e-12);
        let low = SelectionRule::one_sided_hat(&sec6(0.1)).threshold().unwrap();
        assert!((low - 0.524_400_512_708_040_78).abs() < 1e-14);
    }

    #[test]
    fn null_rate_at_delta_branch() {
        let rule = SelectionRule::one_sided_hat(&sec6(0.1));
        assert!((rule.null_selection_prob() - 0.3).abs() < 1e-15);
        let ts = SelectionRule::two_sided_hat(&sec6(1e-9));
        assert!((ts.threshold().unwrap() - 1.036_433_389_493_789_58).abs() < 1e-14);
        assert!((ts.null_selection_prob() - 0.3).abs() < 1e-15);
    }

    #[test]
    fn threshold_comparisons() {
        let obs = Observation::new(vec![10.0, -10.0], 1.0).unwrap();
        assert_eq!(select_one_sided_hat(&obs, &sec6(5.0)), vec![0]);
        let obs = Observation::new(vec![0.1, -5.0], 1.0).unwrap();
        assert_eq!(select_two_sided_hat(&obs, &sec6(0.5)), vec![1]);
    }

    #[test]
    fn bar_cuts() {
        let low = SelectionRule::one_sided_bar_branch(&sec6(5.0), false).unwrap();
        assert!((low.threshold().unwrap() - 0.524_400_512_708_040_78).abs() < 1e-14);
        let high = SelectionRule::one_sided_bar_branch(&sec6(5.0), true).unwrap();
        assert!((high.threshold().unwrap() - 4.181_778_887_539_194_82).abs() < 1e-12);
        // d = 2s: d - s = s.
        let p = ProblemParams::new(200, 100, 5.0, 1.0, 0.05, 0.025, 0.7).unwrap();
        let n: f64 = 100.0;
        let c = 2.0 * (std::f64::consts::PI * (n / 0.025).ln()).sqrt();
        let expect = (2.0 * (2.0 * n / (0.025 * c)).ln()).sqrt();
        let got = SelectionRule::one_sided_bar_branch(&p, true).unwrap().threshold().unwrap();
        assert!((got - expect).abs() < 1e-14);
    }

    #[test]
    fn bar_regime_error_below_kappa_2star() {
        let obs = Observation::new(vec![0.0; 1000], 1.0).unwrap();
        let err = select_one_sided_bar(&obs, &sec6(1.0)).unwrap_err();
        assert!(err.is_infeasible());
        assert!(err.to_string().contains("undefined below"));
    }

    #[test]
    fn adaptive_and_plug_in_cuts() {
        let a = SelectionRule::adaptive(1000, 0.05, 0.025).unwrap().threshold().unwrap();
        assert!((a - 4.205_710_773_179_884_49).abs() < 1e-12);
        let big = SelectionRule::adaptive(1_000_000, 0.05, 0.025).unwrap().threshold().unwrap();
        assert!(big > a);
        let pi = SelectionRule::plug_in(1000).unwrap();
        assert!((pi.threshold().unwrap() - 3.716_922_188_849_838_45).abs() < 1e-12);
        let t = pi.threshold().unwrap();
        assert!(!pi.selects(0, t, 1.0));
        assert!(pi.selects(0, t * (1.0 + 1e-15), 1.0));
        let obs = Observation::new(vec![1.0; 10], 1.0).unwrap();
        assert!(select_adaptive(&obs, 0.05, 0.025).unwrap().is_empty());
    }

    #[test]
    fn dyadic_examples() {
        assert_eq!(dyadic_round(5, 1000).unwrap(), DyadicRound { value: 8, capped: false });
        assert_eq!(dyadic_round(8, 1000).unwrap(), DyadicRound { value: 16, capped: false });
        assert_eq!(dyadic_round(0, 1000).unwrap(), DyadicRound { value: 2, capped: false });
        assert_eq!(dyadic_round(1, 1000).unwrap(), DyadicRound { value: 2, capped: false });
        assert_eq!(dyadic_round(2, 1000).unwrap(), DyadicRound { value: 4, capped: false });
        assert_eq!(dyadic_round(600, 1000).unwrap(), DyadicRound { value: 512, capped: true });
        assert_eq!(dyadic_round(512, 1024).unwrap(), DyadicRound { value: 1024, capped: false });
        assert_eq!(dyadic_round(1, 1).unwrap(), DyadicRound { value: 2, capped: false });
        assert!(dyadic_round(11, 10).is_err());
    }

    #[test]
    fn known_support_rule() {
        let rule = SelectionRule::known(vec![3, 1, 3], 5).unwrap();
        assert_eq!(rule.select_raw(&[0.0; 5], 1.0), vec![1, 3]);
        assert_eq!(rule.selection_prob(1, 0.0), 1.0);
        assert_eq!(rule.selection_prob(2, 9.0), 0.0);
        assert!(SelectionRule::known(vec![5], 5).is_err());
    }
}
