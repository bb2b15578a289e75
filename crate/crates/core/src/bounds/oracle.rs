//! Exact coverage, distance, and selection-count oracles.
//!
//! Coordinates are independent and every selection rule decides on `X_j`
//! alone, so coverage factorises over coordinates. For fixed widths it is a
//! plain product; when the width depends on `|S|` it is a sum over `|S| = k`
//! of products, evaluated with generating polynomials in log space.

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::gaussian::{cdf, pdf, prob_between, sf, Probability};
use crate::intervals::{Procedure, WidthRule};
use crate::model::{MeanVector, Side};
use crate::selectors::{CutView, SelectionRule};

/// Per-coordinate selection behaviour.
#[derive(Debug, Clone, Copy)]
enum Sel {
    /// `X_j / sigma >= t` (ties have probability zero).
    Upper(f64),
    /// `|X_j| / sigma >= t`.
    Abs(f64),
    Always,
    Never,
}

impl Sel {
    fn for_coord(rule: &SelectionRule, j: usize) -> Sel {
        match rule.cut_kind() {
            CutView::Upper(t) if t == f64::NEG_INFINITY => Sel::Always,
            CutView::Upper(t) => Sel::Upper(t),
            CutView::Abs(t) if t <= 0.0 => Sel::Always,
            CutView::Abs(t) => Sel::Abs(t),
            CutView::Known(set) => {
                if set.binary_search(&j).is_ok() {
                    Sel::Always
                } else {
                    Sel::Never
                }
            }
        }
    }
}

/// `(P(not selected, covered), P(selected, covered))` for `mu = theta_j/sigma`
/// and width `u`.
fn split(sel: Sel, side: Side, mu: f64, u: f64) -> (f64, f64) {
    let null = mu == 0.0;
    match side {
        Side::OneSided => {
            if mu < 0.0 {
                return (0.0, 0.0);
            }
            match sel {
                Sel::Never => (f64::from(u8::from(null)), 0.0),
                Sel::Always => (0.0, cdf(u)),
                Sel::Upper(t) => {
                    let miss = if null { cdf(t) } else { 0.0 };
                    (miss, prob_between(t - mu, u))
                }
                Sel::Abs(t) => {
                    let miss = if null { prob_between(-t, t) } else { 0.0 };
                    let hit = prob_between(t - mu, u)
                        + prob_between(f64::NEG_INFINITY, (-t - mu).min(u));
                    (miss, hit)
                }
            }
        }
        Side::TwoSided => match sel {
            Sel::Never => (f64::from(u8::from(null)), 0.0),
            Sel::Always => (0.0, prob_between(-u, u)),
            Sel::Upper(t) => {
                let miss = if null { cdf(t) } else { 0.0 };
                (miss, prob_between((t - mu).max(-u), u))
            }
            Sel::Abs(t) => {
                let miss = if null { prob_between(-t, t) } else { 0.0 };
                let hit =
                    prob_between((t - mu).max(-u), u) + prob_between(-u, (-t - mu).min(u));
                (miss, hit)
            }
        },
    }
}

/// `ln P(coordinate covered)` for a fixed width, keeping relative accuracy
/// in the non-coverage probability when it is small.
fn ln_cover_fixed(sel: Sel, side: Side, mu: f64, u: f64) -> f64 {
    let null = mu == 0.0;
    // Non-coverage q where a cancellation-free form is available.
    let q = match (side, sel) {
        (_, Sel::Never) => return if null { 0.0 } else { f64::NEG_INFINITY },
        (Side::OneSided, _) if mu < 0.0 => return f64::NEG_INFINITY,
        (Side::OneSided, Sel::Always) => Some(sf(u)),
        (Side::OneSided, Sel::Upper(t)) => {
            if null {
                Some(sf(t.max(u)))
            } else if t - mu >= u {
                return f64::NEG_INFINITY;
            } else {
                Some(cdf(t - mu) + sf(u))
            }
        }
        (Side::TwoSided, Sel::Always) => Some(2.0 * sf(u)),
        (Side::TwoSided, Sel::Abs(t)) => {
            if null {
                Some(2.0 * sf(t.max(u)))
            } else {
                Some(2.0 * sf(u) + prob_between((-t - mu).max(-u), (t - mu).min(u)))
            }
        }
        _ => None,
    };
    match q {
        Some(q) if q < 0.5 => (-q).ln_1p(),
        _ => {
            let (miss, hit) = split(sel, side, mu, u);
            (miss + hit).ln()
        }
    }
}

fn check_sigma(sigma: f64) -> Result<()> {
    if !(sigma.is_finite() && sigma > 0.0) {
        return Err(Error::InvalidParams(format!("sigma = {sigma} must be positive")));
    }
    Ok(())
}

fn check_cut(t_sel: f64, u: f64) -> Result<()> {
    if t_sel.is_nan() || t_sel == f64::INFINITY {
        return Err(Error::InvalidParams(format!("selection cut {t_sel} is invalid")));
    }
    if !u.is_finite() {
        return Err(Error::InvalidParams(format!("width constant {u} must be finite")));
    }
    Ok(())
}

fn fixed_product(theta: &[f64], sigma: f64, side: Side, sel: impl Fn(usize) -> Sel, u: f64) -> f64 {
    let mut ln = 0.0;
    for (j, &t) in theta.iter().enumerate() {
        ln += ln_cover_fixed(sel(j), side, t / sigma, u);
        if ln == f64::NEG_INFINITY {
            return 0.0;
        }
    }
    ln.exp()
}

/// Exact coverage of a one-sided construction with selection
/// `X_j/sigma >= t_sel` and intervals `[(X_j - u sigma)_+, inf)`:
///
/// `prod_{theta_j > 0} [Phi(u) - Phi(t_sel - theta_j/sigma)]_+
///     * prod_{theta_j = 0} Phi(max(t_sel, u))`.
///
/// `t_sel = -inf` means every coordinate is selected.
pub fn exact_coverage_one_sided(
    theta: &MeanVector,
    t_sel: f64,
    u: f64,
    sigma: f64,
) -> Result<Probability> {
    check_sigma(sigma)?;
    check_cut(t_sel, u)?;
    let sel = if t_sel == f64::NEG_INFINITY { Sel::Always } else { Sel::Upper(t_sel) };
    let p = fixed_product(theta.theta(), sigma, Side::OneSided, |_| sel, u);
    Probability::new(p)
}

/// Exact coverage of a two-sided construction with selection
/// `|X_j|/sigma >= t_sel` and intervals `X_j -+ u sigma`.
///
/// Each nonzero coordinate contributes `P(|mu + Z| >= t_sel, |Z| <= u)`, each
/// zero coordinate `2 Phi(max(t_sel, u)) - 1`.
pub fn exact_coverage_two_sided(
    theta: &MeanVector,
    t_sel: f64,
    u: f64,
    sigma: f64,
) -> Result<Probability> {
    check_sigma(sigma)?;
    check_cut(t_sel, u)?;
    let sel = if t_sel <= 0.0 { Sel::Always } else { Sel::Abs(t_sel) };
    let p = fixed_product(theta.theta(), sigma, Side::TwoSided, |_| sel, u);
    Probability::new(p)
}

/// `E(theta_j - L_j)` for the one-sided rule: `L_j = (X_j - u sigma)_+` when
/// `X_j/sigma >= t_sel` and `L_j = 0` otherwise.
///
/// With `mu = theta_j/sigma` and `b = max(u, t_sel) - mu`,
/// `E L_j = sigma [(mu - u)(1 - Phi(b)) + phi(b)]`.
pub fn expected_distance_one_sided(theta_j: f64, t_sel: f64, u: f64, sigma: f64) -> Result<f64> {
    check_sigma(sigma)?;
    if !theta_j.is_finite() || t_sel.is_nan() || u.is_nan() {
        return Err(Error::InvalidParams("expected distance needs finite inputs".into()));
    }
    if u == f64::INFINITY || t_sel == f64::INFINITY {
        return Ok(theta_j);
    }
    let mu = theta_j / sigma;
    let b = u.max(t_sel) - mu;
    let el = (mu - u) * sf(b) + pdf(b);
    Ok(theta_j - sigma * el)
}

/// `E|S|` under `theta`.
pub fn expected_selection_count(rule: &SelectionRule, theta: &[f64], sigma: f64) -> f64 {
    theta
        .iter()
        .enumerate()
        .map(|(j, &t)| rule.selection_prob(j, t / sigma))
        .sum()
}

/// Exact coverage of any [`Procedure`] at `theta`.
pub(crate) fn procedure_coverage(proc: &Procedure, theta: &[f64]) -> Result<f64> {
    let d = proc.dim();
    if theta.len() != d {
        return Err(Error::InvalidParams(format!(
            "theta has {} coordinates, procedure expects d = {d}",
            theta.len()
        )));
    }
    let sigma = proc.sigma();
    let rule = proc.rule();
    let side = proc.side();
    match proc.width_rule() {
        WidthRule::Fixed(u) => Ok(fixed_product(theta, sigma, side, |j| Sel::for_coord(rule, j), u)),
        width => size_dependent_coverage(theta, sigma, side, rule, width),
    }
}

fn log_add(a: f64, b: f64) -> f64 {
    if a == f64::NEG_INFINITY {
        return b;
    }
    if b == f64::NEG_INFINITY {
        return a;
    }
    let (hi, lo) = if a > b { (a, b) } else { (b, a) };
    hi + (lo - hi).exp().ln_1p()
}

/// Coordinates sharing the same selection behaviour and mean.
struct Group {
    n: usize,
    sel: Sel,
    mu: f64,
    ln_miss: f64,
}

fn ln_or_neg_inf(x: f64) -> f64 {
    if x > 0.0 {
        x.ln()
    } else {
        f64::NEG_INFINITY
    }
}

/// `ln[x^i] (a + b x)^n`, guarding `0 * ln 0`.
fn ln_binom_term(ln_fact: &[f64], n: usize, i: usize, ln_a: f64, ln_b: f64) -> f64 {
    let mut v = ln_fact[n] - ln_fact[i] - ln_fact[n - i];
    if n > i {
        v += (n - i) as f64 * ln_a;
    }
    if i > 0 {
        v += i as f64 * ln_b;
    }
    v
}

/// Coverage when the width depends on `|S|`:
/// `sum_k [x^k] prod_j (miss_j + hit_j(u(k)) x)`.
fn size_dependent_coverage(
    theta: &[f64],
    sigma: f64,
    side: Side,
    rule: &SelectionRule,
    width: WidthRule,
) -> Result<f64> {
    let d = theta.len();
    let mut keyed: BTreeMap<(u8, u64), Group> = BTreeMap::new();
    for (j, &t) in theta.iter().enumerate() {
        let sel = Sel::for_coord(rule, j);
        let tag = match sel {
            Sel::Never => 0u8,
            Sel::Always => 1,
            _ => 2,
        };
        let mu = t / sigma;
        let g = keyed.entry((tag, mu.to_bits())).or_insert_with(|| {
            let (miss, _) = split(sel, side, mu, 0.0);
            Group {
                n: 0,
                sel,
                mu,
                ln_miss: ln_or_neg_inf(miss),
            }
        });
        g.n += 1;
    }
    let mut groups: Vec<Group> = keyed.into_values().collect();
    // Largest group last: only its coefficients are formed on demand.
    groups.sort_by_key(|g| g.n);

    let mut ln_fact = vec![0.0; d + 1];
    for k in 1..=d {
        ln_fact[k] = ln_fact[k - 1] + (k as f64).ln();
    }

    // k = 0: nothing selected, every interval is {0}.
    let mut total: f64 = groups.iter().map(|g| g.n as f64 * g.ln_miss).sum();
    if total.is_nan() {
        total = f64::NEG_INFINITY;
    }

    // Bucket sizes k >= 1 by their width.
    let mut buckets: Vec<(f64, Vec<usize>)> = Vec::new();
    for k in 1..=d {
        let u = width.width_for(k, d)?.0.ok_or_else(|| {
            Error::Internal(format!("size-dependent width undefined at |S| = {k}"))
        })?;
        match buckets.last_mut() {
            Some((w, ks)) if w.to_bits() == u.to_bits() => ks.push(k),
            _ => buckets.push((u, vec![k])),
        }
    }

    let (last, rest) = groups.split_last().expect("d >= 1");
    for (u, ks) in &buckets {
        let ln_hit = |g: &Group| ln_or_neg_inf(split(g.sel, side, g.mu, *u).1);
        // Product polynomial of all groups but the last.
        let mut poly = vec![0.0f64];
        for g in rest {
            let lb = ln_hit(g);
            let mut next = vec![f64::NEG_INFINITY; poly.len() + g.n];
            for (i, &pi) in poly.iter().enumerate() {
                if pi == f64::NEG_INFINITY {
                    continue;
                }
                for m in 0..=g.n {
                    let term = ln_binom_term(&ln_fact, g.n, m, g.ln_miss, lb);
                    next[i + m] = log_add(next[i + m], pi + term);
                }
            }
            poly = next;
        }
        let lb_last = ln_hit(last);
        for &k in ks {
            let mut acc = f64::NEG_INFINITY;
            for (i, &pi) in poly.iter().enumerate() {
                if pi == f64::NEG_INFINITY || i > k || k - i > last.n {
                    continue;
                }
                acc = log_add(acc, pi + ln_binom_term(&ln_fact, last.n, k - i, last.ln_miss, lb_last));
            }
            total = log_add(total, acc);
        }
    }
    Ok(total.exp().min(1.0))
}
