//! Minimax lower bounds on non-coverage and the matching length floors.

use std::io::Write;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::gaussian::{cdf, ln_cdf, prob_between, quantile, Probability};
use crate::model::ProblemParams;
use crate::numfmt::csv_num;

use std::f64::consts::PI;

/// An evaluated bound together with the inputs that produced it.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundValue {
    pub name: String,
    pub value: f64,
    pub inputs: Vec<(String, f64)>,
}

impl BoundValue {
    fn new(name: &str, value: f64, inputs: &[(&str, f64)]) -> Self {
        BoundValue {
            name: name.to_string(),
            value,
            inputs: inputs.iter().map(|(k, v)| (k.to_string(), *v)).collect(),
        }
    }

    /// Inputs as flat `key=value` pairs joined by `;`.
    pub fn inputs_string(&self) -> String {
        self.inputs
            .iter()
            .map(|(k, v)| format!("{k}={}", csv_num(*v)))
            .collect::<Vec<_>>()
            .join(";")
    }
}

/// Writes bounds as `name,value,inputs`.
pub fn write_bounds_csv<W: Write>(rows: &[BoundValue], writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    let io = |e: csv::Error| Error::Io(e.to_string());
    w.write_record(["name", "value", "inputs"]).map_err(io)?;
    for r in rows {
        w.write_record([r.name.clone(), csv_num(r.value), r.inputs_string()])
            .map_err(io)?;
    }
    w.flush()?;
    Ok(())
}

/// `1 - (1 + Delta)^{-s}`, evaluated as `-expm1(-s log1p(Delta))`.
pub fn escape_bound(s: f64, delta_big: f64) -> f64 {
    -(-s * delta_big.ln_1p()).exp_m1()
}

/// `Delta = Phi(Phi^{-1}(delta) - a/sigma)`.
pub fn delta_one_sided(delta: f64, snr: f64) -> f64 {
    cdf(quantile(delta) - snr)
}

/// `Delta_TS = Phi(q + a/sigma) - Phi(-q + a/sigma)`, `q = Phi^{-1}((1+delta)/2)`.
pub fn delta_two_sided(delta: f64, snr: f64) -> f64 {
    let q = quantile((1.0 + delta) / 2.0);
    prob_between(snr - q, snr + q)
}

/// Lower bound `1 - (Delta + 1)^{-s}` on the probability that some support
/// coordinate escapes a one-sided selector with true negative rate `delta`.
pub fn lb_support_escape_one_sided(p: &ProblemParams) -> Probability {
    let v = escape_bound(p.s() as f64, delta_one_sided(p.delta(), p.snr()));
    Probability::new(v).expect("bound lies in [0, 1]")
}

/// Two-sided counterpart of [`lb_support_escape_one_sided`].
pub fn lb_support_escape_two_sided(p: &ProblemParams) -> Probability {
    let v = escape_bound(p.s() as f64, delta_two_sided(p.delta(), p.snr()));
    Probability::new(v).expect("bound lies in [0, 1]")
}

fn check_common(func: &'static str, dim: usize, a: usize, rho: f64, m: f64, sigma: f64) -> Result<()> {
    if a == 0 || a >= dim {
        return Err(Error::domain(func, format!("need 1 <= A < dim, got A = {a}, dim = {dim}")));
    }
    if !(rho.is_finite() && rho > 0.0) {
        return Err(Error::domain(func, format!("rho = {rho} must be positive")));
    }
    if !(m.is_finite() && m >= 0.0) {
        return Err(Error::domain(func, format!("m = {m} must be nonnegative")));
    }
    if !(sigma.is_finite() && sigma > 0.0) {
        return Err(Error::domain(func, format!("sigma = {sigma} must be positive")));
    }
    Ok(())
}

fn ratio_form(a: usize, core: f64) -> f64 {
    let x = a as f64 * core.max(0.0);
    x / (1.0 + x)
}

/// `R = sigma / sqrt(2 pi) exp(-rho^2 / (2 sigma^2)) (k - 1)/(k + 1)` with
/// `k = sqrt(1 + 4 sigma^2/rho^2)`.
pub fn r_term(rho: f64, sigma: f64) -> f64 {
    let r2 = (sigma / rho).powi(2);
    let k = (1.0 + 4.0 * r2).sqrt();
    // (k - 1)/(k + 1) = 4 r^2 / (k + 1)^2 without cancellation.
    let frac = 4.0 * r2 / ((k + 1.0) * (k + 1.0));
    sigma / (2.0 * PI).sqrt() * (-0.5 * (rho / sigma).powi(2)).exp() * frac
}

/// `g(dim, A, rho)` of the one-sided bound.
pub fn g_one_sided(dim: usize, a: usize, rho: f64, sigma: f64) -> f64 {
    let ln_r = ((dim - a) as f64 / a as f64).ln();
    let half = rho / (2.0 * sigma);
    let shift = sigma / rho * ln_r;
    (ln_r + ln_cdf(-half - shift)).exp() + cdf(-half + shift)
}

/// `G(dim, A, rho, m) = A[g - (m + R)/rho]_+ / (1 + A[g - (m + R)/rho]_+)`.
pub fn lb_noncoverage_g(dim: usize, a: usize, rho: f64, m: f64, sigma: f64) -> Result<Probability> {
    check_common("lb_noncoverage_g", dim, a, rho, m, sigma)?;
    let g = g_one_sided(dim, a, rho, sigma);
    Probability::new(ratio_form(a, g - (m + r_term(rho, sigma)) / rho))
}

/// `acosh(y)` given `ln y`, for `y = r e^q` with `r = exp(ln_r)`.
///
/// Large `y` works from `ln y` directly so `e^q` never overflows; `y` near 1
/// uses `acosh(1 + w) = log1p(w + sqrt(w (2 + w)))` with `w` formed without
/// cancellation.
fn acosh_scaled(r: f64, q: f64) -> Option<f64> {
    let ln_y = r.ln() + q;
    if ln_y > 20.0 {
        let t = (-2.0 * ln_y).exp();
        return Some(ln_y + (1.0 + (1.0 - t).sqrt()).ln());
    }
    let w = (r - 1.0) + r * q.exp_m1();
    if w < 0.0 {
        return None;
    }
    Some((w + (w * (2.0 + w)).sqrt()).ln_1p())
}

/// `D = (sigma/rho) acosh(((dim - A)/A) exp(rho^2 / (2 sigma^2)))`.
pub fn d_term(dim: usize, a: usize, rho: f64, sigma: f64) -> Result<f64> {
    check_common("d_term", dim, a, rho, 0.0, sigma)?;
    let r = (dim - a) as f64 / a as f64;
    let q = 0.5 * (rho / sigma).powi(2);
    acosh_scaled(r, q).map(|v| sigma / rho * v).ok_or_else(|| {
        Error::domain(
            "d_term",
            format!("acosh argument below 1 for A = {a}, dim = {dim}, rho = {rho}"),
        )
    })
}

/// `g_TS(dim, A, rho)` of the two-sided bound.
pub fn g_two_sided(dim: usize, a: usize, rho: f64, sigma: f64) -> Result<f64> {
    let d = d_term(dim, a, rho, sigma)?;
    let ln_r = ((dim - a) as f64 / a as f64).ln();
    let z = rho / sigma;
    Ok((2f64.ln() + ln_r + ln_cdf(-d)).exp() + prob_between(z - d, z + d))
}

/// `G_TS(dim, A, rho, m) = A[g_TS - m/rho]_+ / (1 + A[g_TS - m/rho]_+)`.
pub fn lb_noncoverage_g_two_sided(
    dim: usize,
    a: usize,
    rho: f64,
    m: f64,
    sigma: f64,
) -> Result<Probability> {
    check_common("lb_noncoverage_g_two_sided", dim, a, rho, m, sigma)?;
    let g = g_two_sided(dim, a, rho, sigma)?;
    Probability::new(ratio_form(a, g - m / rho))
}

/// Length floor `sigma (1/2 - W/A) sqrt(2 log(n/A - 1))
///     + sqrt(2) sigma / (4 sqrt(pi)) (1 - A/(n - A))`,
/// with `n` either `d` or `s`. Requires `0 <= 2W <= A` and `n >= 2A`.
pub fn lb_length_floor(n: usize, a: usize, w: f64, sigma: f64) -> Result<f64> {
    if a == 0 || 2 * a > n {
        return Err(Error::InvalidParams(format!(
            "length floor needs 1 <= A and 2A <= n, got A = {a}, n = {n}"
        )));
    }
    if !(w >= 0.0 && 2.0 * w <= a as f64) {
        return Err(Error::InvalidParams(format!("length floor needs 0 <= 2W <= A, got W = {w}, A = {a}")));
    }
    if !(sigma.is_finite() && sigma > 0.0) {
        return Err(Error::InvalidParams(format!("sigma = {sigma} must be positive")));
    }
    let (nf, af) = (n as f64, a as f64);
    let first = sigma * (0.5 - w / af) * (2.0 * (nf / af - 1.0).ln()).max(0.0).sqrt();
    let second = 2f64.sqrt() * sigma / (4.0 * PI.sqrt()) * (1.0 - af / (nf - af));
    Ok(first + second)
}

/// Which index the length floor is built on.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FloorCase {
    /// `n = d`, sequences with `2W <= A <= s`.
    Dimension,
    /// `n = s`, sequences with `2V <= B < s`.
    Sparsity,
}

/// [`lb_length_floor`] with the sequence conditions checked against `p`.
pub fn length_floor_for(p: &ProblemParams, case: FloorCase, a: usize, w: f64) -> Result<BoundValue> {
    let (n, ok, label) = match case {
        FloorCase::Dimension => (p.d(), a <= p.s(), "A <= s"),
        FloorCase::Sparsity => (p.s(), a < p.s(), "B < s"),
    };
    if !ok {
        return Err(Error::InvalidParams(format!("length floor needs {label}, got {a}")));
    }
    let v = lb_length_floor(n, a, w, p.sigma())?;
    let name = match case {
        FloorCase::Dimension => "length_floor_d",
        FloorCase::Sparsity => "length_floor_s",
    };
    Ok(BoundValue::new(
        name,
        v,
        &[("n", n as f64), ("A", a as f64), ("W", w), ("sigma", p.sigma())],
    ))
}

/// Grid settings for the sup over `(rho, A)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepGrid {
    /// Log-spaced points per rho range.
    pub rho_points: usize,
    /// Upper end of the rho range in sigma units.
    pub rho_max: f64,
    /// Lower end of the rho range for the sparsity-indexed term, sigma units.
    pub rho_min: f64,
}

impl Default for SweepGrid {
    fn default() -> Self {
        SweepGrid {
            rho_points: 200,
            rho_max: 50.0,
            rho_min: 0.01,
        }
    }
}

fn log_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    if n <= 1 || hi <= lo {
        return vec![lo];
    }
    let (a, b) = (lo.ln(), hi.ln());
    (0..n)
        .map(|i| (a + (b - a) * i as f64 / (n - 1) as f64).exp())
        .collect()
}

/// Golden-section search for a max of `f` on `[lo, hi]`.
fn golden_max(f: &dyn Fn(f64) -> f64, mut lo: f64, mut hi: f64) -> (f64, f64) {
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut x1 = hi - inv_phi * (hi - lo);
    let mut x2 = lo + inv_phi * (hi - lo);
    let (mut f1, mut f2) = (f(x1), f(x2));
    for _ in 0..80 {
        if f1 >= f2 {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - inv_phi * (hi - lo);
            f1 = f(x1);
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + inv_phi * (hi - lo);
            f2 = f(x2);
        }
    }
    if f1 >= f2 {
        (x1, f1)
    } else {
        (x2, f2)
    }
}

/// `sup_{rho in [rho_lo, rho_hi], 1 <= A <= a_max} eval(A, rho)`.
///
/// Grid search parallel over `A`; the reduction keeps the first maximum in
/// `(A, rho)` order, then refines rho by golden section around it.
fn sweep(
    a_max: usize,
    rho_lo: f64,
    rho_hi: f64,
    points: usize,
    eval: &(dyn Fn(usize, f64) -> Option<f64> + Sync),
) -> Option<(usize, f64, f64)> {
    let rhos = log_grid(rho_lo, rho_hi, points);
    let per_a: Vec<Option<(usize, usize, f64)>> = (1..=a_max)
        .into_par_iter()
        .map(|a| {
            let mut best: Option<(usize, usize, f64)> = None;
            for (i, &rho) in rhos.iter().enumerate() {
                if let Some(v) = eval(a, rho) {
                    if best.is_none_or(|b| v > b.2) {
                        best = Some((a, i, v));
                    }
                }
            }
            best
        })
        .collect();
    let (a, i, v) = per_a
        .into_iter()
        .flatten()
        .fold(None, |acc: Option<(usize, usize, f64)>, c| match acc {
            Some(b) if b.2 >= c.2 => Some(b),
            _ => Some(c),
        })?;
    let lo = rhos[i.saturating_sub(1)];
    let hi = rhos[(i + 1).min(rhos.len() - 1)];
    let f = |rho: f64| eval(a, rho).unwrap_or(f64::NEG_INFINITY);
    let (rho_ref, v_ref) = golden_max(&f, lo, hi);
    Some(if v_ref > v { (a, rho_ref, v_ref) } else { (a, rhos[i], v) })
}

/// Which family of bounds to maximise.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BoundFamily {
    OneSided,
    TwoSided,
}

/// The maximised lower bound on worst-case non-coverage for sets whose
/// expected one-sided gap (or two-sided length) is at most `m`: the max of
/// the dimension-indexed sup, the sparsity-indexed sup, and the support
/// escape term. Returns all three terms followed by the overall max.
pub fn maximized_bound(
    p: &ProblemParams,
    m: f64,
    family: BoundFamily,
    grid: SweepGrid,
) -> Result<Vec<BoundValue>> {
    if !(m.is_finite() && m >= 0.0) {
        return Err(Error::InvalidParams(format!("m = {m} must be nonnegative")));
    }
    let sigma = p.sigma();
    let (d, s) = (p.d(), p.s());
    let g = |dim: usize, a: usize, rho: f64| -> Option<f64> {
        let r = match family {
            BoundFamily::OneSided => lb_noncoverage_g(dim, a, rho, m, sigma),
            BoundFamily::TwoSided => lb_noncoverage_g_two_sided(dim, a, rho, m, sigma),
        };
        r.ok().map(Probability::value)
    };
    let (tag, escape) = match family {
        BoundFamily::OneSided => ("", lb_support_escape_one_sided(p).value()),
        BoundFamily::TwoSided => ("_ts", lb_support_escape_two_sided(p).value()),
    };

    let mut out = Vec::new();
    let rho_hi = (grid.rho_max * sigma).max(p.a());
    let a_max = s.min(d - 1);
    let dim_term = if a_max >= 1 {
        sweep(a_max, p.a(), rho_hi, grid.rho_points, &|a, rho| g(d, a, rho))
    } else {
        None
    };
    let dim_value = dim_term.map_or(0.0, |t| t.2);
    out.push(BoundValue::new(
        &format!("sup_g_dim{tag}"),
        dim_value,
        &[
            ("dim", d as f64),
            ("A", dim_term.map_or(f64::NAN, |t| t.0 as f64)),
            ("rho", dim_term.map_or(f64::NAN, |t| t.1)),
            ("m", m),
        ],
    ));
    let b_max = s.saturating_sub(1);
    let s_term = if b_max >= 1 {
        sweep(b_max, grid.rho_min * sigma, grid.rho_max * sigma, grid.rho_points, &|b, rho| g(s, b, rho))
    } else {
        None
    };
    let s_value = s_term.map_or(0.0, |t| t.2);
    out.push(BoundValue::new(
        &format!("sup_g_s{tag}"),
        s_value,
        &[
            ("dim", s as f64),
            ("B", s_term.map_or(f64::NAN, |t| t.0 as f64)),
            ("rho", s_term.map_or(f64::NAN, |t| t.1)),
            ("m", m),
        ],
    ));
    out.push(BoundValue::new(
        &format!("escape{tag}"),
        escape,
        &[("s", s as f64), ("delta", p.delta()), ("snr", p.snr())],
    ));
    let overall = dim_value.max(s_value).max(escape);
    out.push(BoundValue::new(&format!("max{tag}"), overall, &[("m", m)]));
    Ok(out)
}
