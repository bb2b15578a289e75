//! Standard normal primitives: density, distribution function, quantile, and
//! the two-sided Gaussian tail-bound sandwich.
//!
//! The checked functions (`std_normal_cdf`, `std_normal_quantile`, ...) are the
//! public contract and reject invalid input. The crate-internal helpers
//! (`cdf`, `sf`, `quantile`, ...) are total on the extended reals and are what
//! the rest of the crate calls in hot loops.

use std::f64::consts::{FRAC_1_SQRT_2, PI};

use crate::error::{Error, Result};

/// ln(sqrt(2*pi))
const LN_SQRT_2PI: f64 = 0.918_938_533_204_672_8;

/// Below this argument `cdf` switches from erfc to the Mills-ratio path,
/// where erfc itself underflows.
const MILLS_CUTOFF: f64 = 37.0;

/// A probability in `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct Probability(f64);

impl Probability {
    pub fn new(value: f64) -> Result<Self> {
        if (0.0..=1.0).contains(&value) {
            Ok(Probability(value))
        } else {
            Err(Error::domain(
                "Probability::new",
                format!("{value} is not in [0, 1]"),
            ))
        }
    }

    pub fn value(self) -> f64 {
        self.0
    }

    /// `1 - p`.
    pub fn complement(self) -> Probability {
        Probability(1.0 - self.0)
    }
}

impl From<Probability> for f64 {
    fn from(p: Probability) -> f64 {
        p.0
    }
}

/// Standard normal density.
pub fn pdf(z: f64) -> f64 {
    (-0.5 * z * z - LN_SQRT_2PI).exp()
}

pub(crate) fn ln_pdf(z: f64) -> f64 {
    -0.5 * z * z - LN_SQRT_2PI
}

/// Mills ratio `(1 - Phi(y)) / phi(y)` for large positive `y`, by backward
/// evaluation of the Laplace continued fraction. Accurate to rounding for
/// `y >= 6`.
fn mills_ratio(y: f64) -> f64 {
    let mut t = y;
    for k in (1..=60).rev() {
        t = y + k as f64 / t;
    }
    1.0 / t
}

/// Phi(z), total on the extended reals.
pub(crate) fn cdf(z: f64) -> f64 {
    if z.is_nan() {
        return f64::NAN;
    }
    if z < -MILLS_CUTOFF {
        if z == f64::NEG_INFINITY {
            return 0.0;
        }
        return pdf(z) * mills_ratio(-z);
    }
    0.5 * libm::erfc(-z * FRAC_1_SQRT_2)
}

/// Upper tail 1 - Phi(z).
pub(crate) fn sf(z: f64) -> f64 {
    cdf(-z)
}

/// ln Phi(z), accurate in both tails.
pub(crate) fn ln_cdf(z: f64) -> f64 {
    if z == f64::NEG_INFINITY {
        f64::NEG_INFINITY
    } else if z < -MILLS_CUTOFF {
        ln_pdf(z) + mills_ratio(-z).ln()
    } else if z < 0.0 {
        cdf(z).ln()
    } else {
        (-sf(z)).ln_1p()
    }
}

/// P(a <= Z <= b) for a standard normal Z, using whichever tail keeps the
/// difference well conditioned. Returns 0 when `b <= a`.
pub(crate) fn prob_between(a: f64, b: f64) -> f64 {
    if b <= a {
        return 0.0;
    }
    if a > 0.0 {
        (sf(a) - sf(b)).max(0.0)
    } else {
        (cdf(b) - cdf(a)).max(0.0)
    }
}

/// Initial rational approximation for the lower half, `0 < p <= 0.5`
/// (Acklam; relative error about 1e-9).
fn rational_quantile(p: f64) -> f64 {
    const A: [f64; 6] = [
        -3.969_683_028_665_376e1,
        2.209_460_984_245_205e2,
        -2.759_285_104_469_687e2,
        1.383_577_518_672_69e2,
        -3.066_479_806_614_716e1,
        2.506_628_277_459_239,
    ];
    const B: [f64; 5] = [
        -5.447_609_879_822_406e1,
        1.615_858_368_580_409e2,
        -1.556_989_798_598_866e2,
        6.680_131_188_771_972e1,
        -1.328_068_155_288_572e1,
    ];
    const C: [f64; 6] = [
        -7.784_894_002_430_293e-3,
        -3.223_964_580_411_365e-1,
        -2.400_758_277_161_838,
        -2.549_732_539_343_734,
        4.374_664_141_464_968,
        2.938_163_982_698_783,
    ];
    const D: [f64; 4] = [
        7.784_695_709_041_462e-3,
        3.224_671_290_700_398e-1,
        2.445_134_137_142_996,
        3.754_408_661_907_416,
    ];
    const P_LOW: f64 = 0.02425;

    if p < P_LOW {
        let q = (-2.0 * p.ln()).sqrt();
        (((((C[0] * q + C[1]) * q + C[2]) * q + C[3]) * q + C[4]) * q + C[5])
            / ((((D[0] * q + D[1]) * q + D[2]) * q + D[3]) * q + 1.0)
    } else {
        let q = p - 0.5;
        let r = q * q;
        (((((A[0] * r + A[1]) * r + A[2]) * r + A[3]) * r + A[4]) * r + A[5]) * q
            / (((((B[0] * r + B[1]) * r + B[2]) * r + B[3]) * r + B[4]) * r + 1.0)
    }
}

/// Phi^{-1}(p) for `0 < p < 1`; unchecked.
pub(crate) fn quantile(p: f64) -> f64 {
    if p == 0.5 {
        return 0.0;
    }
    if p > 0.5 {
        // 1 - p is exact for p in [0.5, 1].
        return -quantile(1.0 - p);
    }
    let mut x = rational_quantile(p);
    for _ in 0..2 {
        let step = if x < -MILLS_CUTOFF {
            // (Phi(x) - p) / phi(x) without forming phi(x), which may underflow.
            mills_ratio(-x) - (p.ln() - ln_pdf(x)).exp()
        } else {
            (cdf(x) - p) / pdf(x)
        };
        x -= step;
    }
    x
}

/// Upper quantile Phi^{-1}(1 - q), accurate for tiny `q`.
pub(crate) fn upper_quantile(q: f64) -> f64 {
    -quantile(q)
}

/// Standard normal distribution function Phi(z).
///
/// Absolute error is at the level of double rounding for moderate `z`; the
/// lower tail keeps full relative accuracy down to underflow.
pub fn std_normal_cdf(z: f64) -> Result<Probability> {
    if !z.is_finite() {
        return Err(Error::domain("std_normal_cdf", format!("non-finite input {z}")));
    }
    Ok(Probability(cdf(z)))
}

/// Upper tail `1 - Phi(z)` with full relative accuracy for large `z`.
pub fn std_normal_sf(z: f64) -> Result<Probability> {
    if !z.is_finite() {
        return Err(Error::domain("std_normal_sf", format!("non-finite input {z}")));
    }
    Ok(Probability(sf(z)))
}

/// ln Phi(z).
pub fn log_std_normal_cdf(z: f64) -> Result<f64> {
    if !z.is_finite() {
        return Err(Error::domain(
            "log_std_normal_cdf",
            format!("non-finite input {z}"),
        ));
    }
    Ok(ln_cdf(z))
}

/// Standard normal quantile Phi^{-1}(p).
///
/// A rational initial guess refined by two Newton steps on `Phi(z) - p`.
/// `p` must lie strictly inside (0, 1); callers needing the boundary cases
/// handle them themselves.
pub fn std_normal_quantile(p: f64) -> Result<f64> {
    if !(p > 0.0 && p < 1.0) {
        return Err(Error::domain(
            "std_normal_quantile",
            format!("p = {p} must be in the open interval (0, 1)"),
        ));
    }
    Ok(quantile(p))
}

/// Lower and upper bounds on the Gaussian upper tail `P(N > y)`, `y > 0`:
///
/// `sqrt(2/pi) e^{-y^2/2} / (y + sqrt(y^2 + 4)) < P(N > y)
///     <= sqrt(2/pi) e^{-y^2/2} / (y + sqrt(y^2 + 8/pi))`.
pub fn tail_sandwich(y: f64) -> Result<(Probability, Probability)> {
    if !y.is_finite() || y <= 0.0 {
        return Err(Error::domain(
            "tail_sandwich",
            format!("y = {y} must be finite and positive"),
        ));
    }
    let scale = (2.0 / PI).sqrt() * (-0.5 * y * y).exp();
    let lower = scale / (y + (y * y + 4.0).sqrt());
    let upper = scale / (y + (y * y + 8.0 / PI).sqrt());
    Ok((Probability(lower), Probability(upper)))
}

/// Bounds on `Phi^{-1}(1 - 1/t)` for `t > 2`:
///
/// `sqrt((2 log t - log log t - C)_+) <= Phi^{-1}(1 - 1/t) <= sqrt(2 log t - log log t)`
/// with `C = 2 log 4 + log pi`.
pub fn quantile_sandwich(t: f64) -> Result<(f64, f64)> {
    if !t.is_finite() || t <= 2.0 {
        return Err(Error::domain(
            "quantile_sandwich",
            format!("t = {t} must be finite and greater than 2"),
        ));
    }
    let c = 2.0 * 4f64.ln() + PI.ln();
    let ln_t = t.ln();
    let core = 2.0 * ln_t - ln_t.ln();
    Ok(((core - c).max(0.0).sqrt(), core.sqrt()))
}
