//! Problem parameters, mean vectors, observations, and the sparse confidence
//! set representation, plus seeded data generation.

use std::io::{Read, Write};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::numfmt::{csv_num, parse_num};

/// Full experiment configuration `(d, s, a, sigma, alpha, alpha', delta)`.
///
/// `alpha` is the non-coverage level, `alpha_prime` the part of it spent on
/// the selection step, and `delta` the target true negative rate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProblemParams {
    d: usize,
    s: usize,
    a: f64,
    sigma: f64,
    alpha: f64,
    alpha_prime: f64,
    delta: f64,
}

impl ProblemParams {
    pub fn new(
        d: usize,
        s: usize,
        a: f64,
        sigma: f64,
        alpha: f64,
        alpha_prime: f64,
        delta: f64,
    ) -> Result<Self> {
        let p = ProblemParams {
            d,
            s,
            a,
            sigma,
            alpha,
            alpha_prime,
            delta,
        };
        p.validate()?;
        Ok(p)
    }

    fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidParams(m));
        if self.d == 0 {
            return bad("d must be at least 1".into());
        }
        if self.s == 0 || self.s > self.d {
            return bad(format!("s = {} must satisfy 1 <= s <= d = {}", self.s, self.d));
        }
        if !(self.a.is_finite() && self.a > 0.0) {
            return bad(format!("a = {} must be finite and positive", self.a));
        }
        if !(self.sigma.is_finite() && self.sigma > 0.0) {
            return bad(format!("sigma = {} must be finite and positive", self.sigma));
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return bad(format!("alpha = {} must be in (0, 1)", self.alpha));
        }
        if !(self.alpha_prime > 0.0 && self.alpha_prime < self.alpha) {
            return bad(format!(
                "alpha' = {} must be in (0, alpha = {})",
                self.alpha_prime, self.alpha
            ));
        }
        if !(self.delta > 0.0 && self.delta < 1.0) {
            return bad(format!("delta = {} must be in (0, 1)", self.delta));
        }
        Ok(())
    }

    pub fn d(&self) -> usize {
        self.d
    }
    pub fn s(&self) -> usize {
        self.s
    }
    pub fn a(&self) -> f64 {
        self.a
    }
    pub fn sigma(&self) -> f64 {
        self.sigma
    }
    pub fn alpha(&self) -> f64 {
        self.alpha
    }
    pub fn alpha_prime(&self) -> f64 {
        self.alpha_prime
    }
    pub fn delta(&self) -> f64 {
        self.delta
    }

    /// Signal-to-noise ratio `a / sigma`.
    pub fn snr(&self) -> f64 {
        self.a / self.sigma
    }

    pub fn with_a(self, a: f64) -> Result<Self> {
        ProblemParams { a, ..self }.validated()
    }

    pub fn with_alpha_prime(self, alpha_prime: f64) -> Result<Self> {
        ProblemParams {
            alpha_prime,
            ..self
        }
        .validated()
    }

    fn validated(self) -> Result<Self> {
        self.validate()?;
        Ok(self)
    }
}

/// Which parameter space a mean vector is declared to belong to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    /// Theta+(s, a): nonzero entries are at least `a`.
    OneSided,
    /// Theta(s, a): nonzero entries have magnitude at least `a`.
    TwoSided,
}

/// A sparse mean vector, checked against its declared space on construction.
#[derive(Debug, Clone, PartialEq)]
pub struct MeanVector {
    theta: Vec<f64>,
    side: Side,
}

impl MeanVector {
    pub fn new(theta: Vec<f64>, side: Side, s: usize, a: f64) -> Result<Self> {
        let mut nonzero = 0usize;
        for (j, &t) in theta.iter().enumerate() {
            if !t.is_finite() {
                return Err(Error::Invariant(format!("theta[{j}] = {t} is not finite")));
            }
            if t == 0.0 {
                continue;
            }
            nonzero += 1;
            let ok = match side {
                Side::OneSided => t >= a,
                Side::TwoSided => t.abs() >= a,
            };
            if !ok {
                return Err(Error::Invariant(format!(
                    "theta[{j}] = {t} violates the minimum signal a = {a} for {side:?}"
                )));
            }
        }
        if nonzero > s {
            return Err(Error::Invariant(format!(
                "theta has {nonzero} nonzero entries, more than s = {s}"
            )));
        }
        Ok(MeanVector { theta, side })
    }

    pub fn theta(&self) -> &[f64] {
        &self.theta
    }

    pub fn side(&self) -> Side {
        self.side
    }

    pub fn dim(&self) -> usize {
        self.theta.len()
    }

    pub fn support(&self) -> Vec<usize> {
        (0..self.theta.len()).filter(|&j| self.theta[j] != 0.0).collect()
    }
}

/// Sign layout for the spike vectors used in simulations.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SignPattern {
    AllPositive,
    AllNegative,
    Alternating,
}

/// First `s` coordinates equal to `±snr * sigma` (per `pattern`), the rest 0.
///
/// All-positive spikes are labelled one-sided; the other patterns are
/// labelled two-sided. The declared `params.a()` is the minimum signal the
/// result must respect.
pub fn make_spike_vector(
    params: &ProblemParams,
    snr: f64,
    pattern: SignPattern,
) -> Result<MeanVector> {
    if !(snr.is_finite() && snr > 0.0) {
        return Err(Error::InvalidParams(format!("snr = {snr} must be positive")));
    }
    let magnitude = snr * params.sigma();
    let mut theta = vec![0.0; params.d()];
    for (j, t) in theta.iter_mut().take(params.s()).enumerate() {
        *t = match pattern {
            SignPattern::AllPositive => magnitude,
            SignPattern::AllNegative => -magnitude,
            SignPattern::Alternating if j % 2 == 0 => magnitude,
            SignPattern::Alternating => -magnitude,
        };
    }
    let side = match pattern {
        SignPattern::AllPositive => Side::OneSided,
        _ => Side::TwoSided,
    };
    MeanVector::new(theta, side, params.s(), params.a())
}

/// A draw `X ~ N(theta, sigma^2 I)` with known `sigma`.
#[derive(Debug, Clone, PartialEq)]
pub struct Observation {
    x: Vec<f64>,
    sigma: f64,
}

impl Observation {
    pub fn new(x: Vec<f64>, sigma: f64) -> Result<Self> {
        if !(sigma.is_finite() && sigma > 0.0) {
            return Err(Error::InvalidParams(format!("sigma = {sigma} must be positive")));
        }
        if let Some(j) = x.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidParams(format!("x[{j}] is not finite")));
        }
        Ok(Observation { x, sigma })
    }

    pub fn x(&self) -> &[f64] {
        &self.x
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    pub fn dim(&self) -> usize {
        self.x.len()
    }

    /// Checks the length against the owning parameters.
    pub fn check_dim(&self, params: &ProblemParams) -> Result<()> {
        if self.x.len() != params.d() {
            return Err(Error::InvalidParams(format!(
                "observation has {} coordinates but d = {}",
                self.x.len(),
                params.d()
            )));
        }
        Ok(())
    }

    /// Reads the `j,x` CSV format: one row per coordinate, `j` counting from 0
    /// in order.
    pub fn read_csv<R: Read>(reader: R, sigma: f64) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
        let headers = rdr
            .headers()
            .map_err(|e| Error::Csv { line: 1, msg: e.to_string() })?
            .clone();
        if headers.len() != 2 || &headers[0] != "j" || &headers[1] != "x" {
            return Err(Error::Csv {
                line: 1,
                msg: format!("expected header \"j,x\", found {:?}", headers.iter().collect::<Vec<_>>()),
            });
        }
        let mut x = Vec::new();
        for rec in rdr.records() {
            let rec = rec.map_err(|e| Error::Csv {
                line: e.position().map_or(0, |p| p.line()),
                msg: e.to_string(),
            })?;
            let line = rec.position().map_or(0, |p| p.line());
            let bad = |msg: String| Error::Csv { line, msg };
            if rec.len() != 2 {
                return Err(bad(format!("expected 2 fields, found {}", rec.len())));
            }
            let j: usize = rec[0]
                .parse()
                .map_err(|_| bad(format!("invalid index {:?}", &rec[0])))?;
            if j != x.len() {
                return Err(bad(format!("expected j = {}, found {j}", x.len())));
            }
            let v = parse_num(&rec[1])
                .filter(|v| v.is_finite())
                .ok_or_else(|| bad(format!("invalid value {:?}", &rec[1])))?;
            x.push(v);
        }
        if x.is_empty() {
            return Err(Error::Csv { line: 2, msg: "no data rows".into() });
        }
        Observation::new(x, sigma)
    }

    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        let io = |e: csv::Error| Error::Io(e.to_string());
        w.write_record(["j", "x"]).map_err(io)?;
        for (j, v) in self.x.iter().enumerate() {
            w.write_record([j.to_string(), csv_num(*v)]).map_err(io)?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Coordinates per independently seeded noise block.
const NOISE_BLOCK: usize = 256;

/// splitmix64 finaliser.
fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed for replication `rep` of an experiment seeded with `seed`.
///
/// Depends only on `(seed, rep)`, never on scheduling.
pub fn replication_seed(seed: u64, rep: u64) -> u64 {
    splitmix64(splitmix64(seed) ^ rep.wrapping_mul(0xD1B5_4A32_D192_ED03))
}

/// Standard normal noise of length `d`, deterministic in `seed`.
///
/// Block `b` (coordinates `b*256 .. (b+1)*256`) is drawn from ChaCha8 stream
/// `b` under `seed`, so blocks can be generated independently.
pub fn standard_noise(d: usize, seed: u64) -> Vec<f64> {
    let mut z = vec![0.0; d];
    for (block, chunk) in z.chunks_mut(NOISE_BLOCK).enumerate() {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(block as u64);
        for v in chunk.iter_mut() {
            *v = rng.sample(StandardNormal);
        }
    }
    z
}

/// Draws `X = theta + sigma * Z`; bit-identical for identical inputs.
pub fn sample_observation(theta: &MeanVector, sigma: f64, seed: u64) -> Result<Observation> {
    if !(sigma.is_finite() && sigma > 0.0) {
        return Err(Error::InvalidParams(format!("sigma = {sigma} must be positive")));
    }
    let z = standard_noise(theta.dim(), seed);
    let x = theta
        .theta()
        .iter()
        .zip(z)
        .map(|(t, z)| t + sigma * z)
        .collect();
    Ok(Observation { x, sigma })
}

/// A sparse confidence set `M(S, U, L)`: the selected indices `S` and, per
/// coordinate, an interval `[L_j, U_j]`. Off `S` the interval is `{0}`.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseConfidenceSet {
    selected: Vec<usize>,
    lower: Vec<f64>,
    upper: Vec<f64>,
}

impl SparseConfidenceSet {
    /// Validates and builds a set. `selected` must be strictly increasing.
    pub fn new(selected: Vec<usize>, lower: Vec<f64>, upper: Vec<f64>) -> Result<Self> {
        let set = SparseConfidenceSet {
            selected,
            lower,
            upper,
        };
        set.check_invariants()?;
        Ok(set)
    }

    /// All-`{0}` set of dimension `d` with the given selection; callers fill
    /// in the selected intervals.
    pub(crate) fn degenerate(d: usize, selected: Vec<usize>) -> Self {
        SparseConfidenceSet {
            selected,
            lower: vec![0.0; d],
            upper: vec![0.0; d],
        }
    }

    pub(crate) fn set_interval(&mut self, j: usize, lower: f64, upper: f64) {
        self.lower[j] = lower;
        self.upper[j] = upper;
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    pub fn selected(&self) -> &[usize] {
        &self.selected
    }

    pub fn lower(&self) -> &[f64] {
        &self.lower
    }

    pub fn upper(&self) -> &[f64] {
        &self.upper
    }

    pub fn is_selected(&self, j: usize) -> bool {
        self.selected.binary_search(&j).is_ok()
    }

    /// `theta in M`: every coordinate lies in its interval. Off `S` the
    /// interval is `{0}`, so this also requires `supp(theta) ⊆ S`.
    pub fn covers(&self, theta: &[f64]) -> bool {
        theta.len() == self.dim()
            && theta
                .iter()
                .zip(self.lower.iter().zip(&self.upper))
                .all(|(&t, (&l, &u))| l <= t && t <= u)
    }

    /// Mean of `theta_j - L_j` over `supp(theta)`; `None` for `theta = 0`.
    pub fn support_distance(&self, theta: &[f64]) -> Option<f64> {
        let mut sum = 0.0;
        let mut n = 0usize;
        for (t, l) in theta.iter().zip(&self.lower) {
            if *t != 0.0 {
                sum += t - l;
                n += 1;
            }
        }
        (n > 0).then(|| sum / n as f64)
    }

    /// Structural invariants shared by every constructor.
    pub fn check_invariants(&self) -> Result<()> {
        let d = self.lower.len();
        if self.upper.len() != d {
            return Err(Error::Invariant("lower and upper lengths differ".into()));
        }
        if self.selected.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::Invariant("selected indices not strictly increasing".into()));
        }
        if self.selected.last().is_some_and(|&j| j >= d) {
            return Err(Error::Invariant("selected index out of range".into()));
        }
        let mut next = self.selected.iter().peekable();
        for j in 0..d {
            let on = next.peek() == Some(&&j);
            if on {
                next.next();
            }
            let (l, u) = (self.lower[j], self.upper[j]);
            if l.is_nan() || u.is_nan() {
                return Err(Error::Invariant(format!("NaN bound at {j}")));
            }
            if on && l > u {
                return Err(Error::Invariant(format!("L > U at selected {j}")));
            }
            if !on && (l != 0.0 || u != 0.0) {
                return Err(Error::Invariant(format!(
                    "unselected coordinate {j} has interval [{l}, {u}] instead of {{0}}"
                )));
            }
        }
        Ok(())
    }

    /// Additional one-sided invariants: `0 <= L_j <= max(x_j, 0)` and
    /// `U_j = +inf` on `S`.
    pub fn check_one_sided(&self, x: &[f64]) -> Result<()> {
        self.check_invariants()?;
        if x.len() != self.dim() {
            return Err(Error::Invariant("observation length mismatch".into()));
        }
        for &j in &self.selected {
            let l = self.lower[j];
            if !(0.0 <= l && l <= x[j].max(0.0)) {
                return Err(Error::Invariant(format!(
                    "L[{j}] = {l} outside [0, max(x_j, 0) = {}]",
                    x[j].max(0.0)
                )));
            }
            if self.upper[j] != f64::INFINITY {
                return Err(Error::Invariant(format!("U[{j}] is not +inf")));
            }
        }
        Ok(())
    }
}
