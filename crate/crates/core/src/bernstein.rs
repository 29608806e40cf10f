//! Bernstein functions with finite atomic Lévy measure,
//! `G(λ) = a + bλ + Σ w_i (1 − e^{−t_i λ})`, and the functional
//! `F(λ) = G(λ²)` for which `E F(|X−Y|) ≤ E F(|X+Y|)` holds for i.i.d. `X, Y`.
//!
//! The elementary atom `1 − e^{−tλ²}` has gap
//! `E[e^{−t(X−Y)²} − e^{−t(X+Y)²}] = 2 Σ_n (2t)^{2n+1}/(2n+1)! · [E X^{2n+1} e^{−tX²}]²`,
//! a series of nonnegative terms. Term `n` is evaluated as
//! `2 (Σ_i p_i sgn(x_i) √π(2n+1; z_i))²` with `z_i = 2t x_i²` and `π(k; z)` the
//! Poisson weight `z^k e^{−z} / k!`, computed in log space so that large
//! `t x²` neither overflows the powers nor underflows the exponential.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dists::{expect_pair, DiscreteDist, DistError};
use crate::inequality::{GapReport, Route, NONNEG_TOLERANCE};
use crate::numeric::CompensatedSum;

/// Auto-stop once the rigorous tail bound drops below this (gaps lie in [0, 1]).
pub const SERIES_STOP: f64 = 1e-16;

/// Largest `2 t max x²` accepted by the series routes.
pub const MAX_SERIES_ARGUMENT: f64 = 1e8;

#[derive(Debug, Error)]
pub enum BernsteinError {
    #[error("invalid Bernstein function: {0}")]
    Invalid(String),
    #[error("argument must be nonnegative and finite, got {0}")]
    NegativeArgument(f64),
    #[error("t must be positive and finite, got {0}")]
    InvalidT(f64),
    #[error("at least one series term is required")]
    ZeroTerms,
    #[error("series argument 2t·x² = {0:e} is out of range")]
    Overflow(f64),
    #[error("nonnegativity violated: gap {gap:e} below -{NONNEG_TOLERANCE:e}·scale (scale {scale:e})")]
    NonnegativityViolated { gap: f64, scale: f64 },
    #[error(transparent)]
    Dist(#[from] DistError),
    #[error("malformed Bernstein JSON: {0}")]
    Json(#[from] serde_json::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeasureAtom {
    pub t: f64,
    pub w: f64,
}

#[derive(Deserialize)]
struct RawBernstein {
    a: f64,
    b: f64,
    #[serde(default)]
    mu: Vec<MeasureAtom>,
}

/// `G(λ) = a + bλ + Σ w (1 − e^{−tλ})` with `a, b ≥ 0` and atoms `t, w > 0`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawBernstein")]
pub struct BernsteinFn {
    a: f64,
    b: f64,
    mu: Vec<MeasureAtom>,
}

impl TryFrom<RawBernstein> for BernsteinFn {
    type Error = BernsteinError;

    fn try_from(raw: RawBernstein) -> Result<Self, Self::Error> {
        Self::new(raw.a, raw.b, raw.mu)
    }
}

impl BernsteinFn {
    pub fn new(a: f64, b: f64, mu: Vec<MeasureAtom>) -> Result<Self, BernsteinError> {
        if !(a >= 0.0 && a.is_finite()) {
            return Err(BernsteinError::Invalid(format!("a = {a} must be finite and >= 0")));
        }
        if !(b >= 0.0 && b.is_finite()) {
            return Err(BernsteinError::Invalid(format!("b = {b} must be finite and >= 0")));
        }
        for m in &mu {
            if !(m.t > 0.0 && m.t.is_finite() && m.w > 0.0 && m.w.is_finite()) {
                return Err(BernsteinError::Invalid(format!(
                    "measure atom (t={}, w={}) needs t > 0 and w > 0",
                    m.t, m.w
                )));
            }
        }
        Ok(Self { a, b, mu })
    }

    /// `1 − e^{−tλ}`, the elementary atom.
    pub fn elementary(t: f64) -> Result<Self, BernsteinError> {
        Self::new(0.0, 0.0, vec![MeasureAtom { t, w: 1.0 }])
    }

    pub fn from_json(text: &str) -> Result<Self, BernsteinError> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn a(&self) -> f64 {
        self.a
    }

    pub fn b(&self) -> f64 {
        self.b
    }

    pub fn mu(&self) -> &[MeasureAtom] {
        &self.mu
    }

    fn g(&self, lam: f64) -> f64 {
        let mut acc = CompensatedSum::new();
        acc.add(self.a);
        acc.add(self.b * lam);
        for m in &self.mu {
            acc.add(-m.w * (-m.t * lam).exp_m1());
        }
        acc.value()
    }
}

fn check_arg(lam: f64) -> Result<(), BernsteinError> {
    if lam >= 0.0 && lam.is_finite() {
        Ok(())
    } else {
        Err(BernsteinError::NegativeArgument(lam))
    }
}

pub fn eval_g(g: &BernsteinFn, lam: f64) -> Result<f64, BernsteinError> {
    check_arg(lam)?;
    Ok(g.g(lam))
}

/// `F(λ) = G(λ²)`.
pub fn eval_f(g: &BernsteinFn, lam: f64) -> Result<f64, BernsteinError> {
    check_arg(lam)?;
    Ok(g.g(lam * lam))
}

/// `E F(|X+Y|) − E F(|X−Y|)` by direct double sums.
pub fn bernstein_gap_exact(d: &DiscreteDist, g: &BernsteinFn) -> Result<GapReport, BernsteinError> {
    // Only b·λ² grows; a finite discrete law always has the second moment it needs.
    let e_plus = expect_pair(d, |u, v| g.g((u + v) * (u + v)))?;
    let e_minus = expect_pair(d, |u, v| g.g((u - v) * (u - v)))?;
    let report = GapReport::from_moments(None, e_plus, e_minus, Route::Exact);
    let scale = e_plus + e_minus;
    if report.gap < -NONNEG_TOLERANCE * scale {
        return Err(BernsteinError::NonnegativityViolated { gap: report.gap, scale });
    }
    Ok(report)
}

/// `E[e^{−t(X−Y)²} − e^{−t(X+Y)²}]` by direct double sum.
pub fn elementary_gap_direct(d: &DiscreteDist, t: f64) -> Result<f64, BernsteinError> {
    check_t(t)?;
    Ok(expect_pair(d, |u, v| (-t * (u - v) * (u - v)).exp_m1() - (-t * (u + v) * (u + v)).exp_m1())?)
}

fn check_t(t: f64) -> Result<(), BernsteinError> {
    if t > 0.0 && t.is_finite() {
        Ok(())
    } else {
        Err(BernsteinError::InvalidT(t))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SeriesSum {
    #[serde(serialize_with = "crate::json::f17")]
    pub value: f64,
    #[serde(serialize_with = "crate::json::f17")]
    pub truncation_bound: f64,
    pub terms: usize,
}

/// `ln k! − [(k + ½) ln k − k + ½ ln 2π]`, the Stirling remainder.
fn stirling_error(k: f64) -> f64 {
    const S0: f64 = 1.0 / 12.0;
    const S1: f64 = 1.0 / 360.0;
    const S2: f64 = 1.0 / 1260.0;
    const S3: f64 = 1.0 / 1680.0;
    const S4: f64 = 1.0 / 1188.0;
    if k <= 15.0 {
        let ln_fact: f64 = (2..=k as u64).map(|j| (j as f64).ln()).sum();
        return ln_fact - (k + 0.5) * k.ln() + k - 0.5 * (2.0 * std::f64::consts::PI).ln();
    }
    let kk = k * k;
    (S0 - (S1 - (S2 - (S3 - S4 / kk) / kk) / kk) / kk) / k
}

/// `k ln(k/z) + z − k`, evaluated without cancellation near `k = z`.
fn deviance(k: f64, z: f64) -> f64 {
    if (k - z).abs() < 0.1 * (k + z) {
        let v = (k - z) / (k + z);
        let v2 = v * v;
        let mut s = (k - z) * v;
        let mut ej = 2.0 * k * v;
        let mut j = 1.0;
        loop {
            ej *= v2;
            let next = s + ej / (2.0 * j + 1.0);
            if next == s {
                return s;
            }
            s = next;
            j += 1.0;
        }
    }
    k * (k / z).ln() + z - k
}

/// `ln(z^k e^{−z} / k!)` for `k ≥ 1`, `z > 0`, accurate to a few ulps
/// even when `k` and `z` are large (Loader's saddle-point form).
fn ln_poisson(k: f64, z: f64) -> f64 {
    -stirling_error(k) - deviance(k, z) - 0.5 * (2.0 * std::f64::consts::PI * k).ln()
}

/// One weighted series component `p · sgn · √π(k; z)` with `z > 0`.
#[derive(Debug, Clone, Copy)]
struct Component {
    weight: f64,
    sign: f64,
    z: f64,
}

impl Component {
    /// Rigorous bound on `Σ_{odd j ≥ k} π(j; z)`: dominating terms are added
    /// explicitly while the two-step ratio `z²/((j+1)(j+2))` is ≥ 1, then the
    /// rest is bounded geometrically.
    fn odd_tail_bound(&self, k: u64) -> f64 {
        let mut acc = 0.0;
        let mut j = k as f64;
        loop {
            let ratio = self.z * self.z / ((j + 1.0) * (j + 2.0));
            let term = ln_poisson(j, self.z).exp();
            if ratio < 1.0 {
                return acc + term / (1.0 - ratio);
            }
            acc += term;
            j += 2.0;
        }
    }
}

fn components(d: &DiscreteDist, t: f64) -> Result<Vec<Component>, BernsteinError> {
    check_t(t)?;
    let mut out = Vec::new();
    for a in d.atoms() {
        if a.x == 0.0 {
            continue;
        }
        let z = 2.0 * t * a.x * a.x;
        if !(z.is_finite() && z <= MAX_SERIES_ARGUMENT) {
            return Err(BernsteinError::Overflow(z));
        }
        out.push(Component { weight: a.p, sign: a.x.signum(), z });
    }
    Ok(out)
}

fn series_term(comps: &[Component], k: u64) -> f64 {
    let mut m = CompensatedSum::new();
    for c in comps {
        m.add(c.weight * c.sign * (0.5 * ln_poisson(k as f64, c.z)).exp());
    }
    let m = m.value();
    2.0 * m * m
}

/// Tail bound `2 Σ_i p_i Σ_{odd j ≥ k} π(j; z_i)`, via Cauchy–Schwarz on the square.
fn series_tail_bound(comps: &[Component], k: u64) -> f64 {
    2.0 * comps.iter().map(|c| c.weight * c.odd_tail_bound(k)).sum::<f64>()
}

/// First `n_terms` terms of the elementary gap series, with a rigorous bound
/// on the omitted tail.
pub fn elementary_gap_series(d: &DiscreteDist, t: f64, n_terms: usize) -> Result<SeriesSum, BernsteinError> {
    if n_terms == 0 {
        return Err(BernsteinError::ZeroTerms);
    }
    let comps = components(d, t)?;
    let mut value = 0.0;
    for n in 0..n_terms as u64 {
        // plain addition of nonnegative terms keeps partial sums monotone
        value += series_term(&comps, 2 * n + 1);
    }
    let next = 2 * n_terms as u64 + 1;
    Ok(SeriesSum { value, truncation_bound: series_tail_bound(&comps, next), terms: n_terms })
}

/// Sums the elementary gap series until the tail bound falls below
/// [`SERIES_STOP`].
pub fn elementary_gap_series_auto(d: &DiscreteDist, t: f64) -> Result<SeriesSum, BernsteinError> {
    let comps = components(d, t)?;
    let z_max = comps.iter().map(|c| c.z).fold(0.0, f64::max);
    let mut value = 0.0;
    let mut terms = 0;
    loop {
        value += series_term(&comps, 2 * terms as u64 + 1);
        terms += 1;
        let next = 2 * terms as u64 + 1;
        let j = next as f64;
        // the bound is only cheap once every component is in its geometric regime
        if z_max * z_max < (j + 1.0) * (j + 2.0) {
            let bound = series_tail_bound(&comps, next);
            if bound < SERIES_STOP {
                return Ok(SeriesSum { value, truncation_bound: bound, terms });
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct IdentityCheck {
    #[serde(serialize_with = "crate::json::f17")]
    pub lhs: f64,
    #[serde(serialize_with = "crate::json::f17")]
    pub rhs_partial: f64,
    #[serde(serialize_with = "crate::json::f17")]
    pub remainder_bound: f64,
}

impl IdentityCheck {
    /// `|lhs − rhs_partial| ≤ remainder_bound`, with slack for rounding.
    pub fn within_bound(&self) -> bool {
        (self.lhs - self.rhs_partial).abs() <= self.remainder_bound + 4.0 * f64::EPSILON
    }
}

/// `e^{−t(x−y)²} − e^{−t(x+y)²}` directly against the truncated series
/// `2 e^{−t(x²+y²)} Σ_{n<N} (2txy)^{2n+1}/(2n+1)!`.
pub fn series_identity_check(x: f64, y: f64, t: f64, n_terms: usize) -> Result<IdentityCheck, BernsteinError> {
    check_t(t)?;
    if !x.is_finite() || !y.is_finite() {
        return Err(BernsteinError::NegativeArgument(if x.is_finite() { y } else { x }));
    }
    if n_terms == 0 {
        return Err(BernsteinError::ZeroTerms);
    }
    let lhs = (-t * (x - y) * (x - y)).exp() - (-t * (x + y) * (x + y)).exp();
    let w = 2.0 * t * x * y;
    if w == 0.0 {
        return Ok(IdentityCheck { lhs, rhs_partial: 0.0, remainder_bound: 0.0 });
    }
    if !w.is_finite() {
        return Err(BernsteinError::Overflow(w));
    }
    // 2 e^{-s} w^k / k! = 2 e^{-w'} · π(k; |w|) with e^{|w| - s} folded into the log
    let s = t * (x * x + y * y);
    let comp = Component { weight: 1.0, sign: w.signum(), z: w.abs() };
    let shift = comp.z - s;
    let mut rhs = CompensatedSum::new();
    for n in 0..n_terms as u64 {
        rhs.add(2.0 * comp.sign * (ln_poisson((2 * n + 1) as f64, comp.z) + shift).exp());
    }
    let remainder_bound = 2.0 * shift.exp() * comp.odd_tail_bound(2 * n_terms as u64 + 1);
    Ok(IdentityCheck { lhs, rhs_partial: rhs.value(), remainder_bound })
}
