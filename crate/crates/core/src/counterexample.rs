//! Two-point laws on which `E|X−Y|^α ≤ E|X+Y|^α` fails once α > 2.
//!
//! For `M ≥ max(c, 1)` put `q = c/M`, `p = 1 − q` and
//! `P(X = 1) = p`, `P(X = −M) = q`. Then
//!
//! ```text
//! E|X−Y|^α − E|X+Y|^α = 2pq[(M+1)^α − (M−1)^α] − 2^α M^α q² − 2^α p²
//!                     ≥ 4pqα M^{α−1} − 2^α M^α q² − 2^α p²
//!                     = M^{α−2}(4pαc − 2^α c²) − 2^α p²,
//! ```
//!
//! which is eventually positive in `M` whenever `c < 2^{2−α} α`.

use serde::Serialize;
use thiserror::Error;

use crate::dists::{DiscreteDist, DistError};

/// Doubling search stops once `M` exceeds this.
pub const M_CAP: f64 = 1e9;

/// `M` beyond which the bracket `(M+1)^α − (M−1)^α` is evaluated by series.
pub const SERIES_CUTOVER: f64 = 1e4;

/// Largest α accepted by the search.
pub const MAX_SEARCH_ALPHA: f64 = 40.0;

/// Relative tolerance of the bound-chain assertions.
pub const CHAIN_TOLERANCE: f64 = 1e-10;

#[derive(Debug, Error)]
pub enum CounterError {
    #[error("alpha = {0} is not allowed here (must exceed 2)")]
    AlphaTooSmall(f64),
    #[error("alpha = {0} outside the supported search range (2, 40]")]
    AlphaOutOfRange(f64),
    #[error("invalid family: {0}")]
    InvalidFamily(String),
    #[error("q = c/M = 1: the family collapses to a single atom")]
    DegenerateFamily,
    #[error("bound chain check failed: {0}")]
    ChainViolated(String),
    #[error("no violating M found up to {M_CAP:e}")]
    SearchExhausted,
    #[error(transparent)]
    Dist(#[from] DistError),
}

/// The `(α, c, M)` family; `q = c/M` and `p = 1 − q` are derived.
///
/// Any α > 0 is representable so the same family can be checked against the
/// α ≤ 2 inequality; the bound chain and the search require α > 2.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CounterFamily {
    #[serde(serialize_with = "crate::json::f17")]
    alpha: f64,
    #[serde(serialize_with = "crate::json::f17")]
    c: f64,
    #[serde(rename = "M", serialize_with = "crate::json::f17")]
    m: f64,
}

impl CounterFamily {
    pub fn new(alpha: f64, c: f64, m: f64) -> Result<Self, CounterError> {
        if !(alpha > 0.0 && alpha.is_finite()) {
            return Err(CounterError::InvalidFamily(format!("alpha = {alpha} must be positive")));
        }
        if !(c > 0.0 && c.is_finite()) {
            return Err(CounterError::InvalidFamily(format!("c = {c} must be positive")));
        }
        if !(m.is_finite() && m >= c.max(1.0)) {
            return Err(CounterError::InvalidFamily(format!("M = {m} must be at least max(c, 1)")));
        }
        Ok(Self { alpha, c, m })
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn c(&self) -> f64 {
        self.c
    }

    pub fn m(&self) -> f64 {
        self.m
    }

    pub fn q(&self) -> f64 {
        self.c / self.m
    }

    pub fn p(&self) -> f64 {
        1.0 - self.q()
    }

    /// `c < 2^{2−α} α`.
    pub fn threshold(&self) -> f64 {
        2f64.powf(2.0 - self.alpha) * self.alpha
    }

    /// Closed-form `E|X+Y|^α + E|X−Y|^α`, the tolerance scale.
    pub fn moment_scale(&self) -> f64 {
        let (a, m, p, q) = (self.alpha, self.m, self.p(), self.q());
        let two_a = 2f64.powf(a);
        let e_plus = two_a * p * p + two_a * m.powf(a) * q * q + 2.0 * p * q * (m - 1.0).powf(a);
        let e_minus = 2.0 * p * q * (m + 1.0).powf(a);
        e_plus + e_minus
    }
}

/// `{(1, p), (−M, q)}`.
pub fn family_dist(f: &CounterFamily) -> Result<DiscreteDist, CounterError> {
    let q = f.q();
    if q >= 1.0 {
        return Err(CounterError::DegenerateFamily);
    }
    Ok(DiscreteDist::new([(1.0, 1.0 - q), (-f.m, q)])?)
}

/// `(1+h)^α − (1−h)^α = 2 Σ_{k odd} C(α,k) h^k` for small `h`.
fn odd_binomial_bracket(alpha: f64, h: f64) -> f64 {
    let mut coeff = alpha; // C(α, 1)
    let mut power = h;
    let mut sum = 0.0;
    let mut k = 1.0;
    loop {
        let term = coeff * power;
        sum += term;
        if term.abs() <= 1e-17 * sum.abs() || coeff == 0.0 {
            break;
        }
        // C(α, k+2) = C(α, k) (α−k)(α−k−1) / ((k+1)(k+2))
        coeff *= (alpha - k) * (alpha - k - 1.0) / ((k + 1.0) * (k + 2.0));
        power *= h * h;
        k += 2.0;
    }
    2.0 * sum
}

/// `2pq[(M+1)^α − (M−1)^α]`, rewritten as `2pq M^α[(1+1/M)^α − (1−1/M)^α]`
/// with a series bracket for large `M`.
fn cross_term(f: &CounterFamily) -> f64 {
    let (a, m, p, q) = (f.alpha, f.m, f.p(), f.q());
    if m > SERIES_CUTOVER {
        2.0 * p * q * m.powf(a) * odd_binomial_bracket(a, 1.0 / m)
    } else {
        2.0 * p * q * ((m + 1.0).powf(a) - (m - 1.0).powf(a))
    }
}

/// `E|X−Y|^α − E|X+Y|^α` by the closed form.
pub fn violation_exact(f: &CounterFamily) -> f64 {
    let (a, m, p, q) = (f.alpha, f.m, f.p(), f.q());
    let two_a = 2f64.powf(a);
    cross_term(f) - two_a * m.powf(a) * q * q - two_a * p * p
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BoundChain {
    #[serde(serialize_with = "crate::json::f17")]
    pub exact: f64,
    #[serde(serialize_with = "crate::json::f17")]
    pub bound1: f64,
    #[serde(serialize_with = "crate::json::f17")]
    pub bound2: f64,
}

/// Evaluates the three stages of the lower-bound chain and checks
/// `exact ≥ bound1 = bound2` to [`CHAIN_TOLERANCE`] of the moment scale.
pub fn lower_bound_chain(f: &CounterFamily) -> Result<BoundChain, CounterError> {
    if f.alpha <= 2.0 {
        return Err(CounterError::AlphaTooSmall(f.alpha));
    }
    let (a, m, p, q, c) = (f.alpha, f.m, f.p(), f.q(), f.c);
    let two_a = 2f64.powf(a);
    let chain = BoundChain {
        exact: violation_exact(f),
        bound1: 4.0 * p * q * a * m.powf(a - 1.0) - two_a * m.powf(a) * q * q - two_a * p * p,
        bound2: m.powf(a - 2.0) * (4.0 * p * a * c - two_a * c * c) - two_a * p * p,
    };
    let tol = CHAIN_TOLERANCE * f.moment_scale();
    if chain.exact < chain.bound1 - tol {
        return Err(CounterError::ChainViolated(format!("exact {} < bound1 {}", chain.exact, chain.bound1)));
    }
    if (chain.bound1 - chain.bound2).abs() > tol {
        return Err(CounterError::ChainViolated(format!("bound1 {} != bound2 {}", chain.bound1, chain.bound2)));
    }
    Ok(chain)
}

/// Constructive search: `c = 2^{1−α} α` (half the threshold), then `M` doubles
/// from `2 max(c, 1)` until the violation is positive.
pub fn find_violation(alpha: f64) -> Result<CounterFamily, CounterError> {
    if !(alpha > 2.0) {
        return Err(CounterError::AlphaTooSmall(alpha));
    }
    if alpha > MAX_SEARCH_ALPHA || !alpha.is_finite() {
        return Err(CounterError::AlphaOutOfRange(alpha));
    }
    let c = 2f64.powf(1.0 - alpha) * alpha;
    let mut m = 2.0 * c.max(1.0);
    while m <= M_CAP {
        let f = CounterFamily::new(alpha, c, m)?;
        if violation_exact(&f) > 0.0 {
            return Ok(f);
        }
        m *= 2.0;
    }
    Err(CounterError::SearchExhausted)
}

/// JSON-facing summary of a violating family.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CounterReport {
    #[serde(flatten)]
    pub family: CounterFamily,
    #[serde(serialize_with = "crate::json::f17")]
    pub violation: f64,
    #[serde(serialize_with = "crate::json::f17")]
    pub bound1: f64,
    #[serde(serialize_with = "crate::json::f17")]
    pub bound2: f64,
    #[serde(serialize_with = "crate::json::f17")]
    pub threshold: f64,
    pub threshold_holds: bool,
}

pub fn report(f: &CounterFamily) -> Result<CounterReport, CounterError> {
    let chain = lower_bound_chain(f)?;
    Ok(CounterReport {
        family: *f,
        violation: chain.exact,
        bound1: chain.bound1,
        bound2: chain.bound2,
        threshold: f.threshold(),
        threshold_holds: f.c < f.threshold(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::inequality::gap_exact;

    fn fam(a: f64, c: f64, m: f64) -> CounterFamily {
        CounterFamily::new(a, c, m).unwrap()
    }

    fn double_sum_violation(f: &CounterFamily) -> f64 {
        -gap_exact(&family_dist(f).unwrap(), f.alpha()).unwrap().gap
    }

    #[test]
    fn family_dist_examples() {
        let d = family_dist(&fam(3.0, 0.5, 100.0)).unwrap();
        let atoms: Vec<(f64, f64)> = d.atoms().iter().map(|a| (a.x, a.p)).collect();
        assert_eq!(atoms, vec![(-100.0, 0.005), (1.0, 0.995)]);
        assert!(matches!(family_dist(&fam(3.0, 1.0, 1.0)), Err(CounterError::DegenerateFamily)));
        let d = family_dist(&fam(2.5, 1.0, 10.0)).unwrap();
        let atoms: Vec<(f64, f64)> = d.atoms().iter().map(|a| (a.x, a.p)).collect();
        assert_eq!(atoms, vec![(-10.0, 0.1), (1.0, 0.9)]);
        assert!(CounterFamily::new(3.0, 2.0, 1.5).is_err());
        assert!(CounterFamily::new(3.0, 0.5, 0.7).is_err());
        assert!(CounterFamily::new(3.0, 0.0, 2.0).is_err());
    }

    #[test]
    fn violation_reference_value() {
        let f = fam(3.0, 0.5, 100.0);
        // 2·0.995·0.005·(101³ − 99³) − 8·10⁶·0.005² − 8·0.995²
        let hand = 0.00995 * 60002.0 - 200.0 - 8.0 * 0.990025;
        let v = violation_exact(&f);
        assert!((v - hand).abs() <= 1e-10 * hand);
        assert!((v - 389.0997).abs() < 1e-9);
        assert!((v - double_sum_violation(&f)).abs() <= 1e-10 * f.moment_scale());

        let f = fam(2.5, 1.0, 2.0);
        assert!((violation_exact(&f) - double_sum_violation(&f)).abs() <= 1e-10 * f.moment_scale());
    }

    #[test]
    fn series_bracket_agrees_with_direct_powers() {
        for (a, m) in [(3.0, 2e4), (2.5, 5e4), (7.3, 1.5e4)] {
            let direct = (1.0f64 + 1.0 / m).powf(a) - (1.0f64 - 1.0 / m).powf(a);
            let series = odd_binomial_bracket(a, 1.0 / m);
            assert!((direct - series).abs() <= 1e-9 * series, "{a} {m}");
        }
        // integer α: the series terminates and is exact
        assert!((odd_binomial_bracket(3.0, 0.5) - (1.5f64.powi(3) - 0.5f64.powi(3))).abs() < 1e-15);
    }

    #[test]
    fn chain_examples() {
        let f = fam(3.0, 0.5, 100.0);
        let chain = lower_bound_chain(&f).unwrap();
        assert!((chain.bound2 - 389.0798).abs() < 1e-9);
        assert!(chain.exact >= chain.bound1);
        assert!(f.c() < f.threshold());
        assert_eq!(f.threshold(), 1.5);

        let g = fam(3.0, 2.0, 100.0);
        assert!(g.c() > g.threshold());
        assert!(4.0 * 1.0 * 3.0 * 2.0 - 8.0 * 4.0 < 0.0);
        assert!(lower_bound_chain(&g).unwrap().bound2 < 0.0);
        assert!(matches!(lower_bound_chain(&fam(2.0, 0.5, 10.0)), Err(CounterError::AlphaTooSmall(_))));
    }

    #[test]
    fn search_examples() {
        let f = find_violation(3.0).unwrap();
        assert_eq!(f.c(), 0.75);
        assert!(violation_exact(&f) > 0.0);
        assert!(double_sum_violation(&f) > 0.0);
        assert!(violation_exact(&find_violation(2.1).unwrap()) > 0.0);
        assert!(matches!(find_violation(2.0), Err(CounterError::AlphaTooSmall(_))));
        assert!(matches!(find_violation(41.0), Err(CounterError::AlphaOutOfRange(_))));
    }

    #[test]
    fn monotone_blow_up() {
        let vals: Vec<f64> = [10.0, 1e2, 1e3, 1e4].iter().map(|&m| violation_exact(&fam(3.0, 0.5, m))).collect();
        assert!(vals[1] > 0.0);
        assert!(vals.windows(2).all(|w| w[1] > w[0]), "{vals:?}");
    }

    #[test]
    fn report_json() {
        let r = report(&find_violation(3.0).unwrap()).unwrap();
        let v: serde_json::Value = serde_json::from_str(&crate::json::to_string(&r)).unwrap();
        assert_eq!(v["c"].as_f64(), Some(0.75));
        assert!(v["M"].as_f64().unwrap() >= 2.0);
        assert!(v["violation"].as_f64().unwrap() > 0.0);
        assert_eq!(v["threshold_holds"], true);
    }
}
