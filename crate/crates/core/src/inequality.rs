//! The moment gap `E|X+Y|^α − E|X−Y|^α` for i.i.d. `X, Y`, computed by
//! independent routes:
//!
//! * `Exact`: double sum over the atoms of a discrete law.
//! * `TailIntegral` (α = 1 only): `2 ∫₀^∞ [P(X>r) − P(X<−r)]² dr`, exact for
//!   discrete laws because the integrand is piecewise constant.
//! * `Variance`: `2^α Var(Z_α)` where `Z_α = ∫ B^{1/2,α}_{|u|} sgn(u) P(du)`;
//!   only the variance is needed and it is a double sum of kernel values.
//! * `MonteCarlo`: paired sample means over i.i.d. draws.
//!
//! For α ∈ (0, 2] the gap is nonnegative; the exact and kernel routes assert
//! it up to floating cancellation.

use rand::RngCore;
use serde::ser::{Serialize, SerializeMap, Serializer};
use thiserror::Error;

use crate::dists::{expect_pair, tail_functional, DiscreteDist, DistError, Sampler};
use crate::json::{f17, opt_f17};
use crate::kernel::{cov, BifParams, KernelError};
use crate::numeric::{pow0, sgn, CompensatedSum};
use crate::rng::substream;

/// Relative slack allowed below zero before a nonnegativity assertion fires.
pub const NONNEG_TOLERANCE: f64 = 1e-12;

/// Pairs per Monte Carlo block; each block owns its own pair of substreams.
pub const MC_BLOCK: usize = 1 << 16;

#[derive(Debug, Error)]
pub enum InequalityError {
    #[error("alpha must be positive and finite, got {0}")]
    InvalidAlpha(f64),
    #[error("alpha must lie in (0, 2] for this route, got {0}")]
    AlphaOutOfRange(f64),
    #[error("nonnegativity violated: gap {gap:e} below -{NONNEG_TOLERANCE:e}·scale (scale {scale:e})")]
    NonnegativityViolated { gap: f64, scale: f64 },
    #[error("at least two samples are required, got {0}")]
    InsufficientSamples(usize),
    #[error("sampler does not certify a finite moment of order {alpha} (hint: {hint:?})")]
    MomentUnverified { alpha: f64, hint: Option<f64> },
    #[error(transparent)]
    Dist(#[from] DistError),
    #[error(transparent)]
    Kernel(#[from] KernelError),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Route {
    Exact,
    TailIntegral,
    Variance,
    MonteCarlo { n: usize, stderr: f64 },
}

impl Route {
    pub fn name(&self) -> &'static str {
        match self {
            Self::Exact => "exact",
            Self::TailIntegral => "tail",
            Self::Variance => "variance",
            Self::MonteCarlo { .. } => "mc",
        }
    }
}

/// Result of one gap computation.
///
/// `e_plus` and `e_minus` are present for the routes that compute the two
/// moments (exact, Monte Carlo, Bernstein); the tail and kernel routes only
/// produce the gap. `alpha` is absent for the Bernstein functional.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GapReport {
    pub alpha: Option<f64>,
    pub e_plus: Option<f64>,
    pub e_minus: Option<f64>,
    pub gap: f64,
    pub route: Route,
    /// `Var(Z_α)` for the kernel route.
    pub variance: Option<f64>,
}

impl GapReport {
    pub(crate) fn from_moments(alpha: Option<f64>, e_plus: f64, e_minus: f64, route: Route) -> Self {
        Self {
            alpha,
            e_plus: Some(e_plus),
            e_minus: Some(e_minus),
            gap: e_plus - e_minus,
            route,
            variance: None,
        }
    }

    /// `e_plus + e_minus` when both moments are known.
    pub fn scale(&self) -> Option<f64> {
        Some(self.e_plus? + self.e_minus?)
    }

    pub fn to_json(&self) -> String {
        crate::json::to_string(self)
    }
}

struct F17(f64);

impl Serialize for F17 {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        f17(&self.0, s)
    }
}

struct OptF17(Option<f64>);

impl Serialize for OptF17 {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        opt_f17(&self.0, s)
    }
}

impl Serialize for GapReport {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        let mut map = s.serialize_map(None)?;
        map.serialize_entry("alpha", &OptF17(self.alpha))?;
        map.serialize_entry("e_plus", &OptF17(self.e_plus))?;
        map.serialize_entry("e_minus", &OptF17(self.e_minus))?;
        map.serialize_entry("gap", &F17(self.gap))?;
        map.serialize_entry("route", self.route.name())?;
        if let Route::MonteCarlo { n, stderr } = self.route {
            map.serialize_entry("n", &n)?;
            map.serialize_entry("stderr", &F17(stderr))?;
        }
        if let Some(v) = self.variance {
            map.serialize_entry("var_z", &F17(v))?;
        }
        map.end()
    }
}

fn check_alpha(alpha: f64) -> Result<(), InequalityError> {
    if alpha > 0.0 && alpha.is_finite() {
        Ok(())
    } else {
        Err(InequalityError::InvalidAlpha(alpha))
    }
}

fn check_alpha_le2(alpha: f64) -> Result<(), InequalityError> {
    check_alpha(alpha)?;
    if alpha > 2.0 {
        return Err(InequalityError::AlphaOutOfRange(alpha));
    }
    Ok(())
}

pub(crate) fn assert_nonneg(gap: f64, scale: f64) -> Result<(), InequalityError> {
    if gap < -NONNEG_TOLERANCE * scale {
        Err(InequalityError::NonnegativityViolated { gap, scale })
    } else {
        Ok(())
    }
}

/// `E|X+Y|^α` and `E|X−Y|^α` by double sums.
///
/// Any α > 0 is accepted; nonnegativity is asserted only for α ≤ 2.
pub fn gap_exact(d: &DiscreteDist, alpha: f64) -> Result<GapReport, InequalityError> {
    check_alpha(alpha)?;
    let e_plus = expect_pair(d, |u, v| pow0((u + v).abs(), alpha))?;
    let e_minus = expect_pair(d, |u, v| pow0((u - v).abs(), alpha))?;
    let report = GapReport::from_moments(Some(alpha), e_plus, e_minus, Route::Exact);
    if alpha <= 2.0 {
        assert_nonneg(report.gap, e_plus + e_minus)?;
    }
    Ok(report)
}

/// α = 1 gap as `2 Σ_k (b_{k+1} − b_k) τ(b_k)²`, where the `b_k` are the
/// distinct `|x_i|` together with 0 and `τ(r) = P(X>r) − P(X<−r)`.
pub fn gap_tail_integral(d: &DiscreteDist) -> GapReport {
    let mut breaks: Vec<f64> = d.atoms().iter().map(|a| a.x.abs()).collect();
    breaks.push(0.0);
    breaks.sort_by(f64::total_cmp);
    breaks.dedup();
    let mut acc = CompensatedSum::new();
    for w in breaks.windows(2) {
        let level = tail_functional(d, w[0]);
        acc.add((w[1] - w[0]) * level * level);
    }
    GapReport {
        alpha: Some(1.0),
        e_plus: None,
        e_minus: None,
        gap: 2.0 * acc.value(),
        route: Route::TailIntegral,
        variance: None,
    }
}

/// Kernel route: `Var(Z_α) = Σ_i Σ_j p_i p_j R^{1/2,α}(|x_i|, |x_j|) sgn(x_i) sgn(x_j)`
/// and gap `2^α Var(Z_α)`.
pub fn gap_via_variance(d: &DiscreteDist, alpha: f64) -> Result<GapReport, InequalityError> {
    check_alpha_le2(alpha)?;
    let p = BifParams::half(alpha)?;
    let mut var = CompensatedSum::new();
    let mut scale = CompensatedSum::new();
    for a in d.atoms() {
        for b in d.atoms() {
            let term = a.p * b.p * cov(&p, a.x.abs(), b.x.abs())? * sgn(a.x) * sgn(b.x);
            var.add(term);
            scale.add(term.abs());
        }
    }
    let var = var.value();
    assert_nonneg(var, scale.value())?;
    Ok(GapReport {
        alpha: Some(alpha),
        e_plus: None,
        e_minus: None,
        gap: 2f64.powf(alpha) * var,
        route: Route::Variance,
        variance: Some(var),
    })
}

#[derive(Debug, Clone, Copy, Default)]
struct BlockStats {
    count: usize,
    plus: CompensatedSum,
    minus: CompensatedSum,
    diff_mean: f64,
    diff_m2: f64,
}

impl BlockStats {
    fn push(&mut self, a: f64, b: f64) {
        self.count += 1;
        self.plus.add(a);
        self.minus.add(b);
        let d = a - b;
        let delta = d - self.diff_mean;
        self.diff_mean += delta / self.count as f64;
        self.diff_m2 += delta * (d - self.diff_mean);
    }

    fn merge(&mut self, other: &Self) {
        if other.count == 0 {
            return;
        }
        let (na, nb) = (self.count as f64, other.count as f64);
        let n = na + nb;
        let delta = other.diff_mean - self.diff_mean;
        self.diff_mean += delta * nb / n;
        self.diff_m2 += other.diff_m2 + delta * delta * na * nb / n;
        self.count += other.count;
        self.plus.add(other.plus.value());
        self.minus.add(other.minus.value());
    }
}

fn run_block<S: Sampler + ?Sized>(s: &S, alpha: f64, seed: u64, block: usize, len: usize) -> BlockStats {
    let mut xs = substream(seed, 2 * block as u64);
    let mut ys = substream(seed, 2 * block as u64 + 1);
    let (xs, ys): (&mut dyn RngCore, &mut dyn RngCore) = (&mut xs, &mut ys);
    let mut stats = BlockStats::default();
    for _ in 0..len {
        let x = s.draw(xs);
        let y = s.draw(ys);
        stats.push(pow0((x + y).abs(), alpha), pow0((x - y).abs(), alpha));
    }
    stats
}

pub fn gap_mc<S: Sampler + ?Sized>(s: &S, alpha: f64, n: usize, seed: u64) -> Result<GapReport, InequalityError> {
    gap_mc_with_workers(s, alpha, n, seed, 1)
}

/// Paired Monte Carlo estimate: both means are taken over the same pairs
/// `(X_k, Y_k)`, and `stderr` is the standard error of the per-pair
/// difference. Pairs are generated in fixed blocks of [`MC_BLOCK`], so the
/// estimate does not depend on `workers`.
pub fn gap_mc_with_workers<S: Sampler + ?Sized>(
    s: &S,
    alpha: f64,
    n: usize,
    seed: u64,
    workers: usize,
) -> Result<GapReport, InequalityError> {
    check_alpha_le2(alpha)?;
    if n < 2 {
        return Err(InequalityError::InsufficientSamples(n));
    }
    match s.moment_hint() {
        Some(h) if h >= alpha => {}
        hint => return Err(InequalityError::MomentUnverified { alpha, hint }),
    }

    let blocks = n.div_ceil(MC_BLOCK);
    let block_len = |b: usize| MC_BLOCK.min(n - b * MC_BLOCK);
    let workers = workers.clamp(1, blocks);
    let mut per_block = vec![BlockStats::default(); blocks];
    if workers == 1 {
        for (b, slot) in per_block.iter_mut().enumerate() {
            *slot = run_block(s, alpha, seed, b, block_len(b));
        }
    } else {
        let per = blocks.div_ceil(workers);
        std::thread::scope(|scope| {
            for (w, chunk) in per_block.chunks_mut(per).enumerate() {
                scope.spawn(move || {
                    for (k, slot) in chunk.iter_mut().enumerate() {
                        let b = w * per + k;
                        *slot = run_block(s, alpha, seed, b, block_len(b));
                    }
                });
            }
        });
    }

    let mut total = BlockStats::default();
    for b in &per_block {
        total.merge(b);
    }
    let nf = n as f64;
    let var_diff = total.diff_m2 / (nf - 1.0);
    let stderr = (var_diff / nf).sqrt();
    Ok(GapReport::from_moments(
        Some(alpha),
        total.plus.value() / nf,
        total.minus.value() / nf,
        Route::MonteCarlo { n, stderr },
    ))
}

/// The α = ∞ form: `‖X−Y‖∞ = M − m ≤ 2 max(|M|, |m|) = ‖X+Y‖∞`.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct SupNormBound {
    #[serde(serialize_with = "crate::json::f17")]
    pub m_lo: f64,
    #[serde(serialize_with = "crate::json::f17")]
    pub m_hi: f64,
    #[serde(serialize_with = "crate::json::f17")]
    pub lhs: f64,
    #[serde(serialize_with = "crate::json::f17")]
    pub rhs: f64,
}

impl SupNormBound {
    pub fn holds(&self) -> bool {
        self.lhs <= self.rhs
    }

    pub fn is_equality(&self) -> bool {
        self.lhs == self.rhs
    }
}

pub fn supnorm_bound(d: &DiscreteDist) -> SupNormBound {
    let (m_lo, m_hi) = (d.min_value(), d.max_value());
    let bound = SupNormBound {
        m_lo,
        m_hi,
        lhs: m_hi - m_lo,
        rhs: 2.0 * m_hi.abs().max(m_lo.abs()),
    };
    assert!(bound.holds(), "sup-norm bound failed: {bound:?}");
    bound
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dists::{DegenerateSampler, DiscreteSampler};

    fn bern() -> DiscreteDist {
        DiscreteDist::new([(0.0, 0.5), (1.0, 0.5)]).unwrap()
    }

    fn sym() -> DiscreteDist {
        DiscreteDist::new([(-1.0, 0.5), (1.0, 0.5)]).unwrap()
    }

    #[test]
    fn exact_examples() {
        assert_eq!(gap_exact(&sym(), 1.0).unwrap().gap, 0.0);
        let r = gap_exact(&bern(), 1.0).unwrap();
        assert_eq!((r.e_plus, r.e_minus, r.gap), (Some(1.0), Some(0.5), 0.5));
        let r = gap_exact(&bern(), 2.0).unwrap();
        assert_eq!((r.e_plus, r.e_minus, r.gap), (Some(1.5), Some(0.5), 1.0));
        assert!(gap_exact(&bern(), 3.0).is_ok());
        assert!(matches!(gap_exact(&bern(), 0.0), Err(InequalityError::InvalidAlpha(_))));
        assert!(matches!(gap_exact(&bern(), f64::NAN), Err(InequalityError::InvalidAlpha(_))));
    }

    #[test]
    fn tail_examples() {
        assert_eq!(gap_tail_integral(&bern()).gap, 0.5);
        assert_eq!(gap_tail_integral(&sym()).gap, 0.0);
        let c = DiscreteDist::dirac(2.5).unwrap();
        assert_eq!(gap_tail_integral(&c).gap, 5.0);
        assert_eq!(gap_exact(&c, 1.0).unwrap().gap, 5.0);
    }

    #[test]
    fn variance_examples() {
        let r = gap_via_variance(&bern(), 1.0).unwrap();
        assert_eq!((r.variance, r.gap), (Some(0.25), 0.5));
        assert_eq!(gap_via_variance(&sym(), 1.0).unwrap().variance, Some(0.0));
        for alpha in [0.3, 1.0, 1.7, 2.0] {
            let c = DiscreteDist::dirac(-1.7).unwrap();
            let r = gap_via_variance(&c, alpha).unwrap();
            assert!((r.variance.unwrap() - 1.7f64.powf(alpha)).abs() < 1e-14);
            assert!((r.gap - 3.4f64.powf(alpha)).abs() < 1e-13);
        }
        assert!(matches!(gap_via_variance(&bern(), 2.5), Err(InequalityError::AlphaOutOfRange(_))));
    }

    #[test]
    fn mc_degenerate_is_exact() {
        let r = gap_mc(&DegenerateSampler(1.0), 1.0, 1000, 9).unwrap();
        assert_eq!(r.gap, 2.0);
        assert!(matches!(r.route, Route::MonteCarlo { n: 1000, .. }));
        assert!(matches!(
            gap_mc(&DegenerateSampler(1.0), 1.0, 1, 9),
            Err(InequalityError::InsufficientSamples(1))
        ));
    }

    struct NoHint;
    impl Sampler for NoHint {
        fn draw(&self, _: &mut dyn RngCore) -> f64 {
            0.0
        }
        fn moment_hint(&self) -> Option<f64> {
            Some(0.5)
        }
    }

    #[test]
    fn mc_requires_moment_certificate() {
        assert!(matches!(gap_mc(&NoHint, 1.0, 10, 0), Err(InequalityError::MomentUnverified { .. })));
        assert!(gap_mc(&NoHint, 0.4, 10, 0).is_ok());
    }

    #[test]
    fn mc_is_worker_invariant() {
        let s = DiscreteSampler::new(&bern());
        let n = 3 * MC_BLOCK + 17;
        let a = gap_mc_with_workers(&s, 1.0, n, 5, 1).unwrap();
        let b = gap_mc_with_workers(&s, 1.0, n, 5, 3).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn supnorm_examples() {
        let b = supnorm_bound(&DiscreteDist::uniform(&[-3.0, 1.0]).unwrap());
        assert_eq!((b.m_lo, b.m_hi, b.lhs, b.rhs), (-3.0, 1.0, 4.0, 6.0));
        let b = supnorm_bound(&DiscreteDist::dirac(-2.0).unwrap());
        assert_eq!((b.lhs, b.rhs), (0.0, 4.0));
        let b = supnorm_bound(&DiscreteDist::uniform(&[-5.0, 5.0]).unwrap());
        assert!(b.is_equality());
        assert_eq!(b.lhs, 10.0);
    }

    #[test]
    fn json_shape() {
        let r = gap_exact(&bern(), 1.0).unwrap();
        let v: serde_json::Value = serde_json::from_str(&r.to_json()).unwrap();
        assert_eq!(v["gap"].as_f64(), Some(0.5));
        assert_eq!(v["route"], "exact");
        assert!(v.get("n").is_none());
        let m = gap_mc(&DegenerateSampler(1.0), 1.0, 10, 0).unwrap();
        let v: serde_json::Value = serde_json::from_str(&m.to_json()).unwrap();
        assert_eq!(v["n"], 10);
        assert_eq!(v["stderr"].as_f64(), Some(0.0));
    }
}
