//! Covariance kernel of bifractional Brownian motion.
//!
//! For parameters `(H, K)` the process `B^{H,K}` is the centered Gaussian
//! process with
//!
//! ```text
//! R(t, s) = 2^{-K} ((t^{2H} + s^{2H})^K - |t - s|^{2HK}),   t, s >= 0.
//! ```
//!
//! The kernel is known to be positive semi-definite on the domain
//! `0 < H <= 1`, `0 < K <= 2`, `HK <= 1`. `K = 1` is fractional Brownian
//! motion with Hurst index `H`.

use std::fmt;

use thiserror::Error;

use crate::numeric::{pow0, sgn};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DomainConstraint {
    HPositive,
    HAtMostOne,
    KPositive,
    KAtMostTwo,
    ProductAtMostOne,
}

impl fmt::Display for DomainConstraint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Self::HPositive => "H>0",
            Self::HAtMostOne => "H≤1",
            Self::KPositive => "K>0",
            Self::KAtMostTwo => "K≤2",
            Self::ProductAtMostOne => "HK≤1",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum KernelError {
    #[error("parameters out of domain: {constraint} violated")]
    OutOfDomain { constraint: DomainConstraint },
    #[error("non-finite input")]
    NonFinite,
    #[error("negative time {0}")]
    NegativeTime(f64),
    #[error("time grid points must be strictly increasing")]
    UnsortedGrid,
    #[error("time grid is empty")]
    EmptyGrid,
    #[error("malformed grid spec `{0}` (expected start:step:count)")]
    BadGridSpec(String),
    #[error("alpha must lie in (0, 2], got {0}")]
    AlphaOutOfRange(f64),
}

/// The `(H, K)` pair indexing a bifractional Brownian motion.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BifParams {
    h: f64,
    k: f64,
}

impl BifParams {
    /// Validates `(h, k)` against the existence domain.
    pub fn new(h: f64, k: f64) -> Result<Self, KernelError> {
        if !h.is_finite() || !k.is_finite() {
            return Err(KernelError::NonFinite);
        }
        let violated = if h <= 0.0 {
            Some(DomainConstraint::HPositive)
        } else if h > 1.0 {
            Some(DomainConstraint::HAtMostOne)
        } else if k <= 0.0 {
            Some(DomainConstraint::KPositive)
        } else if k > 2.0 {
            Some(DomainConstraint::KAtMostTwo)
        } else if h * k > 1.0 {
            Some(DomainConstraint::ProductAtMostOne)
        } else {
            None
        };
        match violated {
            Some(constraint) => Err(KernelError::OutOfDomain { constraint }),
            None => Ok(Self { h, k }),
        }
    }

    /// Builds parameters that skip the domain check, only requiring `h, k > 0`.
    ///
    /// Used to evaluate the kernel formula outside the domain, e.g. to exhibit
    /// non-PSD covariance matrices. Such parameters never index a process.
    pub fn new_unchecked(h: f64, k: f64) -> Result<Self, KernelError> {
        if !h.is_finite() || !k.is_finite() {
            return Err(KernelError::NonFinite);
        }
        if h <= 0.0 {
            return Err(KernelError::OutOfDomain { constraint: DomainConstraint::HPositive });
        }
        if k <= 0.0 {
            return Err(KernelError::OutOfDomain { constraint: DomainConstraint::KPositive });
        }
        Ok(Self { h, k })
    }

    /// Brownian-type parameters `(1/2, alpha)` used by the moment-gap kernel route.
    pub fn half(alpha: f64) -> Result<Self, KernelError> {
        if !(alpha > 0.0 && alpha <= 2.0) {
            return Err(KernelError::AlphaOutOfRange(alpha));
        }
        Self::new(0.5, alpha)
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    pub fn k(&self) -> f64 {
        self.k
    }

    /// Whether the pair lies in the existence domain.
    pub fn in_domain(&self) -> bool {
        Self::new(self.h, self.k).is_ok()
    }
}

/// Evaluates `R^{H,K}(t, s)`.
pub fn cov(p: &BifParams, t: f64, s: f64) -> Result<f64, KernelError> {
    if !t.is_finite() || !s.is_finite() {
        return Err(KernelError::NonFinite);
    }
    if t < 0.0 {
        return Err(KernelError::NegativeTime(t));
    }
    if s < 0.0 {
        return Err(KernelError::NegativeTime(s));
    }
    Ok(cov_ordered(p, t.max(s), t.min(s)))
}

/// Kernel body for `hi >= lo >= 0`.
fn cov_ordered(p: &BifParams, hi: f64, lo: f64) -> f64 {
    if lo == 0.0 {
        return 0.0;
    }
    let two_h = 2.0 * p.h;
    let base = 0.5 * (hi.powf(two_h) + lo.powf(two_h));
    let incr = pow0(hi - lo, two_h * p.k);
    base.powf(p.k) - incr * 2f64.powf(-p.k)
}

/// `|u + v|^alpha - |u - v|^alpha`.
pub fn signed_identity_lhs(u: f64, v: f64, alpha: f64) -> Result<f64, KernelError> {
    if !u.is_finite() || !v.is_finite() || !alpha.is_finite() {
        return Err(KernelError::NonFinite);
    }
    if !(alpha > 0.0 && alpha <= 2.0) {
        return Err(KernelError::AlphaOutOfRange(alpha));
    }
    Ok(pow0((u + v).abs(), alpha) - pow0((u - v).abs(), alpha))
}

/// `2^alpha R^{1/2,alpha}(|u|, |v|) sgn(u) sgn(v)`, the kernel side of the
/// sign identity.
pub fn signed_identity_rhs(u: f64, v: f64, alpha: f64) -> Result<f64, KernelError> {
    if !u.is_finite() || !v.is_finite() || !alpha.is_finite() {
        return Err(KernelError::NonFinite);
    }
    let p = BifParams::half(alpha)?;
    Ok(2f64.powf(alpha) * cov(&p, u.abs(), v.abs())? * sgn(u) * sgn(v))
}

/// Strictly ascending list of nonnegative time points.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeGrid {
    points: Vec<f64>,
}

impl TimeGrid {
    pub fn new(points: Vec<f64>) -> Result<Self, KernelError> {
        if points.is_empty() {
            return Err(KernelError::EmptyGrid);
        }
        for &t in &points {
            if !t.is_finite() {
                return Err(KernelError::NonFinite);
            }
            if t < 0.0 {
                return Err(KernelError::NegativeTime(t));
            }
        }
        if points.windows(2).any(|w| w[0] >= w[1]) {
            return Err(KernelError::UnsortedGrid);
        }
        Ok(Self { points })
    }

    /// Points `start + i * step` for `i = 0..=count`.
    pub fn arithmetic(start: f64, step: f64, count: usize) -> Result<Self, KernelError> {
        Self::new((0..=count).map(|i| start + i as f64 * step).collect())
    }

    /// Parses `start:step:count` into [`TimeGrid::arithmetic`].
    pub fn parse_spec(spec: &str) -> Result<Self, KernelError> {
        let bad = || KernelError::BadGridSpec(spec.to_string());
        let parts: Vec<&str> = spec.split(':').collect();
        let [start, step, count] = parts.as_slice() else {
            return Err(bad());
        };
        let start: f64 = start.trim().parse().map_err(|_| bad())?;
        let step: f64 = step.trim().parse().map_err(|_| bad())?;
        let count: usize = count.trim().parse().map_err(|_| bad())?;
        if count > 0 && !(step > 0.0) {
            return Err(bad());
        }
        Self::arithmetic(start, step, count)
    }

    pub fn points(&self) -> &[f64] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}
