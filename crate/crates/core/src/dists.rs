//! Finite discrete laws with exact expectations, and seedable samplers.

use rand::{Rng, RngCore};
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::numeric::{CompensatedSum, csum};

/// Allowed deviation of the total input mass from one.
pub const MASS_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Error)]
pub enum DistError {
    #[error("distribution has no atoms")]
    Empty,
    #[error("atom x={x} has nonpositive or non-finite probability {p}")]
    BadProbability { x: f64, p: f64 },
    #[error("atom value is not finite")]
    NonFiniteValue,
    #[error("duplicate atom at x={0}")]
    DuplicateAtom(f64),
    #[error("total mass {0} differs from 1 by more than 1e-12")]
    MassMismatch(f64),
    #[error("integrand is not finite at an atom")]
    NonFinite,
    #[error("malformed distribution JSON: {0}")]
    Json(#[from] serde_json::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Atom {
    pub x: f64,
    pub p: f64,
}

#[derive(Deserialize, Serialize)]
struct DistFile {
    atoms: Vec<Atom>,
}

/// Finite atomic probability law, atoms sorted ascending by value.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteDist {
    atoms: Vec<Atom>,
}

impl DiscreteDist {
    /// Validates atoms; rejects duplicate values.
    pub fn new(atoms: impl IntoIterator<Item = (f64, f64)>) -> Result<Self, DistError> {
        let mut atoms: Vec<Atom> = atoms.into_iter().map(|(x, p)| Atom { x, p }).collect();
        for a in &atoms {
            if !a.x.is_finite() {
                return Err(DistError::NonFiniteValue);
            }
            if !(a.p > 0.0 && a.p.is_finite()) {
                return Err(DistError::BadProbability { x: a.x, p: a.p });
            }
        }
        if atoms.is_empty() {
            return Err(DistError::Empty);
        }
        atoms.sort_by(|a, b| a.x.total_cmp(&b.x));
        if let Some(w) = atoms.windows(2).find(|w| w[0].x == w[1].x) {
            return Err(DistError::DuplicateAtom(w[0].x));
        }
        normalize(&mut atoms)?;
        Ok(Self { atoms })
    }

    /// Like [`DiscreteDist::new`] but merges atoms with equal values.
    pub fn merged(atoms: impl IntoIterator<Item = (f64, f64)>) -> Result<Self, DistError> {
        let mut raw: Vec<(f64, f64)> = atoms.into_iter().collect();
        raw.sort_by(|a, b| a.0.total_cmp(&b.0));
        let mut out: Vec<(f64, f64)> = Vec::with_capacity(raw.len());
        for (x, p) in raw {
            match out.last_mut() {
                // -0.0 and 0.0 compare equal and are merged as well
                Some(last) if last.0 == x => last.1 += p,
                _ => out.push((x, p)),
            }
        }
        Self::new(out)
    }

    /// Point mass at `c`.
    pub fn dirac(c: f64) -> Result<Self, DistError> {
        Self::new([(c, 1.0)])
    }

    /// Uniform law on the given distinct values.
    pub fn uniform(values: &[f64]) -> Result<Self, DistError> {
        let p = 1.0 / values.len() as f64;
        Self::new(values.iter().map(|&x| (x, p)))
    }

    pub fn from_json(text: &str) -> Result<Self, DistError> {
        let file: DistFile = serde_json::from_str(text)?;
        Self::new(file.atoms.into_iter().map(|a| (a.x, a.p)))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(&DistFile { atoms: self.atoms.clone() }).expect("atoms serialize")
    }

    pub fn atoms(&self) -> &[Atom] {
        &self.atoms
    }

    pub fn len(&self) -> usize {
        self.atoms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    pub fn min_value(&self) -> f64 {
        self.atoms[0].x
    }

    pub fn max_value(&self) -> f64 {
        self.atoms[self.atoms.len() - 1].x
    }

    pub fn max_abs(&self) -> f64 {
        self.min_value().abs().max(self.max_value().abs())
    }

    /// Law of `c·X`.
    pub fn scaled(&self, c: f64) -> Result<Self, DistError> {
        Self::merged(self.atoms.iter().map(|a| (c * a.x, a.p)))
    }

    /// Law of `-X`.
    pub fn reflected(&self) -> Self {
        self.scaled(-1.0).expect("reflection keeps atoms valid")
    }

    /// Whether atoms are mirrored about zero with equal masses.
    pub fn is_symmetric(&self) -> bool {
        let n = self.atoms.len();
        (0..n).all(|i| {
            let (a, b) = (self.atoms[i], self.atoms[n - 1 - i]);
            a.x == -b.x && a.p == b.p
        })
    }
}

/// Sum of probabilities within tolerance of one, then scaled to sum to one.
fn normalize(atoms: &mut [Atom]) -> Result<(), DistError> {
    let total = csum(atoms.iter().map(|a| a.p));
    if (total - 1.0).abs() > MASS_TOLERANCE {
        return Err(DistError::MassMismatch(total));
    }
    if total == 1.0 {
        return Ok(());
    }
    for a in atoms.iter_mut() {
        a.p /= total;
    }
    // Absorb the residual rounding into the heaviest atom so that a second
    // construction sees a total of exactly one and leaves the law unchanged.
    let heaviest = (0..atoms.len())
        .max_by(|&i, &j| atoms[i].p.total_cmp(&atoms[j].p))
        .expect("nonempty");
    for _ in 0..4 {
        let total = csum(atoms.iter().map(|a| a.p));
        if total == 1.0 {
            break;
        }
        atoms[heaviest].p += 1.0 - total;
    }
    Ok(())
}

/// `Σ p_i f(x_i)` in ascending-`x` order with compensated summation.
pub fn expect(d: &DiscreteDist, f: impl Fn(f64) -> f64) -> Result<f64, DistError> {
    let mut acc = CompensatedSum::new();
    for a in &d.atoms {
        let v = f(a.x);
        if !v.is_finite() {
            return Err(DistError::NonFinite);
        }
        acc.add(a.p * v);
    }
    Ok(acc.value())
}

/// `Σ_i Σ_j p_i p_j g(x_i, x_j)` over two independent copies.
pub fn expect_pair(d: &DiscreteDist, g: impl Fn(f64, f64) -> f64) -> Result<f64, DistError> {
    let mut acc = CompensatedSum::new();
    for a in &d.atoms {
        for b in &d.atoms {
            let v = g(a.x, b.x);
            if !v.is_finite() {
                return Err(DistError::NonFinite);
            }
            acc.add(a.p * b.p * v);
        }
    }
    Ok(acc.value())
}

/// `P(X > r) - P(X < -r)`.
pub fn tail_functional(d: &DiscreteDist, r: f64) -> f64 {
    let mut acc = CompensatedSum::new();
    for a in &d.atoms {
        if a.x > r {
            acc.add(a.p);
        } else if a.x < -r {
            acc.add(-a.p);
        }
    }
    acc.value()
}

/// A law that can be sampled from an explicit random stream.
pub trait Sampler: Sync {
    fn draw(&self, rng: &mut dyn RngCore) -> f64;

    /// Largest `alpha` (possibly infinite) for which `E|X|^alpha` is known to
    /// be finite, if any.
    fn moment_hint(&self) -> Option<f64>;
}

/// `X ≡ c`.
#[derive(Debug, Clone, Copy)]
pub struct DegenerateSampler(pub f64);

impl Sampler for DegenerateSampler {
    fn draw(&self, _rng: &mut dyn RngCore) -> f64 {
        self.0
    }

    fn moment_hint(&self) -> Option<f64> {
        Some(f64::INFINITY)
    }
}

/// `N(mean, sd²)`.
#[derive(Debug, Clone, Copy)]
pub struct NormalSampler {
    pub mean: f64,
    pub sd: f64,
}

impl NormalSampler {
    pub fn standard() -> Self {
        Self { mean: 0.0, sd: 1.0 }
    }
}

impl Sampler for NormalSampler {
    fn draw(&self, rng: &mut dyn RngCore) -> f64 {
        let z: f64 = StandardNormal.sample(rng);
        self.mean + self.sd * z
    }

    fn moment_hint(&self) -> Option<f64> {
        Some(f64::INFINITY)
    }
}

/// Uniform on `[lo, hi)`.
#[derive(Debug, Clone, Copy)]
pub struct UniformSampler {
    pub lo: f64,
    pub hi: f64,
}

impl Sampler for UniformSampler {
    fn draw(&self, rng: &mut dyn RngCore) -> f64 {
        self.lo + (self.hi - self.lo) * rng.random::<f64>()
    }

    fn moment_hint(&self) -> Option<f64> {
        Some(f64::INFINITY)
    }
}

/// Inverse-CDF sampler for a [`DiscreteDist`].
#[derive(Debug, Clone)]
pub struct DiscreteSampler {
    values: Vec<f64>,
    cdf: Vec<f64>,
}

impl DiscreteSampler {
    pub fn new(d: &DiscreteDist) -> Self {
        let mut acc = CompensatedSum::new();
        let cdf = d
            .atoms
            .iter()
            .map(|a| {
                acc.add(a.p);
                acc.value()
            })
            .collect();
        Self { values: d.atoms.iter().map(|a| a.x).collect(), cdf }
    }
}

impl Sampler for DiscreteSampler {
    fn draw(&self, rng: &mut dyn RngCore) -> f64 {
        let u: f64 = rng.random();
        let i = self.cdf.partition_point(|&c| c <= u);
        self.values[i.min(self.values.len() - 1)]
    }

    fn moment_hint(&self) -> Option<f64> {
        Some(f64::INFINITY)
    }
}
