#![allow(dead_code)]

use bifrac::bernstein::{BernsteinFn, MeasureAtom};
use bifrac::kernel::{BifParams, TimeGrid};
use bifrac::DiscreteDist;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Random law with 1..=max_atoms atoms, values uniform in [-range, range].
pub fn random_dist(rng: &mut ChaCha8Rng, max_atoms: usize, range: f64) -> DiscreteDist {
    let n = rng.random_range(1..=max_atoms);
    let raw: Vec<(f64, f64)> = (0..n)
        .map(|_| (rng.random_range(-range..=range), rng.random_range(0.01..1.0)))
        .collect();
    let total: f64 = raw.iter().map(|a| a.1).sum();
    DiscreteDist::merged(raw.into_iter().map(|(x, w)| (x, w / total))).unwrap()
}

/// Law with atoms mirrored about zero, equal masses on ±x, optionally an atom at 0.
/// Masses are multiples of 2^-10 so they sum to one without rounding.
pub fn random_symmetric_dist(rng: &mut ChaCha8Rng, max_pairs: usize, range: f64) -> DiscreteDist {
    let k = rng.random_range(1..=max_pairs);
    let mut units: Vec<u32> = (0..k).map(|_| rng.random_range(1..=50)).collect();
    let rest = 1024 - 2 * units.iter().sum::<u32>();
    let zero = if rng.random_bool(0.3) { rest } else { 0 };
    units[k - 1] += (rest - zero) / 2;
    let mut raw: Vec<(f64, f64)> = Vec::new();
    for u in units {
        let x = rng.random_range(0.01..=range);
        let p = f64::from(u) / 1024.0;
        raw.push((x, p));
        raw.push((-x, p));
    }
    if zero > 0 {
        raw.push((0.0, f64::from(zero) / 1024.0));
    }
    DiscreteDist::merged(raw).unwrap()
}

/// Random finite-atom Bernstein function: a, b in [0, 2], up to 5 atoms with
/// t in (0, 5], w in (0, 3].
pub fn random_bernstein(rng: &mut ChaCha8Rng) -> BernsteinFn {
    let a = rng.random_range(0.0..=2.0);
    let b = rng.random_range(0.0..=2.0);
    let k = rng.random_range(0..=5);
    let mu = (0..k)
        .map(|_| MeasureAtom { t: 5.0 - rng.random_range(0.0..5.0), w: 3.0 - rng.random_range(0.0..3.0) })
        .collect();
    BernsteinFn::new(a, b, mu).unwrap()
}

/// Random (H, K) in the existence domain by rejection.
pub fn random_params(rng: &mut ChaCha8Rng) -> BifParams {
    loop {
        let h = 1.0 - rng.random_range(0.0..1.0);
        let k = 2.0 - rng.random_range(0.0..2.0);
        if let Ok(p) = BifParams::new(h, k) {
            return p;
        }
    }
}

/// Random grid with 1..=max_points distinct points in (0, 100].
pub fn random_grid(rng: &mut ChaCha8Rng, max_points: usize) -> TimeGrid {
    let n = rng.random_range(1..=max_points);
    let mut pts: Vec<f64> = (0..n).map(|_| 100.0 - rng.random_range(0.0..100.0)).collect();
    pts.sort_by(f64::total_cmp);
    pts.dedup();
    TimeGrid::new(pts).unwrap()
}

pub const ALPHAS: [f64; 6] = [0.1, 0.5, 1.0, 1.3, 1.7, 2.0];
