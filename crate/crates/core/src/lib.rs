//! Bifractional Brownian motion covariance kernel, Gaussian path sampling,
//! and exact and Monte Carlo checks of the moment inequality
//! `E|X−Y|^α ≤ E|X+Y|^α` for i.i.d. `X, Y`, its Bernstein-function form, and
//! the two-point counterexamples for α > 2.

pub mod bernstein;
pub mod cli;
pub mod counterexample;
pub mod dists;
pub mod gpsim;
pub mod inequality;
pub mod json;
pub mod kernel;
pub mod numeric;
pub mod rng;

pub use bernstein::{BernsteinFn, MeasureAtom};
pub use counterexample::CounterFamily;
pub use dists::{DiscreteDist, Sampler};
pub use gpsim::{CovMatrix, PathBatch, PsdVerdict};
pub use inequality::{GapReport, Route};
pub use kernel::{BifParams, TimeGrid};
