//! kacrice — a numerical laboratory for the real zero sets of
//! Kostlan–Shub–Smale (KSS) random polynomial systems.
//!
//! A KSS polynomial of degree `d` in `n + 1` variables is
//!
//! ```text
//!     P(X) = Σ_{|α| = d} a_α sqrt(binom(d, α)) X^α,      a_α ~ N(0, 1) iid,
//! ```
//!
//! whose covariance kernel is `E[P(x) P(y)] = <x, y>^d`. A system of `r`
//! independent copies has, on the unit sphere `S^n`, a random zero set of
//! codimension `r` whose volume statistics admit closed-form limit laws as
//! `d → ∞`. This crate implements both sides of that story and checks them
//! against each other:
//!
//! * [`limit_law`] — the scaling-limit covariance structure of the rescaled
//!   zero-set point process: the two-point Jacobian pair of Gaussian
//!   matrices, its product moments, the integrand `D_{n,r}(t)`, and the
//!   variance constant `I_{n,r}` obtained by quadrature over Monte Carlo
//!   estimates.
//! * [`kostlan`] — exact finite-degree machinery: monomial bases, weighted
//!   coefficient sampling, polynomial and gradient evaluation on the sphere,
//!   and restriction of a system to a great circle as a trigonometric
//!   polynomial.
//! * [`zero_stats`] — zero-set statistics of sampled systems: root counting
//!   on great circles, Crofton-type estimators of zero-set volume, marching
//!   refinement of zero curves on `S^2`, and empty-cap (hole) detection.
//! * [`harness`] — experiment drivers tying the two routes together:
//!   theoretical means and variances of linear statistics, Monte Carlo
//!   moment reports, hole-probability scans, and convergence sequences in
//!   the degree.
//! * [`io`] / [`cli`] — deterministic file output (CSV/JSON with manifests)
//!   and the command-line interface.
//!
//! Shared infrastructure lives in [`special`] (gamma-family functions and
//! sphere volumes), [`quadrature`] (Gauss–Legendre and Gauss–Hermite rules),
//! [`sym_eigen`] (a Jacobi eigensolver for small symmetric matrices),
//! [`rng`] (splittable counter-keyed random streams), and [`stats`]
//! (running-moment accumulators and interval estimates).
//!
//! Determinism is a design invariant: every sampling routine takes an
//! explicit seed and derives per-task streams from `(seed, structural
//! path)`, so results are bit-identical across runs and across worker
//! counts.

pub mod cli;
pub mod error;
pub mod harness;
pub mod io;
pub mod kostlan;
pub mod limit_law;
pub mod quadrature;
pub mod rng;
pub mod special;
pub mod stats;
pub mod sym_eigen;
pub mod zero_stats;

pub use error::{Error, Result};
