//! Monte Carlo laboratory for the real roots of random trigonometric
//! polynomials
//!
//! ```text
//!     P_n(x) = n^{-1/2} Σ_{k=1..n} a_k cos(kx) + b_k sin(kx)
//! ```
//!
//! with i.i.d. standardized coefficients. The crate samples such polynomials
//! reproducibly, counts their roots with certified interval arithmetic, runs
//! Monte Carlo sweeps of the root count and its statistics, and provides
//! executable checks of the deterministic inequalities (Bernstein, large
//! sieve, interpolation, root separation) and of the small-ball behaviour of
//! `(P_n(t), P_n'(t)/n)`.

pub mod certify;
pub mod ensembles;
pub mod error;
pub mod geometry;
pub mod inequalities;
pub mod repulsion;
pub mod rootcount;
pub mod stats;
pub mod suites;
pub mod trigpoly;

pub use ensembles::{sample_poly, EnsembleSpec, Law, SeedSpec};
pub use error::{Error, Result};
pub use rootcount::{count_certified, count_fast, CertifiedCount, Domain};
pub use trigpoly::TrigPoly;

/// Version string recorded in every output header.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
