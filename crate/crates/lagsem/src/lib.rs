//! Spectral toolkit for generalized Laguerre semigroups.
//!
//! The entry point is a spectrally negative Lévy process described by a
//! quadruplet (β, σ², Π, κ) through its Laplace exponent
//!
//! ```text
//! ψ(z) = βz + (σ²/2)·z² + ∫ (e^{−zy} − 1 + zy·1_{y<1}) Π(dy) − κ,
//! ```
//!
//! with Π supported on (0, ∞) (the process jumps downward only) and a root
//! θ = ψ⁻¹(0) in the unit interval. Tilting at θ and running the process
//! through the Lamperti time change produces a positive Markov process whose
//! semigroup intertwines with the classical Laguerre semigroup of index −θ.
//! Everything computable here flows from that picture:
//!
//! * [`model`] — quadruplets, ψ, the root θ, class membership flags;
//! * [`bernstein`] — the Bernstein functions φ, φ↑, φ₁ derived from ψ, and the
//!   log-domain solution W_φ of W(z+1) = φ(z)·W(z), W(1) = 1;
//! * [`distributions`] — moment tables, the Mellin transform of the invariant
//!   law, Mellin–Barnes inversion of its density, Gauss rules built from raw
//!   moments;
//! * [`spectral`] — eigen-polynomials, co-eigenfunction pairings, semigroup
//!   application in the eigenbasis, Bessel partial sums, convergence bounds;
//! * [`intertwining`] — the moment-multiplier operator Λ_φ and its identity
//!   checks against the classical semigroup;
//! * [`localtime`] — inverse-local-time Laplace exponents at the boundary
//!   point, Krein spectral atoms, excursion functionals;
//! * [`montecarlo`] — pathwise simulation (Lévy increments, Lamperti clock,
//!   Laguerre time change, classical SDE cross-check) with reproducible
//!   parallel replicas;
//! * [`acceptance`] — the end-to-end verification battery, also exposed by the
//!   command-line interface.
//!
//! Jump measures are restricted to finite mixtures of atoms and exponential
//! densities so every ψ-related quantity has a closed form; the interesting
//! numerics (W_φ, Mellin inversion, quadrature from moments) sit on top of
//! those closed forms.

pub mod acceptance;
pub mod bernstein;
mod dd;
pub mod distributions;
mod error;
pub mod intertwining;
pub mod localtime;
pub mod model;
pub mod montecarlo;
pub mod poly;
pub mod signed_log;
pub mod special;
pub mod spectral;

pub use error::{Error, Result};
pub use model::{JumpComponent, LevyQuadruplet, PsiModel};
pub use poly::{Poly, ThetaShiftedPoly};
pub use signed_log::SignedLog;
