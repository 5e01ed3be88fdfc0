//! Causal variational principle in the homogeneous setting, at desk scale.
//!
//! The library works with finitely-supported operator-valued measures on a
//! compact momentum box `K̂ ⊂ ℝ⁴`, taking values in the linear operators on an
//! indefinite inner product space `(ℂ^{2n}, ≺·|·≻)`. On top of that sit the
//! fermionic projector `P(ξ) = Σ e^{i⟨k,ξ⟩} M`, the closed chain
//! `A(ξ) = P(ξ)P(−ξ)`, the spectral-weight Lagrangian
//! `L = |A²| − |A|²/2n`, the box-truncated causal action, constrained
//! minimization over negative definite measures, and a randomized
//! verification suite for the quantitative bounds the construction obeys.
//!
//! Modules:
//! - [`krein`]: linear algebra of `(V, ≺·|·≻)` — adjoints, s-unitaries,
//!   positivity, spectral weight, approximate s-unitary diagonalization.
//! - [`measure`]: atomic operator-valued and negative definite measures —
//!   variation norms, integration, conjugation, weak distance, subsequence
//!   extraction.
//! - [`dirac`]: the discretized Dirac-sea reference measure on the lower
//!   mass shell.
//! - [`action`]: Lagrangian, causal action and functional `T` on a truncated
//!   spacetime box, constraint bookkeeping.
//! - [`optimize`]: penalty/projection minimization over the cone of negative
//!   definite measures with fixed atom locations.
//! - [`harness`]: seeded empirical checks for the quantitative lemmas, with
//!   machine-readable reports.

pub mod action;
pub mod dirac;
pub mod error;
pub mod harness;
pub mod krein;
pub mod measure;
pub mod optimize;

pub use error::{Error, Result};
