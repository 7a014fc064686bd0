//! Numerical machinery for semilinear operator equations
//!
//! ```text
//!     L u + N(u) = h
//! ```
//!
//! where `L` is a symmetric operator whose spectrum has a gap `(-δ, 0)` just
//! below zero and `N` is a nonlinear map. Everything here works on dense
//! finite-dimensional proxies: `L` is a symmetric matrix, `N` is any map
//! `ℝⁿ → ℝⁿ` implementing [`monotone::NonlinearMap`].
//!
//! The crate is `no_std` (it needs `alloc`). File formats, the CLI and
//! anything else touching the operating system live in the `semilinear`
//! companion crate.
//!
//! Module map:
//!
//! - [`spectral`]: eigendecomposition, spectral family `E_μ`, functional
//!   calculus and the splitting `H = H₁ ⊕ H₂` with its bounds.
//! - [`monotone`]: the [`monotone::NonlinearMap`] trait, sampled
//!   monotonicity / cocoercivity checks and nonlinear resolvents.
//! - [`nonlinearities`]: the radial projection map and the Nemytskii
//!   (superposition) map.
//! - [`degree`]: Brouwer degree on balls, Galerkin degree ladders and
//!   homotopy checks.
//! - [`conditions`]: recession-functional estimates and solvability checks.
//! - [`solver`]: the perturbed equation `εP₂u + Lu + N(u) = h`, the
//!   `ε → 0` continuation and the top-level [`solver::solve`].
//! - [`problems`]: synthetic test operators (random spectra, 1-D
//!   Schrödinger operators).
#![no_std]
#![allow(clippy::neg_cmp_op_on_partial_ord)]

extern crate alloc;
#[cfg(test)]
extern crate std;

mod prelude {
    pub(crate) use alloc::boxed::Box;
    pub(crate) use alloc::format;
    pub(crate) use alloc::string::String;
    pub(crate) use alloc::vec;
    pub(crate) use alloc::vec::Vec;
    // Only needed when `std` is absent from the crate graph; otherwise the
    // inherent float methods win and the import goes unused.
    #[allow(unused_imports)]
    pub(crate) use num_traits::Float;
}

pub mod conditions;
pub mod degree;
pub mod linalg;
pub mod monotone;
pub mod newton;
pub mod nonlinearities;
pub mod problems;
pub mod sampling;
pub mod solver;
pub mod spectral;

pub use nalgebra::{DMatrix, DVector};
