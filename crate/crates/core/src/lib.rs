//! Operator colligations and the polymorphisms they induce on Gaussian
//! product measures.
//!
//! A colligation is an invertible block matrix considered up to orthogonal
//! changes of its auxiliary coordinates. Each one acts on functions of
//! `x ∈ ℝⁿ` through a kernel `K_λ(x, u)` that is the Mellin transform of a
//! measure on `t > 0`. This crate computes those kernels in closed form,
//! builds the measures explicitly, and checks every identity between them
//! against brute-force quadrature.
//!
//! Modules, bottom to top:
//!
//! * [`numerics`]: dense linear algebra, Haar sampling, Gauss–Hermite rules, seeded streams.
//! * [`colligation`]: block product, double-coset action, canonical form, Potapov coordinates.
//! * [`gaussian`]: the standard Gaussian measure and its linear symmetries.
//! * [`rx`]: measures on the multiplicative half-line and their Mellin transforms.
//! * [`polymorphism`]: kernels, the quadrature oracle, operators and fiber measures.
//! * [`verify`]: the suites behind the `collig` binary.

// `!(x <= tol)` rejects NaN as well
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod colligation;
pub mod error;
pub mod gaussian;
pub mod numerics;
pub mod polymorphism;
pub mod rx;
pub mod verify;

pub use error::{Error, Result};

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/colligations.md")]
    mod colligations {}
    #[doc = include_str!("../../../book/src/gaussian.md")]
    mod gaussian {}
    #[doc = include_str!("../../../book/src/measures.md")]
    mod measures {}
    #[doc = include_str!("../../../book/src/kernels.md")]
    mod kernels {}
    #[doc = include_str!("../../../book/src/fibers.md")]
    mod fibers {}
    #[doc = include_str!("../../../book/src/verification.md")]
    mod verification {}
}
