//! Covariant Hamiltonian dynamics built on the generalized structural
//! Poisson bracket, together with the Riemannian geodesic machinery it
//! parallels, and a verification suite for every identity connecting the two.
//!
//! The crate is organized around five pieces:
//!
//! - [`manifold`]: metrics, Christoffel symbols, geospin matrices, covariant
//!   derivatives;
//! - [`bracket`]: GPB/GSPB, the structural operator Ŝ, the geometrio triple
//!   (b, A, w), and the commutation relation;
//! - [`dynamics`]: TGHS/S-dynamics/GCHS rates, force fields, covariant
//!   acceleration, RK4 trajectories;
//! - [`geodesic`]: geodesic integration in geospin form, covariant rates of
//!   velocity fields, paired decay systems;
//! - [`report`]: the identity suite producing machine- and human-readable
//!   pass/fail reports.
//!
//! Definition files for custom metrics and systems use the expression
//! grammar in [`expr`]; ready-made manifolds and systems live in
//! [`presets`].

// Index loops mirror the tensor contractions they implement, and the
// negated comparisons deliberately reject NaN.
#![allow(clippy::needless_range_loop)]
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bracket;
pub mod dynamics;
pub mod error;
pub mod expr;
pub mod fields;
pub mod geodesic;
pub mod linalg;
pub mod manifold;
pub mod ode;
pub mod presets;
pub mod report;

pub use error::{Error, Result};


// The guide's code blocks run as doctests, keeping book and library in sync.
#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/manifolds.md")]
    mod manifolds {}
    #[doc = include_str!("../../../book/src/brackets.md")]
    mod brackets {}
    #[doc = include_str!("../../../book/src/dynamics.md")]
    mod dynamics {}
    #[doc = include_str!("../../../book/src/geodesics.md")]
    mod geodesics {}
    #[doc = include_str!("../../../book/src/identity-suite.md")]
    mod identity_suite {}
    #[doc = include_str!("../../../book/src/file-formats.md")]
    mod file_formats {}
    #[doc = include_str!("../../../book/src/cli.md")]
    mod cli {}
}
