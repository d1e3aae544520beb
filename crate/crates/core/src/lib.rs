//! Finite element library for elliptic obstacle problems.
//!
//! Three problem families share the machinery here:
//!
//! * the classical obstacle problem (`-Laplace u >= f`, `u >= psi`, with
//!   complementarity) on intervals and rectangles, including extraction of
//!   the discrete free boundary and its error metrics;
//! * the boundary (Signorini) obstacle problem for `-Laplace + I` with
//!   unilateral constraints on the boundary;
//! * the spectral-fractional obstacle problem, localized through the
//!   degenerate-elliptic cylinder extension with weight `y^alpha` on
//!   anisotropically graded tensor-product meshes.
//!
//! Discrete variational inequalities are solved by projected SOR and by a
//! primal-dual active-set method, cross-checked against each other and
//! against an exhaustive active-set oracle. The [`study`] module drives
//! convergence-rate studies and the [`acceptance`] module bundles the
//! pass/fail checks the test suite and the CLI `--check` mode share.

pub mod acceptance;
pub mod assembly;
pub mod classical;
pub mod error;
pub mod fmt;
pub mod fractional;
pub mod mesh;
pub mod oracle;
pub mod sparse;
pub mod study;
pub mod thin;
pub mod util;
pub mod vi;

pub use error::{Error, Result};
