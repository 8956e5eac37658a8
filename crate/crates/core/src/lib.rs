//! Lie-Taylor calculus on matrix Lie groups.
//!
//! Fields on a group are expanded in iterated left-invariant derivatives
//! ([`derive`], [`taylor`]), bounded by majorants and Cauchy estimates
//! ([`taylor`], [`cauchy`]) and continued from a real group into its
//! complexification ([`extend`]). On the circle the same questions reduce
//! to Laurent series ([`laurent`]).
//!
//! ```
//! use lie_taylor::derive::{taylor_data, DerivMethod};
//! use lie_taylor::fields::catalog;
//! use lie_taylor::group::registry_get;
//!
//! let g = registry_get("SL2R")?;
//! let trace = catalog("trace", &g)?;
//! let t = taylor_data(&trace, &g.identity(), 2, &DerivMethod::Exact)?;
//! assert_eq!(t.coeffs[2].len(), 9);
//! # Ok::<(), lie_taylor::error::Error>(())
//! ```
//!
//! Checks return [`report::Report`] values. [`suite`] runs the acceptance
//! battery.

pub mod cauchy;
pub mod derive;
pub mod error;
pub mod extend;
pub mod fields;
pub mod group;
pub mod laurent;
pub mod linalg;
pub mod report;
pub mod riemann;
pub mod sample;
pub mod suite;
pub mod taylor;

// The book's snippets run as doctests, one module per chapter.
#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/groups.md")]
    mod groups {}
    #[doc = include_str!("../../../book/src/taylor-data.md")]
    mod taylor_data {}
    #[doc = include_str!("../../../book/src/majorants.md")]
    mod majorants {}
    #[doc = include_str!("../../../book/src/cauchy.md")]
    mod cauchy {}
    #[doc = include_str!("../../../book/src/continuation.md")]
    mod continuation {}
    #[doc = include_str!("../../../book/src/circle.md")]
    mod circle {}
    #[doc = include_str!("../../../book/src/checks.md")]
    mod checks {}
    #[doc = include_str!("../../../book/src/cli.md")]
    mod cli {}
}
