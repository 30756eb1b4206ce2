//! Non-inferiority diagnostics for difference-in-differences model assumptions.
//!
//! The crate fits DID regressions with flexible treated-versus-control trend
//! differences ([`panelspec`], [`linmod`]), compares average treatment effects
//! across nested specifications and casts the comparison as a
//! non-inferiority or equivalence test ([`nicompare`]), computes power and
//! minimum detectable effects for those tests ([`power`]), and runs Monte Carlo
//! studies of the whole procedure ([`simlab`]).

pub mod dist;
pub mod error;
pub mod linmod;
pub mod nicompare;
pub mod panelspec;
pub mod power;
pub mod seeding;
pub mod simlab;

pub use error::{Error, Result};
pub use nicompare::Sided;
