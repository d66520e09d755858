//! Truncated q-series arithmetic, eta quotients, 5-dissections and
//! congruence checking for k-elongated plane partition counts
//! `d_k(n)`, whose generating function is `f_2^k / f_1^(3k+1)`.

pub mod catalog;
pub mod congruence;
pub mod error;
pub mod exec;
pub mod expr;
pub mod klaurent;
pub mod qfunctions;
pub mod series;

pub use error::{Error, Result};
pub use exec::Execution;
pub use klaurent::{LaurentPoly, PIndex, Symbol};
pub use qfunctions::{EtaQuotientSpec, Evaluator, SeriesExpr, VerificationVerdict};
pub use series::{CoeffRing, Series};
