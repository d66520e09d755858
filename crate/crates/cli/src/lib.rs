//! Command-line front end for `qdissect`.

pub mod commands;
pub mod output;
