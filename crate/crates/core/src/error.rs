use thiserror::Error;

use crate::series::CoeffRing;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum Error {
    #[error("coefficient rings differ: {0} vs {1}")]
    RingMismatch(CoeffRing, CoeffRing),

    #[error("leading coefficient {coeff} is not a unit in {ring}")]
    NonUnitLeading { coeff: String, ring: CoeffRing },

    #[error("cannot reduce a series over {ring} modulo {modulus}")]
    IncompatibleModulus { ring: CoeffRing, modulus: u64 },

    #[error("modulus must be at least 2, got {0}")]
    InvalidModulus(u64),

    #[error("requested precision q^{requested} exceeds the available precision q^{available}")]
    InsufficientPrecision { requested: i64, available: i64 },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("parse error at offset {pos}: {msg}")]
    Parse { pos: usize, msg: String },

    #[error("catalog error: {0}")]
    Catalog(String),

    #[error("unknown {kind} `{name}`")]
    Unknown { kind: &'static str, name: String },
}

pub type Result<T> = std::result::Result<T, Error>;
