//! Exact coefficient arithmetic in `Q(h)`, the field of rational functions of
//! the lattice spacing, plus the sign parameters of the models.

mod hpoly;
mod parse;
mod ratfunc;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use hpoly::HPoly;
pub use parse::parse_ratfunc;
pub use ratfunc::RatFunc;

/// Arbitrary-precision rational number, always in lowest terms with a
/// positive denominator.
pub type Rational = num_rational::BigRational;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum CoeffError {
    #[error("zero denominator")]
    ZeroDenominator,
    #[error("division by zero")]
    DivisionByZero,
    #[error("pole at evaluation point")]
    PoleAtPoint,
    #[error("parse error: {0}")]
    Parse(String),
}

pub fn normalize(num: HPoly, den: HPoly) -> Result<RatFunc, CoeffError> {
    RatFunc::normalize(num, den)
}

pub fn eval_at(f: &RatFunc, h0: &Rational) -> Result<Rational, CoeffError> {
    f.eval_at(h0)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Sign {
    Plus,
    Minus,
}

impl Sign {
    pub fn value(self) -> i64 {
        match self {
            Sign::Plus => 1,
            Sign::Minus => -1,
        }
    }

    pub fn as_ratfunc(self) -> RatFunc {
        RatFunc::from_int(self.value())
    }
}

impl fmt::Display for Sign {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Sign::Plus => "+1",
            Sign::Minus => "-1",
        })
    }
}

impl FromStr for Sign {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "+1" | "1" | "+" => Ok(Sign::Plus),
            "-1" | "-" => Ok(Sign::Minus),
            other => Err(format!("expected +1 or -1, got {other:?}")),
        }
    }
}

/// Model sign parameters: the nonlinearity sign `sigma` and the branch of
/// the group velocity `c`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SignParams {
    pub sigma: Sign,
    pub c_sign: Sign,
}

impl Default for SignParams {
    fn default() -> Self {
        SignParams {
            sigma: Sign::Plus,
            c_sign: Sign::Plus,
        }
    }
}

impl SignParams {
    pub fn with_c(c_sign: Sign) -> Self {
        SignParams {
            c_sign,
            ..Self::default()
        }
    }

    pub fn sigma(&self) -> RatFunc {
        self.sigma.as_ratfunc()
    }

    pub fn c(&self) -> RatFunc {
        self.c_sign.as_ratfunc()
    }
}
