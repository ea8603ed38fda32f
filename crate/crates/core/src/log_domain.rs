//! Signed log-domain scalars.
//!
//! Weight products along an orbit reach magnitudes like `2^(10^4)` long
//! before any horizon of interest, so products are carried as
//! `sign * exp(log_abs)` and only exponentiated at the last moment, with
//! overflow reported instead of saturated.

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Sign of a nonzero real scalar.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Sign {
    #[serde(rename = "+")]
    Plus,
    #[serde(rename = "-")]
    Minus,
}

impl Sign {
    pub fn of(x: f64) -> Sign {
        if x < 0.0 {
            Sign::Minus
        } else {
            Sign::Plus
        }
    }

    pub fn as_f64(self) -> f64 {
        match self {
            Sign::Plus => 1.0,
            Sign::Minus => -1.0,
        }
    }
}

impl std::ops::Mul for Sign {
    type Output = Sign;
    fn mul(self, rhs: Sign) -> Sign {
        if self == rhs {
            Sign::Plus
        } else {
            Sign::Minus
        }
    }
}

/// Exponentiating a log-domain value would exceed the `f64` range.
#[derive(Clone, Copy, Debug, Error, PartialEq)]
#[error("magnitude exp({log_abs}) overflows f64")]
pub struct Overflow {
    pub log_abs: f64,
}

/// A nonzero real carried as `sign * exp(log_abs)`.
///
/// The neutral element is `one()`; products and quotients add and subtract
/// `log_abs` fields exactly as built, so log-additivity over concatenated
/// ranges holds to rounding error.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LogProduct {
    pub log_abs: f64,
    pub sign: Sign,
}

impl LogProduct {
    pub fn one() -> LogProduct {
        LogProduct { log_abs: 0.0, sign: Sign::Plus }
    }

    /// Log-domain image of a nonzero finite scalar.
    ///
    /// Returns `None` for zero, NaN or infinite input: those are not
    /// admissible weights and have no log-domain representation.
    pub fn from_f64(x: f64) -> Option<LogProduct> {
        if x == 0.0 || !x.is_finite() {
            return None;
        }
        Some(LogProduct { log_abs: x.abs().ln(), sign: Sign::of(x) })
    }

    pub fn mul(self, rhs: LogProduct) -> LogProduct {
        LogProduct { log_abs: self.log_abs + rhs.log_abs, sign: self.sign * rhs.sign }
    }

    pub fn div(self, rhs: LogProduct) -> LogProduct {
        LogProduct { log_abs: self.log_abs - rhs.log_abs, sign: self.sign * rhs.sign }
    }

    pub fn recip(self) -> LogProduct {
        LogProduct { log_abs: -self.log_abs, sign: self.sign }
    }

    /// `|self|^e` as a log-domain magnitude (sign dropped).
    pub fn abs_pow(self, e: f64) -> f64 {
        self.log_abs * e
    }

    /// Signed sum `self + rhs` without leaving log domain.
    ///
    /// `log_abs = -inf` stands for zero here, both as operand and as the
    /// result of exact cancellation.
    pub fn signed_add(self, rhs: LogProduct) -> LogProduct {
        if self.log_abs == f64::NEG_INFINITY {
            return rhs;
        }
        if rhs.log_abs == f64::NEG_INFINITY {
            return self;
        }
        let (hi, lo) = if self.log_abs >= rhs.log_abs { (self, rhs) } else { (rhs, self) };
        let d = (lo.log_abs - hi.log_abs).exp();
        let shift = if hi.sign == lo.sign { d.ln_1p() } else { (-d).ln_1p() };
        LogProduct { log_abs: hi.log_abs + shift, sign: hi.sign }
    }

    pub fn is_negative(self) -> bool {
        self.sign == Sign::Minus
    }

    /// Exponentiate. Overflow is an error; underflow flushes to `0.0`,
    /// which is the correct rounding of a vanishing magnitude.
    pub fn to_f64(self) -> Result<f64, Overflow> {
        let mag = self.log_abs.exp();
        if mag.is_infinite() {
            return Err(Overflow { log_abs: self.log_abs });
        }
        Ok(self.sign.as_f64() * mag)
    }
}

/// `ln Σ exp(x_i)` without leaving the representable range.
///
/// An empty slice sums to nothing: `-inf`.
pub fn log_sum_exp(xs: &[f64]) -> f64 {
    let m = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return f64::NEG_INFINITY;
    }
    let s: f64 = xs.iter().map(|x| (x - m).exp()).sum();
    m + s.ln()
}

/// Neumaier-compensated running sum, for norms accumulated in plain domain
/// after per-term log-domain evaluation.
#[derive(Clone, Copy, Debug, Default)]
pub struct CompensatedSum {
    sum: f64,
    comp: f64,
}

impl CompensatedSum {
    pub fn new() -> CompensatedSum {
        CompensatedSum::default()
    }

    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.comp += (self.sum - t) + x;
        } else {
            self.comp += (x - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn value(&self) -> f64 {
        self.sum + self.comp
    }
}
