//! Arithmetic on the extended real line.
//!
//! Subderivatives take values in `R ∪ {-inf, +inf}`, so every engine answer
//! is an [`ExtReal`]. The sum of opposite infinities is rejected, never
//! silently collapsed; callers translate the rejection into "no bound".

use std::cmp::Ordering;
use std::fmt;

use crate::error::{CurvError, Result};

/// A value on the extended real line.
///
/// `Finite` never holds a NaN; constructors assert this.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum ExtReal {
    NegInf,
    Finite(f64),
    PosInf,
}

pub use ExtReal::{Finite, NegInf, PosInf};

impl ExtReal {
    pub fn finite(v: f64) -> Self {
        assert!(!v.is_nan(), "ExtReal::finite(NaN)");
        if v.is_infinite() {
            return if v > 0.0 { PosInf } else { NegInf };
        }
        Finite(v)
    }

    /// Converts from an `f64`, mapping IEEE infinities onto the tags.
    pub fn from_f64(v: f64) -> Self {
        Self::finite(v)
    }

    pub fn is_finite(self) -> bool {
        matches!(self, Finite(_))
    }

    pub fn as_f64(self) -> f64 {
        match self {
            NegInf => f64::NEG_INFINITY,
            Finite(v) => v,
            PosInf => f64::INFINITY,
        }
    }

    /// Extended-real sum. Rejects `+inf + -inf`.
    pub fn checked_add(self, rhs: ExtReal) -> Result<ExtReal> {
        match (self, rhs) {
            (PosInf, NegInf) | (NegInf, PosInf) => Err(CurvError::IndeterminateSum),
            (PosInf, _) | (_, PosInf) => Ok(PosInf),
            (NegInf, _) | (_, NegInf) => Ok(NegInf),
            (Finite(a), Finite(b)) => Ok(ExtReal::finite(a + b)),
        }
    }

    /// Scaling by a strictly positive factor; preserves the tag.
    pub fn scale(self, alpha: f64) -> ExtReal {
        assert!(alpha > 0.0, "scale factor must be positive");
        match self {
            Finite(v) => ExtReal::finite(alpha * v),
            tag => tag,
        }
    }

    pub fn neg(self) -> ExtReal {
        match self {
            NegInf => PosInf,
            Finite(v) => Finite(-v),
            PosInf => NegInf,
        }
    }

    /// Sum of a slice; `sup ∅`-style conventions are the caller's business.
    pub fn checked_sum<I: IntoIterator<Item = ExtReal>>(terms: I) -> Result<ExtReal> {
        let mut acc = Finite(0.0);
        for t in terms {
            acc = acc.checked_add(t)?;
        }
        Ok(acc)
    }
}

impl PartialOrd for ExtReal {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        let rank = |e: &ExtReal| match e {
            NegInf => 0u8,
            Finite(_) => 1,
            PosInf => 2,
        };
        match (self, other) {
            (Finite(a), Finite(b)) => a.partial_cmp(b),
            (a, b) => rank(a).partial_cmp(&rank(b)),
        }
    }
}

impl fmt::Display for ExtReal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            NegInf => write!(f, "-inf"),
            Finite(v) => write!(f, "{v}"),
            PosInf => write!(f, "+inf"),
        }
    }
}
