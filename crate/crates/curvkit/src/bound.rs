//! Engine answers: an extended-real value plus a tag saying which side of
//! the true quantity it is on.
//!
//! Certification only ever consumes lower bounds, so a `LowerBound` is
//! always safe to certify with and never safe to falsify with.

use crate::extreal::ExtReal;

/// Which side of the true value an answer is on.
///
/// `ExactOverCandidates` marks image/marginal answers that are exact
/// conditional on the user-supplied candidate list being exhaustive.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Bound {
    Exact,
    LowerBound,
    UpperBound,
    ExactOverCandidates,
}

#[derive(Clone, Debug, PartialEq)]
pub struct BoundedValue {
    pub value: ExtReal,
    pub kind: Bound,
    /// Multiplier or direction the dispatched rule used, when one exists.
    pub witness: Option<Vec<f64>>,
}

impl BoundedValue {
    pub fn exact(value: ExtReal) -> Self {
        BoundedValue {
            value,
            kind: Bound::Exact,
            witness: None,
        }
    }

    pub fn lower(value: ExtReal) -> Self {
        BoundedValue {
            value,
            kind: Bound::LowerBound,
            witness: None,
        }
    }

    pub fn upper(value: ExtReal) -> Self {
        BoundedValue {
            value,
            kind: Bound::UpperBound,
            witness: None,
        }
    }

    pub fn with_witness(mut self, w: Vec<f64>) -> Self {
        self.witness = Some(w);
        self
    }

    pub fn is_exact(&self) -> bool {
        self.kind == Bound::Exact
    }

    /// True when the answer certifies `true value > -inf`.
    pub fn certifies_above_neg_inf(&self) -> bool {
        match self.kind {
            Bound::Exact | Bound::LowerBound => self.value > ExtReal::NegInf,
            _ => false,
        }
    }

    /// True when the answer certifies `true value = -inf`.
    pub fn certifies_neg_inf(&self) -> bool {
        match self.kind {
            Bound::Exact | Bound::UpperBound | Bound::ExactOverCandidates => {
                self.value == ExtReal::NegInf
            }
            Bound::LowerBound => false,
        }
    }

    /// Weakens an exact answer to a one-sided one.
    pub fn downgrade(mut self, kind: Bound) -> Self {
        self.kind = kind;
        self
    }
}
