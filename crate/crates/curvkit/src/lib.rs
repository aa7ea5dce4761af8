pub mod bound;
pub mod error;
pub mod extreal;
pub mod linalg;
pub mod lp;
pub mod oracle;
pub mod scalar;
pub mod schema;
pub mod sets;
pub mod smooth;
pub mod sosc;
pub mod subderiv;

pub use bound::{Bound, BoundedValue};
pub use error::{CurvError, Result};
pub use extreal::ExtReal;
pub use scalar::{Rational, Scalar};
pub use sets::{BoxSet, ClosedSet, PolyhedronF, PolyhedronQ, SecondOrderCone};
pub use smooth::{fd_check, PolyForm, SmoothMap};
pub use subderiv::{d2, subderivative, FunctionExpr};
