//! Convex polyhedra `{y : Ay <= b, Ey = e}` generic over the scalar type.
//!
//! Float instantiations compare with the 1e-9 active-set slack; rational
//! instantiations compare exactly. Cone membership questions go through
//! the exact rational LP regardless.

use crate::error::{CurvError, Result};
use crate::linalg;
use crate::lp::{in_finitely_generated_cone, Feasibility, RationalLp};
use crate::scalar::{Rational, Scalar};

#[derive(Clone, Debug, PartialEq)]
pub struct Polyhedron<T> {
    a: Vec<Vec<T>>,
    b: Vec<T>,
    eq_a: Vec<Vec<T>>,
    eq_b: Vec<T>,
    dim: usize,
    known_nonempty: bool,
}

pub type PolyhedronF = Polyhedron<f64>;
pub type PolyhedronQ = Polyhedron<Rational>;

impl<T: Scalar> Polyhedron<T> {
    pub fn new(a: Vec<Vec<T>>, b: Vec<T>) -> Self {
        Self::with_equalities(a, b, Vec::new(), Vec::new())
    }

    pub fn with_equalities(
        a: Vec<Vec<T>>,
        b: Vec<T>,
        eq_a: Vec<Vec<T>>,
        eq_b: Vec<T>,
    ) -> Self {
        assert_eq!(a.len(), b.len());
        assert_eq!(eq_a.len(), eq_b.len());
        let dim = a
            .first()
            .map(|r| r.len())
            .or_else(|| eq_a.first().map(|r| r.len()))
            .expect("polyhedron needs at least one row to fix the dimension");
        assert!(a.iter().all(|r| r.len() == dim));
        assert!(eq_a.iter().all(|r| r.len() == dim));
        let mut p = Polyhedron {
            a,
            b,
            eq_a,
            eq_b,
            dim,
            known_nonempty: false,
        };
        p.known_nonempty = p.feasibility_lp().is_feasible();
        p
    }

    /// The whole space, as a polyhedron with zero rows.
    pub fn whole_space(dim: usize) -> Self {
        Polyhedron {
            a: vec![vec![T::zero(); dim]],
            b: vec![T::zero()],
            eq_a: Vec::new(),
            eq_b: Vec::new(),
            dim,
            known_nonempty: true,
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn known_nonempty(&self) -> bool {
        self.known_nonempty
    }

    pub fn ineq_rows(&self) -> (&[Vec<T>], &[T]) {
        (&self.a, &self.b)
    }

    pub fn eq_rows(&self) -> (&[Vec<T>], &[T]) {
        (&self.eq_a, &self.eq_b)
    }

    fn feasibility_lp(&self) -> Feasibility {
        let mut lp = RationalLp::new(self.dim);
        for (row, rhs) in self.a.iter().zip(&self.b) {
            lp.add_le(
                row.iter().map(|v| Rational::lift(v.approx())).collect(),
                Rational::lift(rhs.approx()),
            );
        }
        for (row, rhs) in self.eq_a.iter().zip(&self.eq_b) {
            lp.add_eq(
                row.iter().map(|v| Rational::lift(v.approx())).collect(),
                Rational::lift(rhs.approx()),
            );
        }
        lp.feasible()
    }

    fn check_dim(&self, y: &[T]) -> Result<()> {
        if y.len() != self.dim {
            return Err(CurvError::DimensionMismatch {
                expected: self.dim,
                got: y.len(),
            });
        }
        Ok(())
    }

    fn row_dot(row: &[T], y: &[T]) -> T {
        row.iter()
            .zip(y)
            .fold(T::zero(), |acc, (a, b)| acc + a.clone() * b.clone())
    }

    pub fn member(&self, y: &[T]) -> Result<bool> {
        self.check_dim(y)?;
        let ineq_ok = self
            .a
            .iter()
            .zip(&self.b)
            .all(|(row, rhs)| Self::row_dot(row, y).leq_tol(rhs));
        let eq_ok = self
            .eq_a
            .iter()
            .zip(&self.eq_b)
            .all(|(row, rhs)| (Self::row_dot(row, y) - rhs.clone()).is_negligible());
        Ok(ineq_ok && eq_ok)
    }

    /// Indices of inequality rows active at `y` (within the scalar slack).
    pub fn active_set(&self, y: &[T]) -> Result<Vec<usize>> {
        self.check_dim(y)?;
        Ok(self
            .a
            .iter()
            .zip(&self.b)
            .enumerate()
            .filter(|(_, (row, rhs))| {
                (Self::row_dot(row, y) - (*rhs).clone()).is_negligible()
            })
            .map(|(i, _)| i)
            .collect())
    }

    /// `v ∈ T_P(y)`: active inequality rows stay <= 0, equality rows stay 0.
    pub fn tangent_member(&self, y: &[T], v: &[T]) -> Result<bool> {
        self.check_dim(v)?;
        let active = self.active_set(y)?;
        let ineq_ok = active
            .iter()
            .all(|&i| Self::row_dot(&self.a[i], v).leq_tol(&T::zero()));
        let eq_ok = self
            .eq_a
            .iter()
            .all(|row| Self::row_dot(row, v).is_negligible());
        Ok(ineq_ok && eq_ok)
    }

    /// Rows active at `y` whose product with `v` also vanishes; these
    /// generate `N_{T_P(y)}(v)` together with the equality rows as lines.
    pub fn doubly_active_set(&self, y: &[T], v: &[T]) -> Result<Vec<usize>> {
        let active = self.active_set(y)?;
        self.check_dim(v)?;
        Ok(active
            .into_iter()
            .filter(|&i| Self::row_dot(&self.a[i], v).is_negligible())
            .collect())
    }

    /// `λ ∈ N_P(y) = cone{A_i : i ∈ I(y)} + span{equality rows}`,
    /// decided by exact rational LP on losslessly lifted data.
    pub fn normal_cone_member(&self, y: &[T], lambda: &[f64]) -> Result<bool> {
        let active = self.active_set(y)?;
        let generators: Vec<Vec<Rational>> = active
            .iter()
            .map(|&i| self.a[i].iter().map(|v| Rational::lift(v.approx())).collect())
            .collect();
        let lines: Vec<Vec<Rational>> = self
            .eq_a
            .iter()
            .map(|row| row.iter().map(|v| Rational::lift(v.approx())).collect())
            .collect();
        let target: Vec<Rational> = lambda.iter().map(|&v| Rational::lift(v)).collect();
        Ok(in_finitely_generated_cone(&target, &generators, &lines))
    }

    /// `λ ∈ N_{T_P(y)}(v)`, the normal cone to the tangent cone at `v`.
    ///
    /// Errors with `InfeasibleBase` when `v ∉ T_P(y)`.
    pub fn normal_of_tangent_member(&self, y: &[T], v: &[T], lambda: &[f64]) -> Result<bool> {
        if !self.tangent_member(y, v)? {
            return Err(CurvError::InfeasibleBase);
        }
        let doubly = self.doubly_active_set(y, v)?;
        let generators: Vec<Vec<Rational>> = doubly
            .iter()
            .map(|&i| self.a[i].iter().map(|x| Rational::lift(x.approx())).collect())
            .collect();
        let lines: Vec<Vec<Rational>> = self
            .eq_a
            .iter()
            .map(|row| row.iter().map(|x| Rational::lift(x.approx())).collect())
            .collect();
        let target: Vec<Rational> = lambda.iter().map(|&x| Rational::lift(x)).collect();
        Ok(in_finitely_generated_cone(&target, &generators, &lines))
    }

    /// The tangent cone at `y` as a polyhedron in its own right.
    pub fn tangent_cone(&self, y: &[T]) -> Result<Polyhedron<T>> {
        let active = self.active_set(y)?;
        let mut rows: Vec<Vec<T>> = active.iter().map(|&i| self.a[i].clone()).collect();
        if rows.is_empty() && self.eq_a.is_empty() {
            rows.push(vec![T::zero(); self.dim]);
        }
        let nb = rows.len();
        Ok(Polyhedron::with_equalities(
            rows,
            vec![T::zero(); nb],
            self.eq_a.clone(),
            vec![T::zero(); self.eq_a.len()],
        ))
    }
}

impl Polyhedron<f64> {
    /// Membership with an explicit comparison slack (the trait-level
    /// `member` uses the fixed 1e-9 active-set slack).
    pub fn member_tol(&self, y: &[f64], tol: f64) -> Result<bool> {
        self.check_dim(y)?;
        let ineq_ok = self
            .a
            .iter()
            .zip(&self.b)
            .all(|(row, rhs)| Self::row_dot(row, y) <= rhs + tol);
        let eq_ok = self
            .eq_a
            .iter()
            .zip(&self.eq_b)
            .all(|(row, rhs)| (Self::row_dot(row, y) - rhs).abs() <= tol);
        Ok(ineq_ok && eq_ok)
    }

    pub fn to_rational(&self) -> Polyhedron<Rational> {
        Polyhedron {
            a: crate::scalar::lift_mat(&self.a),
            b: crate::scalar::lift_vec(&self.b),
            eq_a: crate::scalar::lift_mat(&self.eq_a),
            eq_b: crate::scalar::lift_vec(&self.eq_b),
            dim: self.dim,
            known_nonempty: self.known_nonempty,
        }
    }

    /// The non-positive half-line as a 1-D polyhedron.
    pub fn halfline_nonpositive() -> Self {
        Polyhedron::new(vec![vec![1.0]], vec![0.0])
    }

    /// Euclidean projection by enumeration of candidate active sets.
    ///
    /// Solves the equality-constrained least-squares problem for every
    /// subset of inequality rows and keeps the feasible candidate closest
    /// to `x`. Exponential in the row count, so capped at 14 rows.
    pub fn project(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.check_dim(x)?;
        let m = self.a.len();
        if m > 14 {
            return Err(CurvError::Unsupported(
                "polyhedral projection limited to 14 inequality rows",
            ));
        }
        if !self.known_nonempty {
            return Err(CurvError::Unsupported("projection onto an empty polyhedron"));
        }
        let mut best: Option<(f64, Vec<f64>)> = None;
        for mask in 0u32..(1 << m) {
            let subset: Vec<usize> = (0..m).filter(|i| mask & (1 << i) != 0).collect();
            if let Some(y) = self.constrained_least_squares(x, &subset) {
                if self.member(&y).unwrap_or(false) {
                    let d = linalg::norm(&linalg::sub(&y, x));
                    if best.as_ref().map_or(true, |(bd, _)| d < *bd) {
                        best = Some((d, y));
                    }
                }
            }
        }
        best.map(|(_, y)| y)
            .ok_or(CurvError::Unsupported("projection enumeration found no feasible point"))
    }

    /// Minimizes `|y - x|²` subject to the chosen rows holding with
    /// equality. KKT system solved by least squares.
    fn constrained_least_squares(&self, x: &[f64], subset: &[usize]) -> Option<Vec<f64>> {
        let n = self.dim;
        let k = subset.len() + self.eq_a.len();
        let size = n + k;
        let mut m = vec![vec![0.0; size]; size];
        let mut rhs = vec![0.0; size];
        for i in 0..n {
            m[i][i] = 1.0;
            rhs[i] = x[i];
        }
        let mut rows: Vec<(&[f64], f64)> = Vec::with_capacity(k);
        for &i in subset {
            rows.push((&self.a[i], self.b[i]));
        }
        for (row, rhs_v) in self.eq_a.iter().zip(&self.eq_b) {
            rows.push((row, *rhs_v));
        }
        for (j, (row, b)) in rows.iter().enumerate() {
            for i in 0..n {
                m[i][n + j] = row[i];
                m[n + j][i] = row[i];
            }
            rhs[n + j] = *b;
        }
        let sol = linalg::solve_affine(&m, &rhs, 1e-7)?;
        Some(sol.particular[..n].to_vec())
    }
}
