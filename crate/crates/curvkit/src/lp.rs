//! Exact rational linear feasibility.
//!
//! Phase-1 simplex over `BigRational` with Bland's rule, so termination is
//! guaranteed and answers are exact. All certification LPs in this crate
//! are feasibility questions: "does a point exist in this polyhedron".

use num_traits::{One, Signed, Zero};

use crate::scalar::Rational;

#[derive(Clone, Debug, PartialEq)]
pub enum Feasibility {
    Feasible(Vec<Rational>),
    Infeasible,
}

impl Feasibility {
    pub fn is_feasible(&self) -> bool {
        matches!(self, Feasibility::Feasible(_))
    }

    pub fn witness(&self) -> Option<&[Rational]> {
        match self {
            Feasibility::Feasible(x) => Some(x),
            Feasibility::Infeasible => None,
        }
    }
}

/// A rational linear system: equality rows over structural variables,
/// some of which are restricted to be non-negative.
#[derive(Clone, Debug, Default)]
pub struct RationalLp {
    n: usize,
    nonneg: Vec<bool>,
    rows: Vec<(Vec<Rational>, Rational)>,
}

impl RationalLp {
    /// `n` free structural variables.
    pub fn new(n: usize) -> Self {
        RationalLp {
            n,
            nonneg: vec![false; n],
            rows: Vec::new(),
        }
    }

    pub fn num_vars(&self) -> usize {
        self.n
    }

    /// Appends a fresh variable, returning its index.
    pub fn add_var(&mut self, nonneg: bool) -> usize {
        self.n += 1;
        self.nonneg.push(nonneg);
        for (row, _) in &mut self.rows {
            row.push(Rational::zero());
        }
        self.n - 1
    }

    pub fn set_nonneg(&mut self, i: usize) {
        self.nonneg[i] = true;
    }

    fn pad(&self, mut coeffs: Vec<Rational>) -> Vec<Rational> {
        assert!(coeffs.len() <= self.n);
        coeffs.resize(self.n, Rational::zero());
        coeffs
    }

    /// `coeffs · x = rhs`
    pub fn add_eq(&mut self, coeffs: Vec<Rational>, rhs: Rational) {
        let row = self.pad(coeffs);
        self.rows.push((row, rhs));
    }

    /// `coeffs · x <= rhs` (adds a slack variable)
    pub fn add_le(&mut self, coeffs: Vec<Rational>, rhs: Rational) {
        let mut row = self.pad(coeffs);
        let s = self.add_var(true);
        row.resize(self.n, Rational::zero());
        row[s] = Rational::one();
        self.rows.push((row, rhs));
    }

    /// `coeffs · x >= rhs` (adds a surplus variable)
    pub fn add_ge(&mut self, coeffs: Vec<Rational>, rhs: Rational) {
        let mut row = self.pad(coeffs);
        let s = self.add_var(true);
        row.resize(self.n, Rational::zero());
        row[s] = -Rational::one();
        self.rows.push((row, rhs));
    }

    /// Exact phase-1 feasibility with Bland's rule.
    pub fn feasible(&self) -> Feasibility {
        // Split free variables into differences of non-negative parts.
        // col_of[i] = first standard-form column of structural variable i.
        let mut col_of = Vec::with_capacity(self.n);
        let mut split = Vec::with_capacity(self.n);
        let mut ncols = 0usize;
        for i in 0..self.n {
            col_of.push(ncols);
            if self.nonneg[i] {
                split.push(false);
                ncols += 1;
            } else {
                split.push(true);
                ncols += 2;
            }
        }
        let m = self.rows.len();
        if m == 0 {
            return Feasibility::Feasible(vec![Rational::zero(); self.n]);
        }
        let total = ncols + m; // + artificials

        // tab[i] = row of length total + 1 (rhs last), with rhs >= 0.
        let mut tab: Vec<Vec<Rational>> = Vec::with_capacity(m);
        for (row, rhs) in &self.rows {
            let mut t = vec![Rational::zero(); total + 1];
            let flip = rhs.is_negative();
            for i in 0..self.n {
                let v = if flip { -row[i].clone() } else { row[i].clone() };
                if split[i] {
                    t[col_of[i]] = v.clone();
                    t[col_of[i] + 1] = -v;
                } else {
                    t[col_of[i]] = v;
                }
            }
            t[total] = if flip { -rhs.clone() } else { rhs.clone() };
            tab.push(t);
        }
        let mut basis: Vec<usize> = (0..m).map(|i| ncols + i).collect();
        for (i, row) in tab.iter_mut().enumerate() {
            row[ncols + i] = Rational::one();
        }

        // Phase-1 objective row: sum of all rows (artificials are basic).
        let mut obj = vec![Rational::zero(); total + 1];
        for row in &tab {
            for (o, v) in obj.iter_mut().zip(row.iter()) {
                *o = o.clone() + v.clone();
            }
        }

        loop {
            // Bland: entering = lowest-index column with positive reduced
            // cost, artificial columns excluded.
            let Some(enter) = (0..ncols).find(|&j| obj[j].is_positive()) else {
                break;
            };
            // Ratio test; Bland tie-break on the basic variable index.
            let mut leave: Option<usize> = None;
            let mut best: Option<Rational> = None;
            for i in 0..m {
                if tab[i][enter].is_positive() {
                    let ratio = tab[i][total].clone() / tab[i][enter].clone();
                    let better = match &best {
                        None => true,
                        Some(b) => {
                            ratio < *b || (ratio == *b && basis[i] < basis[leave.unwrap()])
                        }
                    };
                    if better {
                        best = Some(ratio);
                        leave = Some(i);
                    }
                }
            }
            let Some(r) = leave else {
                // Unbounded phase-1 objective cannot happen (bounded below
                // by 0); an entering column without positive entries means
                // the objective row was stale.
                break;
            };
            pivot(&mut tab, &mut obj, r, enter, total);
            basis[r] = enter;
        }

        if !obj[total].is_zero() {
            return Feasibility::Infeasible;
        }

        let mut std_x = vec![Rational::zero(); total];
        for (i, &bv) in basis.iter().enumerate() {
            if bv < ncols {
                std_x[bv] = tab[i][total].clone();
            } else if !tab[i][total].is_zero() {
                // Artificial basic at a non-zero level despite w = 0.
                return Feasibility::Infeasible;
            }
        }
        let mut x = vec![Rational::zero(); self.n];
        for i in 0..self.n {
            x[i] = if split[i] {
                std_x[col_of[i]].clone() - std_x[col_of[i] + 1].clone()
            } else {
                std_x[col_of[i]].clone()
            };
        }
        Feasibility::Feasible(x)
    }
}

fn pivot(
    tab: &mut [Vec<Rational>],
    obj: &mut [Rational],
    r: usize,
    c: usize,
    total: usize,
) {
    let piv = tab[r][c].clone();
    for v in tab[r].iter_mut() {
        *v = v.clone() / piv.clone();
    }
    for i in 0..tab.len() {
        if i == r || tab[i][c].is_zero() {
            continue;
        }
        let f = tab[i][c].clone();
        for j in 0..=total {
            let delta = f.clone() * tab[r][j].clone();
            tab[i][j] = tab[i][j].clone() - delta;
        }
    }
    if !obj[c].is_zero() {
        let f = obj[c].clone();
        for j in 0..=total {
            let delta = f.clone() * tab[r][j].clone();
            obj[j] = obj[j].clone() - delta;
        }
    }
}

/// Is `target` a non-negative combination of `generators` (plus an
/// unrestricted combination of `lines`)?
pub fn in_finitely_generated_cone(
    target: &[Rational],
    generators: &[Vec<Rational>],
    lines: &[Vec<Rational>],
) -> bool {
    let dim = target.len();
    let mut lp = RationalLp::new(generators.len() + lines.len());
    for g in 0..generators.len() {
        lp.set_nonneg(g);
    }
    for d in 0..dim {
        let mut coeffs = Vec::with_capacity(generators.len() + lines.len());
        for g in generators {
            coeffs.push(g[d].clone());
        }
        for l in lines {
            coeffs.push(l[d].clone());
        }
        lp.add_eq(coeffs, target[d].clone());
    }
    lp.feasible().is_feasible()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scalar::lift_vec;
    use crate::scalar::Scalar;

    fn q(x: f64) -> Rational {
        Rational::lift(x)
    }

    #[test]
    fn simple_feasible() {
        // x >= 0, x >= 1
        let mut lp = RationalLp::new(1);
        lp.set_nonneg(0);
        lp.add_ge(vec![q(1.0)], q(1.0));
        let f = lp.feasible();
        assert!(f.is_feasible());
        let w = f.witness().unwrap();
        assert!(w[0] >= q(1.0));
    }

    #[test]
    fn simple_infeasible() {
        // x >= 0, x <= -1
        let mut lp = RationalLp::new(1);
        lp.set_nonneg(0);
        lp.add_le(vec![q(1.0)], q(-1.0));
        assert_eq!(lp.feasible(), Feasibility::Infeasible);
    }

    #[test]
    fn equality_with_free_vars() {
        // x + y = 3, x - y = 1 (free): unique (2, 1)
        let mut lp = RationalLp::new(2);
        lp.add_eq(vec![q(1.0), q(1.0)], q(3.0));
        lp.add_eq(vec![q(1.0), q(-1.0)], q(1.0));
        let f = lp.feasible();
        let w = f.witness().unwrap();
        assert_eq!(w[0], q(2.0));
        assert_eq!(w[1], q(1.0));
    }

    #[test]
    fn cone_membership() {
        let gens = vec![lift_vec(&[1.0, 0.0]), lift_vec(&[1.0, 1.0])];
        assert!(in_finitely_generated_cone(&lift_vec(&[3.0, 1.0]), &gens, &[]));
        assert!(!in_finitely_generated_cone(
            &lift_vec(&[-1.0, 0.0]),
            &gens,
            &[]
        ));
        // With a line, negative multiples become reachable.
        assert!(in_finitely_generated_cone(
            &lift_vec(&[-1.0, 0.0]),
            &gens[1..],
            &[lift_vec(&[1.0, 0.0])]
        ));
    }

    #[test]
    fn degenerate_system_terminates() {
        // Redundant + degenerate rows exercise Bland's rule.
        let mut lp = RationalLp::new(3);
        for i in 0..3 {
            lp.set_nonneg(i);
        }
        lp.add_eq(vec![q(1.0), q(1.0), q(1.0)], q(0.0));
        lp.add_eq(vec![q(2.0), q(2.0), q(2.0)], q(0.0));
        lp.add_le(vec![q(1.0), q(0.0), q(0.0)], q(0.0));
        let f = lp.feasible();
        assert!(f.is_feasible());
        let w = f.witness().unwrap();
        assert!(w.iter().all(|v| v.is_zero()));
    }
}
