//! Small dense linear-algebra helpers.
//!
//! Problems in this crate have a handful of variables, so everything is
//! dense. Float factorizations go through nalgebra; exact solves over the
//! rationals use a hand-rolled reduced row echelon form.

use nalgebra::{DMatrix, DVector};
use num_traits::Zero;

use crate::scalar::Rational;

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

pub fn sub(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

pub fn add(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x + y).collect()
}

pub fn scale(a: &[f64], s: f64) -> Vec<f64> {
    a.iter().map(|x| s * x).collect()
}

pub fn axpy(y: &[f64], alpha: f64, x: &[f64]) -> Vec<f64> {
    y.iter().zip(x).map(|(yi, xi)| yi + alpha * xi).collect()
}

/// `M x` for a row-major matrix.
pub fn mat_vec(m: &[Vec<f64>], x: &[f64]) -> Vec<f64> {
    m.iter().map(|row| dot(row, x)).collect()
}

/// `Mᵀ y` for a row-major matrix.
pub fn mat_t_vec(m: &[Vec<f64>], y: &[f64]) -> Vec<f64> {
    let n = m.first().map_or(0, |r| r.len());
    let mut out = vec![0.0; n];
    for (row, yi) in m.iter().zip(y) {
        for (o, a) in out.iter_mut().zip(row) {
            *o += a * yi;
        }
    }
    out
}

/// `wᵀ M w` for a square row-major matrix.
pub fn quad_form(m: &[Vec<f64>], w: &[f64]) -> f64 {
    dot(&mat_vec(m, w), w)
}

pub fn to_dmatrix(rows: &[Vec<f64>]) -> DMatrix<f64> {
    let nr = rows.len();
    let nc = rows.first().map_or(0, |r| r.len());
    DMatrix::from_fn(nr, nc, |i, j| rows[i][j])
}

pub fn from_dmatrix(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    (0..m.nrows())
        .map(|i| (0..m.ncols()).map(|j| m[(i, j)]).collect())
        .collect()
}

/// Solution set of a consistent linear system, `particular + span(basis)`.
#[derive(Clone, Debug)]
pub struct AffineSet {
    pub particular: Vec<f64>,
    pub basis: Vec<Vec<f64>>,
}

/// Least-squares solve of `A x = b` with a null-space basis of `A`.
///
/// Returns `None` when the system is inconsistent (residual above
/// `tol * (1 + |b|)`).
pub fn solve_affine(a: &[Vec<f64>], b: &[f64], tol: f64) -> Option<AffineSet> {
    let m = a.len();
    let n = a.first().map_or(0, |r| r.len());
    if m == 0 {
        // No constraints: whole space.
        let basis = (0..n)
            .map(|j| {
                let mut e = vec![0.0; n];
                e[j] = 1.0;
                e
            })
            .collect();
        return Some(AffineSet {
            particular: vec![0.0; n],
            basis,
        });
    }
    let am = to_dmatrix(a);
    let bv = DVector::from_column_slice(b);
    let svd = am.clone().svd(true, true);
    let sigma_max = svd.singular_values.iter().cloned().fold(0.0f64, f64::max);
    let eps = 1e-12f64.max(1e-10 * sigma_max);
    let x = svd.solve(&bv, eps).ok()?;
    let resid = (&am * &x - &bv).norm();
    if resid > tol * (1.0 + bv.norm()) {
        return None;
    }
    let basis = null_space(&am);
    Some(AffineSet {
        particular: x.as_slice().to_vec(),
        basis,
    })
}

/// Orthonormal basis of `null(A)` via SVD.
///
/// The matrix is padded with zero rows so the thin SVD carries a full set
/// of right singular vectors.
pub fn null_space(a: &DMatrix<f64>) -> Vec<Vec<f64>> {
    let n = a.ncols();
    if a.nrows() == 0 || n == 0 {
        return (0..n)
            .map(|j| {
                let mut e = vec![0.0; n];
                e[j] = 1.0;
                e
            })
            .collect();
    }
    let rows = a.nrows().max(n);
    let padded = DMatrix::from_fn(rows, n, |i, j| if i < a.nrows() { a[(i, j)] } else { 0.0 });
    let svd = padded.svd(false, true);
    let vt = svd.v_t.expect("svd with v_t");
    let sigma_max = svd.singular_values.iter().cloned().fold(0.0f64, f64::max);
    let eps = 1e-12f64.max(1e-10 * sigma_max);
    let mut basis = Vec::new();
    for i in 0..n {
        if svd.singular_values[i] <= eps {
            basis.push((0..n).map(|j| vt[(i, j)]).collect());
        }
    }
    basis
}

/// Matrix rank with a relative singular-value cutoff.
pub fn rank(a: &[Vec<f64>]) -> usize {
    if a.is_empty() {
        return 0;
    }
    let am = to_dmatrix(a);
    let svd = am.svd(false, false);
    let sigma_max = svd.singular_values.iter().cloned().fold(0.0f64, f64::max);
    let eps = 1e-12f64.max(1e-10 * sigma_max);
    svd.singular_values.iter().filter(|s| **s > eps).count()
}

/// Smallest eigenvalue of a symmetric matrix.
pub fn min_symmetric_eigenvalue(m: &[Vec<f64>]) -> f64 {
    let mm = to_dmatrix(m);
    let sym = (mm.clone() + mm.transpose()) * 0.5;
    sym.symmetric_eigen()
        .eigenvalues
        .iter()
        .cloned()
        .fold(f64::INFINITY, f64::min)
}

/// Exact solution set of `A x = b` over the rationals, or `None` if
/// inconsistent.
pub fn solve_affine_rational(
    a: &[Vec<Rational>],
    b: &[Rational],
) -> Option<(Vec<Rational>, Vec<Vec<Rational>>)> {
    let m = a.len();
    let n = a.first().map_or(0, |r| r.len());
    let mut tab: Vec<Vec<Rational>> = (0..m)
        .map(|i| {
            let mut row = a[i].clone();
            row.push(b[i].clone());
            row
        })
        .collect();

    let mut pivot_cols = Vec::new();
    let mut r = 0;
    for c in 0..n {
        let Some(p) = (r..m).find(|&i| !tab[i][c].is_zero()) else {
            continue;
        };
        tab.swap(r, p);
        let piv = tab[r][c].clone();
        for v in tab[r].iter_mut() {
            *v = v.clone() / piv.clone();
        }
        for i in 0..m {
            if i != r && !tab[i][c].is_zero() {
                let f = tab[i][c].clone();
                for j in 0..=n {
                    let delta = f.clone() * tab[r][j].clone();
                    tab[i][j] = tab[i][j].clone() - delta;
                }
            }
        }
        pivot_cols.push(c);
        r += 1;
        if r == m {
            break;
        }
    }
    // Inconsistency: a zero row with non-zero rhs.
    for row in tab.iter().skip(r) {
        if row[..n].iter().all(Rational::is_zero) && !row[n].is_zero() {
            return None;
        }
    }
    let mut particular = vec![Rational::zero(); n];
    for (k, &c) in pivot_cols.iter().enumerate() {
        particular[c] = tab[k][n].clone();
    }
    let free_cols: Vec<usize> = (0..n).filter(|c| !pivot_cols.contains(c)).collect();
    let mut basis = Vec::new();
    for &fc in &free_cols {
        let mut v = vec![Rational::zero(); n];
        v[fc] = Rational::from_integer(1.into());
        for (k, &c) in pivot_cols.iter().enumerate() {
            v[c] = -tab[k][fc].clone();
        }
        basis.push(v);
    }
    Some((particular, basis))
}
