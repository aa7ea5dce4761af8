//! Twice continuously differentiable maps with exact value / Jacobian /
//! Hessian evaluation, plus a central-difference validation harness.

use std::sync::Arc;

use crate::error::{CurvError, Result};
use crate::linalg;

type EvalFn = Arc<dyn Fn(&[f64]) -> Vec<f64> + Send + Sync>;
type JacFn = Arc<dyn Fn(&[f64]) -> Vec<Vec<f64>> + Send + Sync>;
type HessFn = Arc<dyn Fn(&[f64]) -> Vec<Vec<Vec<f64>>> + Send + Sync>;

/// A C² map `R^n -> R^m` with callable derivatives.
///
/// `jacobian(x)` is `m x n` row-major; `hessians(x)` is one symmetric
/// `n x n` matrix per output component.
#[derive(Clone)]
pub struct SmoothMap {
    dim_in: usize,
    dim_out: usize,
    eval: EvalFn,
    jac: JacFn,
    hess: HessFn,
}

impl std::fmt::Debug for SmoothMap {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "SmoothMap({} -> {})", self.dim_in, self.dim_out)
    }
}

impl SmoothMap {
    pub fn new(
        dim_in: usize,
        dim_out: usize,
        eval: impl Fn(&[f64]) -> Vec<f64> + Send + Sync + 'static,
        jac: impl Fn(&[f64]) -> Vec<Vec<f64>> + Send + Sync + 'static,
        hess: impl Fn(&[f64]) -> Vec<Vec<Vec<f64>>> + Send + Sync + 'static,
    ) -> Self {
        assert!(dim_in > 0 && dim_out > 0);
        SmoothMap {
            dim_in,
            dim_out,
            eval: Arc::new(eval),
            jac: Arc::new(jac),
            hess: Arc::new(hess),
        }
    }

    pub fn dim_in(&self) -> usize {
        self.dim_in
    }

    pub fn dim_out(&self) -> usize {
        self.dim_out
    }

    fn check_dim(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.dim_in {
            return Err(CurvError::DimensionMismatch {
                expected: self.dim_in,
                got: x.len(),
            });
        }
        Ok(())
    }

    pub fn value(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.check_dim(x)?;
        Ok((self.eval)(x))
    }

    pub fn jacobian(&self, x: &[f64]) -> Result<Vec<Vec<f64>>> {
        self.check_dim(x)?;
        Ok((self.jac)(x))
    }

    pub fn hessians(&self, x: &[f64]) -> Result<Vec<Vec<Vec<f64>>>> {
        self.check_dim(x)?;
        Ok((self.hess)(x))
    }

    /// Value, Jacobian, and Hessians at the same point.
    pub fn eval2(&self, x: &[f64]) -> Result<Eval2> {
        self.check_dim(x)?;
        Ok(Eval2 {
            value: (self.eval)(x),
            jacobian: (self.jac)(x),
            hessians: (self.hess)(x),
        })
    }

    /// Gradient of a scalar map.
    pub fn gradient(&self, x: &[f64]) -> Result<Vec<f64>> {
        assert_eq!(self.dim_out, 1, "gradient of a non-scalar map");
        Ok(self.jacobian(x)?.remove(0))
    }

    /// `<y*, ∇²F(x)(w, w)> = Σ_i y*_i wᵀ ∇²F_i(x) w`.
    pub fn scalarized_hessian_form(&self, x: &[f64], ystar: &[f64], w: &[f64]) -> Result<f64> {
        let hs = self.hessians(x)?;
        Ok(hs
            .iter()
            .zip(ystar)
            .map(|(h, yi)| yi * linalg::quad_form(h, w))
            .sum())
    }

    /// Identity on `R^n`.
    pub fn identity(n: usize) -> Self {
        SmoothMap::new(
            n,
            n,
            |x| x.to_vec(),
            move |_| {
                (0..n)
                    .map(|i| (0..n).map(|j| if i == j { 1.0 } else { 0.0 }).collect())
                    .collect()
            },
            move |_| vec![vec![vec![0.0; n]; n]; n],
        )
    }

    /// Stacks component maps `R^n -> R^{m_i}` into one map.
    pub fn stack(parts: Vec<SmoothMap>) -> Self {
        assert!(!parts.is_empty());
        let dim_in = parts[0].dim_in;
        assert!(parts.iter().all(|p| p.dim_in == dim_in));
        let dim_out = parts.iter().map(|p| p.dim_out).sum();
        let p1 = parts.clone();
        let p2 = parts.clone();
        let p3 = parts;
        SmoothMap::new(
            dim_in,
            dim_out,
            move |x| p1.iter().flat_map(|p| (p.eval)(x)).collect(),
            move |x| p2.iter().flat_map(|p| (p.jac)(x)).collect(),
            move |x| p3.iter().flat_map(|p| (p.hess)(x)).collect(),
        )
    }
}

/// Consistent triple of evaluations at one point.
#[derive(Clone, Debug)]
pub struct Eval2 {
    pub value: Vec<f64>,
    pub jacobian: Vec<Vec<f64>>,
    pub hessians: Vec<Vec<Vec<f64>>>,
}

/// Serializable smooth atoms with analytically exact derivatives.
///
/// One `PolyForm` is a scalar function; vector maps are lists of them.
#[derive(Clone, Debug, PartialEq)]
pub enum PolyForm {
    /// `a·x + b`
    Affine { a: Vec<f64>, b: f64 },
    /// `½ xᵀQx + a·x + c` with `Q` symmetric
    Quadratic { q: Vec<Vec<f64>>, a: Vec<f64>, c: f64 },
    /// Sum of monomials `coef · Π x_i^{powers_i}` with total degree ≤ 3
    CubicMonomialSum {
        n: usize,
        terms: Vec<MonomialTerm>,
    },
}

#[derive(Clone, Debug, PartialEq)]
pub struct MonomialTerm {
    pub coef: f64,
    pub powers: Vec<u32>,
}

impl PolyForm {
    pub fn dim_in(&self) -> usize {
        match self {
            PolyForm::Affine { a, .. } => a.len(),
            PolyForm::Quadratic { a, .. } => a.len(),
            PolyForm::CubicMonomialSum { n, .. } => *n,
        }
    }

    pub fn value(&self, x: &[f64]) -> f64 {
        match self {
            PolyForm::Affine { a, b } => linalg::dot(a, x) + b,
            PolyForm::Quadratic { q, a, c } => {
                0.5 * linalg::quad_form(q, x) + linalg::dot(a, x) + c
            }
            PolyForm::CubicMonomialSum { terms, .. } => terms
                .iter()
                .map(|t| {
                    t.coef
                        * t.powers
                            .iter()
                            .zip(x)
                            .map(|(&p, &xi)| xi.powi(p as i32))
                            .product::<f64>()
                })
                .sum(),
        }
    }

    pub fn gradient(&self, x: &[f64]) -> Vec<f64> {
        let n = self.dim_in();
        match self {
            PolyForm::Affine { a, .. } => a.clone(),
            PolyForm::Quadratic { q, a, .. } => {
                // ½(Q + Qᵀ)x + a; Q is symmetric by contract.
                linalg::add(&linalg::mat_vec(q, x), a)
            }
            PolyForm::CubicMonomialSum { terms, .. } => {
                let mut g = vec![0.0; n];
                for t in terms {
                    for i in 0..n {
                        if t.powers[i] == 0 {
                            continue;
                        }
                        let mut v = t.coef * t.powers[i] as f64;
                        for j in 0..n {
                            let p = if j == i { t.powers[j] - 1 } else { t.powers[j] };
                            v *= x[j].powi(p as i32);
                        }
                        g[i] += v;
                    }
                }
                g
            }
        }
    }

    pub fn hessian(&self, x: &[f64]) -> Vec<Vec<f64>> {
        let n = self.dim_in();
        match self {
            PolyForm::Affine { .. } => vec![vec![0.0; n]; n],
            PolyForm::Quadratic { q, .. } => q.clone(),
            PolyForm::CubicMonomialSum { terms, .. } => {
                let mut h = vec![vec![0.0; n]; n];
                for t in terms {
                    for i in 0..n {
                        for j in 0..n {
                            let (pi, pj) = (t.powers[i], t.powers[j]);
                            let factor = if i == j {
                                if pi < 2 {
                                    continue;
                                }
                                (pi * (pi - 1)) as f64
                            } else {
                                if pi == 0 || pj == 0 {
                                    continue;
                                }
                                (pi * pj) as f64
                            };
                            let mut v = t.coef * factor;
                            for k in 0..n {
                                let mut p = t.powers[k];
                                if k == i {
                                    p -= 1;
                                }
                                if k == j {
                                    p -= 1;
                                }
                                v *= x[k].powi(p as i32);
                            }
                            h[i][j] += v;
                        }
                    }
                }
                h
            }
        }
    }

    /// Realizes a vector map from per-component scalar forms.
    pub fn to_smooth_map(components: &[PolyForm]) -> SmoothMap {
        assert!(!components.is_empty());
        let n = components[0].dim_in();
        assert!(components.iter().all(|c| c.dim_in() == n));
        let m = components.len();
        let c1 = components.to_vec();
        let c2 = components.to_vec();
        let c3 = components.to_vec();
        SmoothMap::new(
            n,
            m,
            move |x| c1.iter().map(|c| c.value(x)).collect(),
            move |x| c2.iter().map(|c| c.gradient(x)).collect(),
            move |x| c3.iter().map(|c| c.hessian(x)).collect(),
        )
    }
}

/// Per-probe outcome of the finite-difference check.
#[derive(Clone, Debug)]
pub struct FdProbeReport {
    pub probe: Vec<f64>,
    pub jacobian_error: f64,
    pub hessian_error: f64,
    pub pass: bool,
}

#[derive(Clone, Debug)]
pub struct FdReport {
    pub tol: f64,
    pub probes: Vec<FdProbeReport>,
}

impl FdReport {
    pub fn pass(&self) -> bool {
        self.probes.iter().all(|p| p.pass)
    }

    pub fn max_error(&self) -> f64 {
        self.probes
            .iter()
            .map(|p| p.jacobian_error.max(p.hessian_error))
            .fold(0.0, f64::max)
    }

    pub fn first_failure(&self) -> Option<&FdProbeReport> {
        self.probes.iter().find(|p| !p.pass)
    }
}

fn rel_err(got: f64, want: f64) -> f64 {
    (got - want).abs() / (1.0 + want.abs())
}

/// Validates `jacobian` and `hessians` against central differences of
/// `eval` with step `h = 1e-5 (1 + |x|)`.
pub fn fd_check(f: &SmoothMap, probes: &[Vec<f64>], tol: f64) -> Result<FdReport> {
    assert!(tol > 0.0, "fd_check tolerance must be positive");
    let n = f.dim_in();
    let m = f.dim_out();
    let mut reports = Vec::with_capacity(probes.len());
    for x in probes {
        f.value(x)?;
        let h = 1e-5 * (1.0 + linalg::norm(x));
        let jac = f.jacobian(x)?;
        let hess = f.hessians(x)?;

        let mut jac_err = 0.0f64;
        for j in 0..n {
            let mut xp = x.clone();
            let mut xm = x.clone();
            xp[j] += h;
            xm[j] -= h;
            let fp = f.value(&xp)?;
            let fm = f.value(&xm)?;
            for i in 0..m {
                let fd = (fp[i] - fm[i]) / (2.0 * h);
                jac_err = jac_err.max(rel_err(fd, jac[i][j]));
            }
        }

        // Hessian columns against central differences of the Jacobian.
        // Differencing eval twice would put 4-point round-off (~1e-7)
        // above the advertised accuracy for exact quadratic atoms.
        let mut hess_err = 0.0f64;
        for k in 0..n {
            let mut xp = x.clone();
            let mut xm = x.clone();
            xp[k] += h;
            xm[k] -= h;
            let jp = f.jacobian(&xp)?;
            let jm = f.jacobian(&xm)?;
            for i in 0..m {
                for j in 0..n {
                    let fd = (jp[i][j] - jm[i][j]) / (2.0 * h);
                    hess_err = hess_err.max(rel_err(fd, hess[i][j][k]));
                    // Symmetry requirement on the supplied Hessians.
                    if (hess[i][j][k] - hess[i][k][j]).abs() > 1e-12 {
                        hess_err = f64::INFINITY;
                    }
                }
            }
        }

        reports.push(FdProbeReport {
            probe: x.clone(),
            jacobian_error: jac_err,
            hessian_error: hess_err,
            pass: jac_err <= tol && hess_err <= tol,
        });
    }
    Ok(FdReport {
        tol,
        probes: reports,
    })
}
