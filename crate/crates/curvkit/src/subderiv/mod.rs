//! The calculus engine: first and second subderivatives of function
//! expressions, with an exactness tag on every answer.
//!
//! Dispatch order for `d2`: the trivial infinity shortcuts (when the first
//! subderivative is exact and differs from `<z*, w>`), then the per-atom
//! closed forms and calculus rules. Lower bounds are always sound for
//! certification; exact tags are claimed only where the underlying rule is
//! an equality.

use crate::bound::{Bound, BoundedValue};
use crate::error::{CurvError, Result};
use crate::extreal::{ExtReal, Finite, NegInf, PosInf};
use crate::linalg;
use crate::sets::curvature::{self, enumerate_multipliers, full_row_rank};
use crate::sets::{CandidateTable, ClosedSet, PolyhedronF, SecondOrderCone, Ternary, SET_TOL};
use crate::smooth::SmoothMap;

pub const EQ_TOL: f64 = 1e-9;

/// Expression tree of nonsmooth function atoms and combinators.
#[derive(Clone, Debug)]
pub enum FunctionExpr {
    /// A scalar C² function.
    Smooth(SmoothMap),
    /// `δ_S`: zero on the set, `+inf` off it.
    Indicator(ClosedSet),
    /// `|·|` on `R^n`.
    EuclNorm(usize),
    /// `max(z_1, …, z_n)`.
    VecMax(usize),
    /// `|·|_0`, the number of non-zero entries.
    L0(usize),
    /// `dist(·, S)`.
    Dist(ClosedSet),
    /// `f0 + rest` with `f0` smooth.
    SumSmooth {
        smooth: SmoothMap,
        rest: Box<FunctionExpr>,
    },
    /// `h(z) = Σ h_i(z_i)` on disjoint variable blocks.
    SeparableSum(Vec<FunctionExpr>),
    /// `g ∘ F` with `F` smooth.
    Compose {
        outer: Box<FunctionExpr>,
        inner: SmoothMap,
    },
    /// Marginal `h(x) = inf_y φ(x, y)` with explicitly enumerated
    /// minimizer candidates per query point.
    MarginalFinite {
        objective: Box<FunctionExpr>,
        x_dim: usize,
        minimizers: CandidateTable,
        v_grid: Vec<Vec<f64>>,
        inner_calm_star: bool,
    },
}

impl FunctionExpr {
    /// Atoms whose exact subderivative values are attained along constant
    /// or radially scaled direction sequences, for every scale ladder.
    /// Per-block sequences of such atoms merge onto a common ladder, so
    /// separable sums over them are exact, not just bounded below.
    fn ladder_free(&self) -> bool {
        match self {
            FunctionExpr::Smooth(_)
            | FunctionExpr::EuclNorm(_)
            | FunctionExpr::VecMax(_)
            | FunctionExpr::L0(_) => true,
            FunctionExpr::Indicator(s) => s.is_exact_atom(),
            FunctionExpr::SumSmooth { rest, .. } => rest.ladder_free(),
            FunctionExpr::SeparableSum(parts) => parts.iter().all(|p| p.ladder_free()),
            _ => false,
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            FunctionExpr::Smooth(f) => f.dim_in(),
            FunctionExpr::Indicator(s) | FunctionExpr::Dist(s) => s.dim(),
            FunctionExpr::EuclNorm(n) | FunctionExpr::VecMax(n) | FunctionExpr::L0(n) => *n,
            FunctionExpr::SumSmooth { smooth, .. } => smooth.dim_in(),
            FunctionExpr::SeparableSum(parts) => parts.iter().map(|p| p.dim()).sum(),
            FunctionExpr::Compose { inner, .. } => inner.dim_in(),
            FunctionExpr::MarginalFinite { x_dim, .. } => *x_dim,
        }
    }

    fn check_dim(&self, z: &[f64]) -> Result<()> {
        if z.len() != self.dim() {
            return Err(CurvError::DimensionMismatch {
                expected: self.dim(),
                got: z.len(),
            });
        }
        Ok(())
    }

    /// Extended-real function value.
    pub fn value(&self, z: &[f64]) -> Result<ExtReal> {
        self.check_dim(z)?;
        match self {
            FunctionExpr::Smooth(f) => Ok(ExtReal::finite(f.value(z)?[0])),
            FunctionExpr::Indicator(s) => Ok(if s.member(z, SET_TOL)? {
                Finite(0.0)
            } else {
                PosInf
            }),
            FunctionExpr::EuclNorm(_) => Ok(ExtReal::finite(linalg::norm(z))),
            FunctionExpr::VecMax(_) => Ok(ExtReal::finite(
                z.iter().cloned().fold(f64::NEG_INFINITY, f64::max),
            )),
            FunctionExpr::L0(_) => {
                Ok(Finite(z.iter().filter(|v| **v != 0.0).count() as f64))
            }
            FunctionExpr::Dist(s) => Ok(ExtReal::finite(s.distance(z)?)),
            FunctionExpr::SumSmooth { smooth, rest } => {
                let f0 = smooth.value(z)?[0];
                rest.value(z)?.checked_add(Finite(f0))
            }
            FunctionExpr::SeparableSum(parts) => {
                let mut acc = Finite(0.0);
                let mut off = 0;
                for p in parts {
                    let d = p.dim();
                    acc = acc.checked_add(p.value(&z[off..off + d])?)?;
                    off += d;
                }
                Ok(acc)
            }
            FunctionExpr::Compose { outer, inner } => outer.value(&inner.value(z)?),
            FunctionExpr::MarginalFinite {
                objective,
                minimizers,
                ..
            } => {
                let Some(ys) = minimizers.lookup(z, SET_TOL) else {
                    return Err(CurvError::MissingCandidates);
                };
                let mut best = PosInf;
                for y in ys {
                    let mut zy = z.to_vec();
                    zy.extend_from_slice(y);
                    let v = objective.value(&zy)?;
                    if v < best {
                        best = v;
                    }
                }
                Ok(best)
            }
        }
    }

    /// Indices attaining the maximum, within the active-set slack.
    fn vecmax_active(z: &[f64]) -> Vec<usize> {
        let m = z.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        z.iter()
            .enumerate()
            .filter(|(_, v)| (m - **v).abs() <= EQ_TOL)
            .map(|(i, _)| i)
            .collect()
    }
}

/// First subderivative `dh(z̄)(w)` (lower Hadamard directional derivative).
pub fn subderivative(h: &FunctionExpr, zbar: &[f64], w: &[f64]) -> Result<BoundedValue> {
    h.check_dim(zbar)?;
    h.check_dim(w)?;
    match h {
        FunctionExpr::Smooth(f) => {
            let g = f.gradient(zbar)?;
            Ok(BoundedValue::exact(ExtReal::finite(linalg::dot(&g, w))))
        }
        FunctionExpr::Indicator(s) => {
            if !s.member(zbar, SET_TOL)? {
                return Err(CurvError::InfeasibleBasePoint);
            }
            let t = s.tangent_member(zbar, w)?;
            if t.certifies_tangent() {
                Ok(BoundedValue::exact(Finite(0.0)))
            } else if t.certifies_not_tangent() {
                Ok(BoundedValue::exact(PosInf))
            } else {
                // Tangency undecided on estimate atoms; 0 is always a
                // valid lower bound for an indicator subderivative.
                Ok(BoundedValue::lower(Finite(0.0)))
            }
        }
        FunctionExpr::EuclNorm(_) => {
            if linalg::norm(zbar) <= EQ_TOL {
                Ok(BoundedValue::exact(ExtReal::finite(linalg::norm(w))))
            } else {
                let g = linalg::scale(zbar, 1.0 / linalg::norm(zbar));
                Ok(BoundedValue::exact(ExtReal::finite(linalg::dot(&g, w))))
            }
        }
        FunctionExpr::VecMax(_) => {
            let active = FunctionExpr::vecmax_active(zbar);
            let v = active
                .iter()
                .map(|&i| w[i])
                .fold(f64::NEG_INFINITY, f64::max);
            Ok(BoundedValue::exact(ExtReal::finite(v)))
        }
        FunctionExpr::L0(_) => {
            let blown = zbar
                .iter()
                .zip(w)
                .any(|(t, r)| t.abs() <= EQ_TOL && r.abs() > EQ_TOL);
            Ok(BoundedValue::exact(if blown { PosInf } else { Finite(0.0) }))
        }
        FunctionExpr::Dist(s) => {
            if !s.member(zbar, SET_TOL)? {
                return Err(CurvError::PreconditionViolated(
                    "dist subderivative is dispatched at points of the set",
                ));
            }
            let cone = s.tangent_cone_set(zbar)?;
            Ok(BoundedValue::exact(ExtReal::finite(cone.distance(w)?)))
        }
        FunctionExpr::SumSmooth { smooth, rest } => {
            let g = smooth.gradient(zbar)?;
            let inner = subderivative(rest, zbar, w)?;
            let value = inner.value.checked_add(ExtReal::finite(linalg::dot(&g, w)))?;
            Ok(BoundedValue {
                value,
                kind: inner.kind,
                witness: None,
            })
        }
        FunctionExpr::SeparableSum(parts) => {
            let mut acc = Finite(0.0);
            let mut off = 0;
            let mut all_exact = true;
            for p in parts {
                let d = p.dim();
                let part = subderivative(p, &zbar[off..off + d], &w[off..off + d])?;
                all_exact &= part.is_exact();
                acc = acc.checked_add(part.value)?;
                off += d;
            }
            // The joint liminf dominates the sum of per-block liminfs;
            // equality holds when every block is ladder-free.
            let kind = if all_exact && parts.iter().all(|p| p.ladder_free()) {
                Bound::Exact
            } else {
                Bound::LowerBound
            };
            Ok(BoundedValue {
                value: acc,
                kind,
                witness: None,
            })
        }
        FunctionExpr::Compose { outer, inner } => {
            let fx = inner.value(zbar)?;
            let jw = linalg::mat_vec(&inner.jacobian(zbar)?, w);
            let val = subderivative(outer, &fx, &jw)?;
            let kind = if val.is_exact() && full_row_rank(&inner.jacobian(zbar)?) {
                Bound::Exact
            } else {
                Bound::LowerBound
            };
            Ok(BoundedValue {
                value: val.value,
                kind,
                witness: None,
            })
        }
        FunctionExpr::MarginalFinite {
            objective,
            minimizers,
            v_grid,
            inner_calm_star,
            ..
        } => {
            let Some(ys) = minimizers.lookup(zbar, SET_TOL) else {
                return Err(CurvError::MissingCandidates);
            };
            let mut best: Option<ExtReal> = None;
            for y in ys {
                for v in marginal_v_candidates(v_grid, w, y.len()) {
                    let mut zy = zbar.to_vec();
                    zy.extend_from_slice(y);
                    let mut uv = w.to_vec();
                    uv.extend_from_slice(&v);
                    let t = subderivative(objective, &zy, &uv)?;
                    if !matches!(t.kind, Bound::Exact | Bound::UpperBound) {
                        continue;
                    }
                    if best.map_or(true, |b| t.value < b) {
                        best = Some(t.value);
                    }
                }
            }
            let Some(value) = best else {
                return Err(CurvError::MissingCandidates);
            };
            let kind = if *inner_calm_star {
                Bound::ExactOverCandidates
            } else {
                Bound::UpperBound
            };
            Ok(BoundedValue {
                value,
                kind,
                witness: None,
            })
        }
    }
}

fn marginal_v_candidates(grid: &[Vec<f64>], u: &[f64], m: usize) -> Vec<Vec<f64>> {
    let mut out: Vec<Vec<f64>> = grid.to_vec();
    out.push(vec![0.0; m]);
    if u.len() == m {
        out.push(u.to_vec());
        out.push(u.iter().map(|x| -x).collect());
    }
    out
}

/// Second subderivative `d²h(z̄; z*)(w)` with an exactness tag.
pub fn d2(h: &FunctionExpr, zbar: &[f64], zstar: &[f64], w: &[f64]) -> Result<BoundedValue> {
    h.check_dim(zstar)?;
    let dsub = subderivative(h, zbar, w)?;
    let pairing = ExtReal::finite(linalg::dot(zstar, w));
    if dsub.is_exact() {
        // Trivial infinity shortcuts from the slope comparison.
        match dsub.value {
            PosInf => return Ok(BoundedValue::exact(PosInf)),
            NegInf => return Ok(BoundedValue::exact(NegInf)),
            Finite(d) => {
                let p = pairing.as_f64();
                if d > p + EQ_TOL {
                    return Ok(BoundedValue::exact(PosInf));
                }
                if d < p - EQ_TOL {
                    return Ok(BoundedValue::exact(NegInf));
                }
            }
        }
    }

    match h {
        FunctionExpr::Smooth(f) => {
            let g = f.gradient(zbar)?;
            let same = linalg::norm(&linalg::sub(zstar, &g)) <= EQ_TOL * (1.0 + linalg::norm(&g));
            if same {
                let q = f.scalarized_hessian_form(zbar, &[1.0], w)?;
                Ok(BoundedValue::exact(ExtReal::finite(q)))
            } else {
                // <z* - ∇f, w> = 0 with z* off the gradient.
                Ok(BoundedValue::exact(NegInf))
            }
        }
        FunctionExpr::Indicator(s) => curvature::indicator_curvature(s, zbar, zstar, w),
        FunctionExpr::EuclNorm(n) => {
            if linalg::norm(zbar) <= EQ_TOL {
                // At the origin: 0 on the subdifferential ball, -inf off it.
                if linalg::norm(zstar) <= 1.0 + EQ_TOL {
                    Ok(BoundedValue::exact(Finite(0.0)))
                } else {
                    Ok(BoundedValue::exact(NegInf))
                }
            } else {
                let smooth = euclnorm_smooth(*n, zbar);
                d2(&FunctionExpr::Smooth(smooth), zbar, zstar, w)
            }
        }
        FunctionExpr::VecMax(_) => {
            let active = FunctionExpr::vecmax_active(zbar);
            let in_subdiff = zstar.iter().all(|v| *v >= -EQ_TOL)
                && (zstar.iter().sum::<f64>() - 1.0).abs() <= EQ_TOL
                && zstar
                    .iter()
                    .enumerate()
                    .all(|(i, v)| active.contains(&i) || v.abs() <= EQ_TOL);
            if in_subdiff {
                Ok(BoundedValue::exact(Finite(0.0)))
            } else {
                Ok(BoundedValue::exact(NegInf))
            }
        }
        FunctionExpr::L0(_) => {
            let mut acc = Finite(0.0);
            for ((t, ts), r) in zbar.iter().zip(zstar).zip(w) {
                acc = acc.checked_add(l0_cell(*t, *ts, *r))?;
            }
            Ok(BoundedValue::exact(acc))
        }
        FunctionExpr::Dist(s) => d2_dist(s, zbar, zstar, w),
        FunctionExpr::SumSmooth { smooth, rest } => {
            let g = smooth.gradient(zbar)?;
            let shifted = linalg::sub(zstar, &g);
            let inner = d2(rest, zbar, &shifted, w)?;
            let q = smooth.scalarized_hessian_form(zbar, &[1.0], w)?;
            let value = inner.value.checked_add(ExtReal::finite(q))?;
            Ok(BoundedValue {
                value,
                kind: inner.kind,
                witness: inner.witness,
            })
        }
        FunctionExpr::SeparableSum(parts) => {
            // A separable sum of indicators is the indicator of a product.
            if parts
                .iter()
                .all(|p| matches!(p, FunctionExpr::Indicator(_)))
            {
                let sets: Vec<ClosedSet> = parts
                    .iter()
                    .map(|p| match p {
                        FunctionExpr::Indicator(s) => s.clone(),
                        _ => unreachable!(),
                    })
                    .collect();
                return curvature::indicator_curvature(
                    &ClosedSet::Product(sets),
                    zbar,
                    zstar,
                    w,
                );
            }
            let mut acc = Finite(0.0);
            let mut off = 0;
            let mut all_exact = true;
            for p in parts {
                let d = p.dim();
                let part = d2(p, &zbar[off..off + d], &zstar[off..off + d], &w[off..off + d])?;
                if !matches!(part.kind, Bound::Exact | Bound::LowerBound) {
                    return Err(CurvError::Unsupported(
                        "separable sum over upper-bounded parts",
                    ));
                }
                all_exact &= part.is_exact();
                acc = acc.checked_add(part.value)?;
                off += d;
            }
            let kind = if all_exact && parts.iter().all(|p| p.ladder_free()) {
                Bound::Exact
            } else {
                Bound::LowerBound
            };
            Ok(BoundedValue {
                value: acc,
                kind,
                witness: None,
            })
        }
        FunctionExpr::Compose { outer, inner } => d2_chain(outer, inner, zbar, zstar, w, &[]),
        FunctionExpr::MarginalFinite {
            objective,
            minimizers,
            v_grid,
            inner_calm_star,
            ..
        } => {
            let Some(ys) = minimizers.lookup(zbar, SET_TOL) else {
                return Err(CurvError::MissingCandidates);
            };
            let pairs: Vec<(Vec<f64>, Vec<Vec<f64>>)> = ys
                .iter()
                .map(|y| (y.clone(), marginal_v_candidates(v_grid, w, y.len())))
                .collect();
            d2_marginal_finite(objective, zbar, zstar, w, &pairs, *inner_calm_star)
        }
    }
}

/// Local smooth model of the Euclidean norm away from the origin.
fn euclnorm_smooth(n: usize, _at: &[f64]) -> SmoothMap {
    SmoothMap::new(
        n,
        1,
        |x| vec![linalg::norm(x)],
        |x| {
            let r = linalg::norm(x);
            vec![linalg::scale(x, 1.0 / r)]
        },
        move |x| {
            let r = linalg::norm(x);
            let mut h = vec![vec![0.0; n]; n];
            for i in 0..n {
                for j in 0..n {
                    let id = if i == j { 1.0 } else { 0.0 };
                    h[i][j] = (id - x[i] * x[j] / (r * r)) / r;
                }
            }
            vec![h]
        },
    )
}

/// `d²φ(t; t*)(r)` for the 0/1 counting atom of the l0 quasi-norm.
fn l0_cell(t: f64, tstar: f64, r: f64) -> ExtReal {
    let t_zero = t.abs() <= EQ_TOL;
    let r_zero = r.abs() <= EQ_TOL;
    let prod = if r_zero { 0.0 } else { tstar * r };
    if (!r_zero && prod < -EQ_TOL) || (t_zero && !r_zero) {
        PosInf
    } else if !t_zero && !r_zero && prod > EQ_TOL {
        NegInf
    } else {
        Finite(0.0)
    }
}

/// `d²δ_{R_-}(0; z*)(w)`: the scalar half-line table.
pub fn d2_indicator_scalar_halfline(zstar: f64, w: f64) -> ExtReal {
    curvature::halfline_table(zstar, w)
}

/// Union rule specialization (exact for polyhedral branches).
pub fn d2_indicator_polyunion(
    branches: &[PolyhedronF],
    zbar: &[f64],
    zstar: &[f64],
    w: &[f64],
) -> Result<BoundedValue> {
    curvature::indicator_curvature(
        &ClosedSet::PolyhedralUnion(branches.to_vec()),
        zbar,
        zstar,
        w,
    )
}

/// Product rule specialization.
pub fn d2_indicator_product(
    factors: &[ClosedSet],
    zbar: &[f64],
    zstar: &[f64],
    w: &[f64],
) -> Result<BoundedValue> {
    curvature::indicator_curvature(&ClosedSet::Product(factors.to_vec()), zbar, zstar, w)
}

/// Ice-cream cone closed form.
pub fn d2_indicator_soc(
    s: usize,
    ybar: &[f64],
    ystar: &[f64],
    v: &[f64],
) -> Result<BoundedValue> {
    curvature::indicator_curvature(
        &ClosedSet::Soc(SecondOrderCone::new(s)),
        ybar,
        ystar,
        v,
    )
}

/// Distance-function rule: `d²dist(·,S)(z̄; z*)(w) >= d²δ_S(z̄; z*)(w)`
/// for `|z*| <= 1`; never exact.
pub fn d2_dist(s: &ClosedSet, zbar: &[f64], zstar: &[f64], w: &[f64]) -> Result<BoundedValue> {
    if !s.member(zbar, SET_TOL)? {
        return Err(CurvError::InfeasibleBasePoint);
    }
    if linalg::norm(zstar) > 1.0 + EQ_TOL {
        return Err(CurvError::PreconditionViolated(
            "distance rule needs |z*| <= 1",
        ));
    }
    let ind = curvature::indicator_curvature(s, zbar, zstar, w)?;
    if !matches!(ind.kind, Bound::Exact | Bound::LowerBound) {
        return Err(CurvError::Unsupported(
            "distance rule over an upper-bounded indicator value",
        ));
    }
    Ok(BoundedValue::lower(ind.value))
}

/// Smooth chain rule: supremum of
/// `<y*, ∇²F(x̄)(u,u)> + d²g(F(x̄); y*)(∇F(x̄)u)` over multipliers with
/// `∇F(x̄)ᵀ y* = x*`. Exact under full row rank.
pub fn d2_chain(
    g: &FunctionExpr,
    f: &SmoothMap,
    xbar: &[f64],
    xstar: &[f64],
    u: &[f64],
    injected: &[Vec<f64>],
) -> Result<BoundedValue> {
    let fx = f.value(xbar)?;
    let jac = f.jacobian(xbar)?;
    let fu = linalg::mat_vec(&jac, u);
    let mut mults = enumerate_multipliers(&jac, xstar).unwrap_or_default();
    mults.extend(injected.iter().cloned());
    if mults.is_empty() {
        // sup over the empty multiplier set.
        return Ok(BoundedValue::lower(NegInf));
    }
    let exact_rank = full_row_rank(&jac);
    let mut best: Option<(ExtReal, bool, Vec<f64>)> = None;
    for ystar in &mults {
        let hterm = f.scalarized_hessian_form(xbar, ystar, u)?;
        let gterm = d2(g, &fx, ystar, &fu)?;
        if !matches!(gterm.kind, Bound::Exact | Bound::LowerBound) {
            continue;
        }
        let Ok(total) = gterm.value.checked_add(ExtReal::finite(hterm)) else {
            continue;
        };
        if best.as_ref().map_or(true, |(b, _, _)| total > *b) {
            best = Some((total, gterm.is_exact(), ystar.clone()));
        }
    }
    let Some((value, inner_exact, witness)) = best else {
        return Ok(BoundedValue::lower(NegInf));
    };
    let kind = if exact_rank && inner_exact {
        Bound::Exact
    } else {
        Bound::LowerBound
    };
    Ok(BoundedValue {
        value,
        kind,
        witness: Some(witness),
    })
}

/// Nonsmooth chain rule: lower bound
/// `d²<y*,F>(x̄; x*)(u) + d²g(F(x̄); y*)(v)` for a caller-supplied
/// direction `v` in the graphical derivative of `F`.
#[allow(clippy::too_many_arguments)]
pub fn d2_nonsmooth_chain(
    g: &FunctionExpr,
    scalarization: &FunctionExpr,
    f_at_xbar: &[f64],
    xbar: &[f64],
    xstar: &[f64],
    u: &[f64],
    ystar: &[f64],
    v: &[f64],
) -> Result<BoundedValue> {
    let sterm = d2(scalarization, xbar, xstar, u)?;
    let gterm = d2(g, f_at_xbar, ystar, v)?;
    if !matches!(sterm.kind, Bound::Exact | Bound::LowerBound)
        || !matches!(gterm.kind, Bound::Exact | Bound::LowerBound)
    {
        return Err(CurvError::Unsupported(
            "nonsmooth chain rule over upper-bounded terms",
        ));
    }
    let value = sterm.value.checked_add(gterm.value)?;
    Ok(BoundedValue::lower(value))
}

/// Pre-image rule: `d²δ_{F⁻¹(C)}` through the chain rule with `g = δ_C`.
pub fn d2_preimage(
    c: &ClosedSet,
    f: &SmoothMap,
    xbar: &[f64],
    xstar: &[f64],
    u: &[f64],
) -> Result<BoundedValue> {
    let set = ClosedSet::PreImage {
        map: f.clone(),
        inner: Box::new(c.clone()),
    };
    curvature::indicator_curvature(&set, xbar, xstar, u)
}

/// Image rule over explicit `(z, v)` candidate pairs with `G(z) = x̄` and
/// `∇G(z) v = u`; an upper bound, exact over the candidates when inner
/// calmness* is declared and `<x*, u> = 0`.
#[allow(clippy::too_many_arguments)]
pub fn d2_image(
    q: &ClosedSet,
    g: &SmoothMap,
    xbar: &[f64],
    xstar: &[f64],
    u: &[f64],
    pairs: &[(Vec<f64>, Vec<f64>)],
    inner_semicompact: bool,
    inner_calm_star: bool,
) -> Result<BoundedValue> {
    if !inner_semicompact {
        return Err(CurvError::AssumptionNotDeclared("inner_semicompact"));
    }
    if pairs.is_empty() {
        return Err(CurvError::MissingCandidates);
    }
    let pairing = linalg::dot(xstar, u);
    if pairing < -SET_TOL {
        return Ok(BoundedValue::exact(PosInf));
    }
    let mut best: Option<(ExtReal, Vec<f64>)> = None;
    for (z, v) in pairs {
        let gz = g.value(z)?;
        let jv = linalg::mat_vec(&g.jacobian(z)?, v);
        if linalg::norm(&linalg::sub(&gz, xbar)) > 1e-7
            || linalg::norm(&linalg::sub(&jv, u)) > 1e-7
        {
            return Err(CurvError::PreconditionViolated(
                "image candidate must satisfy G(z) = x̄ and ∇G(z) v = u",
            ));
        }
        let gt_xstar = linalg::mat_t_vec(&g.jacobian(z)?, xstar);
        let hterm = -g.scalarized_hessian_form(z, xstar, v)?;
        let qterm = curvature::indicator_curvature(q, z, &gt_xstar, v)?;
        if !matches!(
            qterm.kind,
            Bound::Exact | Bound::UpperBound | Bound::ExactOverCandidates
        ) {
            continue;
        }
        let Ok(total) = qterm.value.checked_add(ExtReal::finite(hterm)) else {
            continue;
        };
        if best.as_ref().map_or(true, |(b, _)| total < *b) {
            best = Some((total, z.clone()));
        }
    }
    let Some((value, witness)) = best else {
        return Err(CurvError::MissingCandidates);
    };
    let kind = if inner_calm_star && pairing.abs() <= SET_TOL && value.is_finite() {
        Bound::ExactOverCandidates
    } else {
        Bound::UpperBound
    };
    Ok(BoundedValue {
        value,
        kind,
        witness: Some(witness),
    })
}

/// Marginal rule over explicit minimizer candidates and direction grids:
/// an upper bound `inf_{y, v} d²φ((x̄,y); (x*,0))(u,v)`.
pub fn d2_marginal_finite(
    phi: &FunctionExpr,
    xbar: &[f64],
    xstar: &[f64],
    u: &[f64],
    pairs: &[(Vec<f64>, Vec<Vec<f64>>)],
    inner_calm_star: bool,
) -> Result<BoundedValue> {
    if pairs.is_empty() {
        return Err(CurvError::MissingCandidates);
    }
    let mut best: Option<ExtReal> = None;
    for (y, vs) in pairs {
        let mut zy = xbar.to_vec();
        zy.extend_from_slice(y);
        let mut star = xstar.to_vec();
        star.extend_from_slice(&vec![0.0; y.len()]);
        for v in vs {
            let mut uv = u.to_vec();
            uv.extend_from_slice(v);
            let t = d2(phi, &zy, &star, &uv)?;
            if !matches!(
                t.kind,
                Bound::Exact | Bound::UpperBound | Bound::ExactOverCandidates
            ) {
                continue;
            }
            if best.map_or(true, |b| t.value < b) {
                best = Some(t.value);
            }
        }
    }
    let Some(value) = best else {
        return Err(CurvError::MissingCandidates);
    };
    let kind = if inner_calm_star {
        Bound::ExactOverCandidates
    } else {
        Bound::UpperBound
    };
    Ok(BoundedValue {
        value,
        kind,
        witness: None,
    })
}

/// Graph-indicator rule: `d²δ_{gph F}((x̄,ȳ); (x*,y*))(u,v)` bounded
/// below by the scalarization `d²<-y*, F>(x̄; x*)(u)`; exact when
/// `v = ∇F(x̄)u`.
pub fn d2_graph_indicator(
    f: &SmoothMap,
    xbar: &[f64],
    ybar: &[f64],
    xstar: &[f64],
    ystar: &[f64],
    u: &[f64],
    v: &[f64],
) -> Result<BoundedValue> {
    let fx = f.value(xbar)?;
    if linalg::norm(&linalg::sub(&fx, ybar)) > 1e-7 {
        return Err(CurvError::InfeasibleBasePoint);
    }
    let jac = f.jacobian(xbar)?;
    let neg_ystar: Vec<f64> = ystar.iter().map(|x| -x).collect();
    let grad = linalg::mat_t_vec(&jac, &neg_ystar);
    let slope = linalg::dot(&grad, u);
    let pairing = linalg::dot(xstar, u);
    let value = if slope > pairing + EQ_TOL {
        BoundedValue::exact(PosInf)
    } else if slope < pairing - EQ_TOL {
        BoundedValue::exact(NegInf)
    } else {
        let same =
            linalg::norm(&linalg::sub(xstar, &grad)) <= EQ_TOL * (1.0 + linalg::norm(&grad));
        if same {
            let q = f.scalarized_hessian_form(xbar, &neg_ystar, u)?;
            BoundedValue::exact(ExtReal::finite(q))
        } else {
            BoundedValue::exact(NegInf)
        }
    };
    let tangent_v = linalg::norm(&linalg::sub(&linalg::mat_vec(&jac, u), v)) <= 1e-7;
    if value.value == PosInf || tangent_v {
        Ok(value)
    } else {
        Ok(value.downgrade(Bound::LowerBound))
    }
}

/// Membership in the directional proximal (pre-)subdifferential:
/// `d²h(z̄; z*)(w) > -inf` characterizes the pre-subdifferential; the
/// plain subdifferential additionally pins `<z*, w> = dh(z̄)(w)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SubdiffMode {
    Pre,
    Plain,
}

pub fn proximal_subdiff_member(
    h: &FunctionExpr,
    zbar: &[f64],
    w: &[f64],
    zstar: &[f64],
    mode: SubdiffMode,
) -> Result<Ternary> {
    let dsub = subderivative(h, zbar, w)?;
    match dsub.kind {
        Bound::Exact => {
            if !dsub.value.is_finite() {
                return Ok(Ternary::No);
            }
        }
        Bound::LowerBound => {
            if dsub.value == PosInf {
                return Ok(Ternary::No);
            }
            return Ok(Ternary::Unknown);
        }
        _ => return Ok(Ternary::Unknown),
    }
    if mode == SubdiffMode::Plain {
        let pairing = linalg::dot(zstar, w);
        if (dsub.value.as_f64() - pairing).abs() > EQ_TOL {
            return Ok(Ternary::No);
        }
    }
    let curv = d2(h, zbar, zstar, w)?;
    if curv.certifies_above_neg_inf() {
        Ok(Ternary::Yes)
    } else if curv.certifies_neg_inf() {
        Ok(Ternary::No)
    } else {
        Ok(Ternary::Unknown)
    }
}

#[cfg(test)]
mod tests;
