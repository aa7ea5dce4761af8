//! Second subderivative of set indicator functions.
//!
//! For a closed set `S`, `d²δ_S(z̄; z*)(w)` measures the curvature of `S`
//! at `z̄` against the normal candidate `z*`. Polyhedral atoms have a
//! zero-if-finite closed form, the second-order cone has an explicit
//! curvature formula, and pre-image/image atoms reduce through the chain
//! and image rules with one-sided exactness tags.

use crate::bound::{Bound, BoundedValue};
use crate::error::{CurvError, Result};
use crate::extreal::{ExtReal, Finite, NegInf, PosInf};
use crate::linalg;
use crate::sets::{circ_norm, BoxSet, ClosedSet, PolyhedronF, SecondOrderCone, SocLocation, SET_TOL};
use crate::smooth::SmoothMap;

/// `d²δ_{R_-}(0; z*)(w)` on the non-positive half-line.
pub fn halfline_table(zstar: f64, w: f64) -> ExtReal {
    if w > 0.0 || zstar * w < 0.0 {
        PosInf
    } else if zstar >= 0.0 && w <= 0.0 && zstar * w == 0.0 {
        Finite(0.0)
    } else {
        NegInf
    }
}

/// `d²δ_S(z̄; z*)(w)` with an exactness tag.
pub fn indicator_curvature(
    set: &ClosedSet,
    zbar: &[f64],
    zstar: &[f64],
    w: &[f64],
) -> Result<BoundedValue> {
    if !set.member(zbar, SET_TOL)? {
        return Err(CurvError::InfeasibleBasePoint);
    }
    let tangent = set.tangent_member(zbar, w)?;
    if tangent.certifies_not_tangent() {
        return Ok(BoundedValue::exact(PosInf));
    }
    let pairing = linalg::dot(zstar, w);
    if pairing < -SET_TOL {
        return Ok(BoundedValue::exact(PosInf));
    }
    if tangent.certifies_tangent() && pairing > SET_TOL {
        // dδ_S(z̄)(w) = 0 < <z*, w> forces the value -inf.
        return Ok(BoundedValue::exact(NegInf));
    }

    match set {
        ClosedSet::Polyhedron(p) => polyhedron_curvature(p, zbar, zstar, w),
        ClosedSet::Box(b) => polyhedron_curvature(&b.to_polyhedron(), zbar, zstar, w),
        ClosedSet::PolyhedralUnion(ps) => union_curvature(ps, zbar, zstar, w),
        ClosedSet::Soc(c) => soc_curvature(c, zbar, zstar, w),
        ClosedSet::Product(fs) => product_curvature(set, fs, zbar, zstar, w),
        ClosedSet::PreImage { map, inner } => preimage_curvature(inner, map, zbar, zstar, w),
        ClosedSet::Image {
            map,
            inner,
            candidates,
            inner_semicompact,
            inner_calm_star,
        } => {
            let Some(pre) = candidates.lookup(zbar, SET_TOL) else {
                return Err(CurvError::MissingCandidates);
            };
            image_curvature(
                inner,
                map,
                zstar,
                w,
                pre,
                *inner_semicompact,
                *inner_calm_star,
            )
        }
    }
}

/// Convex polyhedral case: zero iff `z* ∈ N_{T_P(z̄)}(w)`, else `-inf`.
///
/// Caller has established `w ∈ T_P(z̄)` and `<z*, w> = 0`.
fn polyhedron_curvature(
    p: &PolyhedronF,
    zbar: &[f64],
    zstar: &[f64],
    w: &[f64],
) -> Result<BoundedValue> {
    if p.normal_of_tangent_member(zbar, w, zstar)? {
        Ok(BoundedValue::exact(Finite(0.0)))
    } else {
        Ok(BoundedValue::exact(NegInf))
    }
}

/// Union rule: infimum over branches whose tangent cone contains `w`.
fn union_curvature(
    branches: &[PolyhedronF],
    zbar: &[f64],
    zstar: &[f64],
    w: &[f64],
) -> Result<BoundedValue> {
    let mut best = PosInf;
    for p in branches {
        if !p.member(zbar)? || !p.tangent_member(zbar, w)? {
            continue;
        }
        let v = polyhedron_curvature(p, zbar, zstar, w)?.value;
        if v < best {
            best = v;
        }
    }
    Ok(BoundedValue::exact(best))
}

/// The four-case closed form for the ice-cream cone.
fn soc_curvature(
    cone: &SecondOrderCone,
    ybar: &[f64],
    ystar: &[f64],
    v: &[f64],
) -> Result<BoundedValue> {
    match cone.classify(ybar)? {
        SocLocation::Interior => {
            if linalg::norm(ystar) <= SET_TOL {
                Ok(BoundedValue::exact(Finite(0.0)))
            } else {
                Ok(BoundedValue::exact(NegInf))
            }
        }
        SocLocation::Apex => {
            // y* ∈ -Q_s ∩ {v}^⊥ with v ∈ Q_s gives zero; pairing and
            // tangency were already screened.
            let reflected: Vec<f64> = ystar.iter().map(|x| -x).collect();
            if cone.member(&reflected, SET_TOL)? {
                Ok(BoundedValue::exact(Finite(0.0)))
            } else {
                Ok(BoundedValue::exact(NegInf))
            }
        }
        SocLocation::Boundary => {
            let beta = -ystar[0];
            let q = cone.q_dir(ybar);
            let on_ray = beta >= -SET_TOL && {
                let resid: Vec<f64> =
                    ystar.iter().zip(&q).map(|(a, b)| a - beta * b).collect();
                linalg::norm(&resid) <= SET_TOL * (1.0 + linalg::norm(ystar))
            };
            if on_ray {
                let factor = linalg::norm(ystar) / linalg::norm(ybar);
                let curv = circ_norm(v).powi(2) - v[0] * v[0];
                Ok(BoundedValue::exact(ExtReal::finite(factor * curv)))
            } else {
                // Off the normal ray the closed form only bounds from
                // below; the value is never reported as exactly -inf.
                Ok(BoundedValue::lower(NegInf))
            }
        }
    }
}

/// Product rule: exact through the flattened polyhedron when every factor
/// is convex polyhedral; otherwise the extended-real sum of factor values.
fn product_curvature(
    set: &ClosedSet,
    factors: &[ClosedSet],
    zbar: &[f64],
    zstar: &[f64],
    w: &[f64],
) -> Result<BoundedValue> {
    if let Some(poly) = set.to_polyhedron() {
        return polyhedron_curvature(&poly, zbar, zstar, w);
    }
    let mut off = 0;
    let mut total = Finite(0.0);
    let mut all_exact = true;
    for f in factors {
        let d = f.dim();
        let part = indicator_curvature(
            f,
            &zbar[off..off + d],
            &zstar[off..off + d],
            &w[off..off + d],
        )?;
        off += d;
        match part.kind {
            Bound::Exact => {}
            Bound::LowerBound => all_exact = false,
            _ => {
                return Err(CurvError::Unsupported(
                    "product factor with upper-bounded curvature",
                ))
            }
        }
        total = total.checked_add(part.value)?;
    }
    // Exact factor values on these atoms are attained along radially
    // scaled sequences for every scale ladder, so the blocks merge and
    // the determinate sum is exact.
    let kind = if all_exact {
        Bound::Exact
    } else {
        Bound::LowerBound
    };
    Ok(BoundedValue {
        value: total,
        kind,
        witness: None,
    })
}

/// Candidate multipliers for `∇F(x̄)ᵀ y* = x*`: the least-squares
/// particular solution plus null-space perturbations, capped at 32.
pub fn enumerate_multipliers(jac: &[Vec<f64>], xstar: &[f64]) -> Option<Vec<Vec<f64>>> {
    let m = jac.len();
    let n = jac.first().map_or(0, |r| r.len());
    let mut jt = vec![vec![0.0; m]; n];
    for i in 0..m {
        for j in 0..n {
            jt[j][i] = jac[i][j];
        }
    }
    let sol = linalg::solve_affine(&jt, xstar, 1e-7)?;
    let mut out = vec![sol.particular.clone()];
    for b in &sol.basis {
        for s in [1.0, -1.0, 0.5, -0.5] {
            out.push(linalg::axpy(&sol.particular, s, b));
        }
    }
    // A few fixed mixed combinations of the null-space basis.
    if sol.basis.len() >= 2 {
        let weights = [0.3, -0.7, 1.3, 2.0, -1.9, 0.9];
        for (chunk, start) in [(0usize, 0usize), (1, 2), (2, 4)] {
            let _ = chunk;
            let mut v = sol.particular.clone();
            for (k, b) in sol.basis.iter().enumerate() {
                v = linalg::axpy(&v, weights[(start + k) % weights.len()], b);
            }
            out.push(v);
        }
    }
    out.truncate(32);
    Some(out)
}

pub fn full_row_rank(jac: &[Vec<f64>]) -> bool {
    linalg::rank(jac) == jac.len()
}

/// Pre-image rule: supremum of the Lagrangian curvature over finitely
/// many multipliers; exact under full row rank of the Jacobian.
fn preimage_curvature(
    inner: &ClosedSet,
    map: &SmoothMap,
    xbar: &[f64],
    xstar: &[f64],
    u: &[f64],
) -> Result<BoundedValue> {
    let fx = map.value(xbar)?;
    let jac = map.jacobian(xbar)?;
    let fu = linalg::mat_vec(&jac, u);
    let Some(mults) = enumerate_multipliers(&jac, xstar) else {
        // sup over an empty multiplier set: a vacuous lower bound.
        return Ok(BoundedValue::lower(NegInf));
    };
    let exact_rank = full_row_rank(&jac);
    let mut best: Option<(ExtReal, bool, Vec<f64>)> = None;
    for ystar in &mults {
        let hterm = map.scalarized_hessian_form(xbar, ystar, u)?;
        let inner_val = indicator_curvature(inner, &fx, ystar, &fu)?;
        let sound = matches!(inner_val.kind, Bound::Exact | Bound::LowerBound);
        if !sound {
            continue;
        }
        let Ok(total) = Finite(hterm).checked_add(inner_val.value) else {
            continue;
        };
        let replace = best.as_ref().map_or(true, |(b, _, _)| total > *b);
        if replace {
            best = Some((total, inner_val.is_exact(), ystar.clone()));
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

/// Image rule: minimum of the lifted curvature over candidate pre-images
/// `(z, v)` with `∇G(z) v = u`. Always an upper bound; exact over the
/// candidates when inner calmness* is declared and `<x*, u> = 0`.
pub fn image_curvature(
    inner: &ClosedSet,
    map: &SmoothMap,
    xstar: &[f64],
    u: &[f64],
    pre_candidates: &[Vec<f64>],
    inner_semicompact: bool,
    inner_calm_star: bool,
) -> Result<BoundedValue> {
    if !inner_semicompact {
        return Err(CurvError::AssumptionNotDeclared("inner_semicompact"));
    }
    if pre_candidates.is_empty() {
        return Err(CurvError::MissingCandidates);
    }
    let pairing = linalg::dot(xstar, u);
    if pairing < -SET_TOL {
        return Ok(BoundedValue::exact(PosInf));
    }
    let mut best: Option<(ExtReal, Vec<f64>)> = None;
    let mut any_term = false;
    for z in pre_candidates {
        let jac = map.jacobian(z)?;
        let gt_xstar = linalg::mat_t_vec(&jac, xstar);
        let Some(sol) = linalg::solve_affine(&jac, u, 1e-7) else {
            continue;
        };
        let mut vs = vec![sol.particular.clone()];
        for b in &sol.basis {
            for s in [1.0, -1.0, 0.5, -0.5] {
                vs.push(linalg::axpy(&sol.particular, s, b));
            }
        }
        vs.truncate(16);
        for v in vs {
            let hterm = -map.scalarized_hessian_form(z, xstar, &v)?;
            let inner_val = indicator_curvature(inner, z, &gt_xstar, &v)?;
            if !matches!(
                inner_val.kind,
                Bound::Exact | Bound::UpperBound | Bound::ExactOverCandidates
            ) {
                continue;
            }
            let Ok(total) = Finite(hterm).checked_add(inner_val.value) else {
                continue;
            };
            any_term = true;
            if best.as_ref().map_or(true, |(b, _)| total < *b) {
                best = Some((total, z.clone()));
            }
        }
    }
    if !any_term {
        return Err(CurvError::MissingCandidates);
    }
    let (value, witness) = best.expect("some term was recorded");
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

/// Curvature of the box through its polyhedral representation.
pub fn box_curvature(b: &BoxSet, zbar: &[f64], zstar: &[f64], w: &[f64]) -> Result<BoundedValue> {
    indicator_curvature(&ClosedSet::Box(b.clone()), zbar, zstar, w)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::smooth::PolyForm;

    fn halfline() -> ClosedSet {
        ClosedSet::halfline_nonpositive()
    }

    #[test]
    fn halfline_table_cells() {
        // w > 0 or z* w < 0 is +inf.
        assert_eq!(halfline_table(1.0, -1.0), PosInf);
        assert_eq!(halfline_table(0.0, 1.0), PosInf);
        // z* >= 0, w <= 0, z* w = 0 is 0.
        assert_eq!(halfline_table(1.0, 0.0), Finite(0.0));
        assert_eq!(halfline_table(0.0, -2.0), Finite(0.0));
        assert_eq!(halfline_table(0.0, 0.0), Finite(0.0));
        // otherwise -inf.
        assert_eq!(halfline_table(-1.0, -1.0), NegInf);
        assert_eq!(halfline_table(-1.0, 0.0), NegInf);
    }

    #[test]
    fn polyhedral_dispatch_matches_table() {
        let h = halfline();
        for zs in [-2.0, -1.0, 0.0, 0.5, 1.0, 3.0] {
            for w in [-2.0, -1.0, 0.0, 0.5, 1.0, 3.0] {
                let got = indicator_curvature(&h, &[0.0], &[zs], &[w]).unwrap();
                assert_eq!(got.value, halfline_table(zs, w), "z*={zs} w={w}");
                assert!(got.is_exact());
            }
        }
    }

    #[test]
    fn union_curvature_cases() {
        let b1 = PolyhedronF::with_equalities(
            vec![vec![-1.0, 0.0]],
            vec![0.0],
            vec![vec![0.0, 1.0]],
            vec![0.0],
        );
        let b2 = PolyhedronF::with_equalities(
            vec![vec![0.0, -1.0]],
            vec![0.0],
            vec![vec![1.0, 0.0]],
            vec![0.0],
        );
        let s = ClosedSet::PolyhedralUnion(vec![b1, b2]);
        let zero = [0.0, 0.0];
        let got = indicator_curvature(&s, &zero, &zero, &[1.0, 0.0]).unwrap();
        assert_eq!(got.value, Finite(0.0));
        assert!(got.is_exact());
        let inf = indicator_curvature(&s, &zero, &zero, &[1.0, 1.0]).unwrap();
        assert_eq!(inf.value, PosInf);
    }

    #[test]
    fn soc_boundary_formula() {
        let q3 = ClosedSet::Soc(SecondOrderCone::new(3));
        let y = [1.0, 1.0, 0.0];
        let qd = [-1.0, 1.0, 0.0];
        let v = [1.0, 1.0, 1.0];
        let got = indicator_curvature(&q3, &y, &qd, &v).unwrap();
        // (|y*| / |y|)(⫴v⫴² - v1²) = (√2/√2)(2 - 1) = 1.
        assert!(got.is_exact());
        assert!((got.value.as_f64() - 1.0).abs() < 1e-12);

        // Interior and apex zero cases.
        let interior = indicator_curvature(&q3, &[2.0, 0.0, 0.0], &[0.0; 3], &[5.0, 1.0, 2.0])
            .unwrap();
        assert_eq!(interior.value, Finite(0.0));
        let apex = indicator_curvature(&q3, &[0.0; 3], &[0.0; 3], &[1.0, 0.0, 0.0]).unwrap();
        assert_eq!(apex.value, Finite(0.0));
        assert!(apex.is_exact());

        // Off the normal ray with zero pairing: only a lower bound.
        let off = indicator_curvature(&q3, &y, &[0.0, 0.0, 1.0], &[1.0, 1.0, 0.0]).unwrap();
        assert_eq!(off.kind, Bound::LowerBound);
        assert_eq!(off.value, NegInf);
    }

    #[test]
    fn product_of_halflines() {
        let s = ClosedSet::Product(vec![halfline(), halfline()]);
        let got = indicator_curvature(&s, &[0.0, 0.0], &[1.0, 1.0], &[0.0, 0.0]).unwrap();
        assert_eq!(got.value, Finite(0.0));
        assert!(got.is_exact());
        // First factor infinite absorbs.
        let inf = indicator_curvature(&s, &[0.0, 0.0], &[1.0, 0.0], &[1.0, 0.0]).unwrap();
        assert_eq!(inf.value, PosInf);
    }

    #[test]
    fn product_halfline_with_interior_soc() {
        let s = ClosedSet::Product(vec![
            halfline(),
            ClosedSet::Soc(SecondOrderCone::new(3)),
        ]);
        // Base ((0), (2,0,0)): second block interior.
        let got = indicator_curvature(
            &s,
            &[0.0, 2.0, 0.0, 0.0],
            &[1.0, 0.0, 0.0, 0.0],
            &[0.0, 1.0, 0.0, 0.0],
        )
        .unwrap();
        assert_eq!(got.value, Finite(0.0));
        assert!(got.is_exact());
    }

    #[test]
    fn disc_preimage_curvature() {
        // S = {x : x1² + x2² - 1 <= 0} at (1,0); x* = ∇F(1,0)ᵀ·1 = (2,0).
        let f = PolyForm::to_smooth_map(&[PolyForm::Quadratic {
            q: vec![vec![2.0, 0.0], vec![0.0, 2.0]],
            a: vec![0.0, 0.0],
            c: -1.0,
        }]);
        let s = ClosedSet::PreImage {
            map: f,
            inner: Box::new(halfline()),
        };
        let got = indicator_curvature(&s, &[1.0, 0.0], &[2.0, 0.0], &[0.0, 1.0]).unwrap();
        assert!(got.is_exact(), "full row rank gives equality");
        assert_eq!(got.value, Finite(2.0));
        // Non-tangent direction with full row rank: exactly +inf.
        let inf = indicator_curvature(&s, &[1.0, 0.0], &[2.0, 0.0], &[1.0, 0.0]).unwrap();
        assert_eq!(inf.value, PosInf);
    }

    #[test]
    fn image_rule_linear_map() {
        // Q = [0,1]², G(y) = y1 + y2, x̄ = 0, candidate z = (0,0).
        let g = PolyForm::to_smooth_map(&[PolyForm::Affine {
            a: vec![1.0, 1.0],
            b: 0.0,
        }]);
        let q = ClosedSet::Box(BoxSet::new(vec![0.0, 0.0], vec![1.0, 1.0]));
        let got = image_curvature(
            &q,
            &g,
            &[0.0],
            &[1.0],
            &[vec![0.0, 0.0]],
            true,
            true,
        )
        .unwrap();
        assert_eq!(got.value, Finite(0.0));
        assert_eq!(got.kind, Bound::ExactOverCandidates);

        // <x*, u> < 0 forces +inf.
        let inf = image_curvature(&q, &g, &[-1.0], &[1.0], &[vec![0.0, 0.0]], true, true)
            .unwrap();
        assert_eq!(inf.value, PosInf);

        let missing = image_curvature(&q, &g, &[0.0], &[1.0], &[], true, true);
        assert_eq!(missing, Err(CurvError::MissingCandidates));
    }
}
