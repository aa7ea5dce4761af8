//! Per-direction multiplier searches.
//!
//! The multiplier cone `N̂ᵖ_C(F(x̄); ∇F(x̄)u)` is parametrized block-wise:
//! polyhedral pieces by their doubly-active row generators, ice-cream cone
//! boundaries by the scaled normal ray (which makes the curvature summand
//! linear in the ray coefficient), interiors by zero. The strict
//! inequality is handled through positive homogeneity: feasibility of
//! "value >= 1" over the multiplier cone, decided by exact rational LP.

use num_traits::Zero;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::bound::Bound;
use crate::error::{CurvError, Result};
use crate::extreal::{ExtReal, Finite};
use crate::linalg;
use crate::lp::RationalLp;
use crate::scalar::{Rational, Scalar};
use crate::sets::{circ_norm, ClosedSet, SocLocation, SET_TOL};
use crate::subderiv::{self, FunctionExpr};

use super::{
    critical_cone_member, multiplier_checks, multiplier_space, soc_blocks, DirectionCertificate,
    ExactWitness, ProblemInstance, ProblemKind, VALUE_MARGIN,
};

#[derive(Clone, Debug)]
pub enum Strategy {
    /// Exact rational LP over the block-parametrized multiplier cone.
    Lp,
    FixedMultiplier(f64, Vec<f64>),
    SuppliedList(Vec<(f64, Vec<f64>)>),
}

/// Block-wise parametrization of a directional proximal normal cone.
#[derive(Clone, Debug)]
pub(crate) enum BlockParam {
    /// Intersection over branches of finitely generated cones:
    /// `η_block = gensᵀμ_i + linesᵀν_i` must hold for every branch `i`.
    PolyBranches {
        dim: usize,
        branches: Vec<(Vec<Vec<f64>>, Vec<Vec<f64>>)>,
    },
    /// `η_block = β · dir` with `β >= 0`; `curvature` is the set-curvature
    /// contribution per unit `β`.
    Ray {
        dim: usize,
        dir: Vec<f64>,
        curvature: f64,
    },
    /// Apex blocks: a finite candidate ray set (searched one at a time).
    RayChoices { dim: usize, dirs: Vec<Vec<f64>> },
    Zero { dim: usize },
    /// The cone is empty (direction outside the tangent cone).
    Empty,
}

/// Parametrizes `N̂ᵖ_S(y; v)` for the supported atoms. The caller must
/// have established `y ∈ S`.
pub(crate) fn normal_cone_blocks(set: &ClosedSet, y: &[f64], v: &[f64]) -> Result<Vec<BlockParam>> {
    match set {
        ClosedSet::Polyhedron(p) => {
            if !p.tangent_member(y, v)? {
                return Ok(vec![BlockParam::Empty]);
            }
            let idx = p.doubly_active_set(y, v)?;
            let (rows, _) = p.ineq_rows();
            let gens: Vec<Vec<f64>> = idx.iter().map(|&i| rows[i].clone()).collect();
            let (eq_rows, _) = p.eq_rows();
            Ok(vec![BlockParam::PolyBranches {
                dim: p.dim(),
                branches: vec![(gens, eq_rows.to_vec())],
            }])
        }
        ClosedSet::Box(b) => normal_cone_blocks(&ClosedSet::Polyhedron(b.to_polyhedron()), y, v),
        ClosedSet::PolyhedralUnion(ps) => {
            let dim = ps[0].dim();
            let mut branches = Vec::new();
            for p in ps {
                if p.member(y)? && p.tangent_member(y, v)? {
                    let idx = p.doubly_active_set(y, v)?;
                    let (rows, _) = p.ineq_rows();
                    let gens: Vec<Vec<f64>> = idx.iter().map(|&i| rows[i].clone()).collect();
                    let (eq_rows, _) = p.eq_rows();
                    branches.push((gens, eq_rows.to_vec()));
                }
            }
            if branches.is_empty() {
                return Ok(vec![BlockParam::Empty]);
            }
            Ok(vec![BlockParam::PolyBranches { dim, branches }])
        }
        ClosedSet::Soc(q) => {
            if !q.tangent_member(y, v)? {
                return Ok(vec![BlockParam::Empty]);
            }
            match q.classify(y)? {
                SocLocation::Interior => Ok(vec![BlockParam::Zero { dim: q.dim() }]),
                SocLocation::Boundary => {
                    // λ = β (-(y_1), y_2, …, y_s): with this scaling
                    // |λ| / |y| = β exactly, so the boundary curvature
                    // summand is β (⫴v⫴² - v_1²).
                    let mut dir = y.to_vec();
                    dir[0] = -y[0];
                    if linalg::dot(&dir, v).abs() > SET_TOL {
                        // The annihilator forces β = 0.
                        return Ok(vec![BlockParam::Zero { dim: q.dim() }]);
                    }
                    let curvature = circ_norm(v).powi(2) - v[0] * v[0];
                    Ok(vec![BlockParam::Ray {
                        dim: q.dim(),
                        dir,
                        curvature,
                    }])
                }
                SocLocation::Apex => {
                    let dirs = apex_rays(q.dim(), v);
                    if dirs.is_empty() {
                        Ok(vec![BlockParam::Zero { dim: q.dim() }])
                    } else {
                        Ok(vec![BlockParam::RayChoices { dim: q.dim(), dirs }])
                    }
                }
            }
        }
        ClosedSet::Product(fs) => {
            let mut blocks = Vec::new();
            let mut off = 0;
            for f in fs {
                let d = f.dim();
                blocks.extend(normal_cone_blocks(f, &y[off..off + d], &v[off..off + d])?);
                off += d;
            }
            Ok(blocks)
        }
        _ => Err(CurvError::Unsupported(
            "multiplier cone parametrization for pre-image or image atoms",
        )),
    }
}

/// Candidate rays spanning `-Q_s ∩ {v}^⊥` at the apex.
///
/// For boundary `v` the intersection is the single reflected ray; for
/// `v = 0` it is the whole polar cone, sampled deterministically. This
/// search is incomplete by construction.
fn apex_rays(s: usize, v: &[f64]) -> Vec<Vec<f64>> {
    let vn = linalg::norm(v);
    if vn <= SET_TOL {
        let mut rng = ChaCha8Rng::seed_from_u64(0xa93c_5b01);
        let mut out = Vec::with_capacity(64);
        for _ in 0..64 {
            let mut tail: Vec<f64> = (0..s - 1)
                .map(|_| rng.gen_range(-1.0f64..1.0))
                .collect();
            let tn = linalg::norm(&tail);
            if tn < 1e-9 {
                continue;
            }
            for t in tail.iter_mut() {
                *t /= tn;
            }
            let mut ray = vec![-1.0];
            ray.extend(tail);
            out.push(ray);
        }
        return out;
    }
    let cone = crate::sets::SecondOrderCone::new(s);
    let interiorish = circ_norm(v) < v[0] - SET_TOL;
    if interiorish {
        return Vec::new();
    }
    // Boundary v: the reflected ray is orthogonal and polar.
    let mut r = v.to_vec();
    r[0] = -v[0];
    let ok = cone
        .member(&r.iter().map(|x| -x).collect::<Vec<_>>(), SET_TOL)
        .unwrap_or(false);
    if ok && linalg::dot(&r, v).abs() <= SET_TOL * (1.0 + vn * vn) {
        vec![r]
    } else {
        Vec::new()
    }
}

/// One concrete instantiation after apex-ray choices are fixed.
#[derive(Clone, Debug)]
enum ConcreteBlock {
    PolyBranches {
        dim: usize,
        branches: Vec<(Vec<Vec<f64>>, Vec<Vec<f64>>)>,
    },
    Ray {
        dim: usize,
        dir: Vec<f64>,
        curvature: f64,
    },
    Zero {
        dim: usize,
    },
}

fn concretize(blocks: &[BlockParam]) -> Option<Vec<Vec<ConcreteBlock>>> {
    let mut combos: Vec<Vec<ConcreteBlock>> = vec![Vec::new()];
    for b in blocks {
        match b {
            BlockParam::Empty => return None,
            BlockParam::PolyBranches { dim, branches } => {
                for c in &mut combos {
                    c.push(ConcreteBlock::PolyBranches {
                        dim: *dim,
                        branches: branches.clone(),
                    });
                }
            }
            BlockParam::Ray {
                dim,
                dir,
                curvature,
            } => {
                for c in &mut combos {
                    c.push(ConcreteBlock::Ray {
                        dim: *dim,
                        dir: dir.clone(),
                        curvature: *curvature,
                    });
                }
            }
            BlockParam::Zero { dim } => {
                for c in &mut combos {
                    c.push(ConcreteBlock::Zero { dim: *dim });
                }
            }
            BlockParam::RayChoices { dim, dirs } => {
                let mut next = Vec::new();
                for c in &combos {
                    for d in dirs {
                        if next.len() >= 64 {
                            break;
                        }
                        let mut cc = c.clone();
                        cc.push(ConcreteBlock::Ray {
                            dim: *dim,
                            dir: d.clone(),
                            curvature: 0.0,
                        });
                        next.push(cc);
                    }
                }
                combos = next;
            }
        }
    }
    Some(combos)
}

/// Multiplier variables for one cone in one LP: the explicit vector
/// components plus the parametrization rows tying them to block variables.
struct ConeVars {
    /// Index of the first component of the multiplier vector.
    start: usize,
    dim: usize,
    /// `(variable index, per-unit curvature)` for ray blocks.
    ray_curvatures: Vec<(usize, f64)>,
}

fn install_cone(lp: &mut RationalLp, blocks: &[ConcreteBlock]) -> ConeVars {
    let dim: usize = blocks.iter().map(|b| block_dim(b)).sum();
    let start = lp.num_vars();
    for _ in 0..dim {
        lp.add_var(false);
    }
    let mut ray_curvatures = Vec::new();
    let mut off = 0usize;
    for b in blocks {
        match b {
            ConcreteBlock::Zero { dim: d } => {
                for i in 0..*d {
                    let mut row = vec![Rational::zero(); lp.num_vars()];
                    row[start + off + i] = Rational::lift(1.0);
                    lp.add_eq(row, Rational::zero());
                }
                off += d;
            }
            ConcreteBlock::Ray {
                dim: d,
                dir,
                curvature,
            } => {
                let beta = lp.add_var(true);
                for i in 0..*d {
                    let mut row = vec![Rational::zero(); lp.num_vars()];
                    row[start + off + i] = Rational::lift(1.0);
                    row[beta] = -Rational::lift(dir[i]);
                    lp.add_eq(row, Rational::zero());
                }
                ray_curvatures.push((beta, *curvature));
                off += d;
            }
            ConcreteBlock::PolyBranches { dim: d, branches } => {
                for (gens, lines) in branches {
                    let mu: Vec<usize> = gens.iter().map(|_| lp.add_var(true)).collect();
                    let nu: Vec<usize> = lines.iter().map(|_| lp.add_var(false)).collect();
                    for i in 0..*d {
                        let mut row = vec![Rational::zero(); lp.num_vars()];
                        row[start + off + i] = Rational::lift(1.0);
                        for (g, &mj) in gens.iter().zip(&mu) {
                            row[mj] = -Rational::lift(g[i]);
                        }
                        for (l, &nj) in lines.iter().zip(&nu) {
                            row[nj] = -Rational::lift(l[i]);
                        }
                        lp.add_eq(row, Rational::zero());
                    }
                }
                off += d;
            }
        }
    }
    ConeVars {
        start,
        dim,
        ray_curvatures,
    }
}

fn block_dim(b: &ConcreteBlock) -> usize {
    match b {
        ConcreteBlock::PolyBranches { dim, .. }
        | ConcreteBlock::Ray { dim, .. }
        | ConcreteBlock::Zero { dim } => *dim,
    }
}

struct Quadratics {
    /// `uᵀ ∇²f0(x̄) u`
    q0: f64,
    /// `uᵀ ∇²F_j(x̄) u` per component of the constraint map
    qf: Vec<f64>,
}

fn quadratics(p: &ProblemInstance, u: &[f64]) -> Result<Quadratics> {
    let h0 = p.objective.hessians(&p.xbar)?;
    let q0 = linalg::quad_form(&h0[0], u);
    let hf = p.map.hessians(&p.xbar)?;
    let qf = hf.iter().map(|h| linalg::quad_form(h, u)).collect();
    Ok(Quadratics { q0, qf })
}

/// Geometric / disjunctive / SOCP per-direction certification via the
/// block LP: find `(α, λ)` with stationarity, cone membership, and
/// "Hessian form + curvature >= 1" (homogeneous scaling of `> 0`).
pub fn certify_direction_geometric(
    p: &ProblemInstance,
    u: &[f64],
    strategy: Strategy,
) -> Result<Option<DirectionCertificate>> {
    if linalg::norm(u) <= SET_TOL {
        return Err(CurvError::PreconditionViolated("direction must be non-zero"));
    }
    if !critical_cone_member(p, u)? {
        return Err(CurvError::PreconditionViolated("direction is not critical"));
    }
    match strategy {
        Strategy::Lp => {
            let c = p
                .constraint
                .as_ref()
                .ok_or(CurvError::PreconditionViolated("constraint set missing"))?;
            let fx = p.f_at_xbar()?;
            let fu = linalg::mat_vec(&p.map.jacobian(&p.xbar)?, u);
            match normal_cone_blocks(c, &fx, &fu) {
                Ok(blocks) => direction_lp(p, u, &blocks),
                Err(CurvError::Unsupported(_)) => {
                    // Non-polyhedral, non-conic constraint: fall back to a
                    // finite multiplier search through the engine.
                    enumerate_geometric(p, u)
                }
                Err(e) => Err(e),
            }
        }
        Strategy::FixedMultiplier(alpha, lambda) => {
            Ok(evaluate_geometric_pair(p, u, alpha, &lambda)?)
        }
        Strategy::SuppliedList(list) => {
            for (alpha, lambda) in list {
                if let Some(cert) = evaluate_geometric_pair(p, u, alpha, &lambda)? {
                    return Ok(Some(cert));
                }
            }
            Ok(None)
        }
    }
}

/// SOCP entry point; the constraint must be a product of ice-cream cones.
pub fn certify_direction_socp(
    p: &ProblemInstance,
    u: &[f64],
) -> Result<Option<DirectionCertificate>> {
    let c = p
        .constraint
        .as_ref()
        .ok_or(CurvError::PreconditionViolated("constraint set missing"))?;
    if soc_blocks(c).is_none() {
        return Err(CurvError::PreconditionViolated(
            "socp constraint must be a product of ice-cream cones",
        ));
    }
    certify_direction_geometric(p, u, Strategy::Lp)
}

fn direction_lp(
    p: &ProblemInstance,
    u: &[f64],
    blocks: &[BlockParam],
) -> Result<Option<DirectionCertificate>> {
    let Some(combos) = concretize(blocks) else {
        return Ok(None);
    };
    let quad = quadratics(p, u)?;
    let grad = p.objective.gradient(&p.xbar)?;
    let jac = p.map.jacobian(&p.xbar)?;
    let n = p.xbar.len();
    let m = p.map.dim_out();

    for combo in combos {
        let mut lp = RationalLp::new(1);
        lp.set_nonneg(0); // α
        let cone = install_cone(&mut lp, &combo);
        debug_assert_eq!(cone.dim, m);
        // Stationarity: ∇F(x̄)ᵀ λ + α ∇f0(x̄) = 0.
        for k in 0..n {
            let mut row = vec![Rational::zero(); lp.num_vars()];
            row[0] = Rational::lift(grad[k]);
            for j in 0..m {
                row[cone.start + j] = Rational::lift(jac[j][k]);
            }
            lp.add_eq(row, Rational::zero());
        }
        // Value row: α q0 + Σ λ_j qF_j + Σ β c >= 1.
        let mut row = vec![Rational::zero(); lp.num_vars()];
        row[0] = Rational::lift(quad.q0);
        for j in 0..m {
            row[cone.start + j] = Rational::lift(quad.qf[j]);
        }
        for (beta, c) in &cone.ray_curvatures {
            row[*beta] = row[*beta].clone() + Rational::lift(*c);
        }
        lp.add_ge(row, Rational::lift(1.0));

        if let Some(witness) = lp.feasible().witness() {
            let alpha = witness[0].approx();
            let lambda: Vec<f64> = (0..m).map(|j| witness[cone.start + j].approx()).collect();
            let curvature: f64 = cone
                .ray_curvatures
                .iter()
                .map(|(beta, c)| witness[*beta].approx() * c)
                .sum();
            let value = alpha * quad.q0 + linalg::dot(&lambda, &quad.qf) + curvature;
            let exact_value = {
                let mut acc = witness[0].clone() * Rational::lift(quad.q0);
                for j in 0..m {
                    acc = acc + witness[cone.start + j].clone() * Rational::lift(quad.qf[j]);
                }
                for (beta, c) in &cone.ray_curvatures {
                    acc = acc + witness[*beta].clone() * Rational::lift(*c);
                }
                acc
            };
            let exact = Some(ExactWitness {
                alpha: witness[0].clone(),
                lambda: (0..m).map(|j| witness[cone.start + j].clone()).collect(),
                value: exact_value,
            });
            let checks = multiplier_checks(p, u, alpha, &lambda)?;
            let mut trace = vec!["critical-direction-check".to_string()];
            trace.push("multiplier-cone-lp".to_string());
            if cone.ray_curvatures.is_empty() {
                trace.push("polyhedral-zero-curvature".to_string());
            } else {
                trace.push("cone-boundary-curvature-ray".to_string());
            }
            return Ok(Some(DirectionCertificate {
                u: u.to_vec(),
                alpha,
                lambda,
                value,
                curvature_term: ExtReal::finite(curvature),
                rule_trace: trace,
                multiplier_checks: checks,
                exact,
            }));
        }
    }
    Ok(None)
}

/// Finite multiplier search for constraints without an LP-representable
/// multiplier cone: evaluate the certified quantity through the engine.
fn enumerate_geometric(
    p: &ProblemInstance,
    u: &[f64],
) -> Result<Option<DirectionCertificate>> {
    let quad = quadratics(p, u)?;
    let c = p.constraint.as_ref().expect("geometric");
    let fx = p.f_at_xbar()?;
    let fu = linalg::mat_vec(&p.map.jacobian(&p.xbar)?, u);
    for alpha in [1.0, 0.0] {
        let Some(space) = multiplier_space(p, alpha)? else {
            continue;
        };
        let mut candidates = vec![space.particular.clone()];
        for b in &space.basis {
            for s in [1.0, -1.0, 0.5, -0.5, 2.0, -2.0] {
                candidates.push(linalg::axpy(&space.particular, s, b));
            }
        }
        candidates.truncate(32);
        for lambda in candidates {
            let curv = crate::sets::curvature::indicator_curvature(c, &fx, &lambda, &fu)?;
            if !matches!(curv.kind, Bound::Exact | Bound::LowerBound) {
                continue;
            }
            let lag = alpha * quad.q0 + linalg::dot(&lambda, &quad.qf);
            let Ok(total) = curv.value.checked_add(ExtReal::finite(lag)) else {
                continue;
            };
            if total > Finite(VALUE_MARGIN) && (alpha > 0.0 || linalg::norm(&lambda) > SET_TOL) {
                let checks = multiplier_checks(p, u, alpha, &lambda)?;
                return Ok(Some(DirectionCertificate {
                    u: u.to_vec(),
                    alpha,
                    lambda,
                    value: total.as_f64(),
                    curvature_term: curv.value,
                    rule_trace: vec![
                        "critical-direction-check".to_string(),
                        "finite-multiplier-enumeration".to_string(),
                        "indicator-curvature-engine".to_string(),
                    ],
                    multiplier_checks: checks,
                    exact: None,
                }));
            }
        }
    }
    Ok(None)
}

fn evaluate_geometric_pair(
    p: &ProblemInstance,
    u: &[f64],
    alpha: f64,
    lambda: &[f64],
) -> Result<Option<DirectionCertificate>> {
    if alpha < 0.0 {
        return Err(CurvError::PreconditionViolated("alpha must be non-negative"));
    }
    if alpha <= SET_TOL && linalg::norm(lambda) <= SET_TOL {
        return Err(CurvError::PreconditionViolated("(alpha, lambda) must be non-zero"));
    }
    let checks = multiplier_checks(p, u, alpha, lambda)?;
    if checks.stationarity_residual > 1e-7 {
        return Ok(None);
    }
    let quad = quadratics(p, u)?;
    let c = p.constraint.as_ref().expect("geometric");
    let fx = p.f_at_xbar()?;
    let fu = linalg::mat_vec(&p.map.jacobian(&p.xbar)?, u);
    let curv = crate::sets::curvature::indicator_curvature(c, &fx, lambda, &fu)?;
    if !matches!(curv.kind, Bound::Exact | Bound::LowerBound) {
        return Ok(None);
    }
    let lag = alpha * quad.q0 + linalg::dot(lambda, &quad.qf);
    let Ok(total) = curv.value.checked_add(ExtReal::finite(lag)) else {
        return Ok(None);
    };
    if total > Finite(VALUE_MARGIN) {
        Ok(Some(DirectionCertificate {
            u: u.to_vec(),
            alpha,
            lambda: lambda.to_vec(),
            value: total.as_f64(),
            curvature_term: curv.value,
            rule_trace: vec![
                "fixed-multiplier-evaluation".to_string(),
                "indicator-curvature-engine".to_string(),
            ],
            multiplier_checks: checks,
            exact: None,
        }))
    } else {
        Ok(None)
    }
}

/// Composite per-direction certification with the objective weight fixed
/// at one (the weighted generalization is unsound for composite problems
/// and deliberately not exposed).
pub fn certify_direction_composite(
    p: &ProblemInstance,
    u: &[f64],
    injected: &[Vec<f64>],
) -> Result<Option<DirectionCertificate>> {
    if p.kind != ProblemKind::Composite {
        return Err(CurvError::PreconditionViolated("composite instance expected"));
    }
    if !critical_cone_member(p, u)? {
        return Err(CurvError::PreconditionViolated("direction is not critical"));
    }
    let g = p.outer.as_ref().expect("validated");
    if let FunctionExpr::L0(_) = g {
        if let Some(cert) = composite_l0_fast_path(p, u)? {
            return Ok(Some(cert));
        }
    }
    let quad = quadratics(p, u)?;
    let fx = p.f_at_xbar()?;
    let fu = linalg::mat_vec(&p.map.jacobian(&p.xbar)?, u);
    let Some(space) = multiplier_space(p, 1.0)? else {
        return Ok(None);
    };
    let mut candidates = vec![space.particular.clone()];
    for b in &space.basis {
        for s in [1.0, -1.0, 0.5, -0.5, 2.0, -2.0] {
            candidates.push(linalg::axpy(&space.particular, s, b));
        }
    }
    candidates.extend(injected.iter().cloned());
    candidates.truncate(40);
    for lambda in candidates {
        let gterm = subderiv::d2(g, &fx, &lambda, &fu)?;
        if !matches!(gterm.kind, Bound::Exact | Bound::LowerBound) {
            continue;
        }
        let lag = quad.q0 + linalg::dot(&lambda, &quad.qf);
        let Ok(total) = gterm.value.checked_add(ExtReal::finite(lag)) else {
            continue;
        };
        if total > Finite(VALUE_MARGIN) {
            let checks = multiplier_checks(p, u, 1.0, &lambda)?;
            return Ok(Some(DirectionCertificate {
                u: u.to_vec(),
                alpha: 1.0,
                lambda,
                value: total.as_f64(),
                curvature_term: gterm.value,
                rule_trace: vec![
                    "critical-direction-check".to_string(),
                    "unit-weight-multiplier-search".to_string(),
                    "outer-curvature-engine".to_string(),
                ],
                multiplier_checks: checks,
                exact: None,
            }));
        }
    }
    Ok(None)
}

/// Sparse outer function: the condition reduces to
/// `λ_i <∇F_i(x̄), u> = 0` off the zero set and a positive Lagrangian
/// Hessian form, decided exactly over the rationals.
fn composite_l0_fast_path(
    p: &ProblemInstance,
    u: &[f64],
) -> Result<Option<DirectionCertificate>> {
    let fx = p.f_at_xbar()?;
    let jac = p.map.jacobian(&p.xbar)?;
    let grad = p.objective.gradient(&p.xbar)?;
    let quad = quadratics(p, u)?;
    let n = p.xbar.len();
    let m = p.map.dim_out();

    // Constraint rows over λ: stationarity plus the forced zeros.
    let mut rows: Vec<Vec<Rational>> = Vec::new();
    let mut rhs: Vec<Rational> = Vec::new();
    for k in 0..n {
        rows.push((0..m).map(|j| Rational::lift(jac[j][k])).collect());
        rhs.push(-Rational::lift(grad[k]));
    }
    for j in 0..m {
        let off_zero_set = fx[j].abs() > SET_TOL;
        let moving = linalg::dot(&jac[j], u).abs() > SET_TOL;
        if off_zero_set && moving {
            let mut row = vec![Rational::zero(); m];
            row[j] = Rational::lift(1.0);
            rows.push(row);
            rhs.push(Rational::zero());
        }
    }
    let Some((particular, basis)) = linalg::solve_affine_rational(&rows, &rhs) else {
        return Ok(None);
    };
    // value(λ) = q0 + Σ λ_j qF_j is affine on the solution set; a strictly
    // positive value exists iff it is non-constant or positive at the
    // particular solution.
    let qf_q: Vec<Rational> = quad.qf.iter().map(|&q| Rational::lift(q)).collect();
    let value_at = |lam: &[Rational]| -> Rational {
        lam.iter()
            .zip(&qf_q)
            .fold(Rational::lift(quad.q0), |acc, (l, q)| acc + l.clone() * q.clone())
    };
    let c0 = value_at(&particular);
    let mut chosen: Option<Vec<Rational>> = None;
    for b in &basis {
        let slope: Rational = b
            .iter()
            .zip(&qf_q)
            .fold(Rational::zero(), |acc, (l, q)| acc + l.clone() * q.clone());
        if !slope.is_zero() {
            // Walk to value exactly 1.
            let step = (Rational::lift(1.0) - c0.clone()) / slope;
            let lam: Vec<Rational> = particular
                .iter()
                .zip(b)
                .map(|(pv, bv)| pv.clone() + step.clone() * bv.clone())
                .collect();
            chosen = Some(lam);
            break;
        }
    }
    if chosen.is_none() && c0 > Rational::zero() {
        chosen = Some(particular);
    }
    let Some(lam) = chosen else {
        return Ok(None);
    };
    let lambda: Vec<f64> = lam.iter().map(|q| q.approx()).collect();
    let value = quad.q0 + linalg::dot(&lambda, &quad.qf);
    let exact_value = lam
        .iter()
        .zip(&qf_q)
        .fold(Rational::lift(quad.q0), |acc, (l, q)| acc + l.clone() * q.clone());
    let checks = multiplier_checks(p, u, 1.0, &lambda)?;
    Ok(Some(DirectionCertificate {
        u: u.to_vec(),
        alpha: 1.0,
        lambda,
        value,
        curvature_term: Finite(0.0),
        rule_trace: vec![
            "critical-direction-check".to_string(),
            "sparse-outer-fast-path".to_string(),
            "rational-affine-multiplier-solve".to_string(),
        ],
        multiplier_checks: checks,
        exact: Some(ExactWitness {
            alpha: Rational::lift(1.0),
            lambda: lam,
            value: exact_value,
        }),
    }))
}

/// Structured per-direction certification: a joint LP over `(α, λ)` and
/// one lifted multiplier `η` per candidate pair `(z, w)`, all of whose
/// value rows must clear the threshold simultaneously.
pub fn certify_direction_structured(
    p: &ProblemInstance,
    u: &[f64],
) -> Result<Option<DirectionCertificate>> {
    let s = p
        .structured
        .as_ref()
        .ok_or(CurvError::PreconditionViolated("structured data missing"))?;
    if !s.inner_calm_star {
        return Err(CurvError::AssumptionNotDeclared("inner_calm_star"));
    }
    if !critical_cone_member(p, u)? {
        return Err(CurvError::PreconditionViolated("direction is not critical"));
    }
    let quad = quadratics(p, u)?;
    let grad = p.objective.gradient(&p.xbar)?;
    let jac = p.map.jacobian(&p.xbar)?;
    let fu = linalg::mat_vec(&jac, u);
    let n = p.xbar.len();
    let m = p.map.dim_out();

    // Lifted candidate pairs (z, w) with ∇H(z) w = ∇F(x̄)u.
    struct Pair {
        z: Vec<f64>,
        w: Vec<f64>,
        blocks: Vec<BlockParam>,
    }
    let mut pairs: Vec<Pair> = Vec::new();
    for z in &s.phi_candidates {
        let hj = s.h_map.jacobian(z)?;
        let Some(sol) = linalg::solve_affine(&hj, &fu, 1e-7) else {
            continue; // no lift through this candidate: vacuous
        };
        let mut ws = vec![sol.particular.clone()];
        for b in &sol.basis {
            for sg in [1.0, -1.0] {
                ws.push(linalg::axpy(&sol.particular, sg, b));
            }
        }
        ws.truncate(8);
        for w in ws {
            let gz = s.g_map.value(z)?;
            let gw = linalg::mat_vec(&s.g_map.jacobian(z)?, &w);
            let blocks = normal_cone_blocks(&s.d_set, &gz, &gw)?;
            if blocks.iter().any(|b| matches!(b, BlockParam::Empty)) {
                // Σ(z, w, λ) is empty for this pair: no certificate.
                return Ok(None);
            }
            pairs.push(Pair {
                z: z.clone(),
                w,
                blocks,
            });
        }
    }
    if pairs.is_empty() {
        return Ok(None);
    }

    // Joint LP. Apex-ray choices inside D would multiply combinatorially;
    // concretize per pair and take the first-choice assignment only.
    let mut lp = RationalLp::new(1);
    lp.set_nonneg(0); // α
    let lambda_start = lp.num_vars();
    for _ in 0..m {
        lp.add_var(false);
    }
    // Stationarity.
    for k in 0..n {
        let mut row = vec![Rational::zero(); lp.num_vars()];
        row[0] = Rational::lift(grad[k]);
        for j in 0..m {
            row[lambda_start + j] = Rational::lift(jac[j][k]);
        }
        lp.add_eq(row, Rational::zero());
    }
    let mut eta_info = Vec::new();
    for pair in &pairs {
        let Some(combos) = concretize(&pair.blocks) else {
            return Ok(None);
        };
        let combo = combos.into_iter().next().expect("non-empty combos");
        let cone = install_cone(&mut lp, &combo);
        let gj = s.g_map.jacobian(&pair.z)?;
        let hjz = s.h_map.jacobian(&pair.z)?;
        let ell = s.h_map.dim_in();
        // ∇G(z)ᵀ η = ∇H(z)ᵀ λ.
        for k in 0..ell {
            let mut row = vec![Rational::zero(); lp.num_vars()];
            for r in 0..gj.len() {
                row[cone.start + r] = Rational::lift(gj[r][k]);
            }
            for j in 0..m {
                row[lambda_start + j] = -Rational::lift(hjz[j][k]);
            }
            lp.add_eq(row, Rational::zero());
        }
        // Value row for this pair:
        // α q0 + Σ λ_j qF_j + <η, ∇²G(z)(w,w)> - <λ, ∇²H(z)(w,w)> + rays >= 1.
        let gh = s.g_map.hessians(&pair.z)?;
        let hh = s.h_map.hessians(&pair.z)?;
        let mut row = vec![Rational::zero(); lp.num_vars()];
        row[0] = Rational::lift(quad.q0);
        for j in 0..m {
            let hterm = linalg::quad_form(&hh[j], &pair.w);
            row[lambda_start + j] = Rational::lift(quad.qf[j] - hterm);
        }
        for r in 0..gj.len() {
            let gterm = linalg::quad_form(&gh[r], &pair.w);
            row[cone.start + r] = row[cone.start + r].clone() + Rational::lift(gterm);
        }
        for (beta, c) in &cone.ray_curvatures {
            row[*beta] = row[*beta].clone() + Rational::lift(*c);
        }
        lp.add_ge(row, Rational::lift(1.0));
        eta_info.push((cone.start, gj.len()));
    }

    let Some(witness) = lp.feasible().witness().map(|w| w.to_vec()) else {
        return Ok(None);
    };
    let alpha = witness[0].approx();
    let lambda: Vec<f64> = (0..m).map(|j| witness[lambda_start + j].approx()).collect();
    // Report the smallest per-pair curvature term.
    let mut curvature = f64::INFINITY;
    for (pair, (eta_start, pdim)) in pairs.iter().zip(&eta_info) {
        let eta: Vec<f64> = (0..*pdim).map(|r| witness[eta_start + r].approx()).collect();
        let theta = super::curvature_theta(
            &pair.z,
            &pair.w,
            &lambda,
            &eta,
            &s.g_map,
            &s.h_map,
            &s.d_set,
        )?;
        curvature = curvature.min(theta.as_f64());
    }
    let value = alpha * quad.q0 + linalg::dot(&lambda, &quad.qf) + curvature;
    let checks = multiplier_checks(p, u, alpha, &lambda)?;
    let exhaustive_w: bool = {
        let mut all_unique = true;
        for z in &s.phi_candidates {
            let hj = s.h_map.jacobian(z)?;
            if let Some(sol) = linalg::solve_affine(&hj, &fu, 1e-7) {
                all_unique &= sol.basis.is_empty();
            }
        }
        all_unique
    };
    let mut trace = vec![
        "critical-direction-check".to_string(),
        "lifted-multiplier-joint-lp".to_string(),
        "structured-curvature-term".to_string(),
    ];
    if !exhaustive_w {
        trace.push("lifted-direction-enumeration-incomplete".to_string());
    }
    Ok(Some(DirectionCertificate {
        u: u.to_vec(),
        alpha,
        lambda,
        value,
        curvature_term: ExtReal::finite(curvature),
        rule_trace: trace,
        multiplier_checks: checks,
        exact: Some(ExactWitness {
            alpha: witness[0].clone(),
            lambda: (0..m).map(|j| witness[lambda_start + j].clone()).collect(),
            value: Rational::lift(1.0),
        }),
    }))
}
