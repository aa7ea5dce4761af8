//! Second-order sufficient optimality certifiers.
//!
//! Every class reduces the per-direction condition "Lagrangian curvature
//! plus set curvature is strictly positive for some admissible multiplier"
//! to an exact rational LP where the multiplier cone is polyhedral (or
//! ray-parametrized on ice-cream cone boundaries), and to a finite
//! multiplier search evaluated through the calculus engine otherwise.
//! Verdicts never overclaim: sampled-sphere certification is evidence,
//! subspace-exact certification is a proof in its stated regime.

mod direction;
mod subspace;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{CurvError, Result};
use crate::extreal::ExtReal;
use crate::linalg;
use crate::lp::{Feasibility, RationalLp};
use crate::sets::{ClosedSet, NormalMode, SecondOrderCone, Ternary, SET_TOL};
use crate::smooth::SmoothMap;
use crate::subderiv::{self, FunctionExpr};

pub use crate::lp::Feasibility as LpFeasibility;
pub use direction::{certify_direction_composite, certify_direction_geometric, Strategy};
pub use subspace::post_check_passes;

/// Strictness margin for float-mode certification.
pub const VALUE_MARGIN: f64 = 1e-8;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ProblemKind {
    Geometric,
    Disjunctive,
    Socp,
    Structured,
    Composite,
}

/// Data for constraint sets of the form `C = H(G⁻¹(D))`.
#[derive(Clone, Debug)]
pub struct StructuredData {
    pub h_map: SmoothMap,
    pub g_map: SmoothMap,
    pub d_set: ClosedSet,
    /// Candidates `z ∈ Φ(F(x̄)) = {z : G(z) ∈ D, H(z) = F(x̄)}`.
    pub phi_candidates: Vec<Vec<f64>>,
    pub inner_semicompact: bool,
    pub inner_calm_star: bool,
}

#[derive(Clone, Debug)]
pub struct ProblemInstance {
    pub kind: ProblemKind,
    /// Scalar objective `f0`.
    pub objective: SmoothMap,
    /// Constraint map `F`.
    pub map: SmoothMap,
    /// `C` for the constrained classes.
    pub constraint: Option<ClosedSet>,
    /// Outer function `g` for the composite class.
    pub outer: Option<FunctionExpr>,
    pub structured: Option<StructuredData>,
    pub xbar: Vec<f64>,
}

impl ProblemInstance {
    /// Validates feasibility of the base point and class invariants.
    pub fn validate(&self) -> Result<()> {
        if self.objective.dim_out() != 1 {
            return Err(CurvError::PreconditionViolated("objective must be scalar"));
        }
        let fx = self.map.value(&self.xbar)?;
        match self.kind {
            ProblemKind::Composite => {
                let g = self
                    .outer
                    .as_ref()
                    .ok_or(CurvError::PreconditionViolated("composite needs g"))?;
                if !g.value(&fx)?.is_finite() {
                    return Err(CurvError::InfeasibleBasePoint);
                }
            }
            ProblemKind::Structured => {
                let s = self
                    .structured
                    .as_ref()
                    .ok_or(CurvError::PreconditionViolated("structured data missing"))?;
                if !s.inner_semicompact {
                    return Err(CurvError::AssumptionNotDeclared("inner_semicompact"));
                }
                if s.phi_candidates.is_empty() {
                    return Err(CurvError::MissingCandidates);
                }
                for z in &s.phi_candidates {
                    let hz = s.h_map.value(z)?;
                    if linalg::norm(&linalg::sub(&hz, &fx)) > 1e-7 {
                        return Err(CurvError::PreconditionViolated(
                            "candidate z does not satisfy H(z) = F(x̄)",
                        ));
                    }
                    if !s.d_set.member(&s.g_map.value(z)?, SET_TOL)? {
                        return Err(CurvError::InfeasibleBasePoint);
                    }
                }
            }
            _ => {
                let c = self
                    .constraint
                    .as_ref()
                    .ok_or(CurvError::PreconditionViolated("constraint set missing"))?;
                if !c.member(&fx, SET_TOL)? {
                    return Err(CurvError::InfeasibleBasePoint);
                }
                if self.kind == ProblemKind::Socp && soc_blocks(c).is_none() {
                    return Err(CurvError::PreconditionViolated(
                        "socp constraint must be a product of ice-cream cones",
                    ));
                }
            }
        }
        Ok(())
    }

    pub fn f_at_xbar(&self) -> Result<Vec<f64>> {
        self.map.value(&self.xbar)
    }
}

/// Decomposes a product-of-cones constraint into blocks.
pub(crate) fn soc_blocks(c: &ClosedSet) -> Option<Vec<SecondOrderCone>> {
    match c {
        ClosedSet::Soc(q) => Some(vec![*q]),
        ClosedSet::Product(fs) => {
            let mut out = Vec::with_capacity(fs.len());
            for f in fs {
                match f {
                    ClosedSet::Soc(q) => out.push(*q),
                    _ => return None,
                }
            }
            Some(out)
        }
        _ => None,
    }
}

/// Is `u` in the class-appropriate critical cone?
pub fn critical_cone_member(p: &ProblemInstance, u: &[f64]) -> Result<bool> {
    let grad = p.objective.gradient(&p.xbar)?;
    let slope = linalg::dot(&grad, u);
    let fx = p.f_at_xbar()?;
    let fu = linalg::mat_vec(&p.map.jacobian(&p.xbar)?, u);
    match p.kind {
        ProblemKind::Composite => {
            let g = p.outer.as_ref().expect("validated");
            let dg = subderiv::subderivative(g, &fx, &fu)?;
            let total = dg.value.checked_add(ExtReal::finite(slope))?;
            Ok(total <= ExtReal::finite(SET_TOL))
        }
        ProblemKind::Structured => {
            if slope > SET_TOL {
                return Ok(false);
            }
            let s = p.structured.as_ref().expect("validated");
            for z in &s.phi_candidates {
                if structured_lift_feasible(s, z, &fu)? {
                    return Ok(true);
                }
            }
            Ok(false)
        }
        _ => {
            if slope > SET_TOL {
                return Ok(false);
            }
            let c = p.constraint.as_ref().expect("validated");
            Ok(c.tangent_member(&fx, &fu)?.holds)
        }
    }
}

/// Does some `w` with `∇H(z) w = ∇F(x̄)u` have `∇G(z) w ∈ T_D(G(z))`?
fn structured_lift_feasible(s: &StructuredData, z: &[f64], fu: &[f64]) -> Result<bool> {
    use crate::scalar::{lift_vec, Rational, Scalar};
    use num_traits::Zero;
    let hj = s.h_map.jacobian(z)?;
    let gj = s.g_map.jacobian(z)?;
    let gz = s.g_map.value(z)?;
    let Some(dpoly) = s.d_set.to_polyhedron() else {
        // Fall back to probing the affine solution set.
        let Some(sol) = linalg::solve_affine(&hj, fu, 1e-7) else {
            return Ok(false);
        };
        let mut probes = vec![sol.particular.clone()];
        for b in &sol.basis {
            for sgn in [1.0, -1.0] {
                probes.push(linalg::axpy(&sol.particular, sgn, b));
            }
        }
        for w in probes {
            let gw = linalg::mat_vec(&gj, &w);
            if s.d_set.tangent_member(&gz, &gw)?.certifies_tangent() {
                return Ok(true);
            }
        }
        return Ok(false);
    };
    let dq = dpoly.to_rational();
    let gzq = lift_vec(&gz);
    let active = dq.active_set(&gzq)?;
    let (rows, _) = dq.ineq_rows();
    let (eq_rows, _) = dq.eq_rows();
    let ell = s.h_map.dim_in();
    let mut lp = RationalLp::new(ell);
    for (row, t) in hj.iter().zip(fu) {
        lp.add_eq(lift_vec(row), Rational::lift(*t));
    }
    for &i in &active {
        let coeff: Vec<Rational> = (0..ell)
            .map(|k| {
                (0..gj.len()).fold(Rational::zero(), |acc, r| {
                    acc + rows[i][r].clone() * Rational::lift(gj[r][k])
                })
            })
            .collect();
        lp.add_le(coeff, Rational::zero());
    }
    for row in eq_rows {
        let coeff: Vec<Rational> = (0..ell)
            .map(|k| {
                (0..gj.len()).fold(Rational::zero(), |acc, r| {
                    acc + row[r].clone() * Rational::lift(gj[r][k])
                })
            })
            .collect();
        lp.add_eq(coeff, Rational::zero());
    }
    Ok(lp.feasible().is_feasible())
}

/// The affine multiplier set `Λ^α(x̄) = {λ : ∇F(x̄)ᵀλ = -α ∇f0(x̄)}`.
pub fn multiplier_space(p: &ProblemInstance, alpha: f64) -> Result<Option<linalg::AffineSet>> {
    let jac = p.map.jacobian(&p.xbar)?;
    let grad = p.objective.gradient(&p.xbar)?;
    let n = p.xbar.len();
    let m = p.map.dim_out();
    let mut jt = vec![vec![0.0; m]; n];
    for i in 0..m {
        for j in 0..n {
            jt[j][i] = jac[i][j];
        }
    }
    let rhs = linalg::scale(&grad, -alpha);
    Ok(linalg::solve_affine(&jt, &rhs, 1e-7))
}

/// Per-direction certificate: the multiplier pair and the certified
/// strictly positive quantity, with its post-checks.
#[derive(Clone, Debug)]
pub struct DirectionCertificate {
    pub u: Vec<f64>,
    pub alpha: f64,
    pub lambda: Vec<f64>,
    pub value: f64,
    pub curvature_term: ExtReal,
    pub rule_trace: Vec<String>,
    pub multiplier_checks: MultiplierChecks,
    /// Rational witness when the certificate came from an exact LP; the
    /// value is a certified exact lower bound of the quantity.
    pub exact: Option<ExactWitness>,
}

/// Exact rational multiplier witnesses for `--rational` reporting.
#[derive(Clone, Debug)]
pub struct ExactWitness {
    pub alpha: crate::scalar::Rational,
    pub lambda: Vec<crate::scalar::Rational>,
    pub value: crate::scalar::Rational,
}

/// Recorded consistency checks on the emitted multiplier: it annihilates
/// the linearized direction and lies in the directional proximal normal
/// cone at that direction.
#[derive(Clone, Debug)]
pub struct MultiplierChecks {
    pub pairing: f64,
    pub in_directional_proximal_normal_cone: Ternary,
    pub stationarity_residual: f64,
}

impl DirectionCertificate {
    /// Homogeneity: scaling `(α, λ)` by `γ > 0` scales the value.
    pub fn scaled(&self, gamma: f64) -> DirectionCertificate {
        assert!(gamma > 0.0);
        DirectionCertificate {
            u: self.u.clone(),
            alpha: gamma * self.alpha,
            lambda: linalg::scale(&self.lambda, gamma),
            value: gamma * self.value,
            curvature_term: self.curvature_term.scale(gamma),
            rule_trace: self.rule_trace.clone(),
            multiplier_checks: self.multiplier_checks.clone(),
            exact: None,
        }
    }
}

pub(crate) fn multiplier_checks(
    p: &ProblemInstance,
    u: &[f64],
    alpha: f64,
    lambda: &[f64],
) -> Result<MultiplierChecks> {
    let fx = p.f_at_xbar()?;
    let jac = p.map.jacobian(&p.xbar)?;
    let fu = linalg::mat_vec(&jac, u);
    let pairing = linalg::dot(lambda, &fu);
    let pnm = match &p.constraint {
        Some(c) => c.proximal_normal_member(&fx, &fu, lambda, NormalMode::Normal)?,
        None => Ternary::Unknown,
    };
    let grad = p.objective.gradient(&p.xbar)?;
    let resid = linalg::norm(&linalg::add(
        &linalg::mat_t_vec(&jac, lambda),
        &linalg::scale(&grad, alpha),
    ));
    Ok(MultiplierChecks {
        pairing,
        in_directional_proximal_normal_cone: pnm,
        stationarity_residual: resid,
    })
}

#[derive(Clone, Debug, PartialEq)]
pub enum Verdict {
    /// Every examined critical direction was certified; the direction set
    /// is not exhaustive unless `exhaustive` says so.
    CertifiedOnDirections,
    /// The critical cone was proven to be a linear subspace and the
    /// reduced quadratic form is positive definite.
    CertifiedSubspaceExact,
    /// Some direction admitted no certificate (not a refutation; the
    /// condition is sufficient only).
    NotCertified,
    Inconclusive,
}

#[derive(Clone, Debug)]
pub struct DirectionOutcome {
    pub u: Vec<f64>,
    pub certificate: Option<DirectionCertificate>,
}

#[derive(Clone, Debug)]
pub struct Certificate {
    pub verdict: Verdict,
    pub witness: Option<Vec<f64>>,
    pub directions: Vec<DirectionOutcome>,
    pub mode: String,
    /// True only when the direction set provably covers the critical cone.
    pub exhaustive: bool,
    pub notes: Vec<String>,
}

impl Certificate {
    pub fn min_value(&self) -> Option<f64> {
        self.directions
            .iter()
            .filter_map(|d| d.certificate.as_ref().map(|c| c.value))
            .fold(None, |acc, v| Some(acc.map_or(v, |a: f64| a.min(v))))
    }

    fn inconclusive(mode: &str, note: String) -> Certificate {
        Certificate {
            verdict: Verdict::Inconclusive,
            witness: None,
            directions: Vec::new(),
            mode: mode.to_string(),
            exhaustive: false,
            notes: vec![note],
        }
    }
}

/// Aggregation policy over critical directions.
#[derive(Clone, Debug)]
pub enum CertifyMode {
    SubspaceExact,
    SampledSphere { n: usize, seed: u64 },
    DirectionsFile(Vec<Vec<f64>>),
}

/// Certifies one direction with the class-appropriate machinery.
pub fn certify_direction(
    p: &ProblemInstance,
    u: &[f64],
) -> Result<Option<DirectionCertificate>> {
    match p.kind {
        ProblemKind::Composite => certify_direction_composite(p, u, &[]),
        ProblemKind::Structured => direction::certify_direction_structured(p, u),
        ProblemKind::Socp => direction::certify_direction_socp(p, u),
        _ => certify_direction_geometric(p, u, Strategy::Lp),
    }
}

/// Disjunctive-class certification (polyhedral multiplier LP).
pub fn certify_disjunctive(p: &ProblemInstance, mode: CertifyMode) -> Result<Certificate> {
    certify(p, mode)
}

/// Second-order-cone certification (boundary-ray LP).
pub fn certify_socp(p: &ProblemInstance, mode: CertifyMode) -> Result<Certificate> {
    certify(p, mode)
}

/// Structured-geometric certification (lifted multiplier LP).
pub fn certify_structured(p: &ProblemInstance, mode: CertifyMode) -> Result<Certificate> {
    certify(p, mode)
}

/// Composite certification (fixed unit weight on the objective).
pub fn certify_composite(p: &ProblemInstance, mode: CertifyMode) -> Result<Certificate> {
    certify(p, mode)
}

/// Main aggregation entry point.
pub fn certify(p: &ProblemInstance, mode: CertifyMode) -> Result<Certificate> {
    p.validate()?;
    match mode {
        CertifyMode::SubspaceExact => subspace::certify_subspace_exact(p),
        CertifyMode::SampledSphere { n, seed } => {
            let dirs = sampled_critical_sphere(p, n, seed)?;
            let mut cert = certify_over_directions(p, &dirs, &format!("sphere:{n}"))?;
            cert.exhaustive = false;
            if dirs.is_empty() {
                cert.notes.push(
                    "no critical directions found among the sampled sphere; certification is vacuous"
                        .to_string(),
                );
            }
            Ok(cert)
        }
        CertifyMode::DirectionsFile(dirs) => {
            let mut critical = Vec::new();
            let mut skipped = 0usize;
            for u in dirs {
                if critical_cone_member(p, &u)? {
                    critical.push(u);
                } else {
                    skipped += 1;
                }
            }
            let mut cert = certify_over_directions(p, &critical, "directions-file")?;
            cert.exhaustive = false;
            if skipped > 0 {
                cert.notes
                    .push(format!("{skipped} supplied directions were not critical and were skipped"));
            }
            Ok(cert)
        }
    }
}

fn certify_over_directions(
    p: &ProblemInstance,
    dirs: &[Vec<f64>],
    mode: &str,
) -> Result<Certificate> {
    let mut outcomes = Vec::with_capacity(dirs.len());
    let mut witness = None;
    for u in dirs {
        let cert = match certify_direction(p, u) {
            Ok(c) => c,
            Err(CurvError::IndeterminateSum) => None,
            Err(e) => return Err(e),
        };
        if cert.is_none() && witness.is_none() {
            witness = Some(u.clone());
        }
        outcomes.push(DirectionOutcome {
            u: u.clone(),
            certificate: cert,
        });
    }
    let verdict = if witness.is_some() {
        Verdict::NotCertified
    } else {
        Verdict::CertifiedOnDirections
    };
    Ok(Certificate {
        verdict,
        witness,
        directions: outcomes,
        mode: mode.to_string(),
        exhaustive: false,
        notes: Vec::new(),
    })
}

/// Deterministic quasi-uniform critical unit directions: an oversampled
/// seeded Gaussian pool, projected onto the effective equality subspaces
/// of the critical cone (so thin cones are still hit), filtered by exact
/// membership, then thinned by farthest-point selection.
pub fn sampled_critical_sphere(
    p: &ProblemInstance,
    n: usize,
    seed: u64,
) -> Result<Vec<Vec<f64>>> {
    let dim = p.xbar.len();
    let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_mul(0x9e37_79b9).wrapping_add(1));
    let mut raw: Vec<Vec<f64>> = Vec::new();
    for _ in 0..(8 * n.max(8)) {
        let g: Vec<f64> = (0..dim).map(|_| standard_normal(&mut rng)).collect();
        if linalg::norm(&g) >= 1e-9 {
            raw.push(g);
        }
    }
    for i in 0..dim {
        let mut e = vec![0.0; dim];
        e[i] = 1.0;
        raw.push(e.clone());
        e[i] = -1.0;
        raw.push(e);
    }

    // Equality subspaces of the critical cone: declared equality rows
    // plus inequality rows occurring in opposite-sign pairs.
    let mut projectors: Vec<Vec<Vec<f64>>> = vec![Vec::new()]; // identity
    for (ineq, eq) in subspace::critical_row_systems(p)? {
        let mut eff = eq.clone();
        for (i, r) in ineq.iter().enumerate() {
            let rn = linalg::norm(r);
            if rn <= 1e-12 {
                continue;
            }
            let paired = ineq.iter().enumerate().any(|(j, s)| {
                if i == j {
                    return false;
                }
                let sn = linalg::norm(s);
                sn > 1e-12
                    && linalg::norm(&linalg::axpy(&linalg::scale(r, 1.0 / rn), 1.0, &linalg::scale(s, 1.0 / sn)))
                        <= 1e-9
            });
            if paired {
                eff.push(r.clone());
            }
        }
        if !eff.is_empty() {
            projectors.push(eff);
        }
    }

    let mut pool: Vec<Vec<f64>> = Vec::new();
    for rows in &projectors {
        let basis = if rows.is_empty() {
            None
        } else {
            let b = linalg::null_space(&linalg::to_dmatrix(rows));
            if b.is_empty() {
                continue;
            }
            Some(b)
        };
        let project = |g: &[f64]| -> Vec<f64> {
            match &basis {
                None => g.to_vec(),
                Some(b) => {
                    // Orthonormal basis: orthogonal projection onto the
                    // equality subspace.
                    let mut out = vec![0.0; dim];
                    for z in b {
                        out = linalg::axpy(&out, linalg::dot(z, g), z);
                    }
                    out
                }
            }
        };
        let mut candidates: Vec<Vec<f64>> = raw.iter().map(|g| project(g)).collect();
        if let Some(b) = &basis {
            for z in b {
                candidates.push(z.clone());
                candidates.push(linalg::scale(z, -1.0));
            }
        }
        for cand in candidates {
            let nrm = linalg::norm(&cand);
            if nrm < 1e-9 {
                continue;
            }
            let u = linalg::scale(&cand, 1.0 / nrm);
            let duplicate = pool
                .iter()
                .any(|v| linalg::norm(&linalg::sub(v, &u)) <= 1e-9);
            if !duplicate && critical_cone_member(p, &u)? {
                pool.push(u);
            }
        }
    }
    if pool.len() <= n {
        return Ok(pool);
    }
    // Farthest-point thinning for quasi-uniform coverage.
    let mut chosen: Vec<Vec<f64>> = vec![pool[0].clone()];
    while chosen.len() < n {
        let (best_idx, _) = pool
            .iter()
            .enumerate()
            .map(|(i, cand)| {
                let dmin = chosen
                    .iter()
                    .map(|c| linalg::norm(&linalg::sub(cand, c)))
                    .fold(f64::INFINITY, f64::min);
                (i, dmin)
            })
            .max_by(|a, b| a.1.partial_cmp(&b.1).unwrap())
            .unwrap();
        chosen.push(pool[best_idx].clone());
    }
    Ok(chosen)
}

fn standard_normal(rng: &mut ChaCha8Rng) -> f64 {
    use rand::Rng;
    let u1: f64 = rng.gen_range(f64::MIN_POSITIVE..1.0);
    let u2: f64 = rng.gen_range(0.0..1.0);
    (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
}

/// The structured curvature term
/// `ϑ(z, w, y*, η) = <η, ∇²G(z)(w,w)> - <y*, ∇²H(z)(w,w)> + d²δ_D(G(z); η)(∇G(z)w)`.
pub fn curvature_theta(
    z: &[f64],
    w: &[f64],
    ystar: &[f64],
    eta: &[f64],
    g_map: &SmoothMap,
    h_map: &SmoothMap,
    d_set: &ClosedSet,
) -> Result<ExtReal> {
    let gz = g_map.value(z)?;
    if !d_set.member(&gz, SET_TOL)? {
        return Err(CurvError::InfeasibleBasePoint);
    }
    let gterm = g_map.scalarized_hessian_form(z, eta, w)?;
    let hterm = h_map.scalarized_hessian_form(z, ystar, w)?;
    let gw = linalg::mat_vec(&g_map.jacobian(z)?, w);
    let dterm = crate::sets::curvature::indicator_curvature(d_set, &gz, eta, &gw)?;
    ExtReal::finite(gterm - hterm).checked_add(dterm.value)
}

/// Exact rational feasibility (re-exported solver entry point).
pub fn lp_feasible(lp: &RationalLp) -> Feasibility {
    lp.feasible()
}

#[cfg(test)]
mod tests;
