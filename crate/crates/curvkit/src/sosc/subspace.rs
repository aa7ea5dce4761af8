//! Subspace-exact certification.
//!
//! When the critical cone is provably a linear subspace (lineality check
//! by exact LP over its defining rows), a single multiplier valid on a
//! spanning basis plus a positive-definite reduced quadratic form
//! certifies every critical direction at once. This is a genuine proof in
//! its regime, unlike sampled-sphere evidence.

use num_traits::Zero;

use crate::error::Result;
use crate::extreal::ExtReal;
use crate::linalg;
use crate::lp::{in_finitely_generated_cone, RationalLp};
use crate::scalar::{lift_vec, Rational, Scalar};
use crate::sets::{circ_dot, ClosedSet, SocLocation, Ternary};

use super::{
    multiplier_checks, soc_blocks, Certificate, DirectionCertificate, DirectionOutcome,
    ProblemInstance, ProblemKind, Verdict, VALUE_MARGIN,
};

/// Linearized description of the critical cone `{u : R u <= 0, E u = 0}`
/// together with the per-block multiplier structure.
struct CriticalRows {
    ineq: Vec<Vec<f64>>,
    eq: Vec<Vec<f64>>,
    /// Generators of the admissible multiplier cone in constraint-image
    /// coordinates.
    structure: MultiplierStructure,
}

enum MultiplierStructure {
    /// `λ = Σ μ_i g_i + Σ ν_j l_j` over image-space generators.
    Polyhedral {
        gens: Vec<Vec<f64>>,
        lines: Vec<Vec<f64>>,
    },
    /// Per-block boundary rays with curvature coefficients; `λ` is the
    /// concatenation of `β_i · dir_i` on boundary blocks and zeros.
    ConeRays {
        blocks: Vec<SocBlockRay>,
        total_dim: usize,
    },
}

struct SocBlockRay {
    offset: usize,
    dim: usize,
    /// `None` for interior blocks (λ pinned to zero).
    ray: Option<Vec<f64>>,
}

pub(crate) fn certify_subspace_exact(p: &ProblemInstance) -> Result<Certificate> {
    let mode = "subspace";
    if !matches!(
        p.kind,
        ProblemKind::Geometric | ProblemKind::Disjunctive | ProblemKind::Socp
    ) {
        return Ok(Certificate::inconclusive(
            mode,
            "subspace-exact certification covers the constrained polyhedral and cone classes"
                .to_string(),
        ));
    }
    let rows = match build_critical_rows(p)? {
        Ok(r) => r,
        Err(note) => return Ok(Certificate::inconclusive(mode, note)),
    };

    // Lineality: the cone is a subspace iff the negation of every
    // inequality row is implied by the row cone.
    let gens_q: Vec<Vec<Rational>> = rows.ineq.iter().map(|r| lift_vec(r)).collect();
    let lines_q: Vec<Vec<Rational>> = rows.eq.iter().map(|r| lift_vec(r)).collect();
    for r in &rows.ineq {
        let neg: Vec<Rational> = r.iter().map(|v| Rational::lift(-v)).collect();
        if !in_finitely_generated_cone(&neg, &gens_q, &lines_q) {
            return Ok(Certificate::inconclusive(
                mode,
                "critical cone is not a linear subspace; use sampled directions".to_string(),
            ));
        }
    }

    // Basis of the subspace.
    let mut stacked = rows.ineq.clone();
    stacked.extend(rows.eq.clone());
    let basis = if stacked.is_empty() {
        linalg::null_space(&linalg::to_dmatrix(&[vec![0.0; p.xbar.len()]]))
    } else {
        linalg::null_space(&linalg::to_dmatrix(&stacked))
    };
    if basis.is_empty() {
        return Ok(Certificate {
            verdict: Verdict::CertifiedSubspaceExact,
            witness: None,
            directions: Vec::new(),
            mode: mode.to_string(),
            exhaustive: true,
            notes: vec!["critical cone is trivial; certification is vacuous".to_string()],
        });
    }

    // One multiplier for the whole spanning basis, by exact LP.
    let Some((alpha, lambda, betas)) = subspace_multiplier(p, &rows, &basis)? else {
        return Ok(Certificate::inconclusive(
            mode,
            "no single multiplier certifies a spanning basis".to_string(),
        ));
    };

    // Reduced quadratic form on the basis: Lagrangian Hessian plus the
    // cone-boundary curvature (positive semidefinite on the subspace).
    let k = basis.len();
    let h0 = p.objective.hessians(&p.xbar)?;
    let hf = p.map.hessians(&p.xbar)?;
    let jac = p.map.jacobian(&p.xbar)?;
    let mut reduced = vec![vec![0.0; k]; k];
    for a in 0..k {
        for b in 0..k {
            let mut v = alpha * bilinear(&h0[0], &basis[a], &basis[b]);
            for (j, lam) in lambda.iter().enumerate() {
                v += lam * bilinear(&hf[j], &basis[a], &basis[b]);
            }
            if let MultiplierStructure::ConeRays { blocks, .. } = &rows.structure {
                let fa = linalg::mat_vec(&jac, &basis[a]);
                let fb = linalg::mat_vec(&jac, &basis[b]);
                for (block, beta) in blocks.iter().zip(&betas) {
                    if block.ray.is_some() {
                        let sa = &fa[block.offset..block.offset + block.dim];
                        let sb = &fb[block.offset..block.offset + block.dim];
                        v += beta * (circ_dot(sa, sb) - sa[0] * sb[0]);
                    }
                }
            }
            reduced[a][b] = v;
        }
    }
    let min_eig = linalg::min_symmetric_eigenvalue(&reduced);
    if min_eig <= VALUE_MARGIN {
        return Ok(Certificate::inconclusive(
            mode,
            format!("reduced quadratic form is not positive definite (min eigenvalue {min_eig:.3e})"),
        ));
    }

    let mut directions = Vec::with_capacity(k);
    for z in &basis {
        let value = {
            let mut v = alpha * linalg::quad_form(&h0[0], z);
            for (j, lam) in lambda.iter().enumerate() {
                v += lam * linalg::quad_form(&hf[j], z);
            }
            if let MultiplierStructure::ConeRays { blocks, .. } = &rows.structure {
                let fz = linalg::mat_vec(&jac, z);
                for (block, beta) in blocks.iter().zip(&betas) {
                    if block.ray.is_some() {
                        let s = &fz[block.offset..block.offset + block.dim];
                        v += beta * (circ_dot(s, s) - s[0] * s[0]);
                    }
                }
            }
            v
        };
        let checks = multiplier_checks(p, z, alpha, &lambda)?;
        directions.push(DirectionOutcome {
            u: z.clone(),
            certificate: Some(DirectionCertificate {
                u: z.clone(),
                alpha,
                lambda: lambda.clone(),
                value,
                curvature_term: ExtReal::finite(value),
                rule_trace: vec![
                    "critical-cone-lineality-lp".to_string(),
                    "uniform-multiplier-lp".to_string(),
                    "reduced-hessian-eigenvalue-test".to_string(),
                ],
                multiplier_checks: checks,
                exact: None,
            }),
        });
    }
    Ok(Certificate {
        verdict: Verdict::CertifiedSubspaceExact,
        witness: None,
        directions,
        mode: mode.to_string(),
        exhaustive: true,
        notes: vec![format!(
            "critical subspace dimension {k}; reduced form min eigenvalue {min_eig:.6e}"
        )],
    })
}

fn bilinear(m: &[Vec<f64>], a: &[f64], b: &[f64]) -> f64 {
    linalg::dot(&linalg::mat_vec(m, a), b)
}

/// Builds the linear rows of the critical cone, or a note explaining why
/// the class is outside the subspace-exact regime.
fn build_critical_rows(
    p: &ProblemInstance,
) -> Result<std::result::Result<CriticalRows, String>> {
    let fx = p.f_at_xbar()?;
    let jac = p.map.jacobian(&p.xbar)?;
    let grad = p.objective.gradient(&p.xbar)?;
    let c = p.constraint.as_ref().expect("constrained class");

    let mut ineq = vec![grad.clone()];
    let mut eq: Vec<Vec<f64>> = Vec::new();

    let compose = |row: &[f64]| -> Vec<f64> {
        // rowᵀ ∇F(x̄)
        let mut out = vec![0.0; p.xbar.len()];
        for (ri, jr) in row.iter().zip(&jac) {
            for (o, v) in out.iter_mut().zip(jr) {
                *o += ri * v;
            }
        }
        out
    };

    if let Some(blocks) = soc_blocks(c) {
        let mut cone_blocks = Vec::new();
        let mut off = 0;
        for q in &blocks {
            let slice = &fx[off..off + q.dim()];
            match q.classify(slice)? {
                SocLocation::Apex => {
                    return Ok(Err(
                        "cone block at the apex: critical cone is not polyhedral".to_string()
                    ));
                }
                SocLocation::Interior => {
                    cone_blocks.push(SocBlockRay {
                        offset: off,
                        dim: q.dim(),
                        ray: None,
                    });
                }
                SocLocation::Boundary => {
                    let mut qd = slice.to_vec();
                    qd[0] = -slice[0];
                    let mut full = vec![0.0; fx.len()];
                    full[off..off + q.dim()].copy_from_slice(&qd);
                    ineq.push(compose(&full));
                    cone_blocks.push(SocBlockRay {
                        offset: off,
                        dim: q.dim(),
                        ray: Some(qd),
                    });
                }
            }
            off += q.dim();
        }
        let total_dim = fx.len();
        return Ok(Ok(CriticalRows {
            ineq,
            eq,
            structure: MultiplierStructure::ConeRays {
                blocks: cone_blocks,
                total_dim,
            },
        }));
    }

    let poly = match c {
        ClosedSet::PolyhedralUnion(ps) => {
            let active = c.union_active(&fx)?;
            if active.len() != 1 {
                return Ok(Err(
                    "union with several active branches: critical cone may not be a subspace"
                        .to_string(),
                ));
            }
            ps[active[0]].clone()
        }
        _ => match c.to_polyhedron() {
            Some(poly) => poly,
            None => {
                return Ok(Err(
                    "constraint is not polyhedral or a cone product".to_string()
                ))
            }
        },
    };
    let active = poly.active_set(&fx)?;
    let (rows, _) = poly.ineq_rows();
    let mut gens = Vec::new();
    for &i in &active {
        ineq.push(compose(&rows[i]));
        gens.push(rows[i].clone());
    }
    let (eq_rows, _) = poly.eq_rows();
    let mut lines = Vec::new();
    for row in eq_rows {
        eq.push(compose(row));
        lines.push(row.clone());
    }
    Ok(Ok(CriticalRows {
        ineq,
        eq,
        structure: MultiplierStructure::Polyhedral { gens, lines },
    }))
}

/// One multiplier pair valid on the whole basis, found by exact LP:
/// stationarity, cone membership orthogonal to the subspace image, and a
/// positive certified value on every basis vector.
fn subspace_multiplier(
    p: &ProblemInstance,
    rows: &CriticalRows,
    basis: &[Vec<f64>],
) -> Result<Option<(f64, Vec<f64>, Vec<f64>)>> {
    let jac = p.map.jacobian(&p.xbar)?;
    let grad = p.objective.gradient(&p.xbar)?;
    let h0 = p.objective.hessians(&p.xbar)?;
    let hf = p.map.hessians(&p.xbar)?;
    let n = p.xbar.len();
    let m = p.map.dim_out();

    let mut lp = RationalLp::new(1);
    lp.set_nonneg(0); // α
    let lambda_start = lp.num_vars();
    for _ in 0..m {
        lp.add_var(false);
    }

    let mut block_betas: Vec<Option<usize>> = Vec::new();
    match &rows.structure {
        MultiplierStructure::Polyhedral { gens, lines } => {
            // Keep only generators orthogonal to the subspace image: those
            // are the rows doubly active for every critical direction.
            let usable: Vec<&Vec<f64>> = gens
                .iter()
                .filter(|g| {
                    basis.iter().all(|z| {
                        let fz = linalg::mat_vec(&jac, z);
                        linalg::dot(g, &fz).abs() <= 1e-7
                    })
                })
                .collect();
            let mu: Vec<usize> = usable.iter().map(|_| lp.add_var(true)).collect();
            let nu: Vec<usize> = lines.iter().map(|_| lp.add_var(false)).collect();
            for i in 0..m {
                let mut row = vec![Rational::zero(); lp.num_vars()];
                row[lambda_start + i] = Rational::lift(1.0);
                for (g, &mj) in usable.iter().zip(&mu) {
                    row[mj] = -Rational::lift(g[i]);
                }
                for (l, &nj) in lines.iter().zip(&nu) {
                    row[nj] = -Rational::lift(l[i]);
                }
                lp.add_eq(row, Rational::zero());
            }
        }
        MultiplierStructure::ConeRays { blocks, total_dim } => {
            debug_assert_eq!(*total_dim, m);
            for block in blocks {
                match &block.ray {
                    None => {
                        block_betas.push(None);
                        for i in 0..block.dim {
                            let mut row = vec![Rational::zero(); lp.num_vars()];
                            row[lambda_start + block.offset + i] = Rational::lift(1.0);
                            lp.add_eq(row, Rational::zero());
                        }
                    }
                    Some(dir) => {
                        // β allowed only when the ray annihilates the
                        // whole subspace image on this block.
                        let orth = basis.iter().all(|z| {
                            let fz = linalg::mat_vec(&jac, z);
                            let s = &fz[block.offset..block.offset + block.dim];
                            linalg::dot(dir, s).abs() <= 1e-7
                        });
                        if orth {
                            let beta = lp.add_var(true);
                            block_betas.push(Some(beta));
                            for i in 0..block.dim {
                                let mut row = vec![Rational::zero(); lp.num_vars()];
                                row[lambda_start + block.offset + i] = Rational::lift(1.0);
                                row[beta] = -Rational::lift(dir[i]);
                                lp.add_eq(row, Rational::zero());
                            }
                        } else {
                            block_betas.push(None);
                            for i in 0..block.dim {
                                let mut row = vec![Rational::zero(); lp.num_vars()];
                                row[lambda_start + block.offset + i] = Rational::lift(1.0);
                                lp.add_eq(row, Rational::zero());
                            }
                        }
                    }
                }
            }
        }
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

    // Positive certified value on every basis vector.
    for z in basis {
        let q0 = linalg::quad_form(&h0[0], z);
        let mut row = vec![Rational::zero(); lp.num_vars()];
        row[0] = Rational::lift(q0);
        for j in 0..m {
            row[lambda_start + j] = Rational::lift(linalg::quad_form(&hf[j], z));
        }
        if let MultiplierStructure::ConeRays { blocks, .. } = &rows.structure {
            let fz = linalg::mat_vec(&jac, z);
            for (block, beta) in blocks.iter().zip(&block_betas) {
                if let (Some(dir), Some(b)) = (&block.ray, beta) {
                    let _ = dir;
                    let s = &fz[block.offset..block.offset + block.dim];
                    let c = circ_dot(s, s) - s[0] * s[0];
                    row[*b] = row[*b].clone() + Rational::lift(c);
                }
            }
        }
        lp.add_ge(row, Rational::lift(1.0));
    }

    let Some(witness) = lp.feasible().witness().map(|w| w.to_vec()) else {
        return Ok(None);
    };
    let alpha = witness[0].approx();
    let lambda: Vec<f64> = (0..m).map(|j| witness[lambda_start + j].approx()).collect();
    let betas: Vec<f64> = block_betas
        .iter()
        .map(|b| b.map_or(0.0, |i| witness[i].approx()))
        .collect();
    Ok(Some((alpha, lambda, betas)))
}

/// Consistency check exposed for tests: the post-conditions recorded on a
/// certificate (annihilation and cone membership).
pub fn post_check_passes(c: &DirectionCertificate) -> bool {
    c.multiplier_checks.pairing.abs() <= 1e-6
        && c.multiplier_checks.in_directional_proximal_normal_cone != Ternary::No
        && c.multiplier_checks.stationarity_residual <= 1e-6
}

/// Linear row systems whose solution cones cover the critical cone:
/// one `(ineq, eq)` system per constraint branch. Used to focus the
/// sphere sampler on thin cones. Classes without a linearization return
/// an empty list.
pub(crate) fn critical_row_systems(
    p: &ProblemInstance,
) -> Result<Vec<(Vec<Vec<f64>>, Vec<Vec<f64>>)>> {
    let grad = p.objective.gradient(&p.xbar)?;
    let jac = p.map.jacobian(&p.xbar)?;
    let fx = p.f_at_xbar()?;
    let compose = |row: &[f64]| -> Vec<f64> {
        let mut out = vec![0.0; p.xbar.len()];
        for (ri, jr) in row.iter().zip(&jac) {
            for (o, v) in out.iter_mut().zip(jr) {
                *o += ri * v;
            }
        }
        out
    };

    if p.kind == ProblemKind::Composite {
        let g = p.outer.as_ref().expect("validated");
        return Ok(match g {
            crate::subderiv::FunctionExpr::L0(_) => {
                let mut eq = Vec::new();
                for (j, row) in jac.iter().enumerate() {
                    if fx[j].abs() <= 1e-9 {
                        eq.push(row.clone());
                    }
                }
                vec![(vec![grad], eq)]
            }
            crate::subderiv::FunctionExpr::Smooth(gs) => {
                let gg = gs.gradient(&fx)?;
                let slope_row = linalg::add(&grad, &compose(&gg));
                vec![(vec![slope_row], Vec::new())]
            }
            _ => Vec::new(),
        });
    }
    let Some(c) = p.constraint.as_ref() else {
        return Ok(Vec::new());
    };
    let branches: Vec<crate::sets::PolyhedronF> = match c {
        ClosedSet::PolyhedralUnion(ps) => {
            let mut out = Vec::new();
            for b in ps {
                if b.member(&fx)? {
                    out.push(b.clone());
                }
            }
            out
        }
        _ => match c.to_polyhedron() {
            Some(poly) => vec![poly],
            None => {
                if let Some(blocks) = soc_blocks(c) {
                    let mut ineq = vec![grad.clone()];
                    let mut off = 0;
                    for q in blocks {
                        let slice = &fx[off..off + q.dim()];
                        if q.classify(slice)? == SocLocation::Boundary {
                            let mut qd = slice.to_vec();
                            qd[0] = -slice[0];
                            let mut full = vec![0.0; fx.len()];
                            full[off..off + q.dim()].copy_from_slice(&qd);
                            ineq.push(compose(&full));
                        }
                        off += q.dim();
                    }
                    return Ok(vec![(ineq, Vec::new())]);
                }
                return Ok(Vec::new());
            }
        },
    };
    let mut systems = Vec::new();
    for poly in branches {
        let mut ineq = vec![grad.clone()];
        let active = poly.active_set(&fx)?;
        let (rows, _) = poly.ineq_rows();
        for &i in &active {
            ineq.push(compose(&rows[i]));
        }
        let (eq_rows, _) = poly.eq_rows();
        let eq: Vec<Vec<f64>> = eq_rows.iter().map(|r| compose(r)).collect();
        systems.push((ineq, eq));
    }
    Ok(systems)
}
