//! Closed-set atoms and their cone geometry: membership, tangent cones,
//! normal cones, directional proximal (pre-)normal cones, projections.

pub mod curvature;
pub mod polyhedron;
pub mod soc;

use crate::error::{CurvError, Result};
use crate::linalg;
use crate::lp::RationalLp;
use num_traits::Zero;
use crate::scalar::{lift_vec, Rational, Scalar};
use crate::smooth::SmoothMap;

pub use polyhedron::{Polyhedron, PolyhedronF, PolyhedronQ};
pub use soc::{circ_dot, circ_norm, SecondOrderCone, SocLocation};

pub const SET_TOL: f64 = 1e-9;

/// Three-valued answer for cone membership questions that may be
/// undecidable from one-sided curvature information.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Ternary {
    Yes,
    No,
    Unknown,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum NormalMode {
    PreNormal,
    Normal,
}

/// How a tangency answer relates to the true tangent cone.
///
/// Pre-image tests are outer estimates (a "true" can be spurious), image
/// tests are inner estimates (a "false" can be spurious).
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ConeEstimate {
    Exact,
    OuterEstimate,
    InnerEstimate,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct TangentVerdict {
    pub holds: bool,
    pub estimate: ConeEstimate,
}

impl TangentVerdict {
    fn exact(holds: bool) -> Self {
        TangentVerdict {
            holds,
            estimate: ConeEstimate::Exact,
        }
    }

    /// Exact answers are trustworthy either way; outer estimates only
    /// certify "not tangent", inner estimates only certify "tangent".
    pub fn certifies_tangent(&self) -> bool {
        self.holds && self.estimate != ConeEstimate::OuterEstimate
    }

    pub fn certifies_not_tangent(&self) -> bool {
        !self.holds && self.estimate != ConeEstimate::InnerEstimate
    }
}

/// Axis-aligned box with optionally infinite bounds.
#[derive(Clone, Debug, PartialEq)]
pub struct BoxSet {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

impl BoxSet {
    pub fn new(lower: Vec<f64>, upper: Vec<f64>) -> Self {
        assert_eq!(lower.len(), upper.len());
        assert!(lower.iter().zip(&upper).all(|(l, u)| l <= u));
        BoxSet { lower, upper }
    }

    pub fn whole_space(n: usize) -> Self {
        BoxSet::new(vec![f64::NEG_INFINITY; n], vec![f64::INFINITY; n])
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    pub fn member(&self, y: &[f64], tol: f64) -> bool {
        y.iter()
            .zip(self.lower.iter().zip(&self.upper))
            .all(|(v, (l, u))| *v >= l - tol && *v <= u + tol)
    }

    pub fn project(&self, x: &[f64]) -> Vec<f64> {
        x.iter()
            .zip(self.lower.iter().zip(&self.upper))
            .map(|(v, (l, u))| v.max(*l).min(*u))
            .collect()
    }

    /// Finite rows of the box as a polyhedron.
    pub fn to_polyhedron(&self) -> PolyhedronF {
        let n = self.dim();
        let mut rows = Vec::new();
        let mut rhs = Vec::new();
        for i in 0..n {
            if self.upper[i].is_finite() {
                let mut r = vec![0.0; n];
                r[i] = 1.0;
                rows.push(r);
                rhs.push(self.upper[i]);
            }
            if self.lower[i].is_finite() {
                let mut r = vec![0.0; n];
                r[i] = -1.0;
                rows.push(r);
                rhs.push(-self.lower[i]);
            }
        }
        if rows.is_empty() {
            return PolyhedronF::whole_space(n);
        }
        PolyhedronF::new(rows, rhs)
    }
}

/// Candidate pre-images keyed by query point (for image atoms, whose
/// fibers `Φ(y) = Q ∩ G⁻¹(y)` cannot be computed in general).
#[derive(Clone, Debug, Default, PartialEq)]
pub struct CandidateTable {
    entries: Vec<(Vec<f64>, Vec<Vec<f64>>)>,
}

impl CandidateTable {
    pub fn new() -> Self {
        CandidateTable::default()
    }

    pub fn insert(&mut self, point: Vec<f64>, preimages: Vec<Vec<f64>>) {
        self.entries.push((point, preimages));
    }

    pub fn lookup(&self, point: &[f64], tol: f64) -> Option<&[Vec<f64>]> {
        self.entries
            .iter()
            .find(|(p, _)| {
                p.len() == point.len() && linalg::norm(&linalg::sub(p, point)) <= tol
            })
            .map(|(_, pre)| pre.as_slice())
    }

    pub fn entries(&self) -> &[(Vec<f64>, Vec<Vec<f64>>)] {
        &self.entries
    }
}

/// Tagged union of the supported closed-set atoms.
#[derive(Clone, Debug)]
pub enum ClosedSet {
    Polyhedron(PolyhedronF),
    PolyhedralUnion(Vec<PolyhedronF>),
    Box(BoxSet),
    Soc(SecondOrderCone),
    Product(Vec<ClosedSet>),
    PreImage {
        map: SmoothMap,
        inner: Box<ClosedSet>,
    },
    Image {
        map: SmoothMap,
        inner: Box<ClosedSet>,
        candidates: CandidateTable,
        inner_semicompact: bool,
        inner_calm_star: bool,
    },
}

impl ClosedSet {
    pub fn halfline_nonpositive() -> Self {
        ClosedSet::Polyhedron(PolyhedronF::halfline_nonpositive())
    }

    pub fn dim(&self) -> usize {
        match self {
            ClosedSet::Polyhedron(p) => p.dim(),
            ClosedSet::PolyhedralUnion(ps) => ps[0].dim(),
            ClosedSet::Box(b) => b.dim(),
            ClosedSet::Soc(c) => c.dim(),
            ClosedSet::Product(fs) => fs.iter().map(|f| f.dim()).sum(),
            ClosedSet::PreImage { map, .. } => map.dim_in(),
            ClosedSet::Image { map, .. } => map.dim_out(),
        }
    }

    pub fn is_convex(&self) -> bool {
        match self {
            ClosedSet::Polyhedron(_) | ClosedSet::Box(_) | ClosedSet::Soc(_) => true,
            ClosedSet::PolyhedralUnion(ps) => ps.len() == 1,
            ClosedSet::Product(fs) => fs.iter().all(|f| f.is_convex()),
            _ => false,
        }
    }

    /// All cone queries on this atom are decided exactly.
    pub fn is_exact_atom(&self) -> bool {
        match self {
            ClosedSet::Polyhedron(_)
            | ClosedSet::PolyhedralUnion(_)
            | ClosedSet::Box(_)
            | ClosedSet::Soc(_) => true,
            ClosedSet::Product(fs) => fs.iter().all(|f| f.is_exact_atom()),
            _ => false,
        }
    }

    /// Convex and polyhedral: representable as one `{Ay <= b, Ey = e}`.
    pub fn to_polyhedron(&self) -> Option<PolyhedronF> {
        match self {
            ClosedSet::Polyhedron(p) => Some(p.clone()),
            ClosedSet::PolyhedralUnion(ps) if ps.len() == 1 => Some(ps[0].clone()),
            ClosedSet::Box(b) => Some(b.to_polyhedron()),
            ClosedSet::Product(fs) => {
                let parts: Option<Vec<PolyhedronF>> =
                    fs.iter().map(|f| f.to_polyhedron()).collect();
                Some(product_polyhedron(&parts?))
            }
            _ => None,
        }
    }

    fn check_dim(&self, y: &[f64]) -> Result<()> {
        if y.len() != self.dim() {
            return Err(CurvError::DimensionMismatch {
                expected: self.dim(),
                got: y.len(),
            });
        }
        Ok(())
    }

    /// Splits a product-space vector into per-factor slices.
    fn split<'a>(&self, fs: &[ClosedSet], y: &'a [f64]) -> Vec<&'a [f64]> {
        let mut out = Vec::with_capacity(fs.len());
        let mut off = 0;
        for f in fs {
            out.push(&y[off..off + f.dim()]);
            off += f.dim();
        }
        out
    }

    pub fn member(&self, y: &[f64], tol: f64) -> Result<bool> {
        self.check_dim(y)?;
        match self {
            ClosedSet::Polyhedron(p) => p.member_tol(y, tol),
            ClosedSet::PolyhedralUnion(ps) => {
                for p in ps {
                    if p.member_tol(y, tol)? {
                        return Ok(true);
                    }
                }
                Ok(false)
            }
            ClosedSet::Box(b) => Ok(b.member(y, tol)),
            ClosedSet::Soc(c) => c.member(y, tol),
            ClosedSet::Product(fs) => {
                for (f, part) in fs.iter().zip(self.split(fs, y)) {
                    if !f.member(part, tol)? {
                        return Ok(false);
                    }
                }
                Ok(true)
            }
            ClosedSet::PreImage { map, inner } => inner.member(&map.value(y)?, tol),
            ClosedSet::Image {
                map,
                inner,
                candidates,
                ..
            } => {
                let Some(pre) = candidates.lookup(y, tol.max(SET_TOL)) else {
                    return Err(CurvError::MissingCandidates);
                };
                for z in pre {
                    let gz = map.value(z)?;
                    if linalg::norm(&linalg::sub(&gz, y)) <= tol && inner.member(z, tol)? {
                        return Ok(true);
                    }
                }
                Ok(false)
            }
        }
    }

    /// Active branches of a union containing `y`.
    pub fn union_active(&self, y: &[f64]) -> Result<Vec<usize>> {
        let ClosedSet::PolyhedralUnion(ps) = self else {
            return Err(CurvError::Unsupported("union_active on non-union"));
        };
        let mut idx = Vec::new();
        for (i, p) in ps.iter().enumerate() {
            if p.member(y)? {
                idx.push(i);
            }
        }
        Ok(idx)
    }

    pub fn tangent_member(&self, y: &[f64], v: &[f64]) -> Result<TangentVerdict> {
        self.check_dim(y)?;
        self.check_dim(v)?;
        match self {
            ClosedSet::Polyhedron(p) => Ok(TangentVerdict::exact(p.tangent_member(y, v)?)),
            ClosedSet::PolyhedralUnion(ps) => {
                for p in ps {
                    if p.member(y)? && p.tangent_member(y, v)? {
                        return Ok(TangentVerdict::exact(true));
                    }
                }
                Ok(TangentVerdict::exact(false))
            }
            ClosedSet::Box(b) => {
                let ok = (0..b.dim()).all(|i| {
                    let at_lower = (y[i] - b.lower[i]).abs() <= SET_TOL;
                    let at_upper = (y[i] - b.upper[i]).abs() <= SET_TOL;
                    (!at_lower || v[i] >= -SET_TOL) && (!at_upper || v[i] <= SET_TOL)
                });
                Ok(TangentVerdict::exact(ok))
            }
            ClosedSet::Soc(c) => Ok(TangentVerdict::exact(c.tangent_member(y, v)?)),
            ClosedSet::Product(fs) => {
                let ys = self.split(fs, y);
                let vs = self.split(fs, v);
                let mut estimate = ConeEstimate::Exact;
                let mut holds = true;
                for ((f, yp), vp) in fs.iter().zip(ys).zip(vs) {
                    let t = f.tangent_member(yp, vp)?;
                    holds &= t.holds;
                    if t.estimate != ConeEstimate::Exact {
                        estimate = t.estimate;
                    }
                }
                Ok(TangentVerdict { holds, estimate })
            }
            ClosedSet::PreImage { map, inner } => {
                // Outer estimate: T_S(y) ⊂ ∇F(y)⁻¹ T_C(F(y)).
                let fx = map.value(y)?;
                let jv = linalg::mat_vec(&map.jacobian(y)?, v);
                let t = inner.tangent_member(&fx, &jv)?;
                Ok(TangentVerdict {
                    holds: t.holds,
                    estimate: ConeEstimate::OuterEstimate,
                })
            }
            ClosedSet::Image {
                map,
                inner,
                candidates,
                ..
            } => {
                let Some(pre) = candidates.lookup(y, SET_TOL) else {
                    return Err(CurvError::MissingCandidates);
                };
                for z in pre {
                    if image_lift_tangent(map, inner, z, v)? {
                        return Ok(TangentVerdict {
                            holds: true,
                            estimate: ConeEstimate::InnerEstimate,
                        });
                    }
                }
                Ok(TangentVerdict {
                    holds: false,
                    estimate: ConeEstimate::InnerEstimate,
                })
            }
        }
    }

    /// `z* ∈ N_S(y)` for convex atoms (limiting = regular = convex normal
    /// cone). Errors on non-convex atoms.
    pub fn normal_cone_member(&self, y: &[f64], zstar: &[f64]) -> Result<bool> {
        match self {
            ClosedSet::Polyhedron(p) => p.normal_cone_member(y, zstar),
            ClosedSet::PolyhedralUnion(ps) if ps.len() == 1 => {
                ps[0].normal_cone_member(y, zstar)
            }
            ClosedSet::Box(b) => {
                let ok = (0..b.dim()).all(|i| {
                    let at_lower = (y[i] - b.lower[i]).abs() <= SET_TOL;
                    let at_upper = (y[i] - b.upper[i]).abs() <= SET_TOL;
                    match (at_lower, at_upper) {
                        (true, true) => true,
                        (true, false) => zstar[i] <= SET_TOL,
                        (false, true) => zstar[i] >= -SET_TOL,
                        (false, false) => zstar[i].abs() <= SET_TOL,
                    }
                });
                Ok(ok)
            }
            ClosedSet::Soc(c) => c.normal_cone_member(y, zstar),
            ClosedSet::Product(fs) => {
                let ys = self.split(fs, y);
                let zs = self.split(fs, zstar);
                for ((f, yp), zp) in fs.iter().zip(ys).zip(zs) {
                    if !f.normal_cone_member(yp, zp)? {
                        return Ok(false);
                    }
                }
                Ok(true)
            }
            _ => Err(CurvError::Unsupported(
                "normal cone membership needs a convex atom",
            )),
        }
    }

    /// Membership in the directional proximal pre-normal or normal cone.
    ///
    /// Exact on convex atoms and polyhedral unions; other atoms answer
    /// through the curvature dispatch and may return `Unknown`.
    pub fn proximal_normal_member(
        &self,
        y: &[f64],
        w: &[f64],
        zstar: &[f64],
        mode: NormalMode,
    ) -> Result<Ternary> {
        if !self.member(y, SET_TOL)? {
            return Err(CurvError::InfeasibleBasePoint);
        }
        let tangent = self.tangent_member(y, w)?;
        if tangent.certifies_not_tangent() {
            // Both cones are empty outside the tangent cone.
            return Ok(Ternary::No);
        }
        let pairing = linalg::dot(zstar, w);

        if self.is_convex() {
            // Convex case: N̂ᵖ_S(y; w) = N_S(y) ∩ {w}^⊥ and the pre-normal
            // cone adds the open half-space {<z*, w> < 0}.
            return Ok(match mode {
                NormalMode::Normal => {
                    if pairing.abs() <= SET_TOL && self.normal_cone_member(y, zstar)? {
                        Ternary::Yes
                    } else {
                        Ternary::No
                    }
                }
                NormalMode::PreNormal => {
                    if pairing < -SET_TOL {
                        Ternary::Yes
                    } else if pairing > SET_TOL {
                        Ternary::No
                    } else if self.normal_cone_member(y, zstar)? {
                        Ternary::Yes
                    } else {
                        Ternary::No
                    }
                }
            });
        }

        if let ClosedSet::PolyhedralUnion(ps) = self {
            // Intersection over branches whose tangent cone contains w.
            let mut hit = false;
            for p in ps {
                if p.member(y)? && p.tangent_member(y, w)? {
                    hit = true;
                    let ok = match mode {
                        NormalMode::Normal => {
                            pairing.abs() <= SET_TOL
                                && p.normal_of_tangent_member(y, w, zstar)?
                        }
                        NormalMode::PreNormal => {
                            pairing < -SET_TOL || p.normal_of_tangent_member(y, w, zstar)?
                        }
                    };
                    if !ok {
                        return Ok(Ternary::No);
                    }
                }
            }
            return Ok(if hit { Ternary::Yes } else { Ternary::No });
        }

        // General atoms: decide through the second subderivative of the
        // indicator (finite from below <=> pre-normal membership).
        let d2 = curvature::indicator_curvature(self, y, zstar, w)?;
        let pre = if d2.certifies_above_neg_inf() {
            Ternary::Yes
        } else if d2.certifies_neg_inf() {
            Ternary::No
        } else {
            Ternary::Unknown
        };
        Ok(match mode {
            NormalMode::PreNormal => pre,
            NormalMode::Normal => {
                if pairing.abs() > SET_TOL {
                    Ternary::No
                } else {
                    pre
                }
            }
        })
    }

    /// Euclidean projection; multi-valued for unions.
    pub fn project(&self, x: &[f64]) -> Result<Vec<Vec<f64>>> {
        self.check_dim(x)?;
        match self {
            ClosedSet::Polyhedron(p) => Ok(vec![p.project(x)?]),
            ClosedSet::Box(b) => Ok(vec![b.project(x)]),
            ClosedSet::Soc(c) => Ok(vec![c.project(x)?]),
            ClosedSet::PolyhedralUnion(ps) => {
                let mut best = f64::INFINITY;
                let mut pts: Vec<(f64, Vec<f64>)> = Vec::new();
                for p in ps {
                    if !p.known_nonempty() {
                        continue;
                    }
                    let y = p.project(x)?;
                    let d = linalg::norm(&linalg::sub(&y, x));
                    best = best.min(d);
                    pts.push((d, y));
                }
                if pts.is_empty() {
                    return Err(CurvError::Unsupported("projection onto an empty union"));
                }
                let mut out: Vec<Vec<f64>> = Vec::new();
                for (d, y) in pts {
                    if d <= best + SET_TOL
                        && !out
                            .iter()
                            .any(|o| linalg::norm(&linalg::sub(o, &y)) <= SET_TOL)
                    {
                        out.push(y);
                    }
                }
                Ok(out)
            }
            ClosedSet::Product(fs) => {
                let parts = self.split(fs, x);
                let mut options: Vec<Vec<Vec<f64>>> = Vec::new();
                for (f, xp) in fs.iter().zip(parts) {
                    options.push(f.project(xp)?);
                }
                let mut combos: Vec<Vec<f64>> = vec![Vec::new()];
                for opt in options {
                    let mut next = Vec::new();
                    for prefix in &combos {
                        for choice in &opt {
                            let mut c = prefix.clone();
                            c.extend_from_slice(choice);
                            next.push(c);
                        }
                    }
                    combos = next;
                    if combos.len() > 256 {
                        return Err(CurvError::Unsupported(
                            "projection onto a product with too many branch combinations",
                        ));
                    }
                }
                // Factor-wise minimizers combine into global minimizers.
                Ok(combos)
            }
            _ => Err(CurvError::Unsupported(
                "projection is not available for pre-image or image atoms",
            )),
        }
    }

    /// Distance to the set via projection.
    pub fn distance(&self, x: &[f64]) -> Result<f64> {
        let pts = self.project(x)?;
        Ok(pts
            .iter()
            .map(|p| linalg::norm(&linalg::sub(p, x)))
            .fold(f64::INFINITY, f64::min))
    }

    /// The tangent cone at `y` as a set, when it is representable.
    pub fn tangent_cone_set(&self, y: &[f64]) -> Result<ClosedSet> {
        self.check_dim(y)?;
        match self {
            ClosedSet::Polyhedron(p) => Ok(ClosedSet::Polyhedron(p.tangent_cone(y)?)),
            ClosedSet::Box(b) => {
                let mut lower = vec![f64::NEG_INFINITY; b.dim()];
                let mut upper = vec![f64::INFINITY; b.dim()];
                for i in 0..b.dim() {
                    if (y[i] - b.lower[i]).abs() <= SET_TOL {
                        lower[i] = 0.0;
                    }
                    if (y[i] - b.upper[i]).abs() <= SET_TOL {
                        upper[i] = 0.0;
                    }
                }
                Ok(ClosedSet::Box(BoxSet::new(lower, upper)))
            }
            ClosedSet::Soc(c) => match c.classify(y)? {
                SocLocation::Interior => Ok(ClosedSet::Box(BoxSet::whole_space(c.dim()))),
                SocLocation::Apex => Ok(ClosedSet::Soc(*c)),
                SocLocation::Boundary => {
                    // Half-space {v : <<y, v>> <= y1 v1}.
                    let mut row = vec![0.0; c.dim()];
                    row[0] = -y[0];
                    row[1..].copy_from_slice(&y[1..]);
                    Ok(ClosedSet::Polyhedron(PolyhedronF::new(vec![row], vec![0.0])))
                }
            },
            ClosedSet::PolyhedralUnion(ps) => {
                let mut branches = Vec::new();
                for p in ps {
                    if p.member(y)? {
                        branches.push(p.tangent_cone(y)?);
                    }
                }
                if branches.is_empty() {
                    return Err(CurvError::InfeasibleBasePoint);
                }
                Ok(ClosedSet::PolyhedralUnion(branches))
            }
            ClosedSet::Product(fs) => {
                let parts = self.split(fs, y);
                let cones: Result<Vec<ClosedSet>> = fs
                    .iter()
                    .zip(parts)
                    .map(|(f, yp)| f.tangent_cone_set(yp))
                    .collect();
                Ok(ClosedSet::Product(cones?))
            }
            _ => Err(CurvError::Unsupported(
                "tangent cone set for pre-image or image atoms",
            )),
        }
    }
}

/// Concatenates polyhedra into the product polyhedron.
pub fn product_polyhedron(parts: &[PolyhedronF]) -> PolyhedronF {
    let dim: usize = parts.iter().map(|p| p.dim()).sum();
    let mut rows = Vec::new();
    let mut rhs = Vec::new();
    let mut eq_rows = Vec::new();
    let mut eq_rhs = Vec::new();
    let mut off = 0;
    for p in parts {
        let (a, b) = p.ineq_rows();
        for (r, v) in a.iter().zip(b) {
            let mut row = vec![0.0; dim];
            row[off..off + p.dim()].copy_from_slice(r);
            rows.push(row);
            rhs.push(*v);
        }
        let (ea, eb) = p.eq_rows();
        for (r, v) in ea.iter().zip(eb) {
            let mut row = vec![0.0; dim];
            row[off..off + p.dim()].copy_from_slice(r);
            eq_rows.push(row);
            eq_rhs.push(*v);
        }
        off += p.dim();
    }
    if rows.is_empty() && eq_rows.is_empty() {
        return PolyhedronF::whole_space(dim);
    }
    PolyhedronF::with_equalities(rows, rhs, eq_rows, eq_rhs)
}

/// Does some `w` with `∇G(z) w = v` lie in `T_Q(z)`?
///
/// Decided by exact LP when `Q` is polyhedral at `z`; otherwise tested on
/// finitely many solutions of the linear system.
fn image_lift_tangent(
    map: &SmoothMap,
    inner: &ClosedSet,
    z: &[f64],
    v: &[f64],
) -> Result<bool> {
    let jac = map.jacobian(z)?;
    if let Some(poly) = inner.to_polyhedron() {
        let pq = poly.to_rational();
        let zq = lift_vec(z);
        let active = pq.active_set(&zq)?;
        let (rows, _) = pq.ineq_rows();
        let (eq_rows, _) = pq.eq_rows();
        let mut lp = RationalLp::new(map.dim_in());
        for (jr, target) in jac.iter().zip(v) {
            lp.add_eq(lift_vec(jr), Rational::lift(*target));
        }
        for &i in &active {
            lp.add_le(rows[i].clone(), Rational::zero());
        }
        for row in eq_rows {
            lp.add_eq(row.clone(), Rational::zero());
        }
        return Ok(lp.feasible().is_feasible());
    }
    // Non-polyhedral fiber: probe the affine solution set.
    let Some(sol) = linalg::solve_affine(&jac, v, 1e-7) else {
        return Ok(false);
    };
    let mut probes = vec![sol.particular.clone()];
    for b in &sol.basis {
        for s in [1.0, -1.0, 0.25, -0.25] {
            probes.push(linalg::axpy(&sol.particular, s, b));
        }
    }
    for w in probes {
        if inner.tangent_member(z, &w)?.certifies_tangent() {
            return Ok(true);
        }
    }
    Ok(false)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cross() -> ClosedSet {
        // (R+ x {0}) ∪ ({0} x R+)
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
        ClosedSet::PolyhedralUnion(vec![b1, b2])
    }

    #[test]
    fn soc_membership_examples() {
        let q3 = ClosedSet::Soc(SecondOrderCone::new(3));
        assert!(q3.member(&[1.0, 0.0, 0.0], 1e-9).unwrap());
        assert!(!q3.member(&[0.0, 0.0, 1.0], 1e-9).unwrap());
        let h = ClosedSet::halfline_nonpositive();
        assert!(h.member(&[0.0], 1e-9).unwrap());
    }

    #[test]
    fn halfline_tangents() {
        let h = ClosedSet::halfline_nonpositive();
        assert!(h.tangent_member(&[0.0], &[-1.0]).unwrap().holds);
        assert!(!h.tangent_member(&[0.0], &[1.0]).unwrap().holds);
    }

    #[test]
    fn soc_boundary_tangent() {
        let q3 = ClosedSet::Soc(SecondOrderCone::new(3));
        let t = q3.tangent_member(&[1.0, 1.0, 0.0], &[2.0, 1.0, 0.0]).unwrap();
        assert!(t.holds && t.estimate == ConeEstimate::Exact);
    }

    #[test]
    fn union_projection_is_multivalued() {
        let pts = cross().project(&[1.0, 1.0]).unwrap();
        assert_eq!(pts.len(), 2);
        let close = |p: &[f64], q: [f64; 2]| linalg::norm(&linalg::sub(p, &q)) < 1e-9;
        assert!(pts.iter().any(|p| close(p, [1.0, 0.0])));
        assert!(pts.iter().any(|p| close(p, [0.0, 1.0])));
    }

    #[test]
    fn soc_closed_form_projection() {
        let q3 = ClosedSet::Soc(SecondOrderCone::new(3));
        assert_eq!(q3.project(&[0.0, 2.0, 0.0]).unwrap(), vec![vec![1.0, 1.0, 0.0]]);
        let h = ClosedSet::halfline_nonpositive();
        assert_eq!(h.project(&[5.0]).unwrap(), vec![vec![0.0]]);
    }

    #[test]
    fn proximal_normal_on_halfline() {
        let h = ClosedSet::halfline_nonpositive();
        assert_eq!(
            h.proximal_normal_member(&[0.0], &[0.0], &[1.0], NormalMode::Normal)
                .unwrap(),
            Ternary::Yes
        );
        // Non-tangent directions give the empty cone.
        assert_eq!(
            h.proximal_normal_member(&[0.0], &[1.0], &[0.5], NormalMode::Normal)
                .unwrap(),
            Ternary::No
        );
        // <z*, w> < 0 is always accepted in pre-normal mode.
        assert_eq!(
            h.proximal_normal_member(&[0.0], &[-1.0], &[1.0], NormalMode::PreNormal)
                .unwrap(),
            Ternary::Yes
        );
        assert_eq!(
            h.proximal_normal_member(&[0.0], &[-1.0], &[1.0], NormalMode::Normal)
                .unwrap(),
            Ternary::No
        );
    }

    #[test]
    fn proximal_normal_on_soc_boundary() {
        let q3 = ClosedSet::Soc(SecondOrderCone::new(3));
        let y = [1.0, 1.0, 0.0];
        // z* = q(y) is normal and orthogonal to w = y.
        assert_eq!(
            q3.proximal_normal_member(&y, &y, &[-1.0, 1.0, 0.0], NormalMode::Normal)
                .unwrap(),
            Ternary::Yes
        );
        assert_eq!(
            q3.proximal_normal_member(&y, &y, &[1.0, 0.0, 0.0], NormalMode::Normal)
                .unwrap(),
            Ternary::No
        );
    }

    #[test]
    fn union_proximal_normal_intersects_branches() {
        let s = cross();
        let origin = [0.0, 0.0];
        // w = (1, 0): only branch 1 is tangent; its tangent-normal cone at
        // w is {0} x R.
        assert_eq!(
            s.proximal_normal_member(&origin, &[1.0, 0.0], &[0.0, 3.0], NormalMode::Normal)
                .unwrap(),
            Ternary::Yes
        );
        assert_eq!(
            s.proximal_normal_member(&origin, &[1.0, 0.0], &[1.0, 0.0], NormalMode::Normal)
                .unwrap(),
            Ternary::No
        );
        // w = 0 keeps both branches: z* must be normal to both.
        assert_eq!(
            s.proximal_normal_member(&origin, &[0.0, 0.0], &[-1.0, -1.0], NormalMode::Normal)
                .unwrap(),
            Ternary::Yes
        );
    }

    #[test]
    fn preimage_membership_delegates() {
        // Disc: {x : x1² + x2² - 1 <= 0}.
        let f = crate::smooth::PolyForm::to_smooth_map(&[crate::smooth::PolyForm::Quadratic {
            q: vec![vec![2.0, 0.0], vec![0.0, 2.0]],
            a: vec![0.0, 0.0],
            c: -1.0,
        }]);
        let disc = ClosedSet::PreImage {
            map: f,
            inner: Box::new(ClosedSet::halfline_nonpositive()),
        };
        assert!(disc.member(&[0.5, 0.5], 1e-9).unwrap());
        assert!(!disc.member(&[1.0, 1.0], 1e-9).unwrap());
        let t = disc.tangent_member(&[1.0, 0.0], &[0.0, 1.0]).unwrap();
        assert!(t.holds && t.estimate == ConeEstimate::OuterEstimate);
        let t2 = disc.tangent_member(&[1.0, 0.0], &[1.0, 0.0]).unwrap();
        assert!(!t2.holds);
    }
}
