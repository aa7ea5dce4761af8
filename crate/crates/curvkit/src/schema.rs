//! Problem-file schema: JSON in, validated documents out.
//!
//! Files are parsed into a plain-data document first (pointer-tracked, so
//! schema errors name the offending JSON location), then compiled into
//! engine objects. Smooth atoms persisted to disk are restricted to the
//! polynomial forms, which keeps file-loaded derivatives exact.

use serde_json::{json, Map, Value};

use crate::error::{CurvError, Result};
use crate::oracle::SampleGrid;
use crate::sets::{BoxSet, CandidateTable, ClosedSet, PolyhedronF, SecondOrderCone};
use crate::smooth::{MonomialTerm, PolyForm};
use crate::sosc::{ProblemInstance, ProblemKind, StructuredData};
use crate::subderiv::FunctionExpr;

fn schema_err(pointer: &str, message: impl Into<String>) -> CurvError {
    CurvError::SchemaError {
        pointer: pointer.to_string(),
        message: message.into(),
    }
}

fn as_object<'a>(v: &'a Value, path: &str) -> Result<&'a Map<String, Value>> {
    v.as_object()
        .ok_or_else(|| schema_err(path, "expected an object"))
}

fn get<'a>(v: &'a Value, path: &str, key: &str) -> Result<(&'a Value, String)> {
    let obj = as_object(v, path)?;
    let child = obj
        .get(key)
        .ok_or_else(|| schema_err(&format!("{path}/{key}"), "missing field"))?;
    Ok((child, format!("{path}/{key}")))
}

fn get_opt<'a>(v: &'a Value, path: &str, key: &str) -> Option<(&'a Value, String)> {
    v.as_object()
        .and_then(|o| o.get(key))
        .map(|c| (c, format!("{path}/{key}")))
}

fn as_f64(v: &Value, path: &str) -> Result<f64> {
    v.as_f64()
        .ok_or_else(|| schema_err(path, "expected a number"))
}

fn as_usize(v: &Value, path: &str) -> Result<usize> {
    v.as_u64()
        .map(|x| x as usize)
        .ok_or_else(|| schema_err(path, "expected a non-negative integer"))
}

fn as_bool(v: &Value, path: &str) -> Result<bool> {
    v.as_bool()
        .ok_or_else(|| schema_err(path, "expected a boolean"))
}

fn as_str<'a>(v: &'a Value, path: &str) -> Result<&'a str> {
    v.as_str()
        .ok_or_else(|| schema_err(path, "expected a string"))
}

fn as_array<'a>(v: &'a Value, path: &str) -> Result<&'a Vec<Value>> {
    v.as_array()
        .ok_or_else(|| schema_err(path, "expected an array"))
}

fn vec_f64(v: &Value, path: &str) -> Result<Vec<f64>> {
    as_array(v, path)?
        .iter()
        .enumerate()
        .map(|(i, x)| as_f64(x, &format!("{path}/{i}")))
        .collect()
}

/// Numbers with `null` standing in for an infinite bound.
fn vec_bound(v: &Value, path: &str, sign: f64) -> Result<Vec<f64>> {
    as_array(v, path)?
        .iter()
        .enumerate()
        .map(|(i, x)| {
            if x.is_null() {
                Ok(sign * f64::INFINITY)
            } else {
                as_f64(x, &format!("{path}/{i}"))
            }
        })
        .collect()
}

fn mat_f64(v: &Value, path: &str) -> Result<Vec<Vec<f64>>> {
    as_array(v, path)?
        .iter()
        .enumerate()
        .map(|(i, row)| vec_f64(row, &format!("{path}/{i}")))
        .collect()
}

// ---------------------------------------------------------------------
// PolyForm

pub fn parse_polyform(v: &Value, path: &str) -> Result<PolyForm> {
    let (ty, typ) = get(v, path, "type")?;
    match as_str(ty, &typ)? {
        "affine" => {
            let (a, ap) = get(v, path, "a")?;
            let (b, bp) = get(v, path, "b")?;
            Ok(PolyForm::Affine {
                a: vec_f64(a, &ap)?,
                b: as_f64(b, &bp)?,
            })
        }
        "quadratic" => {
            let (q, qp) = get(v, path, "q")?;
            let (a, ap) = get(v, path, "a")?;
            let (c, cp) = get(v, path, "c")?;
            Ok(PolyForm::Quadratic {
                q: mat_f64(q, &qp)?,
                a: vec_f64(a, &ap)?,
                c: as_f64(c, &cp)?,
            })
        }
        "cubic" => {
            let (n, np) = get(v, path, "n")?;
            let n = as_usize(n, &np)?;
            let (terms, tp) = get(v, path, "terms")?;
            let terms = as_array(terms, &tp)?
                .iter()
                .enumerate()
                .map(|(i, t)| {
                    let tpath = format!("{tp}/{i}");
                    let (coef, cp) = get(t, &tpath, "coef")?;
                    let (powers, pp) = get(t, &tpath, "powers")?;
                    let powers: Vec<u32> = as_array(powers, &pp)?
                        .iter()
                        .enumerate()
                        .map(|(j, x)| as_usize(x, &format!("{pp}/{j}")).map(|u| u as u32))
                        .collect::<Result<_>>()?;
                    if powers.len() != n {
                        return Err(schema_err(&pp, "powers length must match n"));
                    }
                    if powers.iter().sum::<u32>() > 3 {
                        return Err(schema_err(&pp, "monomial degree above three"));
                    }
                    Ok(MonomialTerm {
                        coef: as_f64(coef, &cp)?,
                        powers,
                    })
                })
                .collect::<Result<_>>()?;
            Ok(PolyForm::CubicMonomialSum { n, terms })
        }
        other => Err(schema_err(&typ, format!("unknown form type `{other}`"))),
    }
}

pub fn polyform_to_value(f: &PolyForm) -> Value {
    match f {
        PolyForm::Affine { a, b } => json!({"type": "affine", "a": a, "b": b}),
        PolyForm::Quadratic { q, a, c } => {
            json!({"type": "quadratic", "q": q, "a": a, "c": c})
        }
        PolyForm::CubicMonomialSum { n, terms } => json!({
            "type": "cubic",
            "n": n,
            "terms": terms
                .iter()
                .map(|t| json!({"coef": t.coef, "powers": t.powers}))
                .collect::<Vec<_>>(),
        }),
    }
}

fn parse_map(v: &Value, path: &str) -> Result<Vec<PolyForm>> {
    let arr = as_array(v, path)?;
    if arr.is_empty() {
        return Err(schema_err(path, "map needs at least one component"));
    }
    arr.iter()
        .enumerate()
        .map(|(i, f)| parse_polyform(f, &format!("{path}/{i}")))
        .collect()
}

// ---------------------------------------------------------------------
// Sets

fn parse_candidates(v: &Value, path: &str) -> Result<CandidateTable> {
    let mut table = CandidateTable::new();
    for (i, entry) in as_array(v, path)?.iter().enumerate() {
        let epath = format!("{path}/{i}");
        let (pt, pp) = get(entry, &epath, "point")?;
        let (pre, prp) = get(entry, &epath, "preimages")?;
        table.insert(vec_f64(pt, &pp)?, mat_f64(pre, &prp)?);
    }
    Ok(table)
}

fn parse_polyhedron(v: &Value, path: &str) -> Result<PolyhedronF> {
    let (a, ap) = get(v, path, "a")?;
    let (b, bp) = get(v, path, "b")?;
    let a = mat_f64(a, &ap)?;
    let b = vec_f64(b, &bp)?;
    if a.len() != b.len() {
        return Err(schema_err(&bp, "row count mismatch between a and b"));
    }
    let (eq_a, eq_b) = match (get_opt(v, path, "eq_a"), get_opt(v, path, "eq_b")) {
        (Some((ea, eap)), Some((eb, ebp))) => (mat_f64(ea, &eap)?, vec_f64(eb, &ebp)?),
        (None, None) => (Vec::new(), Vec::new()),
        _ => return Err(schema_err(path, "eq_a and eq_b must appear together")),
    };
    Ok(PolyhedronF::with_equalities(a, b, eq_a, eq_b))
}

pub fn parse_set(v: &Value, path: &str) -> Result<ClosedSet> {
    let (ty, typ) = get(v, path, "type")?;
    match as_str(ty, &typ)? {
        "polyhedron" => Ok(ClosedSet::Polyhedron(parse_polyhedron(v, path)?)),
        "union" => {
            let (branches, bp) = get(v, path, "branches")?;
            let branches = as_array(branches, &bp)?
                .iter()
                .enumerate()
                .map(|(i, b)| parse_polyhedron(b, &format!("{bp}/{i}")))
                .collect::<Result<Vec<_>>>()?;
            if branches.is_empty() {
                return Err(schema_err(&bp, "union needs at least one branch"));
            }
            Ok(ClosedSet::PolyhedralUnion(branches))
        }
        "box" => {
            let (lo, lop) = get(v, path, "lower")?;
            let (up, upp) = get(v, path, "upper")?;
            Ok(ClosedSet::Box(BoxSet::new(
                vec_bound(lo, &lop, -1.0)?,
                vec_bound(up, &upp, 1.0)?,
            )))
        }
        "soc" => {
            let (d, dp) = get(v, path, "dim")?;
            Ok(ClosedSet::Soc(SecondOrderCone::new(as_usize(d, &dp)?)))
        }
        "product" => {
            let (fs, fp) = get(v, path, "factors")?;
            let factors = as_array(fs, &fp)?
                .iter()
                .enumerate()
                .map(|(i, f)| parse_set(f, &format!("{fp}/{i}")))
                .collect::<Result<Vec<_>>>()?;
            if factors.is_empty() {
                return Err(schema_err(&fp, "product needs at least one factor"));
            }
            Ok(ClosedSet::Product(factors))
        }
        "preimage" => {
            let (m, mp) = get(v, path, "map")?;
            let (inner, ip) = get(v, path, "inner")?;
            let map = PolyForm::to_smooth_map(&parse_map(m, &mp)?);
            let inner = parse_set(inner, &ip)?;
            if map.dim_out() != inner.dim() {
                return Err(schema_err(&ip, "inner set dimension must match map output"));
            }
            Ok(ClosedSet::PreImage {
                map,
                inner: Box::new(inner),
            })
        }
        "image" => {
            let (m, mp) = get(v, path, "map")?;
            let (inner, ip) = get(v, path, "inner")?;
            let map = PolyForm::to_smooth_map(&parse_map(m, &mp)?);
            let inner = parse_set(inner, &ip)?;
            if map.dim_in() != inner.dim() {
                return Err(schema_err(&ip, "inner set dimension must match map input"));
            }
            let candidates = match get_opt(v, path, "candidates") {
                Some((c, cp)) => parse_candidates(c, &cp)?,
                None => CandidateTable::new(),
            };
            let (isc, ics) = match get_opt(v, path, "assumptions") {
                Some((a, ap)) => {
                    let isc = match get_opt(a, &ap, "inner_semicompact") {
                        Some((b, bp)) => as_bool(b, &bp)?,
                        None => false,
                    };
                    let ics = match get_opt(a, &ap, "inner_calm_star") {
                        Some((b, bp)) => as_bool(b, &bp)?,
                        None => false,
                    };
                    (isc, ics)
                }
                None => (false, false),
            };
            Ok(ClosedSet::Image {
                map,
                inner: Box::new(inner),
                candidates,
                inner_semicompact: isc,
                inner_calm_star: ics,
            })
        }
        other => Err(schema_err(&typ, format!("unknown set type `{other}`"))),
    }
}

fn bound_to_value(x: f64) -> Value {
    if x.is_infinite() {
        Value::Null
    } else {
        json!(x)
    }
}

fn polyhedron_to_map(p: &PolyhedronF) -> Map<String, Value> {
    let (a, b) = p.ineq_rows();
    let mut m = Map::new();
    m.insert("type".into(), json!("polyhedron"));
    m.insert("a".into(), json!(a));
    m.insert("b".into(), json!(b));
    let (ea, eb) = p.eq_rows();
    if !ea.is_empty() {
        m.insert("eq_a".into(), json!(ea));
        m.insert("eq_b".into(), json!(eb));
    }
    m
}

pub fn set_to_value(s: &ClosedSet) -> Result<Value> {
    Ok(match s {
        ClosedSet::Polyhedron(p) => Value::Object(polyhedron_to_map(p)),
        ClosedSet::PolyhedralUnion(ps) => json!({
            "type": "union",
            "branches": ps
                .iter()
                .map(|p| Value::Object(polyhedron_to_map(p)))
                .collect::<Vec<_>>(),
        }),
        ClosedSet::Box(b) => json!({
            "type": "box",
            "lower": b.lower.iter().map(|x| bound_to_value(*x)).collect::<Vec<_>>(),
            "upper": b.upper.iter().map(|x| bound_to_value(*x)).collect::<Vec<_>>(),
        }),
        ClosedSet::Soc(c) => json!({"type": "soc", "dim": c.dim()}),
        ClosedSet::Product(fs) => json!({
            "type": "product",
            "factors": fs.iter().map(set_to_value).collect::<Result<Vec<_>>>()?,
        }),
        ClosedSet::PreImage { .. } | ClosedSet::Image { .. } => {
            return Err(CurvError::Unsupported(
                "serializing closure-backed set atoms; keep the parsed document instead",
            ))
        }
    })
}

// ---------------------------------------------------------------------
// Function expressions

pub fn parse_function(v: &Value, path: &str) -> Result<FunctionExpr> {
    let (ty, typ) = get(v, path, "type")?;
    match as_str(ty, &typ)? {
        "smooth" => {
            let (f, fp) = get(v, path, "form")?;
            Ok(FunctionExpr::Smooth(PolyForm::to_smooth_map(&[
                parse_polyform(f, &fp)?,
            ])))
        }
        "indicator" => {
            let (s, sp) = get(v, path, "set")?;
            Ok(FunctionExpr::Indicator(parse_set(s, &sp)?))
        }
        "eucl_norm" => {
            let (n, np) = get(v, path, "n")?;
            Ok(FunctionExpr::EuclNorm(as_usize(n, &np)?))
        }
        "vecmax" => {
            let (n, np) = get(v, path, "n")?;
            Ok(FunctionExpr::VecMax(as_usize(n, &np)?))
        }
        "l0" => {
            let (n, np) = get(v, path, "n")?;
            Ok(FunctionExpr::L0(as_usize(n, &np)?))
        }
        "dist" => {
            let (s, sp) = get(v, path, "set")?;
            Ok(FunctionExpr::Dist(parse_set(s, &sp)?))
        }
        "sum_smooth" => {
            let (f, fp) = get(v, path, "smooth")?;
            let (rest, rp) = get(v, path, "rest")?;
            let smooth = PolyForm::to_smooth_map(&[parse_polyform(f, &fp)?]);
            let rest = parse_function(rest, &rp)?;
            if smooth.dim_in() != rest.dim() {
                return Err(schema_err(&rp, "dimension mismatch in sum"));
            }
            Ok(FunctionExpr::SumSmooth {
                smooth,
                rest: Box::new(rest),
            })
        }
        "separable_sum" => {
            let (parts, pp) = get(v, path, "parts")?;
            let parts = as_array(parts, &pp)?
                .iter()
                .enumerate()
                .map(|(i, f)| parse_function(f, &format!("{pp}/{i}")))
                .collect::<Result<Vec<_>>>()?;
            if parts.is_empty() {
                return Err(schema_err(&pp, "separable sum needs parts"));
            }
            Ok(FunctionExpr::SeparableSum(parts))
        }
        "compose" => {
            let (outer, op) = get(v, path, "outer")?;
            let (inner, ip) = get(v, path, "inner")?;
            let outer = parse_function(outer, &op)?;
            let inner = PolyForm::to_smooth_map(&parse_map(inner, &ip)?);
            if outer.dim() != inner.dim_out() {
                return Err(schema_err(&ip, "inner map output must match outer input"));
            }
            Ok(FunctionExpr::Compose {
                outer: Box::new(outer),
                inner,
            })
        }
        "marginal" => {
            let (obj, op) = get(v, path, "objective")?;
            let (xd, xp) = get(v, path, "x_dim")?;
            let (mins, mp) = get(v, path, "minimizers")?;
            let v_grid = match get_opt(v, path, "v_grid") {
                Some((g, gp)) => mat_f64(g, &gp)?,
                None => Vec::new(),
            };
            let ics = match get_opt(v, path, "inner_calm_star") {
                Some((b, bp)) => as_bool(b, &bp)?,
                None => false,
            };
            Ok(FunctionExpr::MarginalFinite {
                objective: Box::new(parse_function(obj, &op)?),
                x_dim: as_usize(xd, &xp)?,
                minimizers: parse_candidates(mins, &mp)?,
                v_grid,
                inner_calm_star: ics,
            })
        }
        other => Err(schema_err(&typ, format!("unknown function type `{other}`"))),
    }
}

// ---------------------------------------------------------------------
// Whole problem files

#[derive(Clone, Debug)]
pub struct DirectionQuery {
    pub w: Vec<f64>,
    pub zstar: Option<Vec<f64>>,
}

#[derive(Clone, Debug)]
pub struct Tolerances {
    pub eps: f64,
    pub delta: f64,
    pub samples: usize,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            eps: 1e-2,
            delta: 1e-2,
            samples: 100_000,
        }
    }
}

/// A fully parsed problem file.
pub enum ParsedProblem {
    Instance(Box<ProblemInstance>),
    Bundle {
        function: FunctionExpr,
        point: Vec<f64>,
        set: Option<ClosedSet>,
    },
}

pub struct ProblemFile {
    pub parsed: ParsedProblem,
    pub point: Vec<f64>,
    pub directions: Vec<DirectionQuery>,
    pub grid: SampleGrid,
    pub tolerances: Tolerances,
    /// Canonical serialized form (round-trip stable).
    pub canonical: Value,
}

fn parse_directions(v: &Value, path: &str, dim: usize) -> Result<Vec<DirectionQuery>> {
    let mut out = Vec::new();
    for (i, d) in as_array(v, path)?.iter().enumerate() {
        let dpath = format!("{path}/{i}");
        let q = if d.is_array() {
            DirectionQuery {
                w: vec_f64(d, &dpath)?,
                zstar: None,
            }
        } else {
            let (w, wp) = get(d, &dpath, "w")?;
            let zstar = match get_opt(d, &dpath, "zstar") {
                Some((z, zp)) => Some(vec_f64(z, &zp)?),
                None => None,
            };
            DirectionQuery {
                w: vec_f64(w, &wp)?,
                zstar,
            }
        };
        if q.w.len() != dim {
            return Err(schema_err(&dpath, "direction dimension mismatch"));
        }
        if let Some(z) = &q.zstar {
            if z.len() != dim {
                return Err(schema_err(&dpath, "multiplier dimension mismatch"));
            }
        }
        out.push(q);
    }
    Ok(out)
}

fn parse_grid(v: &Value, path: &str) -> Result<SampleGrid> {
    let mut g = SampleGrid::default();
    if let Some((x, xp)) = get_opt(v, path, "t0") {
        g.t0 = as_f64(x, &xp)?;
    }
    if let Some((x, xp)) = get_opt(v, path, "rho") {
        g.rho = as_f64(x, &xp)?;
    }
    if let Some((x, xp)) = get_opt(v, path, "levels") {
        g.levels = as_usize(x, &xp)?;
    }
    if let Some((x, xp)) = get_opt(v, path, "dir_samples") {
        g.dir_samples = as_usize(x, &xp)?;
    }
    if let Some((x, xp)) = get_opt(v, path, "dir_radius0") {
        g.dir_radius0 = as_f64(x, &xp)?;
    }
    if let Some((x, xp)) = get_opt(v, path, "dir_decay") {
        g.dir_decay = as_f64(x, &xp)?;
    }
    if let Some((x, xp)) = get_opt(v, path, "seed") {
        g.seed = as_usize(x, &xp)? as u64;
    }
    g.validate()
        .map_err(|_| schema_err(path, "invalid sample grid parameters"))?;
    Ok(g)
}

/// Parses and validates a problem document.
pub fn parse_problem(v: &Value) -> Result<ProblemFile> {
    let path = "";
    let (point, pp) = get(v, path, "point")?;
    let point = vec_f64(point, &pp)?;

    let grid = match get_opt(v, path, "grid") {
        Some((g, gp)) => parse_grid(g, &gp)?,
        None => SampleGrid::default(),
    };
    let mut tolerances = Tolerances::default();
    if let Some((t, tp)) = get_opt(v, path, "tolerances") {
        if let Some((x, xp)) = get_opt(t, &tp, "eps") {
            tolerances.eps = as_f64(x, &xp)?;
        }
        if let Some((x, xp)) = get_opt(t, &tp, "delta") {
            tolerances.delta = as_f64(x, &xp)?;
        }
        if let Some((x, xp)) = get_opt(t, &tp, "samples") {
            tolerances.samples = as_usize(x, &xp)?;
        }
    }

    let parsed = if get_opt(v, path, "kind").is_some() {
        ParsedProblem::Instance(Box::new(parse_instance(v, path, &point)?))
    } else if get_opt(v, path, "function").is_some() {
        let (f, fp) = get(v, path, "function")?;
        let function = parse_function(f, &fp)?;
        if function.dim() != point.len() {
            return Err(schema_err(&pp, "point dimension must match the function"));
        }
        let set = match get_opt(v, path, "set") {
            Some((s, sp)) => Some(parse_set(s, &sp)?),
            None => None,
        };
        ParsedProblem::Bundle {
            function,
            point: point.clone(),
            set,
        }
    } else {
        return Err(schema_err("/kind", "expected `kind` or `function`"));
    };

    let directions = match get_opt(v, path, "directions") {
        Some((d, dp)) => parse_directions(d, &dp, point.len())?,
        None => Vec::new(),
    };

    let canonical = canonicalize(v);
    Ok(ProblemFile {
        parsed,
        point,
        directions,
        grid,
        tolerances,
        canonical,
    })
}

fn parse_instance(v: &Value, path: &str, point: &[f64]) -> Result<ProblemInstance> {
    let (kindv, kp) = get(v, path, "kind")?;
    let kind = match as_str(kindv, &kp)? {
        "geometric" => ProblemKind::Geometric,
        "disjunctive" => ProblemKind::Disjunctive,
        "socp" => ProblemKind::Socp,
        "structured" => ProblemKind::Structured,
        "composite" => ProblemKind::Composite,
        other => return Err(schema_err(&kp, format!("unknown kind `{other}`"))),
    };
    let (nv, np) = get(v, path, "variables")?;
    let n = as_usize(nv, &np)?;
    if point.len() != n {
        return Err(schema_err("/point", "point length must equal `variables`"));
    }
    let (objv, op) = get(v, path, "objective")?;
    let obj_form = parse_polyform(objv, &op)?;
    if obj_form.dim_in() != n {
        return Err(schema_err(&op, "objective dimension must equal `variables`"));
    }
    let objective = PolyForm::to_smooth_map(&[obj_form]);
    let (mapv, mp) = get(v, path, "map")?;
    let map_forms = parse_map(mapv, &mp)?;
    for (i, f) in map_forms.iter().enumerate() {
        if f.dim_in() != n {
            return Err(schema_err(
                &format!("{mp}/{i}"),
                "map component dimension must equal `variables`",
            ));
        }
    }
    let map = PolyForm::to_smooth_map(&map_forms);

    let mut constraint = None;
    let mut outer = None;
    let mut structured = None;
    match kind {
        ProblemKind::Composite => {
            let (g, gp) = get(v, path, "outer")?;
            let g = parse_function(g, &gp)?;
            if g.dim() != map.dim_out() {
                return Err(schema_err(&gp, "outer function must match map output"));
            }
            outer = Some(g);
        }
        ProblemKind::Structured => {
            let (s, sp) = get(v, path, "structured")?;
            let (h, hp) = get(s, &sp, "h")?;
            let (g, gp) = get(s, &sp, "g")?;
            let (d, dp) = get(s, &sp, "d")?;
            let (phi, php) = get(s, &sp, "phi_candidates")?;
            let h_map = PolyForm::to_smooth_map(&parse_map(h, &hp)?);
            let g_map = PolyForm::to_smooth_map(&parse_map(g, &gp)?);
            let d_set = parse_set(d, &dp)?;
            if h_map.dim_out() != map.dim_out() {
                return Err(schema_err(&hp, "H must land in the constraint image space"));
            }
            if g_map.dim_in() != h_map.dim_in() || g_map.dim_out() != d_set.dim() {
                return Err(schema_err(&gp, "G dimensions must chain H and D"));
            }
            let (isc, ics) = parse_assumptions(v, path)?;
            structured = Some(StructuredData {
                h_map,
                g_map,
                d_set,
                phi_candidates: mat_f64(phi, &php)?,
                inner_semicompact: isc,
                inner_calm_star: ics,
            });
        }
        _ => {
            let (s, sp) = get(v, path, "set")?;
            let set = parse_set(s, &sp)?;
            if set.dim() != map.dim_out() {
                return Err(schema_err(&sp, "set dimension must match map output"));
            }
            constraint = Some(set);
        }
    }

    let instance = ProblemInstance {
        kind,
        objective,
        map,
        constraint,
        outer,
        structured,
        xbar: point.to_vec(),
    };
    instance.validate()?;
    Ok(instance)
}

fn parse_assumptions(v: &Value, path: &str) -> Result<(bool, bool)> {
    match get_opt(v, path, "assumptions") {
        Some((a, ap)) => {
            let isc = match get_opt(a, &ap, "inner_semicompact") {
                Some((b, bp)) => as_bool(b, &bp)?,
                None => false,
            };
            let ics = match get_opt(a, &ap, "inner_calm_star") {
                Some((b, bp)) => as_bool(b, &bp)?,
                None => false,
            };
            Ok((isc, ics))
        }
        None => Ok((false, false)),
    }
}

/// Key-sorted copy; text round-trips through `serde_json` reproduce it
/// exactly.
pub fn canonicalize(v: &Value) -> Value {
    match v {
        Value::Object(m) => {
            let mut out = Map::new();
            let mut keys: Vec<&String> = m.keys().collect();
            keys.sort();
            for k in keys {
                out.insert(k.clone(), canonicalize(&m[k]));
            }
            Value::Object(out)
        }
        Value::Array(a) => Value::Array(a.iter().map(canonicalize).collect()),
        other => other.clone(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn disjunctive_value() -> Value {
        json!({
            "kind": "disjunctive",
            "variables": 2,
            "objective": {"type": "quadratic", "q": [[2.0, 0.0], [0.0, 2.0]], "a": [-2.0, -2.0], "c": 2.0},
            "map": [
                {"type": "affine", "a": [1.0, 0.0], "b": 0.0},
                {"type": "affine", "a": [0.0, 1.0], "b": 0.0}
            ],
            "set": {"type": "union", "branches": [
                {"type": "polyhedron", "a": [[-1.0, 0.0]], "b": [0.0], "eq_a": [[0.0, 1.0]], "eq_b": [0.0]},
                {"type": "polyhedron", "a": [[0.0, -1.0]], "b": [0.0], "eq_a": [[1.0, 0.0]], "eq_b": [0.0]}
            ]},
            "point": [1.0, 0.0]
        })
    }

    #[test]
    fn parses_disjunctive_instance() {
        let file = parse_problem(&disjunctive_value()).unwrap();
        let ParsedProblem::Instance(inst) = &file.parsed else {
            panic!("expected instance");
        };
        assert_eq!(inst.kind, ProblemKind::Disjunctive);
        match inst.constraint.as_ref().unwrap() {
            ClosedSet::PolyhedralUnion(ps) => assert_eq!(ps.len(), 2),
            _ => panic!("expected a union"),
        }
    }

    #[test]
    fn infeasible_base_point_rejected() {
        let mut v = disjunctive_value();
        v["point"] = json!([1.0, 1.0]);
        match parse_problem(&v) {
            Err(CurvError::InfeasibleBasePoint) => {}
            other => panic!("expected infeasible base point, got {:?}", other.is_ok()),
        }
    }

    #[test]
    fn malformed_set_names_pointer() {
        let mut v = disjunctive_value();
        v["set"] = json!({"type": "frobnicate"});
        match parse_problem(&v) {
            Err(CurvError::SchemaError { pointer, .. }) => {
                assert_eq!(pointer, "/set/type");
            }
            other => panic!("expected schema error, got ok={}", other.is_ok()),
        }
    }

    #[test]
    fn round_trip_is_identity_on_canonical_forms() {
        let v = disjunctive_value();
        let first = parse_problem(&v).unwrap().canonical;
        let text = serde_json::to_string(&first).unwrap();
        let reparsed: Value = serde_json::from_str(&text).unwrap();
        let second = parse_problem(&reparsed).unwrap().canonical;
        assert_eq!(first, second);
    }
}
