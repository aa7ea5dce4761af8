//! Independent numerical ground truth.
//!
//! The estimators discretize the joint liminf over `t ↓ 0, w' → w` with a
//! geometric scale ladder and direction balls that shrink strictly slower
//! than the scale, minimize the difference quotient per level, and
//! classify the level-minimum sequence. Everything is deterministic in
//! `(seed, level, sample index)`, so parallel and serial runs agree
//! bit-for-bit and enlarging the sample budget only refines minima.

use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{CurvError, Result};
use crate::extreal::{ExtReal, Finite, NegInf, PosInf};
use crate::linalg;
use crate::sets::ClosedSet;
use crate::smooth::SmoothMap;
use crate::subderiv::FunctionExpr;

/// Discretization of the liminf: scale ladder and direction balls.
#[derive(Clone, Debug, PartialEq)]
pub struct SampleGrid {
    pub t0: f64,
    pub rho: f64,
    pub levels: usize,
    pub dir_samples: usize,
    pub dir_radius0: f64,
    pub dir_decay: f64,
    pub seed: u64,
}

impl Default for SampleGrid {
    fn default() -> Self {
        SampleGrid {
            t0: 1e-1,
            rho: 0.5,
            levels: 16,
            dir_samples: 256,
            dir_radius0: 0.5,
            dir_decay: 0.7,
            seed: 0,
        }
    }
}

impl SampleGrid {
    pub fn with_seed(seed: u64) -> Self {
        SampleGrid {
            seed,
            ..Default::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let ok = self.t0 > 0.0
            && self.rho > 0.0
            && self.rho < 1.0
            && self.levels > 0
            && self.dir_samples > 0
            && self.dir_radius0 > 0.0
            && self.dir_decay > 0.0
            && self.dir_decay < 1.0
            && self.dir_radius0 * self.dir_decay.powi(self.levels as i32) > 1e-12;
        if ok {
            Ok(())
        } else {
            Err(CurvError::PreconditionViolated("invalid sample grid"))
        }
    }
}

/// Convergence classification of the level-minimum sequence.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Classification {
    ConvergesTo(f64),
    DivergesUp,
    DivergesDown,
    Inconclusive,
}

pub const CONV_ATOL: f64 = 1e-2;
pub const CONV_RTOL: f64 = 5e-2;
pub const DIVERGE_THRESHOLD: f64 = 1e3;

#[derive(Clone, Debug)]
pub struct OracleEstimate {
    pub level_minima: Vec<ExtReal>,
    pub classification: Classification,
    /// Witness `(t, w')` attaining each level minimum, when finite.
    pub certificate_points: Vec<Option<(f64, Vec<f64>)>>,
}

type EvalFn = Arc<dyn Fn(&[f64], f64) -> ExtReal + Send + Sync>;
type RepairFn = Arc<dyn Fn(&[f64]) -> Option<Vec<f64>> + Send + Sync>;

/// A pointwise evaluator, optionally with a feasibility repair (projection
/// onto the underlying set) for indicator-type functions.
#[derive(Clone)]
pub struct OracleFn {
    eval: EvalFn,
    repair: Option<RepairFn>,
    rejection_budget: bool,
}

impl OracleFn {
    pub fn new(eval: impl Fn(&[f64]) -> ExtReal + Send + Sync + 'static) -> Self {
        OracleFn {
            eval: Arc::new(move |x, _| eval(x)),
            repair: None,
            rejection_budget: false,
        }
    }

    /// Evaluator that receives the membership tolerance appropriate for
    /// the current quotient scale (indicator feasibility must tighten as
    /// `t²`, or slack leaks through the `1/t²` amplification).
    pub fn new_with_tol(eval: impl Fn(&[f64], f64) -> ExtReal + Send + Sync + 'static) -> Self {
        OracleFn {
            eval: Arc::new(eval),
            repair: None,
            rejection_budget: false,
        }
    }

    /// Marks the evaluator as indicator-like without a projector: sampling
    /// falls back to rejection with a 10x budget.
    pub fn with_rejection(mut self) -> Self {
        self.rejection_budget = true;
        self
    }

    pub fn with_repair(
        mut self,
        repair: impl Fn(&[f64]) -> Option<Vec<f64>> + Send + Sync + 'static,
    ) -> Self {
        self.repair = Some(Arc::new(repair));
        self
    }

    /// Evaluator for a function expression. Evaluation errors (missing
    /// candidates, unsupported projections) count as `+inf`.
    pub fn from_expr(expr: &FunctionExpr) -> Self {
        let indicator_set = match expr {
            FunctionExpr::Indicator(s) => {
                let projectable = s.project(&vec![0.0; s.dim()]).is_ok()
                    || matches!(s, ClosedSet::Product(_) | ClosedSet::PolyhedralUnion(_));
                projectable.then(|| s.clone())
            }
            _ => None,
        };
        let e = expr.clone();
        let mut f = match expr {
            FunctionExpr::Indicator(s) => {
                let set = s.clone();
                OracleFn::new_with_tol(move |x, tol| match set.member(x, tol) {
                    Ok(true) => Finite(0.0),
                    _ => PosInf,
                })
            }
            _ => OracleFn::new(move |x| e.value(x).unwrap_or(PosInf)),
        };
        if let Some(s) = indicator_set {
            f = f.with_repair(move |x| {
                s.project(x).ok().and_then(|pts| {
                    pts.into_iter().min_by(|a, b| {
                        let da = linalg::norm(&linalg::sub(a, x));
                        let db = linalg::norm(&linalg::sub(b, x));
                        da.partial_cmp(&db).unwrap()
                    })
                })
            });
        } else if matches!(expr, FunctionExpr::Indicator(_)) {
            f = f.with_rejection();
        }
        f
    }

    pub fn value(&self, x: &[f64]) -> ExtReal {
        (self.eval)(x, crate::sets::SET_TOL)
    }

    pub fn value_at_scale(&self, x: &[f64], tol: f64) -> ExtReal {
        (self.eval)(x, tol)
    }
}

/// Membership slack matched to the second-order quotient at scale `t`.
fn scale_tol(t: f64) -> f64 {
    (1e-3 * t * t).clamp(1e-14, 1e-9)
}

fn substream(seed: u64, level: usize, idx: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x9e37_79b9_7f4a_7c15);
    rng.set_stream(((level as u64) << 40) ^ idx);
    rng
}

fn gauss(rng: &mut ChaCha8Rng) -> f64 {
    // Box-Muller from two uniforms.
    let u1: f64 = rng.gen_range(f64::MIN_POSITIVE..1.0);
    let u2: f64 = rng.gen_range(0.0..1.0);
    (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
}

fn sample_in_ball(rng: &mut ChaCha8Rng, n: usize, radius: f64) -> Vec<f64> {
    let g: Vec<f64> = (0..n).map(|_| gauss(rng)).collect();
    let nrm = linalg::norm(&g);
    if nrm == 0.0 {
        return vec![0.0; n];
    }
    let u: f64 = rng.gen_range(0.0f64..1.0);
    let r = radius * u.powf(1.0 / n as f64);
    linalg::scale(&g, r / nrm)
}

fn sample_on_sphere(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    loop {
        let g: Vec<f64> = (0..n).map(|_| gauss(rng)).collect();
        let nrm = linalg::norm(&g);
        if nrm > 1e-9 {
            return linalg::scale(&g, 1.0 / nrm);
        }
    }
}

#[derive(Clone, Copy, PartialEq)]
enum Order {
    First,
    Second,
}

/// First-order liminf quotient estimator.
pub fn estimate_d(
    h: &OracleFn,
    zbar: &[f64],
    w: &[f64],
    grid: &SampleGrid,
) -> Result<OracleEstimate> {
    estimate(h, zbar, &vec![0.0; zbar.len()], w, grid, Order::First)
}

/// Second-order liminf quotient estimator for `d²h(z̄; z*)(w)`.
pub fn estimate_d2(
    h: &OracleFn,
    zbar: &[f64],
    zstar: &[f64],
    w: &[f64],
    grid: &SampleGrid,
) -> Result<OracleEstimate> {
    estimate(h, zbar, zstar, w, grid, Order::Second)
}

fn estimate(
    h: &OracleFn,
    zbar: &[f64],
    zstar: &[f64],
    w: &[f64],
    grid: &SampleGrid,
    order: Order,
) -> Result<OracleEstimate> {
    grid.validate()?;
    let h0 = match h.value(zbar) {
        Finite(v) => v,
        _ => return Err(CurvError::PreconditionViolated("h(z̄) must be finite")),
    };
    let n = zbar.len();
    let budget = if h.rejection_budget && h.repair.is_none() {
        grid.dir_samples * 10
    } else {
        grid.dir_samples
    };

    let quotient = |t: f64, wp: &[f64]| -> ExtReal {
        let x = linalg::axpy(zbar, t, wp);
        match h.value_at_scale(&x, scale_tol(t)) {
            PosInf => PosInf,
            NegInf => NegInf,
            Finite(hx) => {
                let num = match order {
                    Order::First => hx - h0,
                    Order::Second => hx - h0 - t * linalg::dot(zstar, wp),
                };
                let den = match order {
                    Order::First => t,
                    Order::Second => 0.5 * t * t,
                };
                ExtReal::finite(num / den)
            }
        }
    };

    let mut level_minima = Vec::with_capacity(grid.levels);
    let mut certificates = Vec::with_capacity(grid.levels);
    for level in 0..grid.levels {
        let t = grid.t0 * grid.rho.powi(level as i32);
        let radius = grid.dir_radius0 * grid.dir_decay.powi(level as i32);
        // Index 0 is always the nominal direction itself.
        let eval_idx = |idx: u64| -> (ExtReal, u64, Option<Vec<f64>>) {
            let wp = if idx == 0 {
                w.to_vec()
            } else {
                let mut rng = substream(grid.seed, level, idx);
                linalg::add(w, &sample_in_ball(&mut rng, n, radius))
            };
            let mut best = quotient(t, &wp);
            let mut best_wp = (best != PosInf).then(|| wp.clone());
            if let (PosInf, Some(repair)) = (best, h.repair.as_ref()) {
                // Recover feasibility by projecting, keeping the repaired
                // direction inside the current ball.
                let x = linalg::axpy(zbar, t, &wp);
                if let Some(p) = repair(&x) {
                    let wr = linalg::scale(&linalg::sub(&p, zbar), 1.0 / t);
                    if linalg::norm(&linalg::sub(&wr, w)) <= radius {
                        let q = quotient(t, &wr);
                        if q < best {
                            best = q;
                            best_wp = Some(wr);
                        }
                    }
                }
            }
            (best, idx, best_wp)
        };
        let (value, _, wp) = (0..=budget as u64)
            .into_par_iter()
            .map(eval_idx)
            .reduce(
                || (PosInf, u64::MAX, None),
                |a, b| {
                    // Deterministic min regardless of scheduling: tie-break
                    // on the sample index.
                    if b.0 < a.0 || (b.0 == a.0 && b.1 < a.1) {
                        b
                    } else {
                        a
                    }
                },
            );
        level_minima.push(value);
        certificates.push(wp.map(|p| (t, p)));
    }

    let classification = classify(&level_minima);
    Ok(OracleEstimate {
        level_minima,
        classification,
        certificate_points: certificates,
    })
}

fn classify(minima: &[ExtReal]) -> Classification {
    let l = minima.len();
    if l < 4 {
        return Classification::Inconclusive;
    }
    let last4 = &minima[l - 4..];
    if let [Finite(a), Finite(b), Finite(c), Finite(d)] = last4 {
        let v = *d;
        let tol = CONV_ATOL + CONV_RTOL * v.abs();
        if (a - v).abs() <= tol && (b - v).abs() <= tol && (c - v).abs() <= tol {
            return Classification::ConvergesTo(v);
        }
    }
    let big = |e: &ExtReal| e.as_f64() > DIVERGE_THRESHOLD;
    let small = |e: &ExtReal| e.as_f64() < -DIVERGE_THRESHOLD;
    let up_trend = minima[l - 1] >= minima[l - 2] && minima[l - 2] >= minima[l - 3];
    let down_trend = minima[l - 1] <= minima[l - 2] && minima[l - 2] <= minima[l - 3];
    if big(&minima[l - 1]) && big(&minima[l - 2]) && up_trend {
        return Classification::DivergesUp;
    }
    if small(&minima[l - 1]) && small(&minima[l - 2]) && down_trend {
        return Classification::DivergesDown;
    }
    Classification::Inconclusive
}

/// `w' ∈ V_{δ,ρ}(w)`: directional neighborhood membership.
pub fn dir_neighborhood_member(w: &[f64], delta: f64, rho: f64, wp: &[f64]) -> bool {
    assert!(delta > 0.0 && rho > 0.0);
    if linalg::norm(wp) > delta {
        return false;
    }
    let nw = linalg::norm(w);
    let nwp = linalg::norm(wp);
    let lhs: Vec<f64> = w
        .iter()
        .zip(wp)
        .map(|(wi, wpi)| nw * wpi - nwp * wi)
        .collect();
    linalg::norm(&lhs) <= rho * nwp * nw + 1e-15
}

#[derive(Clone, Debug, PartialEq)]
pub enum GrowthVerdict {
    /// No counterexample found (sampling evidence, not proof).
    Holds,
    FailsAt(Vec<f64>),
    Inconclusive,
}

/// Quadratic-growth verification by sampling: looks for `z ∈ B_δ(z̄)`
/// with `h(z) < h(z̄) + ε|z - z̄|²`.
pub fn verify_quadratic_growth(
    h: &OracleFn,
    zbar: &[f64],
    eps: f64,
    delta: f64,
    n_samples: usize,
    seed: u64,
) -> GrowthVerdict {
    assert!(eps > 0.0 && delta > 0.0);
    let Finite(h0) = h.value(zbar) else {
        return GrowthVerdict::Inconclusive;
    };
    let n = zbar.len();
    let violation = (0..n_samples as u64).into_par_iter().find_map_first(|i| {
        let mut rng = substream(seed, 0, i);
        let offset = if i % 2 == 0 {
            // Uniform in the ball.
            sample_in_ball(&mut rng, n, delta)
        } else {
            // Radial-shell stratified: geometric shells toward the center.
            let shell = (i / 2) % 20;
            let r = delta * 0.5f64.powi(shell as i32);
            linalg::scale(&sample_on_sphere(&mut rng, n), r)
        };
        let z = linalg::add(zbar, &offset);
        let hz = h.value(&z);
        let bound = h0 + eps * linalg::dot(&offset, &offset);
        let violated = match hz {
            PosInf => false,
            NegInf => true,
            Finite(v) => v < bound - 1e-12,
        };
        violated.then_some(z)
    });
    match violation {
        Some(z) => GrowthVerdict::FailsAt(z),
        None => GrowthVerdict::Holds,
    }
}

/// Essential-local-minimizer verification: quadratic growth of
/// `f(x) = max(f0(x) - f0(x̄), dist(F(x), C))`.
#[allow(clippy::too_many_arguments)]
pub fn verify_essential_min(
    f0: &SmoothMap,
    f_map: &SmoothMap,
    c: &ClosedSet,
    xbar: &[f64],
    eps: f64,
    delta: f64,
    n_samples: usize,
    seed: u64,
) -> Result<GrowthVerdict> {
    if !c.member(&f_map.value(xbar)?, crate::sets::SET_TOL)? {
        return Err(CurvError::InfeasibleBasePoint);
    }
    // Probe that the distance is computable before sampling.
    c.distance(&f_map.value(xbar)?)?;
    let f00 = f0.value(xbar)?[0];
    let f0c = f0.clone();
    let fc = f_map.clone();
    let cc = c.clone();
    let h = OracleFn::new(move |x| {
        let Ok(v0) = f0c.value(x) else { return PosInf };
        let Ok(fx) = fc.value(x) else { return PosInf };
        let Ok(d) = cc.distance(&fx) else { return PosInf };
        ExtReal::finite((v0[0] - f00).max(d))
    });
    Ok(verify_quadratic_growth(&h, xbar, eps, delta, n_samples, seed))
}

/// Alignment report for the projection inner-calmness* probe.
#[derive(Clone, Debug)]
pub struct AlignmentReport {
    pub ts: Vec<f64>,
    /// `|y_k - x_k| / |x_k - x̄|`; tends to zero along feasible rays.
    pub residuals: Vec<f64>,
    /// `|y_k - x̄| / |x_k - x̄|`; stays below 2 at set points.
    pub ratios: Vec<f64>,
    pub base_in_set: bool,
}

impl AlignmentReport {
    pub fn final_residual(&self) -> f64 {
        *self.residuals.last().unwrap_or(&f64::NAN)
    }

    pub fn max_ratio(&self) -> f64 {
        self.ratios.iter().cloned().fold(0.0, f64::max)
    }
}

/// Probes projection alignment along `x_k = x̄ + t_k u`.
pub fn projection_alignment_probe(
    omega: &ClosedSet,
    xbar: &[f64],
    u: &[f64],
    grid: &SampleGrid,
) -> Result<AlignmentReport> {
    grid.validate()?;
    let base_in_set = omega.member(xbar, crate::sets::SET_TOL)?;
    let points: Vec<Vec<f64>> = (0..grid.levels)
        .map(|k| linalg::axpy(xbar, grid.t0 * grid.rho.powi(k as i32), u))
        .collect();
    let mut report = projection_alignment_seq(
        |x| {
            omega
                .project(x)
                .ok()
                .and_then(|pts| nearest(pts, x))
                .unwrap_or_else(|| x.to_vec())
        },
        xbar,
        &points,
    );
    report.ts = (0..grid.levels)
        .map(|k| grid.t0 * grid.rho.powi(k as i32))
        .collect();
    report.base_in_set = base_in_set;
    Ok(report)
}

fn nearest(pts: Vec<Vec<f64>>, x: &[f64]) -> Option<Vec<f64>> {
    pts.into_iter().min_by(|a, b| {
        let da = linalg::norm(&linalg::sub(a, x));
        let db = linalg::norm(&linalg::sub(b, x));
        da.partial_cmp(&db).unwrap()
    })
}

/// Alignment probe over an explicit point sequence and projector.
pub fn projection_alignment_seq(
    project: impl Fn(&[f64]) -> Vec<f64>,
    xbar: &[f64],
    points: &[Vec<f64>],
) -> AlignmentReport {
    let mut residuals = Vec::with_capacity(points.len());
    let mut ratios = Vec::with_capacity(points.len());
    for x in points {
        let y = project(x);
        let denom = linalg::norm(&linalg::sub(x, xbar));
        residuals.push(linalg::norm(&linalg::sub(&y, x)) / denom);
        ratios.push(linalg::norm(&linalg::sub(&y, xbar)) / denom);
    }
    AlignmentReport {
        ts: Vec::new(),
        residuals,
        ratios,
        base_in_set: true,
    }
}

#[cfg(test)]
mod tests;
