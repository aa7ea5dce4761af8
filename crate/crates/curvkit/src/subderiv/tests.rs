use super::*;
use crate::sets::BoxSet;
use crate::smooth::PolyForm;

fn halfline() -> ClosedSet {
    ClosedSet::halfline_nonpositive()
}

fn cross() -> ClosedSet {
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

fn scalar_quadratic(q: f64, a: f64, c: f64) -> SmoothMap {
    PolyForm::to_smooth_map(&[PolyForm::Quadratic {
        q: vec![vec![q]],
        a: vec![a],
        c,
    }])
}

#[test]
fn subderivative_examples() {
    // vecmax at the kink.
    let vm = FunctionExpr::VecMax(2);
    let d = subderivative(&vm, &[0.0, 0.0], &[1.0, 2.0]).unwrap();
    assert!(d.is_exact());
    assert_eq!(d.value, Finite(2.0));

    // Indicator of the half-line in the infeasible direction.
    let ind = FunctionExpr::Indicator(halfline());
    let d = subderivative(&ind, &[0.0], &[1.0]).unwrap();
    assert!(d.is_exact());
    assert_eq!(d.value, PosInf);

    // l0 at the origin blows up in any non-zero direction.
    let l0 = FunctionExpr::L0(1);
    let d = subderivative(&l0, &[0.0], &[1.0]).unwrap();
    assert_eq!(d.value, PosInf);
    let d = subderivative(&l0, &[2.0], &[1.0]).unwrap();
    assert_eq!(d.value, Finite(0.0));

    // Euclidean norm at the origin.
    let en = FunctionExpr::EuclNorm(2);
    let d = subderivative(&en, &[0.0, 0.0], &[3.0, 4.0]).unwrap();
    assert_eq!(d.value, Finite(5.0));

    // Distance: d dist(·,S)(z̄)(w) = dist(w, T_S(z̄)).
    let dist = FunctionExpr::Dist(halfline());
    let d = subderivative(&dist, &[0.0], &[2.0]).unwrap();
    assert!((d.value.as_f64() - 2.0).abs() < 1e-9);
    let d = subderivative(&dist, &[0.0], &[-2.0]).unwrap();
    assert_eq!(d.value, Finite(0.0));
}

#[test]
fn d2_smooth_formula() {
    // f(x) = ½ q x², z* = ∇f(z̄) gives the Hessian form.
    let f = FunctionExpr::Smooth(scalar_quadratic(3.0, 0.0, 0.0));
    let d = d2(&f, &[2.0], &[6.0], &[1.5]).unwrap();
    assert!(d.is_exact());
    assert_eq!(d.value, Finite(3.0 * 1.5 * 1.5));
    // <z* - ∇f, w> < 0 and > 0 trivial rows.
    assert_eq!(d2(&f, &[2.0], &[5.0], &[1.0]).unwrap().value, PosInf);
    assert_eq!(d2(&f, &[2.0], &[7.0], &[1.0]).unwrap().value, NegInf);
    // Orthogonal offset with z* off the gradient.
    let f2 = FunctionExpr::Smooth(PolyForm::to_smooth_map(&[PolyForm::Quadratic {
        q: vec![vec![1.0, 0.0], vec![0.0, 1.0]],
        a: vec![0.0, 0.0],
        c: 0.0,
    }]));
    let d = d2(&f2, &[1.0, 0.0], &[1.0, 1.0], &[1.0, 0.0]).unwrap();
    assert_eq!(d.value, NegInf);
    assert!(d.is_exact());
}

#[test]
fn d2_norm_and_vecmax_zero_curvature() {
    let en = FunctionExpr::EuclNorm(2);
    let w = [0.6, 0.8];
    let d = d2(&en, &[0.0, 0.0], &w, &w).unwrap();
    assert!(d.is_exact());
    assert_eq!(d.value, Finite(0.0));
    // |z*| > 1 with matching slope is impossible; off-ball z* at w = 0.
    let d = d2(&en, &[0.0, 0.0], &[3.0, 0.0], &[0.0, 0.0]).unwrap();
    assert_eq!(d.value, NegInf);

    let vm = FunctionExpr::VecMax(2);
    let d = d2(&vm, &[0.0, 0.0], &[0.0, 1.0], &[1.0, 2.0]).unwrap();
    assert!(d.is_exact());
    assert_eq!(d.value, Finite(0.0));
    // z* outside the unit simplex on the active set.
    let d = d2(&vm, &[0.0, 0.0], &[-0.5, 1.5], &[1.0, 1.0]).unwrap();
    assert_eq!(d.value, NegInf);
}

#[test]
fn d2_l0_cells() {
    let l0 = FunctionExpr::L0(1);
    // t = 0, r ≠ 0: +inf.
    assert_eq!(d2(&l0, &[0.0], &[0.0], &[1.0]).unwrap().value, PosInf);
    // t ≠ 0, t* r > 0: -inf.
    assert_eq!(d2(&l0, &[1.0], &[2.0], &[1.0]).unwrap().value, NegInf);
    // t ≠ 0, t* r < 0: +inf.
    assert_eq!(d2(&l0, &[1.0], &[2.0], &[-1.0]).unwrap().value, PosInf);
    // otherwise 0.
    assert_eq!(d2(&l0, &[1.0], &[0.0], &[1.0]).unwrap().value, Finite(0.0));
    assert_eq!(d2(&l0, &[0.0], &[3.0], &[0.0]).unwrap().value, Finite(0.0));
}

#[test]
fn halfline_table_via_engine() {
    let ind = FunctionExpr::Indicator(halfline());
    let cases = [
        (1.0, -1.0, PosInf),
        (1.0, 0.0, Finite(0.0)),
        (-1.0, -1.0, NegInf),
        (0.0, 1.0, PosInf),
        (0.0, -1.0, Finite(0.0)),
        (-1.0, 0.0, NegInf),
        (2.0, 1.0, PosInf),
        (0.0, 0.0, Finite(0.0)),
        (-2.0, 1.0, PosInf),
    ];
    for (zs, w, want) in cases {
        let got = d2(&ind, &[0.0], &[zs], &[w]).unwrap();
        assert_eq!(got.value, want, "z* = {zs}, w = {w}");
        assert!(got.is_exact());
        assert_eq!(got.value, d2_indicator_scalar_halfline(zs, w));
    }
}

#[test]
fn sum_smooth_shifts_the_multiplier() {
    // h = f0 + δ_{R_-} with f0(x) = ½ x² at 0.
    let h = FunctionExpr::SumSmooth {
        smooth: scalar_quadratic(1.0, 0.0, 0.0),
        rest: Box::new(FunctionExpr::Indicator(halfline())),
    };
    // z* = 0: shifted multiplier is -∇f0(0) = 0; value = ∇²f0 w² + table(0, w).
    let d = d2(&h, &[0.0], &[0.0], &[-2.0]).unwrap();
    assert!(d.is_exact());
    assert_eq!(d.value, Finite(4.0));
    // w = 1 infeasible direction.
    assert_eq!(d2(&h, &[0.0], &[0.0], &[1.0]).unwrap().value, PosInf);
}

#[test]
fn chain_rule_scalar_square() {
    // g(y) = y, F(x) = x²/2 at x̄ = 0 with x* = 0: bound u² via y* = 1.
    let g = FunctionExpr::Smooth(PolyForm::to_smooth_map(&[PolyForm::Affine {
        a: vec![1.0],
        b: 0.0,
    }]));
    let f = scalar_quadratic(1.0, 0.0, 0.0);
    let d = d2_chain(&g, &f, &[0.0], &[0.0], &[1.0], &[]).unwrap();
    assert_eq!(d.kind, Bound::LowerBound);
    assert_eq!(d.value, Finite(1.0));
    // Matches the exact smooth value of h(x) = x²/2.
    let h = FunctionExpr::Smooth(scalar_quadratic(1.0, 0.0, 0.0));
    let exact = d2(&h, &[0.0], &[0.0], &[1.0]).unwrap();
    assert_eq!(exact.value, Finite(1.0));

    // Identity inner map: exact, reduces to g's own d2.
    let ident = SmoothMap::identity(1);
    let d = d2_chain(&g, &ident, &[0.3], &[1.0], &[2.0], &[]).unwrap();
    assert!(d.is_exact());
    assert_eq!(d.value, Finite(0.0));

    // Inconsistent x*: empty multiplier set, sup ∅ = -inf.
    let constant = PolyForm::to_smooth_map(&[PolyForm::Affine {
        a: vec![0.0],
        b: 1.0,
    }]);
    let d = d2_chain(&g, &constant, &[0.0], &[1.0], &[1.0], &[]).unwrap();
    assert_eq!(d.kind, Bound::LowerBound);
    assert_eq!(d.value, NegInf);
}

#[test]
fn preimage_rule_disc() {
    let f = PolyForm::to_smooth_map(&[PolyForm::Quadratic {
        q: vec![vec![2.0, 0.0], vec![0.0, 2.0]],
        a: vec![0.0, 0.0],
        c: -1.0,
    }]);
    let d = d2_preimage(&halfline(), &f, &[1.0, 0.0], &[2.0, 0.0], &[0.0, 1.0]).unwrap();
    assert!(d.is_exact());
    assert_eq!(d.value, Finite(2.0));

    // Affine F with polyhedral C: 0 / +inf classification.
    let aff = PolyForm::to_smooth_map(&[PolyForm::Affine {
        a: vec![1.0, 1.0],
        b: 0.0,
    }]);
    // <x*, u> = 0 and ∇F u ∈ T: zero curvature.
    let d = d2_preimage(&halfline(), &aff, &[0.0, 0.0], &[1.0, 1.0], &[-1.0, 1.0]).unwrap();
    assert_eq!(d.value, Finite(0.0));
    assert!(d.is_exact());
    // ∇F u ∉ T_C(F(x̄)): +inf, exact under full row rank.
    let d = d2_preimage(&halfline(), &aff, &[0.0, 0.0], &[1.0, 1.0], &[1.0, 0.0]).unwrap();
    assert_eq!(d.value, PosInf);
    assert!(d.is_exact(), "full row rank keeps +inf exact");
}

#[test]
fn image_rule_with_explicit_pairs() {
    let g = PolyForm::to_smooth_map(&[PolyForm::Affine {
        a: vec![1.0, 1.0],
        b: 0.0,
    }]);
    let q = ClosedSet::Box(BoxSet::new(vec![0.0, 0.0], vec![1.0, 1.0]));
    let pairs = vec![(vec![0.0, 0.0], vec![1.0, 0.0])];
    let d = d2_image(&q, &g, &[0.0], &[0.0], &[1.0], &pairs, true, true).unwrap();
    assert_eq!(d.value, Finite(0.0));
    assert_eq!(d.kind, Bound::ExactOverCandidates);

    // <x*, u> < 0 forces +inf exactly.
    let d = d2_image(&q, &g, &[0.0], &[-1.0], &[1.0], &pairs, true, true).unwrap();
    assert_eq!(d.value, PosInf);
    assert!(d.is_exact());

    assert_eq!(
        d2_image(&q, &g, &[0.0], &[0.0], &[1.0], &[], true, true),
        Err(CurvError::MissingCandidates)
    );
    assert_eq!(
        d2_image(&q, &g, &[0.0], &[0.0], &[1.0], &pairs, false, true),
        Err(CurvError::AssumptionNotDeclared("inner_semicompact"))
    );
}

/// φ(x, y) = |y - x| + δ_{R_-}(y) as a composition of a separable sum
/// with the affine map (x, y) -> (y - x, y).
fn distance_marginal_objective() -> FunctionExpr {
    let stack = PolyForm::to_smooth_map(&[
        PolyForm::Affine {
            a: vec![-1.0, 1.0],
            b: 0.0,
        },
        PolyForm::Affine {
            a: vec![0.0, 1.0],
            b: 0.0,
        },
    ]);
    FunctionExpr::Compose {
        outer: Box::new(FunctionExpr::SeparableSum(vec![
            FunctionExpr::EuclNorm(1),
            FunctionExpr::Indicator(halfline()),
        ])),
        inner: stack,
    }
}

#[test]
fn marginal_rule_reproduces_distance_bound() {
    let phi = distance_marginal_objective();
    // Ψ(0) = {0}; the distance function's d² at (0; z*)(w) vs the
    // marginal upper bound: cells where the half-line table is 0.
    for (zs, w) in [(0.0, -1.0), (1.0, 0.0), (0.0, 0.0)] {
        let pairs = vec![(vec![0.0], vec![vec![w], vec![0.0], vec![-w]])];
        let marg = d2_marginal_finite(&phi, &[0.0], &[zs], &[w], &pairs, true).unwrap();
        let dist_lower = d2_dist(&halfline(), &[0.0], &[zs], &[w]).unwrap();
        // Upper bound from the marginal dominates the lower bound.
        assert!(marg.value >= dist_lower.value, "z*={zs} w={w}");
        assert_eq!(marg.kind, Bound::ExactOverCandidates);
        assert_eq!(marg.value, Finite(0.0));
        assert_eq!(dist_lower.value, Finite(0.0));
    }
    // φ independent of y reduces to d² of φ(·, y0).
    let phi_x = FunctionExpr::Compose {
        outer: Box::new(FunctionExpr::Smooth(scalar_quadratic(2.0, 0.0, 0.0))),
        inner: PolyForm::to_smooth_map(&[PolyForm::Affine {
            a: vec![1.0, 0.0],
            b: 0.0,
        }]),
    };
    let pairs = vec![(vec![0.7], vec![vec![0.0]])];
    let marg = d2_marginal_finite(&phi_x, &[1.0], &[2.0], &[1.0], &pairs, true).unwrap();
    assert_eq!(marg.value, Finite(2.0));
}

#[test]
fn d2_dist_examples() {
    // z* with |z*| > 1 is rejected.
    assert_eq!(
        d2_dist(&halfline(), &[0.0], &[1.5], &[-1.0]),
        Err(CurvError::PreconditionViolated("distance rule needs |z*| <= 1"))
    );
    // SOC boundary radial direction: curvature term vanishes.
    let q3 = ClosedSet::Soc(crate::sets::SecondOrderCone::new(3));
    let y = [1.0, 1.0, 0.0];
    let zs = [-1.0 / 2.0_f64.sqrt() + 0.0, 1.0 / 2.0_f64.sqrt(), 0.0];
    let d = d2_dist(&q3, &y, &zs, &y).unwrap();
    assert_eq!(d.kind, Bound::LowerBound);
    assert!((d.value.as_f64()).abs() < 1e-9);
}

#[test]
fn graph_indicator_examples() {
    // F(x) = x² at (0, 0) with (x*, y*) = (0, -1), (u, v) = (1, 0).
    let f = scalar_quadratic(2.0, 0.0, 0.0);
    let d = d2_graph_indicator(&f, &[0.0], &[0.0], &[0.0], &[-1.0], &[1.0], &[0.0]).unwrap();
    assert!(d.is_exact());
    assert_eq!(d.value, Finite(2.0));
    // v off the linearization: lower bound only.
    let d = d2_graph_indicator(&f, &[0.0], &[0.0], &[0.0], &[-1.0], &[1.0], &[5.0]).unwrap();
    assert_eq!(d.kind, Bound::LowerBound);
    // y* = 0 reduces to the 0 / ±inf classification against x*.
    let d = d2_graph_indicator(&f, &[1.0], &[1.0], &[0.0], &[0.0], &[1.0], &[2.0]).unwrap();
    assert_eq!(d.value, Finite(0.0));
}

#[test]
fn nonsmooth_chain_consistency_with_smooth_chain() {
    // Smooth F: the nonsmooth rule at v = ∇F(x̄)u agrees with the chain
    // rule summand at the same y*.
    let g = FunctionExpr::Smooth(PolyForm::to_smooth_map(&[PolyForm::Affine {
        a: vec![1.0],
        b: 0.0,
    }]));
    let f = scalar_quadratic(1.0, 0.0, 0.0);
    // scalarization <1, F> = F.
    let scal = FunctionExpr::Smooth(f.clone());
    let d = d2_nonsmooth_chain(
        &g,
        &scal,
        &[0.0],
        &[0.0],
        &[0.0],
        &[1.0],
        &[1.0],
        &[0.0],
    )
    .unwrap();
    assert_eq!(d.value, Finite(1.0));
    assert_eq!(d.kind, Bound::LowerBound);
}

#[test]
fn nonsmooth_chain_reproduces_main_estimate() {
    // Disjunctive toy: f0(x) = (x1-1)² + (x2-1)², C the union of the two
    // non-negative half-axes, x̄ = (1, 0), u = (1, 0), α = 1, λ = (0, 2).
    // The scalarized outer function with ŷ* = (1/3, 2/3) bounds
    // d²f(x̄; 0)(u) below by (1/(α+|λ|))(∇²L(u,u) + 0) = 2/3.
    let alpha_hat = 1.0 / 3.0;
    let smooth_part = PolyForm::to_smooth_map(&[PolyForm::Quadratic {
        q: vec![vec![2.0 * alpha_hat, 0.0], vec![0.0, 2.0 * alpha_hat]],
        a: vec![-2.0 * alpha_hat, -2.0 * alpha_hat],
        c: alpha_hat * 1.0,
    }]);
    // (2/3) dist(x, C) = dist((2/3) x, C) since C is a cone.
    let scaled = PolyForm::to_smooth_map(&[
        PolyForm::Affine {
            a: vec![2.0 / 3.0, 0.0],
            b: 0.0,
        },
        PolyForm::Affine {
            a: vec![0.0, 2.0 / 3.0],
            b: 0.0,
        },
    ]);
    let scal = FunctionExpr::SumSmooth {
        smooth: smooth_part,
        rest: Box::new(FunctionExpr::Compose {
            outer: Box::new(FunctionExpr::Dist(cross())),
            inner: scaled,
        }),
    };
    let g = FunctionExpr::VecMax(2);
    let xbar = [1.0, 0.0];
    let u = [1.0, 0.0];
    // v = (⟨∇f0(x̄), u⟩, 0) = (0, 0).
    let d = d2_nonsmooth_chain(
        &g,
        &scal,
        &[0.0, 0.0],
        &xbar,
        &[0.0, 0.0],
        &u,
        &[alpha_hat, 2.0 / 3.0],
        &[0.0, 0.0],
    )
    .unwrap();
    assert_eq!(d.kind, Bound::LowerBound);
    assert!(
        (d.value.as_f64() - 2.0 / 3.0).abs() < 1e-9,
        "main estimate value: {}",
        d.value
    );
}

#[test]
fn proximal_subdifferential_members() {
    // Indicator reduces to the proximal normal cone.
    let ind = FunctionExpr::Indicator(halfline());
    assert_eq!(
        proximal_subdiff_member(&ind, &[0.0], &[0.0], &[1.0], SubdiffMode::Plain).unwrap(),
        Ternary::Yes
    );
    assert_eq!(
        proximal_subdiff_member(&ind, &[0.0], &[-1.0], &[-1.0], SubdiffMode::Plain).unwrap(),
        Ternary::No
    );
    // Convex h: plain membership needs z* ∈ ∂h(z̄) with matching slope.
    let en = FunctionExpr::EuclNorm(2);
    let w = [1.0, 0.0];
    assert_eq!(
        proximal_subdiff_member(&en, &[0.0, 0.0], &w, &[1.0, 0.0], SubdiffMode::Plain).unwrap(),
        Ternary::Yes
    );
    assert_eq!(
        proximal_subdiff_member(&en, &[0.0, 0.0], &w, &[0.0, 1.0], SubdiffMode::Plain).unwrap(),
        Ternary::No
    );
    // Strictly smaller pairing: accepted in pre mode.
    assert_eq!(
        proximal_subdiff_member(&en, &[0.0, 0.0], &w, &[0.0, 1.0], SubdiffMode::Pre).unwrap(),
        Ternary::Yes
    );
}

#[test]
fn separable_sum_and_product_agree() {
    let sum = FunctionExpr::SeparableSum(vec![
        FunctionExpr::Indicator(halfline()),
        FunctionExpr::Indicator(halfline()),
    ]);
    let d = d2(&sum, &[0.0, 0.0], &[1.0, 1.0], &[0.0, 0.0]).unwrap();
    assert_eq!(d.value, Finite(0.0));
    assert!(d.is_exact(), "indicator sums flatten to a product set");
}
