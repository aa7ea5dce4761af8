use super::*;
use crate::sets::{PolyhedronF, SecondOrderCone};

fn abs_fn() -> OracleFn {
    OracleFn::new(|x: &[f64]| ExtReal::finite(x[0].abs()))
}

fn halfline_indicator() -> OracleFn {
    OracleFn::from_expr(&FunctionExpr::Indicator(ClosedSet::halfline_nonpositive()))
}

#[test]
fn estimate_d_examples() {
    let grid = SampleGrid::with_seed(7);
    // d|·|(0)(1) = 1.
    let est = estimate_d(&abs_fn(), &[0.0], &[1.0], &grid).unwrap();
    match est.classification {
        Classification::ConvergesTo(v) => assert!((v - 1.0).abs() <= 1e-2, "v = {v}"),
        c => panic!("expected convergence, got {c:?}"),
    }

    // Indicator in an infeasible direction diverges upward.
    let est = estimate_d(&halfline_indicator(), &[0.0], &[1.0], &grid).unwrap();
    assert_eq!(est.classification, Classification::DivergesUp);

    // A marginal function that fails lower semicontinuity: h(0) = 1,
    // h(x) = 0 otherwise; the quotient runs to -inf.
    let h = OracleFn::new(|x: &[f64]| ExtReal::finite(if x[0] == 0.0 { 1.0 } else { 0.0 }));
    let est = estimate_d(&h, &[0.0], &[-1.0], &grid).unwrap();
    assert_eq!(est.classification, Classification::DivergesDown);
}

#[test]
fn estimate_d2_halfline_cells() {
    let grid = SampleGrid::with_seed(11);
    let ind = halfline_indicator();
    // z* w < 0 diverges upward.
    let est = estimate_d2(&ind, &[0.0], &[1.0], &[-1.0], &grid).unwrap();
    assert_eq!(est.classification, Classification::DivergesUp);
    // Middle cell converges to zero.
    let est = estimate_d2(&ind, &[0.0], &[1.0], &[0.0], &grid).unwrap();
    match est.classification {
        Classification::ConvergesTo(v) => assert!(v.abs() <= 1e-2),
        c => panic!("expected convergence, got {c:?}"),
    }
    // Otherwise row diverges downward.
    let est = estimate_d2(&ind, &[0.0], &[-1.0], &[-1.0], &grid).unwrap();
    assert_eq!(est.classification, Classification::DivergesDown);
}

#[test]
fn estimate_d2_soc_boundary_curvature() {
    let grid = SampleGrid::with_seed(3);
    let ind = OracleFn::from_expr(&FunctionExpr::Indicator(ClosedSet::Soc(
        SecondOrderCone::new(3),
    )));
    let est = estimate_d2(&ind, &[1.0, 1.0, 0.0], &[-1.0, 1.0, 0.0], &[1.0, 1.0, 1.0], &grid)
        .unwrap();
    match est.classification {
        Classification::ConvergesTo(v) => {
            assert!((v - 1.0).abs() <= 1e-2 + 5e-2, "v = {v}");
        }
        c => panic!("expected convergence to 1, got {c:?}"),
    }
}

#[test]
fn monotone_refinement_and_determinism() {
    let coarse = SampleGrid {
        dir_samples: 64,
        levels: 8,
        seed: 5,
        ..Default::default()
    };
    let fine = SampleGrid {
        dir_samples: 128,
        ..coarse.clone()
    };
    let ind = OracleFn::from_expr(&FunctionExpr::Indicator(ClosedSet::Soc(
        SecondOrderCone::new(3),
    )));
    let base = [1.0, 1.0, 0.0];
    let zs = [-0.5, 0.5, 0.0];
    let w = [1.0, 1.0, 0.5];
    let a = estimate_d2(&ind, &base, &zs, &w, &coarse).unwrap();
    let b = estimate_d2(&ind, &base, &zs, &w, &fine).unwrap();
    for (ca, cb) in a.level_minima.iter().zip(&b.level_minima) {
        assert!(cb <= ca, "doubling samples must not raise a level minimum");
    }
    // Bit-for-bit determinism at identical seed and grid.
    let a2 = estimate_d2(&ind, &base, &zs, &w, &coarse).unwrap();
    assert_eq!(a.level_minima, a2.level_minima);
    assert_eq!(a.classification, a2.classification);
    assert_eq!(a.certificate_points, a2.certificate_points);
}

#[test]
fn dir_neighborhood_examples() {
    // Collinear shrinkage is always inside.
    let w = [2.0, 0.0];
    assert!(dir_neighborhood_member(&w, 1.5, 0.1, &[1.0, 0.0]));
    // Orthogonal direction fails the angular test.
    assert!(!dir_neighborhood_member(&[1.0, 0.0], 2.0, 0.1, &[0.0, 1.0]));
    // w = 0 degenerates to the plain ball.
    assert!(dir_neighborhood_member(&[0.0, 0.0], 1.0, 0.1, &[0.5, 0.5]));
    assert!(!dir_neighborhood_member(&[0.0, 0.0], 0.1, 0.1, &[0.5, 0.5]));
}

#[test]
fn quadratic_growth_examples() {
    let sq = OracleFn::new(|x: &[f64]| ExtReal::finite(x[0] * x[0]));
    assert_eq!(
        verify_quadratic_growth(&sq, &[0.0], 0.5, 1.0, 4000, 1),
        GrowthVerdict::Holds
    );
    match verify_quadratic_growth(&sq, &[0.0], 2.0, 1.0, 4000, 1) {
        GrowthVerdict::FailsAt(z) => assert!(z[0] != 0.0),
        v => panic!("expected failure, got {v:?}"),
    }
    // Identically-zero objective (the composite counterexample shape).
    let zero = OracleFn::new(|_: &[f64]| ExtReal::finite(0.0));
    for eps in [1e-3, 1e-2, 1e-1] {
        assert!(matches!(
            verify_quadratic_growth(&zero, &[0.0], eps, 1.0, 1000, 2),
            GrowthVerdict::FailsAt(_)
        ));
    }
}

#[test]
fn essential_min_examples() {
    // min -x over R_-: f = max(-x, dist(x, R_-)) = |x| grows quadratically
    // near 0 at small eps.
    let f0 = crate::smooth::PolyForm::to_smooth_map(&[crate::smooth::PolyForm::Affine {
        a: vec![-1.0],
        b: 0.0,
    }]);
    let ident = SmoothMap::identity(1);
    let c = ClosedSet::halfline_nonpositive();
    let verdict = verify_essential_min(&f0, &ident, &c, &[0.0], 0.1, 0.5, 20_000, 3).unwrap();
    assert_eq!(verdict, GrowthVerdict::Holds);

    // Unconstrained recast of the composite counterexample: the whole
    // objective vanishes, so growth fails.
    let zero_obj = crate::smooth::PolyForm::to_smooth_map(&[crate::smooth::PolyForm::Affine {
        a: vec![0.0],
        b: 0.0,
    }]);
    let whole = ClosedSet::Box(crate::sets::BoxSet::whole_space(1));
    let verdict =
        verify_essential_min(&zero_obj, &ident, &whole, &[0.0], 0.1, 0.5, 2_000, 3).unwrap();
    assert!(matches!(verdict, GrowthVerdict::FailsAt(_)));
}

#[test]
fn alignment_probe_on_halfline_and_soc() {
    let grid = SampleGrid::with_seed(0);
    let c = ClosedSet::halfline_nonpositive();
    let rep = projection_alignment_probe(&c, &[0.0], &[-1.0], &grid).unwrap();
    assert!(rep.base_in_set);
    assert!(rep.final_residual() < 1e-12);
    assert!((rep.max_ratio() - 1.0).abs() < 1e-12);

    // Tangent ray on the SOC boundary: residuals decay, ratio stays <= 2.
    let q3 = ClosedSet::Soc(SecondOrderCone::new(3));
    let rep = projection_alignment_probe(&q3, &[1.0, 1.0, 0.0], &[0.0, 0.0, 1.0], &grid).unwrap();
    assert!(rep.final_residual() < 1e-3, "residual {}", rep.final_residual());
    assert!(rep.max_ratio() <= 2.0);
}

#[test]
fn alignment_probe_sphere_center_diverges() {
    // The center of the unit circle: projections do not align, the ratio
    // blows up like k.
    let project = |x: &[f64]| {
        let n = crate::linalg::norm(x);
        vec![x[0] / n, x[1] / n]
    };
    let points: Vec<Vec<f64>> = (1..=16)
        .map(|k| {
            let kf = k as f64;
            let scale = 1.0 / (kf * kf);
            vec![scale * (1.0 / kf).cos(), scale * (1.0 / kf).sin()]
        })
        .collect();
    let rep = projection_alignment_seq(project, &[0.0, 0.0], &points);
    assert!(rep.ratios[11] > 10.0, "ratio at level 12: {}", rep.ratios[11]);
    assert!(rep.ratios.last().unwrap() > &15.0);
}

#[test]
fn polyhedral_union_repair_path() {
    // Indicator of a genuinely nonconvex union still classifies: the
    // projector recovers feasibility.
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
    let ind = OracleFn::from_expr(&FunctionExpr::Indicator(ClosedSet::PolyhedralUnion(vec![
        b1, b2,
    ])));
    let grid = SampleGrid::with_seed(2);
    let est = estimate_d2(&ind, &[0.0, 0.0], &[0.0, 0.0], &[1.0, 0.0], &grid).unwrap();
    match est.classification {
        Classification::ConvergesTo(v) => assert!(v.abs() <= 1e-2),
        c => panic!("expected convergence, got {c:?}"),
    }
}
