use super::*;
use crate::sets::PolyhedronF;
use crate::smooth::PolyForm;

pub(crate) fn cross_set() -> ClosedSet {
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

/// min (x1-1)² + (x2-1)² over the union of the two half-axes, at (1, 0).
pub(crate) fn disjunctive_toy() -> ProblemInstance {
    let f0 = PolyForm::to_smooth_map(&[PolyForm::Quadratic {
        q: vec![vec![2.0, 0.0], vec![0.0, 2.0]],
        a: vec![-2.0, -2.0],
        c: 2.0,
    }]);
    ProblemInstance {
        kind: ProblemKind::Disjunctive,
        objective: f0,
        map: SmoothMap::identity(2),
        constraint: Some(cross_set()),
        outer: None,
        structured: None,
        xbar: vec![1.0, 0.0],
    }
}

/// min -x1 s.t. (1, x1, x2) in Q_3, at (1, 0).
pub(crate) fn socp_disk(rotated: bool) -> ProblemInstance {
    let f0 = PolyForm::to_smooth_map(&[PolyForm::Affine {
        a: if rotated { vec![0.0, -1.0] } else { vec![-1.0, 0.0] },
        b: 0.0,
    }]);
    let f = PolyForm::to_smooth_map(&[
        PolyForm::Affine {
            a: vec![0.0, 0.0],
            b: 1.0,
        },
        PolyForm::Affine {
            a: vec![1.0, 0.0],
            b: 0.0,
        },
        PolyForm::Affine {
            a: vec![0.0, 1.0],
            b: 0.0,
        },
    ]);
    ProblemInstance {
        kind: ProblemKind::Socp,
        objective: f0,
        map: f,
        constraint: Some(ClosedSet::Soc(crate::sets::SecondOrderCone::new(3))),
        outer: None,
        structured: None,
        xbar: vec![1.0, 0.0],
    }
}

/// The composite counterexample: f0 = -x²/2, F = x²/2, g = id, at 0.
pub(crate) fn composite_counterexample() -> ProblemInstance {
    let f0 = PolyForm::to_smooth_map(&[PolyForm::Quadratic {
        q: vec![vec![-1.0]],
        a: vec![0.0],
        c: 0.0,
    }]);
    let f = PolyForm::to_smooth_map(&[PolyForm::Quadratic {
        q: vec![vec![1.0]],
        a: vec![0.0],
        c: 0.0,
    }]);
    let g = FunctionExpr::Smooth(PolyForm::to_smooth_map(&[PolyForm::Affine {
        a: vec![1.0],
        b: 0.0,
    }]));
    ProblemInstance {
        kind: ProblemKind::Composite,
        objective: f0,
        map: f,
        constraint: None,
        outer: Some(g),
        structured: None,
        xbar: vec![0.0],
    }
}

#[test]
fn critical_cone_examples() {
    // min -x over R_-: the critical cone is trivial.
    let p = ProblemInstance {
        kind: ProblemKind::Geometric,
        objective: PolyForm::to_smooth_map(&[PolyForm::Affine {
            a: vec![-1.0],
            b: 0.0,
        }]),
        map: SmoothMap::identity(1),
        constraint: Some(ClosedSet::halfline_nonpositive()),
        outer: None,
        structured: None,
        xbar: vec![0.0],
    };
    assert!(!critical_cone_member(&p, &[-1.0]).unwrap()); // slope +1 > 0
    assert!(!critical_cone_member(&p, &[1.0]).unwrap()); // not tangent
    assert!(critical_cone_member(&p, &[0.0]).unwrap());

    let toy = disjunctive_toy();
    assert!(critical_cone_member(&toy, &[1.0, 0.0]).unwrap());
    assert!(!critical_cone_member(&toy, &[0.0, 1.0]).unwrap());

    let disk = socp_disk(false);
    assert!(critical_cone_member(&disk, &[0.0, 1.0]).unwrap());
    assert!(!critical_cone_member(&disk, &[1.0, 0.0]).unwrap());
    assert!(!critical_cone_member(&disk, &[-1.0, 0.0]).unwrap());
}

#[test]
fn multiplier_space_examples() {
    // The counterexample at 0 with unit weight: the whole line.
    let p = composite_counterexample();
    let space = multiplier_space(&p, 1.0).unwrap().unwrap();
    assert_eq!(space.basis.len(), 1);

    // Inconsistent stationarity: F constant, non-zero gradient.
    let p2 = ProblemInstance {
        kind: ProblemKind::Geometric,
        objective: PolyForm::to_smooth_map(&[PolyForm::Affine {
            a: vec![1.0],
            b: 0.0,
        }]),
        map: PolyForm::to_smooth_map(&[PolyForm::Affine {
            a: vec![0.0],
            b: 0.0,
        }]),
        constraint: Some(ClosedSet::halfline_nonpositive()),
        outer: None,
        structured: None,
        xbar: vec![0.0],
    };
    assert!(multiplier_space(&p2, 1.0).unwrap().is_none());
}

#[test]
fn disjunctive_direction_certificate() {
    let toy = disjunctive_toy();
    let cert = certify_direction_geometric(&toy, &[1.0, 0.0], Strategy::Lp)
        .unwrap()
        .expect("direction certifies");
    assert!(cert.value >= 1.0 - 1e-9);
    assert!(cert.alpha > 0.0);
    // λ is a positive multiple of (0, 2α).
    assert!((cert.lambda[1] / cert.alpha - 2.0).abs() < 1e-9);
    assert!(cert.lambda[0].abs() < 1e-12);
    assert!(super::subspace::post_check_passes(&cert));
    // Homogeneity of the certificate under positive scaling.
    let scaled = cert.scaled(3.0);
    assert!((scaled.value - 3.0 * cert.value).abs() < 1e-9);
}

#[test]
fn disjunctive_certify_and_concave_variant() {
    let toy = disjunctive_toy();
    let cert = certify(&toy, CertifyMode::SampledSphere { n: 64, seed: 7 }).unwrap();
    assert_eq!(cert.verdict, Verdict::CertifiedOnDirections);
    assert!(!cert.exhaustive);
    assert!(cert.min_value().unwrap() > 0.0);

    // Concave objective: nothing certifies.
    let mut concave = toy.clone();
    concave.objective = PolyForm::to_smooth_map(&[PolyForm::Quadratic {
        q: vec![vec![-2.0, 0.0], vec![0.0, 0.0]],
        a: vec![2.0, 0.0],
        c: -1.0,
    }]);
    let cert = certify(&concave, CertifyMode::SampledSphere { n: 16, seed: 7 }).unwrap();
    assert_eq!(cert.verdict, Verdict::NotCertified);
    assert!(cert.witness.is_some());
}

#[test]
fn disjunctive_subspace_exact() {
    // At (1, 0) relative to branch 1's affine hull the critical cone is
    // the x1-axis, a subspace, with a PD reduced Hessian.
    let toy = disjunctive_toy();
    let cert = certify(&toy, CertifyMode::SubspaceExact).unwrap();
    assert_eq!(cert.verdict, Verdict::CertifiedSubspaceExact);
    assert!(cert.exhaustive);
}

#[test]
fn nlp_equality_subspace_exact() {
    // min x1² + x2² s.t. x1 = 0: classical equality-constrained test.
    let f0 = PolyForm::to_smooth_map(&[PolyForm::Quadratic {
        q: vec![vec![2.0, 0.0], vec![0.0, 2.0]],
        a: vec![0.0, 0.0],
        c: 0.0,
    }]);
    let c = ClosedSet::Polyhedron(PolyhedronF::with_equalities(
        vec![vec![0.0, 0.0]],
        vec![0.0],
        vec![vec![1.0, 0.0]],
        vec![0.0],
    ));
    let p = ProblemInstance {
        kind: ProblemKind::Geometric,
        objective: f0,
        map: SmoothMap::identity(2),
        constraint: Some(c),
        outer: None,
        structured: None,
        xbar: vec![0.0, 0.0],
    };
    let cert = certify(&p, CertifyMode::SubspaceExact).unwrap();
    assert_eq!(cert.verdict, Verdict::CertifiedSubspaceExact);
}

#[test]
fn vacuous_subspace_certification() {
    // min -x over R_-: trivial critical cone.
    let p = ProblemInstance {
        kind: ProblemKind::Geometric,
        objective: PolyForm::to_smooth_map(&[PolyForm::Affine {
            a: vec![-1.0],
            b: 0.0,
        }]),
        map: SmoothMap::identity(1),
        constraint: Some(ClosedSet::halfline_nonpositive()),
        outer: None,
        structured: None,
        xbar: vec![0.0],
    };
    let cert = certify(&p, CertifyMode::SubspaceExact).unwrap();
    assert_eq!(cert.verdict, Verdict::CertifiedSubspaceExact);
    assert!(cert.notes.iter().any(|n| n.contains("vacuous")));
}

#[test]
fn socp_disk_certificates() {
    let disk = socp_disk(false);
    let cert = certify_direction(&disk, &[0.0, 1.0]).unwrap().unwrap();
    // value = β u2² with β = α = scaled to hit the threshold.
    assert!(cert.value >= 1.0 - 1e-9);
    assert!((cert.alpha - cert.value).abs() < 1e-9, "β = α for the disk");
    assert!(cert.curvature_term > crate::extreal::Finite(0.0));
    assert!(super::subspace::post_check_passes(&cert));

    let agg = certify(&disk, CertifyMode::SampledSphere { n: 32, seed: 7 }).unwrap();
    assert_eq!(agg.verdict, Verdict::CertifiedOnDirections);

    // Rotated objective: stationarity forces everything to zero.
    let rot = socp_disk(true);
    let agg = certify(&rot, CertifyMode::SampledSphere { n: 32, seed: 7 }).unwrap();
    assert_eq!(agg.verdict, Verdict::NotCertified);
}

#[test]
fn socp_interior_reduces_to_hessian_test() {
    // min x1² + x2² with (2, x1, x2) in Q_3 at the origin: the block is
    // interior, so certification is the plain PD Hessian test.
    let f0 = PolyForm::to_smooth_map(&[PolyForm::Quadratic {
        q: vec![vec![2.0, 0.0], vec![0.0, 2.0]],
        a: vec![0.0, 0.0],
        c: 0.0,
    }]);
    let f = PolyForm::to_smooth_map(&[
        PolyForm::Affine {
            a: vec![0.0, 0.0],
            b: 2.0,
        },
        PolyForm::Affine {
            a: vec![1.0, 0.0],
            b: 0.0,
        },
        PolyForm::Affine {
            a: vec![0.0, 1.0],
            b: 0.0,
        },
    ]);
    let p = ProblemInstance {
        kind: ProblemKind::Socp,
        objective: f0,
        map: f,
        constraint: Some(ClosedSet::Soc(crate::sets::SecondOrderCone::new(3))),
        outer: None,
        structured: None,
        xbar: vec![0.0, 0.0],
    };
    let cert = certify(&p, CertifyMode::SampledSphere { n: 16, seed: 1 }).unwrap();
    assert_eq!(cert.verdict, Verdict::CertifiedOnDirections);
    let sub = certify(&p, CertifyMode::SubspaceExact).unwrap();
    assert_eq!(sub.verdict, Verdict::CertifiedSubspaceExact);
}

#[test]
fn composite_counterexample_is_never_certified() {
    let p = composite_counterexample();
    // The only multiplier giving a finite outer curvature yields value 0.
    let d = certify_direction_composite(&p, &[1.0], &[]).unwrap();
    assert!(d.is_none());
    let cert = certify(&p, CertifyMode::DirectionsFile(vec![vec![1.0], vec![-1.0]])).unwrap();
    assert_eq!(cert.verdict, Verdict::NotCertified);
    assert_eq!(cert.witness, Some(vec![1.0]));
}

#[test]
fn sparse_outer_fast_path() {
    // f0 = x², F = x, g = l0 at x̄ = 0: no non-zero critical direction.
    let p = ProblemInstance {
        kind: ProblemKind::Composite,
        objective: PolyForm::to_smooth_map(&[PolyForm::Quadratic {
            q: vec![vec![2.0]],
            a: vec![0.0],
            c: 0.0,
        }]),
        map: SmoothMap::identity(1),
        constraint: None,
        outer: Some(FunctionExpr::L0(1)),
        structured: None,
        xbar: vec![0.0],
    };
    assert!(!critical_cone_member(&p, &[1.0]).unwrap());
    let cert = certify(&p, CertifyMode::SampledSphere { n: 16, seed: 3 }).unwrap();
    assert_eq!(cert.verdict, Verdict::CertifiedOnDirections);
    assert!(cert.notes.iter().any(|n| n.contains("vacuous")));

    // Off the zero set the fast path finds λ = 0 and the Hessian form.
    let p2 = ProblemInstance {
        kind: ProblemKind::Composite,
        objective: PolyForm::to_smooth_map(&[PolyForm::Quadratic {
            q: vec![vec![2.0]],
            a: vec![-2.0],
            c: 1.0,
        }]),
        map: SmoothMap::identity(1),
        constraint: None,
        outer: Some(FunctionExpr::L0(1)),
        structured: None,
        xbar: vec![1.0],
    };
    assert!(critical_cone_member(&p2, &[1.0]).unwrap());
    let d = certify_direction_composite(&p2, &[1.0], &[]).unwrap().unwrap();
    assert!(d.value > 0.0);
    assert!(d.rule_trace.iter().any(|t| t.contains("sparse-outer")));
}

#[test]
fn smooth_outer_reduces_to_classical() {
    // g smooth: the composite test is the classical equality-multiplier
    // condition. f0 = x², F = x, g(y) = y² at 0: λ = 0 is stationary and
    // the outer curvature adds ∇²g, so the value is 4u².
    let p = ProblemInstance {
        kind: ProblemKind::Composite,
        objective: PolyForm::to_smooth_map(&[PolyForm::Quadratic {
            q: vec![vec![2.0]],
            a: vec![0.0],
            c: 0.0,
        }]),
        map: SmoothMap::identity(1),
        constraint: None,
        outer: Some(FunctionExpr::Smooth(PolyForm::to_smooth_map(&[
            PolyForm::Quadratic {
                q: vec![vec![2.0]],
                a: vec![0.0],
                c: 0.0,
            },
        ]))),
        structured: None,
        xbar: vec![0.0],
    };
    let d = certify_direction_composite(&p, &[1.0], &[]).unwrap().unwrap();
    assert!((d.value - 4.0).abs() < 1e-6, "value {}", d.value);
}

fn structured_toy(f0_q: f64) -> ProblemInstance {
    // C = H(G^{-1}(D)) with H(z) = 2z, G = id, D = R_-: C = R_-.
    let s = StructuredData {
        h_map: PolyForm::to_smooth_map(&[PolyForm::Affine {
            a: vec![2.0],
            b: 0.0,
        }]),
        g_map: SmoothMap::identity(1),
        d_set: ClosedSet::halfline_nonpositive(),
        phi_candidates: vec![vec![0.0]],
        inner_semicompact: true,
        inner_calm_star: true,
    };
    ProblemInstance {
        kind: ProblemKind::Structured,
        objective: PolyForm::to_smooth_map(&[PolyForm::Quadratic {
            q: vec![vec![f0_q]],
            a: vec![0.0],
            c: 0.0,
        }]),
        map: SmoothMap::identity(1),
        constraint: None,
        outer: None,
        structured: Some(s),
        xbar: vec![0.0],
    }
}

#[test]
fn structured_invertible_h_collapses_to_preimage() {
    // min x² over C = R_- at 0 through the lifted representation.
    let p = structured_toy(2.0);
    assert!(critical_cone_member(&p, &[-1.0]).unwrap());
    let cert = direction::certify_direction_structured(&p, &[-1.0])
        .unwrap()
        .expect("certifies");
    assert!(cert.value >= 1.0 - 1e-9);
    assert!(cert.rule_trace.iter().any(|t| t.contains("lifted")));

    // Same instance phrased geometrically: certified with the same
    // per-direction quantity 2α u².
    let geo = ProblemInstance {
        kind: ProblemKind::Geometric,
        objective: p.objective.clone(),
        map: SmoothMap::identity(1),
        constraint: Some(ClosedSet::halfline_nonpositive()),
        outer: None,
        structured: None,
        xbar: vec![0.0],
    };
    let gcert = certify_direction_geometric(&geo, &[-1.0], Strategy::Lp)
        .unwrap()
        .expect("certifies");
    assert!((gcert.value - cert.value).abs() < 1e-9);
}

#[test]
fn structured_empty_multiplier_set_fails() {
    // f0 = x² + 2x: stationarity forces a multiplier the empty Σ cannot
    // deliver in the strictly-decreasing direction.
    let mut p = structured_toy(2.0);
    p.objective = PolyForm::to_smooth_map(&[PolyForm::Quadratic {
        q: vec![vec![2.0]],
        a: vec![2.0],
        c: 0.0,
    }]);
    assert!(critical_cone_member(&p, &[-1.0]).unwrap());
    let cert = direction::certify_direction_structured(&p, &[-1.0]).unwrap();
    assert!(cert.is_none(), "η must come from a trivial cone; no certificate");
}

#[test]
fn curvature_theta_examples() {
    // Linear H and G over a polyhedral D at a tangent direction: zero.
    let g = SmoothMap::identity(1);
    let h = PolyForm::to_smooth_map(&[PolyForm::Affine {
        a: vec![2.0],
        b: 0.0,
    }]);
    let d = ClosedSet::halfline_nonpositive();
    let theta = curvature_theta(&[0.0], &[-1.0], &[0.0], &[0.0], &g, &h, &d).unwrap();
    assert_eq!(theta, crate::extreal::Finite(0.0));

    // η pointing against the tangent direction: +inf.
    let theta = curvature_theta(&[0.0], &[-1.0], &[0.0], &[1.0], &g, &h, &d).unwrap();
    assert_eq!(theta, crate::extreal::PosInf);
}

#[test]
fn directions_file_skips_noncritical() {
    let toy = disjunctive_toy();
    let cert = certify(
        &toy,
        CertifyMode::DirectionsFile(vec![vec![1.0, 0.0], vec![0.0, 1.0]]),
    )
    .unwrap();
    assert_eq!(cert.verdict, Verdict::CertifiedOnDirections);
    assert!(cert.notes.iter().any(|n| n.contains("skipped")));
}

#[test]
fn lp_feasible_entry_point() {
    use crate::scalar::{Rational, Scalar};
    let mut lp = RationalLp::new(1);
    lp.set_nonneg(0);
    lp.add_ge(vec![Rational::lift(1.0)], Rational::lift(1.0));
    assert!(lp_feasible(&lp).is_feasible());
    let mut bad = RationalLp::new(1);
    bad.set_nonneg(0);
    bad.add_le(vec![Rational::lift(1.0)], Rational::lift(-1.0));
    assert!(!lp_feasible(&bad).is_feasible());
}
