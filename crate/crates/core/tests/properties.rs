//! Cross-module behaviour of the full pipeline on the bundled catalog:
//! frame consistency at random points, flow/density relations, inversion
//! round-trips, determinism, and expression round-trips.

use std::collections::HashMap;

use levelset_harmonics::checker::check_family;
use levelset_harmonics::config::{DerivativeMode, Tolerances};
use levelset_harmonics::expr::parse_expression;
use levelset_harmonics::family::{load_family, AmbientPoint, FamilySpec, ParamPoint};
use levelset_harmonics::flow::{dphi_ds, integrate_normal_flow};
use levelset_harmonics::geometry::frame_at;
use levelset_harmonics::linalg::{dot, norm};
use levelset_harmonics::oracle::{affine_match, catalog, catalog_entry};
use levelset_harmonics::reconstruct::{reconstruct_u, Gauge};
use levelset_harmonics::{Expr64, Family64};

use proptest::prelude::*;
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Families whose leafwise condition holds (everything except the parabolas).
fn accepted_families() -> Vec<Family64> {
    catalog()
        .into_iter()
        .filter(|e| e.harmonic.is_some())
        .map(|e| load_family(&e.config).expect("catalog entry loads"))
        .collect()
}

/// Uniform sample in the parameter box, shrunk toward the center by
/// `margin` of each interval's length on both ends.
fn random_param(spec: &Family64, rng: &mut ChaCha8Rng, margin: f64) -> ParamPoint<f64> {
    let sigma = spec
        .sigma_box()
        .iter()
        .map(|&[lo, hi]| {
            let pad = margin * (hi - lo);
            rng.gen_range(lo + pad..hi - pad)
        })
        .collect();
    let [lo, hi] = spec.t_interval();
    let pad = margin * (hi - lo);
    ParamPoint::new(sigma, rng.gen_range(lo + pad..hi - pad))
}

#[test]
fn frames_are_consistent_at_random_points() {
    let mut rng = ChaCha8Rng::seed_from_u64(101);
    for spec in accepted_families() {
        for _ in 0..40 {
            let q = random_param(&spec, &mut rng, 0.02);
            let frame = frame_at(&spec, &q).expect("frame exists");
            assert!(
                frame.density > 0.0,
                "{}: density must be positive at {:?}",
                spec.name(),
                q
            );
            let unit_err = (norm(&frame.unit_normal) - 1.0).abs();
            assert!(unit_err < 1e-12, "{}: |N| = 1 violated", spec.name());
            // The normal is orthogonal to every surface direction.
            for k in 0..spec.ambient_dim() - 1 {
                let col = frame.jacobian.column(k);
                let against = dot(&frame.unit_normal, &col);
                assert!(
                    against.abs() <= 1e-10 * (1.0 + norm(&col)),
                    "{}: normal not orthogonal to sigma_{} direction",
                    spec.name(),
                    k + 1
                );
            }
            // Density is the normal component of the t-column.
            let t_col = spec.ambient_dim() - 1;
            let implied = dot(&frame.unit_normal, &frame.jacobian.column(t_col));
            assert!(
                (implied - frame.density).abs() <= 1e-12 * (1.0 + frame.density),
                "{}: density mismatch",
                spec.name()
            );
        }
    }
}

#[test]
fn leaf_parameter_advances_at_inverse_density() {
    // Along a unit-speed normal flow, dt/ds = 1/phi.  One short RK4 step is
    // fifth-order accurate, so the step's t increment matches the endpoint
    // trapezoid of 1/phi to O(h^3).
    let mut rng = ChaCha8Rng::seed_from_u64(202);
    let h = 1e-2;
    for spec in accepted_families() {
        for _ in 0..8 {
            let q0 = random_param(&spec, &mut rng, 0.25);
            let trace = integrate_normal_flow(&spec, &q0, h, h).expect("short flow");
            if trace.truncated {
                continue;
            }
            let p0 = &trace.points[0];
            let p1 = trace.points.last().unwrap();
            let phi0 = frame_at(&spec, &p0.param).unwrap().density;
            let phi1 = frame_at(&spec, &p1.param).unwrap().density;
            let trapezoid = 0.5 * h * (1.0 / phi0 + 1.0 / phi1);
            let delta_t = p1.param.t - p0.param.t;
            assert!(
                (delta_t - trapezoid).abs() < 5e-6,
                "{}: dt/ds = 1/phi violated: delta_t = {delta_t}, trapezoid = {trapezoid}",
                spec.name()
            );
        }
    }
}

/// Hyperbola family built directly, with a configurable density-slope step.
fn hyperbolas_with_dphi_step(step: f64) -> Family64 {
    let mut tol = Tolerances::defaults(DerivativeMode::Symbolic);
    tol.dphi_step = step;
    FamilySpec::new(
        "hyperbolas",
        2,
        &["exp(s1)", "t*exp(-s1)"],
        vec![[-0.8, 0.8]],
        [-0.75, 0.75],
        DerivativeMode::Symbolic,
        tol,
    )
    .expect("family builds")
}

#[test]
fn density_slope_estimate_is_second_order() {
    // Halving the central-difference step must shrink the dphi/ds error by
    // about 4x.  The reference value uses a much smaller step.
    let q = ParamPoint::new(vec![0.3], 0.2);
    let truth = dphi_ds(&hyperbolas_with_dphi_step(1e-6), &q).unwrap();
    let coarse = (dphi_ds(&hyperbolas_with_dphi_step(2e-3), &q).unwrap() - truth).abs();
    let fine = (dphi_ds(&hyperbolas_with_dphi_step(1e-3), &q).unwrap() - truth).abs();
    assert!(coarse > 1e-10, "coarse error too small to measure a ratio");
    let ratio = coarse / fine;
    assert!(
        (3.2..=4.8).contains(&ratio),
        "expected ~4x error reduction, got ratio {ratio} (coarse {coarse:e}, fine {fine:e})"
    );
}

#[test]
fn global_inversion_roundtrips() {
    let mut rng = ChaCha8Rng::seed_from_u64(303);
    for spec in accepted_families() {
        for _ in 0..25 {
            let q = random_param(&spec, &mut rng, 0.05);
            let y = spec.phi_eval(&q).unwrap();
            let back = spec.phi_invert_global(&y).expect("inversion succeeds");
            assert!(
                (back.t - q.t).abs() < 1e-9,
                "{}: t round-trip failed: {} vs {}",
                spec.name(),
                back.t,
                q.t
            );
            for k in 0..q.sigma.len() {
                assert!(
                    (back.sigma[k] - q.sigma[k]).abs() < 1e-9,
                    "{}: sigma_{} round-trip failed",
                    spec.name(),
                    k + 1
                );
            }
        }
    }
}

#[test]
fn flows_reverse_to_the_start() {
    let mut rng = ChaCha8Rng::seed_from_u64(404);
    for spec in accepted_families() {
        for _ in 0..6 {
            let q0 = random_param(&spec, &mut rng, 0.3);
            let forward = integrate_normal_flow(&spec, &q0, 0.2, 1e-2).unwrap();
            if forward.truncated {
                continue;
            }
            let end = forward.points.last().unwrap().param.clone();
            let backward = integrate_normal_flow(&spec, &end, -0.2, 1e-2).unwrap();
            if backward.truncated {
                continue;
            }
            let returned = &backward.points.last().unwrap().ambient;
            let start = spec.phi_eval(&q0).unwrap();
            for i in 0..spec.ambient_dim() {
                assert!(
                    (returned.coords[i] - start.coords[i]).abs() < 1e-9,
                    "{}: flow did not reverse to the start",
                    spec.name()
                );
            }
        }
    }
}

#[test]
fn pipeline_output_is_deterministic() {
    let run = || {
        let spec: Family64 =
            load_family(&catalog_entry("concentric_circles").unwrap().config).unwrap();
        let report = check_family(&spec, &[41, 21]).unwrap();
        let recon = reconstruct_u(&spec, &report, Gauge::neutral()).unwrap();
        (report.to_json(), recon.to_csv())
    };
    let (json_a, csv_a) = run();
    let (json_b, csv_b) = run();
    assert_eq!(json_a, json_b, "check report must be byte-identical");
    assert_eq!(csv_a, csv_b, "reconstruction table must be byte-identical");
}

#[test]
fn normal_flow_lands_where_inversion_says() {
    // Flowing from the ambient point returned by phi_eval and re-inverting
    // the endpoint agree with the trace's own parameter bookkeeping.
    let spec: Family64 = load_family(&catalog_entry("spheres_chart").unwrap().config).unwrap();
    let q0 = ParamPoint::new(vec![0.2, -0.3], 0.1);
    let trace = integrate_normal_flow(&spec, &q0, 0.25, 5e-3).unwrap();
    assert!(!trace.truncated);
    let end = trace.points.last().unwrap();
    let reinverted = spec.phi_invert_global(&end.ambient).unwrap();
    assert!((reinverted.t - end.param.t).abs() < 1e-10);
    assert!((reinverted.sigma[0] - end.param.sigma[0]).abs() < 1e-10);
    assert!((reinverted.sigma[1] - end.param.sigma[1]).abs() < 1e-10);
}

// ---------------------------------------------------------------------------
// Property-based round trips
// ---------------------------------------------------------------------------

/// Expression trees built only from total operations, so every tree
/// evaluates to a float (possibly infinite) at any environment.
fn total_expression() -> impl Strategy<Value = Expr64> {
    let leaf = prop_oneof![
        (-300i32..300).prop_map(|k| Expr64::Constant(k as f64 / 100.0)),
        Just(Expr64::Variable {
            name: "s1".to_string(),
            index: 0,
        }),
        Just(Expr64::Variable {
            name: "t".to_string(),
            index: 1,
        }),
    ];
    leaf.prop_recursive(3, 24, 2, |inner| {
        prop_oneof![
            (inner.clone(), inner.clone()).prop_map(|(a, b)| Expr64::Binary(
                levelset_harmonics::expr::BinaryOp::Add,
                Box::new(a),
                Box::new(b)
            )),
            (inner.clone(), inner.clone()).prop_map(|(a, b)| Expr64::Binary(
                levelset_harmonics::expr::BinaryOp::Sub,
                Box::new(a),
                Box::new(b)
            )),
            (inner.clone(), inner.clone()).prop_map(|(a, b)| Expr64::Binary(
                levelset_harmonics::expr::BinaryOp::Mul,
                Box::new(a),
                Box::new(b)
            )),
            inner
                .clone()
                .prop_map(|a| Expr64::Unary(levelset_harmonics::expr::UnaryOp::Sin, Box::new(a))),
            inner
                .clone()
                .prop_map(|a| Expr64::Unary(levelset_harmonics::expr::UnaryOp::Cos, Box::new(a))),
            inner
                .clone()
                .prop_map(|a| Expr64::Unary(levelset_harmonics::expr::UnaryOp::Exp, Box::new(a))),
            inner.prop_map(|a| Expr64::Unary(levelset_harmonics::expr::UnaryOp::Neg, Box::new(a))),
        ]
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn expressions_roundtrip_through_display(expr in total_expression()) {
        let text = expr.to_string();
        let reparsed: Expr64 = parse_expression(&text, &["s1", "t"])
            .unwrap_or_else(|e| panic!("printed form must reparse: {text}: {e}"));
        let mut env = HashMap::new();
        env.insert("s1".to_string(), 0.37);
        env.insert("t".to_string(), -0.81);
        let a = expr.evaluate(&env).unwrap();
        let b = reparsed.evaluate(&env).unwrap();
        prop_assume!(!a.is_nan());
        prop_assert_eq!(a.to_bits(), b.to_bits(), "values differ: {} vs {}", a, b);
    }

    #[test]
    fn affine_match_recovers_planted_maps(
        scale in 0.25f64..4.0,
        offset in -2.0f64..2.0,
    ) {
        let candidate: Vec<f64> = (0..40).map(|k| -1.0 + k as f64 / 20.0).collect();
        let reference: Vec<f64> = candidate.iter().map(|&u| scale * u + offset).collect();
        let fit = affine_match(&reference, &candidate).unwrap();
        prop_assert!((fit.scale - scale).abs() < 1e-9);
        prop_assert!((fit.offset - offset).abs() < 1e-9);
        prop_assert!(fit.max_abs_residual < 1e-9);
    }
}

#[test]
fn reconstruction_slopes_integrate_the_table() {
    // du/dt from the table equals the finite difference of u on the grid to
    // the order of the grid spacing squared.
    let spec: Family64 = load_family(&catalog_entry("spheres_chart").unwrap().config).unwrap();
    let report = check_family(&spec, &[13, 13, 9]).unwrap();
    let recon = reconstruct_u(&spec, &report, Gauge::neutral()).unwrap();
    let t = recon.t_grid();
    let u = recon.u_values();
    let du = recon.du_values();
    for k in 1..t.len() - 1 {
        let central = (u[k + 1] - u[k - 1]) / (t[k + 1] - t[k - 1]);
        assert!(
            (central - du[k]).abs() < 1e-4,
            "slope table inconsistent at t = {}",
            t[k]
        );
    }
}

#[test]
fn harmonic_values_match_between_chart_points() {
    // The reconstructed function is a function of the leaf alone: two very
    // different chart points on the same leaf get the same value.
    let spec: Family64 =
        load_family(&catalog_entry("concentric_circles").unwrap().config).unwrap();
    let report = check_family(&spec, &[41, 21]).unwrap();
    let recon = reconstruct_u(&spec, &report, Gauge::neutral()).unwrap();
    let t: f64 = 0.31;
    let r = t.exp();
    let a = AmbientPoint::new(vec![r, 0.0]);
    let b = AmbientPoint::new(vec![-r * 0.6, r * 0.8]);
    let va = levelset_harmonics::reconstruct::evaluate_harmonic(&spec, &recon, &a).unwrap();
    let vb = levelset_harmonics::reconstruct::evaluate_harmonic(&spec, &recon, &b).unwrap();
    assert!((va - vb).abs() < 1e-9, "leaf values differ: {va} vs {vb}");
    assert!((va - t).abs() < 1e-7);
}
