mod common;

use std::sync::Arc;

use common::*;
use proptest::prelude::*;
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};
use vort::calculus::{curl, VectorField};
use vort::expr::{parse, BinaryOp, EvalPoint, Expr, Node, UnaryOp};
use vort::flow::integrate_flow;
use vort::forms::{curl_via_forms, ext_d, hodge_star, pointwise_inner, wedge};
use vort::helmholtz::{helmholtz_decompose, GridVectorField, Lattice};
use vort::manifold::{BoundaryMode, Chart};
use vort::stokes::{verify_curl_stokes, Orientation, ParamSurface};

fn var(name: &str) -> Expr {
    Expr::var(name)
}

/// Arbitrary trees over every operator, built without simplification.
fn any_expr() -> impl Strategy<Value = Expr> {
    let leaf = prop_oneof![
        (0.0..1e3f64).prop_map(Expr::constant),
        (0u32..20).prop_map(|k| Expr::constant(k as f64)),
        prop::sample::select(vec!["x", "y", "theta"]).prop_map(var),
    ];
    leaf.prop_recursive(5, 48, 2, |inner| {
        let unary = prop::sample::select(
            std::iter::once(UnaryOp::Neg)
                .chain(UnaryOp::FUNCTIONS)
                .collect::<Vec<_>>(),
        );
        let binary = prop::sample::select(vec![
            BinaryOp::Add,
            BinaryOp::Sub,
            BinaryOp::Mul,
            BinaryOp::Div,
            BinaryOp::Pow,
        ]);
        prop_oneof![
            (unary, inner.clone()).prop_map(|(op, a)| Expr::raw_unary(op, a)),
            (binary, inner.clone(), inner).prop_map(|(op, a, b)| Expr::raw_binary(op, a, b)),
        ]
    })
}

/// Smooth trees in `x, y`: no poles, no branch points.
fn smooth_expr() -> impl Strategy<Value = Expr> {
    let leaf = prop_oneof![
        (0.1..3.0f64).prop_map(Expr::constant),
        prop::sample::select(vec!["x", "y"]).prop_map(var),
    ];
    leaf.prop_recursive(4, 24, 2, |inner| {
        let unary = prop::sample::select(vec![UnaryOp::Neg, UnaryOp::Sin, UnaryOp::Cos, UnaryOp::Exp, UnaryOp::Sinh]);
        let binary = prop::sample::select(vec![BinaryOp::Add, BinaryOp::Sub, BinaryOp::Mul]);
        prop_oneof![
            (unary, inner.clone()).prop_map(|(op, a)| Expr::raw_unary(op, a)),
            (binary, inner.clone(), inner.clone()).prop_map(|(op, a, b)| Expr::raw_binary(op, a, b)),
            (inner, 0u32..4).prop_map(|(a, k)| Expr::raw_binary(BinaryOp::Pow, a, Expr::constant(k as f64))),
        ]
    })
}

fn at(x: f64, y: f64) -> EvalPoint {
    EvalPoint::new([("x", x), ("y", y)]).unwrap()
}

/// Fourth-order central difference in `x`.
fn fd_x(f: &Expr, x: f64, y: f64) -> Option<f64> {
    let h = 1e-3;
    let v = |dx: f64| f.eval(&at(x + dx, y)).ok();
    Some((8.0 * (v(h)? - v(-h)?) - (v(2.0 * h)? - v(-2.0 * h)?)) / (12.0 * h))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn print_then_parse_is_identity(e in any_expr()) {
        let text = e.to_string();
        prop_assert_eq!(parse(&text).unwrap(), e, "{}", text);
    }

    #[test]
    fn diff_matches_finite_differences(f in smooth_expr(), x in -1.0..1.0f64, y in -1.0..1.0f64) {
        let d = f.diff("x");
        let (Ok(v), Ok(dv)) = (f.eval(&at(x, y)), d.eval(&at(x, y))) else {
            return Err(TestCaseError::reject("outside the domain"));
        };
        prop_assume!(v.abs() < 1e6 && dv.abs() < 1e6);
        let fd = fd_x(&f, x, y);
        prop_assume!(fd.is_some());
        let fd = fd.unwrap();
        prop_assert!((dv - fd).abs() <= 1e-5 * dv.abs().max(1.0), "{f}: {dv} vs {fd}");
    }

    #[test]
    fn diff_is_linear(a in smooth_expr(), b in smooth_expr(), seed in any::<u64>()) {
        let sum = (&a + &b).diff("y");
        let parts = a.diff("y") + b.diff("y");
        let mut rng = StdRng::seed_from_u64(seed);
        for _ in 0..20 {
            let p = at(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
            if let (Ok(s), Ok(t)) = (sum.eval(&p), parts.eval(&p)) {
                prop_assert!((s - t).abs() <= 1e-10 * s.abs().max(1.0), "{s} vs {t}");
            }
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn inner_product_is_symmetric_and_positive(seed in any::<u64>()) {
        let mut rng = StdRng::seed_from_u64(seed);
        let m = if seed % 2 == 0 { random_full3(&mut rng) } else { random_diagonal(&mut rng) };
        let n = m.dim();
        for _ in 0..10 {
            let p = random_point(m.chart(), &mut rng);
            let u: Vec<f64> = (0..n).map(|_| rng.gen_range(-5.0..5.0)).collect();
            let v: Vec<f64> = (0..n).map(|_| rng.gen_range(-5.0..5.0)).collect();
            prop_assert_eq!(m.inner(&p, &u, &v).unwrap(), m.inner(&p, &v, &u).unwrap());
            prop_assert!(m.inner(&p, &u, &u).unwrap() > 0.0);
            prop_assert!(m.inner(&p, &vec![0.0; n], &vec![0.0; n]).unwrap().abs() <= 1e-12);
            let det = m.det().eval(&p).unwrap();
            let root = m.sqrt_det().eval(&p).unwrap();
            prop_assert!((root * root - det).abs() <= 1e-12 * det);
        }
    }

    #[test]
    fn calculus_identities_hold(seed in any::<u64>()) {
        let mut rng = StdRng::seed_from_u64(seed);
        let metrics = identity_metrics(&mut rng);
        let (name, m) = &metrics[(seed % 3) as usize];
        let chart = m.chart();
        let (x, u, v) = (random_field(chart, &mut rng), random_field(chart, &mut rng), random_field(chart, &mut rng));
        let f = random_scalar(chart, &mut rng);
        let ids = identities(m, &x, &u, &v, &f);
        for _ in 0..8 {
            let p = random_point(chart, &mut rng);
            for id in &ids {
                let err = id.error(&p);
                prop_assert!(err < 1e-7, "{} on {}: {}", id.name, name, err);
            }
        }
    }

    #[test]
    fn d_squared_and_hodge_laws(seed in any::<u64>()) {
        let mut rng = StdRng::seed_from_u64(seed);
        let m = if seed % 2 == 0 { random_full3(&mut rng) } else { random_diagonal(&mut rng) };
        let chart = m.chart().clone();
        let n = m.dim();
        let points: Vec<EvalPoint> = (0..5).map(|_| random_point(&chart, &mut rng)).collect();
        for k in 0..=n {
            let w = random_form(&chart, k, &mut rng);
            let sign = if (k * (n - k)) % 2 == 0 { 1.0 } else { -1.0 };
            let ss = hodge_star(&m, &hodge_star(&m, &w).unwrap()).unwrap();
            let beta = random_form(&chart, k, &mut rng);
            let lhs = wedge(&beta, &hodge_star(&m, &w).unwrap()).unwrap().components()[0].clone();
            let rhs = pointwise_inner(&m, &beta, &w).unwrap() * m.sqrt_det();
            for p in &points {
                for (a, b) in ss.components().iter().zip(w.components()) {
                    let (a, b) = (a.eval(p).unwrap(), b.eval(p).unwrap());
                    prop_assert!((a - sign * b).abs() <= 1e-9 * b.abs().max(1.0));
                }
                let (a, b) = (lhs.eval(p).unwrap(), rhs.eval(p).unwrap());
                prop_assert!((a - b).abs() <= 1e-9 * b.abs().max(1.0), "k={k}: {a} vs {b}");
            }
            if k + 2 <= n {
                let dd = ext_d(&ext_d(&w).unwrap()).unwrap();
                for p in &points {
                    for c in dd.components() {
                        prop_assert!(c.eval(p).unwrap().abs() < 1e-10);
                    }
                }
            }
        }
    }

    #[test]
    fn form_curl_matches_coordinate_curl(seed in any::<u64>()) {
        let mut rng = StdRng::seed_from_u64(seed);
        let m = random_full3(&mut rng);
        let x = random_field(m.chart(), &mut rng);
        let a = curl(&m, &x).unwrap();
        let b = curl_via_forms(&m, &x).unwrap().tensor;
        for _ in 0..5 {
            let p = random_point(m.chart(), &mut rng);
            let (a, b) = (a.eval(&p).unwrap(), b.eval(&p).unwrap());
            for (ra, rb) in a.iter().zip(&b) {
                prop_assert!(max_abs_diff(ra, rb) < 1e-9);
            }
        }
    }

    #[test]
    fn torus_flow_stays_in_the_fundamental_domain(seed in any::<u64>(), t in 0.1..20.0f64) {
        let mut rng = StdRng::seed_from_u64(seed);
        let chart = Arc::new(Chart::torus(2));
        let x = random_field(&chart, &mut rng);
        let p = random_point(&chart, &mut rng);
        let path = integrate_flow(&x, &p, t, 200).unwrap();
        prop_assert!(!path.exited);
        prop_assert!(path.samples.iter().all(|(_, y)| chart.contains(y)));
        let steps: Vec<f64> = path.samples.iter().map(|(t, _)| *t).collect();
        prop_assert!(steps.windows(2).all(|w| w[1] > w[0]));
    }

    #[test]
    fn stokes_orientation_reversal(c in prop::array::uniform4(-2.0..2.0f64)) {
        let chart = Arc::new(
            Chart::new(
                "R3",
                vec!["x".into(), "y".into(), "z".into()],
                vec![(-10.0, 10.0); 3],
                vec![BoundaryMode::Fixed; 3],
            )
            .unwrap(),
        );
        let x = VectorField::contravariant(
            chart,
            vec![
                e(&format!("({})*y + ({})*z^2", c[0], c[1])),
                e(&format!("({})*x*z", c[2])),
                e(&format!("({})*x + y", c[3])),
            ],
        )
        .unwrap();
        let s = ParamSurface::new(
            ["u", "v"],
            [(0.0, std::f64::consts::FRAC_PI_2), (0.0, 2.0 * std::f64::consts::PI)],
            vec![e("sin(u)*cos(v)"), e("sin(u)*sin(v)"), e("cos(u)")],
            Orientation::Positive,
        )
        .unwrap();
        let a = verify_curl_stokes(&x, &s, 32).unwrap();
        let b = verify_curl_stokes(&x, &s.with_orientation(Orientation::Negative), 32).unwrap();
        prop_assert!((a.lhs + b.lhs).abs() < 1e-12 && (a.rhs + b.rhs).abs() < 1e-12);
        prop_assert!((a.abs_err - b.abs_err).abs() < 1e-12);
        prop_assert!(a.abs_err < 1e-9);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn decomposition_parts_sum_to_input(seed in any::<u64>()) {
        let mut rng = StdRng::seed_from_u64(seed);
        let chart = Arc::new(Chart::torus(2));
        let m = vort::manifold::MetricField::euclidean(chart.clone());
        let lat = Arc::new(Lattice::uniform(chart.clone(), 16).unwrap());
        let coef: Vec<f64> = (0..4).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let x = VectorField::contravariant(
            chart,
            vec![
                e(&format!("({})*sin(x2) + ({})*cos(x1+x2)", coef[0], coef[1])),
                e(&format!("({})*cos(x1) + ({})*sin(2*x2)", coef[2], coef[3])),
            ],
        )
        .unwrap();
        let d = helmholtz_decompose(&m, lat.clone(), &x).unwrap();
        let exact = GridVectorField::sample(lat.clone(), &x).unwrap();
        for a in 0..2 {
            let sum: Vec<f64> = d.y.component(a).iter().zip(d.z.component(a)).map(|(p, q)| p + q).collect();
            prop_assert!(max_abs_diff(&sum, exact.component(a)) < 1e-12);
        }
        prop_assert!(d.phi.is_mean_zero());
        prop_assert!(d.max_div_y < 1e-8 * exact.max_abs().max(1.0));
    }
}

#[test]
fn node_variants_cover_the_printer() {
    // every operator appears in the round-trip strategy
    let e = parse("-(sinh(x) / cosh(y)) ^ 2 - sqrt(exp(x)) * log(2) + tan(theta)").unwrap();
    assert!(matches!(e.node(), Node::Binary(BinaryOp::Add, _, _)));
    assert_eq!(parse(&e.to_string()).unwrap(), e);
}
