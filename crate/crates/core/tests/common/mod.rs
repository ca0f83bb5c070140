//! Shared fixtures for the property and acceptance suites: test metrics,
//! random fields, and the symbolic identity catalogue.
#![allow(dead_code)]

use std::f64::consts::PI;
use std::sync::Arc;

use rand::rngs::StdRng;
use rand::Rng;
use vort::calculus::{
    cov_deriv, curl, directional, div, div_christoffel, flat, grad, lie_bracket, lie_deriv_metric, trace_curl,
    VectorField,
};
use vort::expr::{parse, EvalPoint, Expr};
use vort::forms::{ext_d, hodge_star, interior, volume_form, KForm};
use vort::manifold::{BoundaryMode, Chart, MetricField};

pub fn e(s: &str) -> Expr {
    parse(s).unwrap_or_else(|err| panic!("{s}: {err}"))
}

pub fn flat_r2() -> MetricField {
    MetricField::euclidean(Arc::new(Chart::euclidean(2, -2.0, 2.0)))
}

pub fn flat_r3() -> MetricField {
    MetricField::euclidean(Arc::new(Chart::euclidean(3, -2.0, 2.0)))
}

/// The round sphere in latitude/longitude, `g = diag(1, cos²θ)`.
pub fn s2_chart(theta_max: f64) -> Arc<Chart> {
    Arc::new(
        Chart::new(
            "S2",
            vec!["theta".into(), "phi".into()],
            vec![(-theta_max, theta_max), (0.0, 2.0 * PI)],
            vec![BoundaryMode::Fixed, BoundaryMode::Periodic],
        )
        .unwrap(),
    )
}

pub fn s2(theta_max: f64) -> MetricField {
    MetricField::diagonal(s2_chart(theta_max), vec![Expr::one(), e("cos(theta)^2")]).unwrap()
}

/// A diagonal metric on `[-2, 2]²` whose entries stay in roughly `[0.5, 4]`.
pub fn random_diagonal(rng: &mut StdRng) -> MetricField {
    let a: f64 = rng.gen_range(-0.4..0.4);
    let b: f64 = rng.gen_range(0.0..0.3);
    let c: f64 = rng.gen_range(-0.4..0.4);
    let chart = Arc::new(Chart::euclidean(2, -2.0, 2.0));
    MetricField::diagonal(
        chart,
        vec![
            e(&format!("1.5 + ({a})*sin(x2) + ({b})*x1^2")),
            e(&format!("2 + ({c})*cos(x1*x2)")),
        ],
    )
    .unwrap()
}

/// A full (non-diagonal) SPD metric on `[-1, 1]³`.
pub fn random_full3(rng: &mut StdRng) -> MetricField {
    let a: f64 = rng.gen_range(-0.3..0.3);
    let b: f64 = rng.gen_range(-0.2..0.2);
    let c: f64 = rng.gen_range(0.0..0.4);
    let chart = Arc::new(Chart::euclidean(3, -1.0, 1.0));
    let g = vec![
        vec![e(&format!("2 + ({c})*sin(x1)")), e(&format!("{a}")), e("0")],
        vec![e(&format!("{a}")), e("1.5 + 0.2*x3^2"), e(&format!("({b})*cos(x2)"))],
        vec![e("0"), e(&format!("({b})*cos(x2)")), e("1 + 0.1*x1*x1")],
    ];
    MetricField::new(chart, g).unwrap()
}

/// The three metrics the identity suite runs on.
pub fn identity_metrics(rng: &mut StdRng) -> Vec<(&'static str, MetricField)> {
    vec![
        ("flat R2", flat_r2()),
        ("S2", s2(1.3)),
        ("random diagonal", random_diagonal(rng)),
    ]
}

/// Smooth random scalar in the chart coordinates.
pub fn random_scalar(chart: &Chart, rng: &mut StdRng) -> Expr {
    let c: Vec<f64> = (0..6).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let x = chart.coords();
    let (a, b) = (&x[0], &x[x.len() - 1]);
    let mid = &x[x.len() / 2];
    e(&format!(
        "({}) + ({})*{a} + ({})*{mid}*{b} + ({})*{a}^2 + ({})*sin({a} + {b}) + ({})*cos({mid})",
        c[0], c[1], c[2], c[3], c[4], c[5]
    ))
}

pub fn random_field(chart: &Arc<Chart>, rng: &mut StdRng) -> VectorField {
    let comps = (0..chart.dim()).map(|_| random_scalar(chart, rng)).collect();
    VectorField::contravariant(chart.clone(), comps).unwrap()
}

pub fn random_form(chart: &Arc<Chart>, degree: usize, rng: &mut StdRng) -> KForm {
    let count = binomial(chart.dim(), degree);
    let comps = (0..count).map(|_| random_scalar(chart, rng)).collect();
    KForm::new(chart.clone(), degree, comps).unwrap()
}

pub fn binomial(n: usize, k: usize) -> usize {
    (0..k).fold(1, |acc, i| acc * (n - i) / (i + 1))
}

/// Uniform random point strictly inside the chart box.
pub fn random_point(chart: &Chart, rng: &mut StdRng) -> EvalPoint {
    let x: Vec<f64> = chart
        .domain()
        .iter()
        .map(|&(lo, hi)| {
            let pad = 1e-3 * (hi - lo);
            rng.gen_range(lo + pad..hi - pad)
        })
        .collect();
    chart.point(&x).unwrap()
}

/// A named symbolic identity `lhs = rhs`.
pub struct Identity {
    pub name: &'static str,
    pub lhs: Expr,
    pub rhs: Expr,
}

impl Identity {
    fn new(name: &'static str, lhs: Expr, rhs: Expr) -> Identity {
        Identity { name, lhs, rhs }
    }

    /// `|lhs − rhs| / max(1, |rhs|)` at `p`.
    pub fn error(&self, p: &EvalPoint) -> f64 {
        let a = self.lhs.eval(p).unwrap();
        let b = self.rhs.eval(p).unwrap();
        (a - b).abs() / b.abs().max(1.0)
    }
}

/// The vector-calculus identity catalogue for fields `x, u, v` and scalar `f`.
pub fn identities(m: &MetricField, x: &VectorField, u: &VectorField, v: &VectorField, f: &Expr) -> Vec<Identity> {
    let ip = |a: &VectorField, b: &VectorField| m.inner_expr(a.components(), b.components());
    let a_uv = curl(m, x).unwrap().apply(u, v);
    let nabla_v_x = cov_deriv(m, v, x).unwrap();
    let nabla_u_x = cov_deriv(m, u, x).unwrap();
    let connection = ip(&nabla_v_x, u) - ip(&nabla_u_x, v);
    let bracket = directional(v, &ip(x, u)) - directional(u, &ip(x, v)) + ip(x, &lie_bracket(u, v).unwrap());
    let lie = ip(&nabla_v_x, u) * 2.0 - lie_deriv_metric(m, x).unwrap().apply(u, v);

    let div_x = div(m, x).unwrap();
    let product = (f * &div_x) + ip(&grad(m, f).unwrap(), x);

    let vol = volume_form(m);
    let lie_vol = ext_d(&interior(x, &vol).unwrap()).unwrap().components()[0].clone();
    let omega = KForm::from_covector(&flat(m, x).unwrap()).unwrap();
    let d_star = ext_d(&hodge_star(m, &omega).unwrap()).unwrap().components()[0].clone();
    let div_vol = &div_x * m.sqrt_det();

    let mut out = vec![
        Identity::new("connection form", a_uv.clone(), connection),
        Identity::new("bracket form", a_uv.clone(), bracket),
        Identity::new("Lie-derivative form", a_uv, lie),
        Identity::new("product rule", div(m, &x.scale(f)).unwrap(), product),
        Identity::new("L_X dV = div X dV", lie_vol, div_vol.clone()),
        Identity::new("d(*w_X) = div X dV", d_star, div_vol),
        Identity::new("density = Christoffel divergence", div_x, div_christoffel(m, x).unwrap()),
        Identity::new("trace curl", trace_curl(m, x).unwrap(), Expr::zero()),
    ];
    let cg = curl(m, &grad(m, f).unwrap()).unwrap();
    for row in cg.components() {
        for c in row {
            out.push(Identity::new("curl grad", c.clone(), Expr::zero()));
        }
    }
    out
}

pub fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}
