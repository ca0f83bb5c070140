//! End-to-end acceptance run. Prints one PASS/FAIL line per criterion and
//! exits non-zero if any criterion fails.

mod common;

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::panic;
use std::path::PathBuf;
use std::process::Command;
use std::sync::Arc;
use std::time::{Duration, Instant};

use common::*;
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};
use vort::calculus::{curl, div, grad, ptensor_div, PTensor, VectorField};
use vort::expr::Expr;
use vort::flow::integrate_flow;
use vort::forms::{codifferential, ext_d, hodge_star, l2_inner, pointwise_inner, wedge, KForm};
use vort::helmholtz::{
    assemble_laplace_beltrami, decompose_with, helmholtz_decompose, FieldSource, GridVectorField, Lattice,
    SolveOptions,
};
use vort::manifest::Manifest;
use vort::manifold::{Chart, MetricField};
use vort::stokes::{verify_curl_stokes, verify_grad_line};

const SEED: u64 = 20_240_917;

const CURL_S2_REL_TOL: f64 = 1e-10;
const CURL_S2_POINTS: (usize, usize) = (10, 5);

const IDENTITY_TOL: f64 = 1e-7;
const IDENTITY_POINTS: usize = 50;

const HODGE_TOL: f64 = 1e-9;
const HODGE_POINTS: usize = 50;

const ADJOINT_TOL: f64 = 1e-6;
const ADJOINT_RES: usize = 64;
const ADJOINT_PAIRS: usize = 10;

const HELMHOLTZ_RES: usize = 64;
const HELMHOLTZ_COARSE: usize = 32;
const HELMHOLTZ_REL_TOL: f64 = 3e-3;
const HELMHOLTZ_DIV_CURL_TOL: f64 = 3e-3;
const HELMHOLTZ_RATIO: (f64, f64) = (3.5, 4.5);
const UNIQUENESS_TOL: f64 = 1e-8;

const STOKES_NODES: usize = 64;
const STOKES_TOL: f64 = 1e-6;
const STOKES_GRADIENT_TOL: f64 = 1e-8;
const GRAD_LINE_TOL: f64 = 1e-8;

const FLOW_STEPS: usize = 1000;
const FLOW_ENDPOINT_TOL: f64 = 1e-8;
const FLOW_ORDER: (f64, f64) = (3.8, 4.2);

const PDIV_TOL: f64 = 1e-8;
const PDIV_ONE_TOL: f64 = 1e-10;
const PDIV_POINTS: usize = 50;

const REGRESSION_TOL: f64 = 1e-10;

const STREAM_SEEDS: usize = 20;

struct Outcome {
    pass: bool,
    detail: String,
}

impl Outcome {
    fn new(pass: bool, detail: impl Into<String>) -> Outcome {
        Outcome { pass, detail: detail.into() }
    }

    fn all(parts: Vec<Outcome>) -> Outcome {
        let pass = parts.iter().all(|o| o.pass);
        let detail = parts.iter().map(|o| o.detail.as_str()).collect::<Vec<_>>().join("; ");
        Outcome { pass, detail }
    }
}

fn manifest_path(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("manifests").join(name)
}

fn s2_curl() -> Outcome {
    let m = s2(PI / 2.0);
    let x = VectorField::covariant(m.chart().clone(), vec![Expr::one(), e("cos(theta)^2")]).unwrap();
    let a = curl(&m, &x).unwrap();
    let (nt, np) = CURL_S2_POINTS;
    let mut worst = 0.0f64;
    for i in 0..nt {
        let theta = -PI / 2.0 + (i as f64 + 0.5) * PI / nt as f64;
        for j in 0..np {
            let phi = 2.0 * PI * j as f64 / np as f64;
            let p = m.chart().point(&[theta, phi]).unwrap();
            let want = -2.0 * theta.cos() * theta.sin();
            let got = a.get(1, 0).eval(&p).unwrap();
            worst = worst.max((got - want).abs() / want.abs());
        }
    }
    Outcome::new(
        worst < CURL_S2_REL_TOL,
        format!("{} points, max rel err {worst:.2e}", nt * np),
    )
}

fn identity_suite() -> Outcome {
    let mut rng = StdRng::seed_from_u64(SEED);
    let mut worst: BTreeMap<&'static str, f64> = BTreeMap::new();
    for (_, m) in identity_metrics(&mut rng) {
        let chart = m.chart().clone();
        let (x, u, v) = (random_field(&chart, &mut rng), random_field(&chart, &mut rng), random_field(&chart, &mut rng));
        let f = random_scalar(&chart, &mut rng);
        let ids = identities(&m, &x, &u, &v, &f);
        for _ in 0..IDENTITY_POINTS {
            let p = random_point(&chart, &mut rng);
            for id in &ids {
                let w = worst.entry(id.name).or_insert(0.0);
                *w = w.max(id.error(&p));
            }
        }
    }
    let max = worst.values().cloned().fold(0.0, f64::max);
    let names = worst.len();
    Outcome::new(
        max < IDENTITY_TOL,
        format!("{names} identities x 3 metrics x {IDENTITY_POINTS} points, max err {max:.2e}"),
    )
}

fn hodge() -> Outcome {
    let mut rng = StdRng::seed_from_u64(SEED + 1);
    let metrics = [random_diagonal(&mut rng), s2(1.3), flat_r3(), random_full3(&mut rng)];
    let mut worst = (0.0f64, 0.0f64);
    for m in &metrics {
        let chart = m.chart().clone();
        let n = m.dim();
        let points: Vec<_> = (0..HODGE_POINTS).map(|_| random_point(&chart, &mut rng)).collect();
        for k in 0..=n {
            let w = random_form(&chart, k, &mut rng);
            let beta = random_form(&chart, k, &mut rng);
            let star = hodge_star(m, &w).unwrap();
            let ss = hodge_star(m, &star).unwrap();
            let sign = if (k * (n - k)) % 2 == 0 { 1.0 } else { -1.0 };
            let lhs = wedge(&beta, &star).unwrap().components()[0].clone();
            let rhs = pointwise_inner(m, &beta, &w).unwrap() * m.sqrt_det();
            for p in &points {
                let (a, b) = (lhs.eval(p).unwrap(), rhs.eval(p).unwrap());
                worst.0 = worst.0.max((a - b).abs() / b.abs().max(1.0));
                for (a, b) in ss.components().iter().zip(w.components()) {
                    let (a, b) = (a.eval(p).unwrap(), b.eval(p).unwrap());
                    worst.1 = worst.1.max((a - sign * b).abs() / b.abs().max(1.0));
                }
            }
        }
    }
    Outcome::new(
        worst.0 < HODGE_TOL && worst.1 < HODGE_TOL,
        format!("defining relation {:.2e}, double-star sign {:.2e}", worst.0, worst.1),
    )
}

fn adjointness() -> Outcome {
    let mut rng = StdRng::seed_from_u64(SEED + 2);
    let chart = Arc::new(Chart::torus(2));
    let m = MetricField::euclidean(chart.clone());
    let res = [ADJOINT_RES, ADJOINT_RES];
    let mut c = || -> f64 { rng.gen_range(-1.0..1.0) };
    let mut worst = 0.0f64;
    for _ in 0..ADJOINT_PAIRS {
        let f = e(&format!(
            "({})*sin(x1) + ({})*cos(2*x2) + ({})*sin(x1 + x2) + ({})*exp(cos(x1))",
            c(),
            c(),
            c(),
            c()
        ));
        let w = KForm::new(
            chart.clone(),
            1,
            vec![
                e(&format!("({})*cos(x2) + ({})*sin(x1)*cos(x2)", c(), c())),
                e(&format!("({})*sin(3*x1) + ({})*exp(sin(x2))", c(), c())),
            ],
        )
        .unwrap();
        let f_form = KForm::scalar(chart.clone(), f).unwrap();
        let lhs = l2_inner(&m, &f_form, &codifferential(&m, &w).unwrap(), &res).unwrap();
        let rhs = l2_inner(&m, &ext_d(&f_form).unwrap(), &w, &res).unwrap();
        worst = worst.max((lhs - rhs).abs());
    }
    Outcome::new(
        worst < ADJOINT_TOL,
        format!("{ADJOINT_PAIRS} pairs at {ADJOINT_RES}^2, max |<f,delta w> - <df,w>| {worst:.2e}"),
    )
}

fn helmholtz() -> Outcome {
    let chart = Arc::new(Chart::torus(2));
    let m = MetricField::euclidean(chart.clone());
    let lattice = |n| Arc::new(Lattice::uniform(chart.clone(), n).unwrap());
    let gradient = grad(&m, &e("sin(x1)*sin(x2)")).unwrap();
    let solenoidal = VectorField::contravariant(chart.clone(), vec![e("-sin(x2)"), e("sin(x1)")]).unwrap();

    let gradient_err = |n| {
        let lat = lattice(n);
        let d = helmholtz_decompose(&m, lat.clone(), &gradient).unwrap();
        let exact = GridVectorField::sample(lat, &gradient).unwrap();
        let scale = exact.max_abs();
        (d.z.max_diff(&exact) / scale, d.y.max_abs() / scale, d.max_div_y, d.max_curl_z)
    };
    let (z_err, y_left, div_g, curl_g) = gradient_err(HELMHOLTZ_RES);
    let (z_coarse, ..) = gradient_err(HELMHOLTZ_COARSE);
    let ratio = z_coarse / z_err;

    let lat = lattice(HELMHOLTZ_RES);
    let d = helmholtz_decompose(&m, lat.clone(), &solenoidal).unwrap();
    let exact = GridVectorField::sample(lat.clone(), &solenoidal).unwrap();
    let scale = exact.max_abs();
    let (y_err, z_left) = (d.y.max_diff(&exact) / scale, d.z.max_abs() / scale);
    let (div_s, curl_s) = (d.max_div_y, d.max_curl_z);

    // uniqueness: a second CG run from a random start
    let mixed = VectorField::contravariant(
        chart.clone(),
        vec![e("cos(x1)*sin(x2) - sin(x2)"), e("sin(x1)*cos(x2) + 0.5*sin(x1)")],
    )
    .unwrap();
    let op = assemble_laplace_beltrami(&m, lat.clone()).unwrap();
    let a = decompose_with(&op, FieldSource::Symbolic(&mixed), &SolveOptions::default()).unwrap();
    let mut rng = StdRng::seed_from_u64(SEED + 3);
    let start = (0..lat.len()).map(|_| rng.gen_range(-10.0..10.0)).collect();
    let opts = SolveOptions {
        initial: Some(start),
        ..SolveOptions::default()
    };
    let b = decompose_with(&op, FieldSource::Symbolic(&mixed), &opts).unwrap();
    let spread = max_abs_diff(a.phi.values(), b.phi.values()).max(a.y.max_diff(&b.y));

    let tol = HELMHOLTZ_REL_TOL;
    let dc = HELMHOLTZ_DIV_CURL_TOL;
    Outcome::all(vec![
        Outcome::new(
            z_err < tol && y_left < tol,
            format!("gradient input: Z err {z_err:.2e}, |Y| {y_left:.2e}"),
        ),
        Outcome::new(
            y_err < tol && z_left < tol,
            format!("solenoidal input: Y err {y_err:.2e}, |Z| {z_left:.2e}"),
        ),
        Outcome::new(
            div_g.max(div_s) < dc && curl_g.max(curl_s) < dc,
            format!("max div Y {:.2e}, max curl Z {:.2e}", div_g.max(div_s), curl_g.max(curl_s)),
        ),
        Outcome::new(
            (HELMHOLTZ_RATIO.0..=HELMHOLTZ_RATIO.1).contains(&ratio),
            format!("error ratio {HELMHOLTZ_COARSE}->{HELMHOLTZ_RES} {ratio:.3}"),
        ),
        Outcome::new(spread < UNIQUENESS_TOL, format!("independent CG runs differ by {spread:.2e}")),
    ])
}

fn stokes() -> Outcome {
    let man = Manifest::load(&manifest_path("r3.ini")).unwrap();
    let hemi = man.surface("hemisphere").unwrap();
    let rot = verify_curl_stokes(man.field("rotation").unwrap(), hemi, STOKES_NODES).unwrap();
    let rot_ok = rot.abs_err < STOKES_TOL
        && (rot.lhs - 2.0 * PI).abs() < STOKES_TOL
        && (rot.rhs - 2.0 * PI).abs() < STOKES_TOL;
    let gr = verify_curl_stokes(man.field("gradient").unwrap(), hemi, STOKES_NODES).unwrap();
    let gr_ok = gr.lhs.abs() < STOKES_GRADIENT_TOL && gr.rhs.abs() < STOKES_GRADIENT_TOL;
    let f = man.scalar("xyz").unwrap();
    let mut line_worst = 0.0f64;
    for name in ["helix", "segment", "twisted"] {
        let r = verify_grad_line(&man.chart, f, man.curve(name).unwrap(), STOKES_NODES).unwrap();
        line_worst = line_worst.max(r.abs_err);
    }
    Outcome::all(vec![
        Outcome::new(
            rot_ok,
            format!("hemisphere lhs {:.12} rhs {:.12} err {:.2e}", rot.lhs, rot.rhs, rot.abs_err),
        ),
        Outcome::new(gr_ok, format!("gradient field |lhs| {:.1e} |rhs| {:.1e}", gr.lhs.abs(), gr.rhs.abs())),
        Outcome::new(line_worst < GRAD_LINE_TOL, format!("3 curves, max gradient-line err {line_worst:.1e}")),
    ])
}

fn flow() -> Outcome {
    let chart = Arc::new(Chart::euclidean(2, -10.0, 10.0));
    let x = VectorField::contravariant(chart.clone(), vec![e("-x2"), e("x1")]).unwrap();
    let p0 = chart.point(&[1.0, 0.0]).unwrap();
    let err = |t: f64, steps| {
        let path = integrate_flow(&x, &p0, t, steps).unwrap();
        max_abs_diff(path.end(), &[t.cos(), t.sin()])
    };
    let endpoint = err(PI / 2.0, FLOW_STEPS);
    let order = (err(2.0, 20) / err(2.0, 40)).log2();
    Outcome::new(
        endpoint < FLOW_ENDPOINT_TOL && (FLOW_ORDER.0..=FLOW_ORDER.1).contains(&order),
        format!("endpoint err {endpoint:.2e} at {FLOW_STEPS} steps, observed order {order:.3}"),
    )
}

fn ptensor() -> Outcome {
    let mut rng = StdRng::seed_from_u64(SEED + 4);
    let m = flat_r3();
    let chart = m.chart().clone();
    let poly = |rng: &mut StdRng| {
        let c: Vec<f64> = (0..5).map(|_| rng.gen_range(-2.0..2.0)).collect();
        e(&format!(
            "({})*x1^2*x2 + ({})*x2*x3^3 + ({})*x1*x2*x3 + ({})*x3^2 + ({})",
            c[0], c[1], c[2], c[3], c[4]
        ))
    };
    let points: Vec<_> = (0..PDIV_POINTS).map(|_| random_point(&chart, &mut rng)).collect();
    let mut worst = 0.0f64;
    for p in [2, 3] {
        let comps = (0..binomial(3, p)).map(|_| poly(&mut rng)).collect();
        let w = PTensor::new(chart.clone(), p, comps).unwrap();
        let dd = ptensor_div(&m, &ptensor_div(&m, &w).unwrap()).unwrap();
        for pt in &points {
            for c in dd.components() {
                worst = worst.max(c.eval(pt).unwrap().abs());
            }
        }
    }
    let comps: Vec<Expr> = (0..3).map(|_| poly(&mut rng)).collect();
    let one = ptensor_div(&m, &PTensor::new(chart.clone(), 1, comps.clone()).unwrap()).unwrap();
    let dv = div(&m, &VectorField::contravariant(chart.clone(), comps).unwrap()).unwrap();
    let mut one_worst = 0.0f64;
    for pt in &points {
        one_worst = one_worst.max((one.components()[0].eval(pt).unwrap() - dv.eval(pt).unwrap()).abs());
    }
    Outcome::new(
        worst < PDIV_TOL && one_worst < PDIV_ONE_TOL,
        format!("max |dd w| {worst:.1e} for p in {{2,3}}; p=1 vs div {one_worst:.1e}"),
    )
}

fn regressions() -> Outcome {
    let m = s2(PI / 2.0);
    let x = VectorField::contravariant(m.chart().clone(), vec![Expr::one(), e("cos(theta)^2")]).unwrap();
    let d = div(&m, &x).unwrap();
    let mut s2_worst = 0.0f64;
    let mut s2_min = f64::INFINITY;
    for theta in [-1.2, -0.7, -0.3, 0.4, 0.9, 1.4] {
        let p = m.chart().point(&[theta, 0.8]).unwrap();
        let v = d.eval(&p).unwrap();
        s2_worst = s2_worst.max((v + f64::tan(theta)).abs());
        s2_min = s2_min.min(v.abs());
    }

    let r2 = flat_r2();
    let chart = r2.chart().clone();
    let y = VectorField::contravariant(chart.clone(), vec![e("-x2"), e("x1")]).unwrap();
    let z = VectorField::contravariant(chart.clone(), vec![e("x1"), e("x2")]).unwrap();
    let (div_y, div_z) = (div(&r2, &y).unwrap(), div(&r2, &z).unwrap());
    let (curl_y, curl_z) = (curl(&r2, &y).unwrap(), curl(&r2, &z).unwrap());
    let mut rng = StdRng::seed_from_u64(SEED + 5);
    let mut vanishing = 0.0f64;
    let mut swapped = f64::INFINITY;
    for _ in 0..20 {
        let p = random_point(&chart, &mut rng);
        vanishing = vanishing.max(div_y.eval(&p).unwrap().abs());
        vanishing = vanishing.max(curl_z.get(0, 1).eval(&p).unwrap().abs());
        // the labels as printed would need div Z = 0 and curl Y = 0
        swapped = swapped.min(div_z.eval(&p).unwrap().abs());
        swapped = swapped.min(curl_y.get(0, 1).eval(&p).unwrap().abs());
    }
    Outcome::all(vec![
        Outcome::new(
            s2_worst < REGRESSION_TOL && s2_min > 0.1,
            format!("S2 div X = -tan(theta) to {s2_worst:.1e}, min |div X| {s2_min:.2}"),
        ),
        Outcome::new(
            vanishing < REGRESSION_TOL && swapped > 1.0,
            format!("div Y, curl Z <= {vanishing:.1e}; swapped labels off by >= {swapped:.1}"),
        ),
    ])
}

fn streamplot() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("lines.csv");
    let svg = dir.path().join("lines.svg");
    let band = manifest_path("s2_band.ini");
    let seeds = STREAM_SEEDS.to_string();
    let status = Command::new(env!("CARGO_BIN_EXE_vort"))
        .args(["streamplot", band.to_str().unwrap(), "--field", "X", "--seeds", &seeds, "--t", "3"])
        .args(["--out", csv.to_str().unwrap(), "--svg", svg.to_str().unwrap()])
        .status()
        .unwrap();
    if !status.success() {
        return Outcome::new(false, format!("streamplot exited with {status}"));
    }
    let man = Manifest::load(&band).unwrap();
    let text = std::fs::read_to_string(&csv).unwrap();
    let mut lines: BTreeMap<usize, Vec<(f64, Vec<f64>)>> = BTreeMap::new();
    for row in text.lines().skip(1).filter(|l| !l.starts_with('#')) {
        let v: Vec<f64> = row.split(',').map(|s| s.parse().unwrap()).collect();
        lines.entry(v[0] as usize).or_default().push((v[1], v[2..].to_vec()));
    }
    let monotone = lines.values().all(|l| l.windows(2).all(|w| w[1].0 > w[0].0));
    let inside = lines.values().flatten().all(|(_, x)| man.chart.contains(x));
    let paths = std::fs::read_to_string(&svg).unwrap().matches("<path").count();
    let sweeps = lines.values().all(|l| {
        let (a, b) = (&l[0].1, &l[l.len() - 1].1);
        l.len() == 1 || b[0] > a[0]
    });
    Outcome::new(
        lines.len() == STREAM_SEEDS && monotone && inside && paths == STREAM_SEEDS && sweeps,
        format!(
            "{} lines, monotone t {monotone}, in domain {inside}, +theta sweep {sweeps}, {paths} svg paths",
            lines.len()
        ),
    )
}

type Criterion = (&'static str, fn() -> Outcome);

fn main() {
    let criteria: [Criterion; 10] = [
        ("S2 curl reproduction", s2_curl),
        ("vector-calculus identity suite", identity_suite),
        ("Hodge star laws", hodge),
        ("d / codifferential adjointness", adjointness),
        ("Helmholtz decomposition", helmholtz),
        ("Stokes identities", stokes),
        ("flow integrator", flow),
        ("p-tensor divergence", ptensor),
        ("discrepancy regressions", regressions),
        ("streamplot structure", streamplot),
    ];
    let mut failed = 0;
    let mut total = Duration::ZERO;
    for (i, (name, run)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let outcome = panic::catch_unwind(run).unwrap_or_else(|err| {
            let msg = err
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| err.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            Outcome::new(false, format!("panicked: {msg}"))
        });
        let elapsed = start.elapsed();
        total += elapsed;
        let tag = if outcome.pass { "PASS" } else { "FAIL" };
        if !outcome.pass {
            failed += 1;
        }
        println!("{tag} {:>2}. {name}: {} [{:.2}s]", i + 1, outcome.detail, elapsed.as_secs_f64());
    }
    println!("{} of {} criteria passed in {:.1}s", criteria.len() - failed, criteria.len(), total.as_secs_f64());
    if failed > 0 {
        std::process::exit(1);
    }
}
