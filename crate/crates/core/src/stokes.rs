//! Quadrature checks of the curl and gradient integral identities for curves
//! and parametrized surfaces in flat R³.

use std::sync::Arc;

use rayon::prelude::*;

use crate::calculus::VectorField;
use crate::error::{Error, Result};
use crate::expr::{EvalPoint, Expr};
use crate::manifold::Chart;
use crate::quadrature::gauss_legendre_on;

/// Tangent and normal norms below this count as degenerate.
pub const DEGENERACY_TOLERANCE: f64 = 1e-10;
pub const MIN_NODES: usize = 8;
/// Endpoint distance under which a curve counts as closed.
const CLOSED_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Orientation {
    Positive,
    Negative,
}

impl Orientation {
    fn sign(self) -> f64 {
        match self {
            Orientation::Positive => 1.0,
            Orientation::Negative => -1.0,
        }
    }

    pub fn reversed(self) -> Orientation {
        match self {
            Orientation::Positive => Orientation::Negative,
            Orientation::Negative => Orientation::Positive,
        }
    }
}

fn check_embedding(embedding: &[Expr], params: &[&str]) -> Result<()> {
    if embedding.len() != 3 {
        return Err(Error::DimensionMismatch {
            what: "embedding components",
            expected: 3,
            found: embedding.len(),
        });
    }
    for e in embedding {
        if let Some(v) = e.variables().into_iter().find(|v| !params.contains(&v.as_str())) {
            return Err(Error::Expr(crate::expr::ExprError::UnboundVariable(v)));
        }
    }
    Ok(())
}

fn norm3(v: &[f64; 3]) -> f64 {
    (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt()
}

fn cross(a: &[f64; 3], b: &[f64; 3]) -> [f64; 3] {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

/// Curve `t ↦ c(t)` in R³ for `t ∈ [a, b]`, oriented by increasing `t`.
#[derive(Debug, Clone)]
pub struct ParamCurve {
    param: String,
    domain: (f64, f64),
    embedding: Vec<Expr>,
    velocity: Vec<Expr>,
}

impl ParamCurve {
    pub fn new(param: impl Into<String>, domain: (f64, f64), embedding: Vec<Expr>) -> Result<ParamCurve> {
        let param = param.into();
        check_embedding(&embedding, &[param.as_str()])?;
        let (a, b) = domain;
        if !(a.is_finite() && b.is_finite() && a < b) {
            return Err(Error::DegenerateGeometry(format!("curve interval [{a}, {b}] is empty")));
        }
        let velocity = embedding.iter().map(|e| e.diff(&param)).collect();
        Ok(ParamCurve {
            param,
            domain,
            embedding,
            velocity,
        })
    }

    pub fn param(&self) -> &str {
        &self.param
    }

    pub fn domain(&self) -> (f64, f64) {
        self.domain
    }

    pub fn embedding(&self) -> &[Expr] {
        &self.embedding
    }

    fn eval3(&self, exprs: &[Expr], t: f64) -> Result<[f64; 3]> {
        let p = EvalPoint::new([(self.param.as_str(), t)])?;
        Ok([exprs[0].eval(&p)?, exprs[1].eval(&p)?, exprs[2].eval(&p)?])
    }

    pub fn point(&self, t: f64) -> Result<[f64; 3]> {
        self.eval3(&self.embedding, t)
    }

    pub fn tangent(&self, t: f64) -> Result<[f64; 3]> {
        self.eval3(&self.velocity, t)
    }

    /// ε(a) = −1 at the start, ε(b) = +1 at the end.
    pub fn endpoints(&self) -> Result<[(f64, [f64; 3]); 2]> {
        Ok([(-1.0, self.point(self.domain.0)?), (1.0, self.point(self.domain.1)?)])
    }

    pub fn is_closed(&self) -> Result<bool> {
        let [(_, a), (_, b)] = self.endpoints()?;
        Ok(norm3(&[b[0] - a[0], b[1] - a[1], b[2] - a[2]]) < CLOSED_TOLERANCE)
    }

    /// Trapezoid on closed curves, Gauss–Legendre otherwise.
    fn rule(&self, nodes: usize) -> Result<(Vec<f64>, Vec<f64>)> {
        let (a, b) = self.domain;
        if self.is_closed()? {
            let h = (b - a) / nodes as f64;
            Ok(((0..nodes).map(|i| a + i as f64 * h).collect(), vec![h; nodes]))
        } else {
            Ok(gauss_legendre_on(a, b, nodes))
        }
    }

    /// Largest tangent norm at the quadrature nodes.
    fn max_speed(&self, nodes: usize) -> Result<f64> {
        let (ts, _) = self.rule(nodes)?;
        ts.iter()
            .map(|&t| self.tangent(t).map(|v| norm3(&v)))
            .try_fold(0.0_f64, |m, s| s.map(|s| m.max(s)))
    }
}

/// Surface `(u, v) ↦ Φ(u, v)` in R³ over a parameter rectangle. The positive
/// orientation has normal `Φ_u × Φ_v`.
#[derive(Debug, Clone)]
pub struct ParamSurface {
    params: [String; 2],
    domain: [(f64, f64); 2],
    embedding: Vec<Expr>,
    partials: [Vec<Expr>; 2],
    orientation: Orientation,
}

impl ParamSurface {
    pub fn new(
        params: [&str; 2],
        domain: [(f64, f64); 2],
        embedding: Vec<Expr>,
        orientation: Orientation,
    ) -> Result<ParamSurface> {
        if params[0] == params[1] {
            return Err(Error::DegenerateGeometry(format!("repeated surface parameter `{}`", params[0])));
        }
        check_embedding(&embedding, &params)?;
        for &(a, b) in &domain {
            if !(a.is_finite() && b.is_finite() && a < b) {
                return Err(Error::DegenerateGeometry(format!("parameter interval [{a}, {b}] is empty")));
            }
        }
        let partials = params.map(|p| embedding.iter().map(|e| e.diff(p)).collect());
        Ok(ParamSurface {
            params: params.map(String::from),
            domain,
            embedding,
            partials,
            orientation,
        })
    }

    pub fn params(&self) -> &[String; 2] {
        &self.params
    }

    pub fn domain(&self) -> [(f64, f64); 2] {
        self.domain
    }

    pub fn orientation(&self) -> Orientation {
        self.orientation
    }

    pub fn with_orientation(mut self, orientation: Orientation) -> ParamSurface {
        self.orientation = orientation;
        self
    }

    fn eval3(&self, exprs: &[Expr], u: f64, v: f64) -> Result<[f64; 3]> {
        let p = EvalPoint::new([(self.params[0].as_str(), u), (self.params[1].as_str(), v)])?;
        Ok([exprs[0].eval(&p)?, exprs[1].eval(&p)?, exprs[2].eval(&p)?])
    }

    pub fn point(&self, u: f64, v: f64) -> Result<[f64; 3]> {
        self.eval3(&self.embedding, u, v)
    }

    /// Oriented normal `±Φ_u × Φ_v` (not normalized).
    pub fn normal(&self, u: f64, v: f64) -> Result<[f64; 3]> {
        let du = self.eval3(&self.partials[0], u, v)?;
        let dv = self.eval3(&self.partials[1], u, v)?;
        Ok(cross(&du, &dv).map(|c| self.orientation.sign() * c))
    }

    /// Non-degenerate edges of the parameter rectangle, traversed
    /// counterclockwise in `(u, v)` (clockwise for the negative orientation).
    pub fn boundary(&self, nodes: usize) -> Result<Vec<ParamCurve>> {
        let mut t = String::from("t");
        while self.params.contains(&t) {
            t.push('_');
        }
        let tv = Expr::var(&t);
        let [(u0, u1), (v0, v1)] = self.domain;
        let c = Expr::constant;
        // (u(t), v(t), t-interval) for bottom, right, top, left
        let edges = [
            (tv.clone(), c(v0), (u0, u1)),
            (c(u1), tv.clone(), (v0, v1)),
            (c(u0 + u1) - &tv, c(v1), (u0, u1)),
            (c(u0), c(v0 + v1) - &tv, (v0, v1)),
        ];
        let mut curves = Vec::new();
        for (u_of_t, v_of_t, range) in edges {
            let emb = self
                .embedding
                .iter()
                .map(|e| {
                    e.substitute(&|name| {
                        if name == self.params[0] {
                            Some(u_of_t.clone())
                        } else if name == self.params[1] {
                            Some(v_of_t.clone())
                        } else {
                            None
                        }
                    })
                })
                .collect();
            let mut curve = ParamCurve::new(t.clone(), range, emb)?;
            if curve.max_speed(nodes)? < DEGENERACY_TOLERANCE {
                continue;
            }
            if self.orientation == Orientation::Negative {
                curve = curve.reversed();
            }
            curves.push(curve);
        }
        Ok(curves)
    }
}

impl ParamCurve {
    /// Same image traversed backwards.
    pub fn reversed(&self) -> ParamCurve {
        let (a, b) = self.domain;
        let flipped = Expr::constant(a + b) - Expr::var(&self.param);
        let embedding: Vec<Expr> = self
            .embedding
            .iter()
            .map(|e| e.substitute(&|n| (n == self.param).then(|| flipped.clone())))
            .collect();
        let velocity = embedding.iter().map(|e| e.diff(&self.param)).collect();
        ParamCurve {
            param: self.param.clone(),
            domain: self.domain,
            embedding,
            velocity,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IdentityReport {
    pub lhs: f64,
    pub rhs: f64,
    pub abs_err: f64,
    pub nodes: usize,
}

impl IdentityReport {
    fn new(lhs: f64, rhs: f64, nodes: usize) -> IdentityReport {
        IdentityReport {
            lhs,
            rhs,
            abs_err: (lhs - rhs).abs(),
            nodes,
        }
    }
}

fn check_ambient(x: &VectorField) -> Result<()> {
    if x.dim() != 3 {
        return Err(Error::DimensionMismatch {
            what: "ambient dimension",
            expected: 3,
            found: x.dim(),
        });
    }
    Ok(())
}

fn check_nodes(nodes: usize) -> Result<()> {
    if nodes < MIN_NODES {
        return Err(Error::Resolution(format!("need at least {MIN_NODES} quadrature nodes, got {nodes}")));
    }
    Ok(())
}

fn ambient_eval(x: &VectorField, p: &[f64; 3]) -> Result<[f64; 3]> {
    let v = x.eval(&x.chart().point(p)?)?;
    Ok([v[0], v[1], v[2]])
}

fn dot3(a: &[f64; 3], b: &[f64; 3]) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

/// `∫ ⟨X(c(t)), c'(t)⟩ dt`.
pub fn line_integral_tangent(x: &VectorField, c: &ParamCurve, nodes: usize) -> Result<f64> {
    check_ambient(x)?;
    check_nodes(nodes)?;
    let (ts, ws) = c.rule(nodes)?;
    let terms: Vec<f64> = ts
        .par_iter()
        .map(|&t| {
            let tangent = c.tangent(t)?;
            if norm3(&tangent) <= DEGENERACY_TOLERANCE {
                return Err(Error::DegenerateGeometry(format!(
                    "curve tangent vanishes at {} = {t}",
                    c.param
                )));
            }
            Ok(dot3(&ambient_eval(x, &c.point(t)?)?, &tangent))
        })
        .collect::<Result<_>>()?;
    Ok(terms.iter().zip(&ws).map(|(f, w)| f * w).sum())
}

/// `∫∫ ⟨W(Φ), ±Φ_u × Φ_v⟩ du dv` by tensor Gauss–Legendre with `nodes` per axis.
pub fn surface_integral_normal(w: &VectorField, s: &ParamSurface, nodes: usize) -> Result<f64> {
    check_ambient(w)?;
    check_nodes(nodes)?;
    let [(u0, u1), (v0, v1)] = s.domain;
    let (us, wu) = gauss_legendre_on(u0, u1, nodes);
    let (vs, wv) = gauss_legendre_on(v0, v1, nodes);
    let terms: Vec<f64> = (0..nodes * nodes)
        .into_par_iter()
        .map(|k| {
            let (i, j) = (k / nodes, k % nodes);
            let normal = s.normal(us[i], vs[j])?;
            if norm3(&normal) <= DEGENERACY_TOLERANCE {
                return Err(Error::DegenerateGeometry(format!(
                    "surface embedding has rank < 2 at ({}, {}) = ({}, {})",
                    s.params[0], s.params[1], us[i], vs[j]
                )));
            }
            Ok(wu[i] * wv[j] * dot3(&ambient_eval(w, &s.point(us[i], vs[j])?)?, &normal))
        })
        .collect::<Result<_>>()?;
    Ok(terms.iter().sum())
}

/// Classical curl `∇ × X` on flat R³ with the chart's coordinates.
pub fn classical_curl(x: &VectorField) -> Result<VectorField> {
    check_ambient(x)?;
    let c = x.chart();
    let d = |i: usize, j: usize| x.component(i).diff(c.coord(j));
    VectorField::new(
        c.clone(),
        vec![d(2, 1) - d(1, 2), d(0, 2) - d(2, 0), d(1, 0) - d(0, 1)],
        x.variance(),
    )
}

/// Flux of `curl X` through `S` against the circulation of `X` around `∂S`.
pub fn verify_curl_stokes(x: &VectorField, s: &ParamSurface, nodes: usize) -> Result<IdentityReport> {
    let lhs = surface_integral_normal(&classical_curl(x)?, s, nodes)?;
    let mut rhs = 0.0;
    for edge in s.boundary(nodes)? {
        rhs += line_integral_tangent(x, &edge, nodes)?;
    }
    Ok(IdentityReport::new(lhs, rhs, nodes))
}

/// `∫_c ⟨grad f, T⟩ dl` against `Σ ε(p) f(p)` over the endpoints.
pub fn verify_grad_line(chart: &Arc<Chart>, f: &Expr, c: &ParamCurve, nodes: usize) -> Result<IdentityReport> {
    chart.check_expr(f)?;
    let grad = VectorField::contravariant(chart.clone(), chart.coords().iter().map(|x| f.diff(x)).collect())?;
    let lhs = line_integral_tangent(&grad, c, nodes)?;
    let mut rhs = 0.0;
    for (eps, p) in c.endpoints()? {
        rhs += eps * f.eval(&chart.point(&p)?)?;
    }
    Ok(IdentityReport::new(lhs, rhs, nodes))
}
