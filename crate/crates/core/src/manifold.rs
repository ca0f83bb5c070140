//! Charts and Riemannian metrics.
//!
//! A [`Chart`] is a named coordinate box whose axes are either periodic
//! (the box models a torus in that direction) or fixed. A [`MetricField`]
//! is the Gram matrix `g_ij` written as expressions in the chart
//! coordinates. Its inverse, determinant, `sqrt|g|` and first partials are
//! derived symbolically once, at construction.

use std::fmt;
use std::sync::Arc;

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::expr::{EvalPoint, Expr};

/// Determinants at or below this value are treated as singular.
pub const DEGENERACY_THRESHOLD: f64 = 1e-14;

/// Points per axis of the invariant-validation lattice.
pub const SAMPLE_POINTS_PER_AXIS: usize = 11;

/// Inward shrink of the validation lattice, relative to the box width.
pub const SAMPLE_SHRINK: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BoundaryMode {
    Periodic,
    Fixed,
}

impl fmt::Display for BoundaryMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            BoundaryMode::Periodic => "periodic",
            BoundaryMode::Fixed => "fixed",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Chart {
    name: String,
    coords: Vec<String>,
    domain: Vec<(f64, f64)>,
    boundary: Vec<BoundaryMode>,
}

impl Chart {
    pub fn new(
        name: impl Into<String>,
        coords: Vec<String>,
        domain: Vec<(f64, f64)>,
        boundary: Vec<BoundaryMode>,
    ) -> Result<Chart> {
        let n = coords.len();
        if n == 0 {
            return Err(Error::InvalidChart("dimension must be at least 1".into()));
        }
        if domain.len() != n || boundary.len() != n {
            return Err(Error::InvalidChart(format!(
                "{n} coordinates but {} domain intervals and {} boundary modes",
                domain.len(),
                boundary.len()
            )));
        }
        for (i, c) in coords.iter().enumerate() {
            if coords[..i].contains(c) {
                return Err(Error::InvalidChart(format!("duplicate coordinate `{c}`")));
            }
        }
        for (c, &(lo, hi)) in coords.iter().zip(&domain) {
            if !(lo.is_finite() && hi.is_finite() && lo < hi) {
                return Err(Error::InvalidChart(format!(
                    "interval for `{c}` must satisfy lower < upper, got [{lo}, {hi}]"
                )));
            }
        }
        Ok(Chart {
            name: name.into(),
            coords,
            domain,
            boundary,
        })
    }

    /// `R^n` box with coordinates `x1..xn`, all axes fixed.
    pub fn euclidean(n: usize, lo: f64, hi: f64) -> Chart {
        let coords = (1..=n).map(|i| format!("x{i}")).collect();
        Chart::new(
            format!("R{n}"),
            coords,
            vec![(lo, hi); n],
            vec![BoundaryMode::Fixed; n],
        )
        .expect("valid euclidean chart")
    }

    /// Flat torus `[0, 2π)^n` with coordinates `x1..xn`.
    pub fn torus(n: usize) -> Chart {
        let coords = (1..=n).map(|i| format!("x{i}")).collect();
        Chart::new(
            format!("T{n}"),
            coords,
            vec![(0.0, 2.0 * std::f64::consts::PI); n],
            vec![BoundaryMode::Periodic; n],
        )
        .expect("valid torus chart")
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn dim(&self) -> usize {
        self.coords.len()
    }

    pub fn coords(&self) -> &[String] {
        &self.coords
    }

    pub fn coord(&self, i: usize) -> &str {
        &self.coords[i]
    }

    pub fn domain(&self) -> &[(f64, f64)] {
        &self.domain
    }

    pub fn boundary(&self) -> &[BoundaryMode] {
        &self.boundary
    }

    pub fn index_of(&self, coord: &str) -> Option<usize> {
        self.coords.iter().position(|c| c == coord)
    }

    pub fn point(&self, values: &[f64]) -> Result<EvalPoint> {
        if values.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                what: "point arity",
                expected: self.dim(),
                found: values.len(),
            });
        }
        Ok(EvalPoint::from_coords(&self.coords, values)?)
    }

    /// Whether `x` lies in the closed domain box. Periodic axes always contain.
    pub fn contains(&self, x: &[f64]) -> bool {
        x.iter()
            .zip(&self.domain)
            .zip(&self.boundary)
            .all(|((&v, &(lo, hi)), mode)| *mode == BoundaryMode::Periodic || (lo..=hi).contains(&v))
    }

    /// Maps periodic coordinates into `[lo, hi)`.
    pub fn wrap(&self, x: &mut [f64]) {
        for ((v, &(lo, hi)), mode) in x.iter_mut().zip(&self.domain).zip(&self.boundary) {
            if *mode == BoundaryMode::Periodic {
                let w = hi - lo;
                let mut r = (*v - lo).rem_euclid(w);
                if r >= w {
                    r = 0.0;
                }
                *v = lo + r;
            }
        }
    }

    /// Checks that every variable of `e` is a coordinate of this chart.
    pub fn check_expr(&self, e: &Expr) -> Result<()> {
        for v in e.variables() {
            if !self.coords.contains(&v) {
                return Err(Error::InvalidChart(format!(
                    "variable `{v}` is not a coordinate of chart `{}` ({})",
                    self.name,
                    self.coords.join(", ")
                )));
            }
        }
        Ok(())
    }

    /// Uniform lattice with `per_axis` points per coordinate, shrunk inward
    /// by `SAMPLE_SHRINK` of each box width. Row-major, last axis fastest.
    pub fn sample_lattice(&self, per_axis: usize) -> Vec<Vec<f64>> {
        let axes: Vec<Vec<f64>> = self
            .domain
            .iter()
            .map(|&(lo, hi)| {
                let eps = SAMPLE_SHRINK * (hi - lo);
                let (a, b) = (lo + eps, hi - eps);
                if per_axis == 1 {
                    vec![0.5 * (a + b)]
                } else {
                    (0..per_axis)
                        .map(|k| a + (b - a) * k as f64 / (per_axis - 1) as f64)
                        .collect()
                }
            })
            .collect();
        cartesian(&axes)
    }

    /// The default validation lattice as evaluation points.
    pub fn sample_points(&self) -> Vec<EvalPoint> {
        self.sample_lattice(SAMPLE_POINTS_PER_AXIS)
            .iter()
            .map(|x| self.point(x).expect("lattice arity"))
            .collect()
    }
}

pub(crate) fn cartesian(axes: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let mut out = vec![Vec::with_capacity(axes.len())];
    for axis in axes {
        let mut next = Vec::with_capacity(out.len() * axis.len());
        for prefix in &out {
            for &v in axis {
                let mut p = prefix.clone();
                p.push(v);
                next.push(p);
            }
        }
        out = next;
    }
    out
}

/// Numeric metric quantities at one point.
#[derive(Debug, Clone)]
pub struct MetricData {
    pub point: EvalPoint,
    pub g: DMatrix<f64>,
    pub g_inv: DMatrix<f64>,
    pub det: f64,
    pub sqrt_det: f64,
}

/// A Riemannian metric on a chart, stored as symbolic Gram-matrix entries.
#[derive(Debug, Clone)]
pub struct MetricField {
    chart: Arc<Chart>,
    g: Vec<Vec<Expr>>,
    inv: Vec<Vec<Expr>>,
    det: Expr,
    sqrt_det: Expr,
    /// dg[k][i][j] = ∂g_ij/∂x_k
    dg: Vec<Vec<Vec<Expr>>>,
}

impl MetricField {
    /// Builds the metric and validates symmetry and positive definiteness on
    /// the chart's sampling lattice.
    pub fn new(chart: Arc<Chart>, entries: Vec<Vec<Expr>>) -> Result<MetricField> {
        let m = MetricField::new_unchecked(chart, entries)?;
        m.validate()?;
        Ok(m)
    }

    /// Builds the metric without the lattice validation pass.
    pub fn new_unchecked(chart: Arc<Chart>, entries: Vec<Vec<Expr>>) -> Result<MetricField> {
        let n = chart.dim();
        if entries.len() != n || entries.iter().any(|row| row.len() != n) {
            return Err(Error::DimensionMismatch {
                what: "metric matrix size",
                expected: n,
                found: entries.len(),
            });
        }
        for e in entries.iter().flatten() {
            chart.check_expr(e)?;
        }
        let det = symbolic_det(&entries);
        let inv = symbolic_inverse(&entries, &det);
        let sqrt_det = det.clone().sqrt();
        let dg = chart
            .coords()
            .iter()
            .map(|x| {
                entries
                    .iter()
                    .map(|row| row.iter().map(|e| e.diff(x)).collect())
                    .collect()
            })
            .collect();
        Ok(MetricField {
            chart,
            g: entries,
            inv,
            det,
            sqrt_det,
            dg,
        })
    }

    /// Identity metric on `chart`.
    pub fn euclidean(chart: Arc<Chart>) -> MetricField {
        let n = chart.dim();
        let entries = (0..n)
            .map(|i| (0..n).map(|j| Expr::constant(if i == j { 1.0 } else { 0.0 })).collect())
            .collect();
        MetricField::new_unchecked(chart, entries).expect("identity metric")
    }

    /// Diagonal metric from expressions.
    pub fn diagonal(chart: Arc<Chart>, diag: Vec<Expr>) -> Result<MetricField> {
        let n = diag.len();
        let entries = (0..n)
            .map(|i| {
                (0..n)
                    .map(|j| if i == j { diag[i].clone() } else { Expr::zero() })
                    .collect()
            })
            .collect();
        MetricField::new(chart, entries)
    }

    fn validate(&self) -> Result<()> {
        let n = self.dim();
        for p in self.chart.sample_points() {
            let g = self.eval_matrix(&self.g, &p)?;
            for i in 0..n {
                for j in 0..i {
                    let (a, b) = (g[(i, j)], g[(j, i)]);
                    if (a - b).abs() > 1e-12 * (1.0 + a.abs().max(b.abs())) {
                        return Err(Error::InvalidMetric(format!(
                            "g_{}_{} = {a} but g_{}_{} = {b} at {p}",
                            i + 1,
                            j + 1,
                            j + 1,
                            i + 1
                        )));
                    }
                }
            }
            for k in 1..=n {
                let minor = g.view((0, 0), (k, k)).determinant();
                if minor <= 0.0 {
                    return Err(Error::InvalidMetric(format!(
                        "not positive definite at {p}: leading minor {k} = {minor:e}"
                    )));
                }
            }
        }
        Ok(())
    }

    fn eval_matrix(&self, m: &[Vec<Expr>], p: &EvalPoint) -> Result<DMatrix<f64>> {
        let n = self.dim();
        let mut out = DMatrix::zeros(n, n);
        for i in 0..n {
            for j in 0..n {
                out[(i, j)] = m[i][j].eval(p)?;
            }
        }
        Ok(out)
    }

    pub fn chart(&self) -> &Arc<Chart> {
        &self.chart
    }

    pub fn dim(&self) -> usize {
        self.chart.dim()
    }

    /// g_ij
    pub fn g(&self, i: usize, j: usize) -> &Expr {
        &self.g[i][j]
    }

    /// g^ij
    pub fn inv(&self, i: usize, j: usize) -> &Expr {
        &self.inv[i][j]
    }

    pub fn det(&self) -> &Expr {
        &self.det
    }

    pub fn sqrt_det(&self) -> &Expr {
        &self.sqrt_det
    }

    /// ∂g_ij/∂x_k
    pub fn dg(&self, k: usize, i: usize, j: usize) -> &Expr {
        &self.dg[k][i][j]
    }

    pub fn entries(&self) -> &[Vec<Expr>] {
        &self.g
    }

    pub fn inverse_entries(&self) -> &[Vec<Expr>] {
        &self.inv
    }

    pub fn metric_data(&self, p: &EvalPoint) -> Result<MetricData> {
        let g = self.eval_matrix(&self.g, p)?;
        let det = g.determinant();
        if det <= DEGENERACY_THRESHOLD {
            return Err(Error::DegenerateMetric {
                point: p.to_string(),
                det,
            });
        }
        let g_inv = g
            .clone()
            .try_inverse()
            .ok_or_else(|| Error::DegenerateMetric {
                point: p.to_string(),
                det,
            })?;
        Ok(MetricData {
            point: p.clone(),
            g,
            g_inv,
            det,
            sqrt_det: det.sqrt(),
        })
    }

    /// Σ g_ij(p) u^i v^j
    pub fn inner(&self, p: &EvalPoint, u: &[f64], v: &[f64]) -> Result<f64> {
        let n = self.dim();
        for w in [u, v] {
            if w.len() != n {
                return Err(Error::DimensionMismatch {
                    what: "vector length",
                    expected: n,
                    found: w.len(),
                });
            }
        }
        let data = self.metric_data(p)?;
        // pairs (i, j) and (j, i) are summed together so that swapping u and v
        // reproduces the same floating-point result
        let mut acc = 0.0;
        for i in 0..n {
            acc += data.g[(i, i)] * (u[i] * v[i]);
            for j in i + 1..n {
                acc += data.g[(i, j)] * (u[i] * v[j] + u[j] * v[i]);
            }
        }
        Ok(acc)
    }

    /// Symbolic Σ g_ij u^i v^j.
    pub fn inner_expr(&self, u: &[Expr], v: &[Expr]) -> Expr {
        let n = self.dim();
        let mut terms = Vec::with_capacity(n * n);
        for i in 0..n {
            for j in 0..n {
                terms.push(&self.g[i][j] * &u[i] * &v[j]);
            }
        }
        Expr::sum(terms)
    }
}

/// Laplace expansion along the first row.
pub(crate) fn symbolic_det(m: &[Vec<Expr>]) -> Expr {
    let n = m.len();
    match n {
        0 => Expr::one(),
        1 => m[0][0].clone(),
        2 => &m[0][0] * &m[1][1] - &m[0][1] * &m[1][0],
        _ => {
            let mut terms = Vec::with_capacity(n);
            for j in 0..n {
                if m[0][j].is_zero() {
                    continue;
                }
                let minor = symbolic_det(&minor_matrix(m, 0, j));
                let t = &m[0][j] * minor;
                terms.push(if j % 2 == 0 { t } else { -t });
            }
            Expr::sum(terms)
        }
    }
}

fn minor_matrix(m: &[Vec<Expr>], row: usize, col: usize) -> Vec<Vec<Expr>> {
    m.iter()
        .enumerate()
        .filter(|(i, _)| *i != row)
        .map(|(_, r)| {
            r.iter()
                .enumerate()
                .filter(|(j, _)| *j != col)
                .map(|(_, e)| e.clone())
                .collect()
        })
        .collect()
}

/// Adjugate over determinant.
fn symbolic_inverse(m: &[Vec<Expr>], det: &Expr) -> Vec<Vec<Expr>> {
    let n = m.len();
    if n == 1 {
        return vec![vec![Expr::one() / det]];
    }
    let mut inv = vec![vec![Expr::zero(); n]; n];
    for i in 0..n {
        for j in 0..n {
            // inv[i][j] = C_ji / det
            let c = symbolic_det(&minor_matrix(m, j, i));
            let c = if (i + j) % 2 == 0 { c } else { -c };
            inv[i][j] = c / det;
        }
    }
    inv
}

/// Determinant of the submatrix of `m` selected by `rows` × `cols`.
pub(crate) fn symbolic_subdet(m: &[Vec<Expr>], rows: &[usize], cols: &[usize]) -> Expr {
    let sub: Vec<Vec<Expr>> = rows
        .iter()
        .map(|&r| cols.iter().map(|&c| m[r][c].clone()).collect())
        .collect();
    symbolic_det(&sub)
}
