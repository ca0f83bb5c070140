//! Discrete Laplace–Beltrami operator, Poisson solver and Helmholtz
//! decomposition on a rectangular lattice.
//!
//! Scalars live on lattice nodes, vector fields on the faces between them.
//! The operator is the face-flux divergence of the face gradient, so on the
//! flat torus it is the standard 5-point stencil and `div(X - grad φ)`
//! vanishes to solver precision. Off-diagonal inverse-metric terms enter
//! through centered node differences, keeping the operator symmetric in the
//! `√|g|`-weighted inner product.

mod lattice;

use std::sync::Arc;

use rayon::prelude::*;

pub use lattice::{GridFunction, GridVectorField, Lattice, StaggeredField, MIN_POINTS_PER_AXIS};

use crate::calculus::{div, Variance, VectorField};
use crate::error::{Error, Result};
use crate::expr::Expr;
use crate::manifold::{BoundaryMode, MetricData, MetricField};

/// Default relative residual for [`solve_poisson`].
pub const SOLVER_TOLERANCE: f64 = 1e-10;
/// Iteration cap as a multiple of the unknown count.
pub const ITERATION_FACTOR: usize = 50;
/// Right-hand sides whose weighted mean exceeds this (times `max(1, |rhs|∞)`)
/// are rejected.
pub const COMPATIBILITY_TOLERANCE: f64 = 1e-8;

pub(crate) fn sample_nodes(lattice: &Lattice, f: &Expr) -> Result<Vec<f64>> {
    let chart = lattice.chart();
    chart.check_expr(f)?;
    (0..lattice.len())
        .into_par_iter()
        .map(|p| Ok(f.eval(&chart.point(&lattice.point(p))?)?))
        .collect()
}

fn metric_at(m: &MetricField, x: &[f64]) -> Result<MetricData> {
    m.metric_data(&m.chart().point(x)?)
}

/// Matrix-free Laplace–Beltrami operator with homogeneous Neumann conditions
/// on fixed axes.
#[derive(Debug, Clone)]
pub struct LaplaceBeltrami {
    lattice: Arc<Lattice>,
    /// √|g| at nodes
    node_sqrt: Vec<f64>,
    /// control volume × √|g|
    weight: Vec<f64>,
    /// row-major n×n blocks per node
    node_g: Vec<f64>,
    node_ginv: Vec<f64>,
    /// per axis: `area · √|g|` at every face
    face_flux: Vec<Vec<f64>>,
    /// per axis: inverse-metric row `g^{a·}` at every face, n entries per face
    face_ginv: Vec<Vec<f64>>,
    /// per axis: interior faces as (lower node, upper node, conductance)
    links: Vec<Vec<(usize, usize, f64)>>,
    cross: bool,
}

/// Builds the discrete Laplace–Beltrami operator of `m` on `lattice`.
pub fn assemble_laplace_beltrami(m: &MetricField, lattice: Arc<Lattice>) -> Result<LaplaceBeltrami> {
    if **m.chart() != **lattice.chart() {
        return Err(Error::ChartMismatch(m.chart().name().into(), lattice.chart().name().into()));
    }
    let n = lattice.dim();
    let nodes: Vec<MetricData> = (0..lattice.len())
        .into_par_iter()
        .map(|p| metric_at(m, &lattice.point(p)))
        .collect::<Result<_>>()?;
    let node_sqrt: Vec<f64> = nodes.iter().map(|d| d.sqrt_det).collect();
    let weight = (0..lattice.len())
        .map(|p| lattice.cell_volume(p) * node_sqrt[p])
        .collect();
    let block = |d: &MetricData, inv: bool| -> Vec<f64> {
        let mat = if inv { &d.g_inv } else { &d.g };
        (0..n).flat_map(|a| (0..n).map(move |b| mat[(a, b)])).collect()
    };
    let node_g = nodes.iter().flat_map(|d| block(d, false)).collect();
    let node_ginv: Vec<f64> = nodes.iter().flat_map(|d| block(d, true)).collect();
    let cross = (0..lattice.len()).any(|p| {
        (0..n).any(|a| (0..n).any(|b| a != b && node_ginv[p * n * n + a * n + b] != 0.0))
    });

    let mut face_flux = Vec::with_capacity(n);
    let mut face_ginv = Vec::with_capacity(n);
    let mut links = Vec::with_capacity(n);
    for a in 0..n {
        let data: Vec<MetricData> = (0..lattice.face_count(a))
            .into_par_iter()
            .map(|f| metric_at(m, &lattice.face_point(a, f)))
            .collect::<Result<_>>()?;
        let mut flux = Vec::with_capacity(data.len());
        let mut rows = Vec::with_capacity(data.len() * n);
        let mut axis_links = Vec::new();
        for (f, d) in data.iter().enumerate() {
            let mut idx = lattice.face_multi_index(a, f);
            let (lo, hi) = lattice.face_nodes(a, idx[a]);
            idx[a] = lo.or(hi).expect("face has a node");
            let node = lattice.flat_index(&idx);
            let area: f64 = (0..n).filter(|&b| b != a).map(|b| lattice.width(node, b)).product();
            flux.push(area * d.sqrt_det);
            rows.extend((0..n).map(|b| d.g_inv[(a, b)]));
            if let (Some(lo), Some(hi)) = (lo, hi) {
                idx[a] = lo;
                let p = lattice.flat_index(&idx);
                idx[a] = hi;
                let q = lattice.flat_index(&idx);
                let k = area * d.sqrt_det * d.g_inv[(a, a)] / lattice.spacing()[a];
                axis_links.push((p, q, k));
            }
        }
        face_flux.push(flux);
        face_ginv.push(rows);
        links.push(axis_links);
    }
    Ok(LaplaceBeltrami {
        lattice,
        node_sqrt,
        weight,
        node_g,
        node_ginv,
        face_flux,
        face_ginv,
        links,
        cross,
    })
}

impl LaplaceBeltrami {
    pub fn lattice(&self) -> &Arc<Lattice> {
        &self.lattice
    }

    /// `√|g|`-weighted control volumes.
    pub fn weights(&self) -> &[f64] {
        &self.weight
    }

    /// Σ w_p u_p v_p
    pub fn weighted_inner(&self, u: &GridFunction, v: &GridFunction) -> f64 {
        self.weight
            .iter()
            .zip(u.values().iter().zip(v.values()))
            .map(|(w, (a, b))| w * a * b)
            .sum()
    }

    fn weighted_mean(&self, v: &[f64]) -> f64 {
        let total: f64 = self.weight.iter().sum();
        self.weight.iter().zip(v).map(|(w, x)| w * x).sum::<f64>() / total
    }

    /// Centered difference along `axis`, zero at fixed-axis endpoints.
    fn centered(&self, v: &[f64], axis: usize, out: &mut [f64]) {
        let lat = &self.lattice;
        let h2 = 2.0 * lat.spacing()[axis];
        for (p, o) in out.iter_mut().enumerate() {
            *o = match (lat.neighbor(p, axis, false), lat.neighbor(p, axis, true)) {
                (Some(a), Some(b)) => (v[b] - v[a]) / h2,
                _ => 0.0,
            };
        }
    }

    /// Stiffness product `M v = -W Δ v` (symmetric positive semidefinite).
    fn stiffness(&self, v: &[f64], out: &mut [f64]) {
        out.iter_mut().for_each(|o| *o = 0.0);
        for axis_links in &self.links {
            for &(p, q, k) in axis_links {
                let flux = k * (v[q] - v[p]);
                out[p] -= flux;
                out[q] += flux;
            }
        }
        if !self.cross {
            return;
        }
        let lat = &self.lattice;
        let n = lat.dim();
        let mut db = vec![0.0; v.len()];
        for b in 0..n {
            self.centered(v, b, &mut db);
            for a in (0..n).filter(|&a| a != b) {
                let h2 = 2.0 * lat.spacing()[a];
                for p in 0..v.len() {
                    let coef = self.node_ginv[p * n * n + a * n + b];
                    if coef == 0.0 {
                        continue;
                    }
                    if let (Some(lo), Some(hi)) = (lat.neighbor(p, a, false), lat.neighbor(p, a, true)) {
                        let t = lat.cell_volume(p) * self.node_sqrt[p] * coef * db[p] / h2;
                        out[hi] += t;
                        out[lo] -= t;
                    }
                }
            }
        }
    }

    fn diagonal(&self) -> Vec<f64> {
        let mut d = vec![0.0; self.lattice.len()];
        for axis_links in &self.links {
            for &(p, q, k) in axis_links {
                d[p] += k;
                d[q] += k;
            }
        }
        d
    }

    fn check_lattice(&self, lat: &Arc<Lattice>) -> Result<()> {
        if **lat != *self.lattice {
            return Err(Error::Resolution("grid data lives on a different lattice".into()));
        }
        Ok(())
    }

    /// Discrete `Δ v`.
    pub fn apply(&self, v: &GridFunction) -> Result<GridFunction> {
        self.check_lattice(v.lattice())?;
        let mut out = vec![0.0; v.values().len()];
        self.stiffness(v.values(), &mut out);
        for (o, w) in out.iter_mut().zip(&self.weight) {
            *o = -*o / w;
        }
        GridFunction::new(self.lattice.clone(), out)
    }

    /// Face-flux divergence; boundary faces on fixed axes contribute their flux.
    pub fn divergence(&self, x: &StaggeredField) -> Result<GridFunction> {
        self.check_lattice(x.lattice())?;
        let lat = &self.lattice;
        let mut out = vec![0.0; lat.len()];
        for (a, flux) in self.face_flux.iter().enumerate() {
            let values = x.faces(a);
            for (f, (&fx, &v)) in flux.iter().zip(values).enumerate() {
                let idx = lat.face_multi_index(a, f);
                let (lo, hi) = lat.face_nodes(a, idx[a]);
                let mut node = idx.clone();
                if let Some(k) = lo {
                    node[a] = k;
                    out[lat.flat_index(&node)] += fx * v;
                }
                if let Some(k) = hi {
                    node[a] = k;
                    out[lat.flat_index(&node)] -= fx * v;
                }
            }
        }
        for (o, w) in out.iter_mut().zip(&self.weight) {
            *o /= w;
        }
        GridFunction::new(lat.clone(), out)
    }

    /// Contravariant face gradient `g^{ab} ∂_b v`; zero on fixed-axis boundary faces.
    pub fn gradient(&self, v: &GridFunction) -> Result<StaggeredField> {
        self.check_lattice(v.lattice())?;
        let lat = &self.lattice;
        let n = lat.dim();
        let vals = v.values();
        let centered: Vec<Vec<f64>> = if self.cross {
            (0..n)
                .map(|b| {
                    let mut d = vec![0.0; vals.len()];
                    self.centered(vals, b, &mut d);
                    d
                })
                .collect()
        } else {
            Vec::new()
        };
        let faces = (0..n)
            .map(|a| {
                (0..lat.face_count(a))
                    .map(|f| {
                        let mut idx = lat.face_multi_index(a, f);
                        let (lo, hi) = lat.face_nodes(a, idx[a]);
                        let (Some(lo), Some(hi)) = (lo, hi) else {
                            return 0.0;
                        };
                        idx[a] = lo;
                        let p = lat.flat_index(&idx);
                        idx[a] = hi;
                        let q = lat.flat_index(&idx);
                        let row = &self.face_ginv[a][f * n..(f + 1) * n];
                        let mut z = row[a] * (vals[q] - vals[p]) / lat.spacing()[a];
                        if self.cross {
                            for b in (0..n).filter(|&b| b != a) {
                                z += row[b] * 0.5 * (centered[b][p] + centered[b][q]);
                            }
                        }
                        z
                    })
                    .collect()
            })
            .collect();
        Ok(StaggeredField::new(lat.clone(), faces))
    }

    /// Node derivative along `axis`: centered inside, one-sided second order
    /// at fixed-axis endpoints.
    fn node_derivative(&self, v: &[f64], axis: usize) -> Vec<f64> {
        let lat = &self.lattice;
        let h = lat.spacing()[axis];
        (0..v.len())
            .map(|p| match (lat.neighbor(p, axis, false), lat.neighbor(p, axis, true)) {
                (Some(a), Some(b)) => (v[b] - v[a]) / (2.0 * h),
                (None, Some(b)) => {
                    let c = lat.neighbor(b, axis, true).expect("lattice has at least 8 points");
                    (-3.0 * v[p] + 4.0 * v[b] - v[c]) / (2.0 * h)
                }
                (Some(a), None) => {
                    let c = lat.neighbor(a, axis, false).expect("lattice has at least 8 points");
                    (3.0 * v[p] - 4.0 * v[a] + v[c]) / (2.0 * h)
                }
                (None, None) => unreachable!("axis with a single node"),
            })
            .collect()
    }

    /// Collocated divergence `(1/√|g|) ∂_a(√|g| X^a)` by node differences.
    pub fn node_divergence(&self, x: &GridVectorField) -> Result<GridFunction> {
        self.check_lattice(x.lattice())?;
        if x.variance() != Variance::Contravariant {
            return Err(Error::Variance("divergence needs a contravariant field".into()));
        }
        let mut out = vec![0.0; self.lattice.len()];
        for a in 0..self.lattice.dim() {
            let density: Vec<f64> = x.component(a).iter().zip(&self.node_sqrt).map(|(v, s)| v * s).collect();
            for (o, d) in out.iter_mut().zip(self.node_derivative(&density, a)) {
                *o += d;
            }
        }
        for (o, s) in out.iter_mut().zip(&self.node_sqrt) {
            *o /= s;
        }
        GridFunction::new(self.lattice.clone(), out)
    }

    /// Collocated curl `∂_b X_a - ∂_a X_b` for every pair `a < b`, lowering
    /// contravariant input with the node metric.
    pub fn node_curl(&self, x: &GridVectorField) -> Result<Vec<((usize, usize), GridFunction)>> {
        self.check_lattice(x.lattice())?;
        let n = self.lattice.dim();
        let len = self.lattice.len();
        let lowered: Vec<Vec<f64>> = match x.variance() {
            Variance::Covariant => x.components().to_vec(),
            Variance::Contravariant => (0..n)
                .map(|a| {
                    (0..len)
                        .map(|p| (0..n).map(|b| self.node_g[p * n * n + a * n + b] * x.component(b)[p]).sum())
                        .collect()
                })
                .collect(),
        };
        let mut out = Vec::new();
        for a in 0..n {
            for b in a + 1..n {
                let dba = self.node_derivative(&lowered[a], b);
                let dab = self.node_derivative(&lowered[b], a);
                let values = dba.iter().zip(&dab).map(|(u, v)| u - v).collect();
                out.push(((a, b), GridFunction::new(self.lattice.clone(), values)?));
            }
        }
        Ok(out)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolveOptions {
    /// Relative residual target.
    pub tolerance: f64,
    /// Defaults to `ITERATION_FACTOR × N`.
    pub max_iterations: Option<usize>,
    /// Starting vector; zeros when absent.
    pub initial: Option<Vec<f64>>,
}

impl Default for SolveOptions {
    fn default() -> Self {
        SolveOptions {
            tolerance: SOLVER_TOLERANCE,
            max_iterations: None,
            initial: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolveReport {
    pub iterations: usize,
    /// Final relative residual of the stiffness system.
    pub residual: f64,
}

/// Solves `Δφ = rhs` with default options; φ has zero weighted mean.
pub fn solve_poisson(op: &LaplaceBeltrami, rhs: &GridFunction) -> Result<(GridFunction, SolveReport)> {
    solve_poisson_with(op, rhs, &SolveOptions::default())
}

/// Jacobi-preconditioned conjugate gradients on `-W Δ φ = -W rhs`.
pub fn solve_poisson_with(
    op: &LaplaceBeltrami,
    rhs: &GridFunction,
    opts: &SolveOptions,
) -> Result<(GridFunction, SolveReport)> {
    op.check_lattice(rhs.lattice())?;
    let len = op.lattice.len();
    let f = rhs.values();
    let mean = op.weighted_mean(f);
    let tol = COMPATIBILITY_TOLERANCE * rhs.max_abs().max(1.0);
    if mean.abs() > tol {
        return Err(Error::Compatibility { mean, tol });
    }
    let b: Vec<f64> = f.iter().zip(&op.weight).map(|(v, w)| -w * (v - mean)).collect();
    let mut x = match &opts.initial {
        Some(x0) if x0.len() != len => {
            return Err(Error::DimensionMismatch {
                what: "initial guess",
                expected: len,
                found: x0.len(),
            })
        }
        Some(x0) => x0.clone(),
        None => vec![0.0; len],
    };
    let b_norm = norm(&b);
    if b_norm == 0.0 {
        return Ok((
            GridFunction::gauge_fixed(op.lattice.clone(), vec![0.0; len]),
            SolveReport {
                iterations: 0,
                residual: 0.0,
            },
        ));
    }
    let inv_diag: Vec<f64> = op
        .diagonal()
        .iter()
        .map(|d| if *d > 0.0 { 1.0 / d } else { 1.0 })
        .collect();
    let max_iter = opts.max_iterations.unwrap_or(ITERATION_FACTOR * len);

    let mut ax = vec![0.0; len];
    op.stiffness(&x, &mut ax);
    let mut r: Vec<f64> = b.iter().zip(&ax).map(|(b, a)| b - a).collect();
    let mut z: Vec<f64> = r.iter().zip(&inv_diag).map(|(r, d)| r * d).collect();
    let mut p = z.clone();
    let mut rz = dot(&r, &z);
    let mut residual = norm(&r) / b_norm;
    let mut iterations = 0;
    while residual >= opts.tolerance {
        if iterations >= max_iter {
            return Err(Error::NotConverged { iterations, residual });
        }
        op.stiffness(&p, &mut ax);
        let pap = dot(&p, &ax);
        if pap <= 0.0 {
            return Err(Error::NotConverged { iterations, residual });
        }
        let alpha = rz / pap;
        for i in 0..len {
            x[i] += alpha * p[i];
            r[i] -= alpha * ax[i];
        }
        for i in 0..len {
            z[i] = r[i] * inv_diag[i];
        }
        let rz_next = dot(&r, &z);
        let beta = rz_next / rz;
        rz = rz_next;
        for i in 0..len {
            p[i] = z[i] + beta * p[i];
        }
        iterations += 1;
        residual = norm(&r) / b_norm;
    }
    let shift = op.weighted_mean(&x);
    x.iter_mut().for_each(|v| *v -= shift);
    Ok((
        GridFunction::gauge_fixed(op.lattice.clone(), x),
        SolveReport { iterations, residual },
    ))
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// Field to decompose.
#[derive(Debug, Clone, Copy)]
pub enum FieldSource<'a> {
    /// Sampled exactly at faces and nodes.
    Symbolic(&'a VectorField),
    /// Node values; faces take neighbor averages.
    Nodes(&'a GridVectorField),
    Faces(&'a StaggeredField),
}

/// `X = Y + Z` with `Z = grad φ` and `div Y ≈ 0`.
#[derive(Debug, Clone)]
pub struct Decomposition {
    pub y: GridVectorField,
    pub z: GridVectorField,
    pub phi: GridFunction,
    pub y_faces: StaggeredField,
    pub z_faces: StaggeredField,
    /// Max |div Y| on the face discretization.
    pub max_div_y: f64,
    /// Max |curl Z| by node differences.
    pub max_curl_z: f64,
    pub solve: SolveReport,
}

/// Decomposes a symbolic contravariant field on `lattice`.
pub fn helmholtz_decompose(m: &MetricField, lattice: Arc<Lattice>, x: &VectorField) -> Result<Decomposition> {
    let op = assemble_laplace_beltrami(m, lattice)?;
    decompose_with(&op, FieldSource::Symbolic(x), &SolveOptions::default())
}

pub fn decompose_with(op: &LaplaceBeltrami, x: FieldSource<'_>, opts: &SolveOptions) -> Result<Decomposition> {
    let lat = op.lattice.clone();
    let (x_faces, x_nodes) = match x {
        FieldSource::Symbolic(v) => {
            if v.variance() != Variance::Contravariant {
                return Err(Error::Variance("decomposition needs a contravariant field".into()));
            }
            (StaggeredField::sample(lat.clone(), v)?, GridVectorField::sample(lat.clone(), v)?)
        }
        FieldSource::Nodes(v) => {
            op.check_lattice(v.lattice())?;
            (StaggeredField::from_nodes(v)?, v.clone())
        }
        FieldSource::Faces(v) => {
            op.check_lattice(v.lattice())?;
            (v.clone(), v.to_nodes())
        }
    };
    let rhs = op.divergence(&x_faces)?;
    let (phi, solve) = solve_poisson_with(op, &rhs, opts)?;
    let z_faces = op.gradient(&phi)?;
    let y_faces = x_faces.sub(&z_faces);
    let z = z_faces.to_nodes();
    let y_components = x_nodes
        .components()
        .iter()
        .zip(z.components())
        .map(|(x, z)| x.iter().zip(z).map(|(a, b)| a - b).collect())
        .collect();
    let y = GridVectorField::new(lat, y_components, Variance::Contravariant)?;
    let max_div_y = op.divergence(&y_faces)?.max_abs();
    let max_curl_z = op
        .node_curl(&z)?
        .iter()
        .map(|(_, c)| c.max_abs())
        .fold(0.0, f64::max);
    Ok(Decomposition {
        y,
        z,
        phi,
        y_faces,
        z_faces,
        max_div_y,
        max_curl_z,
        solve,
    })
}

/// Symbolic `div grad f`, for comparisons against the discrete operator.
pub fn symbolic_laplacian(m: &MetricField, f: &Expr) -> Result<Expr> {
    div(m, &crate::calculus::grad(m, f)?)
}

/// Net outward `√|g|`-weighted flux of `x` through fixed-axis boundary faces.
pub fn boundary_flux(op: &LaplaceBeltrami, x: &StaggeredField) -> f64 {
    let lat = &op.lattice;
    let mut total = 0.0;
    for a in (0..lat.dim()).filter(|&a| lat.mode(a) == BoundaryMode::Fixed) {
        let last = lat.shape()[a];
        for (f, (&fx, &v)) in op.face_flux[a].iter().zip(x.faces(a)).enumerate() {
            let slot = lat.face_multi_index(a, f)[a];
            if slot == 0 {
                total -= fx * v;
            } else if slot == last {
                total += fx * v;
            }
        }
    }
    total
}
