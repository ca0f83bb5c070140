//! Differential operators on vector and tensor fields in a chart.
//!
//! Every operator returns symbolic expressions, so identities between
//! operators can be checked by pointwise evaluation without stacking
//! finite-difference error.
//!
//! Conventions:
//! - `Γ^k_ij = ½ g^km (∂_i g_jm + ∂_j g_im − ∂_m g_ij)`
//! - `div X = (1/√|g|) ∂_j(√|g| X^j)`
//! - `curl X` is the covariant antisymmetric tensor `A_ij = ∂_j X_i − ∂_i X_j`
//!   of the lowered field; a contravariant input is lowered with [`flat`] first.
//! - `∇_X Y = X^i (∂_i Y^k + Γ^k_ij Y^j) ∂_k`

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::expr::{EvalPoint, Expr};
use crate::manifold::{Chart, MetricField};
use crate::multi_index::{combinations, rank, sort_with_sign};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Variance {
    Contravariant,
    Covariant,
}

/// A vector field (`X^i`) or a 1-form's components (`X_i`) on a chart.
#[derive(Debug, Clone)]
pub struct VectorField {
    chart: Arc<Chart>,
    components: Vec<Expr>,
    variance: Variance,
}

impl VectorField {
    pub fn new(chart: Arc<Chart>, components: Vec<Expr>, variance: Variance) -> Result<VectorField> {
        if components.len() != chart.dim() {
            return Err(Error::DimensionMismatch {
                what: "vector field components",
                expected: chart.dim(),
                found: components.len(),
            });
        }
        for c in &components {
            chart.check_expr(c)?;
        }
        Ok(VectorField {
            chart,
            components,
            variance,
        })
    }

    pub fn contravariant(chart: Arc<Chart>, components: Vec<Expr>) -> Result<VectorField> {
        VectorField::new(chart, components, Variance::Contravariant)
    }

    pub fn covariant(chart: Arc<Chart>, components: Vec<Expr>) -> Result<VectorField> {
        VectorField::new(chart, components, Variance::Covariant)
    }

    /// The coordinate field `∂/∂x_i`.
    pub fn coordinate(chart: Arc<Chart>, i: usize) -> VectorField {
        let n = chart.dim();
        let comps = (0..n)
            .map(|j| Expr::constant(if i == j { 1.0 } else { 0.0 }))
            .collect();
        VectorField {
            chart,
            components: comps,
            variance: Variance::Contravariant,
        }
    }

    pub fn chart(&self) -> &Arc<Chart> {
        &self.chart
    }

    pub fn dim(&self) -> usize {
        self.components.len()
    }

    pub fn components(&self) -> &[Expr] {
        &self.components
    }

    pub fn component(&self, i: usize) -> &Expr {
        &self.components[i]
    }

    pub fn variance(&self) -> Variance {
        self.variance
    }

    pub fn eval(&self, p: &EvalPoint) -> Result<Vec<f64>> {
        Ok(self
            .components
            .iter()
            .map(|c| c.eval(p))
            .collect::<Result<_, _>>()?)
    }

    /// Componentwise `f · X`.
    pub fn scale(&self, f: &Expr) -> VectorField {
        VectorField {
            chart: self.chart.clone(),
            components: self.components.iter().map(|c| f * c).collect(),
            variance: self.variance,
        }
    }

    fn require(&self, variance: Variance, op: &str) -> Result<()> {
        if self.variance != variance {
            return Err(Error::Variance(format!(
                "{op} expects a {variance:?} field, got {:?}",
                self.variance
            )));
        }
        Ok(())
    }
}

/// Directional derivative `U f = Σ U^i ∂f/∂x_i`.
pub fn directional(u: &VectorField, f: &Expr) -> Expr {
    Expr::sum(
        u.components
            .iter()
            .zip(u.chart.coords())
            .map(|(ui, x)| ui * f.diff(x)),
    )
}

fn same_chart(a: &Chart, b: &Chart) -> Result<()> {
    if a != b {
        return Err(Error::ChartMismatch(a.name().into(), b.name().into()));
    }
    Ok(())
}

/// Christoffel symbols evaluated at a point.
#[derive(Debug, Clone)]
pub struct Christoffel {
    pub point: EvalPoint,
    n: usize,
    values: Vec<f64>,
}

impl Christoffel {
    /// Γ^k_ij
    pub fn get(&self, k: usize, i: usize, j: usize) -> f64 {
        self.values[(k * self.n + i) * self.n + j]
    }

    pub fn dim(&self) -> usize {
        self.n
    }
}

pub fn christoffel(m: &MetricField, p: &EvalPoint) -> Result<Christoffel> {
    let n = m.dim();
    let data = m.metric_data(p)?;
    let mut dg = vec![0.0; n * n * n];
    for k in 0..n {
        for i in 0..n {
            for j in 0..n {
                dg[(k * n + i) * n + j] = m.dg(k, i, j).eval(p)?;
            }
        }
    }
    let d = |k: usize, i: usize, j: usize| dg[(k * n + i) * n + j];
    let mut values = vec![0.0; n * n * n];
    for k in 0..n {
        for i in 0..n {
            for j in 0..n {
                let mut acc = 0.0;
                for l in 0..n {
                    acc += data.g_inv[(k, l)] * (d(i, j, l) + d(j, i, l) - d(l, i, j));
                }
                values[(k * n + i) * n + j] = 0.5 * acc;
            }
        }
    }
    Ok(Christoffel {
        point: p.clone(),
        n,
        values,
    })
}

/// Symbolic Christoffel symbols, indexed `[k][i][j]`.
pub fn christoffel_exprs(m: &MetricField) -> Vec<Vec<Vec<Expr>>> {
    let n = m.dim();
    (0..n)
        .map(|k| {
            (0..n)
                .map(|i| {
                    (0..n)
                        .map(|j| {
                            let terms = (0..n).map(|l| {
                                let bracket = m.dg(i, j, l) + m.dg(j, i, l) - m.dg(l, i, j);
                                m.inv(k, l) * bracket
                            });
                            0.5 * Expr::sum(terms)
                        })
                        .collect()
                })
                .collect()
        })
        .collect()
}

/// `grad f` with components `g^ij ∂f/∂x_j`.
pub fn grad(m: &MetricField, f: &Expr) -> Result<VectorField> {
    m.chart().check_expr(f)?;
    let n = m.dim();
    let df: Vec<Expr> = m.chart().coords().iter().map(|x| f.diff(x)).collect();
    let comps = (0..n)
        .map(|i| Expr::sum((0..n).map(|j| m.inv(i, j) * &df[j])))
        .collect();
    VectorField::contravariant(m.chart().clone(), comps)
}

/// Divergence in density form, `(1/√|g|) ∂_j(√|g| X^j)`.
pub fn div(m: &MetricField, x: &VectorField) -> Result<Expr> {
    x.require(Variance::Contravariant, "div")?;
    same_chart(m.chart(), x.chart())?;
    let rho = m.sqrt_det();
    let flux = Expr::sum(
        m.chart()
            .coords()
            .iter()
            .zip(x.components())
            .map(|(c, xj)| (rho * xj).diff(c)),
    );
    Ok(flux / rho)
}

/// Divergence in Christoffel form, `∂_i X^i + Γ^i_ij X^j`.
pub fn div_christoffel(m: &MetricField, x: &VectorField) -> Result<Expr> {
    x.require(Variance::Contravariant, "div")?;
    same_chart(m.chart(), x.chart())?;
    let n = m.dim();
    let gamma = christoffel_exprs(m);
    let mut terms = Vec::new();
    for i in 0..n {
        terms.push(x.component(i).diff(m.chart().coord(i)));
        for j in 0..n {
            terms.push(&gamma[i][i][j] * x.component(j));
        }
    }
    Ok(Expr::sum(terms))
}

/// Index lowering: `X_i = g_ij X^j`.
pub fn flat(m: &MetricField, x: &VectorField) -> Result<VectorField> {
    x.require(Variance::Contravariant, "flat")?;
    same_chart(m.chart(), x.chart())?;
    let n = m.dim();
    let comps = (0..n)
        .map(|i| Expr::sum((0..n).map(|j| m.g(i, j) * x.component(j))))
        .collect();
    VectorField::covariant(m.chart().clone(), comps)
}

/// Index raising: `X^i = g^ij X_j`.
pub fn sharp(m: &MetricField, w: &VectorField) -> Result<VectorField> {
    w.require(Variance::Covariant, "sharp")?;
    same_chart(m.chart(), w.chart())?;
    let n = m.dim();
    let comps = (0..n)
        .map(|i| Expr::sum((0..n).map(|j| m.inv(i, j) * w.component(j))))
        .collect();
    VectorField::contravariant(m.chart().clone(), comps)
}

fn lowered(m: &MetricField, x: &VectorField) -> Result<VectorField> {
    same_chart(m.chart(), x.chart())?;
    match x.variance() {
        Variance::Contravariant => flat(m, x),
        Variance::Covariant => Ok(x.clone()),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Symmetry {
    Antisymmetric,
    Symmetric,
    None,
}

/// A rank-2 tensor field with declared symmetry and variance.
#[derive(Debug, Clone)]
pub struct TensorField2 {
    chart: Arc<Chart>,
    components: Vec<Vec<Expr>>,
    symmetry: Symmetry,
    variance: Variance,
}

impl TensorField2 {
    pub fn new(
        chart: Arc<Chart>,
        components: Vec<Vec<Expr>>,
        symmetry: Symmetry,
        variance: Variance,
    ) -> Result<TensorField2> {
        let n = chart.dim();
        if components.len() != n || components.iter().any(|r| r.len() != n) {
            return Err(Error::DimensionMismatch {
                what: "tensor components",
                expected: n,
                found: components.len(),
            });
        }
        Ok(TensorField2 {
            chart,
            components,
            symmetry,
            variance,
        })
    }

    pub fn chart(&self) -> &Arc<Chart> {
        &self.chart
    }

    pub fn get(&self, i: usize, j: usize) -> &Expr {
        &self.components[i][j]
    }

    pub fn components(&self) -> &[Vec<Expr>] {
        &self.components
    }

    pub fn symmetry(&self) -> Symmetry {
        self.symmetry
    }

    pub fn variance(&self) -> Variance {
        self.variance
    }

    /// `T(U, V) = T_ij U^i V^j`.
    pub fn apply(&self, u: &VectorField, v: &VectorField) -> Expr {
        let n = self.components.len();
        let mut terms = Vec::with_capacity(n * n);
        for i in 0..n {
            for j in 0..n {
                terms.push(&self.components[i][j] * u.component(i) * v.component(j));
            }
        }
        Expr::sum(terms)
    }

    pub fn eval(&self, p: &EvalPoint) -> Result<Vec<Vec<f64>>> {
        self.components
            .iter()
            .map(|row| row.iter().map(|e| Ok(e.eval(p)?)).collect())
            .collect()
    }

    /// Largest violation of the declared symmetry over `points`.
    pub fn symmetry_defect(&self, points: &[EvalPoint]) -> Result<f64> {
        let sign = match self.symmetry {
            Symmetry::Antisymmetric => -1.0,
            Symmetry::Symmetric => 1.0,
            Symmetry::None => return Ok(0.0),
        };
        let mut worst: f64 = 0.0;
        for p in points {
            let t = self.eval(p)?;
            for (i, row) in t.iter().enumerate() {
                for (j, v) in row.iter().enumerate() {
                    worst = worst.max((v - sign * t[j][i]).abs());
                }
            }
        }
        Ok(worst)
    }
}

/// `A_ij = ∂X_i/∂x_j − ∂X_j/∂x_i` of the lowered field.
pub fn curl(m: &MetricField, x: &VectorField) -> Result<TensorField2> {
    let low = lowered(m, x)?;
    let n = m.dim();
    let coords = m.chart().coords();
    let mut a = vec![vec![Expr::zero(); n]; n];
    for i in 0..n {
        for j in (i + 1)..n {
            let aij = low.component(i).diff(&coords[j]) - low.component(j).diff(&coords[i]);
            a[j][i] = -aij.clone();
            a[i][j] = aij;
        }
    }
    TensorField2::new(m.chart().clone(), a, Symmetry::Antisymmetric, Variance::Covariant)
}

/// `g^ij A_ij` for `A = curl X`.
pub fn trace_curl(m: &MetricField, x: &VectorField) -> Result<Expr> {
    let a = curl(m, x)?;
    let n = m.dim();
    let mut terms = Vec::with_capacity(n * n);
    for i in 0..n {
        for j in 0..n {
            terms.push(m.inv(i, j) * a.get(i, j));
        }
    }
    Ok(Expr::sum(terms))
}

/// `[X,Y]^i = X^j ∂_j Y^i − Y^j ∂_j X^i`.
pub fn lie_bracket(x: &VectorField, y: &VectorField) -> Result<VectorField> {
    same_chart(x.chart(), y.chart())?;
    x.require(Variance::Contravariant, "lie_bracket")?;
    y.require(Variance::Contravariant, "lie_bracket")?;
    let comps = x
        .components()
        .iter()
        .zip(y.components())
        .map(|(xi, yi)| directional(x, yi) - directional(y, xi))
        .collect();
    VectorField::contravariant(x.chart().clone(), comps)
}

/// Levi-Civita covariant derivative `∇_X Y`.
pub fn cov_deriv(m: &MetricField, x: &VectorField, y: &VectorField) -> Result<VectorField> {
    same_chart(m.chart(), x.chart())?;
    same_chart(m.chart(), y.chart())?;
    x.require(Variance::Contravariant, "cov_deriv")?;
    y.require(Variance::Contravariant, "cov_deriv")?;
    let n = m.dim();
    let gamma = christoffel_exprs(m);
    let comps = (0..n)
        .map(|k| {
            let mut terms = vec![directional(x, y.component(k))];
            for i in 0..n {
                for j in 0..n {
                    if gamma[k][i][j].is_zero() {
                        continue;
                    }
                    terms.push(&gamma[k][i][j] * x.component(i) * y.component(j));
                }
            }
            Expr::sum(terms)
        })
        .collect();
    VectorField::contravariant(m.chart().clone(), comps)
}

/// `(L_X g)_ij = X^k ∂_k g_ij + g_kj ∂_i X^k + g_ik ∂_j X^k`.
pub fn lie_deriv_metric(m: &MetricField, x: &VectorField) -> Result<TensorField2> {
    same_chart(m.chart(), x.chart())?;
    x.require(Variance::Contravariant, "lie_deriv_metric")?;
    let n = m.dim();
    let coords = m.chart().coords();
    let mut out = vec![vec![Expr::zero(); n]; n];
    for i in 0..n {
        for j in i..n {
            let mut terms = vec![directional(x, m.g(i, j))];
            for k in 0..n {
                terms.push(m.g(k, j) * x.component(k).diff(&coords[i]));
                terms.push(m.g(i, k) * x.component(k).diff(&coords[j]));
            }
            let e = Expr::sum(terms);
            out[j][i] = e.clone();
            out[i][j] = e;
        }
    }
    TensorField2::new(m.chart().clone(), out, Symmetry::Symmetric, Variance::Covariant)
}

/// Symmetrized covariant derivative of the lowered field, `X_{i;j} + X_{j;i}`.
pub fn killing_form(m: &MetricField, x: &VectorField) -> Result<TensorField2> {
    let low = lowered(m, x)?;
    let n = m.dim();
    let coords = m.chart().coords();
    let gamma = christoffel_exprs(m);
    // X_{i;j} = ∂_j X_i − Γ^k_ji X_k
    let cov = |i: usize, j: usize| {
        let corr = Expr::sum((0..n).map(|k| &gamma[k][j][i] * low.component(k)));
        low.component(i).diff(&coords[j]) - corr
    };
    let mut out = vec![vec![Expr::zero(); n]; n];
    for i in 0..n {
        for j in i..n {
            let e = cov(i, j) + cov(j, i);
            out[j][i] = e.clone();
            out[i][j] = e;
        }
    }
    TensorField2::new(m.chart().clone(), out, Symmetry::Symmetric, Variance::Covariant)
}

#[derive(Debug, Clone, PartialEq)]
pub struct KillingReport {
    /// max |(L_X g)_ij| over the sampling lattice
    pub lie_residual: f64,
    /// max |div X| over the sampling lattice
    pub div_residual: f64,
    pub is_killing: bool,
    pub divergence_free: bool,
}

/// Tests `L_X g = 0` (and the implied `div X = 0`) on the chart's sampling lattice.
pub fn is_killing(m: &MetricField, x: &VectorField, tol: f64) -> Result<KillingReport> {
    let l = lie_deriv_metric(m, x)?;
    let d = div(m, x)?;
    let mut lie_residual: f64 = 0.0;
    let mut div_residual: f64 = 0.0;
    for p in m.chart().sample_points() {
        for row in l.eval(&p)? {
            for v in row {
                lie_residual = lie_residual.max(v.abs());
            }
        }
        div_residual = div_residual.max(d.eval(&p)?.abs());
    }
    Ok(KillingReport {
        lie_residual,
        div_residual,
        is_killing: lie_residual < tol,
        divergence_free: div_residual < tol,
    })
}

/// An antisymmetric contravariant p-tensor, stored on increasing multi-indices.
#[derive(Debug, Clone)]
pub struct PTensor {
    chart: Arc<Chart>,
    degree: usize,
    components: Vec<Expr>,
}

impl PTensor {
    /// `components` are listed in lexicographic order of increasing multi-indices.
    pub fn new(chart: Arc<Chart>, degree: usize, components: Vec<Expr>) -> Result<PTensor> {
        let n = chart.dim();
        if degree > n {
            return Err(Error::Degree(format!("p-tensor degree {degree} exceeds dimension {n}")));
        }
        let expected = crate::multi_index::binomial(n, degree);
        if components.len() != expected {
            return Err(Error::DimensionMismatch {
                what: "p-tensor components",
                expected,
                found: components.len(),
            });
        }
        for c in &components {
            chart.check_expr(c)?;
        }
        Ok(PTensor {
            chart,
            degree,
            components,
        })
    }

    pub fn zero(chart: Arc<Chart>, degree: usize) -> Result<PTensor> {
        let count = crate::multi_index::binomial(chart.dim(), degree);
        PTensor::new(chart, degree, vec![Expr::zero(); count])
    }

    /// Sets the component on an arbitrary (not necessarily sorted) multi-index,
    /// adjusting for the permutation sign.
    pub fn with_component(mut self, idx: &[usize], value: Expr) -> Result<PTensor> {
        if idx.len() != self.degree {
            return Err(Error::Degree(format!(
                "index of length {} for a degree-{} tensor",
                idx.len(),
                self.degree
            )));
        }
        let (sorted, sign) = sort_with_sign(idx)
            .ok_or_else(|| Error::Degree("repeated index in antisymmetric tensor".into()))?;
        let r = rank(self.chart.dim(), &sorted);
        self.components[r] = if sign > 0.0 { value } else { -value };
        Ok(self)
    }

    pub fn chart(&self) -> &Arc<Chart> {
        &self.chart
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn components(&self) -> &[Expr] {
        &self.components
    }

    /// Component on any multi-index, zero if an index repeats.
    pub fn get(&self, idx: &[usize]) -> Expr {
        match sort_with_sign(idx) {
            None => Expr::zero(),
            Some((sorted, sign)) => {
                let c = &self.components[rank(self.chart.dim(), &sorted)];
                if sign > 0.0 {
                    c.clone()
                } else {
                    -c
                }
            }
        }
    }
}

/// `(∂ω)^{i₂…i_p} = (1/√|g|) ∂_j(√|g| ω^{j i₂…i_p})`. Degree 0 maps to zero.
pub fn ptensor_div(m: &MetricField, w: &PTensor) -> Result<PTensor> {
    same_chart(m.chart(), w.chart())?;
    if w.degree() == 0 {
        return PTensor::zero(m.chart().clone(), 0);
    }
    let n = m.dim();
    let rho = m.sqrt_det();
    let coords = m.chart().coords();
    let comps = combinations(n, w.degree() - 1)
        .into_iter()
        .map(|rest| {
            let terms = (0..n).filter(|j| !rest.contains(j)).map(|j| {
                let mut idx = Vec::with_capacity(rest.len() + 1);
                idx.push(j);
                idx.extend_from_slice(&rest);
                (rho * w.get(&idx)).diff(&coords[j])
            });
            Expr::sum(terms) / rho
        })
        .collect();
    PTensor::new(m.chart().clone(), w.degree() - 1, comps)
}
