//! Differential k-forms on a chart.
//!
//! A [`KForm`] stores one expression per strictly increasing multi-index
//! `i₁ < … < i_k` (lexicographic order), so a k-form on an n-dimensional
//! chart has C(n, k) components. Components on other orderings are recovered
//! with the permutation sign.
//!
//! The Hodge star is fixed by `β ∧ ∗γ = (β, γ) dV` with `dV = √|g| dx¹∧…∧dxⁿ`
//! and the pointwise inner product induced by `g^{ij}` on the dual basis.
//! The codifferential on k-forms is `δ = (−1)^{n(k+1)+1} ∗d∗`.

use std::sync::Arc;

use rayon::prelude::*;

use crate::calculus::{flat, sharp, Symmetry, TensorField2, Variance, VectorField};
use crate::error::{Error, Result};
use crate::expr::Expr;
use crate::manifold::{cartesian, symbolic_subdet, Chart, MetricField};
use crate::multi_index::{binomial, combinations, complement, rank, sort_with_sign};
use crate::quadrature::{axis_nodes, axis_weights};

#[derive(Debug, Clone)]
pub struct KForm {
    chart: Arc<Chart>,
    degree: usize,
    components: Vec<Expr>,
}

impl KForm {
    pub fn new(chart: Arc<Chart>, degree: usize, components: Vec<Expr>) -> Result<KForm> {
        let n = chart.dim();
        if degree > n {
            return Err(Error::Degree(format!("{degree}-form on a {n}-dimensional chart")));
        }
        let expected = binomial(n, degree);
        if components.len() != expected {
            return Err(Error::DimensionMismatch {
                what: "k-form components",
                expected,
                found: components.len(),
            });
        }
        for c in &components {
            chart.check_expr(c)?;
        }
        Ok(KForm {
            chart,
            degree,
            components,
        })
    }

    pub fn zero(chart: Arc<Chart>, degree: usize) -> Result<KForm> {
        let count = binomial(chart.dim(), degree);
        KForm::new(chart, degree, vec![Expr::zero(); count])
    }

    pub fn scalar(chart: Arc<Chart>, f: Expr) -> Result<KForm> {
        KForm::new(chart, 0, vec![f])
    }

    /// `dx^{i₁} ∧ … ∧ dx^{i_k}` for an increasing or unordered index list.
    pub fn basis(chart: Arc<Chart>, idx: &[usize]) -> Result<KForm> {
        KForm::zero(chart, idx.len())?.with_component(idx, Expr::one())
    }

    /// The 1-form `X_i dx^i` of a covariant field.
    pub fn from_covector(w: &VectorField) -> Result<KForm> {
        if w.variance() != Variance::Covariant {
            return Err(Error::Variance("1-forms are built from covariant components".into()));
        }
        KForm::new(w.chart().clone(), 1, w.components().to_vec())
    }

    /// Covariant components of a 1-form.
    pub fn to_covector(&self) -> Result<VectorField> {
        if self.degree != 1 {
            return Err(Error::Degree(format!("expected a 1-form, got degree {}", self.degree)));
        }
        VectorField::covariant(self.chart.clone(), self.components.clone())
    }

    pub fn with_component(mut self, idx: &[usize], value: Expr) -> Result<KForm> {
        if idx.len() != self.degree {
            return Err(Error::Degree(format!(
                "index of length {} on a {}-form",
                idx.len(),
                self.degree
            )));
        }
        let (sorted, sign) = sort_with_sign(idx)
            .ok_or_else(|| Error::Degree("repeated index in a k-form component".into()))?;
        if sorted.iter().any(|&i| i >= self.chart.dim()) {
            return Err(Error::Degree("index out of range".into()));
        }
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

    /// Component on an arbitrary multi-index (signed; zero on repeats).
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

    pub fn scale(&self, f: &Expr) -> KForm {
        KForm {
            chart: self.chart.clone(),
            degree: self.degree,
            components: self.components.iter().map(|c| f * c).collect(),
        }
    }

    pub fn add(&self, other: &KForm) -> Result<KForm> {
        same_chart(&self.chart, &other.chart)?;
        if self.degree != other.degree {
            return Err(Error::Degree(format!(
                "cannot add a {}-form and a {}-form",
                self.degree, other.degree
            )));
        }
        Ok(KForm {
            chart: self.chart.clone(),
            degree: self.degree,
            components: self
                .components
                .iter()
                .zip(&other.components)
                .map(|(a, b)| a + b)
                .collect(),
        })
    }
}

fn same_chart(a: &Chart, b: &Chart) -> Result<()> {
    if a != b {
        return Err(Error::ChartMismatch(a.name().into(), b.name().into()));
    }
    Ok(())
}

pub fn wedge(a: &KForm, b: &KForm) -> Result<KForm> {
    same_chart(&a.chart, &b.chart)?;
    let n = a.chart.dim();
    let (j, k) = (a.degree, b.degree);
    if j + k > n {
        return Err(Error::Degree(format!(
            "wedge of degrees {j} and {k} exceeds dimension {n}"
        )));
    }
    let mut terms: Vec<Vec<Expr>> = vec![Vec::new(); binomial(n, j + k)];
    let ia = combinations(n, j);
    let ib = combinations(n, k);
    for (ra, i) in ia.iter().enumerate() {
        if a.components[ra].is_zero() {
            continue;
        }
        for (rb, l) in ib.iter().enumerate() {
            if b.components[rb].is_zero() {
                continue;
            }
            let mut joined = i.clone();
            joined.extend_from_slice(l);
            if let Some((sorted, sign)) = sort_with_sign(&joined) {
                let t = &a.components[ra] * &b.components[rb];
                terms[rank(n, &sorted)].push(if sign > 0.0 { t } else { -t });
            }
        }
    }
    KForm::new(a.chart.clone(), j + k, terms.into_iter().map(Expr::sum).collect())
}

/// Exterior derivative `dω = Σ_I Σ_j ∂_j ω_I dx^j ∧ dx^I`.
pub fn ext_d(w: &KForm) -> Result<KForm> {
    let n = w.chart.dim();
    let k = w.degree;
    if k >= n {
        return Err(Error::Degree(format!(
            "exterior derivative of a {k}-form on a {n}-dimensional chart"
        )));
    }
    let coords = w.chart.coords();
    let out = combinations(n, k + 1)
        .into_iter()
        .map(|target| {
            // (dω)_J = Σ_a (−1)^a ∂_{j_a} ω_{J \ j_a}
            Expr::sum(target.iter().enumerate().map(|(a, &ja)| {
                let rest: Vec<usize> = target.iter().copied().filter(|&x| x != ja).collect();
                let t = w.components[rank(n, &rest)].diff(&coords[ja]);
                if a % 2 == 0 {
                    t
                } else {
                    -t
                }
            }))
        })
        .collect();
    KForm::new(w.chart.clone(), k + 1, out)
}

/// Raised components `ω^I = Σ_A det(g^{-1}[I, A]) ω_A` on increasing multi-indices.
fn raise(m: &MetricField, w: &KForm) -> Vec<Expr> {
    let n = m.dim();
    let idx = combinations(n, w.degree);
    if w.degree == 0 {
        return w.components.clone();
    }
    idx.iter()
        .map(|i| {
            Expr::sum(idx.iter().enumerate().filter_map(|(ra, a)| {
                let wa = &w.components[ra];
                if wa.is_zero() {
                    return None;
                }
                let minor = symbolic_subdet(m.inverse_entries(), i, a);
                Some(minor * wa)
            }))
        })
        .collect()
}

pub fn hodge_star(m: &MetricField, w: &KForm) -> Result<KForm> {
    same_chart(m.chart(), &w.chart)?;
    let n = m.dim();
    let raised = raise(m, w);
    let rho = m.sqrt_det();
    let out = combinations(n, n - w.degree)
        .into_iter()
        .map(|j| {
            let i = complement(n, &j);
            let mut joined = i.clone();
            joined.extend_from_slice(&j);
            let (_, sign) = sort_with_sign(&joined).expect("complementary indices");
            let t = rho * &raised[rank(n, &i)];
            if sign > 0.0 {
                t
            } else {
                -t
            }
        })
        .collect();
    KForm::new(m.chart().clone(), n - w.degree, out)
}

/// `(α, β)`: the inner product induced by `g^{ij}` on k-covectors.
pub fn pointwise_inner(m: &MetricField, a: &KForm, b: &KForm) -> Result<Expr> {
    same_chart(m.chart(), &a.chart)?;
    same_chart(m.chart(), &b.chart)?;
    if a.degree != b.degree {
        return Err(Error::Degree(format!(
            "inner product of a {}-form and a {}-form",
            a.degree, b.degree
        )));
    }
    let raised = raise(m, b);
    Ok(Expr::sum(
        a.components.iter().zip(&raised).map(|(x, y)| x * y),
    ))
}

/// `⟨α, β⟩ = ∫ (α, β) √|g| dx` by tensor-product quadrature with
/// `resolution[i]` points on axis i.
pub fn l2_inner(m: &MetricField, a: &KForm, b: &KForm, resolution: &[usize]) -> Result<f64> {
    let integrand = pointwise_inner(m, a, b)? * m.sqrt_det();
    integrate(m.chart(), &integrand, resolution)
}

/// Tensor-product quadrature of `f` over the chart box.
pub fn integrate(chart: &Chart, f: &Expr, resolution: &[usize]) -> Result<f64> {
    let n = chart.dim();
    if resolution.len() != n {
        return Err(Error::DimensionMismatch {
            what: "resolution entries",
            expected: n,
            found: resolution.len(),
        });
    }
    let mut nodes = Vec::with_capacity(n);
    let mut weights = Vec::with_capacity(n);
    for ((&(lo, hi), &mode), &count) in chart.domain().iter().zip(chart.boundary()).zip(resolution) {
        weights.push(axis_weights(lo, hi, mode, count)?);
        nodes.push(axis_nodes(lo, hi, mode, count));
    }
    let points = cartesian(&nodes);
    let idx: Vec<Vec<f64>> = cartesian(
        &weights
            .iter()
            .map(|w| (0..w.len()).map(|i| i as f64).collect())
            .collect::<Vec<_>>(),
    );
    let values: Vec<f64> = points
        .par_iter()
        .map(|x| -> Result<f64> { Ok(f.eval(&chart.point(x)?)?) })
        .collect::<Result<_>>()?;
    // fixed summation order
    let mut acc = 0.0;
    for (v, id) in values.iter().zip(&idx) {
        let w: f64 = id
            .iter()
            .enumerate()
            .map(|(axis, &i)| weights[axis][i as usize])
            .product();
        acc += w * v;
    }
    Ok(acc)
}

/// `δ = (−1)^{n(k+1)+1} ∗d∗`, lowering degree by one.
pub fn codifferential(m: &MetricField, w: &KForm) -> Result<KForm> {
    let k = w.degree;
    if k == 0 {
        return Err(Error::Degree("codifferential of a 0-form".into()));
    }
    let n = m.dim();
    let inner = hodge_star(m, &ext_d(&hodge_star(m, w)?)?)?;
    if (n * (k + 1) + 1) % 2 == 0 {
        Ok(inner)
    } else {
        Ok(inner.scale(&Expr::constant(-1.0)))
    }
}

/// Interior product `(ι_X ω)_J = X^i ω_{iJ}`.
pub fn interior(x: &VectorField, w: &KForm) -> Result<KForm> {
    if x.variance() != Variance::Contravariant {
        return Err(Error::Variance("interior product needs a contravariant field".into()));
    }
    if w.degree == 0 {
        return Err(Error::Degree("interior product of a 0-form".into()));
    }
    let n = w.chart.dim();
    let out = combinations(n, w.degree - 1)
        .into_iter()
        .map(|j| {
            Expr::sum((0..n).filter(|i| !j.contains(i)).map(|i| {
                let mut idx = vec![i];
                idx.extend_from_slice(&j);
                x.component(i) * w.get(&idx)
            }))
        })
        .collect();
    KForm::new(w.chart.clone(), w.degree - 1, out)
}

/// `√|g| dx¹ ∧ … ∧ dxⁿ`.
pub fn volume_form(m: &MetricField) -> KForm {
    KForm::new(m.chart().clone(), m.dim(), vec![m.sqrt_det().clone()]).expect("top form")
}

/// Curl expressed through forms: `d(X♭)` as an antisymmetric tensor, and for
/// three-dimensional charts the vector field `(∗d X♭)♯`.
#[derive(Debug, Clone)]
pub struct FormCurl {
    /// `A_ij = (dX♭)_ji`, matching the coordinate curl `∂_j X_i − ∂_i X_j`.
    pub tensor: TensorField2,
    pub two_form: KForm,
    pub vector: Option<VectorField>,
}

pub fn curl_via_forms(m: &MetricField, x: &VectorField) -> Result<FormCurl> {
    let low = match x.variance() {
        Variance::Contravariant => flat(m, x)?,
        Variance::Covariant => x.clone(),
    };
    let n = m.dim();
    let dw = ext_d(&KForm::from_covector(&low)?)?;
    let mut a = vec![vec![Expr::zero(); n]; n];
    for i in 0..n {
        for j in 0..n {
            if i != j {
                a[i][j] = dw.get(&[j, i]);
            }
        }
    }
    let tensor = TensorField2::new(m.chart().clone(), a, Symmetry::Antisymmetric, Variance::Covariant)?;
    let vector = if n == 3 {
        Some(sharp(m, &hodge_star(m, &dw)?.to_covector()?)?)
    } else {
        None
    };
    Ok(FormCurl {
        tensor,
        two_form: dw,
        vector,
    })
}
