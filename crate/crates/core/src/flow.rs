//! Integral curves `dc^k/dt = X^k(c(t))` by the classical fourth-order
//! Runge–Kutta scheme with a fixed step.

use crate::calculus::{Variance, VectorField};
use crate::error::{Error, Result};
use crate::expr::{EvalPoint, ExprError};

#[derive(Debug, Clone, PartialEq)]
pub struct FlowPath {
    pub field: String,
    pub step: f64,
    /// `(t, point)` with `t = i·step`.
    pub samples: Vec<(f64, Vec<f64>)>,
    /// The path left the domain through a fixed axis and was truncated.
    pub exited: bool,
}

impl FlowPath {
    pub fn with_name(mut self, name: impl Into<String>) -> FlowPath {
        self.field = name.into();
        self
    }

    pub fn end(&self) -> &[f64] {
        &self.samples.last().expect("at least the start point").1
    }
}

fn eval_field(x: &VectorField, y: &[f64], t: f64) -> Result<Vec<f64>> {
    let p = x.chart().point(y)?;
    x.components()
        .iter()
        .map(|c| {
            c.eval(&p)
                .map_err(|source| Error::FlowEvaluation { t, source })
        })
        .collect()
}

fn start_values(x: &VectorField, x0: &EvalPoint) -> Result<Vec<f64>> {
    x.chart()
        .coords()
        .iter()
        .map(|c| {
            x0.get(c)
                .ok_or_else(|| Error::Expr(ExprError::UnboundVariable(c.clone())))
        })
        .collect()
}

/// Integrates the flow of `x` from `x0` over `[0, t_end]` in `steps` equal steps.
pub fn integrate_flow(x: &VectorField, x0: &EvalPoint, t_end: f64, steps: usize) -> Result<FlowPath> {
    if x.variance() != Variance::Contravariant {
        return Err(Error::Variance("flows are generated by contravariant fields".into()));
    }
    if steps == 0 {
        return Err(Error::Resolution("flow integration needs at least one step".into()));
    }
    let chart = x.chart();
    let mut y = start_values(x, x0)?;
    if !chart.contains(&y) {
        return Err(Error::InvalidChart(format!("start point {x0} lies outside the chart domain")));
    }
    chart.wrap(&mut y);
    let n = y.len();
    let h = t_end / steps as f64;
    let mut samples = Vec::with_capacity(steps + 1);
    samples.push((0.0, y.clone()));
    let mut exited = false;
    let shifted = |y: &[f64], k: &[f64], s: f64| -> Vec<f64> {
        y.iter().zip(k).map(|(a, b)| a + s * b).collect()
    };
    for i in 0..steps {
        let t = i as f64 * h;
        let k1 = eval_field(x, &y, t)?;
        let k2 = eval_field(x, &shifted(&y, &k1, 0.5 * h), t + 0.5 * h)?;
        let k3 = eval_field(x, &shifted(&y, &k2, 0.5 * h), t + 0.5 * h)?;
        let k4 = eval_field(x, &shifted(&y, &k3, h), t + h)?;
        let mut next: Vec<f64> = (0..n)
            .map(|j| y[j] + h / 6.0 * (k1[j] + 2.0 * k2[j] + 2.0 * k3[j] + k4[j]))
            .collect();
        if !chart.contains(&next) {
            exited = true;
            break;
        }
        chart.wrap(&mut next);
        y = next;
        samples.push(((i + 1) as f64 * h, y.clone()));
    }
    Ok(FlowPath {
        field: String::new(),
        step: h,
        samples,
        exited,
    })
}
