//! INI manifests describing a chart, its metric and named objects.
//!
//! ```ini
//! [chart]
//! name = S2
//! dim = 2
//! coords = theta, phi
//! domain = -1.5, 1.5; 0, 2*pi
//! boundary = fixed, periodic
//!
//! [metric]
//! g_2_2 = cos(theta)^2
//!
//! [field X]
//! variance = contra
//! v_1 = 1
//! v_2 = cos(theta)^2
//!
//! [scalar f]
//! f = sin(theta)
//!
//! [form w]
//! degree = 1
//! w_2 = cos(theta)
//!
//! [surface cap]
//! params = u, v
//! domain = 0, pi/2; 0, 2*pi
//! e_1 = sin(u)*cos(v)
//! e_2 = sin(u)*sin(v)
//! e_3 = cos(u)
//! orientation = positive
//!
//! [curve helix]
//! param = t
//! domain = 0, pi
//! e_1 = cos(t)
//! e_2 = sin(t)
//! e_3 = t
//! ```
//!
//! Unset metric entries default to the identity. `pi` may be used in any
//! expression unless it names a coordinate or parameter. Comments go on
//! their own lines.

use std::collections::{BTreeMap, BTreeSet};
use std::f64::consts::PI;
use std::path::Path;
use std::sync::Arc;

use ini::{Ini, Properties};

use crate::calculus::{Variance, VectorField};
use crate::error::{Error, Result};
use crate::expr::{parse, EvalPoint, Expr};
use crate::forms::KForm;
use crate::manifold::{BoundaryMode, Chart, MetricField};
use crate::multi_index::combinations;
use crate::stokes::{Orientation, ParamCurve, ParamSurface};

#[derive(Debug, Clone)]
pub struct Manifest {
    pub chart: Arc<Chart>,
    pub metric: MetricField,
    pub fields: BTreeMap<String, VectorField>,
    pub scalars: BTreeMap<String, Expr>,
    pub forms: BTreeMap<String, KForm>,
    pub surfaces: BTreeMap<String, ParamSurface>,
    pub curves: BTreeMap<String, ParamCurve>,
}

fn bad(msg: impl Into<String>) -> Error {
    Error::Manifest(msg.into())
}

/// Parses an expression, binding `pi` unless it is one of `names`.
fn expression(text: &str, names: &[&str], ctx: &str) -> Result<Expr> {
    let e = parse(text).map_err(|err| bad(format!("{ctx}: {err}")))?;
    if names.contains(&"pi") {
        return Ok(e);
    }
    Ok(e.substitute(&|v| (v == "pi").then(|| Expr::constant(PI))))
}

/// A constant expression such as `2*pi`.
pub fn constant(text: &str) -> Result<f64> {
    let e = expression(text, &[], "constant")?;
    e.eval(&EvalPoint::new(Vec::<(&str, f64)>::new())?)
        .map_err(|err| bad(format!("`{}` is not a constant: {err}", text.trim())))
}

/// Comma-separated constants, e.g. a point `0.5, pi/3`.
pub fn point(text: &str) -> Result<Vec<f64>> {
    text.split(',').map(constant).collect()
}

fn list(text: &str) -> Vec<String> {
    text.split(',').map(|s| s.trim().to_string()).filter(|s| !s.is_empty()).collect()
}

fn intervals(text: &str, count: usize, ctx: &str) -> Result<Vec<(f64, f64)>> {
    let parts: Vec<&str> = text.split(';').collect();
    if parts.len() != count {
        return Err(bad(format!("{ctx}: expected {count} `lo, hi` intervals separated by `;`, found {}", parts.len())));
    }
    parts
        .iter()
        .map(|p| match point(p)?.as_slice() {
            &[lo, hi] => Ok((lo, hi)),
            _ => Err(bad(format!("{ctx}: interval `{}` is not `lo, hi`", p.trim()))),
        })
        .collect()
}

struct Section<'a> {
    name: String,
    props: &'a Properties,
    used: BTreeSet<String>,
}

impl<'a> Section<'a> {
    fn new(name: &str, props: &'a Properties) -> Section<'a> {
        Section {
            name: name.to_string(),
            props,
            used: BTreeSet::new(),
        }
    }

    fn get(&mut self, key: &str) -> Option<&'a str> {
        let v = self.props.get(key)?;
        self.used.insert(key.to_string());
        Some(v)
    }

    fn require(&mut self, key: &str) -> Result<&'a str> {
        self.get(key)
            .ok_or_else(|| bad(format!("[{}] is missing `{key}`", self.name)))
    }

    fn finish(self) -> Result<()> {
        for (k, _) in self.props.iter() {
            if !self.used.contains(k) {
                return Err(bad(format!("[{}] has unknown key `{k}`", self.name)));
            }
        }
        Ok(())
    }
}

fn named<'a>(section: &'a str, kind: &str) -> Option<&'a str> {
    let rest = section.strip_prefix(kind)?;
    let name = rest.strip_prefix(' ')?.trim();
    (!name.is_empty()).then_some(name)
}

impl Manifest {
    pub fn load(path: &Path) -> Result<Manifest> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| bad(format!("cannot read {}: {e}", path.display())))?;
        Manifest::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Manifest> {
        let ini = Ini::load_from_str(text).map_err(|e| bad(e.to_string()))?;
        let mut chart_props = None;
        let mut metric_props = None;
        let mut rest = Vec::new();
        for (section, props) in ini.iter() {
            match section {
                None if props.is_empty() => {}
                None => return Err(bad("keys outside any section")),
                Some("chart") => chart_props = Some(props),
                Some("metric") => metric_props = Some(props),
                Some(other) => rest.push((other, props)),
            }
        }
        let chart = Arc::new(parse_chart(chart_props.ok_or_else(|| bad("missing [chart] section"))?)?);
        let metric = parse_metric(&chart, metric_props)?;
        let mut m = Manifest {
            chart,
            metric,
            fields: BTreeMap::new(),
            scalars: BTreeMap::new(),
            forms: BTreeMap::new(),
            surfaces: BTreeMap::new(),
            curves: BTreeMap::new(),
        };
        for (section, props) in rest {
            m.add_section(section, props)?;
        }
        Ok(m)
    }

    fn coord_names(&self) -> Vec<&str> {
        self.chart.coords().iter().map(String::as_str).collect()
    }

    fn chart_expr(&self, text: &str, ctx: &str) -> Result<Expr> {
        let e = expression(text, &self.coord_names(), ctx)?;
        self.chart.check_expr(&e).map_err(|err| bad(format!("{ctx}: {err}")))?;
        Ok(e)
    }

    fn has_name(&self, name: &str) -> bool {
        self.fields.contains_key(name)
            || self.scalars.contains_key(name)
            || self.forms.contains_key(name)
            || self.surfaces.contains_key(name)
            || self.curves.contains_key(name)
    }

    fn add_section(&mut self, section: &str, props: &Properties) -> Result<()> {
        let n = self.chart.dim();
        let (kind, name) = ["field", "scalar", "form", "surface", "curve"]
            .into_iter()
            .find_map(|k| named(section, k).map(|name| (k, name.to_string())))
            .ok_or_else(|| bad(format!("unknown section [{section}]")))?;
        if self.has_name(&name) {
            return Err(bad(format!("duplicate name `{name}`")));
        }
        let mut s = Section::new(section, props);
        match kind {
            "field" => {
                let variance = match s.require("variance")?.trim() {
                    "contra" => Variance::Contravariant,
                    "co" => Variance::Covariant,
                    other => return Err(bad(format!("[{section}] variance must be `contra` or `co`, got `{other}`"))),
                };
                let comps = (1..=n)
                    .map(|i| {
                        let key = format!("v_{i}");
                        self.chart_expr(s.require(&key)?, &format!("[{section}] {key}"))
                    })
                    .collect::<Result<Vec<_>>>()?;
                let field = VectorField::new(self.chart.clone(), comps, variance)?;
                self.fields.insert(name, field);
            }
            "scalar" => {
                let f = self.chart_expr(s.require("f")?, &format!("[{section}] f"))?;
                self.scalars.insert(name, f);
            }
            "form" => {
                let k: usize = s
                    .require("degree")?
                    .trim()
                    .parse()
                    .map_err(|_| bad(format!("[{section}] degree must be a non-negative integer")))?;
                if k > n {
                    return Err(bad(format!("[{section}] degree {k} exceeds dimension {n}")));
                }
                let comps = combinations(n, k)
                    .iter()
                    .map(|idx| {
                        let key = if k == 0 {
                            "w".to_string()
                        } else {
                            let parts: Vec<String> = idx.iter().map(|i| (i + 1).to_string()).collect();
                            format!("w_{}", parts.join("_"))
                        };
                        match s.get(&key) {
                            Some(text) => self.chart_expr(text, &format!("[{section}] {key}")),
                            None => Ok(Expr::zero()),
                        }
                    })
                    .collect::<Result<Vec<_>>>()?;
                let form = KForm::new(self.chart.clone(), k, comps)?;
                self.forms.insert(name, form);
            }
            "surface" => {
                let params = list(s.require("params")?);
                let [u, v] = params.as_slice() else {
                    return Err(bad(format!("[{section}] params must name two parameters")));
                };
                let dom = intervals(s.require("domain")?, 2, &format!("[{section}] domain"))?;
                let names = [u.as_str(), v.as_str()];
                let emb = (1..=3)
                    .map(|i| {
                        let key = format!("e_{i}");
                        expression(s.require(&key)?, &names, &format!("[{section}] {key}"))
                    })
                    .collect::<Result<Vec<_>>>()?;
                let orientation = match s.get("orientation").map(str::trim) {
                    None | Some("positive") => Orientation::Positive,
                    Some("negative") => Orientation::Negative,
                    Some(other) => {
                        return Err(bad(format!(
                            "[{section}] orientation must be `positive` or `negative`, got `{other}`"
                        )))
                    }
                };
                let surface = ParamSurface::new(names, [dom[0], dom[1]], emb, orientation)?;
                self.surfaces.insert(name, surface);
            }
            _ => {
                let param = s.require("param")?.trim().to_string();
                let dom = intervals(s.require("domain")?, 1, &format!("[{section}] domain"))?;
                let emb = (1..=3)
                    .map(|i| {
                        let key = format!("e_{i}");
                        expression(s.require(&key)?, &[param.as_str()], &format!("[{section}] {key}"))
                    })
                    .collect::<Result<Vec<_>>>()?;
                let curve = ParamCurve::new(param, dom[0], emb)?;
                self.curves.insert(name, curve);
            }
        }
        s.finish()
    }

    pub fn field(&self, name: &str) -> Result<&VectorField> {
        self.fields
            .get(name)
            .ok_or_else(|| bad(format!("no field named `{name}`")))
    }

    pub fn scalar(&self, name: &str) -> Result<&Expr> {
        self.scalars
            .get(name)
            .ok_or_else(|| bad(format!("no scalar named `{name}`")))
    }

    pub fn form(&self, name: &str) -> Result<&KForm> {
        self.forms.get(name).ok_or_else(|| bad(format!("no form named `{name}`")))
    }

    pub fn surface(&self, name: &str) -> Result<&ParamSurface> {
        self.surfaces
            .get(name)
            .ok_or_else(|| bad(format!("no surface named `{name}`")))
    }

    pub fn curve(&self, name: &str) -> Result<&ParamCurve> {
        self.curves.get(name).ok_or_else(|| bad(format!("no curve named `{name}`")))
    }

    /// A chart point from comma-separated constants.
    pub fn chart_point(&self, text: &str) -> Result<EvalPoint> {
        let values = point(text)?;
        if values.len() != self.chart.dim() {
            return Err(Error::DimensionMismatch {
                what: "point coordinates",
                expected: self.chart.dim(),
                found: values.len(),
            });
        }
        self.chart.point(&values)
    }
}

fn parse_chart(props: &Properties) -> Result<Chart> {
    let mut s = Section::new("chart", props);
    let dim: usize = s
        .require("dim")?
        .trim()
        .parse()
        .map_err(|_| bad("[chart] dim must be a positive integer"))?;
    let coords = list(s.require("coords")?);
    if coords.len() != dim {
        return Err(bad(format!("[chart] dim = {dim} but {} coords listed", coords.len())));
    }
    let domain = intervals(s.require("domain")?, dim, "[chart] domain")?;
    let boundary = list(s.require("boundary")?)
        .iter()
        .map(|b| match b.as_str() {
            "periodic" => Ok(BoundaryMode::Periodic),
            "fixed" => Ok(BoundaryMode::Fixed),
            other => Err(bad(format!("[chart] boundary must be `periodic` or `fixed`, got `{other}`"))),
        })
        .collect::<Result<Vec<_>>>()?;
    if boundary.len() != dim {
        return Err(bad(format!("[chart] dim = {dim} but {} boundary modes listed", boundary.len())));
    }
    let name = s.get("name").map(str::trim).unwrap_or("chart").to_string();
    s.finish()?;
    Chart::new(&name, coords, domain, boundary)
}

fn parse_metric(chart: &Arc<Chart>, props: Option<&Properties>) -> Result<MetricField> {
    let n = chart.dim();
    let names: Vec<&str> = chart.coords().iter().map(String::as_str).collect();
    let mut g: Vec<Vec<Option<Expr>>> = vec![vec![None; n]; n];
    if let Some(props) = props {
        for (key, text) in props.iter() {
            let idx: Vec<usize> = key
                .strip_prefix("g_")
                .map(|r| r.split('_').map(|p| p.parse::<usize>()).collect::<Result<Vec<_>, _>>())
                .and_then(|r| r.ok())
                .filter(|v| v.len() == 2 && v.iter().all(|&i| (1..=n).contains(&i)))
                .ok_or_else(|| bad(format!("[metric] unknown key `{key}`")))?;
            let (i, j) = (idx[0] - 1, idx[1] - 1);
            let e = expression(text, &names, &format!("[metric] {key}"))?;
            chart.check_expr(&e).map_err(|err| bad(format!("[metric] {key}: {err}")))?;
            if let Some(prev) = &g[j][i] {
                if i != j && prev != &e {
                    return Err(bad(format!("[metric] g_{}_{} and g_{}_{} differ", j + 1, i + 1, i + 1, j + 1)));
                }
            }
            g[i][j] = Some(e.clone());
            g[j][i] = Some(e);
        }
    }
    let entries = (0..n)
        .map(|i| {
            (0..n)
                .map(|j| g[i][j].clone().unwrap_or_else(|| if i == j { Expr::one() } else { Expr::zero() }))
                .collect()
        })
        .collect();
    MetricField::new(chart.clone(), entries)
}
