use std::sync::Arc;

use crate::calculus::{Variance, VectorField};
use crate::error::{Error, Result};
use crate::expr::Expr;
use crate::manifold::{BoundaryMode, Chart};
use crate::quadrature::{axis_nodes, axis_spacing};

/// Minimum points per axis accepted by [`Lattice::new`].
pub const MIN_POINTS_PER_AXIS: usize = 8;

/// Rectangular sampling lattice over a chart's domain box.
///
/// Periodic axes carry `N` nodes without the duplicated endpoint; fixed axes
/// carry `N` nodes including both endpoints. Flat indices are row-major with
/// the last axis fastest.
#[derive(Debug, Clone, PartialEq)]
pub struct Lattice {
    chart: Arc<Chart>,
    shape: Vec<usize>,
    spacing: Vec<f64>,
    nodes: Vec<Vec<f64>>,
    strides: Vec<usize>,
}

impl Lattice {
    pub fn new(chart: Arc<Chart>, shape: &[usize]) -> Result<Lattice> {
        let n = chart.dim();
        if shape.len() != n {
            return Err(Error::DimensionMismatch {
                what: "lattice shape",
                expected: n,
                found: shape.len(),
            });
        }
        if let Some(&bad) = shape.iter().find(|&&s| s < MIN_POINTS_PER_AXIS) {
            return Err(Error::Resolution(format!(
                "lattice needs at least {MIN_POINTS_PER_AXIS} points per axis, got {bad}"
            )));
        }
        let mut spacing = Vec::with_capacity(n);
        let mut nodes = Vec::with_capacity(n);
        for ((&(lo, hi), &mode), &count) in chart.domain().iter().zip(chart.boundary()).zip(shape) {
            spacing.push(axis_spacing(lo, hi, mode, count));
            nodes.push(axis_nodes(lo, hi, mode, count));
        }
        let mut strides = vec![1; n];
        for a in (0..n.saturating_sub(1)).rev() {
            strides[a] = strides[a + 1] * shape[a + 1];
        }
        Ok(Lattice {
            chart,
            shape: shape.to_vec(),
            spacing,
            nodes,
            strides,
        })
    }

    pub fn uniform(chart: Arc<Chart>, points: usize) -> Result<Lattice> {
        let n = chart.dim();
        Lattice::new(chart, &vec![points; n])
    }

    pub fn chart(&self) -> &Arc<Chart> {
        &self.chart
    }

    pub fn dim(&self) -> usize {
        self.shape.len()
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn spacing(&self) -> &[f64] {
        &self.spacing
    }

    pub fn len(&self) -> usize {
        self.shape.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn mode(&self, axis: usize) -> BoundaryMode {
        self.chart.boundary()[axis]
    }

    pub fn axis_nodes(&self, axis: usize) -> &[f64] {
        &self.nodes[axis]
    }

    pub fn multi_index(&self, flat: usize) -> Vec<usize> {
        self.strides
            .iter()
            .zip(&self.shape)
            .map(|(s, n)| (flat / s) % n)
            .collect()
    }

    pub fn flat_index(&self, idx: &[usize]) -> usize {
        idx.iter().zip(&self.strides).map(|(i, s)| i * s).sum()
    }

    /// Coordinate of axis `axis` at the node with flat index `flat`.
    pub fn coord(&self, flat: usize, axis: usize) -> f64 {
        self.nodes[axis][(flat / self.strides[axis]) % self.shape[axis]]
    }

    pub fn point(&self, flat: usize) -> Vec<f64> {
        (0..self.dim()).map(|a| self.coord(flat, a)).collect()
    }

    /// Neighbor one step along `axis` (`up` = +1), wrapping periodic axes.
    pub fn neighbor(&self, flat: usize, axis: usize, up: bool) -> Option<usize> {
        let n = self.shape[axis];
        let k = (flat / self.strides[axis]) % n;
        let s = self.strides[axis];
        match (self.mode(axis), up) {
            (BoundaryMode::Periodic, true) => Some(if k + 1 == n { flat + s - n * s } else { flat + s }),
            (BoundaryMode::Periodic, false) => Some(if k == 0 { flat + (n - 1) * s } else { flat - s }),
            (BoundaryMode::Fixed, true) => (k + 1 < n).then(|| flat + s),
            (BoundaryMode::Fixed, false) => (k > 0).then(|| flat - s),
        }
    }

    /// Whether the node sits on a fixed-axis boundary along `axis`.
    pub fn on_boundary(&self, flat: usize, axis: usize) -> bool {
        if self.mode(axis) == BoundaryMode::Periodic {
            return false;
        }
        let k = (flat / self.strides[axis]) % self.shape[axis];
        k == 0 || k + 1 == self.shape[axis]
    }

    /// Control-volume width along `axis` (half width at fixed-axis endpoints).
    pub fn width(&self, flat: usize, axis: usize) -> f64 {
        if self.on_boundary(flat, axis) {
            0.5 * self.spacing[axis]
        } else {
            self.spacing[axis]
        }
    }

    /// Control volume of the node.
    pub fn cell_volume(&self, flat: usize) -> f64 {
        (0..self.dim()).map(|a| self.width(flat, a)).product()
    }

    /// Number of faces normal to `axis` along one lattice line.
    pub(crate) fn faces_along(&self, axis: usize) -> usize {
        match self.mode(axis) {
            BoundaryMode::Periodic => self.shape[axis],
            BoundaryMode::Fixed => self.shape[axis] + 1,
        }
    }

    /// Total number of faces normal to `axis`.
    pub(crate) fn face_count(&self, axis: usize) -> usize {
        self.len() / self.shape[axis] * self.faces_along(axis)
    }

    /// Face layout normal to `axis`: same as the nodes except along `axis`.
    fn face_strides(&self, axis: usize) -> Vec<usize> {
        let n = self.dim();
        let mut shape = self.shape.clone();
        shape[axis] = self.faces_along(axis);
        let mut strides = vec![1; n];
        for a in (0..n.saturating_sub(1)).rev() {
            strides[a] = strides[a + 1] * shape[a + 1];
        }
        strides
    }

    /// Flat face index for the node `idx` with the axis-`axis` entry replaced by `face`.
    pub(crate) fn face_index(&self, axis: usize, idx: &[usize], face: usize) -> usize {
        let strides = self.face_strides(axis);
        idx.iter()
            .enumerate()
            .map(|(a, &i)| if a == axis { face } else { i } * strides[a])
            .sum()
    }

    /// Decodes a face index into (node multi-index with the face slot, face slot).
    pub(crate) fn face_multi_index(&self, axis: usize, flat: usize) -> Vec<usize> {
        let strides = self.face_strides(axis);
        let mut shape = self.shape.clone();
        shape[axis] = self.faces_along(axis);
        strides.iter().zip(&shape).map(|(s, n)| (flat / s) % n).collect()
    }

    /// (lower face, upper face) slots of node position `k` along `axis`.
    pub(crate) fn node_faces(&self, axis: usize, k: usize) -> (usize, usize) {
        let n = self.shape[axis];
        match self.mode(axis) {
            BoundaryMode::Periodic => ((k + n - 1) % n, k),
            BoundaryMode::Fixed => (k, k + 1),
        }
    }

    /// Nodes on either side of face slot `f` along `axis` (None at a fixed boundary).
    pub(crate) fn face_nodes(&self, axis: usize, f: usize) -> (Option<usize>, Option<usize>) {
        let n = self.shape[axis];
        match self.mode(axis) {
            BoundaryMode::Periodic => (Some(f), Some((f + 1) % n)),
            BoundaryMode::Fixed => (f.checked_sub(1), (f < n).then_some(f)),
        }
    }

    /// Coordinate of face slot `f` along `axis`.
    pub(crate) fn face_coord(&self, axis: usize, f: usize) -> f64 {
        let (lo, hi) = self.chart.domain()[axis];
        let h = self.spacing[axis];
        let n = self.shape[axis];
        match self.mode(axis) {
            BoundaryMode::Periodic => lo + (f as f64 + 0.5) * h,
            BoundaryMode::Fixed => {
                if f == 0 {
                    lo
                } else if f == n {
                    hi
                } else {
                    lo + (f as f64 - 0.5) * h
                }
            }
        }
    }

    pub(crate) fn face_point(&self, axis: usize, flat_face: usize) -> Vec<f64> {
        let idx = self.face_multi_index(axis, flat_face);
        idx.iter()
            .enumerate()
            .map(|(a, &i)| if a == axis { self.face_coord(axis, i) } else { self.nodes[a][i] })
            .collect()
    }
}

/// A real value per lattice node.
#[derive(Debug, Clone, PartialEq)]
pub struct GridFunction {
    lattice: Arc<Lattice>,
    values: Vec<f64>,
    mean_zero: bool,
}

impl GridFunction {
    pub fn new(lattice: Arc<Lattice>, values: Vec<f64>) -> Result<GridFunction> {
        if values.len() != lattice.len() {
            return Err(Error::DimensionMismatch {
                what: "grid function values",
                expected: lattice.len(),
                found: values.len(),
            });
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::Resolution("grid function contains non-finite values".into()));
        }
        Ok(GridFunction {
            lattice,
            values,
            mean_zero: false,
        })
    }

    pub fn zeros(lattice: Arc<Lattice>) -> GridFunction {
        let n = lattice.len();
        GridFunction {
            lattice,
            values: vec![0.0; n],
            mean_zero: false,
        }
    }

    /// Samples `f` at every node.
    pub fn sample(lattice: Arc<Lattice>, f: &Expr) -> Result<GridFunction> {
        let values = super::sample_nodes(&lattice, f)?;
        GridFunction::new(lattice, values)
    }

    pub(crate) fn gauge_fixed(lattice: Arc<Lattice>, values: Vec<f64>) -> GridFunction {
        GridFunction {
            lattice,
            values,
            mean_zero: true,
        }
    }

    pub fn lattice(&self) -> &Arc<Lattice> {
        &self.lattice
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn is_mean_zero(&self) -> bool {
        self.mean_zero
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }
}

/// `n` real components per lattice node, with a variance tag.
#[derive(Debug, Clone, PartialEq)]
pub struct GridVectorField {
    lattice: Arc<Lattice>,
    /// components[i][node]
    components: Vec<Vec<f64>>,
    variance: Variance,
}

impl GridVectorField {
    pub fn new(lattice: Arc<Lattice>, components: Vec<Vec<f64>>, variance: Variance) -> Result<GridVectorField> {
        if components.len() != lattice.dim() {
            return Err(Error::DimensionMismatch {
                what: "grid vector components",
                expected: lattice.dim(),
                found: components.len(),
            });
        }
        for c in &components {
            if c.len() != lattice.len() {
                return Err(Error::DimensionMismatch {
                    what: "grid vector values",
                    expected: lattice.len(),
                    found: c.len(),
                });
            }
            if c.iter().any(|v| !v.is_finite()) {
                return Err(Error::Resolution("grid vector field contains non-finite values".into()));
            }
        }
        Ok(GridVectorField {
            lattice,
            components,
            variance,
        })
    }

    /// Samples a symbolic field at every node.
    pub fn sample(lattice: Arc<Lattice>, x: &VectorField) -> Result<GridVectorField> {
        if **lattice.chart() != **x.chart() {
            return Err(Error::ChartMismatch(
                lattice.chart().name().into(),
                x.chart().name().into(),
            ));
        }
        let components = x
            .components()
            .iter()
            .map(|c| super::sample_nodes(&lattice, c))
            .collect::<Result<Vec<_>>>()?;
        GridVectorField::new(lattice, components, x.variance())
    }

    pub fn lattice(&self) -> &Arc<Lattice> {
        &self.lattice
    }

    pub fn component(&self, i: usize) -> &[f64] {
        &self.components[i]
    }

    pub fn components(&self) -> &[Vec<f64>] {
        &self.components
    }

    pub fn variance(&self) -> Variance {
        self.variance
    }

    pub fn at(&self, node: usize) -> Vec<f64> {
        self.components.iter().map(|c| c[node]).collect()
    }

    /// Largest absolute component value.
    pub fn max_abs(&self) -> f64 {
        self.components
            .iter()
            .flatten()
            .fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Largest absolute componentwise difference.
    pub fn max_diff(&self, other: &GridVectorField) -> f64 {
        self.components
            .iter()
            .flatten()
            .zip(other.components.iter().flatten())
            .fold(0.0, |m, (a, b)| m.max((a - b).abs()))
    }
}

/// Contravariant components stored on the faces normal to each axis
/// (component `a` lives on the faces normal to axis `a`).
#[derive(Debug, Clone, PartialEq)]
pub struct StaggeredField {
    lattice: Arc<Lattice>,
    faces: Vec<Vec<f64>>,
}

impl StaggeredField {
    pub(crate) fn new(lattice: Arc<Lattice>, faces: Vec<Vec<f64>>) -> StaggeredField {
        debug_assert!(faces
            .iter()
            .enumerate()
            .all(|(a, f)| f.len() == lattice.face_count(a)));
        StaggeredField { lattice, faces }
    }

    /// Samples `x` at face positions; boundary faces sit on the boundary nodes.
    pub fn sample(lattice: Arc<Lattice>, x: &VectorField) -> Result<StaggeredField> {
        if x.variance() != Variance::Contravariant {
            return Err(Error::Variance("staggered fields hold contravariant components".into()));
        }
        let chart = lattice.chart().clone();
        let faces = (0..lattice.dim())
            .map(|a| {
                (0..lattice.face_count(a))
                    .map(|f| Ok(x.component(a).eval(&chart.point(&lattice.face_point(a, f))?)?))
                    .collect::<Result<Vec<f64>>>()
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(StaggeredField::new(lattice, faces))
    }

    /// Face values from node values: interior faces average their two nodes,
    /// boundary faces take the boundary node.
    pub fn from_nodes(x: &GridVectorField) -> Result<StaggeredField> {
        if x.variance() != Variance::Contravariant {
            return Err(Error::Variance("staggered fields hold contravariant components".into()));
        }
        let lat = x.lattice().clone();
        let faces = (0..lat.dim())
            .map(|a| {
                (0..lat.face_count(a))
                    .map(|f| {
                        let mut idx = lat.face_multi_index(a, f);
                        let (lo, hi) = lat.face_nodes(a, idx[a]);
                        let mut value = |k: usize| {
                            idx[a] = k;
                            x.component(a)[lat.flat_index(&idx)]
                        };
                        match (lo, hi) {
                            (Some(p), Some(q)) => 0.5 * (value(p) + value(q)),
                            (Some(p), None) | (None, Some(p)) => value(p),
                            (None, None) => unreachable!("face without nodes"),
                        }
                    })
                    .collect()
            })
            .collect();
        Ok(StaggeredField::new(lat, faces))
    }

    pub fn lattice(&self) -> &Arc<Lattice> {
        &self.lattice
    }

    pub fn faces(&self, axis: usize) -> &[f64] {
        &self.faces[axis]
    }

    /// Node values: average of the two faces around each node, or the
    /// boundary face itself on fixed-axis endpoints.
    pub fn to_nodes(&self) -> GridVectorField {
        let lat = &self.lattice;
        let components = (0..lat.dim())
            .map(|a| {
                (0..lat.len())
                    .map(|p| {
                        let idx = lat.multi_index(p);
                        let k = idx[a];
                        let (lf, uf) = lat.node_faces(a, k);
                        let lower = self.faces[a][lat.face_index(a, &idx, lf)];
                        let upper = self.faces[a][lat.face_index(a, &idx, uf)];
                        match lat.mode(a) {
                            BoundaryMode::Fixed if k == 0 => lower,
                            BoundaryMode::Fixed if k + 1 == lat.shape()[a] => upper,
                            _ => 0.5 * (lower + upper),
                        }
                    })
                    .collect()
            })
            .collect();
        GridVectorField {
            lattice: lat.clone(),
            components,
            variance: Variance::Contravariant,
        }
    }

    pub fn sub(&self, other: &StaggeredField) -> StaggeredField {
        StaggeredField {
            lattice: self.lattice.clone(),
            faces: self
                .faces
                .iter()
                .zip(&other.faces)
                .map(|(a, b)| a.iter().zip(b).map(|(x, y)| x - y).collect())
                .collect(),
        }
    }

    pub fn max_abs(&self) -> f64 {
        self.faces.iter().flatten().fold(0.0, |m, v| m.max(v.abs()))
    }
}
