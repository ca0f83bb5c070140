//! One-dimensional quadrature rules and lattice nodes.

use crate::error::{Error, Result};
use crate::manifold::BoundaryMode;

/// Lattice nodes along one axis: periodic axes omit the duplicated right
/// endpoint, fixed axes include both endpoints.
pub fn axis_nodes(lo: f64, hi: f64, mode: BoundaryMode, n: usize) -> Vec<f64> {
    match mode {
        BoundaryMode::Periodic => {
            let h = (hi - lo) / n as f64;
            (0..n).map(|i| lo + i as f64 * h).collect()
        }
        BoundaryMode::Fixed => {
            let h = (hi - lo) / (n - 1) as f64;
            (0..n)
                .map(|i| if i + 1 == n { hi } else { lo + i as f64 * h })
                .collect()
        }
    }
}

/// Node spacing matching [`axis_nodes`].
pub fn axis_spacing(lo: f64, hi: f64, mode: BoundaryMode, n: usize) -> f64 {
    match mode {
        BoundaryMode::Periodic => (hi - lo) / n as f64,
        BoundaryMode::Fixed => (hi - lo) / (n - 1) as f64,
    }
}

/// Trapezoid on periodic axes, composite Simpson on fixed axes (with a
/// closing 3/8 panel when the interval count is odd).
pub fn axis_weights(lo: f64, hi: f64, mode: BoundaryMode, n: usize) -> Result<Vec<f64>> {
    if n < 3 {
        return Err(Error::Resolution(format!(
            "quadrature needs at least 3 points per axis, got {n}"
        )));
    }
    let h = axis_spacing(lo, hi, mode, n);
    Ok(match mode {
        BoundaryMode::Periodic => vec![h; n],
        BoundaryMode::Fixed => simpson_weights(n, h),
    })
}

fn simpson_weights(n: usize, h: f64) -> Vec<f64> {
    let intervals = n - 1;
    let mut w = vec![0.0; n];
    let simpson_intervals = if intervals % 2 == 0 { intervals } else { intervals - 3 };
    for k in (0..simpson_intervals).step_by(2) {
        w[k] += h / 3.0;
        w[k + 1] += 4.0 * h / 3.0;
        w[k + 2] += h / 3.0;
    }
    if simpson_intervals < intervals {
        let s = simpson_intervals;
        let c = 3.0 * h / 8.0;
        w[s] += c;
        w[s + 1] += 3.0 * c;
        w[s + 2] += 3.0 * c;
        w[s + 3] += c;
    }
    w
}

/// Gauss–Legendre nodes and weights on `[-1, 1]`.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let m = n.div_ceil(2);
    for i in 0..m {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre(n, x);
            dp = d;
            let dx = p / d;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let (_, d) = legendre(n, x);
        if d != 0.0 {
            dp = d;
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    (nodes, weights)
}

/// P_n(x) and P_n'(x) by the three-term recurrence.
fn legendre(n: usize, x: f64) -> (f64, f64) {
    let (mut p0, mut p1) = (1.0, x);
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

/// Gauss–Legendre rule mapped to `[a, b]`.
pub fn gauss_legendre_on(a: f64, b: f64, n: usize) -> (Vec<f64>, Vec<f64>) {
    let (x, w) = gauss_legendre(n);
    let half = 0.5 * (b - a);
    let mid = 0.5 * (a + b);
    (
        x.iter().map(|t| mid + half * t).collect(),
        w.iter().map(|v| half * v).collect(),
    )
}
