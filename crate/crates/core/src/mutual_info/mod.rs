//! Product-kernel KDE of a feature/target pair and the plug-in mutual
//! information over the resulting density grid.

mod selection;

pub use selection::{dynamic_reselect, run_selection, select_features, SelectionParams, SelectionReport};

use crate::error::{Error, Result};
use crate::matrix::Matrix;

/// Default grid resolution per axis.
pub const DEFAULT_GRID: usize = 64;
/// Densities below this contribute nothing to the MI sum.
const DENSITY_CUTOFF: f64 = 1e-300;
const INV_SQRT_2PI: f64 = 0.398_942_280_401_432_7;

/// Evenly spaced grid nodes.
#[derive(Debug, Clone, PartialEq)]
pub struct Axis {
    pub lo: f64,
    pub hi: f64,
    pub points: usize,
}

impl Axis {
    pub fn step(&self) -> f64 {
        (self.hi - self.lo) / (self.points - 1) as f64
    }

    pub fn nodes(&self) -> Vec<f64> {
        let step = self.step();
        (0..self.points).map(|i| self.lo + i as f64 * step).collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct JointDensityGrid {
    pub x_nodes: Vec<f64>,
    pub y_nodes: Vec<f64>,
    pub dx: f64,
    pub dy: f64,
    /// Row `a` is `x_nodes[a]`, column `b` is `y_nodes[b]`.
    pub density: Matrix,
    pub px: Vec<f64>,
    pub py: Vec<f64>,
    pub hx: f64,
    pub hy: f64,
    pub n: usize,
}

impl JointDensityGrid {
    /// Riemann-sum mass of the joint density.
    pub fn total_mass(&self) -> f64 {
        self.density.as_slice().iter().sum::<f64>() * self.dx * self.dy
    }
}

fn mean_std(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let m = v.iter().sum::<f64>() / n;
    let var = v.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (n - 1.0);
    (m, var.sqrt())
}

fn range(v: &[f64]) -> (f64, f64) {
    v.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &x| (lo.min(x), hi.max(x)))
}

/// Silverman's rule `1.06 * sd * n^(-1/5)`, floored at `1e-9` times the
/// sample range. Errors on a zero-variance sample.
pub fn silverman_bandwidth(samples: &[f64]) -> Result<f64> {
    if samples.len() < 2 {
        return Err(Error::size("bandwidth needs at least two samples"));
    }
    let (_, sd) = mean_std(samples);
    let (lo, hi) = range(samples);
    if sd.is_nan() || sd <= 0.0 || hi <= lo {
        return Err(Error::degenerate("zero-variance sample; mutual information undefined"));
    }
    let h = 1.06 * sd * (samples.len() as f64).powf(-0.2);
    Ok(h.max(1e-9 * (hi - lo)))
}

/// Row `a` holds `K((node_a - s_t) / h) / h` for every sample `t`.
fn kernel_table(nodes: &[f64], samples: &[f64], h: f64) -> Matrix {
    let mut table = Matrix::zeros(nodes.len(), samples.len());
    for (a, &g) in nodes.iter().enumerate() {
        for (slot, &s) in table.row_mut(a).iter_mut().zip(samples) {
            let u = (g - s) / h;
            *slot = INV_SQRT_2PI * (-0.5 * u * u).exp() / h;
        }
    }
    table
}

/// Evaluates the product-kernel KDE on explicit axes with explicit
/// bandwidths. Accepts a single sample.
pub fn kde_joint_grid_with(
    x: &[f64],
    y: &[f64],
    x_axis: &Axis,
    y_axis: &Axis,
    hx: f64,
    hy: f64,
) -> Result<JointDensityGrid> {
    if x.len() != y.len() || x.is_empty() {
        return Err(Error::size("x and y need equal, non-zero lengths"));
    }
    if x_axis.points < 2 || y_axis.points < 2 {
        return Err(Error::size("axes need at least two nodes"));
    }
    if !(hx > 0.0 && hy > 0.0) {
        return Err(Error::data("bandwidths must be positive"));
    }
    if x.iter().chain(y).any(|v| !v.is_finite()) {
        return Err(Error::data("non-finite sample"));
    }
    let n = x.len();
    let (x_nodes, y_nodes) = (x_axis.nodes(), y_axis.nodes());
    let (dx, dy) = (x_axis.step(), y_axis.step());
    let kx = kernel_table(&x_nodes, x, hx);
    let ky = kernel_table(&y_nodes, y, hy);

    // density[a][b] = (1/n) sum_t kx[a][t] * ky[b][t]
    let mut density = Matrix::zeros(x_nodes.len(), y_nodes.len());
    let inv_n = 1.0 / n as f64;
    for a in 0..x_nodes.len() {
        let ka = kx.row(a);
        for b in 0..y_nodes.len() {
            let dot: f64 = ka.iter().zip(ky.row(b)).map(|(p, q)| p * q).sum();
            density.set(a, b, dot * inv_n);
        }
    }
    let px: Vec<f64> = (0..x_nodes.len()).map(|a| density.row(a).iter().sum::<f64>() * dy).collect();
    let py: Vec<f64> =
        (0..y_nodes.len()).map(|b| (0..x_nodes.len()).map(|a| density.get(a, b)).sum::<f64>() * dx).collect();

    Ok(JointDensityGrid { x_nodes, y_nodes, dx, dy, density, px, py, hx, hy, n })
}

/// KDE on a `g x g` grid spanning each axis' sample range padded by three
/// bandwidths, with Silverman bandwidths per axis.
pub fn kde_joint_grid(x: &[f64], y: &[f64], g: usize) -> Result<JointDensityGrid> {
    if x.len() != y.len() {
        return Err(Error::size("x and y lengths differ"));
    }
    if x.len() < 2 {
        return Err(Error::size("KDE needs at least two samples"));
    }
    if g < 8 {
        return Err(Error::size("grid size must be >= 8"));
    }
    if x.iter().chain(y).any(|v| !v.is_finite()) {
        return Err(Error::data("non-finite sample"));
    }
    let hx = silverman_bandwidth(x)?;
    let hy = silverman_bandwidth(y)?;
    let axis = |v: &[f64], h: f64| {
        let (lo, hi) = range(v);
        Axis { lo: lo - 3.0 * h, hi: hi + 3.0 * h, points: g }
    };
    kde_joint_grid_with(x, y, &axis(x, hx), &axis(y, hy), hx, hy)
}

/// Plug-in MI sum over the grid before flooring, in nats.
pub fn mutual_information_raw(grid: &JointDensityGrid) -> f64 {
    let mut total = 0.0;
    for (a, &pxa) in grid.px.iter().enumerate() {
        for (b, &pyb) in grid.py.iter().enumerate() {
            let p = grid.density.get(a, b);
            if p < DENSITY_CUTOFF {
                continue;
            }
            total += p * (p / (pxa * pyb)).ln();
        }
    }
    total * grid.dx * grid.dy
}

/// Plug-in MI in nats; quadrature noise down to `-1e-9` is floored to 0.
pub fn mutual_information(grid: &JointDensityGrid) -> f64 {
    let raw = mutual_information_raw(grid);
    if (-1e-9..0.0).contains(&raw) {
        0.0
    } else {
        raw
    }
}

/// KDE grid plus MI in one call.
pub fn estimate_mi(x: &[f64], y: &[f64], g: usize) -> Result<f64> {
    Ok(mutual_information(&kde_joint_grid(x, y, g)?))
}
