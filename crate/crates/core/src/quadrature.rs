//! Gauss–Legendre rules mapped onto mesh facets and element boxes.

use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::geom::Vec3;
use crate::mesh::{BoxDomain, Face};

/// Quadrature nodes in physical coordinates with weights carrying the
/// measure of the integration domain.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadRule {
    pub points: Vec<Vec3>,
    pub weights: Vec<f64>,
}

impl QuadRule {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn total_weight(&self) -> f64 {
        self.weights.iter().sum()
    }
}

/// Nodes and weights of the `n`-point Gauss–Legendre rule on `[-1, 1]`,
/// nodes in increasing order.
pub fn gauss_legendre_1d(n: usize) -> Result<(Vec<f64>, Vec<f64>)> {
    if !(1..=64).contains(&n) {
        return Err(Error::QuadratureOrder(n));
    }
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let m = n.div_ceil(2);
    for i in 0..m {
        // Tricomi initial guess for the i-th largest root
        let mut x = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre(n, x);
            dp = d;
            let dx = p / d;
            x -= dx;
            if dx.abs() < 1e-15 {
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
    if n % 2 == 1 {
        nodes[n / 2] = 0.0;
    }
    Ok((nodes, weights))
}

/// Legendre polynomial `P_n(x)` and its derivative by the three-term recurrence.
fn legendre(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

/// Tensor-product rule over the axes of `b` that have positive extent
/// among the first `b.dim` axes, skipping `skip`.
fn tensor_rule(b: &BoxDomain, skip: Option<usize>, order: usize) -> Result<QuadRule> {
    let (x, w) = gauss_legendre_1d(order)?;
    let axes: Vec<usize> = (0..b.dim).filter(|&a| Some(a) != skip).collect();
    let mut points = vec![b.lo];
    let mut weights = vec![1.0];
    for &a in &axes {
        let half = 0.5 * b.extent(a);
        let mid = 0.5 * (b.lo[a] + b.hi[a]);
        let mut np = Vec::with_capacity(points.len() * order);
        let mut nw = Vec::with_capacity(points.len() * order);
        for (p, pw) in points.iter().zip(&weights) {
            for (xi, wi) in x.iter().zip(&w) {
                let mut q = *p;
                q[a] = mid + half * xi;
                np.push(q);
                nw.push(pw * wi * half);
            }
        }
        points = np;
        weights = nw;
    }
    Ok(QuadRule { points, weights })
}

/// `order` points per in-plane direction on a facet.
pub fn face_quadrature(face: &Face, order: usize) -> Result<QuadRule> {
    tensor_rule(&face.geometry, Some(face.axis), order)
}

/// `order` points per direction on an element box.
pub fn volume_quadrature(element: &BoxDomain, order: usize) -> Result<QuadRule> {
    tensor_rule(element, None, order)
}

/// Points per direction for oscillatory integrands of wavenumber
/// `wavenumber` over an interval of length `h`: `max(10, ceil(k h / pi) + 6)`.
pub fn oscillatory_order(wavenumber: f64, h: f64) -> usize {
    let resolved = (wavenumber.abs() * h / PI).ceil() as usize + 6;
    resolved.clamp(10, 64)
}
