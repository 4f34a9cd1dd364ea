//! Benchmark problems with closed-form solutions, the boundary data they
//! induce, and errors of approximations against them.

use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::forms::{FieldValue, Physics, Trace, TraceSpace};
use crate::geom::{self, CVec3, Vec3, C64, CZERO, I};
use crate::helmholtz::HelmholtzParams;
use crate::maxwell::MaxwellParams;
use crate::mesh::BoxDomain;
use crate::planewave::{self, Branch, PolarizationFrame};
use crate::quadrature::{oscillatory_order, volume_quadrature};

/// Closed-form solution.
#[derive(Debug, Clone, PartialEq)]
pub enum Exact {
    /// `cos(k pi y) (A1 e^{-i wx x} + A2 e^{i wx x})`.
    Waveguide { k: f64, omega_x: f64, a1: C64, a2: C64 },
    /// `e^{i omega |r - r0|} / (4 pi |r - r0|)`.
    PointSource { omega: f64, r0: Vec3 },
    /// Field of an electric dipole of moment `a` and current `current` at `x0`.
    Dipole { x0: Vec3, a: Vec3, current: f64 },
    /// `amplitude e^{i omega W.x}`.
    ScalarPlaneWave { w: Vec3, amplitude: C64 },
    /// `amplitude sqrt(mu) F e^{i kappa W.x}`.
    MaxwellPlaneWave { w: Vec3, branch: Branch, amplitude: C64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchmarkProblem {
    pub name: String,
    pub physics: Physics,
    pub domain: BoxDomain,
    pub exact: Exact,
}

/// Solves the 2x2 boundary system for the waveguide mode amplitudes.
pub fn waveguide_coefficients(omega: f64, omega_x: f64) -> (C64, C64) {
    let m11 = C64::new(omega_x, 0.0);
    let m12 = C64::new(-omega_x, 0.0);
    let m21 = (omega - omega_x) * (-2.0 * I * omega_x).exp();
    let m22 = (omega + omega_x) * (2.0 * I * omega_x).exp();
    let rhs = (-I, CZERO);
    let det = m11 * m22 - m12 * m21;
    let a1 = (rhs.0 * m22 - m12 * rhs.1) / det;
    let a2 = (m11 * rhs.1 - m21 * rhs.0) / det;
    (a1, a2)
}

/// Waveguide mode on the unit square; `k` defaults to `omega/pi - 1`.
pub fn waveguide_exact_2d(omega: f64, k: Option<f64>) -> Result<BenchmarkProblem> {
    let k = k.unwrap_or(omega / PI - 1.0);
    if !(omega > k * PI) || k < 0.0 {
        return Err(Error::InvalidBenchmark(format!(
            "mode k = {k} is not propagating at omega = {omega} (needs 0 <= k < omega/pi)"
        )));
    }
    let omega_x = (omega * omega - (k * PI).powi(2)).sqrt();
    let (a1, a2) = waveguide_coefficients(omega, omega_x);
    Ok(BenchmarkProblem {
        name: "waveguide2d".into(),
        physics: Physics::Helmholtz(HelmholtzParams::new(omega)),
        domain: BoxDomain::unit_square(),
        exact: Exact::Waveguide { k, omega_x, a1, a2 },
    })
}

/// Point source outside the unit cube.
pub fn point_source_3d(omega: f64, r0: Vec3) -> Result<BenchmarkProblem> {
    let domain = BoxDomain::unit_cube();
    if domain.contains_closed(&r0) {
        return Err(Error::InvalidBenchmark(format!("source {r0:?} lies in the closed domain")));
    }
    Ok(BenchmarkProblem {
        name: "point_source_3d".into(),
        physics: Physics::Helmholtz(HelmholtzParams::new(omega)),
        domain,
        exact: Exact::PointSource { omega, r0 },
    })
}

/// Dipole field on `[-0.5, 0.5]^3`.
pub fn maxwell_dipole(params: MaxwellParams, x0: Vec3, a: Vec3, current: f64) -> Result<BenchmarkProblem> {
    let domain = BoxDomain::new_3d([-0.5; 3], [0.5; 3]);
    if domain.contains_closed(&x0) {
        return Err(Error::InvalidBenchmark(format!("dipole {x0:?} lies in the closed domain")));
    }
    params.validate()?;
    Ok(BenchmarkProblem {
        name: "maxwell_dipole".into(),
        physics: Physics::Maxwell(params),
        domain,
        exact: Exact::Dipole { x0, a, current },
    })
}

/// A single scalar plane wave; in the span of any direction set containing `w`.
pub fn scalar_plane_wave(params: HelmholtzParams, domain: BoxDomain, w: Vec3, amplitude: C64) -> BenchmarkProblem {
    BenchmarkProblem {
        name: "plane_wave".into(),
        physics: Physics::Helmholtz(params),
        domain,
        exact: Exact::ScalarPlaneWave { w, amplitude },
    }
}

pub fn maxwell_plane_wave(
    params: MaxwellParams,
    domain: BoxDomain,
    w: Vec3,
    branch: Branch,
    amplitude: C64,
) -> BenchmarkProblem {
    BenchmarkProblem {
        name: "maxwell_plane_wave".into(),
        physics: Physics::Maxwell(params),
        domain,
        exact: Exact::MaxwellPlaneWave { w, branch, amplitude },
    }
}

/// `phi = e^{i kappa r} / (4 pi r)` with its first two radial derivatives.
fn radial_green(kappa: C64, r: f64) -> (C64, C64, C64) {
    let phi = (I * kappa * r).exp() / (4.0 * PI * r);
    let s = I * kappa - 1.0 / r;
    let d1 = phi * s;
    let d2 = phi * (s * s + 1.0 / (r * r));
    (phi, d1, d2)
}

/// Value, gradient and Hessian of `e^{i kappa |x - x0|} / (4 pi |x - x0|)`.
pub fn green_derivatives(kappa: C64, x: &Vec3, x0: &Vec3) -> (C64, CVec3, [[C64; 3]; 3]) {
    let d = geom::sub(x, x0);
    let r = geom::norm(&d);
    let rh = geom::scale(1.0 / r, &d);
    let (phi, d1, d2) = radial_green(kappa, r);
    let grad = geom::cscale(d1, &rh);
    let mut hess = [[CZERO; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            let delta = if i == j { 1.0 } else { 0.0 };
            hess[i][j] = d2 * rh[i] * rh[j] + d1 / r * (delta - rh[i] * rh[j]);
        }
    }
    (phi, grad, hess)
}

impl BenchmarkProblem {
    pub fn dim(&self) -> usize {
        self.domain.dim
    }

    /// Exact field with the derivative data traces need.
    pub fn exact(&self, x: &Vec3) -> FieldValue {
        match (&self.exact, &self.physics) {
            (Exact::Waveguide { k, omega_x, a1, a2 }, _) => {
                let ky = k * PI;
                let em = (-I * omega_x * x[0]).exp();
                let ep = (I * omega_x * x[0]).exp();
                let s = a1 * em + a2 * ep;
                let ds = I * omega_x * (a2 * ep - a1 * em);
                let (sy, cy) = (ky * x[1]).sin_cos();
                FieldValue::Scalar {
                    u: s * cy,
                    grad: [ds * cy, -s * ky * sy, CZERO],
                }
            }
            (Exact::PointSource { omega, r0 }, _) => {
                let (u, grad, _) = green_derivatives(C64::new(*omega, 0.0), x, r0);
                FieldValue::Scalar { u, grad }
            }
            (Exact::Dipole { x0, a, current }, Physics::Maxwell(p)) => {
                let kappa = p.kappa();
                let (phi, grad, hess) = green_derivatives(kappa, x, x0);
                let am = -I * p.omega * p.mu * *current;
                let bm = *current / (I * p.omega * p.eps);
                let mut e = [CZERO; 3];
                for i in 0..3 {
                    let ha: C64 = (0..3).map(|j| hess[i][j] * a[j]).sum();
                    e[i] = am * phi * a[i] + bm * ha;
                }
                // curl of a gradient vanishes: curl E = am grad(phi) x a
                let curl = geom::cmul(am, &geom::ccross(&grad, a));
                FieldValue::Vector { e, curl }
            }
            (Exact::ScalarPlaneWave { w, amplitude }, p) => {
                let (u, grad) = planewave::eval_scalar_wave(p.wavenumber(), w, x);
                FieldValue::Scalar { u: u * amplitude, grad: geom::cmul(*amplitude, &grad) }
            }
            (Exact::MaxwellPlaneWave { w, branch, amplitude }, Physics::Maxwell(p)) => {
                let frame = PolarizationFrame::new(w);
                let (e, curl) = planewave::eval_maxwell_wave(p.mu, p.kappa(), &frame, *branch, x);
                FieldValue::Vector { e: geom::cmul(*amplitude, &e), curl: geom::cmul(*amplitude, &curl) }
            }
            _ => panic!("problem {} does not match its physics", self.name),
        }
    }

    /// Boundary datum `g(x, n)`: the impedance trace of the exact solution.
    pub fn boundary_data(&self, x: &Vec3, n: &Vec3) -> CVec3 {
        self.physics.impedance_trace(&self.exact(x), n)
    }

    /// Weighted datum on the given trace layout.
    pub fn load_trace(&self, space: &TraceSpace) -> Trace {
        space.load_trace(|x, n| self.boundary_data(x, n))
    }
}

/// Volume quadrature order adequate for `|u_ex - u_h|^2` on an element.
pub fn l2_order(physics: &Physics, h: f64) -> usize {
    oscillatory_order(2.0 * physics.wavenumber().norm(), h)
}

/// `(||u_ex - u_h||_{L^2}, |||u_ex - u_h|||)`.
///
/// `uh` evaluates the approximation on an element at a batch of points;
/// `uh_trace` is its trace on `space`.
pub fn error_norms(
    problem: &BenchmarkProblem,
    space: &TraceSpace,
    uh: impl Fn(usize, &[Vec3]) -> Vec<FieldValue>,
    uh_trace: &Trace,
    order: Option<usize>,
) -> Result<(f64, f64)> {
    let exact_trace = space.field_trace(|x| problem.exact(x));
    let energy = exact_trace.sub(uh_trace).norm();
    let mut l2 = 0.0;
    for (k, elem) in space.mesh.elements.iter().enumerate() {
        let q = volume_quadrature(elem, order.unwrap_or_else(|| l2_order(&space.physics, elem.max_edge())))?;
        let vals = uh(k, &q.points);
        for ((x, w), v) in q.points.iter().zip(&q.weights).zip(&vals) {
            l2 += w * problem.exact(x).value_dist_sqr(v);
        }
    }
    Ok((l2.sqrt(), energy))
}

/// `||u_ex||_{L^2}` by volume quadrature.
pub fn exact_l2_norm(problem: &BenchmarkProblem, space: &TraceSpace) -> Result<f64> {
    let mut s = 0.0;
    for elem in &space.mesh.elements {
        let q = volume_quadrature(elem, l2_order(&space.physics, elem.max_edge()))?;
        for (x, w) in q.points.iter().zip(&q.weights) {
            s += w * problem.exact(x).value_norm_sqr();
        }
    }
    Ok(s.sqrt())
}
