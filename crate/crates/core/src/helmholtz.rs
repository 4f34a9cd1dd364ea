//! Scalar Helmholtz traces: impedance trace on the boundary, weighted value
//! and normal-derivative jumps on interior faces.

use crate::error::{Error, Result};
use crate::geom::{self, CVec3, Vec3, C64, I};
use crate::mesh::Side;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HelmholtzParams {
    pub omega: f64,
    /// Weight of the value jump.
    pub alpha: f64,
    /// Weight of the normal-derivative jump.
    pub beta: f64,
}

impl HelmholtzParams {
    /// `alpha = omega^2`, `beta = 1`.
    pub fn new(omega: f64) -> Self {
        Self { omega, alpha: omega * omega, beta: 1.0 }
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("omega", self.omega), ("alpha", self.alpha), ("beta", self.beta)] {
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::InvalidConfig(format!("{name} must be positive, got {v}")));
            }
        }
        Ok(())
    }
}

/// `(d/dn + i omega) u`.
pub fn impedance_trace(omega: f64, u: C64, grad: &CVec3, n: &Vec3) -> C64 {
    normal_derivative(grad, n) + I * omega * u
}

pub fn normal_derivative(grad: &CVec3, n: &Vec3) -> C64 {
    grad[0] * n[0] + grad[1] * n[1] + grad[2] * n[2]
}

/// One side's contribution to the two interior jump components, before the
/// quadrature weight. Adding both sides gives
/// `sqrt(alpha) (u_k - u_j)` and `sqrt(beta) (d_{n_k} u_k + d_{n_j} u_j)`.
pub fn interior_side_trace(
    p: &HelmholtzParams,
    side: Side,
    n_side: &Vec3,
    u: C64,
    grad: &CVec3,
    out: &mut [C64],
) {
    let sign = match side {
        Side::Lower => 1.0,
        Side::Upper => -1.0,
    };
    out[0] = u * (sign * p.alpha.sqrt());
    out[1] = normal_derivative(grad, n_side) * p.beta.sqrt();
}

/// Value and gradient of `e^{i omega W.x}` with the phase factored out.
pub fn wave_amplitude(omega: f64, w: &Vec3) -> (C64, CVec3) {
    (C64::new(1.0, 0.0), geom::cscale(I * omega, w))
}
