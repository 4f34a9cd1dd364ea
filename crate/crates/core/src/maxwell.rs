//! Time-harmonic Maxwell traces: impedance trace on the boundary and
//! weighted tangential jumps of the field and its scaled curl on interior faces.

use crate::error::{Error, Result};
use crate::geom::{self, CVec3, Vec3, C64, I};
use crate::mesh::Side;
use crate::planewave::{Branch, PolarizationFrame};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MaxwellParams {
    pub omega: f64,
    pub mu: f64,
    pub eps: C64,
    /// Impedance coefficient of the absorbing boundary condition.
    pub varsigma: f64,
    pub rho1: f64,
    pub rho2: f64,
}

impl MaxwellParams {
    /// `mu = 1`, `varsigma = 1`, `rho1 = rho2 = 1`.
    pub fn new(omega: f64, eps: C64) -> Self {
        Self { omega, mu: 1.0, eps, varsigma: 1.0, rho1: 1.0, rho2: 1.0 }
    }

    /// `kappa = omega sqrt(mu eps)`, principal branch.
    pub fn kappa(&self) -> C64 {
        self.omega * (self.mu * self.eps).sqrt()
    }

    /// `1 / (i omega mu)`.
    pub fn curl_scale(&self) -> C64 {
        1.0 / (I * self.omega * self.mu)
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("omega", self.omega),
            ("mu", self.mu),
            ("varsigma", self.varsigma),
            ("rho1", self.rho1),
            ("rho2", self.rho2),
        ] {
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::InvalidConfig(format!("{name} must be positive, got {v}")));
            }
        }
        if !(self.eps.norm() > 0.0) {
            return Err(Error::InvalidConfig("eps must be nonzero".into()));
        }
        Ok(())
    }
}

/// `F_k x n_k + F_j x n_j`.
pub fn tangential_jump(f_k: &CVec3, f_j: &CVec3, n_k: &Vec3, n_j: &Vec3) -> CVec3 {
    geom::cadd(&geom::ccross(f_k, n_k), &geom::ccross(f_j, n_j))
}

/// `-E x n + varsigma/(i omega mu) ((curl E) x n) x n`.
pub fn impedance_trace(p: &MaxwellParams, e: &CVec3, curl: &CVec3, n: &Vec3) -> CVec3 {
    let cn = geom::ccross(&geom::ccross(curl, n), n);
    let s = p.varsigma * p.curl_scale();
    let exn = geom::ccross(e, n);
    [s * cn[0] - exn[0], s * cn[1] - exn[1], s * cn[2] - exn[2]]
}

/// One side's contribution to the six interior jump components, before the
/// quadrature weight: `sqrt(rho1) E x n_side` and
/// `sqrt(rho2) (curl E) x n_side / (i omega mu)`.
pub fn interior_side_trace(
    p: &MaxwellParams,
    _side: Side,
    n_side: &Vec3,
    e: &CVec3,
    curl: &CVec3,
    out: &mut [C64],
) {
    let a = geom::ccross(e, n_side);
    let b = geom::ccross(curl, n_side);
    let s1 = p.rho1.sqrt();
    let s2 = p.rho2.sqrt() * p.curl_scale();
    for c in 0..3 {
        out[c] = a[c] * s1;
        out[3 + c] = b[c] * s2;
    }
}

/// Field and curl of a Maxwell plane wave with the phase factored out,
/// together with their derivatives along a direction tangent `dw`.
pub fn wave_amplitude(
    mu: f64,
    kappa: C64,
    frame: &PolarizationFrame,
    branch: Branch,
) -> (CVec3, CVec3) {
    let f = match branch {
        Branch::Low => frame.f_low,
        Branch::High => frame.f_high,
    };
    let s = C64::new(mu.sqrt(), 0.0);
    (geom::cscale(s, &f), geom::cscale(I * kappa * s, &geom::cross(&frame.w, &f)))
}

pub fn wave_amplitude_derivative(
    mu: f64,
    kappa: C64,
    frame: &PolarizationFrame,
    branch: Branch,
    dw: &Vec3,
) -> (CVec3, CVec3) {
    let (dg, dfh) = frame.derivative(dw);
    let (f, df) = match branch {
        Branch::Low => (frame.f_low, dg),
        Branch::High => (frame.f_high, dfh),
    };
    let s = C64::new(mu.sqrt(), 0.0);
    let dcurl = geom::add(&geom::cross(dw, &f), &geom::cross(&frame.w, &df));
    (geom::cscale(s, &df), geom::cscale(I * kappa * s, &dcurl))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn rand_cvec(rng: &mut ChaCha8Rng) -> CVec3 {
        std::array::from_fn(|_| C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
    }

    #[test]
    fn jump_examples() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let n = [0.0, 0.0, 1.0];
        let m = [0.0, 0.0, -1.0];
        let e = rand_cvec(&mut rng);
        let j = tangential_jump(&e, &e, &n, &m);
        assert!(geom::cnorm_sqr(&j) == 0.0);
        let j = tangential_jump(&e, &geom::CVEC_ZERO, &n, &m);
        assert_eq!(j, geom::ccross(&e, &n));
        // swapping the two owners together with their normals leaves the jump unchanged
        let f = rand_cvec(&mut rng);
        let a = tangential_jump(&e, &f, &n, &m);
        let b = tangential_jump(&f, &e, &m, &n);
        assert!(geom::cnorm_sqr(&geom::csub(&a, &b)) < 1e-28);
    }

    #[test]
    fn kappa_for_lossy_medium() {
        let p = MaxwellParams::new(std::f64::consts::PI, C64::new(1.0, 1.0));
        let k = p.kappa();
        let expect = std::f64::consts::PI * C64::new(1.0, 1.0).sqrt();
        assert!((k - expect).norm() < 1e-14);
        assert!(k.im > 0.0);
        assert!(p.validate().is_ok());
        assert!(MaxwellParams { rho2: 0.0, ..p }.validate().is_err());
    }

    #[test]
    fn impedance_trace_is_tangential() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let p = MaxwellParams::new(2.0, C64::new(1.0, 0.5));
        for n in [[1.0, 0.0, 0.0], [0.0, -1.0, 0.0], [0.0, 0.0, 1.0]] {
            let t = impedance_trace(&p, &rand_cvec(&mut rng), &rand_cvec(&mut rng), &n);
            let tn = t[0] * n[0] + t[1] * n[1] + t[2] * n[2];
            assert!(tn.norm() < 1e-15);
        }
    }
}
