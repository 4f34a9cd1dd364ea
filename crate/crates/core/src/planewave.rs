//! Plane-wave directions, fields, and Maxwell polarization frames.
//!
//! A direction set holds the trainable propagation angles of every element.
//! In 2D each element carries `n` polar angles `d`; in 3D it carries `m*`
//! inclinations `zeta` and `t* = 2 m*` azimuths `theta`, and the `n = m* t*`
//! directions are all pairs, enumerated with `theta` varying fastest.

use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::geom::{self, CVec3, Vec3, C64, I};

/// Threshold on `|sin zeta|` below which an inclination is nudged.
pub const POLAR_THRESHOLD: f64 = 1e-3;
/// Size of the nudge applied to near-polar inclinations.
pub const POLAR_DISTURBANCE: f64 = 1e-2;

/// Wraps an angle into `(-pi, pi]`.
pub fn wrap_angle(a: f64) -> f64 {
    let w = (a + PI).rem_euclid(2.0 * PI) - PI;
    if w <= -PI {
        PI
    } else {
        w
    }
}

pub fn direction_2d(d: f64) -> Vec3 {
    [d.cos(), d.sin(), 0.0]
}

pub fn direction_3d(zeta: f64, theta: f64) -> Vec3 {
    let (sz, cz) = zeta.sin_cos();
    let (st, ct) = theta.sin_cos();
    [sz * ct, sz * st, cz]
}

/// Angles of one element.
#[derive(Debug, Clone, PartialEq)]
pub enum ElementAngles {
    Planar(Vec<f64>),
    Spherical { zeta: Vec<f64>, theta: Vec<f64> },
}

/// One propagation direction together with its partial derivatives with
/// respect to the element's flattened angle vector.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Wave {
    pub w: Vec3,
    /// `(angle index, dW/d angle)`; one entry in 2D, two in 3D.
    pub partials: [(usize, Vec3); 2],
    pub num_partials: usize,
}

impl Wave {
    pub fn partials(&self) -> &[(usize, Vec3)] {
        &self.partials[..self.num_partials]
    }
}

impl ElementAngles {
    /// Number of plane-wave directions `n`.
    pub fn width(&self) -> usize {
        match self {
            ElementAngles::Planar(d) => d.len(),
            ElementAngles::Spherical { zeta, theta } => zeta.len() * theta.len(),
        }
    }

    /// Number of trainable angles.
    pub fn num_angles(&self) -> usize {
        match self {
            ElementAngles::Planar(d) => d.len(),
            ElementAngles::Spherical { zeta, theta } => zeta.len() + theta.len(),
        }
    }

    /// Flattened angles: `d`, or `zeta` followed by `theta`.
    pub fn flat(&self) -> Vec<f64> {
        match self {
            ElementAngles::Planar(d) => d.clone(),
            ElementAngles::Spherical { zeta, theta } => {
                zeta.iter().chain(theta.iter()).copied().collect()
            }
        }
    }

    pub fn set_flat(&mut self, values: &[f64]) {
        match self {
            ElementAngles::Planar(d) => d.copy_from_slice(values),
            ElementAngles::Spherical { zeta, theta } => {
                let m = zeta.len();
                zeta.copy_from_slice(&values[..m]);
                theta.copy_from_slice(&values[m..]);
            }
        }
    }

    /// Directions with their angle derivatives, in basis order.
    pub fn waves(&self) -> Vec<Wave> {
        match self {
            ElementAngles::Planar(d) => d
                .iter()
                .enumerate()
                .map(|(j, &a)| {
                    let (s, c) = a.sin_cos();
                    Wave {
                        w: [c, s, 0.0],
                        partials: [(j, [-s, c, 0.0]), (0, [0.0; 3])],
                        num_partials: 1,
                    }
                })
                .collect(),
            ElementAngles::Spherical { zeta, theta } => {
                let m = zeta.len();
                let mut out = Vec::with_capacity(m * theta.len());
                for (mi, &z) in zeta.iter().enumerate() {
                    let (sz, cz) = z.sin_cos();
                    for (ti, &t) in theta.iter().enumerate() {
                        let (st, ct) = t.sin_cos();
                        out.push(Wave {
                            w: [sz * ct, sz * st, cz],
                            partials: [
                                (m + ti, [-sz * st, sz * ct, 0.0]),
                                (mi, [cz * ct, cz * st, -sz]),
                            ],
                            num_partials: 2,
                        });
                    }
                }
                out
            }
        }
    }

    /// Wraps azimuths into `(-pi, pi]`, clamps inclinations to `[0, pi]`
    /// and nudges inclinations with `sin(zeta) ~ 0`.
    pub fn normalize(&mut self) {
        match self {
            ElementAngles::Planar(d) => d.iter_mut().for_each(|a| *a = wrap_angle(*a)),
            ElementAngles::Spherical { zeta, theta } => {
                theta.iter_mut().for_each(|a| *a = wrap_angle(*a));
                zeta.iter_mut().for_each(|z| *z = z.clamp(0.0, PI));
                correct_polar_angles(zeta, POLAR_THRESHOLD, POLAR_DISTURBANCE);
            }
        }
    }
}

/// Per-element propagation angles: the hidden parameters of the network.
#[derive(Debug, Clone, PartialEq)]
pub struct DirectionSet {
    pub dim: usize,
    pub elements: Vec<ElementAngles>,
}

impl DirectionSet {
    pub fn num_elements(&self) -> usize {
        self.elements.len()
    }

    /// Directions per element.
    pub fn width(&self) -> usize {
        self.elements.first().map_or(0, ElementAngles::width)
    }

    pub fn num_angles(&self) -> usize {
        self.elements.iter().map(ElementAngles::num_angles).sum()
    }

    pub fn flat(&self) -> Vec<f64> {
        self.elements.iter().flat_map(|e| e.flat()).collect()
    }

    pub fn set_flat(&mut self, values: &[f64]) {
        let mut off = 0;
        for e in &mut self.elements {
            let n = e.num_angles();
            e.set_flat(&values[off..off + n]);
            off += n;
        }
    }

    pub fn normalize(&mut self) {
        self.elements.iter_mut().for_each(ElementAngles::normalize);
    }
}

/// Uniform initial angles `d_j = -pi + 2 pi j / n`, identical on every element.
pub fn init_directions_2d(n: usize, num_elements: usize) -> Result<DirectionSet> {
    if n == 0 {
        return Err(Error::InvalidConfig("network width must be at least 1".into()));
    }
    let d: Vec<f64> = (1..=n).map(|j| -PI + 2.0 * PI * j as f64 / n as f64).collect();
    Ok(DirectionSet {
        dim: 2,
        elements: vec![ElementAngles::Planar(d); num_elements],
    })
}

/// Raw 3D initial angles before range enforcement:
/// `zeta_m = pi (m-1)/(m*-1) + pi/(3 m*)` and `theta_t = -pi + 2 pi t / t*`
/// with `t* = 2 m*`.
pub fn initial_spherical_angles(m_star: usize) -> Result<(Vec<f64>, Vec<f64>)> {
    if m_star < 2 {
        return Err(Error::InvalidConfig(format!(
            "3D width m* must be at least 2, got {m_star}"
        )));
    }
    let mf = m_star as f64;
    let zeta = (1..=m_star)
        .map(|m| PI / (mf - 1.0) * (m as f64 - 1.0) + PI / (3.0 * mf))
        .collect();
    let t_star = 2 * m_star;
    let theta = (1..=t_star)
        .map(|t| -PI + 2.0 * PI * t as f64 / t_star as f64)
        .collect();
    Ok((zeta, theta))
}

/// Uniform 3D initialization; inclinations beyond `pi` are clamped and then
/// pushed off the pole.
pub fn init_directions_3d(m_star: usize, num_elements: usize) -> Result<DirectionSet> {
    let (zeta, theta) = initial_spherical_angles(m_star)?;
    let mut e = ElementAngles::Spherical { zeta, theta };
    e.normalize();
    Ok(DirectionSet {
        dim: 3,
        elements: vec![e; num_elements],
    })
}

/// Moves every inclination with `|sin zeta| < threshold` by `disturbance`
/// toward the interior of `[0, pi]`.
pub fn correct_polar_angles(zeta: &mut [f64], threshold: f64, disturbance: f64) {
    for z in zeta.iter_mut() {
        if z.sin().abs() < threshold {
            *z = if *z < 0.5 * PI { *z + disturbance } else { *z - disturbance };
        }
    }
}

/// `e^{i k W.x}` and its gradient `i k W e^{i k W.x}`.
pub fn eval_scalar_wave(k: C64, w: &Vec3, x: &Vec3) -> (C64, CVec3) {
    let v = (I * k * geom::dot(w, x)).exp();
    (v, geom::cscale(I * k * v, w))
}

/// Orthonormal polarization frame attached to a unit direction.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PolarizationFrame {
    pub w: Vec3,
    pub g: Vec3,
    pub f_low: Vec3,
    pub f_high: Vec3,
    fallback: Option<usize>,
}

/// `|b|` at or above which the closed-form polarization is abandoned.
const POLE_TOL: f64 = 1e-8;

impl PolarizationFrame {
    pub fn new(w: &Vec3) -> Self {
        let (a, b, c) = (w[0], w[1], w[2]);
        if b.abs() < 1.0 - POLE_TOL {
            let s = (1.0 - b * b).sqrt();
            // (-a^2 b + b (1 - b^2)) / (c s) reduces to b c / s on the unit sphere
            let g = [a * b / s, -s, b * c / s];
            let f_high = geom::cross(&g, w);
            return Self { w: *w, g, f_low: g, f_high, fallback: None };
        }
        let axis = least_aligned_axis(w);
        let g = fallback_g(w, axis);
        let f_high = geom::cross(&g, w);
        Self { w: *w, g, f_low: g, f_high, fallback: Some(axis) }
    }

    pub fn is_fallback(&self) -> bool {
        self.fallback.is_some()
    }

    /// Directional derivatives `(dG, dF_high)` along a tangent `dw` of the sphere.
    pub fn derivative(&self, dw: &Vec3) -> (Vec3, Vec3) {
        let dg = match self.fallback {
            None => {
                let (a, b, c) = (self.w[0], self.w[1], self.w[2]);
                let s = (1.0 - b * b).sqrt();
                let s3 = s * s * s;
                [
                    b / s * dw[0] + a / s3 * dw[1],
                    b / s * dw[1],
                    b / s * dw[2] + c / s3 * dw[1],
                ]
            }
            Some(axis) => {
                let mut e = [0.0; 3];
                e[axis] = 1.0;
                let ew = geom::dot(&e, &self.w);
                let u = geom::sub(&e, &geom::scale(ew, &self.w));
                let un = geom::norm(&u);
                let du = geom::add(
                    &geom::scale(-geom::dot(&e, dw), &self.w),
                    &geom::scale(-ew, dw),
                );
                let proj = geom::scale(geom::dot(&self.g, &du), &self.g);
                geom::scale(1.0 / un, &geom::sub(&du, &proj))
            }
        };
        let df = geom::add(&geom::cross(&dg, &self.w), &geom::cross(&self.g, dw));
        (dg, df)
    }
}

fn least_aligned_axis(w: &Vec3) -> usize {
    let mut best = 0;
    for a in 1..3 {
        if w[a].abs() < w[best].abs() {
            best = a;
        }
    }
    best
}

fn fallback_g(w: &Vec3, axis: usize) -> Vec3 {
    let mut e = [0.0; 3];
    e[axis] = 1.0;
    let u = geom::sub(&e, &geom::scale(geom::dot(&e, w), w));
    geom::scale(1.0 / geom::norm(&u), &u)
}

pub fn polarization_frame(w: &Vec3) -> PolarizationFrame {
    PolarizationFrame::new(w)
}

/// The two Maxwell plane waves sharing a direction.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Branch {
    /// Polarized along `G`.
    Low,
    /// Polarized along `G x W`.
    High,
}

/// `E = sqrt(mu) F e^{i kappa W.x}` and `curl E = i kappa (W x F) sqrt(mu) e^{i kappa W.x}`.
pub fn eval_maxwell_wave(
    mu: f64,
    kappa: C64,
    frame: &PolarizationFrame,
    branch: Branch,
    x: &Vec3,
) -> (CVec3, CVec3) {
    let f = match branch {
        Branch::Low => frame.f_low,
        Branch::High => frame.f_high,
    };
    let phase = mu.sqrt() * (I * kappa * geom::dot(&frame.w, x)).exp();
    let e = geom::cscale(phase, &f);
    let curl = geom::cscale(I * kappa * phase, &geom::cross(&frame.w, &f));
    (e, curl)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn close(a: &Vec3, b: &Vec3, tol: f64) -> bool {
        (0..3).all(|i| (a[i] - b[i]).abs() < tol)
    }

    #[test]
    fn direction_examples() {
        assert!(close(&direction_2d(0.0), &[1.0, 0.0, 0.0], 1e-15));
        assert!(close(&direction_3d(0.0, 1.234), &[0.0, 0.0, 1.0], 1e-15));
        assert!(close(&direction_3d(PI / 2.0, PI / 2.0), &[0.0, 1.0, 0.0], 1e-15));
    }

    #[test]
    fn init_2d() {
        let d = init_directions_2d(4, 3).unwrap();
        assert_eq!(d.num_elements(), 3);
        let ElementAngles::Planar(a) = &d.elements[2] else { panic!() };
        let expect = [-PI / 2.0, 0.0, PI / 2.0, PI];
        for (x, y) in a.iter().zip(expect) {
            assert!((x - y).abs() < 1e-15);
        }
        let d = init_directions_2d(1, 1).unwrap();
        assert_eq!(d.elements[0], ElementAngles::Planar(vec![PI]));
        assert!(init_directions_2d(0, 1).is_err());
    }

    #[test]
    fn init_3d() {
        let (zeta, theta) = initial_spherical_angles(4).unwrap();
        let expect = [
            PI / 12.0,
            PI / 3.0 + PI / 12.0,
            2.0 * PI / 3.0 + PI / 12.0,
            PI + PI / 12.0,
        ];
        for (x, y) in zeta.iter().zip(expect) {
            assert!((x - y).abs() < 1e-14);
        }
        assert_eq!(theta.len(), 8);
        assert!((theta[7] - PI).abs() < 1e-15);

        // the last inclination overflows pi; it is clamped and pushed off the pole
        let d = init_directions_3d(4, 2).unwrap();
        let ElementAngles::Spherical { zeta, theta } = &d.elements[1] else { panic!() };
        assert_eq!(theta.len(), 8);
        assert!((zeta[3] - (PI - POLAR_DISTURBANCE)).abs() < 1e-15);
        assert_eq!(d.width(), 32);
        assert!(matches!(init_directions_3d(1, 1), Err(Error::InvalidConfig(_))));
    }

    #[test]
    fn polar_correction() {
        let mut z = [0.0];
        correct_polar_angles(&mut z, 1e-3, 1e-2);
        assert_eq!(z, [0.01]);
        let mut z = [PI / 2.0];
        correct_polar_angles(&mut z, 1e-3, 1e-2);
        assert_eq!(z, [PI / 2.0]);
        let mut z = [PI];
        correct_polar_angles(&mut z, 1e-3, 1e-2);
        assert!((z[0] - (PI - 0.01)).abs() < 1e-15);
    }

    #[test]
    fn wrap() {
        assert_eq!(wrap_angle(PI), PI);
        assert_eq!(wrap_angle(-PI), PI);
        assert!((wrap_angle(3.0 * PI / 2.0) + PI / 2.0).abs() < 1e-15);
        assert!((wrap_angle(0.3) - 0.3).abs() < 1e-15);
    }

    #[test]
    fn scalar_wave_examples() {
        let (v, _) = eval_scalar_wave(C64::new(PI, 0.0), &[1.0, 0.0, 0.0], &[1.0, 0.0, 0.0]);
        assert!((v - C64::new(-1.0, 0.0)).norm() < 1e-15);
        let (v, _) = eval_scalar_wave(C64::new(2.0 * PI, 0.0), &[0.0, 1.0, 0.0], &[0.25, 0.25, 0.0]);
        assert!((v - I).norm() < 1e-15);
        let (_, g) = eval_scalar_wave(C64::new(PI, 0.0), &[1.0, 0.0, 0.0], &[0.0; 3]);
        assert!((g[0] - C64::new(0.0, PI)).norm() < 1e-15);
        assert!(g[1].norm() == 0.0);
    }

    #[test]
    fn scalar_gradient_matches_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..50 {
            let w = direction_3d(rng.random_range(0.0..PI), rng.random_range(-PI..PI));
            let x: Vec3 = std::array::from_fn(|_| rng.random_range(-1.0..1.0));
            let k = C64::new(rng.random_range(1.0..10.0), rng.random_range(0.0..1.0));
            let (_, g) = eval_scalar_wave(k, &w, &x);
            let h = 1e-6;
            for a in 0..3 {
                let mut xp = x;
                let mut xm = x;
                xp[a] += h;
                xm[a] -= h;
                let fd = (eval_scalar_wave(k, &w, &xp).0 - eval_scalar_wave(k, &w, &xm).0) / (2.0 * h);
                assert!((fd - g[a]).norm() < 1e-6 * g[a].norm().max(1.0));
            }
        }
    }

    #[test]
    fn frame_examples() {
        let f = polarization_frame(&[0.0, 0.0, 1.0]);
        assert!(!f.is_fallback());
        assert!(close(&f.g, &[0.0, -1.0, 0.0], 1e-15));
        assert!(close(&f.f_high, &[-1.0, 0.0, 0.0], 1e-15));

        let f = polarization_frame(&[0.0, 1.0, 0.0]);
        assert!(f.is_fallback());
        assert!((geom::norm(&f.g) - 1.0).abs() < 1e-15);
        assert!(geom::dot(&f.g, &f.w).abs() < 1e-15);
    }

    #[test]
    fn frames_are_orthonormal() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let mut dirs: Vec<Vec3> = (0..500)
            .map(|_| direction_3d(rng.random_range(0.0..PI), rng.random_range(-PI..PI)))
            .collect();
        dirs.extend([[1.0, 0.0, 0.0], [0.0, -1.0, 0.0], [0.0, 0.0, -1.0]]);
        for w in dirs {
            let f = polarization_frame(&w);
            assert!((geom::norm(&f.g) - 1.0).abs() < 1e-12);
            assert!(geom::dot(&f.g, &w).abs() < 1e-12);
            assert!((geom::norm(&f.f_high) - 1.0).abs() < 1e-12);
            assert!(geom::dot(&f.f_high, &w).abs() < 1e-12);
        }
    }

    #[test]
    fn frame_derivative_matches_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for case in 0..200 {
            // include directions close to the fallback region around +-y
            let (z, t) = if case % 10 == 0 {
                (PI / 2.0 + 1e-5, PI / 2.0)
            } else {
                (rng.random_range(0.1..PI - 0.1), rng.random_range(-PI..PI))
            };
            let frame = polarization_frame(&direction_3d(z, t));
            let h = 1e-6;
            for (dz, dt) in [(1.0, 0.0), (0.0, 1.0)] {
                let dw = [
                    z.cos() * t.cos() * dz - z.sin() * t.sin() * dt,
                    z.cos() * t.sin() * dz + z.sin() * t.cos() * dt,
                    -z.sin() * dz,
                ];
                let (dg, df) = frame.derivative(&dw);
                let p = polarization_frame(&direction_3d(z + h * dz, t + h * dt));
                let m = polarization_frame(&direction_3d(z - h * dz, t - h * dt));
                if p.is_fallback() != m.is_fallback() {
                    continue;
                }
                let fdg = geom::scale(0.5 / h, &geom::sub(&p.g, &m.g));
                let fdf = geom::scale(0.5 / h, &geom::sub(&p.f_high, &m.f_high));
                let scale = 1.0 + geom::norm(&dg);
                assert!(close(&fdg, &dg, 1e-5 * scale), "case {case}: {fdg:?} vs {dg:?}");
                assert!(close(&fdf, &df, 1e-5 * scale));
            }
        }
    }

    #[test]
    fn maxwell_wave_examples() {
        let frame = polarization_frame(&[0.0, 0.0, 1.0]);
        let kappa = C64::new(PI, 0.0);
        let (e, _) = eval_maxwell_wave(1.0, kappa, &frame, Branch::Low, &[0.0, 0.0, 1.0]);
        assert!((e[1] - C64::new(1.0, 0.0)).norm() < 1e-15);
        assert!(e[0].norm() < 1e-15 && e[2].norm() < 1e-15);
        let (_, curl) = eval_maxwell_wave(1.0, kappa, &frame, Branch::Low, &[0.0; 3]);
        assert!((curl[0] - C64::new(0.0, PI)).norm() < 1e-15);
        let (e, _) = eval_maxwell_wave(1.0, kappa, &frame, Branch::High, &[0.0; 3]);
        assert!((e[0] + 1.0).norm() < 1e-15);
    }

    #[test]
    fn maxwell_waves_solve_curl_curl() {
        // curl (curl E / (i w mu)) + i w eps E = 0 via central differences of the analytic curl
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let (omega, mu, eps) = (PI, 1.3, C64::new(1.0, 1.0));
        let kappa = omega * (mu * eps).sqrt();
        for _ in 0..20 {
            let w = direction_3d(rng.random_range(0.2..3.0), rng.random_range(-PI..PI));
            let frame = polarization_frame(&w);
            let x: Vec3 = std::array::from_fn(|_| rng.random_range(-0.5..0.5));
            for branch in [Branch::Low, Branch::High] {
                let curl_at = |p: &Vec3| eval_maxwell_wave(mu, kappa, &frame, branch, p).1;
                let h = 1e-5;
                let mut jac = [[C64::new(0.0, 0.0); 3]; 3];
                for a in 0..3 {
                    let mut xp = x;
                    let mut xm = x;
                    xp[a] += h;
                    xm[a] -= h;
                    let (cp, cm) = (curl_at(&xp), curl_at(&xm));
                    for c in 0..3 {
                        jac[c][a] = (cp[c] - cm[c]) / (2.0 * h);
                    }
                }
                let curlcurl = [
                    jac[2][1] - jac[1][2],
                    jac[0][2] - jac[2][0],
                    jac[1][0] - jac[0][1],
                ];
                let (e, _) = eval_maxwell_wave(mu, kappa, &frame, branch, &x);
                let iwmu = I * omega * mu;
                for c in 0..3 {
                    let r = curlcurl[c] / iwmu + I * omega * eps * e[c];
                    assert!(r.norm() < 1e-6 * (1.0 + e[c].norm() * omega), "{r}");
                }
            }
        }
    }
}
