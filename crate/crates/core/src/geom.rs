//! Small fixed-size vector helpers. Points are always stored as 3-vectors;
//! two-dimensional problems keep the third coordinate at zero.

use num_complex::Complex64;

pub type C64 = Complex64;
pub type Vec3 = [f64; 3];
pub type CVec3 = [C64; 3];

pub const I: C64 = C64 { re: 0.0, im: 1.0 };
pub const CZERO: C64 = C64 { re: 0.0, im: 0.0 };
pub const CVEC_ZERO: CVec3 = [CZERO; 3];

#[inline]
pub fn dot(a: &Vec3, b: &Vec3) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

#[inline]
pub fn cross(a: &Vec3, b: &Vec3) -> Vec3 {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

#[inline]
pub fn norm(a: &Vec3) -> f64 {
    dot(a, a).sqrt()
}

#[inline]
pub fn scale(s: f64, a: &Vec3) -> Vec3 {
    [s * a[0], s * a[1], s * a[2]]
}

#[inline]
pub fn sub(a: &Vec3, b: &Vec3) -> Vec3 {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

#[inline]
pub fn add(a: &Vec3, b: &Vec3) -> Vec3 {
    [a[0] + b[0], a[1] + b[1], a[2] + b[2]]
}

/// Real vector promoted to complex and scaled.
#[inline]
pub fn cscale(s: C64, a: &Vec3) -> CVec3 {
    [s * a[0], s * a[1], s * a[2]]
}

#[inline]
pub fn cmul(s: C64, a: &CVec3) -> CVec3 {
    [s * a[0], s * a[1], s * a[2]]
}

#[inline]
pub fn cadd(a: &CVec3, b: &CVec3) -> CVec3 {
    [a[0] + b[0], a[1] + b[1], a[2] + b[2]]
}

#[inline]
pub fn csub(a: &CVec3, b: &CVec3) -> CVec3 {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

/// Complex vector crossed with a real vector.
#[inline]
pub fn ccross(a: &CVec3, b: &Vec3) -> CVec3 {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

/// Complex cross product (no conjugation).
#[inline]
pub fn ccross_c(a: &CVec3, b: &CVec3) -> CVec3 {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

#[inline]
pub fn cnorm_sqr(a: &CVec3) -> f64 {
    a[0].norm_sqr() + a[1].norm_sqr() + a[2].norm_sqr()
}

/// Hermitian product `a · conj(b)`.
#[inline]
pub fn cdot_conj(a: &CVec3, b: &CVec3) -> C64 {
    a[0] * b[0].conj() + a[1] * b[1].conj() + a[2] * b[2].conj()
}
