//! Weighted trace vectors and the least-squares forms built on them.
//!
//! Every function `v` is represented on the skeleton by its trace vector
//! `T(v)`: at each face quadrature node the boundary impedance trace (or the
//! interior jumps) multiplied by the square roots of the quadrature weight
//! and the jump weights. The sesquilinear form is then the Euclidean inner
//! product `a(u, v) = sum_m T(u)_m conj(T(v)_m)`, and the load form is
//! `L(v) = sum_m G_m conj(T(v)_m)` with `G` the weighted boundary datum.

use crate::error::{Error, Result};
use crate::geom::{CVec3, Vec3, C64, CVEC_ZERO, CZERO};
use crate::helmholtz::{self, HelmholtzParams};
use crate::maxwell::{self, MaxwellParams};
use crate::mesh::{Face, Mesh, Side};
use crate::quadrature::{self, gauss_legendre_1d};

/// Smallest energy norm accepted for a candidate function.
pub const NORM_FLOOR: f64 = 1e-14;

/// Pointwise field data needed to take traces.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum FieldValue {
    Scalar { u: C64, grad: CVec3 },
    Vector { e: CVec3, curl: CVec3 },
}

impl FieldValue {
    pub fn zero_like(&self) -> Self {
        match self {
            FieldValue::Scalar { .. } => FieldValue::Scalar { u: CZERO, grad: CVEC_ZERO },
            FieldValue::Vector { .. } => FieldValue::Vector { e: CVEC_ZERO, curl: CVEC_ZERO },
        }
    }

    pub fn scale(&self, s: C64) -> Self {
        match self {
            FieldValue::Scalar { u, grad } => FieldValue::Scalar {
                u: u * s,
                grad: grad.map(|g| g * s),
            },
            FieldValue::Vector { e, curl } => FieldValue::Vector {
                e: e.map(|x| x * s),
                curl: curl.map(|x| x * s),
            },
        }
    }

    /// `self += s * other`; both must be the same variant.
    pub fn add_scaled(&mut self, s: C64, other: &FieldValue) {
        match (self, other) {
            (FieldValue::Scalar { u, grad }, FieldValue::Scalar { u: u2, grad: g2 }) => {
                *u += s * u2;
                for c in 0..3 {
                    grad[c] += s * g2[c];
                }
            }
            (FieldValue::Vector { e, curl }, FieldValue::Vector { e: e2, curl: c2 }) => {
                for c in 0..3 {
                    e[c] += s * e2[c];
                    curl[c] += s * c2[c];
                }
            }
            _ => panic!("mixing scalar and vector fields"),
        }
    }

    /// Squared modulus of the primary quantity (`|u|^2` or `|E|^2`).
    pub fn value_norm_sqr(&self) -> f64 {
        match self {
            FieldValue::Scalar { u, .. } => u.norm_sqr(),
            FieldValue::Vector { e, .. } => crate::geom::cnorm_sqr(e),
        }
    }

    /// Difference of the primary quantities, squared.
    pub fn value_dist_sqr(&self, other: &FieldValue) -> f64 {
        match (self, other) {
            (FieldValue::Scalar { u, .. }, FieldValue::Scalar { u: v, .. }) => (u - v).norm_sqr(),
            (FieldValue::Vector { e, .. }, FieldValue::Vector { e: f, .. }) => {
                crate::geom::cnorm_sqr(&crate::geom::csub(e, f))
            }
            _ => panic!("mixing scalar and vector fields"),
        }
    }
}

/// Which equation is being solved, with its coefficients.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Physics {
    Helmholtz(HelmholtzParams),
    Maxwell(MaxwellParams),
}

impl Physics {
    pub fn omega(&self) -> f64 {
        match self {
            Physics::Helmholtz(p) => p.omega,
            Physics::Maxwell(p) => p.omega,
        }
    }

    /// Wavenumber of the plane waves: `omega`, or `kappa = omega sqrt(mu eps)`.
    pub fn wavenumber(&self) -> C64 {
        match self {
            Physics::Helmholtz(p) => C64::new(p.omega, 0.0),
            Physics::Maxwell(p) => p.kappa(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            Physics::Helmholtz(p) => p.validate(),
            Physics::Maxwell(p) => p.validate(),
        }
    }

    pub fn is_maxwell(&self) -> bool {
        matches!(self, Physics::Maxwell(_))
    }

    /// Trace components per boundary node.
    pub fn boundary_comps(&self) -> usize {
        match self {
            Physics::Helmholtz(_) => 1,
            Physics::Maxwell(_) => 3,
        }
    }

    /// Trace components per interior node.
    pub fn interior_comps(&self) -> usize {
        2 * self.boundary_comps()
    }

    /// Local basis functions per direction.
    pub fn columns_per_wave(&self) -> usize {
        match self {
            Physics::Helmholtz(_) => 1,
            Physics::Maxwell(_) => 2,
        }
    }

    /// Boundary impedance trace; scalar problems use the first slot only.
    pub fn impedance_trace(&self, f: &FieldValue, n: &Vec3) -> CVec3 {
        match (self, f) {
            (Physics::Helmholtz(p), FieldValue::Scalar { u, grad }) => {
                [helmholtz::impedance_trace(p.omega, *u, grad, n), CZERO, CZERO]
            }
            (Physics::Maxwell(p), FieldValue::Vector { e, curl }) => {
                maxwell::impedance_trace(p, e, curl, n)
            }
            _ => panic!("field kind does not match the physics"),
        }
    }

    /// Unweighted trace components of `f` seen from `side` of `face`.
    pub fn side_trace(&self, face: &Face, side: Side, f: &FieldValue, out: &mut [C64]) {
        let n = face.outward_normal(side);
        if face.is_boundary() {
            let t = self.impedance_trace(f, &n);
            out.copy_from_slice(&t[..out.len()]);
            return;
        }
        match (self, f) {
            (Physics::Helmholtz(p), FieldValue::Scalar { u, grad }) => {
                helmholtz::interior_side_trace(p, side, &n, *u, grad, out)
            }
            (Physics::Maxwell(p), FieldValue::Vector { e, curl }) => {
                maxwell::interior_side_trace(p, side, &n, e, curl, out)
            }
            _ => panic!("field kind does not match the physics"),
        }
    }
}

/// One-dimensional factor of a tensor-product face rule.
#[derive(Debug, Clone, PartialEq)]
pub struct AxisRule {
    pub axis: usize,
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

/// Quadrature nodes of one face and the slice of the trace vector they own.
#[derive(Debug, Clone, PartialEq)]
pub struct FaceNodes {
    pub points: Vec<Vec3>,
    pub sqrt_w: Vec<f64>,
    /// Start of this face's segment in the trace vector.
    pub offset: usize,
    /// Components per node.
    pub comps: usize,
    /// In-plane factors; their tensor product reproduces `points`.
    pub axis_rules: Vec<AxisRule>,
}

impl FaceNodes {
    pub fn len(&self) -> usize {
        self.points.len() * self.comps
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn range(&self) -> std::ops::Range<usize> {
        self.offset..self.offset + self.len()
    }
}

/// A mesh, the equation, and the face quadrature fixing the trace layout.
#[derive(Debug, Clone)]
pub struct TraceSpace {
    pub mesh: Mesh,
    pub physics: Physics,
    pub faces: Vec<FaceNodes>,
    len: usize,
}

impl TraceSpace {
    /// Builds the layout; face order follows
    /// [`quadrature::oscillatory_order`] unless `order` overrides it.
    pub fn new(mesh: Mesh, physics: Physics, order: Option<usize>) -> Result<Self> {
        physics.validate()?;
        let k = physics.wavenumber().norm();
        let mut faces = Vec::with_capacity(mesh.faces.len());
        let mut offset = 0;
        for face in &mesh.faces {
            let q = order.unwrap_or_else(|| quadrature::oscillatory_order(k, face.diameter()));
            let rule = quadrature::face_quadrature(face, q)?;
            let (x, w) = gauss_legendre_1d(q)?;
            let axis_rules = (0..face.geometry.dim)
                .filter(|&a| a != face.axis)
                .map(|a| {
                    let half = 0.5 * face.geometry.extent(a);
                    let mid = 0.5 * (face.geometry.lo[a] + face.geometry.hi[a]);
                    AxisRule {
                        axis: a,
                        nodes: x.iter().map(|t| mid + half * t).collect(),
                        weights: w.iter().map(|w| w * half).collect(),
                    }
                })
                .collect();
            let comps = if face.is_boundary() {
                physics.boundary_comps()
            } else {
                physics.interior_comps()
            };
            let nodes = FaceNodes {
                sqrt_w: rule.weights.iter().map(|w| w.sqrt()).collect(),
                points: rule.points,
                offset,
                comps,
                axis_rules,
            };
            offset += nodes.len();
            faces.push(nodes);
        }
        Ok(Self { mesh, physics, faces, len: offset })
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn zero_trace(&self) -> Trace {
        Trace(vec![CZERO; self.len])
    }

    /// Trace of a field defined on the whole domain (both sides of every
    /// interior face see the same value, so its jumps vanish).
    pub fn field_trace(&self, field: impl Fn(&Vec3) -> FieldValue) -> Trace {
        let mut t = self.zero_trace();
        let mut buf = [CZERO; 6];
        for (face, nodes) in self.mesh.faces.iter().zip(&self.faces) {
            for (q, (x, sw)) in nodes.points.iter().zip(&nodes.sqrt_w).enumerate() {
                let f = field(x);
                let base = nodes.offset + q * nodes.comps;
                for &side in face.sides() {
                    let out = &mut buf[..nodes.comps];
                    self.physics.side_trace(face, side, &f, out);
                    for (c, v) in out.iter().enumerate() {
                        t.0[base + c] += v * sw;
                    }
                }
            }
        }
        t
    }

    /// Weighted boundary datum `G`: `sqrt(w) g(x, n)` on boundary nodes,
    /// zero on interior nodes.
    pub fn load_trace(&self, g: impl Fn(&Vec3, &Vec3) -> CVec3) -> Trace {
        let mut t = self.zero_trace();
        for (face, nodes) in self.mesh.faces.iter().zip(&self.faces) {
            if !face.is_boundary() {
                continue;
            }
            for (q, (x, sw)) in nodes.points.iter().zip(&nodes.sqrt_w).enumerate() {
                let v = g(x, &face.normal);
                for c in 0..nodes.comps {
                    t.0[nodes.offset + q * nodes.comps + c] = v[c] * sw;
                }
            }
        }
        t
    }

    /// Trace of a function given element by element.
    pub fn piecewise_trace(&self, field: impl Fn(usize, &Vec3) -> FieldValue) -> Trace {
        let mut t = self.zero_trace();
        let mut buf = [CZERO; 6];
        for (face, nodes) in self.mesh.faces.iter().zip(&self.faces) {
            for &side in face.sides() {
                let k = face.owner(side).unwrap();
                for (q, (x, sw)) in nodes.points.iter().zip(&nodes.sqrt_w).enumerate() {
                    let f = field(k, x);
                    let out = &mut buf[..nodes.comps];
                    self.physics.side_trace(face, side, &f, out);
                    let base = nodes.offset + q * nodes.comps;
                    for (c, v) in out.iter().enumerate() {
                        t.0[base + c] += v * sw;
                    }
                }
            }
        }
        t
    }

    /// The part of `t` living on boundary faces (interior entries zeroed).
    pub fn boundary_part(&self, t: &Trace) -> Trace {
        let mut out = self.zero_trace();
        for (face, nodes) in self.mesh.faces.iter().zip(&self.faces) {
            if face.is_boundary() {
                let r = nodes.range();
                out.0[r.clone()].copy_from_slice(&t.0[r]);
            }
        }
        out
    }
}

/// Weighted trace vector of one function.
#[derive(Debug, Clone, PartialEq)]
pub struct Trace(pub Vec<C64>);

impl Trace {
    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn norm(&self) -> f64 {
        self.norm_sqr().sqrt()
    }

    pub fn norm_sqr(&self) -> f64 {
        self.0.iter().map(|z| z.norm_sqr()).sum()
    }

    pub fn scaled(&self, s: C64) -> Trace {
        Trace(self.0.iter().map(|z| z * s).collect())
    }

    pub fn axpy(&mut self, s: C64, other: &Trace) {
        for (a, b) in self.0.iter_mut().zip(&other.0) {
            *a += s * b;
        }
    }

    pub fn sub(&self, other: &Trace) -> Trace {
        Trace(self.0.iter().zip(&other.0).map(|(a, b)| a - b).collect())
    }
}

fn check(a: &Trace, b: &Trace) -> Result<()> {
    if a.len() != b.len() {
        return Err(Error::MeshMismatch(a.len(), b.len()));
    }
    Ok(())
}

fn inner(a: &Trace, b: &Trace) -> C64 {
    a.0.iter().zip(&b.0).map(|(x, y)| x * y.conj()).sum()
}

/// `a(u, v)`.
pub fn a_form(u: &Trace, v: &Trace) -> Result<C64> {
    check(u, v)?;
    Ok(inner(u, v))
}

/// `L(v)` for the weighted datum `g`.
pub fn l_form(g: &Trace, v: &Trace) -> Result<C64> {
    check(g, v)?;
    Ok(inner(g, v))
}

/// `|||v||| = sqrt(Re a(v, v))`.
pub fn energy_norm(v: &Trace) -> f64 {
    v.norm()
}

/// `Re{L(v) - a(u_prev, v)}`.
pub fn residual(g: &Trace, u_prev: &Trace, v: &Trace) -> Result<f64> {
    check(g, v)?;
    check(u_prev, v)?;
    Ok(g.0
        .iter()
        .zip(&u_prev.0)
        .zip(&v.0)
        .map(|((g, u), v)| ((g - u) * v.conj()).re)
        .sum())
}

/// `residual / |||v|||`.
pub fn eta(g: &Trace, u_prev: &Trace, v: &Trace) -> Result<f64> {
    let n = energy_norm(v);
    if n <= NORM_FLOOR {
        return Err(Error::DegenerateCandidate(n));
    }
    Ok(residual(g, u_prev, v)? / n)
}

/// Loss `J(v) = |||v|||^2 - 2 Re L(v) + ||g||^2`, i.e. `||T(v) - G||^2`.
pub fn loss(g: &Trace, v: &Trace) -> Result<f64> {
    check(g, v)?;
    Ok(v.0.iter().zip(&g.0).map(|(v, g)| (v - g).norm_sqr()).sum())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::BoxDomain;
    use std::f64::consts::PI;

    fn single_square(omega: f64) -> TraceSpace {
        let mesh = Mesh::uniform(BoxDomain::unit_square(), &[1, 1]).unwrap();
        TraceSpace::new(mesh, Physics::Helmholtz(HelmholtzParams::new(omega)), None).unwrap()
    }

    fn wave(omega: f64, w: Vec3) -> impl Fn(&Vec3) -> FieldValue {
        move |x| {
            let (u, grad) = crate::planewave::eval_scalar_wave(C64::new(omega, 0.0), &w, x);
            FieldValue::Scalar { u, grad }
        }
    }

    #[test]
    fn single_wave_energy() {
        let space = single_square(PI);
        let t = space.field_trace(wave(PI, [1.0, 0.0, 0.0]));
        let a = a_form(&t, &t).unwrap();
        assert!((a.re - 6.0 * PI * PI).abs() < 1e-10, "{a}");
        assert!(a.im.abs() < 1e-12 * a.re);
        assert!((energy_norm(&t) - PI * 6f64.sqrt()).abs() < 1e-11);
        assert!((energy_norm(&t.scaled(C64::new(2.0, 0.0))) - 2.0 * energy_norm(&t)).abs() < 1e-12);
        assert_eq!(energy_norm(&space.zero_trace()), 0.0);
    }

    #[test]
    fn load_from_own_trace_is_boundary_part() {
        let mesh = Mesh::uniform(BoxDomain::unit_square(), &[2, 2]).unwrap();
        let space =
            TraceSpace::new(mesh, Physics::Helmholtz(HelmholtzParams::new(2.0 * PI)), None).unwrap();
        let v = space.piecewise_trace(|k, x| {
            let w = crate::planewave::direction_2d(0.3 + k as f64);
            wave(2.0 * PI, w)(x)
        });
        let g = space.boundary_part(&v);
        let l = l_form(&g, &v).unwrap();
        let b = a_form(&g, &g).unwrap();
        assert!((l - b).norm() < 1e-12 * b.norm());
        assert!(l_form(&space.zero_trace(), &v).unwrap() == CZERO);
    }

    #[test]
    fn load_order_self_consistency() {
        let t = |q| {
            let mesh = Mesh::uniform(BoxDomain::unit_square(), &[1, 1]).unwrap();
            let space =
                TraceSpace::new(mesh, Physics::Helmholtz(HelmholtzParams::new(PI)), Some(q)).unwrap();
            let g = space.load_trace(|_, _| [C64::new(1.0, 0.0), CZERO, CZERO]);
            let v = space.field_trace(wave(PI, [1.0, 0.0, 0.0]));
            l_form(&g, &v).unwrap()
        };
        assert!((t(12) - t(24)).norm() < 1e-10);
    }

    #[test]
    fn mismatch_is_reported() {
        let a = Trace(vec![CZERO; 3]);
        let b = Trace(vec![CZERO; 4]);
        assert_eq!(a_form(&a, &b), Err(Error::MeshMismatch(3, 4)));
    }

    #[test]
    fn eta_contracts() {
        let space = single_square(PI);
        let g = space.boundary_part(&space.field_trace(wave(PI, [0.6, 0.8, 0.0])));
        let v = space.field_trace(wave(PI, [1.0, 0.0, 0.0]));
        let z = space.zero_trace();
        assert_eq!(residual(&g, &z, &v).unwrap(), l_form(&g, &v).unwrap().re);
        let e1 = eta(&g, &z, &v).unwrap();
        let e2 = eta(&g, &z, &v.scaled(C64::new(2.0, 0.0))).unwrap();
        assert!((e1 - e2).abs() < 1e-12 * e1.abs());
        assert!(matches!(eta(&g, &z, &z), Err(Error::DegenerateCandidate(_))));
        // the error direction itself attains the energy error
        let e = eta(&g, &z, &g).unwrap();
        assert!((e - energy_norm(&g)).abs() < 1e-12 * e);
    }
}
