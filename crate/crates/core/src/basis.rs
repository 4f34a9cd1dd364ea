//! Element-wise plane-wave expansions and their local basis columns.
//!
//! On element `k` the local basis consists of one column per direction
//! (Helmholtz) or two (Maxwell: all `G`-polarized waves first, then all
//! `G x W`-polarized ones). A column is `amp * e^{i kappa W.x}`, where the
//! amplitude field `amp` does not depend on `x`.

use nalgebra::DMatrix;

use crate::forms::{FieldValue, Physics, Trace, TraceSpace};
use crate::geom::{self, CVec3, Vec3, C64, CZERO, I};
use crate::helmholtz;
use crate::maxwell;
use crate::mesh::{BoxDomain, Mesh, Side};
use crate::planewave::{Branch, DirectionSet, ElementAngles, PolarizationFrame};

/// Derivative of a column with respect to one angle.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ColumnPartial {
    /// Index into the element's flattened angles.
    pub angle: usize,
    pub dw: Vec3,
    /// Derivative of the amplitude field.
    pub damp: FieldValue,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Column {
    pub w: Vec3,
    /// `kappa W`.
    pub kw: CVec3,
    pub amp: FieldValue,
    pub partials: Vec<ColumnPartial>,
}

impl Column {
    pub fn phase(&self, x: &Vec3) -> C64 {
        (I * (self.kw[0] * x[0] + self.kw[1] * x[1] + self.kw[2] * x[2])).exp()
    }

    pub fn eval(&self, x: &Vec3) -> FieldValue {
        self.amp.scale(self.phase(x))
    }

    /// `kappa (x . dW)`, the factor multiplying `i` in the phase derivative.
    pub fn phase_rate(&self, kappa: C64, x: &Vec3, dw: &Vec3) -> C64 {
        kappa * geom::dot(x, dw)
    }
}

/// Local basis of one element.
pub fn element_columns(physics: &Physics, angles: &ElementAngles) -> Vec<Column> {
    let kappa = physics.wavenumber();
    let waves = angles.waves();
    match physics {
        Physics::Helmholtz(p) => waves
            .iter()
            .map(|wave| {
                let (u, grad) = helmholtz::wave_amplitude(p.omega, &wave.w);
                Column {
                    w: wave.w,
                    kw: geom::cscale(kappa, &wave.w),
                    amp: FieldValue::Scalar { u, grad },
                    partials: wave
                        .partials()
                        .iter()
                        .map(|&(angle, dw)| ColumnPartial {
                            angle,
                            dw,
                            damp: FieldValue::Scalar {
                                u: CZERO,
                                grad: geom::cscale(I * p.omega, &dw),
                            },
                        })
                        .collect(),
                }
            })
            .collect(),
        Physics::Maxwell(p) => {
            let frames: Vec<PolarizationFrame> =
                waves.iter().map(|w| PolarizationFrame::new(&w.w)).collect();
            let mut cols = Vec::with_capacity(2 * waves.len());
            for branch in [Branch::Low, Branch::High] {
                for (wave, frame) in waves.iter().zip(&frames) {
                    let (e, curl) = maxwell::wave_amplitude(p.mu, kappa, frame, branch);
                    cols.push(Column {
                        w: wave.w,
                        kw: geom::cscale(kappa, &wave.w),
                        amp: FieldValue::Vector { e, curl },
                        partials: wave
                            .partials()
                            .iter()
                            .map(|&(angle, dw)| {
                                let (de, dcurl) =
                                    maxwell::wave_amplitude_derivative(p.mu, kappa, frame, branch, &dw);
                                ColumnPartial {
                                    angle,
                                    dw,
                                    damp: FieldValue::Vector { e: de, curl: dcurl },
                                }
                            })
                            .collect(),
                    });
                }
            }
            cols
        }
    }
}

/// Plane-wave function: directions plus per-element coefficients.
#[derive(Debug, Clone, PartialEq)]
pub struct PWExpansion {
    pub directions: DirectionSet,
    pub coeffs: Vec<Vec<C64>>,
}

impl PWExpansion {
    pub fn zero(physics: &Physics, directions: DirectionSet) -> Self {
        let coeffs = directions
            .elements
            .iter()
            .map(|e| vec![CZERO; e.width() * physics.columns_per_wave()])
            .collect();
        Self { directions, coeffs }
    }

    pub fn scaled(&self, s: C64) -> Self {
        Self {
            directions: self.directions.clone(),
            coeffs: self
                .coeffs
                .iter()
                .map(|c| c.iter().map(|z| z * s).collect())
                .collect(),
        }
    }

    pub fn columns(&self, physics: &Physics) -> Vec<Vec<Column>> {
        self.directions
            .elements
            .iter()
            .map(|a| element_columns(physics, a))
            .collect()
    }

    /// Value on element `elem` at `x`.
    pub fn eval(&self, physics: &Physics, elem: usize, x: &Vec3) -> FieldValue {
        let cols = element_columns(physics, &self.directions.elements[elem]);
        eval_columns(&cols, &self.coeffs[elem], x)
    }

    pub fn trace(&self, space: &TraceSpace) -> Trace {
        let cols = self.columns(&space.physics);
        let mut t = space.zero_trace();
        for (f, face) in space.mesh.faces.iter().enumerate() {
            for &side in face.sides() {
                let k = face.owner(side).unwrap();
                let block = SideBlock::new(space, f, side, &cols[k]);
                block.accumulate(&self.coeffs[k], &mut t.0[space.faces[f].range()]);
            }
        }
        t
    }

    /// `||v||_{L^2(Omega)}` from the closed-form element Gram matrices.
    pub fn l2_norm(&self, physics: &Physics, mesh: &Mesh) -> f64 {
        let mut s = 0.0;
        for (k, elem) in mesh.elements.iter().enumerate() {
            let cols = element_columns(physics, &self.directions.elements[k]);
            let g = l2_gram(&cols, elem);
            let c = &self.coeffs[k];
            for (l, cl) in c.iter().enumerate() {
                for (j, cj) in c.iter().enumerate() {
                    s += (cl.conj() * g[(l, j)] * cj).re;
                }
            }
        }
        s.max(0.0).sqrt()
    }
}

pub fn eval_columns(cols: &[Column], coeffs: &[C64], x: &Vec3) -> FieldValue {
    let mut acc = cols[0].amp.zero_like();
    for (col, c) in cols.iter().zip(coeffs) {
        if *c != CZERO {
            acc.add_scaled(c * col.phase(x), &col.amp);
        }
    }
    acc
}

/// Local columns restricted to one side of one face: per-column weighted
/// trace amplitudes `t` and per-node phases `sqrt(w_q) e^{i kappa W.x_q}`.
#[derive(Debug, Clone)]
pub struct SideBlock {
    pub cols: usize,
    pub comps: usize,
    pub nodes: usize,
    /// `cols x comps`, row-major.
    pub t: Vec<C64>,
    /// `nodes x cols`, row-major.
    pub phase: Vec<C64>,
}

impl SideBlock {
    pub fn new(space: &TraceSpace, face_idx: usize, side: Side, cols: &[Column]) -> Self {
        let face = &space.mesh.faces[face_idx];
        let fnodes = &space.faces[face_idx];
        let comps = fnodes.comps;
        let mut t = vec![CZERO; cols.len() * comps];
        for (j, col) in cols.iter().enumerate() {
            space
                .physics
                .side_trace(face, side, &col.amp, &mut t[j * comps..(j + 1) * comps]);
        }
        let nodes = fnodes.points.len();
        let mut phase = Vec::with_capacity(nodes * cols.len());
        for (x, sw) in fnodes.points.iter().zip(&fnodes.sqrt_w) {
            for col in cols {
                phase.push(col.phase(x) * *sw);
            }
        }
        Self { cols: cols.len(), comps, nodes, t, phase }
    }

    /// `out += B c` for this side's segment.
    pub fn accumulate(&self, coeffs: &[C64], out: &mut [C64]) {
        let mut tc = vec![CZERO; self.comps];
        for q in 0..self.nodes {
            let row = &self.phase[q * self.cols..(q + 1) * self.cols];
            tc.iter_mut().for_each(|z| *z = CZERO);
            for (j, (p, c)) in row.iter().zip(coeffs).enumerate() {
                let pc = p * c;
                for (a, t) in tc.iter_mut().zip(&self.t[j * self.comps..(j + 1) * self.comps]) {
                    *a += pc * t;
                }
            }
            for (o, a) in out[q * self.comps..(q + 1) * self.comps].iter_mut().zip(&tc) {
                *o += a;
            }
        }
    }

    /// `out += B^H r` for this side's segment.
    pub fn adjoint_apply(&self, r: &[C64], out: &mut [C64]) {
        for q in 0..self.nodes {
            let rq = &r[q * self.comps..(q + 1) * self.comps];
            let row = &self.phase[q * self.cols..(q + 1) * self.cols];
            for (j, p) in row.iter().enumerate() {
                let tj = &self.t[j * self.comps..(j + 1) * self.comps];
                let s: C64 = rq.iter().zip(tj).map(|(r, t)| r * t.conj()).sum();
                out[j] += s * p.conj();
            }
        }
    }
}

/// `int_elem conj(psi_l) . psi_j dx` for all column pairs, in closed form.
pub fn l2_gram(cols: &[Column], elem: &BoxDomain) -> DMatrix<C64> {
    let n = cols.len();
    let mut g = DMatrix::from_element(n, n, CZERO);
    for l in 0..n {
        for j in 0..n {
            let amp = amp_inner(&cols[j].amp, &cols[l].amp);
            if amp == CZERO {
                continue;
            }
            let mut prod = C64::new(1.0, 0.0);
            for a in 0..elem.dim {
                // exponent rate of e^{i kw_j x} conj(e^{i kw_l x})
                let z = I * (cols[j].kw[a] - cols[l].kw[a].conj());
                prod *= exp_integral(z, elem.lo[a], elem.hi[a]);
            }
            g[(l, j)] = amp * prod;
        }
    }
    g
}

/// `a . conj(b)` of the primary quantities.
fn amp_inner(a: &FieldValue, b: &FieldValue) -> C64 {
    match (a, b) {
        (FieldValue::Scalar { u, .. }, FieldValue::Scalar { u: v, .. }) => u * v.conj(),
        (FieldValue::Vector { e, .. }, FieldValue::Vector { e: f, .. }) => geom::cdot_conj(e, f),
        _ => panic!("mixing scalar and vector fields"),
    }
}

/// `int_lo^hi e^{z t} dt`, with a series near `z = 0`.
pub fn exp_integral(z: C64, lo: f64, hi: f64) -> C64 {
    let h = hi - lo;
    let zh = z * h;
    if zh.norm() < 1e-3 {
        // (e^{zh} - 1)/(zh) = 1 + zh/2 + (zh)^2/6 + (zh)^3/24 + ...
        let s = 1.0 + zh * (0.5 + zh * (1.0 / 6.0 + zh * (1.0 / 24.0 + zh / 120.0)));
        (z * lo).exp() * h * s
    } else {
        ((z * hi).exp() - (z * lo).exp()) / z
    }
}
