//! Fixed benchmark fixtures shared by the bench targets.

use std::f64::consts::PI;

use dgpw_core::forms::Trace;
use dgpw_core::{problems, DirectionSet, Mesh, MaxwellParams, TraceSpace, Width, C64};

/// Trace space, load trace and initial directions for one benchmark case.
pub struct Fixture {
    pub space: TraceSpace,
    pub load: Trace,
    pub directions: DirectionSet,
}

/// 2D waveguide at `omega = 4 pi` on a `div x div` mesh.
pub fn waveguide(div: usize, width: usize) -> Fixture {
    let p = problems::waveguide_exact_2d(4.0 * PI, None).expect("valid waveguide");
    let mesh = Mesh::uniform(p.domain, &[div, div]).expect("valid mesh");
    let space = TraceSpace::new(mesh, p.physics, None).expect("valid space");
    let load = p.load_trace(&space);
    let directions = Width::Planar(width).init(div * div).expect("valid width");
    Fixture { space, load, directions }
}

/// Maxwell dipole at `omega = pi` on a `2 x 2 x 2` mesh.
pub fn dipole(m_star: usize) -> Fixture {
    let params = MaxwellParams::new(PI, C64::new(1.0, 1.0));
    let p = problems::maxwell_dipole(params, [0.6; 3], [0.0, 0.0, 1.0], 1.0).expect("valid dipole");
    let mesh = Mesh::uniform(p.domain, &[2, 2, 2]).expect("valid mesh");
    let space = TraceSpace::new(mesh, p.physics, None).expect("valid space");
    let load = p.load_trace(&space);
    let directions = Width::Spherical(m_star).init(8).expect("valid width");
    Fixture { space, load, directions }
}
