//! Conforming uniform partitions of axis-aligned boxes.
//!
//! Elements are indexed lexicographically by cell coordinates with the x index
//! varying fastest, so the lower-indexed owner of an interior face is always
//! the element on the negative side of the face.

use crate::error::{Error, Result};
use crate::geom::Vec3;

/// Axis-aligned box. In two dimensions the third axis is collapsed to `[0, 0]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoxDomain {
    pub dim: usize,
    pub lo: Vec3,
    pub hi: Vec3,
}

impl BoxDomain {
    pub fn new_2d(lo: [f64; 2], hi: [f64; 2]) -> Self {
        Self {
            dim: 2,
            lo: [lo[0], lo[1], 0.0],
            hi: [hi[0], hi[1], 0.0],
        }
    }

    pub fn new_3d(lo: Vec3, hi: Vec3) -> Self {
        Self { dim: 3, lo, hi }
    }

    pub fn unit_square() -> Self {
        Self::new_2d([0.0, 0.0], [1.0, 1.0])
    }

    pub fn unit_cube() -> Self {
        Self::new_3d([0.0; 3], [1.0; 3])
    }

    pub fn extent(&self, axis: usize) -> f64 {
        self.hi[axis] - self.lo[axis]
    }

    /// Lebesgue measure (area in 2D, volume in 3D).
    pub fn measure(&self) -> f64 {
        (0..self.dim).map(|a| self.extent(a)).product()
    }

    /// Measure of the boundary (perimeter in 2D, surface area in 3D).
    pub fn boundary_measure(&self) -> f64 {
        (0..self.dim)
            .map(|a| {
                2.0 * (0..self.dim)
                    .filter(|&b| b != a)
                    .map(|b| self.extent(b))
                    .product::<f64>()
            })
            .sum()
    }

    pub fn center(&self) -> Vec3 {
        std::array::from_fn(|a| 0.5 * (self.lo[a] + self.hi[a]))
    }

    /// Whether `x` lies in the closed box.
    pub fn contains_closed(&self, x: &Vec3) -> bool {
        (0..self.dim).all(|a| x[a] >= self.lo[a] && x[a] <= self.hi[a])
    }

    pub fn max_edge(&self) -> f64 {
        (0..self.dim).map(|a| self.extent(a)).fold(0.0, f64::max)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FaceKind {
    /// Shared by elements `lo < hi`; the stored normal points out of `lo`.
    Interior { lo: usize, hi: usize },
    /// Lies on the domain boundary; the stored normal points out of the domain.
    Boundary { elem: usize },
}

/// Which owner of a face a trace is taken from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    /// The boundary element, or the lower-indexed owner of an interior face.
    Lower,
    /// The higher-indexed owner of an interior face.
    Upper,
}

/// Axis-aligned facet.
#[derive(Debug, Clone, PartialEq)]
pub struct Face {
    pub kind: FaceKind,
    /// Axis the facet is perpendicular to.
    pub axis: usize,
    /// Facet box; `lo[axis] == hi[axis]`.
    pub geometry: BoxDomain,
    pub normal: Vec3,
}

impl Face {
    pub fn is_boundary(&self) -> bool {
        matches!(self.kind, FaceKind::Boundary { .. })
    }

    /// Element owning the given side.
    pub fn owner(&self, side: Side) -> Option<usize> {
        match (self.kind, side) {
            (FaceKind::Boundary { elem }, Side::Lower) => Some(elem),
            (FaceKind::Boundary { .. }, Side::Upper) => None,
            (FaceKind::Interior { lo, .. }, Side::Lower) => Some(lo),
            (FaceKind::Interior { hi, .. }, Side::Upper) => Some(hi),
        }
    }

    /// Sides present on this face, lower first.
    pub fn sides(&self) -> &'static [Side] {
        if self.is_boundary() {
            &[Side::Lower]
        } else {
            &[Side::Lower, Side::Upper]
        }
    }

    /// Outward unit normal seen from `side`.
    pub fn outward_normal(&self, side: Side) -> Vec3 {
        match side {
            Side::Lower => self.normal,
            Side::Upper => [-self.normal[0], -self.normal[1], -self.normal[2]],
        }
    }

    /// Length (2D) or area (3D).
    pub fn measure(&self) -> f64 {
        (0..self.geometry.dim)
            .filter(|&a| a != self.axis)
            .map(|a| self.geometry.extent(a))
            .product()
    }

    /// Longest in-plane extent.
    pub fn diameter(&self) -> f64 {
        (0..self.geometry.dim)
            .filter(|&a| a != self.axis)
            .map(|a| self.geometry.extent(a))
            .fold(0.0, f64::max)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Mesh {
    pub dim: usize,
    pub domain: BoxDomain,
    pub divisions: Vec<usize>,
    pub elements: Vec<BoxDomain>,
    pub faces: Vec<Face>,
    /// Faces incident to each element, as `(face index, side)`.
    pub element_faces: Vec<Vec<(usize, Side)>>,
    h: f64,
}

impl Mesh {
    /// Builds the uniform `divisions` partition of `domain`.
    pub fn uniform(domain: BoxDomain, divisions: &[usize]) -> Result<Self> {
        let dim = domain.dim;
        if dim != 2 && dim != 3 {
            return Err(Error::InvalidConfig(format!("dimension must be 2 or 3, got {dim}")));
        }
        if divisions.len() != dim {
            return Err(Error::InvalidConfig(format!(
                "expected {dim} division counts, got {}",
                divisions.len()
            )));
        }
        if divisions.contains(&0) {
            return Err(Error::InvalidConfig("divisions must be at least 1 per axis".into()));
        }
        if (0..dim).any(|a| !(domain.extent(a) > 0.0)) {
            return Err(Error::InvalidConfig("domain box is degenerate".into()));
        }

        let mut div = [1usize; 3];
        div[..dim].copy_from_slice(divisions);
        let step: Vec3 = std::array::from_fn(|a| {
            if a < dim {
                domain.extent(a) / div[a] as f64
            } else {
                0.0
            }
        });
        let stride = [1, div[0], div[0] * div[1]];
        let index = |c: [usize; 3]| c[0] + div[0] * (c[1] + div[1] * c[2]);

        let mut elements = Vec::with_capacity(div.iter().product());
        for iz in 0..div[2] {
            for iy in 0..div[1] {
                for ix in 0..div[0] {
                    let c = [ix, iy, iz];
                    let mut lo = [0.0; 3];
                    let mut hi = [0.0; 3];
                    for a in 0..dim {
                        lo[a] = domain.lo[a] + c[a] as f64 * step[a];
                        // the last cell snaps to the domain bound exactly
                        hi[a] = if c[a] + 1 == div[a] {
                            domain.hi[a]
                        } else {
                            domain.lo[a] + (c[a] + 1) as f64 * step[a]
                        };
                    }
                    elements.push(BoxDomain { dim, lo, hi });
                }
            }
        }

        let mut faces = Vec::new();
        let facet = |elem: &BoxDomain, axis: usize, at_hi: bool| {
            let mut g = *elem;
            let x = if at_hi { elem.hi[axis] } else { elem.lo[axis] };
            g.lo[axis] = x;
            g.hi[axis] = x;
            g
        };
        for axis in 0..dim {
            let mut e_axis = [0.0; 3];
            e_axis[axis] = 1.0;
            let mut neg = [0.0; 3];
            neg[axis] = -1.0;
            for iz in 0..div[2] {
                for iy in 0..div[1] {
                    for ix in 0..div[0] {
                        let c = [ix, iy, iz];
                        let k = index(c);
                        let elem = &elements[k];
                        if c[axis] == 0 {
                            faces.push(Face {
                                kind: FaceKind::Boundary { elem: k },
                                axis,
                                geometry: facet(elem, axis, false),
                                normal: neg,
                            });
                        }
                        if c[axis] + 1 < div[axis] {
                            faces.push(Face {
                                kind: FaceKind::Interior { lo: k, hi: k + stride[axis] },
                                axis,
                                geometry: facet(elem, axis, true),
                                normal: e_axis,
                            });
                        } else {
                            faces.push(Face {
                                kind: FaceKind::Boundary { elem: k },
                                axis,
                                geometry: facet(elem, axis, true),
                                normal: e_axis,
                            });
                        }
                    }
                }
            }
        }

        let mut element_faces = vec![Vec::new(); elements.len()];
        for (f, face) in faces.iter().enumerate() {
            for &side in face.sides() {
                element_faces[face.owner(side).unwrap()].push((f, side));
            }
        }

        let h = elements.iter().map(BoxDomain::max_edge).fold(0.0, f64::max);
        Ok(Self {
            dim,
            domain,
            divisions: divisions.to_vec(),
            elements,
            faces,
            element_faces,
            h,
        })
    }

    /// Mesh width: largest element edge.
    pub fn mesh_width(&self) -> f64 {
        self.h
    }

    pub fn num_elements(&self) -> usize {
        self.elements.len()
    }

    pub fn interior_faces(&self) -> impl Iterator<Item = &Face> {
        self.faces.iter().filter(|f| !f.is_boundary())
    }

    pub fn boundary_faces(&self) -> impl Iterator<Item = &Face> {
        self.faces.iter().filter(|f| f.is_boundary())
    }

    /// Largest `|k - j|` over interior faces; zero for a single element.
    pub fn element_bandwidth(&self) -> usize {
        self.faces
            .iter()
            .filter_map(|f| match f.kind {
                FaceKind::Interior { lo, hi } => Some(hi - lo),
                FaceKind::Boundary { .. } => None,
            })
            .max()
            .unwrap_or(0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::HashSet;

    fn counts(m: &Mesh) -> (usize, usize, usize) {
        (m.num_elements(), m.interior_faces().count(), m.boundary_faces().count())
    }

    #[test]
    fn face_counts() {
        let m = Mesh::uniform(BoxDomain::unit_square(), &[2, 2]).unwrap();
        assert_eq!(counts(&m), (4, 4, 8));
        let m = Mesh::uniform(BoxDomain::unit_cube(), &[2, 2, 2]).unwrap();
        assert_eq!(counts(&m), (8, 12, 24));
        let m = Mesh::uniform(BoxDomain::unit_square(), &[1, 1]).unwrap();
        assert_eq!(counts(&m), (1, 0, 4));
    }

    #[test]
    fn widths() {
        let m = Mesh::uniform(BoxDomain::unit_square(), &[2, 2]).unwrap();
        assert_eq!(m.mesh_width(), 0.5);
        let m = Mesh::uniform(BoxDomain::unit_square(), &[4, 2]).unwrap();
        assert_eq!(m.mesh_width(), 0.5);
        let m = Mesh::uniform(BoxDomain::new_3d([-0.5; 3], [0.5; 3]), &[2, 2, 2]).unwrap();
        assert_eq!(m.mesh_width(), 0.5);
    }

    #[test]
    fn rejects_bad_divisions() {
        assert!(matches!(
            Mesh::uniform(BoxDomain::unit_square(), &[0, 2]),
            Err(Error::InvalidConfig(_))
        ));
        assert!(Mesh::uniform(BoxDomain::unit_square(), &[2]).is_err());
        assert!(Mesh::uniform(BoxDomain::new_2d([0.0, 0.0], [0.0, 1.0]), &[1, 1]).is_err());
    }

    #[test]
    fn invariants_hold_on_mixed_grids() {
        for (domain, div) in [
            (BoxDomain::unit_square(), vec![3, 5]),
            (BoxDomain::new_2d([-1.0, 2.0], [0.5, 2.25]), vec![4, 1]),
            (BoxDomain::new_3d([-0.5; 3], [0.5, 1.0, 0.25]), vec![2, 3, 1]),
        ] {
            let m = Mesh::uniform(domain, &div).unwrap();
            let vol: f64 = m.elements.iter().map(BoxDomain::measure).sum();
            assert!((vol - domain.measure()).abs() < 1e-12);
            let surf: f64 = m.boundary_faces().map(Face::measure).sum();
            assert!((surf - domain.boundary_measure()).abs() < 1e-12);

            let mut seen = HashSet::new();
            for f in &m.faces {
                assert!((crate::geom::norm(&f.normal) - 1.0).abs() < 1e-15);
                if let FaceKind::Interior { lo, hi } = f.kind {
                    assert!(lo < hi);
                    assert!(seen.insert((lo, hi)), "duplicate interior face");
                    // facet lies on the shared boundary, normal points from lo to hi
                    let a = f.axis;
                    assert_eq!(m.elements[lo].hi[a], f.geometry.lo[a]);
                    assert_eq!(m.elements[hi].lo[a], f.geometry.lo[a]);
                    assert_eq!(f.normal[a], 1.0);
                }
            }
            // every element is closed by 2*dim facets
            for ef in &m.element_faces {
                assert_eq!(ef.len(), 2 * m.dim);
            }
        }
    }
}
