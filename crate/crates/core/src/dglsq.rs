//! Coefficient solve for fixed directions: assembles the least-squares system
//! `A c = b` with `A_{(k,r),(l,j)} = a(psi_lj, psi_kr)` and
//! `b_{(k,r)} = L(psi_kr) - a(u_prev, psi_kr)`, and solves it with per-element
//! spectral normalization followed by a profile Cholesky factorization.

use std::io::Write;

use nalgebra::{DMatrix, DVector};

use crate::basis::{Column, PWExpansion, SideBlock};
use crate::error::{Error, Result};
use crate::forms::{Trace, TraceSpace};
use crate::geom::{C64, CZERO, I};
use crate::linalg::{self, ProfileCholesky};
use crate::mesh::FaceKind;
use crate::planewave::DirectionSet;

/// Relative eigenvalue cutoff of the regularized solve.
pub const TRUNCATION: f64 = 1e-12;

/// Eigenpairs of a diagonal block below this fraction of its largest
/// eigenvalue are recomputed from the block's trace matrix, which resolves
/// them far more accurately than the assembled Gram block.
const REFINE_BELOW: f64 = 1e-6;

/// Local columns of every element and their restrictions to every face side.
#[derive(Debug, Clone)]
pub struct LocalBasis {
    pub cols: Vec<Vec<Column>>,
    /// Per face, one block per side (lower first).
    pub blocks: Vec<Vec<SideBlock>>,
    pub offsets: Vec<usize>,
}

impl LocalBasis {
    pub fn new(space: &TraceSpace, directions: &DirectionSet) -> Self {
        let cols: Vec<Vec<Column>> = directions
            .elements
            .iter()
            .map(|a| crate::basis::element_columns(&space.physics, a))
            .collect();
        let blocks = space
            .mesh
            .faces
            .iter()
            .enumerate()
            .map(|(f, face)| {
                face.sides()
                    .iter()
                    .map(|&s| SideBlock::new(space, f, s, &cols[face.owner(s).unwrap()]))
                    .collect()
            })
            .collect();
        let mut offsets = vec![0];
        for c in &cols {
            offsets.push(offsets.last().unwrap() + c.len());
        }
        Self { cols, blocks, offsets }
    }

    pub fn dim(&self) -> usize {
        *self.offsets.last().unwrap()
    }

    /// `T(sum_kj c_kj psi_kj)`.
    pub fn trace(&self, space: &TraceSpace, c: &DVector<C64>) -> Trace {
        let mut t = space.zero_trace();
        for (f, face) in space.mesh.faces.iter().enumerate() {
            let seg = space.faces[f].range();
            for (s, &side) in face.sides().iter().enumerate() {
                let k = face.owner(side).unwrap();
                let ck = &c.as_slice()[self.offsets[k]..self.offsets[k + 1]];
                self.blocks[f][s].accumulate(ck, &mut t.0[seg.clone()]);
            }
        }
        t
    }

    /// `(a(r, psi_kj))_kj` for a trace `r`.
    pub fn adjoint(&self, space: &TraceSpace, r: &Trace) -> DVector<C64> {
        let mut b = DVector::from_element(self.dim(), CZERO);
        for (f, face) in space.mesh.faces.iter().enumerate() {
            let seg = &r.0[space.faces[f].range()];
            for (s, &side) in face.sides().iter().enumerate() {
                let k = face.owner(side).unwrap();
                let out = &mut b.as_mut_slice()[self.offsets[k]..self.offsets[k + 1]];
                self.blocks[f][s].adjoint_apply(seg, out);
            }
        }
        b
    }

    /// Element `k`'s columns stacked over the traces of its face sides, so
    /// that `Psi_k^H Psi_k` is the diagonal block of `A`.
    pub fn element_trace_matrix(&self, space: &TraceSpace, k: usize) -> DMatrix<C64> {
        let n = self.offsets[k + 1] - self.offsets[k];
        let mut rows: Vec<C64> = Vec::new();
        let mut nrows = 0;
        for (f, face) in space.mesh.faces.iter().enumerate() {
            for (s, &side) in face.sides().iter().enumerate() {
                if face.owner(side) != Some(k) {
                    continue;
                }
                let b = &self.blocks[f][s];
                for q in 0..b.nodes {
                    for c in 0..b.comps {
                        rows.extend((0..n).map(|j| b.phase[q * b.cols + j] * b.t[j * b.comps + c]));
                        nrows += 1;
                    }
                }
            }
        }
        DMatrix::from_row_slice(nrows, n, &rows)
    }

    pub fn expansion(&self, directions: &DirectionSet, c: &DVector<C64>) -> PWExpansion {
        PWExpansion {
            directions: directions.clone(),
            coeffs: self
                .offsets
                .windows(2)
                .map(|w| c.as_slice()[w[0]..w[1]].to_vec())
                .collect(),
        }
    }
}

/// Hermitian positive semidefinite system over the element-supported basis.
#[derive(Debug, Clone, PartialEq)]
pub struct LsqSystem {
    pub a: DMatrix<C64>,
    pub b: DVector<C64>,
    /// Global index of local function `j` on element `k` is `offsets[k] + j`.
    pub offsets: Vec<usize>,
    /// Element pairs `(k, l)`, `k < l`, sharing a face.
    pub couplings: Vec<(usize, usize)>,
}

impl LsqSystem {
    pub fn dim(&self) -> usize {
        self.b.len()
    }

    pub fn dof(&self, elem: usize, local: usize) -> usize {
        self.offsets[elem] + local
    }

    pub fn num_elements(&self) -> usize {
        self.offsets.len() - 1
    }

    fn block_range(&self, k: usize) -> std::ops::Range<usize> {
        self.offsets[k]..self.offsets[k + 1]
    }

    /// Writes `dim dim+1` followed by the rows of `[A | b]` as `re im` pairs.
    pub fn dump(&self, mut w: impl Write) -> std::io::Result<()> {
        let n = self.dim();
        writeln!(w, "{} {}", n, n + 1)?;
        for i in 0..n {
            let mut line = String::new();
            for j in 0..=n {
                let z = if j < n { self.a[(i, j)] } else { self.b[i] };
                if j > 0 {
                    line.push(' ');
                }
                line.push_str(&format!("{:e} {:e}", z.re, z.im));
            }
            writeln!(w, "{line}")?;
        }
        Ok(())
    }
}

/// `M_lj = sum_q w_q conj(e_l(x_q)) e_j(x_q)` over a face, using the tensor
/// structure of the rule.
fn face_phase_gram(space: &TraceSpace, f: usize, rows: &[Column], cols: &[Column]) -> DMatrix<C64> {
    let face = &space.mesh.faces[f];
    let nodes = &space.faces[f];
    let x0 = face.geometry.lo[face.axis];
    let ax = face.axis;
    let mut m = DMatrix::from_fn(rows.len(), cols.len(), |l, j| {
        (I * rows[l].kw[ax] * x0).exp().conj() * (I * cols[j].kw[ax] * x0).exp()
    });
    for rule in &nodes.axis_rules {
        let a = rule.axis;
        let pr: Vec<Vec<C64>> = rows
            .iter()
            .map(|c| rule.nodes.iter().map(|x| (I * c.kw[a] * *x).exp().conj()).collect())
            .collect();
        let pc: Vec<Vec<C64>> = cols
            .iter()
            .map(|c| {
                rule.nodes
                    .iter()
                    .zip(&rule.weights)
                    .map(|(x, w)| (I * c.kw[a] * *x).exp() * *w)
                    .collect()
            })
            .collect();
        for l in 0..rows.len() {
            for j in 0..cols.len() {
                let s: C64 = pr[l].iter().zip(&pc[j]).map(|(a, b)| a * b).sum();
                m[(l, j)] *= s;
            }
        }
    }
    m
}

/// Amplitude inner products `sum_c t2_jc conj(t1_lc)`.
fn amplitude_gram(b1: &SideBlock, b2: &SideBlock) -> DMatrix<C64> {
    let c = b1.comps;
    DMatrix::from_fn(b1.cols, b2.cols, |l, j| {
        let t1 = &b1.t[l * c..(l + 1) * c];
        let t2 = &b2.t[j * c..(j + 1) * c];
        t2.iter().zip(t1).map(|(a, b)| a * b.conj()).sum()
    })
}

/// Assembles `A` and `b = (L - a(u_prev, .))(psi)` for the pre-residue
/// trace `r = G - T(u_prev)`.
pub fn assemble_system(space: &TraceSpace, basis: &LocalBasis, r: &Trace) -> LsqSystem {
    let n = basis.dim();
    let mut a = DMatrix::from_element(n, n, CZERO);
    let mut couplings = Vec::new();
    for (f, face) in space.mesh.faces.iter().enumerate() {
        let sides = face.sides();
        for (s1, &side1) in sides.iter().enumerate() {
            for (s2, &side2) in sides.iter().enumerate() {
                let k1 = face.owner(side1).unwrap();
                let k2 = face.owner(side2).unwrap();
                if k1 > k2 {
                    continue;
                }
                let m = face_phase_gram(space, f, &basis.cols[k1], &basis.cols[k2]);
                let tg = amplitude_gram(&basis.blocks[f][s1], &basis.blocks[f][s2]);
                let (o1, o2) = (basis.offsets[k1], basis.offsets[k2]);
                for l in 0..m.nrows() {
                    for j in 0..m.ncols() {
                        a[(o1 + l, o2 + j)] += m[(l, j)] * tg[(l, j)];
                    }
                }
            }
        }
        if let FaceKind::Interior { lo, hi } = face.kind {
            couplings.push((lo, hi));
        }
    }
    couplings.sort_unstable();
    couplings.dedup();
    // mirror the upper off-diagonal blocks and enforce exact Hermitian symmetry
    for &(k, l) in &couplings {
        for i in basis.offsets[k]..basis.offsets[k + 1] {
            for j in basis.offsets[l]..basis.offsets[l + 1] {
                a[(j, i)] = a[(i, j)].conj();
            }
        }
    }
    for k in 0..basis.cols.len() {
        let r = basis.offsets[k]..basis.offsets[k + 1];
        for i in r.clone() {
            a[(i, i)] = C64::new(a[(i, i)].re, 0.0);
            for j in r.start..i {
                let h = 0.5 * (a[(i, j)] + a[(j, i)].conj());
                a[(i, j)] = h;
                a[(j, i)] = h.conj();
            }
        }
    }
    let b = basis.adjoint(space, r);
    LsqSystem { a, b, offsets: basis.offsets.clone(), couplings }
}

/// Output of the regularized solve.
#[derive(Debug, Clone, PartialEq)]
pub struct SolveInfo {
    pub coeffs: DVector<C64>,
    /// `||A c - b|| / ||b||` (zero when `b = 0`).
    pub relative_residual: f64,
    /// Dimension of the retained space.
    pub rank: usize,
    /// Eigenpairs of the diagonal blocks that lost modes to the cutoff.
    pub truncated: Vec<BlockTruncation>,
}

/// Spectrum of one element block split at the truncation cutoff.
#[derive(Debug, Clone, PartialEq)]
pub struct BlockTruncation {
    pub element: usize,
    pub kept_values: Vec<f64>,
    pub kept: DMatrix<C64>,
    pub dropped_values: Vec<f64>,
    pub dropped: DMatrix<C64>,
}

/// Solves `A c = b` on the space spanned by eigenvectors of each diagonal
/// block with eigenvalues above `TRUNCATION` times that block's largest one.
///
/// Each element block is mapped to the identity by `S_k = V_k Lambda_k^{-1/2}`;
/// the normalized system `S^H A S y = S^H b` keeps the element coupling
/// pattern and is factored by profile Cholesky, with a truncated
/// eigendecomposition as fallback. For a single element this is exactly the
/// truncated eigensolve of `A`.
pub fn solve_regularized(sys: &LsqSystem) -> Result<SolveInfo> {
    solve_regularized_with(sys, None)
}

/// [`solve_regularized`] where `trace_matrix(k)` returns `Psi_k` with
/// `Psi_k^H Psi_k = A_kk`; used to refine nearly singular blocks.
pub fn solve_regularized_with(
    sys: &LsqSystem,
    trace_matrix: Option<&dyn Fn(usize) -> DMatrix<C64>>,
) -> Result<SolveInfo> {
    let n = sys.dim();
    let bnorm = sys.b.norm();
    if bnorm == 0.0 {
        return Ok(SolveInfo { coeffs: DVector::from_element(n, CZERO), relative_residual: 0.0, rank: 0, truncated: Vec::new() });
    }
    let amax = sys.a.iter().map(|z| z.norm()).fold(0.0, f64::max);
    if !(amax > 0.0) || !amax.is_finite() {
        return Err(Error::DegenerateSystem);
    }

    let ne = sys.num_elements();
    let mut scalings: Vec<DMatrix<C64>> = Vec::with_capacity(ne);
    let mut red = vec![0];
    let mut truncated = Vec::new();
    for k in 0..ne {
        let r = sys.block_range(k);
        let block = sys.a.view((r.start, r.start), (r.len(), r.len())).into_owned();
        let (mut vals, mut vecs) = linalg::hermitian_eigen(&block);
        if let (Some(tm), Some(&l0), Some(&l1)) = (trace_matrix, vals.first(), vals.last()) {
            if l0 < REFINE_BELOW * l1 {
                linalg::refine_small_eigenpairs(&mut vals, &mut vecs, &tm(k), REFINE_BELOW * l1);
            }
        }
        let lmax = vals.last().copied().unwrap_or(0.0);
        let keep: Vec<usize> = (0..vals.len())
            .filter(|&i| lmax > 0.0 && vals[i] > TRUNCATION * lmax)
            .collect();
        let s = DMatrix::from_fn(r.len(), keep.len(), |row, c| {
            vecs[(row, keep[c])] / vals[keep[c]].sqrt()
        });
        if keep.len() < vals.len() {
            let drop: Vec<usize> = (0..vals.len()).filter(|i| !keep.contains(i)).collect();
            let pick = |idx: &[usize]| DMatrix::from_fn(r.len(), idx.len(), |row, c| vecs[(row, idx[c])]);
            truncated.push(BlockTruncation {
                element: k,
                kept_values: keep.iter().map(|&i| vals[i]).collect(),
                kept: pick(&keep),
                dropped_values: drop.iter().map(|&i| vals[i]).collect(),
                dropped: pick(&drop),
            });
        }
        red.push(red.last().unwrap() + keep.len());
        scalings.push(s);
    }
    let m = *red.last().unwrap();
    if m == 0 {
        return Err(Error::DegenerateSystem);
    }

    let mut at = DMatrix::from_element(m, m, CZERO);
    for k in 0..ne {
        for i in red[k]..red[k + 1] {
            at[(i, i)] = C64::new(1.0, 0.0);
        }
    }
    let mut lowest = (0..ne).collect::<Vec<_>>();
    for &(k, l) in &sys.couplings {
        lowest[l] = lowest[l].min(k);
        let (rk, rl) = (sys.block_range(k), sys.block_range(l));
        let akl = sys.a.view((rk.start, rl.start), (rk.len(), rl.len()));
        let blk = linalg::cmul(&linalg::cmul(&scalings[k].adjoint(), &akl.into_owned()), &scalings[l]);
        for i in 0..blk.nrows() {
            for j in 0..blk.ncols() {
                at[(red[k] + i, red[l] + j)] = blk[(i, j)];
                at[(red[l] + j, red[k] + i)] = blk[(i, j)].conj();
            }
        }
    }
    let mut bt = DVector::from_element(m, CZERO);
    for k in 0..ne {
        let r = sys.block_range(k);
        let bk = scalings[k].adjoint() * sys.b.rows(r.start, r.len());
        bt.rows_mut(red[k], bk.len()).copy_from(&bk);
    }

    let mut first = vec![0; m];
    for k in 0..ne {
        for i in red[k]..red[k + 1] {
            first[i] = red[lowest[k]];
        }
    }
    let y = match ProfileCholesky::factor(|i, j| at[(i, j)], m, &first) {
        Ok(f) => DVector::from_vec(f.solve(bt.as_slice())),
        Err(_) => linalg::truncated_eigen_solve(&at, &bt, TRUNCATION).0,
    };

    let mut c = DVector::from_element(n, CZERO);
    for k in 0..ne {
        let r = sys.block_range(k);
        let ck = &scalings[k] * y.rows(red[k], red[k + 1] - red[k]);
        c.rows_mut(r.start, r.len()).copy_from(&ck);
    }
    let relative_residual = (&sys.a * &c - &sys.b).norm() / bnorm;
    Ok(SolveInfo { coeffs: c, relative_residual, rank: m, truncated })
}

/// Result of one coefficient solve.
#[derive(Debug, Clone)]
pub struct DglsqOutput {
    pub candidate: PWExpansion,
    pub trace: Trace,
    pub coeffs: DVector<C64>,
    pub basis: LocalBasis,
    pub info: SolveInfo,
    pub system: LsqSystem,
}

/// Best approximation of the error `u - u_prev` in the span of the given
/// directions; `r = G - T(u_prev)`.
pub fn dglsq_r(space: &TraceSpace, directions: &DirectionSet, r: &Trace) -> Result<DglsqOutput> {
    let basis = LocalBasis::new(space, directions);
    let system = assemble_system(space, &basis, r);
    let info = solve_regularized_with(&system, Some(&|k| basis.element_trace_matrix(space, k)))?;
    let trace = basis.trace(space, &info.coeffs);
    let candidate = basis.expansion(directions, &info.coeffs);
    Ok(DglsqOutput { candidate, trace, coeffs: info.coeffs.clone(), basis, info, system })
}
