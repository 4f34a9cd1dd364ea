//! Generation of one basis function: alternate Adam ascent steps on the
//! direction angles with coefficient re-solves, then normalize.

use nalgebra::{DMatrix, DVector};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::basis::PWExpansion;
use crate::dglsq::{self, BlockTruncation, DglsqOutput, LocalBasis, LsqSystem};
use crate::error::{Error, Result};
use crate::forms::{self, Trace, TraceSpace, NORM_FLOOR};
use crate::geom::{self, C64, CZERO, I};
use crate::linalg;
use crate::planewave::{self, DirectionSet};

/// Network width on each element.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Width {
    /// `n` directions in the plane.
    Planar(usize),
    /// `m*` inclinations and `2 m*` azimuths, `n = 2 m*^2` directions.
    Spherical(usize),
}

impl Width {
    pub fn directions(&self) -> usize {
        match *self {
            Width::Planar(n) => n,
            Width::Spherical(m) => 2 * m * m,
        }
    }

    pub fn init(&self, num_elements: usize) -> Result<DirectionSet> {
        match *self {
            Width::Planar(n) => planewave::init_directions_2d(n, num_elements),
            Width::Spherical(m) => planewave::init_directions_3d(m, num_elements),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainConfig {
    pub max_epochs: usize,
    /// Training stops once `||grad eta||_inf` falls below this.
    pub grad_tol: f64,
    pub lr0: f64,
    pub seed: u64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            max_epochs: 500,
            grad_tol: 1e-6,
            lr0: 0.01,
            seed: 0,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.grad_tol > 0.0) {
            return Err(Error::InvalidConfig("grad_tol must be positive".into()));
        }
        if !(self.lr0 > 0.0) {
            return Err(Error::InvalidConfig("lr0 must be positive".into()));
        }
        if !(0.0..1.0).contains(&self.beta1) || !(0.0..1.0).contains(&self.beta2) {
            return Err(Error::InvalidConfig("Adam betas must lie in [0, 1)".into()));
        }
        Ok(())
    }
}

/// Adam moments with the `lr0 / sqrt(k)` step schedule.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub m: Vec<f64>,
    pub v: Vec<f64>,
    pub step: u64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub lr0: f64,
}

impl AdamState {
    pub fn new(len: usize, cfg: &TrainConfig) -> Self {
        Self {
            m: vec![0.0; len],
            v: vec![0.0; len],
            step: 0,
            beta1: cfg.beta1,
            beta2: cfg.beta2,
            eps: cfg.eps,
            lr0: cfg.lr0,
        }
    }
}

/// One bias-corrected Adam update; `ascend` moves along the gradient.
pub fn adam_step(state: &mut AdamState, params: &mut [f64], grad: &[f64], ascend: bool) {
    state.step += 1;
    let k = state.step as f64;
    let lr = state.lr0 / k.sqrt();
    let c1 = 1.0 - state.beta1.powf(k);
    let c2 = 1.0 - state.beta2.powf(k);
    let sign = if ascend { 1.0 } else { -1.0 };
    for i in 0..params.len() {
        state.m[i] = state.beta1 * state.m[i] + (1.0 - state.beta1) * grad[i];
        state.v[i] = state.beta2 * state.v[i] + (1.0 - state.beta2) * grad[i] * grad[i];
        let mh = state.m[i] / c1;
        let vh = state.v[i] / c2;
        params[i] += sign * lr * mh / (vh.sqrt() + state.eps);
    }
}

/// Adds `Re <d, (d Psi_k / d angle) c_k>` on face side `(f, s)` to the
/// angle gradient `grad` of the owning element `k`.
fn pair_side(space: &TraceSpace, basis: &LocalBasis, f: usize, s: usize, d: &[C64], ck: &[C64], grad: &mut [f64]) {
    let kappa = space.physics.wavenumber();
    let face = &space.mesh.faces[f];
    let side = face.sides()[s];
    let k = face.owner(side).unwrap();
    let block = &basis.blocks[f][s];
    let cols = &basis.cols[k];
    let nodes = &space.faces[f];
    let comps = block.comps;
    let seg = &d[nodes.range()];

    // trace amplitudes of the column derivatives, column-major by partial
    let mut dt = Vec::new();
    for col in cols {
        for p in &col.partials {
            let mut buf = [CZERO; 6];
            space.physics.side_trace(face, side, &p.damp, &mut buf[..comps]);
            dt.push(buf);
        }
    }

    for (q, x) in nodes.points.iter().enumerate() {
        let dq = &seg[q * comps..(q + 1) * comps];
        let mut pi = 0;
        for (j, col) in cols.iter().enumerate() {
            let w = ck[j] * block.phase[q * block.cols + j];
            let tj = &block.t[j * comps..(j + 1) * comps];
            let sj: C64 = dq.iter().zip(tj).map(|(a, b)| a * b.conj()).sum();
            let wc = w.conj();
            for p in &col.partials {
                let sd: C64 = dq.iter().zip(&dt[pi][..comps]).map(|(a, b)| a * b.conj()).sum();
                let rate = (I * kappa * geom::dot(x, &p.dw)).conj();
                grad[p.angle] += (wc * (rate * sj + sd)).re;
                pi += 1;
            }
        }
    }
}

/// Dropped modes closer than this to the smallest kept eigenvalue are
/// handled one by one; the rest through a geometric series in the ratio.
const NEAR_CUTOFF: f64 = 1e-3;
const SERIES_TERMS: i32 = 6;

/// Pairs `(x, z)` of element-local vectors such that the gradient term of the
/// moving retained subspace is `sum Re(<Psi x, dPsi z> + <Psi z, dPsi x>)`.
///
/// With kept eigenpairs `(l_i, v_i)`, dropped `(l_j, v_j)`, `y = V_kept^H c`
/// and `rho = V_dropped^H (b - A c)` this is the first-order perturbation sum
/// over `conj(rho_j) y_i / (l_i - l_j)`.
fn truncation_pairs(tr: &BlockTruncation, y: &DVector<C64>, rho: &DVector<C64>) -> Vec<(DVector<C64>, DVector<C64>)> {
    let one = C64::new(1.0, 0.0);
    let smin = tr.kept_values[0];
    let kept_weighted = |f: &dyn Fn(f64) -> f64| {
        let mut a = DVector::from_element(tr.kept.nrows(), CZERO);
        for (i, &li) in tr.kept_values.iter().enumerate() {
            a.axpy(y[i] * f(li), &tr.kept.column(i), one);
        }
        a
    };
    let mut pairs = Vec::new();
    let mut far = Vec::new();
    for (j, &lj) in tr.dropped_values.iter().enumerate() {
        if lj > NEAR_CUTOFF * smin {
            let a = kept_weighted(&|li| 1.0 / (li - lj)) * rho[j].conj();
            pairs.push((tr.dropped.column(j).into_owned(), a));
        } else {
            far.push(j);
        }
    }
    // 1/(l_i - l_j) = sum_m (l_j/s)^m (s/l_i)^m / l_i with s the smallest kept value
    if !far.is_empty() {
        for m in 0..SERIES_TERMS {
            let mut w = DVector::from_element(tr.kept.nrows(), CZERO);
            for &j in &far {
                let scale = (tr.dropped_values[j].max(0.0) / smin).powi(m);
                w.axpy(rho[j] * scale, &tr.dropped.column(j), one);
            }
            let a = kept_weighted(&|li| (smin / li).powi(m) / li);
            pairs.push((w, a));
        }
    }
    pairs
}

/// Adds `sum_p Re <Psi_k x_p, (d Psi_k / d angle) z_p>` over face side
/// `(f, s)` for the columns `x_p`, `z_p` of `xs`, `zs`.
fn pair_side_batch(
    space: &TraceSpace,
    basis: &LocalBasis,
    f: usize,
    s: usize,
    xs: &DMatrix<C64>,
    zs: &DMatrix<C64>,
    grad: &mut [f64],
) {
    let kappa = space.physics.wavenumber();
    let face = &space.mesh.faces[f];
    let side = face.sides()[s];
    let cols = &basis.cols[face.owner(side).unwrap()];
    let block = &basis.blocks[f][s];
    let nodes = &space.faces[f];
    let (n, comps) = (block.cols, block.comps);

    let psi = DMatrix::from_fn(block.nodes * comps, n, |r, j| block.phase[(r / comps) * n + j] * block.t[j * comps + r % comps]);
    let d = linalg::cmul(&psi, xs);
    let zt = zs.adjoint();
    // h[c][(q, j)] = sum_p d_p(q, c) conj(z_p(j))
    let h: Vec<DMatrix<C64>> = (0..comps)
        .map(|c| {
            let dc = DMatrix::from_fn(block.nodes, d.ncols(), |q, p| d[(q * comps + c, p)]);
            linalg::cmul(&dc, &zt)
        })
        .collect();

    let mut dt = Vec::new();
    for col in cols {
        for p in &col.partials {
            let mut buf = [CZERO; 6];
            space.physics.side_trace(face, side, &p.damp, &mut buf[..comps]);
            dt.push(buf);
        }
    }
    for (q, x) in nodes.points.iter().enumerate() {
        let mut pi = 0;
        for (j, col) in cols.iter().enumerate() {
            let tj = &block.t[j * comps..(j + 1) * comps];
            let sj: C64 = (0..comps).map(|c| h[c][(q, j)] * tj[c].conj()).sum();
            let pc = block.phase[q * n + j].conj();
            for p in &col.partials {
                let sd: C64 = (0..comps).map(|c| h[c][(q, j)] * dt[pi][c].conj()).sum();
                let rate = (I * kappa * geom::dot(x, &p.dw)).conj();
                grad[p.angle] += (pc * (rate * sj + sd)).re;
                pi += 1;
            }
        }
    }
}

/// `eta(u_prev, v)` and its gradient with respect to the flattened angles,
/// holding the coefficients of `v` fixed. `r = G - T(u_prev)`, `t = T(v)`.
/// Face contributions are accumulated in an order drawn from `rng`.
///
/// When the coefficient solve dropped modes of an element block, the retained
/// subspace itself moves with the angles; `truncated` supplies the split
/// spectra so that this motion enters the gradient through first-order
/// eigenvector perturbation.
#[allow(clippy::too_many_arguments)]
pub fn grad_eta(
    space: &TraceSpace,
    basis: &LocalBasis,
    directions: &DirectionSet,
    coeffs: &DVector<C64>,
    truncated: &[BlockTruncation],
    r: &Trace,
    t: &Trace,
    rng: &mut ChaCha8Rng,
) -> Result<(f64, Vec<f64>)> {
    let norm = t.norm();
    if norm <= NORM_FLOOR {
        return Err(Error::DegenerateCandidate(norm));
    }
    let eta = forms::residual(r, &space.zero_trace(), t)? / norm;
    let d: Vec<C64> = r.0.iter().zip(&t.0).map(|(r, t)| r - t * (eta / norm)).collect();

    let mut angle_offsets = vec![0];
    for e in &directions.elements {
        angle_offsets.push(angle_offsets.last().unwrap() + e.num_angles());
    }
    let mut grad = vec![0.0; *angle_offsets.last().unwrap()];
    let sides_of = |f: usize| (0..space.mesh.faces[f].sides().len()).map(move |s| (f, s));
    let owner = |f: usize, s: usize| {
        let face = &space.mesh.faces[f];
        face.owner(face.sides()[s]).unwrap()
    };

    let mut order: Vec<(usize, usize)> = (0..space.mesh.faces.len()).flat_map(sides_of).collect();
    order.shuffle(rng);
    for &(f, s) in &order {
        let k = owner(f, s);
        let ck = &coeffs.as_slice()[basis.offsets[k]..basis.offsets[k + 1]];
        let g = &mut grad[angle_offsets[k]..angle_offsets[k + 1]];
        pair_side(space, basis, f, s, &d, ck, g);
    }

    if !truncated.is_empty() {
        // d(Psi Q) y with the kept eigenvectors Q rotating into the dropped ones
        let rc = basis.adjoint(space, &Trace(d.clone()));
        for tr in truncated {
            let k = tr.element;
            let range = basis.offsets[k]..basis.offsets[k + 1];
            let y = tr.kept.adjoint() * coeffs.rows(range.start, range.len());
            let rho = tr.dropped.adjoint() * rc.rows(range.start, range.len());
            let sides: Vec<(usize, usize)> = order.iter().copied().filter(|&(f, s)| owner(f, s) == k).collect();
            let g = &mut grad[angle_offsets[k]..angle_offsets[k + 1]];
            let pairs = truncation_pairs(tr, &y, &rho);
            let n = range.len();
            let q = 2 * pairs.len();
            let mut xs = DMatrix::from_element(n, q, CZERO);
            let mut zs = DMatrix::from_element(n, q, CZERO);
            for (p, (x, z)) in pairs.iter().enumerate() {
                xs.set_column(2 * p, x);
                zs.set_column(2 * p, z);
                xs.set_column(2 * p + 1, z);
                zs.set_column(2 * p + 1, x);
            }
            for &(f, s) in &sides {
                pair_side_batch(space, basis, f, s, &xs, &zs, g);
            }
        }
    }

    for g in grad.iter_mut() {
        *g /= norm;
    }
    Ok((eta, grad))
}

/// A normalized basis function with its cached trace.
#[derive(Debug, Clone, PartialEq)]
pub struct BasisFunction {
    pub expansion: PWExpansion,
    pub trace: Trace,
    /// Directions per element.
    pub width: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpochRecord {
    pub epoch: usize,
    pub eta: f64,
    pub grad_inf: f64,
    /// `J(u_prev + v)`.
    pub loss: f64,
}

#[derive(Debug, Clone)]
pub struct Augmented {
    pub basis: BasisFunction,
    /// `eta(u_prev, phi)`.
    pub eta: f64,
    /// Adam steps taken.
    pub epochs: usize,
    pub history: Vec<EpochRecord>,
    /// Coefficient system of the returned candidate.
    pub system: LsqSystem,
}

struct Evaluated {
    directions: DirectionSet,
    out: DglsqOutput,
    eta: f64,
    grad: Vec<f64>,
}

fn evaluate(space: &TraceSpace, directions: DirectionSet, r: &Trace, rng: &mut ChaCha8Rng) -> Result<Evaluated> {
    let out = dglsq::dglsq_r(space, &directions, r)?;
    let (eta, grad) = grad_eta(space, &out.basis, &directions, &out.coeffs, &out.info.truncated, r, &out.trace, rng)?;
    Ok(Evaluated { directions, out, eta, grad })
}

fn inf_norm(g: &[f64]) -> f64 {
    g.iter().fold(0.0, |m, x| m.max(x.abs()))
}

/// Trains a width-`width` network against the residual of `u_prev` and
/// returns the best candidate found, normalized to unit energy.
///
/// Fails with [`Error::DegenerateCandidate`] when the best approximation of
/// the residual vanishes, i.e. `u_prev` is already optimal for this width.
pub fn augment_basis(
    space: &TraceSpace,
    g: &Trace,
    u_prev: &Trace,
    width: Width,
    cfg: &TrainConfig,
) -> Result<Augmented> {
    cfg.validate()?;
    let r = g.sub(u_prev);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut current = evaluate(space, width.init(space.mesh.num_elements())?, &r, &mut rng)?;
    let loss_of = |t: &Trace| forms::loss(&r, t).unwrap_or(f64::NAN);
    let mut history = vec![EpochRecord {
        epoch: 0,
        eta: current.eta,
        grad_inf: inf_norm(&current.grad),
        loss: loss_of(&current.out.trace),
    }];
    let mut adam = AdamState::new(current.grad.len(), cfg);
    let mut best: Option<Evaluated> = None;
    let mut epochs = 0;
    for epoch in 1..=cfg.max_epochs {
        if inf_norm(&current.grad) < cfg.grad_tol {
            break;
        }
        let mut angles = current.directions.flat();
        adam_step(&mut adam, &mut angles, &current.grad, true);
        let mut dirs = current.directions.clone();
        dirs.set_flat(&angles);
        dirs.normalize();
        let next = match evaluate(space, dirs, &r, &mut rng) {
            Ok(e) => e,
            Err(Error::DegenerateCandidate(_)) => break,
            Err(e) => return Err(e),
        };
        epochs = epoch;
        history.push(EpochRecord {
            epoch,
            eta: next.eta,
            grad_inf: inf_norm(&next.grad),
            loss: loss_of(&next.out.trace),
        });
        let prev = std::mem::replace(&mut current, next);
        if best.as_ref().is_none_or(|b| prev.eta > b.eta) {
            best = Some(prev);
        }
    }
    let best = match best {
        Some(b) if b.eta > current.eta => b,
        _ => current,
    };

    let norm = best.out.trace.norm();
    let inv = C64::new(1.0 / norm, 0.0);
    let trace = best.out.trace.scaled(inv);
    let eta = forms::residual(&r, &space.zero_trace(), &trace)?;
    Ok(Augmented {
        basis: BasisFunction {
            expansion: best.out.candidate.scaled(inv),
            trace,
            width: best.directions.width(),
        },
        eta,
        epochs,
        history,
        system: best.out.system,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::forms::{FieldValue, Physics};
    use crate::helmholtz::HelmholtzParams;
    use crate::mesh::{BoxDomain, Mesh};
    use crate::planewave::eval_scalar_wave;
    use std::f64::consts::PI;

    #[test]
    fn adam_examples() {
        let cfg = TrainConfig::default();
        let mut s = AdamState::new(1, &cfg);
        let mut p = [0.0];
        adam_step(&mut s, &mut p, &[1.0], true);
        assert!((p[0] - 0.01 / (1.0 + 1e-8)).abs() < 1e-15);
        let first = p[0];
        adam_step(&mut s, &mut p, &[1.0], true);
        let second = p[0] - first;
        // lr_2 = lr0 / sqrt(2); bias-corrected ratio stays 1
        assert!((second - 0.01 / 2f64.sqrt() / (1.0 + 1e-8)).abs() < 1e-12);
        assert!((second / first - 1.0).abs() < 0.3);

        let mut s = AdamState::new(2, &cfg);
        let mut p = [0.5, -0.25];
        adam_step(&mut s, &mut p, &[0.0, 0.0], true);
        assert_eq!(p, [0.5, -0.25]);
        assert_eq!(s.m, vec![0.0, 0.0]);

        let mut s = AdamState::new(1, &cfg);
        let mut p = [0.0];
        adam_step(&mut s, &mut p, &[1.0], false);
        assert!(p[0] < 0.0);
    }

    fn plane_wave_setup(omega: f64, angle: f64) -> (TraceSpace, Trace) {
        let mesh = Mesh::uniform(BoxDomain::unit_square(), &[2, 2]).unwrap();
        let space = TraceSpace::new(mesh, Physics::Helmholtz(HelmholtzParams::new(omega)), None).unwrap();
        let w = planewave::direction_2d(angle);
        let g = space.boundary_part(&space.field_trace(|x| {
            let (u, grad) = eval_scalar_wave(C64::new(omega, 0.0), &w, x);
            FieldValue::Scalar { u, grad }
        }));
        (space, g)
    }

    #[test]
    fn zero_residual_is_degenerate() {
        let (space, g) = plane_wave_setup(2.0 * PI, 0.3);
        let r = augment_basis(&space, &g, &g, Width::Planar(3), &TrainConfig::default());
        assert!(matches!(r, Err(Error::DegenerateCandidate(_)) | Err(Error::DegenerateSystem)));
    }

    #[test]
    fn in_span_wave_is_captured() {
        let (space, g) = plane_wave_setup(2.0 * PI, -PI / 2.0);
        let cfg = TrainConfig { max_epochs: 5, ..TrainConfig::default() };
        let aug = augment_basis(&space, &g, &space.zero_trace(), Width::Planar(4), &cfg).unwrap();
        assert!((aug.basis.trace.norm() - 1.0).abs() < 1e-10);
        let err = g.norm();
        assert!((aug.eta - err).abs() < 1e-8 * err);
        let u1 = aug.basis.trace.scaled(C64::new(aug.eta, 0.0));
        assert!(g.sub(&u1).norm() < 1e-8 * err);
    }

    #[test]
    fn training_never_returns_worse_than_initial() {
        let (space, g) = plane_wave_setup(4.0 * PI, 0.777);
        let cfg = TrainConfig { max_epochs: 8, seed: 3, ..TrainConfig::default() };
        let aug = augment_basis(&space, &g, &space.zero_trace(), Width::Planar(5), &cfg).unwrap();
        assert!(aug.eta >= aug.history[0].eta - 1e-8);
        assert_eq!(aug.history.len(), aug.epochs + 1);
        assert!(aug.eta <= g.norm() * (1.0 + 1e-12));
        // deterministic under a fixed seed
        let again = augment_basis(&space, &g, &space.zero_trace(), Width::Planar(5), &cfg).unwrap();
        assert_eq!(again.history, aug.history);
    }

    #[test]
    fn gradient_accounts_for_truncated_modes() {
        use crate::maxwell::MaxwellParams;
        let p = crate::problems::maxwell_dipole(MaxwellParams::new(PI, C64::new(1.0, 1.0)), [0.6; 3], [0.0, 0.0, 1.0], 1.0)
            .unwrap();
        let space = TraceSpace::new(Mesh::uniform(p.domain, &[1, 1, 1]).unwrap(), p.physics, None).unwrap();
        let g = p.load_trace(&space);
        // the clamped polar inclination leaves a tight ring of directions
        let dirs = Width::Spherical(3).init(1).unwrap();
        let out = dglsq::dglsq_r(&space, &dirs, &g).unwrap();
        assert!(!out.info.truncated.is_empty());
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let (_, grad) = grad_eta(&space, &out.basis, &dirs, &out.coeffs, &out.info.truncated, &g, &out.trace, &mut rng).unwrap();
        let eta_at = |flat: &[f64]| {
            let mut d = dirs.clone();
            d.set_flat(flat);
            let o = dglsq::dglsq_r(&space, &d, &g).unwrap();
            forms::eta(&g, &space.zero_trace(), &o.trace).unwrap()
        };
        let base = dirs.flat();
        let h = 1e-6;
        let scale = grad.iter().fold(0.0f64, |m, x| m.max(x.abs()));
        for j in 0..base.len() {
            let (mut xp, mut xm) = (base.clone(), base.clone());
            xp[j] += h;
            xm[j] -= h;
            let fd = (eta_at(&xp) - eta_at(&xm)) / (2.0 * h);
            assert!((fd - grad[j]).abs() < 1e-5 * scale, "angle {j}: {fd} vs {}", grad[j]);
        }
    }

    #[test]
    fn gradient_is_scale_invariant() {
        let (space, g) = plane_wave_setup(3.0 * PI, 0.5);
        let dirs = Width::Planar(4).init(4).unwrap();
        let out = dglsq::dglsq_r(&space, &dirs, &g).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let (e1, g1) = grad_eta(&space, &out.basis, &dirs, &out.coeffs, &out.info.truncated, &g, &out.trace, &mut rng).unwrap();
        let two = C64::new(2.0, 0.0);
        let c2 = out.coeffs.map(|z| z * two);
        let t2 = out.trace.scaled(two);
        let (e2, g2) = grad_eta(&space, &out.basis, &dirs, &c2, &out.info.truncated, &g, &t2, &mut rng).unwrap();
        assert!((e1 - e2).abs() < 1e-12 * e1.abs());
        for (a, b) in g1.iter().zip(&g2) {
            assert!((a - b).abs() < 1e-10 * (1.0 + a.abs()));
        }
    }
}
