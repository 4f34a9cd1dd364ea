//! Outer loop: grow a basis one trained function at a time and re-solve the
//! Galerkin system on its span.

use std::path::PathBuf;

use nalgebra::{DMatrix, DVector};

use crate::basis::{element_columns, eval_columns};
use crate::error::{Error, Result};
use crate::forms::{self, FieldValue, Physics, Trace, TraceSpace};
use crate::geom::{Vec3, C64, CZERO};
use crate::linalg;
use crate::mesh::Mesh;
use crate::problems::{self, BenchmarkProblem};
use crate::trainer::{self, BasisFunction, TrainConfig, Width};

/// Basis functions together with the Galerkin system on their span.
#[derive(Debug, Clone, Default)]
pub struct GalerkinState {
    pub basis: Vec<BasisFunction>,
    /// `K[(k, l)] = a(phi_l, phi_k)`.
    pub k: DMatrix<C64>,
    /// `F[k] = L(phi_k)`.
    pub f: DVector<C64>,
    pub coeffs: DVector<C64>,
}

impl GalerkinState {
    pub fn new() -> Self {
        Self {
            basis: Vec::new(),
            k: DMatrix::zeros(0, 0),
            f: DVector::zeros(0),
            coeffs: DVector::zeros(0),
        }
    }

    pub fn len(&self) -> usize {
        self.basis.len()
    }

    pub fn is_empty(&self) -> bool {
        self.basis.is_empty()
    }

    /// Appends `phi` and borders `K` and `F` with its products.
    pub fn push(&mut self, phi: BasisFunction, g: &Trace) -> Result<()> {
        let n = self.len();
        let mut k = self.k.clone().resize(n + 1, n + 1, CZERO);
        for (j, other) in self.basis.iter().enumerate() {
            let v = forms::a_form(&phi.trace, &other.trace)?;
            k[(j, n)] = v;
            k[(n, j)] = v.conj();
        }
        k[(n, n)] = C64::new(phi.trace.norm_sqr(), 0.0);
        let fv = forms::l_form(g, &phi.trace)?;
        self.f = self.f.clone().resize_vertically(n + 1, CZERO);
        self.f[n] = fv;
        self.k = k;
        self.coeffs = self.coeffs.clone().resize_vertically(n + 1, CZERO);
        self.basis.push(phi);
        Ok(())
    }

    /// Trace of `sum_i coeffs[i] phi_i`.
    pub fn solution_trace(&self, space: &TraceSpace) -> Trace {
        let mut t = space.zero_trace();
        for (phi, c) in self.basis.iter().zip(self.coeffs.iter()) {
            t.axpy(*c, &phi.trace);
        }
        t
    }

    /// The current approximation on element `elem` at each point.
    pub fn eval_batch(&self, physics: &Physics, elem: usize, points: &[Vec3]) -> Vec<FieldValue> {
        let zero = match physics {
            Physics::Helmholtz(_) => FieldValue::Scalar { u: CZERO, grad: [CZERO; 3] },
            Physics::Maxwell(_) => FieldValue::Vector { e: [CZERO; 3], curl: [CZERO; 3] },
        };
        let mut out = vec![zero; points.len()];
        for (phi, c) in self.basis.iter().zip(self.coeffs.iter()) {
            let exp = &phi.expansion;
            let cols = element_columns(physics, &exp.directions.elements[elem]);
            for (x, acc) in points.iter().zip(out.iter_mut()) {
                acc.add_scaled(*c, &eval_columns(&cols, &exp.coeffs[elem], x));
            }
        }
        out
    }
}

/// Smallest admissible `L_ii^2 / K_ii` in the Cholesky factor of `K`.
pub const SINGULAR_PIVOT: f64 = 1e-12;

/// Solves `K c = F` by Cholesky; a failed or near-zero pivot means the newest
/// function is numerically in the span of the others.
pub fn dg_solve(state: &mut GalerkinState) -> Result<()> {
    let singular = |k: &DMatrix<C64>| {
        let (vals, _) = linalg::hermitian_eigen(k);
        Error::SingularGram(vals.first().copied().unwrap_or(0.0))
    };
    let ch = state.k.clone().cholesky().ok_or_else(|| singular(&state.k))?;
    let l = ch.l_dirty();
    let n = state.len();
    if (0..n).any(|i| l[(i, i)].norm_sqr() < SINGULAR_PIVOT * state.k[(i, i)].re) {
        return Err(singular(&state.k));
    }
    state.coeffs = ch.solve(&state.f);
    Ok(())
}

/// Spectral condition number of the Gram matrix.
pub fn condition_number(k: &DMatrix<C64>) -> Result<f64> {
    linalg::condition_number(k)
}

/// `eta ||phi||_{L^2}`: an estimate of the L^2 error.
pub fn l2_indicator(eta: f64, phi: &BasisFunction, physics: &Physics, mesh: &Mesh) -> f64 {
    eta * phi.expansion.l2_norm(physics, mesh)
}

/// Per-iteration network width.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum WidthSchedule {
    Fixed(Width),
    /// Width grows by `step` (directions for planar, `m*` for spherical)
    /// each iteration.
    Growing { start: Width, step: usize },
}

impl WidthSchedule {
    /// Width at 1-based iteration `i`.
    pub fn width(&self, i: usize) -> Width {
        match *self {
            WidthSchedule::Fixed(w) => w,
            WidthSchedule::Growing { start, step } => {
                let d = step * (i - 1);
                match start {
                    Width::Planar(n) => Width::Planar(n + d),
                    Width::Spherical(m) => Width::Spherical(m + d),
                }
            }
        }
    }

    /// `n_1 + 2(i - 1)` directions in 2D, `m*_1 + (i - 1)` in 3D.
    pub fn standard(start: Width) -> Self {
        let step = match start {
            Width::Planar(_) => 2,
            Width::Spherical(_) => 1,
        };
        WidthSchedule::Growing { start, step }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    /// Stop once the trained function's `eta` falls to this.
    pub tol: f64,
    pub max_iter: usize,
    pub schedule: WidthSchedule,
    /// Iteration `i` trains with seed `train.seed + i`.
    pub train: TrainConfig,
    /// Face quadrature points per axis; chosen from the wavenumber when unset.
    pub quad_order: Option<usize>,
    /// Volume quadrature points per axis for the L^2 error.
    pub l2_order: Option<usize>,
    /// Stop when `eta` grows by more than this factor between iterations.
    pub stall_factor: f64,
    /// Directory receiving `system_iter<i>.txt` dumps of the direction solve.
    pub dump_dir: Option<PathBuf>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            tol: 1e-6,
            max_iter: 20,
            schedule: WidthSchedule::standard(Width::Planar(13)),
            train: TrainConfig::default(),
            quad_order: None,
            l2_order: None,
            stall_factor: 10.0,
            dump_dir: None,
        }
    }
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.tol > 0.0) {
            return Err(Error::InvalidConfig("tol must be positive".into()));
        }
        if self.max_iter == 0 {
            return Err(Error::InvalidConfig("max_iter must be at least 1".into()));
        }
        if !(self.stall_factor > 1.0) {
            return Err(Error::InvalidConfig("stall_factor must exceed 1".into()));
        }
        self.train.validate()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RunStatus {
    Converged,
    MaxIter,
    Stalled,
}

impl RunStatus {
    pub fn as_str(&self) -> &'static str {
        match self {
            RunStatus::Converged => "converged",
            RunStatus::MaxIter => "max_iter",
            RunStatus::Stalled => "stalled",
        }
    }
}

/// One outer iteration `i`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IterationRow {
    pub iteration: usize,
    /// Directions per element used for `phi_i`.
    pub width: usize,
    /// `eta(u_{i-1}, phi_i)`.
    pub eta: f64,
    /// `cond(K)` once `phi_i` is added; NaN when it was not added.
    pub cond: f64,
    /// `||u - u_{i-1}||_{L^2}`.
    pub err_l2: f64,
    /// `|||u - u_{i-1}|||`.
    pub err_energy: f64,
    /// `eta ||phi_i||_{L^2}`.
    pub l2_indicator: f64,
    pub epochs: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpochRow {
    pub iteration: usize,
    pub epoch: usize,
    pub eta: f64,
    pub grad_inf: f64,
    pub loss: f64,
}

#[derive(Debug, Clone)]
pub struct RunReport {
    pub problem: String,
    pub rows: Vec<IterationRow>,
    pub epochs: Vec<EpochRow>,
    pub status: RunStatus,
    /// Errors of the returned approximation.
    pub final_err_l2: f64,
    pub final_err_energy: f64,
    /// `||u||_{L^2}` and `|||u|||` of the exact solution, for relative errors.
    pub exact_l2: f64,
    pub exact_energy: f64,
    pub state: GalerkinState,
}

impl RunReport {
    pub fn relative_l2(&self) -> f64 {
        self.final_err_l2 / self.exact_l2
    }
}

/// A run that hit an error; `report` holds everything up to the failure.
#[derive(Debug, Clone)]
pub struct RunFailure {
    pub error: Error,
    pub report: Option<Box<RunReport>>,
}

impl std::fmt::Display for RunFailure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match &self.report {
            Some(r) => write!(f, "{} (after {} iterations)", self.error, r.rows.len()),
            None => write!(f, "{}", self.error),
        }
    }
}

impl std::error::Error for RunFailure {}

impl From<Error> for RunFailure {
    fn from(error: Error) -> Self {
        RunFailure { error, report: None }
    }
}

struct Context<'a> {
    problem: &'a BenchmarkProblem,
    space: &'a TraceSpace,
    exact_trace: Trace,
    l2_order: Option<usize>,
}

impl Context<'_> {
    fn errors(&self, state: &GalerkinState, trace: &Trace) -> Result<(f64, f64)> {
        let physics = self.space.physics;
        let (l2, _) = problems::error_norms(
            self.problem,
            self.space,
            |k, pts| state.eval_batch(&physics, k, pts),
            trace,
            self.l2_order,
        )?;
        Ok((l2, self.exact_trace.sub(trace).norm()))
    }
}

/// Runs the greedy basis construction on `problem` over `mesh`.
pub fn run(problem: &BenchmarkProblem, mesh: Mesh, cfg: &RunConfig) -> std::result::Result<RunReport, RunFailure> {
    cfg.validate()?;
    problem.physics.validate()?;
    if mesh.domain != problem.domain {
        return Err(Error::InvalidConfig("mesh does not cover the problem domain".into()).into());
    }
    let space = TraceSpace::new(mesh, problem.physics, cfg.quad_order)?;
    let g = problem.load_trace(&space);
    let ctx = Context {
        problem,
        space: &space,
        exact_trace: space.field_trace(|x| problem.exact(x)),
        l2_order: cfg.l2_order,
    };
    let exact_l2 = problems::exact_l2_norm(problem, &space)?;
    let mut report = RunReport {
        problem: problem.name.clone(),
        rows: Vec::new(),
        epochs: Vec::new(),
        status: RunStatus::MaxIter,
        final_err_l2: exact_l2,
        final_err_energy: ctx.exact_trace.norm(),
        exact_l2,
        exact_energy: ctx.exact_trace.norm(),
        state: GalerkinState::new(),
    };
    if let Some(dir) = &cfg.dump_dir {
        if let Err(e) = std::fs::create_dir_all(dir) {
            return Err(Error::from(e).into());
        }
    }

    match iterate(&ctx, &g, cfg, &mut report) {
        Ok(()) => Ok(report),
        Err(error) => Err(RunFailure { error, report: Some(Box::new(report)) }),
    }
}

fn iterate(ctx: &Context, g: &Trace, cfg: &RunConfig, report: &mut RunReport) -> Result<()> {
    let space = ctx.space;
    let mut u_trace = space.zero_trace();
    let mut prev_eta: Option<f64> = None;
    for i in 1..=cfg.max_iter {
        let width = cfg.schedule.width(i);
        let train = TrainConfig { seed: cfg.train.seed.wrapping_add(i as u64), ..cfg.train };
        let (err_l2, err_energy) = (report.final_err_l2, report.final_err_energy);
        let mut row = IterationRow {
            iteration: i,
            width: width.directions(),
            eta: 0.0,
            cond: f64::NAN,
            err_l2,
            err_energy,
            l2_indicator: 0.0,
            epochs: 0,
        };
        let aug = match trainer::augment_basis(space, g, &u_trace, width, &train) {
            Ok(a) => a,
            // nothing left to capture at this width: u_{i-1} is optimal
            Err(Error::DegenerateCandidate(_)) => {
                report.rows.push(row);
                report.status = RunStatus::Converged;
                return Ok(());
            }
            Err(e) => return Err(e),
        };
        if let Some(dir) = &cfg.dump_dir {
            let path = dir.join(format!("system_iter{i:03}.txt"));
            let file = std::io::BufWriter::new(std::fs::File::create(path)?);
            aug.system.dump(file)?;
        }
        report.epochs.extend(aug.history.iter().map(|e| EpochRow {
            iteration: i,
            epoch: e.epoch,
            eta: e.eta,
            grad_inf: e.grad_inf,
            loss: e.loss,
        }));
        row.eta = aug.eta;
        row.epochs = aug.epochs;
        row.l2_indicator = l2_indicator(aug.eta, &aug.basis, &space.physics, &space.mesh);

        if aug.eta <= cfg.tol {
            report.rows.push(row);
            report.status = RunStatus::Converged;
            return Ok(());
        }
        if prev_eta.is_some_and(|p| aug.eta > cfg.stall_factor * p) {
            report.rows.push(row);
            report.status = RunStatus::Stalled;
            return Ok(());
        }

        let state = &mut report.state;
        state.push(aug.basis, g)?;
        if let Err(e) = dg_solve(state) {
            report.rows.push(row);
            return Err(e);
        }
        row.cond = condition_number(&state.k)?;
        u_trace = state.solution_trace(space);
        let (l2, energy) = ctx.errors(state, &u_trace)?;
        report.final_err_l2 = l2;
        report.final_err_energy = energy;
        report.rows.push(row);
        prev_eta = Some(aug.eta);
    }
    report.status = RunStatus::MaxIter;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::helmholtz::HelmholtzParams;
    use crate::mesh::BoxDomain;
    use crate::planewave::direction_2d;
    use std::f64::consts::PI;

    fn quick(max_epochs: usize) -> TrainConfig {
        TrainConfig { max_epochs, ..TrainConfig::default() }
    }

    #[test]
    fn schedules() {
        let s = WidthSchedule::standard(Width::Planar(13));
        assert_eq!([1, 2, 3].map(|i| s.width(i).directions()), [13, 15, 17]);
        let s = WidthSchedule::standard(Width::Spherical(4));
        assert_eq!([1, 2].map(|i| s.width(i).directions()), [32, 50]);
        assert_eq!(WidthSchedule::Fixed(Width::Planar(5)).width(9), Width::Planar(5));
    }

    fn fake_basis(space: &TraceSpace, seed: f64) -> BasisFunction {
        let dirs = Width::Planar(1).init(space.mesh.num_elements()).unwrap();
        let mut exp = crate::basis::PWExpansion::zero(&space.physics, dirs);
        exp.directions.set_flat(&vec![seed; exp.directions.num_angles()]);
        for c in exp.coeffs.iter_mut() {
            c[0] = C64::new(1.0, 0.0);
        }
        let t = exp.trace(space);
        let n = t.norm();
        BasisFunction { expansion: exp.scaled(C64::new(1.0 / n, 0.0)), trace: t.scaled(C64::new(1.0 / n, 0.0)), width: 1 }
    }

    #[test]
    fn push_builds_gram_and_load() {
        let p = problems::waveguide_exact_2d(2.0 * PI, None).unwrap();
        let mesh = Mesh::uniform(p.domain, &[2, 1]).unwrap();
        let space = TraceSpace::new(mesh, p.physics, None).unwrap();
        let g = p.load_trace(&space);
        let mut st = GalerkinState::new();
        for s in [0.1, 1.3, 2.9] {
            st.push(fake_basis(&space, s), &g).unwrap();
        }
        for i in 0..3 {
            assert!((st.k[(i, i)].re - 1.0).abs() < 1e-12);
            for j in 0..3 {
                let want = forms::a_form(&st.basis[j].trace, &st.basis[i].trace).unwrap();
                assert!((st.k[(i, j)] - want).norm() < 1e-14);
            }
            assert!((st.f[i] - forms::l_form(&g, &st.basis[i].trace).unwrap()).norm() < 1e-14);
        }
        dg_solve(&mut st).unwrap();
        // Galerkin orthogonality: a(u_h - u, phi_j) = 0
        let uh = st.solution_trace(&space);
        for phi in &st.basis {
            let r = forms::a_form(&uh, &phi.trace).unwrap() - forms::l_form(&g, &phi.trace).unwrap();
            assert!(r.norm() < 1e-10);
        }
        // a duplicate direction makes K singular
        st.push(fake_basis(&space, 0.1), &g).unwrap();
        assert!(matches!(dg_solve(&mut st), Err(Error::SingularGram(_))));
    }

    #[test]
    fn eval_batch_matches_trace() {
        let p = problems::waveguide_exact_2d(2.0 * PI, None).unwrap();
        let mesh = Mesh::uniform(p.domain, &[2, 2]).unwrap();
        let space = TraceSpace::new(mesh, p.physics, None).unwrap();
        let g = p.load_trace(&space);
        let mut st = GalerkinState::new();
        st.push(fake_basis(&space, 0.4), &g).unwrap();
        st.push(fake_basis(&space, 2.0), &g).unwrap();
        dg_solve(&mut st).unwrap();
        let t = space.piecewise_trace(|k, x| st.eval_batch(&space.physics, k, &[*x]).pop().unwrap());
        assert!(t.sub(&st.solution_trace(&space)).norm() < 1e-12);
    }

    #[test]
    fn single_plane_wave_is_recovered() {
        let omega = 2.0 * PI;
        // one of the three initial directions
        let w = direction_2d(PI / 3.0);
        let p = problems::scalar_plane_wave(HelmholtzParams::new(omega), BoxDomain::unit_square(), w, C64::new(0.5, -0.2));
        let mesh = Mesh::uniform(p.domain, &[1, 1]).unwrap();
        let cfg = RunConfig {
            tol: 1e-8,
            max_iter: 3,
            schedule: WidthSchedule::Fixed(Width::Planar(3)),
            train: quick(300),
            ..RunConfig::default()
        };
        let rep = run(&p, mesh, &cfg).unwrap();
        assert!(rep.final_err_energy < 1e-8, "{:?}", rep.rows);
        assert_eq!(rep.status, RunStatus::Converged);
        assert!(rep.rows.len() <= 2);
        // energy error never increases
        for w in rep.rows.windows(2) {
            assert!(w[1].err_energy <= w[0].err_energy * (1.0 + 1e-12));
        }
    }

    #[test]
    fn zero_data_converges_immediately() {
        let p = problems::scalar_plane_wave(HelmholtzParams::new(PI), BoxDomain::unit_square(), [1.0, 0.0, 0.0], CZERO);
        let mesh = Mesh::uniform(p.domain, &[2, 2]).unwrap();
        let cfg = RunConfig { train: quick(5), ..RunConfig::default() };
        let rep = run(&p, mesh, &cfg).unwrap();
        assert_eq!(rep.status, RunStatus::Converged);
        assert_eq!(rep.rows.len(), 1);
        assert_eq!(rep.rows[0].eta, 0.0);
        assert!(rep.state.is_empty());
    }

    #[test]
    fn run_is_deterministic() {
        let p = problems::waveguide_exact_2d(2.0 * PI, None).unwrap();
        let cfg = RunConfig {
            max_iter: 2,
            schedule: WidthSchedule::standard(Width::Planar(3)),
            train: quick(5),
            ..RunConfig::default()
        };
        let a = run(&p, Mesh::uniform(p.domain, &[2, 2]).unwrap(), &cfg).unwrap();
        let b = run(&p, Mesh::uniform(p.domain, &[2, 2]).unwrap(), &cfg).unwrap();
        assert_eq!(a.rows, b.rows);
        assert_eq!(a.epochs, b.epochs);
    }

    #[test]
    fn bad_config_rejected() {
        let p = problems::waveguide_exact_2d(2.0 * PI, None).unwrap();
        let mesh = Mesh::uniform(p.domain, &[1, 1]).unwrap();
        let cfg = RunConfig { tol: 0.0, ..RunConfig::default() };
        let err = run(&p, mesh, &cfg).unwrap_err();
        assert!(matches!(err.error, Error::InvalidConfig(_)));
        let wrong = Mesh::uniform(BoxDomain::new_2d([0.0, 0.0], [2.0, 1.0]), &[1, 1]).unwrap();
        assert!(run(&p, wrong, &RunConfig::default()).is_err());
    }
}
