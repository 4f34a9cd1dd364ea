//! Run specifications: a flat TOML document naming a problem, its
//! parameters, the mesh, the width schedule and the trainer settings; plus
//! the built-in presets.
//!
//! ```toml
//! problem = "waveguide2d"     # waveguide2d | point_source_3d | maxwell_dipole
//!                             # | plane_wave_2d | plane_wave_3d | maxwell_plane_wave
//! omega = "2pi"               # number or multiple of pi
//! divisions = 4               # per axis, or [nx, ny(, nz)]
//! schedule = "growing"        # growing | fixed
//! width = 7                   # n_1 (2D) or m*_1 (3D)
//! ```
//!
//! Remaining keys and defaults: `mode` (omega/pi - 1), `step` (2 in 2D, 1
//! in 3D), `tol` (1e-6), `max_iter` (20), `alpha` (omega^2), `beta` (1),
//! `mu` (1), `epsilon` ([re, im]; 1+i for the dipole, 1 otherwise),
//! `varsigma`, `rho1`, `rho2` (1), `source`, `moment` ([0, 0, 1]),
//! `current` (1), `direction` (angles), `amplitude` ([re, im]), `branch`
//! (low | high), `grad_tol` (1e-6), `max_epochs` (500), `lr0` (0.01),
//! `seed` (0), `quad_order`, `output`.

use std::f64::consts::PI;
use std::path::PathBuf;

use serde::Deserialize;

use crate::error::{Error, Result};
use crate::galerkin::{self, RunConfig, RunFailure, RunReport, WidthSchedule};
use crate::geom::{Vec3, C64};
use crate::helmholtz::HelmholtzParams;
use crate::maxwell::MaxwellParams;
use crate::mesh::{BoxDomain, Mesh};
use crate::planewave::{direction_2d, direction_3d, Branch};
use crate::problems::{self, BenchmarkProblem};
use crate::trainer::{TrainConfig, Width};

/// A validated, fully defaulted run.
#[derive(Debug, Clone, PartialEq)]
pub struct RunSpec {
    pub problem: BenchmarkProblem,
    pub divisions: Vec<usize>,
    pub run: RunConfig,
    /// Prefix for the CSV and summary files.
    pub output: Option<PathBuf>,
}

impl RunSpec {
    pub fn mesh(&self) -> Result<Mesh> {
        Mesh::uniform(self.problem.domain, &self.divisions)
    }

    pub fn execute(&self) -> std::result::Result<RunReport, RunFailure> {
        galerkin::run(&self.problem, self.mesh()?, &self.run)
    }
}

#[derive(Debug, Deserialize)]
#[serde(untagged)]
enum Number {
    Value(f64),
    Text(String),
}

#[derive(Debug, Deserialize)]
#[serde(untagged)]
enum Divisions {
    Uniform(usize),
    PerAxis(Vec<usize>),
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSpec {
    problem: Option<String>,
    omega: Option<Number>,
    mode: Option<f64>,
    divisions: Option<Divisions>,
    schedule: Option<String>,
    width: Option<usize>,
    step: Option<usize>,
    tol: Option<f64>,
    max_iter: Option<usize>,
    alpha: Option<f64>,
    beta: Option<f64>,
    mu: Option<f64>,
    epsilon: Option<[f64; 2]>,
    varsigma: Option<f64>,
    rho1: Option<f64>,
    rho2: Option<f64>,
    source: Option<Vec3>,
    moment: Option<Vec3>,
    current: Option<f64>,
    direction: Option<Vec<f64>>,
    amplitude: Option<[f64; 2]>,
    branch: Option<String>,
    grad_tol: Option<f64>,
    max_epochs: Option<usize>,
    lr0: Option<f64>,
    seed: Option<u64>,
    quad_order: Option<usize>,
    output: Option<String>,
}

fn spec_err(field: &str, message: impl Into<String>) -> Error {
    Error::Spec { field: field.into(), message: message.into() }
}

/// Parses `2.5`, `"pi"`, `"2pi"`, `"2*pi"`, `"8π"` or a plain numeric string.
pub fn parse_pi_multiple(text: &str) -> Option<f64> {
    let t: String = text.trim().to_lowercase().replace('π', "pi").split_whitespace().collect();
    match t.strip_suffix("pi") {
        Some(coef) => {
            let coef = coef.strip_suffix('*').unwrap_or(coef);
            let c = if coef.is_empty() { 1.0 } else { coef.parse::<f64>().ok()? };
            Some(c * PI)
        }
        None => t.parse().ok(),
    }
}

fn positive(field: &str, v: f64) -> Result<f64> {
    if v > 0.0 && v.is_finite() {
        Ok(v)
    } else {
        Err(spec_err(field, format!("must be positive, got {v}")))
    }
}

#[derive(Clone, Copy, PartialEq)]
enum Kind {
    Waveguide,
    PointSource,
    Dipole,
    PlaneWave2d,
    PlaneWave3d,
    MaxwellPlaneWave,
}

const KINDS: &str = "waveguide2d, point_source_3d, maxwell_dipole, plane_wave_2d, plane_wave_3d, maxwell_plane_wave";

/// Parses and validates a TOML run specification.
pub fn parse_spec(text: &str) -> Result<RunSpec> {
    let raw: RawSpec = toml::from_str(text).map_err(|e| {
        let msg = e.message().to_string();
        // the key on the offending line, for type errors
        let key = e.span().and_then(|span| {
            let start = text[..span.start].rfind('\n').map_or(0, |i| i + 1);
            let line = text[start..].lines().next()?;
            line.split_once('=').map(|(k, _)| k.trim().to_string())
        });
        let field = msg
            .split('`')
            .nth(1)
            .filter(|_| msg.contains("unknown field") || msg.contains("missing field"))
            .map(str::to_string)
            .or(key)
            .unwrap_or_else(|| "document".into());
        spec_err(&field, msg)
    })?;
    build(raw)
}

fn build(raw: RawSpec) -> Result<RunSpec> {
    let name = raw.problem.as_deref().ok_or_else(|| spec_err("problem", format!("missing; one of {KINDS}")))?;
    let kind = match name {
        "waveguide2d" => Kind::Waveguide,
        "point_source_3d" => Kind::PointSource,
        "maxwell_dipole" => Kind::Dipole,
        "plane_wave_2d" => Kind::PlaneWave2d,
        "plane_wave_3d" => Kind::PlaneWave3d,
        "maxwell_plane_wave" => Kind::MaxwellPlaneWave,
        other => return Err(spec_err("problem", format!("unknown kind `{other}`; one of {KINDS}"))),
    };
    let omega = match raw.omega {
        None => return Err(spec_err("omega", "missing")),
        Some(Number::Value(v)) => v,
        Some(Number::Text(t)) => {
            parse_pi_multiple(&t).ok_or_else(|| spec_err("omega", format!("cannot read `{t}` as a number")))?
        }
    };
    let omega = positive("omega", omega)?;
    let dim = if kind == Kind::Waveguide || kind == Kind::PlaneWave2d { 2 } else { 3 };

    let helmholtz = || -> Result<HelmholtzParams> {
        Ok(HelmholtzParams {
            omega,
            alpha: positive("alpha", raw.alpha.unwrap_or(omega * omega))?,
            beta: positive("beta", raw.beta.unwrap_or(1.0))?,
        })
    };
    let maxwell = |eps_default: C64| -> Result<MaxwellParams> {
        let eps = raw.epsilon.map(|[re, im]| C64::new(re, im)).unwrap_or(eps_default);
        if !(eps.norm() > 0.0) {
            return Err(spec_err("epsilon", "must be nonzero"));
        }
        Ok(MaxwellParams {
            omega,
            mu: positive("mu", raw.mu.unwrap_or(1.0))?,
            eps,
            varsigma: positive("varsigma", raw.varsigma.unwrap_or(1.0))?,
            rho1: positive("rho1", raw.rho1.unwrap_or(1.0))?,
            rho2: positive("rho2", raw.rho2.unwrap_or(1.0))?,
        })
    };
    let direction = || -> Result<Vec3> {
        match (dim, raw.direction.as_deref()) {
            (2, None) => Ok(direction_2d(0.0)),
            (2, Some([d])) => Ok(direction_2d(*d)),
            (3, None) => Ok(direction_3d(PI / 2.0, 0.0)),
            (3, Some([z, t])) => Ok(direction_3d(*z, *t)),
            _ => Err(spec_err("direction", format!("expects {} angle(s)", dim - 1))),
        }
    };
    let amplitude = raw.amplitude.map(|[re, im]| C64::new(re, im)).unwrap_or(C64::new(1.0, 0.0));
    let wrap = |e: Error| match e {
        Error::InvalidBenchmark(m) | Error::InvalidConfig(m) => spec_err("problem", m),
        other => other,
    };

    let mut problem = match kind {
        Kind::Waveguide => problems::waveguide_exact_2d(omega, raw.mode).map_err(|e| match e {
            Error::InvalidBenchmark(m) => spec_err("mode", m),
            other => other,
        })?,
        Kind::PointSource => {
            problems::point_source_3d(omega, raw.source.unwrap_or([-1.0; 3])).map_err(|e| match e {
                Error::InvalidBenchmark(m) => spec_err("source", m),
                other => other,
            })?
        }
        Kind::Dipole => problems::maxwell_dipole(
            maxwell(C64::new(1.0, 1.0))?,
            raw.source.unwrap_or([0.6; 3]),
            raw.moment.unwrap_or([0.0, 0.0, 1.0]),
            raw.current.unwrap_or(1.0),
        )
        .map_err(|e| match e {
            Error::InvalidBenchmark(m) => spec_err("source", m),
            other => other,
        })?,
        Kind::PlaneWave2d => {
            problems::scalar_plane_wave(helmholtz()?, BoxDomain::unit_square(), direction()?, amplitude)
        }
        Kind::PlaneWave3d => problems::scalar_plane_wave(helmholtz()?, BoxDomain::unit_cube(), direction()?, amplitude),
        Kind::MaxwellPlaneWave => {
            let branch = match raw.branch.as_deref().unwrap_or("low") {
                "low" => Branch::Low,
                "high" => Branch::High,
                b => return Err(spec_err("branch", format!("expected low or high, got `{b}`"))),
            };
            problems::maxwell_plane_wave(maxwell(C64::new(1.0, 0.0))?, BoxDomain::unit_cube(), direction()?, branch, amplitude)
        }
    };
    if let crate::forms::Physics::Helmholtz(p) = &mut problem.physics {
        *p = helmholtz()?;
    }
    problem.physics.validate().map_err(wrap)?;

    let divisions = match raw.divisions {
        None => vec![1; dim],
        Some(Divisions::Uniform(n)) => vec![n; dim],
        Some(Divisions::PerAxis(v)) if v.len() == dim => v,
        Some(Divisions::PerAxis(v)) => {
            return Err(spec_err("divisions", format!("{dim}D problem needs {dim} counts, got {}", v.len())))
        }
    };
    if divisions.contains(&0) {
        return Err(spec_err("divisions", "counts must be at least 1"));
    }

    let start = match dim {
        2 => Width::Planar(raw.width.unwrap_or(13)),
        _ => Width::Spherical(raw.width.unwrap_or(4)),
    };
    match start {
        Width::Planar(0) => return Err(spec_err("width", "must be at least 1")),
        Width::Spherical(m) if m < 2 => return Err(spec_err("width", "3D width m* must be at least 2")),
        _ => {}
    }
    let schedule = match raw.schedule.as_deref().unwrap_or("growing") {
        "growing" => match raw.step {
            None => WidthSchedule::standard(start),
            Some(step) => WidthSchedule::Growing { start, step },
        },
        "fixed" => {
            if raw.step.is_some() {
                return Err(spec_err("step", "not used by a fixed schedule"));
            }
            WidthSchedule::Fixed(start)
        }
        s => return Err(spec_err("schedule", format!("expected growing or fixed, got `{s}`"))),
    };

    let defaults = TrainConfig::default();
    let train = TrainConfig {
        max_epochs: raw.max_epochs.unwrap_or(defaults.max_epochs),
        grad_tol: positive("grad_tol", raw.grad_tol.unwrap_or(defaults.grad_tol))?,
        lr0: positive("lr0", raw.lr0.unwrap_or(defaults.lr0))?,
        seed: raw.seed.unwrap_or(defaults.seed),
        ..defaults
    };
    let max_iter = raw.max_iter.unwrap_or(20);
    if max_iter == 0 {
        return Err(spec_err("max_iter", "must be at least 1"));
    }
    if let Some(q) = raw.quad_order {
        if !(1..=64).contains(&q) {
            return Err(spec_err("quad_order", format!("must lie in 1..=64, got {q}")));
        }
    }
    let run = RunConfig {
        tol: positive("tol", raw.tol.unwrap_or(1e-6))?,
        max_iter,
        schedule,
        train,
        quad_order: raw.quad_order,
        ..RunConfig::default()
    };
    run.validate().map_err(wrap)?;
    Ok(RunSpec { problem, divisions, run, output: raw.output.map(PathBuf::from) })
}

pub const PRESET_NAMES: [&str; 5] = [
    "waveguide-fixed-width",
    "waveguide-growing-width",
    "waveguide-multidomain",
    "helmholtz3d-point",
    "maxwell-dipole",
];

/// Built-in experiment, scaled to run on a workstation in minutes.
pub fn preset(name: &str) -> Result<RunSpec> {
    let text = match name {
        "waveguide-fixed-width" => {
            "problem = \"waveguide2d\"\nomega = \"2pi\"\ndivisions = 1\nschedule = \"fixed\"\nwidth = 14\nmax_iter = 10\n"
        }
        "waveguide-growing-width" => "problem = \"waveguide2d\"\nomega = \"2pi\"\ndivisions = 1\nwidth = 3\nmax_iter = 10\n",
        "waveguide-multidomain" => {
            "problem = \"waveguide2d\"\nomega = \"8pi\"\ndivisions = 8\nwidth = 7\nmax_iter = 9\nmax_epochs = 200\n"
        }
        "helmholtz3d-point" => {
            "problem = \"point_source_3d\"\nomega = \"2pi\"\ndivisions = 2\nwidth = 4\nmax_iter = 4\nmax_epochs = 50\n"
        }
        "maxwell-dipole" => {
            "problem = \"maxwell_dipole\"\nomega = \"pi\"\nepsilon = [1.0, 1.0]\ndivisions = 2\nwidth = 3\nmax_iter = 5\nmax_epochs = 50\n"
        }
        _ => {
            return Err(Error::UnknownPreset { name: name.into(), available: PRESET_NAMES.join(", ") });
        }
    };
    let mut spec = parse_spec(text)?;
    spec.output = Some(PathBuf::from(name));
    Ok(spec)
}

pub fn run_preset(name: &str) -> std::result::Result<RunReport, RunFailure> {
    preset(name)?.execute()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problems::Exact;

    #[test]
    fn pi_multiples() {
        assert_eq!(parse_pi_multiple("2pi"), Some(2.0 * PI));
        assert_eq!(parse_pi_multiple("2 * pi"), Some(2.0 * PI));
        assert_eq!(parse_pi_multiple("8π"), Some(8.0 * PI));
        assert_eq!(parse_pi_multiple("pi"), Some(PI));
        assert_eq!(parse_pi_multiple("3.5"), Some(3.5));
        assert_eq!(parse_pi_multiple("two pi"), None);
    }

    #[test]
    fn minimal_spec_gets_defaults() {
        let s = parse_spec("problem = \"waveguide2d\"\nomega = \"2π\"\ndivisions = 1\n").unwrap();
        assert_eq!(s.divisions, vec![1, 1]);
        assert_eq!(s.run.tol, 1e-6);
        assert_eq!(s.run.max_iter, 20);
        assert_eq!(s.run.schedule, WidthSchedule::Growing { start: Width::Planar(13), step: 2 });
        assert_eq!([1, 2, 3].map(|i| s.run.schedule.width(i).directions()), [13, 15, 17]);
        assert_eq!(s.run.train, TrainConfig::default());
        let crate::forms::Physics::Helmholtz(p) = s.problem.physics else { panic!() };
        assert_eq!((p.alpha, p.beta), (4.0 * PI * PI, 1.0));
        assert!(matches!(s.problem.exact, Exact::Waveguide { k, .. } if k == 1.0));
    }

    #[test]
    fn spec_errors_name_the_field() {
        let field = |text: &str| match parse_spec(text) {
            Err(Error::Spec { field, .. }) => field,
            other => panic!("{other:?}"),
        };
        assert_eq!(field("omega = 1.0\n"), "problem");
        assert_eq!(field("problem = \"waveguide2d\"\n"), "omega");
        assert_eq!(field("problem = \"waveguide2d\"\nomega = 6.0\ntol = 0.0\n"), "tol");
        assert_eq!(field("problem = \"waveguide2d\"\nomega = 6.0\nbogus = 1\n"), "bogus");
        assert_eq!(field("problem = \"waveguide2d\"\nomega = 6.0\ndivisions = [1, 2, 3]\n"), "divisions");
        assert_eq!(field("problem = \"point_source_3d\"\nomega = 6.0\nsource = [0.5, 0.5, 0.5]\n"), "source");
        assert_eq!(field("problem = \"waveguide2d\"\nomega = 6.0\nmode = 5.0\n"), "mode");
        assert_eq!(field("problem = \"waveguide2d\"\nomega = \"lots\"\n"), "omega");
        assert_eq!(field("problem = \"heat\"\nomega = 1.0\n"), "problem");
        assert_eq!(field("problem = \"waveguide2d\"\nomega = 6.0\nmax_iter = -1\n"), "max_iter");
        assert_eq!(field("problem = \"waveguide2d\"\nomega = 6.0\nseed = \"x\"\n"), "seed");
    }

    #[test]
    fn dipole_defaults() {
        let s = parse_spec("problem = \"maxwell_dipole\"\nomega = \"pi\"\ndivisions = 2\nwidth = 3\n").unwrap();
        let crate::forms::Physics::Maxwell(p) = s.problem.physics else { panic!() };
        assert_eq!(p.eps, C64::new(1.0, 1.0));
        assert_eq!((p.mu, p.varsigma, p.rho1, p.rho2), (1.0, 1.0, 1.0, 1.0));
        assert_eq!(s.divisions, vec![2, 2, 2]);
        assert_eq!(s.run.schedule.width(1), Width::Spherical(3));
        assert_eq!(s.run.schedule.width(3), Width::Spherical(5));
        assert_eq!(s.problem.domain, BoxDomain::new_3d([-0.5; 3], [0.5; 3]));
    }

    #[test]
    fn presets_resolve() {
        for name in PRESET_NAMES {
            let s = preset(name).unwrap();
            assert_eq!(s.output.as_deref(), Some(std::path::Path::new(name)));
        }
        match preset("nope") {
            Err(Error::UnknownPreset { available, .. }) => {
                for name in PRESET_NAMES {
                    assert!(available.contains(name));
                }
            }
            other => panic!("{other:?}"),
        }
    }
}
