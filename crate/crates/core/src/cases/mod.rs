//! Validation and benchmark cases: specification, execution and reporting.

pub mod builtin;
pub mod config;
pub mod oracles;
pub mod output;
pub mod waves;

use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::geometry::Point;
use crate::material::Material;
use crate::mesh::{Mesh, MeshFormat, box_mesh, rect_mesh};
use crate::solver::{CrankNicolson, DampingScheme, SolverConfig, State, relative_residual, solve_static};
use crate::system::{BodyLoads, BoundaryConditions, Field, Problem, ScalarFn, VectorFn};

pub use builtin::{BuiltinCase, builtin_case, builtin_cases};

/// Where the mesh of a case comes from.
#[derive(Debug, Clone, PartialEq)]
pub enum MeshSource {
    Rectangle { origin: [f64; 2], size: [f64; 2], cells: [usize; 2] },
    Box { origin: [f64; 3], size: [f64; 3], cells: [usize; 3] },
    File { path: PathBuf, format: MeshFormat },
}

impl MeshSource {
    /// Build the mesh; generated meshes are refined `refine` times by halving
    /// the cell size in every direction.
    pub fn build(&self, refine: u32) -> Result<Mesh> {
        let k = 1usize << refine;
        match self {
            MeshSource::Rectangle { origin, size, cells } => {
                Ok(rect_mesh(*origin, size[0], size[1], cells[0] * k, cells[1] * k))
            }
            MeshSource::Box { origin, size, cells } => Ok(box_mesh(*origin, *size, [cells[0] * k, cells[1] * k, cells[2] * k])),
            MeshSource::File { path, format } => {
                if refine > 0 {
                    return Err(Error::Config("--refine only applies to generated meshes".into()));
                }
                Mesh::load(path, *format)
            }
        }
    }

    pub fn dim(&self) -> Option<usize> {
        match self {
            MeshSource::Rectangle { .. } => Some(2),
            MeshSource::Box { .. } => Some(3),
            MeshSource::File { .. } => None,
        }
    }
}

/// Point sensor in a dynamic run.
#[derive(Debug, Clone, PartialEq)]
pub struct Probe {
    pub name: String,
    pub point: Point,
    pub field: Field,
    pub component: usize,
    /// Record the time derivative instead of the value.
    pub rate: bool,
}

/// Time-integration settings.
#[derive(Clone)]
pub struct Dynamics {
    pub end_time: f64,
    pub dt: f64,
    pub scheme: DampingScheme,
    pub initial_displacement: Option<VectorFn>,
    pub initial_velocity: Option<VectorFn>,
    pub probes: Vec<Probe>,
}

#[derive(Clone)]
pub enum Mode {
    Static,
    Dynamic(Dynamics),
}

/// Expected value of one stress component.
#[derive(Clone)]
pub enum Expected {
    Constant(f64),
    /// Position-dependent value, evaluated at the cell barycenter.
    Field(ScalarFn),
}

/// Exact displacement and rotation fields, when known.
#[derive(Clone)]
pub struct ExactSolution {
    pub displacement: VectorFn,
    pub rotation: VectorFn,
}

/// Everything needed to run one computation.
#[derive(Clone)]
pub struct CaseSpec {
    pub name: String,
    pub description: String,
    pub mesh: MeshSource,
    pub material: Material,
    pub bcs: BoundaryConditions,
    pub body: BodyLoads,
    pub mode: Mode,
    /// Expected stress components by name (`sxx`, `sxy`, `mx`, ...).
    pub expected: Vec<(String, Expected)>,
    pub exact: Option<ExactSolution>,
    /// Reject meshes with boundary tags that have neither constraints nor a
    /// load entry in `bcs`.
    pub strict_tags: bool,
}

/// Knobs that apply to any case.
#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    pub refine: u32,
    pub solver: SolverConfig,
    /// Overrides the case time step.
    pub dt: Option<f64>,
    pub output_dir: Option<PathBuf>,
    pub emit: Emit,
}

/// Artifacts written when an output directory is given.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Emit {
    pub vtk: bool,
    pub csv: bool,
    pub report: bool,
}

impl Default for Emit {
    fn default() -> Self {
        Emit { vtk: true, csv: true, report: true }
    }
}

impl Emit {
    pub fn parse(list: &str) -> Result<Emit> {
        let mut e = Emit { vtk: false, csv: false, report: false };
        for item in list.split(',').map(str::trim).filter(|s| !s.is_empty()) {
            match item {
                "vtk" => e.vtk = true,
                "csv" => e.csv = true,
                "report" => e.report = true,
                other => return Err(Error::Config(format!("unknown output kind '{other}' (vtk|csv|report)"))),
            }
        }
        Ok(e)
    }
}

/// Statistics of one stress component over all cells.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ComponentReport {
    pub name: String,
    pub min: f64,
    pub max: f64,
    /// Description of the expected value, if any.
    pub expected: Option<String>,
    /// Max of `|computed − expected| / |expected|`; absent when the expected
    /// value is zero.
    pub max_relative_error: Option<f64>,
    pub max_absolute_error: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Default)]
pub struct ErrorReport {
    pub components: Vec<ComponentReport>,
    /// Relative L2 error of the cell displacements against the exact field.
    pub l2_displacement: Option<f64>,
    /// Relative L2 error of the cell rotations against the exact field.
    pub l2_rotation: Option<f64>,
}

impl ErrorReport {
    pub fn component(&self, name: &str) -> Option<&ComponentReport> {
        self.components.iter().find(|c| c.name == name)
    }
}

/// Probe records of a dynamic run.
#[derive(Debug, Clone, PartialEq, Serialize, Default)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub names: Vec<String>,
    /// `values[p][k]`: probe `p` at time `times[k]`.
    pub values: Vec<Vec<f64>>,
    /// Largest absolute dof value over the whole run.
    pub max_abs: f64,
    pub non_finite: usize,
}

impl Trajectory {
    pub fn series(&self, name: &str) -> Option<&[f64]> {
        self.names.iter().position(|n| n == name).map(|i| self.values[i].as_slice())
    }
}

/// Result of [`run_case`].
#[derive(Debug, Clone, Serialize)]
pub struct CaseOutcome {
    pub name: String,
    pub cells: usize,
    pub dofs: usize,
    pub seconds: f64,
    /// Relative residual of the static solve.
    pub residual: Option<f64>,
    pub report: ErrorReport,
    pub trajectory: Option<Trajectory>,
    /// Final dof vector.
    #[serde(skip)]
    pub solution: Vec<f64>,
    /// Per-cell `(σ, μ)`, flattened.
    #[serde(skip)]
    pub stresses: Vec<(Vec<f64>, Vec<f64>)>,
    /// Case-specific scalar results (filled by analyses).
    pub metrics: Vec<(String, f64)>,
}

impl CaseOutcome {
    pub fn metric(&self, name: &str) -> Option<f64> {
        self.metrics.iter().find(|(n, _)| n == name).map(|(_, v)| *v)
    }
}

/// Names of the flattened stress and couple-stress components.
pub fn component_names(dim: usize) -> (Vec<String>, Vec<String>) {
    let axes = ['x', 'y', 'z'];
    let sigma = (0..dim * dim).map(|k| format!("s{}{}", axes[k / dim], axes[k % dim])).collect();
    let mu = if dim == 2 {
        vec!["mx".to_string(), "my".to_string()]
    } else {
        (0..9).map(|k| format!("m{}{}", axes[k / 3], axes[k % 3])).collect()
    };
    (sigma, mu)
}

/// Min/max and errors of every stress component.
pub fn error_report(mesh: &Mesh, spec: &CaseSpec, q: &[f64], stresses: &[(Vec<f64>, Vec<f64>)]) -> ErrorReport {
    let dim = mesh.dim();
    let (sn, mn) = component_names(dim);
    let mut components = Vec::new();
    for (name, k, is_mu) in sn.iter().enumerate().map(|(k, n)| (n, k, false)).chain(mn.iter().enumerate().map(|(k, n)| (n, k, true))) {
        let value = |c: usize| if is_mu { stresses[c].1[k] } else { stresses[c].0[k] };
        let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
        for c in 0..mesh.num_cells() {
            lo = lo.min(value(c));
            hi = hi.max(value(c));
        }
        let expected = spec.expected.iter().find(|(n, _)| n == name).map(|(_, e)| e);
        let (mut rel, mut abs) = (None::<f64>, None::<f64>);
        let description = expected.map(|e| match e {
            Expected::Constant(v) => format!("{v:.5e}"),
            Expected::Field(_) => "field".to_string(),
        });
        if let Some(e) = expected {
            let mut max_rel = 0.0f64;
            let mut max_abs = 0.0f64;
            let mut all_zero = true;
            for (c, cell) in mesh.cells().iter().enumerate() {
                let ev = match e {
                    Expected::Constant(v) => *v,
                    Expected::Field(f) => f(&cell.barycenter, 0.0),
                };
                let err = (value(c) - ev).abs();
                max_abs = max_abs.max(err);
                if ev != 0.0 {
                    all_zero = false;
                    max_rel = max_rel.max(err / ev.abs());
                }
            }
            abs = Some(max_abs);
            if !all_zero {
                rel = Some(max_rel);
            }
        }
        components.push(ComponentReport {
            name: name.clone(),
            min: lo,
            max: hi,
            expected: description,
            max_relative_error: rel,
            max_absolute_error: abs,
        });
    }
    let (mut l2_u, mut l2_p) = (None, None);
    if let Some(ex) = &spec.exact {
        let d = dim;
        let r = if dim == 2 { 1 } else { 3 };
        let per = d + r;
        let (mut eu, mut nu, mut ep, mut np) = (0.0, 0.0, 0.0, 0.0);
        for (c, cell) in mesh.cells().iter().enumerate() {
            let u = (ex.displacement)(&cell.barycenter, 0.0);
            let p = (ex.rotation)(&cell.barycenter, 0.0);
            for i in 0..d {
                eu += cell.measure * (q[c * per + i] - u[i]).powi(2);
                nu += cell.measure * u[i].powi(2);
            }
            for k in 0..r {
                ep += cell.measure * (q[c * per + d + k] - p[k]).powi(2);
                np += cell.measure * p[k].powi(2);
            }
        }
        l2_u = Some(if nu > 0.0 { (eu / nu).sqrt() } else { eu.sqrt() });
        l2_p = Some(if np > 0.0 { (ep / np).sqrt() } else { ep.sqrt() });
    }
    ErrorReport { components, l2_displacement: l2_u, l2_rotation: l2_p }
}

/// Value of a dof field at `x` through the P1 reconstruction of the
/// containing cell.
pub fn evaluate_at(problem: &Problem, x: &Point, field: Field, component: usize, q: &[f64]) -> f64 {
    let c = problem.mesh.locate(x);
    let dofs = problem.dofs();
    problem
        .ops
        .reconstruction
        .p1_functional(problem.mesh, c, x)
        .iter()
        .map(|&(k, w)| {
            let i = match field {
                Field::Displacement => dofs.u(k, component),
                Field::Rotation => dofs.phi(k, component),
            };
            w * q[i]
        })
        .sum()
}

/// Assemble, solve and post-process a case. Writes artifacts when
/// `options.output_dir` is set.
pub fn run_case(spec: &CaseSpec, options: &RunOptions) -> Result<CaseOutcome> {
    run_case_with(spec, options, |_, _| Ok(()))
}

/// [`run_case`] with a case-specific analysis that may add metrics before
/// artifacts are written.
pub fn run_case_with(
    spec: &CaseSpec,
    options: &RunOptions,
    analyse: impl FnOnce(&Problem, &mut CaseOutcome) -> Result<()>,
) -> Result<CaseOutcome> {
    let wrap = |e: Error| Error::Case { case: spec.name.clone(), source: Box::new(e) };
    let start = Instant::now();
    let mesh = spec.mesh.build(options.refine).map_err(wrap)?;
    if spec.strict_tags {
        if let Some(tag) = mesh
            .boundary_tag_names()
            .into_iter()
            .find(|t| !spec.bcs.constraints.contains_key(t) && !spec.bcs.loads.contains_key(t))
        {
            return Err(wrap(Error::UncoveredTag(tag)));
        }
    }
    let problem =
        Problem::new(&mesh, spec.material.clone(), spec.bcs.clone(), spec.body.clone()).map_err(wrap)?;
    let mut outcome = match &spec.mode {
        Mode::Static => run_static(&problem, spec, options),
        Mode::Dynamic(dynamics) => run_dynamic(&problem, spec, dynamics, options),
    }
    .map_err(wrap)?;
    analyse(&problem, &mut outcome).map_err(wrap)?;
    outcome.seconds = start.elapsed().as_secs_f64();
    if let Some(dir) = &options.output_dir {
        write_artifacts(dir, &mesh, spec, &outcome, options.emit).map_err(wrap)?;
    }
    Ok(outcome)
}

fn run_static(problem: &Problem, spec: &CaseSpec, options: &RunOptions) -> Result<CaseOutcome> {
    let sys = problem.assemble();
    let a = sys.stiffness();
    let b = sys.rhs();
    let q = solve_static(&a, &b, options.solver)?;
    let residual = relative_residual(&a, &q, &b);
    let stresses = problem.stresses(&q);
    let report = error_report(problem.mesh, spec, &q, &stresses);
    Ok(CaseOutcome {
        name: spec.name.clone(),
        cells: problem.mesh.num_cells(),
        dofs: q.len(),
        seconds: 0.0,
        residual: Some(residual),
        report,
        trajectory: None,
        solution: q,
        stresses,
        metrics: Vec::new(),
    })
}

fn run_dynamic(problem: &Problem, spec: &CaseSpec, dynamics: &Dynamics, options: &RunOptions) -> Result<CaseOutcome> {
    let sys = problem.assemble();
    let dt = options.dt.unwrap_or(dynamics.dt);
    if !(dt > 0.0) || !(dynamics.end_time > 0.0) {
        return Err(Error::Config("dynamic runs need positive end time and time step".into()));
    }
    let steps = (dynamics.end_time / dt).round().max(1.0) as usize;
    let cn = CrankNicolson::new(sys.stiffness(), sys.mass.clone(), sys.damping.clone(), dt, dynamics.scheme, options.solver)?;
    let dofs = *problem.dofs();
    let sample = |f: &Option<VectorFn>| match f {
        Some(f) => dofs.sample(problem.mesh, |x| f(x, 0.0), |_| [0.0; 3]),
        None => vec![0.0; dofs.len()],
    };
    let q0 = sample(&dynamics.initial_displacement);
    let v0 = sample(&dynamics.initial_velocity);
    let initial: State = cn.initial_state(q0, v0, &problem.rhs(0.0));
    // Probe functionals are fixed; precompute them.
    let probes: Vec<Vec<(usize, f64)>> = dynamics
        .probes
        .iter()
        .map(|p| {
            let c = problem.mesh.locate(&p.point);
            problem
                .ops
                .reconstruction
                .p1_functional(problem.mesh, c, &p.point)
                .into_iter()
                .map(|(k, w)| {
                    let i = match p.field {
                        Field::Displacement => dofs.u(k, p.component),
                        Field::Rotation => dofs.phi(k, p.component),
                    };
                    (i, w)
                })
                .collect()
        })
        .collect();
    let mut traj = Trajectory {
        names: dynamics.probes.iter().map(|p| p.name.clone()).collect(),
        values: vec![Vec::with_capacity(steps + 1); probes.len()],
        ..Default::default()
    };
    let final_state = cn.run(
        initial,
        steps,
        |t| problem.rhs(t),
        |_, s| {
            traj.times.push(s.t);
            for (p, (probe, spec_p)) in probes.iter().zip(&dynamics.probes).enumerate() {
                let src = if spec_p.rate { &s.qdot } else { &s.q };
                traj.values[p].push(probe.iter().map(|&(i, w)| w * src[i]).sum());
            }
            for v in &s.q {
                if v.is_finite() {
                    traj.max_abs = traj.max_abs.max(v.abs());
                } else {
                    traj.non_finite += 1;
                }
            }
            Ok(())
        },
    )?;
    let q = final_state.q;
    let stresses = problem.stresses(&q);
    let report = error_report(problem.mesh, spec, &q, &stresses);
    Ok(CaseOutcome {
        name: spec.name.clone(),
        cells: problem.mesh.num_cells(),
        dofs: q.len(),
        seconds: 0.0,
        residual: None,
        report,
        trajectory: Some(traj),
        solution: q,
        stresses,
        metrics: Vec::new(),
    })
}

fn write_artifacts(dir: &Path, mesh: &Mesh, spec: &CaseSpec, outcome: &CaseOutcome, emit: Emit) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    if emit.vtk {
        let path = dir.join(format!("{}.vtk", spec.name));
        output::write_vtk(&path, mesh, &outcome.solution, &outcome.stresses)?;
    }
    if emit.csv {
        let path = dir.join(format!("{}_cells.csv", spec.name));
        output::write_cell_csv(&path, mesh, &outcome.solution, &outcome.stresses)?;
        if let Some(traj) = &outcome.trajectory {
            output::write_trajectory_csv(&dir.join(format!("{}_probes.csv", spec.name)), traj)?;
        }
    }
    if emit.report {
        output::write_report(dir, outcome)?;
    }
    Ok(())
}
