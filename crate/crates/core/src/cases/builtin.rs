//! Registry of the builtin validation and benchmark cases.

use std::path::PathBuf;
use std::sync::Arc;

use rayon::prelude::*;

use super::oracles::{self, ScfRow, ShearLayer};
use super::waves;
use super::{CaseOutcome, CaseSpec, Dynamics, ExactSolution, Expected, MeshSource, Mode, Probe, RunOptions, run_case_with};
use crate::error::{Error, Result};
use crate::geometry::Point;
use crate::material::{CosseratMaterial2D, CosseratMaterial3D, Material};
use crate::mesh::MeshFormat;
use crate::solver::DampingScheme;
use crate::system::{
    BodyLoads, BoundaryConditions, BoundaryLoad, Constraint, Direction, Field, Problem, ScalarFn, constant,
    constant_vector,
};

/// A named entry of the registry. One entry may run several computations
/// (parameter sweeps).
pub struct BuiltinCase {
    pub name: &'static str,
    pub description: &'static str,
    pub run: fn(&RunOptions) -> Result<Vec<CaseOutcome>>,
}

pub fn builtin_cases() -> Vec<BuiltinCase> {
    vec![
        BuiltinCase { name: "patch1", description: "patch test, constant stress, zero loads", run: |o| single(patch(1)?, o) },
        BuiltinCase { name: "patch2", description: "patch test, nonsymmetric constant stress, uniform couple load", run: |o| single(patch(2)?, o) },
        BuiltinCase { name: "patch3", description: "patch test, linear shear stress, constant couple stress", run: |o| single(patch(3)?, o) },
        BuiltinCase { name: "plate_hole", description: "quarter plate with a hole, all three sweeps", run: |o| {
            let mut all = plate_sweep(1, false, o)?;
            all.extend(plate_sweep(2, false, o)?);
            all.extend(plate_sweep(3, false, o)?);
            Ok(all)
        } },
        BuiltinCase { name: "plate_hole_t1", description: "quarter plate with a hole, r/l = 1.063, sweep over a", run: |o| plate_sweep(1, false, o) },
        BuiltinCase { name: "plate_hole_t2", description: "quarter plate with a hole, r/l = 10.63, sweep over a", run: |o| plate_sweep(2, false, o) },
        BuiltinCase { name: "plate_hole_t3", description: "quarter plate with a hole, r = 0.864 mm, a = 0.3333, sweep over r/l", run: |o| plate_sweep(3, false, o) },
        BuiltinCase { name: "plate_hole_coarse", description: "test 1 sweep on the 4x coarsened mesh", run: |o| plate_sweep(1, true, o) },
        BuiltinCase { name: "boundary_layer", description: "sheared Cosserat layer against the 1D oracle", run: |o| {
            let spec = boundary_layer(10, 50);
            Ok(vec![run_boundary_layer(&spec, o)?])
        } },
        BuiltinCase { name: "beam_flexion", description: "3D cantilever under a ramped end traction (reduced resolution)", run: |o| {
            Ok(vec![run_beam(&beam_flexion(BeamResolution::Reduced, 2000), o)?])
        } },
        BuiltinCase { name: "lamb_desk", description: "2D Lamb problem at desk scale, Ricker source", run: |o| Ok(vec![run_lamb(&lamb_desk(), o)?]) },
    ]
}

pub fn builtin_case(name: &str) -> Option<BuiltinCase> {
    builtin_cases().into_iter().find(|c| c.name == name)
}

fn single(spec: CaseSpec, options: &RunOptions) -> Result<Vec<CaseOutcome>> {
    Ok(vec![super::run_case(&spec, options)?])
}

/// Directory of the shipped meshes; `COSSERAT_DEM_DATA` overrides it.
pub fn data_dir() -> PathBuf {
    std::env::var_os("COSSERAT_DEM_DATA")
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from(concat!(env!("CARGO_MANIFEST_DIR"), "/../../data")))
}

fn scalar(f: impl Fn(f64, f64) -> f64 + Send + Sync + 'static) -> ScalarFn {
    Arc::new(move |x: &Point, _| f(x[0], x[1]))
}

/// Patch tests on `[−0.12, 0.12] × [0, 0.12]` (G = 10³, ν = 0.25, a = 0.5,
/// ℓ = 0.1) with full Dirichlet data from the exact solution.
///
/// The loads are those balancing the exact fields under
/// `−div σ = f`, `−div μ − ε:σ = 𝔠`.
pub fn patch(which: u8) -> Result<CaseSpec> {
    patch_on(which, [50, 25])
}

/// [`patch`] on a `cells[0] × cells[1]` rectangle grid.
pub fn patch_on(which: u8, cells: [usize; 2]) -> Result<CaseSpec> {
    let (g, nu, a, l) = (1e3, 0.25, 0.5, 0.1);
    let material = Material::Plane(CosseratMaterial2D::new(g, nu, a, l)?);
    let ux = scalar(move |x, y| (x + 0.5 * y) / g);
    let uy = scalar(move |x, y| (x + y) / g);
    let phi: ScalarFn = match which {
        1 => constant(0.25 / g),
        2 => constant(-0.25 / g),
        3 => scalar(move |x, y| (0.25 - x + y) / g),
        _ => return Err(Error::Config(format!("no patch test {which}"))),
    };
    let mut bcs = BoundaryConditions::new();
    for tag in ["left", "right", "bottom", "top"] {
        bcs.dirichlet(tag, 2, [ux.clone(), uy.clone(), constant(0.0)], [phi.clone(), constant(0.0), constant(0.0)]);
    }
    let body = match which {
        1 => BodyLoads::default(),
        2 => BodyLoads { force: None, couple: Some(constant_vector([-1.0, 0.0, 0.0])) },
        _ => BodyLoads {
            force: Some(constant_vector([-1.0, -1.0, 0.0])),
            couple: Some(Arc::new(|x: &Point, _| [2.0 * (x[1] - x[0]), 0.0, 0.0])),
        },
    };
    let c = |v: f64| Expected::Constant(v);
    let expected = match which {
        1 => vec![("sxx", c(4.0)), ("syy", c(4.0)), ("sxy", c(1.5)), ("syx", c(1.5)), ("mx", c(0.0)), ("my", c(0.0))],
        2 => vec![("sxx", c(4.0)), ("syy", c(4.0)), ("sxy", c(1.0)), ("syx", c(2.0)), ("mx", c(0.0)), ("my", c(0.0))],
        _ => vec![
            ("sxx", c(4.0)),
            ("syy", c(4.0)),
            ("sxy", Expected::Field(scalar(|x, y| 1.5 - x + y))),
            ("syx", Expected::Field(scalar(|x, y| 1.5 + x - y))),
            ("mx", c(-4.0 * l * l)),
            ("my", c(4.0 * l * l)),
        ],
    };
    let (ux2, uy2, phi2) = (ux.clone(), uy.clone(), phi.clone());
    Ok(CaseSpec {
        name: format!("patch{which}"),
        description: format!("patch test {which}"),
        mesh: MeshSource::Rectangle { origin: [-0.12, 0.0], size: [0.24, 0.12], cells },
        material,
        bcs,
        body,
        mode: Mode::Static,
        expected: expected.into_iter().map(|(n, e)| (n.to_string(), e)).collect(),
        exact: Some(ExactSolution {
            displacement: Arc::new(move |x, t| [ux2(x, t), uy2(x, t), 0.0]),
            rotation: Arc::new(move |x, t| [phi2(x, t), 0.0, 0.0]),
        }),
        strict_tags: false,
    })
}

/// Table rows of plate test 1, 2 or 3.
pub fn plate_table(test: u8) -> Result<&'static [ScfRow]> {
    match test {
        1 => Ok(&oracles::PLATE_TEST_1),
        2 => Ok(&oracles::PLATE_TEST_2),
        3 => Ok(&oracles::PLATE_TEST_3),
        _ => Err(Error::Config(format!("no plate test {test}"))),
    }
}

/// Quarter plate (side 16.2 mm) with a hole of radius `r` at the origin:
/// G = 10³ Pa, ν = 0.3, symmetry on `left`/`bottom` (normal displacement and
/// rotation fixed), unit traction on `top`, free `right` and `hole`.
pub fn plate_hole(test: u8, row: &ScfRow, coarse: bool) -> Result<CaseSpec> {
    let radius = if test == 3 { 0.864e-3 } else { 0.216e-3 };
    let file = format!(
        "meshes/plate_hole_r{}{}.json",
        if test == 3 { "0864" } else { "0216" },
        if coarse { "_coarse" } else { "" }
    );
    let length = radius / row.r_over_l;
    let material = Material::Plane(CosseratMaterial2D::new(1e3, 0.3, row.a, length)?);
    let mut bcs = BoundaryConditions::new();
    bcs.constrain("bottom", Constraint::zero(Field::Displacement, Direction::Axis(1)));
    bcs.constrain("bottom", Constraint::zero(Field::Rotation, Direction::Axis(0)));
    bcs.constrain("left", Constraint::zero(Field::Displacement, Direction::Axis(0)));
    bcs.constrain("left", Constraint::zero(Field::Rotation, Direction::Axis(0)));
    bcs.load("top", BoundaryLoad { traction: Some(constant_vector([0.0, 1.0, 0.0])), couple: None });
    Ok(CaseSpec {
        name: format!("plate_hole_t{test}_a{}_rl{}", row.a, row.r_over_l),
        description: format!("plate with a hole, test {test}"),
        mesh: MeshSource::File { path: data_dir().join(file), format: MeshFormat::InternalJson },
        material,
        bcs,
        body: BodyLoads::default(),
        mode: Mode::Static,
        expected: Vec::new(),
        exact: None,
        strict_tags: false,
    })
}

/// Largest hoop stress `t·σ·t` over the cells touching `tag`, with the hole
/// centred at the origin, divided by the applied traction `sigma`.
pub fn stress_concentration(problem: &Problem, stresses: &[(Vec<f64>, Vec<f64>)], tag: &str, sigma: f64) -> Result<f64> {
    let by_tag = problem.mesh.facets_by_tag();
    let facets = by_tag.get(tag).ok_or_else(|| Error::Config(format!("mesh has no '{tag}' boundary")))?;
    let mut best = f64::NEG_INFINITY;
    for &f in facets {
        let c = problem.mesh.facet(f).boundary_cell().expect("tagged facet on the boundary");
        let x = problem.mesh.cell(c).barycenter;
        let th = x[1].atan2(x[0]);
        let t = [-th.sin(), th.cos()];
        let s = &stresses[c].0;
        let hoop = t[0] * t[0] * s[0] + t[0] * t[1] * (s[1] + s[2]) + t[1] * t[1] * s[3];
        best = best.max(hoop);
    }
    Ok(best / sigma)
}

/// Run one plate computation and attach `scf`, `analytical`, `kirsch`
/// (closed form) and `relative_error`.
pub fn run_plate(test: u8, row: &ScfRow, coarse: bool, options: &RunOptions) -> Result<CaseOutcome> {
    let spec = plate_hole(test, row, coarse)?;
    run_case_with(&spec, options, |problem, out| {
        let scf = stress_concentration(problem, &out.stresses, "hole", 1.0)?;
        out.metrics.push(("scf".into(), scf));
        out.metrics.push(("analytical".into(), row.analytical));
        out.metrics.push(("kirsch".into(), oracles::kirsch_cosserat_scf(0.3, row.a, row.r_over_l)));
        out.metrics.push(("relative_error".into(), (scf - row.analytical).abs() / row.analytical));
        Ok(())
    })
}

/// Entries of a sweep are independent and run in parallel.
pub fn plate_sweep(test: u8, coarse: bool, options: &RunOptions) -> Result<Vec<CaseOutcome>> {
    plate_table(test)?.par_iter().map(|row| run_plate(test, row, coarse, options)).collect()
}

/// Shear layer parameters of the boundary-layer case.
pub fn shear_layer() -> ShearLayer {
    let h = 1e-3;
    ShearLayer {
        height: h,
        shear_modulus: 1e10,
        coupling_ratio: 2.0,
        length: 5e-5,
        top_displacement: -0.1,
        top_rotation: 0.01 * h,
    }
}

/// Unit square of side 1 mm, `nx × ny` grid: u₁ and φ prescribed on
/// `bottom`/`top`, u₂ = 0 on the lateral mirror faces.
pub fn boundary_layer(nx: usize, ny: usize) -> CaseSpec {
    let p = shear_layer();
    let material = Material::Plane(
        CosseratMaterial2D::new(p.shear_modulus, 0.0, p.coupling_ratio, p.length).expect("valid layer material"),
    );
    let mut bcs = BoundaryConditions::new();
    bcs.constrain("bottom", Constraint::zero(Field::Displacement, Direction::Axis(0)));
    bcs.constrain("bottom", Constraint::zero(Field::Rotation, Direction::Axis(0)));
    bcs.constrain("top", Constraint::new(Field::Displacement, Direction::Axis(0), constant(p.top_displacement)));
    bcs.constrain("top", Constraint::new(Field::Rotation, Direction::Axis(0), constant(p.top_rotation)));
    for tag in ["left", "right"] {
        bcs.constrain(tag, Constraint::zero(Field::Displacement, Direction::Axis(1)));
    }
    CaseSpec {
        name: "boundary_layer".into(),
        description: "sheared layer with a rotation boundary layer".into(),
        mesh: MeshSource::Rectangle { origin: [0.0, 0.0], size: [p.height, p.height], cells: [nx, ny] },
        material,
        bcs,
        body: BodyLoads::default(),
        mode: Mode::Static,
        expected: Vec::new(),
        exact: None,
        strict_tags: false,
    }
}

/// Run the boundary-layer case and compare every cell with the
/// finite-difference oracle (N = 10⁴). Errors are relative to the largest
/// magnitude of each oracle profile.
pub fn run_boundary_layer(spec: &CaseSpec, options: &RunOptions) -> Result<CaseOutcome> {
    let layer = shear_layer();
    let oracle = layer.solve_fd(10_000)?;
    let half = layer.solve_fd(5_000)?;
    run_case_with(spec, options, |problem, out| {
        let dofs = problem.dofs();
        let (mut eu, mut ep) = (0.0f64, 0.0f64);
        for (c, cell) in problem.mesh.cells().iter().enumerate() {
            let (u, p) = oracle.at(cell.barycenter[1]);
            eu = eu.max((out.solution[dofs.u(c, 0)] - u).abs());
            ep = ep.max((out.solution[dofs.phi(c, 0)] - p).abs());
        }
        let (du, dp) = oracle.relative_change(&half);
        out.metrics.push(("u1_error".into(), eu / oracles::max_abs(&oracle.u1)));
        out.metrics.push(("phi_error".into(), ep / oracles::max_abs(&oracle.phi)));
        out.metrics.push(("oracle_change_u1".into(), du));
        out.metrics.push(("oracle_change_phi".into(), dp));
        Ok(())
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BeamResolution {
    /// 25 × 2 × 2 boxes, 600 tetrahedra.
    Reduced,
    /// 50 × 4 × 4 boxes, 4,800 tetrahedra.
    Full,
}

/// Cantilever 1 mm × 0.04 mm × 0.04 mm clamped on `left`, ramped transverse
/// traction on `right` up to `T_c`, over `T = 6.3e-5 s` in `steps` steps.
pub fn beam_flexion(resolution: BeamResolution, steps: usize) -> CaseSpec {
    let (len, w) = (1e-3, 4e-5);
    let l = len / 100.0;
    let (k, g, gc) = (16.67e9, 1e10, 5e9);
    let material = Material::Solid(
        CosseratMaterial3D::new(k, g, gc, g * l * l, 2.5 * g * l * l, 2.5 * g * l * l)
            .and_then(|m| m.with_inertia(2500.0, 0.4 * l * l))
            .expect("valid beam material"),
    );
    let young = 9.0 * k * g / (3.0 * k + g);
    let (t_end, t_c) = (6.3e-5, 3.2e-8);
    let amp = young * 1e-6;
    let mut bcs = BoundaryConditions::new();
    bcs.clamp("left", 3);
    bcs.load(
        "right",
        BoundaryLoad {
            traction: Some(Arc::new(move |_, t| if t <= t_c { [0.0, -t * amp / t_c, 0.0] } else { [0.0; 3] })),
            couple: None,
        },
    );
    let cells = match resolution {
        BeamResolution::Reduced => [25, 2, 2],
        BeamResolution::Full => [50, 4, 4],
    };
    CaseSpec {
        name: "beam_flexion".into(),
        description: "cantilever in dynamic flexion".into(),
        mesh: MeshSource::Box { origin: [0.0; 3], size: [len, w, w], cells },
        material,
        bcs,
        body: BodyLoads::default(),
        mode: Mode::Dynamic(Dynamics {
            end_time: t_end,
            dt: t_end / steps as f64,
            scheme: DampingScheme::Trapezoidal,
            initial_displacement: None,
            initial_velocity: None,
            probes: vec![Probe {
                name: "tip_uy".into(),
                point: Point::new(0.999 * len, 0.5 * w, 0.5 * w),
                field: Field::Displacement,
                component: 1,
                rate: false,
            }],
        }),
        expected: Vec::new(),
        exact: None,
        strict_tags: false,
    }
}

pub fn run_beam(spec: &CaseSpec, options: &RunOptions) -> Result<CaseOutcome> {
    run_case_with(spec, options, |_, out| {
        let traj = out.trajectory.as_ref().expect("dynamic run");
        let tip = traj.series("tip_uy").expect("tip probe");
        let max_tip = tip.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let nan = tip.iter().filter(|v| !v.is_finite()).count() + traj.non_finite;
        out.metrics.push(("max_tip".into(), max_tip));
        out.metrics.push(("non_finite".into(), nan as f64));
        Ok(())
    })
}

/// Lamb problem parameters at desk scale.
pub struct LambSetup {
    pub width: f64,
    pub depth: f64,
    pub cells: [usize; 2],
    pub shear_modulus: f64,
    pub lambda: f64,
    pub density: f64,
    pub frequency: f64,
    pub delay: f64,
    pub source_depth: f64,
    pub source_radius: f64,
    /// Depths below the source of the two P-wave probes.
    pub depth_probes: [f64; 2],
    /// Horizontal offsets of the surface probes.
    pub surface_offsets: Vec<f64>,
    pub end_time: f64,
    pub dt: f64,
}

impl Default for LambSetup {
    fn default() -> Self {
        let fc = 14.5;
        LambSetup {
            width: 2000.0,
            depth: 1000.0,
            cells: [100, 50],
            shear_modulus: 7.52e9,
            lambda: 3.76e9,
            density: 2500.0,
            frequency: fc,
            delay: 1.2 / fc,
            source_depth: 100.0,
            source_radius: 30.0,
            depth_probes: [200.0, 500.0],
            surface_offsets: vec![400.0, 500.0, 600.0, 700.0, 800.0],
            end_time: 0.5,
            dt: 2e-4,
        }
    }
}

impl LambSetup {
    pub fn p_speed(&self) -> f64 {
        ((self.lambda + 2.0 * self.shear_modulus) / self.density).sqrt()
    }

    pub fn s_speed(&self) -> f64 {
        (self.shear_modulus / self.density).sqrt()
    }

    pub fn mesh_size(&self) -> f64 {
        self.width / self.cells[0] as f64
    }
}

/// Lamb problem with the default desk-scale setup.
pub fn lamb_desk() -> CaseSpec {
    lamb_with(&LambSetup::default())
}

/// All-Neumann rectangle, G = G_c, ℓ = h/√2, I = ℓ²/6, vertical Ricker
/// force below the centre of the top surface.
pub fn lamb_with(s: &LambSetup) -> CaseSpec {
    let h = s.mesh_size();
    let l = h / 2f64.sqrt();
    let material = Material::Plane(
        CosseratMaterial2D::from_lame(s.lambda, s.shear_modulus, s.shear_modulus, l)
            .and_then(|m| m.with_inertia(s.density, l * l / 6.0))
            .expect("valid Lamb material"),
    );
    let x0 = 0.5 * s.width;
    let source = Point::new(x0, s.depth - s.source_depth, 0.0);
    let body = BodyLoads {
        force: Some(waves::ricker_source(s.frequency, s.delay, source, s.source_radius, 1.0, 2)),
        couple: None,
    };
    let mut probes = Vec::new();
    for d in s.depth_probes {
        probes.push(Probe {
            name: format!("uy_depth{d}"),
            point: Point::new(x0, source[1] - d, 0.0),
            field: Field::Displacement,
            component: 1,
            rate: false,
        });
    }
    // Surface probes sit just below the surface, inside the top cell row.
    let y_s = s.depth - 0.05 * h;
    for &o in &s.surface_offsets {
        for (comp, label) in [(1, "vy"), (0, "vx")] {
            probes.push(Probe {
                name: format!("{label}_surface{o}"),
                point: Point::new(x0 + o, y_s, 0.0),
                field: Field::Displacement,
                component: comp,
                rate: true,
            });
        }
    }
    CaseSpec {
        name: "lamb_desk".into(),
        description: "Lamb problem, desk scale".into(),
        mesh: MeshSource::Rectangle { origin: [0.0, 0.0], size: [s.width, s.depth], cells: s.cells },
        material,
        bcs: BoundaryConditions::new(),
        body,
        mode: Mode::Dynamic(Dynamics {
            end_time: s.end_time,
            dt: s.dt,
            scheme: DampingScheme::Explicit,
            initial_displacement: None,
            initial_velocity: None,
            probes,
        }),
        expected: Vec::new(),
        exact: None,
        strict_tags: false,
    }
}

/// Run the Lamb case and attach the measured P speed (`vp_measured`,
/// `vp_target`, `vp_error`) and the surface-pulse analysis
/// (`surface_speed`, `surface_detected`, `cosserat_shear_speed`).
pub fn run_lamb(spec: &CaseSpec, options: &RunOptions) -> Result<CaseOutcome> {
    let s = LambSetup::default();
    run_case_with(spec, options, |_, out| {
        let traj = out.trajectory.as_ref().expect("dynamic run");
        let series = |name: String| -> Result<Vec<f64>> {
            traj.series(&name).map(<[f64]>::to_vec).ok_or_else(|| Error::Other(format!("missing probe {name}")))
        };
        let [d0, d1] = s.depth_probes;
        let near = series(format!("uy_depth{d0}"))?;
        let far = series(format!("uy_depth{d1}"))?;
        let vp = waves::wave_speed_probe(&traj.times, (&near, d0), (&far, d1))?;
        let target = s.p_speed();
        let vertical: Vec<Vec<f64>> = s.surface_offsets.iter().map(|o| series(format!("vy_surface{o}"))).collect::<Result<_>>()?;
        let horizontal: Vec<Vec<f64>> = s.surface_offsets.iter().map(|o| series(format!("vx_surface{o}"))).collect::<Result<_>>()?;
        let surface = waves::surface_wave(&traj.times, &vertical, &horizontal, &s.surface_offsets)?;
        let h = s.mesh_size();
        let k = 2.0 * std::f64::consts::PI * s.frequency / s.s_speed();
        out.metrics.push(("vp_measured".into(), vp));
        out.metrics.push(("vp_target".into(), target));
        out.metrics.push(("vp_error".into(), (vp - target).abs() / target));
        out.metrics.push(("surface_speed".into(), surface.apparent_speed));
        out.metrics.push(("surface_detected".into(), if surface.detected(0.85 * target) { 1.0 } else { 0.0 }));
        out.metrics.push(("s_speed".into(), s.s_speed()));
        out.metrics.push((
            "cosserat_shear_speed".into(),
            waves::cosserat_shear_speed(s.shear_modulus, s.shear_modulus, h / 2f64.sqrt(), s.density, k),
        ));
        Ok(())
    })
}
