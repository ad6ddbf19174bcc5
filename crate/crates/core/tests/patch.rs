use cosserat_dem::cases::builtin::{patch, patch_on};
use cosserat_dem::cases::{CaseOutcome, CaseSpec, MeshSource, Mode, RunOptions, run_case};
use cosserat_dem::material::{CosseratMaterial2D, Material};
use cosserat_dem::system::{BodyLoads, BoundaryConditions, Constraint, Direction, Field};

fn max_stress_error(out: &CaseOutcome) -> f64 {
    out.report
        .components
        .iter()
        .filter(|c| c.name.starts_with('s'))
        .filter_map(|c| c.max_relative_error)
        .fold(0.0, f64::max)
}

fn refinement_errors(which: u8) -> Vec<f64> {
    let spec = patch_on(which, [10, 5]).unwrap();
    (0..4)
        .map(|refine| max_stress_error(&run_case(&spec, &RunOptions { refine, ..Default::default() }).unwrap()))
        .collect()
}

/// Errors at round-off level count as converged.
fn non_increasing(errors: &[f64]) -> bool {
    errors.windows(2).all(|w| w[1] <= w[0] || w[1] < 1e-8)
}

#[test]
fn patch2_error_does_not_grow_under_refinement() {
    let e = refinement_errors(2);
    assert!(non_increasing(&e), "{e:?}");
}

#[test]
fn patch3_error_does_not_grow_under_refinement() {
    let e = refinement_errors(3);
    assert!(non_increasing(&e), "{e:?}");
    assert!(e[3] < e[0], "{e:?}");
}

#[test]
fn patch1_is_exact_on_every_level() {
    for e in refinement_errors(1) {
        assert!(e < 1e-10, "{e}");
    }
}

#[test]
fn patch_l2_errors_are_small() {
    for which in 1..=3 {
        let out = run_case(&patch(which).unwrap(), &RunOptions::default()).unwrap();
        assert!(out.report.l2_displacement.unwrap() < 1e-3, "patch{which}");
        assert!(out.report.l2_rotation.unwrap() < 1e-3, "patch{which}");
        assert!(out.residual.unwrap() < 1e-10);
    }
}

#[test]
fn zero_data_gives_zero_solution() {
    let mut bcs = BoundaryConditions::new();
    bcs.clamp("left", 2);
    bcs.constrain("right", Constraint::zero(Field::Displacement, Direction::Normal));
    let spec = CaseSpec {
        name: "zero".into(),
        description: String::new(),
        mesh: MeshSource::Rectangle { origin: [0.0, 0.0], size: [1.0, 0.5], cells: [6, 3] },
        material: Material::Plane(CosseratMaterial2D::new(1.0, 0.3, 1.0, 0.1).unwrap()),
        bcs,
        body: BodyLoads::default(),
        mode: Mode::Static,
        expected: vec![("sxx".into(), cosserat_dem::cases::Expected::Constant(0.0))],
        exact: None,
        strict_tags: false,
    };
    let out = run_case(&spec, &RunOptions::default()).unwrap();
    assert!(out.solution.iter().all(|v| *v == 0.0));
    let c = out.report.component("sxx").unwrap();
    assert_eq!(c.max_absolute_error, Some(0.0));
    assert_eq!(c.max_relative_error, None);
}
