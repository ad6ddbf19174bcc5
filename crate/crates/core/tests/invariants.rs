//! Structural invariants of the discretization on a structured 2D mesh and
//! a perturbed (unstructured) 3D tetrahedral mesh.

use cosserat_dem::geometry::Point;
use cosserat_dem::material::{CosseratMaterial2D, CosseratMaterial3D, Material};
use cosserat_dem::mesh::{Mesh, box_mesh, rect_mesh};
use cosserat_dem::solver::dem_post;
use cosserat_dem::sparse::{SparseMatrix, dot, norm};
use cosserat_dem::system::{BodyLoads, BoundaryConditions, Operators, Problem, rigid_motions};
use proptest::prelude::*;

fn plane() -> Material {
    Material::Plane(CosseratMaterial2D::new(1e3, 0.25, 0.5, 0.1).unwrap().with_inertia(2.0, 0.3).unwrap())
}

fn solid() -> Material {
    let (g, l) = (1e3, 0.05);
    Material::Solid(
        CosseratMaterial3D::new(1.6e3, g, 0.5 * g, g * l * l, 2.5 * g * l * l, 2.5 * g * l * l)
            .unwrap()
            .with_inertia(2.0, 0.3)
            .unwrap(),
    )
}

fn mesh_2d() -> Mesh {
    rect_mesh([-0.3, 0.1], 1.2, 0.8, 6, 4)
}

/// 3×3×3 Kuhn box with every interior vertex displaced by up to 20% of the
/// grid spacing; `offsets` supplies one value in [−1, 1] per coordinate.
fn mesh_3d(offsets: &[f64]) -> Mesh {
    let base = box_mesh([0.0; 3], [1.0, 0.9, 0.8], [3, 3, 3]);
    let on_boundary = base.boundary_vertices();
    let h = [1.0 / 3.0, 0.3, 0.8 / 3.0];
    base.moved(|i, x| {
        if on_boundary[i] {
            return *x;
        }
        let mut y = *x;
        for k in 0..3 {
            y[k] += 0.2 * h[k] * offsets[(3 * i + k) % offsets.len()];
        }
        y
    })
    .unwrap()
}

fn all_meshes(offsets: &[f64]) -> Vec<(Mesh, Material)> {
    vec![(mesh_2d(), plane()), (mesh_3d(offsets), solid())]
}

fn affine(c: &[f64], x: &Point) -> f64 {
    c[0] + c[1] * x[0] + c[2] * x[1] + c[3] * x[2]
}

fn quad_form(k: &SparseMatrix, v: &[f64]) -> f64 {
    dot(v, &k.matvec(v))
}

fn clamped_problem<'m>(mesh: &'m Mesh, material: &Material) -> Problem<'m> {
    let mut bcs = BoundaryConditions::new();
    bcs.clamp("left", mesh.dim());
    Problem::new(mesh, material.clone(), bcs, BodyLoads::default()).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn reconstructions_reproduce_affine_fields(
        coef in prop::collection::vec(-5.0f64..5.0, 4),
        offsets in prop::collection::vec(-1.0f64..1.0, 32),
    ) {
        for (mesh, _) in all_meshes(&offsets) {
            let ops = Operators::build(&mesh).unwrap();
            let rec = &ops.reconstruction;
            let field = |c: usize| affine(&coef, &mesh.cell(c).barycenter);
            let scale = 1.0 + coef.iter().map(|c| c.abs()).sum::<f64>();
            for f in 0..mesh.num_facets() {
                let exact = affine(&coef, &mesh.facet(f).barycenter);
                prop_assert!((rec.facets.value(f, field) - exact).abs() < 1e-10 * scale);
            }
            let d = mesh.dim();
            for c in 0..mesh.num_cells() {
                let g = rec.gradients.gradient(c, field);
                for i in 0..d {
                    prop_assert!((g[i] - coef[1 + i]).abs() < 1e-10 * scale);
                }
                // The P1 reconstruction is exact anywhere, including at vertices.
                for &v in &mesh.cell(c).vertices {
                    let x = mesh.vertices()[v];
                    prop_assert!((rec.p1_eval(&mesh, c, field, &x) - affine(&coef, &x)).abs() < 1e-10 * scale);
                }
            }
        }
    }

    #[test]
    fn elastic_and_penalty_are_symmetric_psd(
        v in prop::collection::vec(-1.0f64..1.0, 4000),
        offsets in prop::collection::vec(-1.0f64..1.0, 32),
    ) {
        for (mesh, material) in all_meshes(&offsets) {
            let p = clamped_problem(&mesh, &material);
            let sys = p.assemble();
            let n = p.dofs().len();
            let probe: Vec<f64> = (0..n).map(|i| v[i % v.len()] * (1.0 + (i / v.len()) as f64)).collect();
            for k in [&sys.k_elas, &sys.k_pen] {
                prop_assert!(k.asymmetry() <= 1e-12 * k.max_abs());
                let q = quad_form(k, &probe);
                prop_assert!(q >= -1e-12 * k.max_abs() * dot(&probe, &probe), "v'Kv = {q}");
            }
        }
    }

    #[test]
    fn dem_forces_obey_action_reaction(
        v in prop::collection::vec(-1.0f64..1.0, 500),
        offsets in prop::collection::vec(-1.0f64..1.0, 32),
    ) {
        for (mesh, material) in all_meshes(&offsets) {
            let ops = Operators::build(&mesh).unwrap();
            let n = ops.dofs.len();
            let q: Vec<f64> = (0..n).map(|i| v[(7 * i) % v.len()]).collect();
            let loads = dem_post(&mesh, &material, &ops, &q);
            for f in mesh.interior_facets() {
                let cells = mesh.facet(f).cells();
                let a = loads.force_on(&mesh, f, cells[0]).unwrap();
                let b = loads.force_on(&mesh, f, cells[1]).unwrap();
                for (x, y) in a.iter().zip(&b) {
                    prop_assert_eq!(x + y, 0.0);
                }
            }
        }
    }
}

#[test]
fn stencil_coefficients_form_a_partition_of_unity() {
    for (mesh, _) in all_meshes(&[0.7, -0.4, 0.9, -1.0, 0.2]) {
        let ops = Operators::build(&mesh).unwrap();
        let d = mesh.dim();
        for s in ops.reconstruction.facets.stencils() {
            assert_eq!(s.cells.len(), d + 1);
            let sum: f64 = s.coefficients.iter().sum();
            assert!((sum - 1.0).abs() < 1e-12, "facet {}: {sum}", s.facet);
        }
        // Gradients annihilate constants.
        for c in 0..mesh.num_cells() {
            let g = ops.reconstruction.gradients.gradient(c, |_| 1.0);
            assert!(g.norm() < 1e-10 / mesh.cell(c).diameter);
        }
    }
}

#[test]
fn nitsche_blocks_are_negative_transposes() {
    for (mesh, material) in all_meshes(&[0.3, -0.8, 0.5]) {
        let sys = clamped_problem(&mesh, &material).assemble();
        assert!(sys.k_con.nnz() > 0);
        let diff = sys.k_con.linear_combination(1.0, &sys.k_nsym.transpose(), 1.0);
        assert!(diff.max_abs() <= 1e-14 * sys.k_con.max_abs(), "{}", diff.max_abs());
        // The skew part vanishes from the energy.
        let n = sys.k_con.nrows();
        let v: Vec<f64> = (0..n).map(|i| ((i * 37 % 11) as f64 - 5.0) / 5.0).collect();
        let s = sys.k_con.add(&sys.k_nsym);
        assert!(quad_form(&s, &v).abs() <= 1e-12 * s.max_abs() * dot(&v, &v));
    }
}

#[test]
fn mass_is_diagonal_and_positive() {
    for (mesh, material) in all_meshes(&[0.1, 0.5, -0.9]) {
        let sys = clamped_problem(&mesh, &material).assemble();
        let dofs = sys.mass.len();
        assert_eq!(dofs, mesh.num_cells() * if mesh.dim() == 2 { 3 } else { 6 });
        assert!(sys.mass.iter().all(|m| *m > 0.0));
        let total: f64 = (0..mesh.num_cells()).map(|c| sys.mass[c * dofs / mesh.num_cells()]).sum();
        assert!((total - material.density() * mesh.total_measure()).abs() < 1e-12 * total);
    }
}

#[test]
fn rigid_motions_span_the_kernel_without_dirichlet_facets() {
    for (mesh, material) in all_meshes(&[-0.6, 0.4, 0.8, -0.2]) {
        let p = Problem::new(&mesh, material.clone(), BoundaryConditions::new(), BodyLoads::default()).unwrap();
        assert!(p.partition.dirichlet.is_empty());
        let sys = p.assemble();
        let k = sys.stiffness();
        let modes = rigid_motions(&mesh, p.dofs());
        assert_eq!(modes.len(), if mesh.dim() == 2 { 3 } else { 6 });
        for r in &modes {
            let kr = k.matvec(r);
            assert!(norm(&kr) <= 1e-10 * k.max_abs() * norm(r), "{}", norm(&kr));
        }
        // A non-rigid field is not annihilated.
        let stretch = p.dofs().sample(&mesh, |x| [x[0], 0.0, 0.0], |_| [0.0; 3]);
        assert!(norm(&k.matvec(&stretch)) > 1e-6 * k.max_abs() * norm(&stretch));
    }
}

#[test]
fn perturbed_mesh_is_unstructured() {
    let m = mesh_3d(&[0.9, -0.7, 0.5, 0.3, -0.1]);
    let measures: Vec<f64> = m.cells().iter().map(|c| c.measure).collect();
    let (lo, hi) = measures.iter().fold((f64::INFINITY, 0.0f64), |(a, b), v| (a.min(*v), b.max(*v)));
    assert!(hi / lo > 1.2);
    assert!((m.total_measure() - 0.72).abs() < 1e-12);
}
