//! Facet forces and couples in DEM form.

use crate::material::{Material, epsilon_contract};
use crate::mesh::{FacetSide, Mesh};
use crate::sparse::norm;
use crate::system::{Operators, stress_field};

/// Interior facet forces and couples `|F| {σ}_F n_F`, cell moment sources
/// `|c| ε:σ_c` and boundary force diagnostics `|F| σ_c n_F`.
#[derive(Debug, Clone)]
pub struct FacetLoadSet {
    /// Indexed by facet; `None` on boundary facets.
    pub forces: Vec<Option<Vec<f64>>>,
    pub couples: Vec<Option<Vec<f64>>>,
    pub moments: Vec<Vec<f64>>,
    /// Indexed by facet; `None` on interior facets.
    pub boundary_forces: Vec<Option<Vec<f64>>>,
}

impl FacetLoadSet {
    /// Force facet `f` exerts on cell `c`: `ι_{c,F}` times the stored vector.
    pub fn force_on(&self, mesh: &Mesh, f: usize, c: usize) -> Option<Vec<f64>> {
        let s = mesh.facet(f).orientation(c);
        self.forces[f].as_ref().map(|v| v.iter().map(|x| s * x).collect())
    }
}

/// `T n` for a flattened `rows × d` tensor.
fn contract_normal(t: &[f64], rows: usize, d: usize, n: &[f64]) -> Vec<f64> {
    (0..rows).map(|i| (0..d).map(|j| t[i * d + j] * n[j]).sum()).collect()
}

pub fn dem_post(mesh: &Mesh, material: &Material, ops: &Operators, q: &[f64]) -> FacetLoadSet {
    let d = mesh.dim();
    let r = material.rotation_dim();
    let stresses = stress_field(material, ops, q);
    let nf = mesh.num_facets();
    let mut forces = vec![None; nf];
    let mut couples = vec![None; nf];
    let mut boundary_forces = vec![None; nf];
    for (f, facet) in mesh.facets().iter().enumerate() {
        let n = &facet.normal.as_slice()[..d];
        match facet.side {
            FacetSide::Interior { minus, plus } => {
                let avg = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| 0.5 * (x + y)).collect::<Vec<_>>();
                let sigma = avg(&stresses[minus].0, &stresses[plus].0);
                let mu = avg(&stresses[minus].1, &stresses[plus].1);
                let scale = |v: Vec<f64>| v.into_iter().map(|x| x * facet.measure).collect::<Vec<_>>();
                forces[f] = Some(scale(contract_normal(&sigma, d, d, n)));
                couples[f] = Some(scale(contract_normal(&mu, r, d, n)));
            }
            FacetSide::Boundary { cell } => {
                let t = contract_normal(&stresses[cell].0, d, d, n);
                boundary_forces[f] = Some(t.into_iter().map(|x| x * facet.measure).collect());
            }
        }
    }
    let moments = stresses
        .iter()
        .zip(mesh.cells())
        .map(|((s, _), cell)| epsilon_contract(d, s).into_iter().map(|m| m * cell.measure).collect())
        .collect();
    FacetLoadSet { forces, couples, moments, boundary_forces }
}

/// For every cell whose facets are all interior: `‖Σ_F ι_{c,F} force_F‖`,
/// paired with the largest facet force magnitude of that cell.
pub fn balance_residuals(mesh: &Mesh, loads: &FacetLoadSet) -> Vec<(usize, f64, f64)> {
    let d = mesh.dim();
    let mut out = Vec::new();
    for (c, cell) in mesh.cells().iter().enumerate() {
        if cell.facets.iter().any(|&f| mesh.facet(f).is_boundary()) {
            continue;
        }
        let mut sum = vec![0.0; d];
        let mut scale: f64 = 0.0;
        for &f in &cell.facets {
            let v = loads.force_on(mesh, f, c).expect("interior facet force");
            scale = scale.max(norm(&v));
            sum.iter_mut().zip(&v).for_each(|(s, x)| *s += x);
        }
        out.push((c, norm(&sum), scale));
    }
    out
}
