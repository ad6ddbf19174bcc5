//! Facet and gradient reconstructions from cell-centered values.
//!
//! Every facet value is a barycentric combination of `d + 1` nearby cell
//! values, chosen so that affine fields are reproduced exactly. Cell gradients
//! follow from the discrete Stokes formula over the reconstructed facet
//! values, and the cellwise P1 reconstruction is `v_c + G_c(v)·(x − x_c)`.
//!
//! All operators act on scalar per-cell fields; vector and tensor dofs are
//! handled one component at a time.

use std::fmt::Write as _;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::geometry::Point;
use crate::mesh::Mesh;

/// Support simplices with a volume below `DEGENERACY * h^d` are rejected.
pub const DEGENERACY: f64 = 1e-10;

/// Neighbor expansion rounds before the emergency round.
const EXPANSION_ROUNDS: usize = 2;

#[derive(Debug, Clone, PartialEq)]
pub struct FacetStencil {
    pub facet: usize,
    pub cells: Vec<usize>,
    pub coefficients: Vec<f64>,
}

impl FacetStencil {
    pub fn apply(&self, field: impl Fn(usize) -> f64) -> f64 {
        self.cells
            .iter()
            .zip(&self.coefficients)
            .map(|(&c, &a)| a * field(c))
            .sum()
    }
}

fn simplex_volume(points: &[Point], dim: usize) -> f64 {
    let o = points[0];
    if dim == 2 {
        let a = points[1] - o;
        let b = points[2] - o;
        0.5 * (a.x * b.y - a.y * b.x).abs()
    } else {
        (points[1] - o).cross(&(points[2] - o)).dot(&(points[3] - o)).abs() / 6.0
    }
}

/// Barycentric coordinates of `x` with respect to the simplex `points`
/// (`dim + 1` points). Coordinates may be negative when `x` lies outside.
pub fn barycentric_coords(points: &[Point], x: &Point, dim: usize) -> Result<Vec<f64>> {
    assert_eq!(points.len(), dim + 1, "need d + 1 support points");
    let scale = points
        .iter()
        .skip(1)
        .map(|p| (p - points[0]).norm())
        .fold(0.0, f64::max);
    if scale == 0.0 || simplex_volume(points, dim) <= 1e-14 * scale.powi(dim as i32) {
        return Err(Error::SingularSimplex);
    }
    let n = dim + 1;
    let mut m = DMatrix::<f64>::zeros(n, n);
    let mut rhs = DVector::<f64>::zeros(n);
    rhs[0] = 1.0;
    for (j, p) in points.iter().enumerate() {
        m[(0, j)] = 1.0;
        for k in 0..dim {
            // shift by the first point to keep the system well scaled
            m[(k + 1, j)] = (p[k] - points[0][k]) / scale;
        }
    }
    for k in 0..dim {
        rhs[k + 1] = (x[k] - points[0][k]) / scale;
    }
    let alpha = m.lu().solve(&rhs).ok_or(Error::SingularSimplex)?;
    if alpha.iter().any(|a| !a.is_finite()) {
        return Err(Error::SingularSimplex);
    }
    Ok(alpha.iter().copied().collect())
}

/// Advance `idx` to the next k-combination of `0..n` in lexicographic order.
fn next_combination(idx: &mut [usize], n: usize) -> bool {
    let k = idx.len();
    let mut i = k;
    while i > 0 {
        i -= 1;
        if idx[i] < n - k + i {
            idx[i] += 1;
            for j in i + 1..k {
                idx[j] = idx[j - 1] + 1;
            }
            return true;
        }
    }
    false
}

fn expand(mesh: &Mesh, set: &mut Vec<usize>) {
    let mut added = Vec::new();
    for &c in set.iter() {
        for nb in mesh.neighbors(c) {
            if !set.contains(&nb) && !added.contains(&nb) {
                added.push(nb);
            }
        }
    }
    set.extend(added);
}

fn first_admissible(mesh: &Mesh, f: usize, candidates: &[usize], h: f64) -> Option<Vec<usize>> {
    let d = mesh.dim();
    let k = d + 1;
    if candidates.len() < k {
        return None;
    }
    let xf = mesh.facet(f).barycenter;
    let mut ranked = candidates.to_vec();
    ranked.sort_by(|&a, &b| {
        let da = (mesh.cell(a).barycenter - xf).norm();
        let db = (mesh.cell(b).barycenter - xf).norm();
        da.total_cmp(&db).then(a.cmp(&b))
    });
    let threshold = DEGENERACY * h.powi(d as i32);
    let mut idx: Vec<usize> = (0..k).collect();
    loop {
        let pts: Vec<Point> = idx.iter().map(|&i| mesh.cell(ranked[i]).barycenter).collect();
        if simplex_volume(&pts, d) > threshold {
            return Some(idx.iter().map(|&i| ranked[i]).collect());
        }
        if !next_combination(&mut idx, ranked.len()) {
            return None;
        }
    }
}

/// Choose the `d + 1` support cells of facet `f`.
///
/// Candidates are the facet's cells grown by two rounds of facet-neighbor
/// expansion (plus one emergency round); they are ranked by barycenter
/// distance to the facet barycenter, then cell id, and the first
/// lexicographic subset spanning a non-degenerate simplex wins.
pub fn select_support(mesh: &Mesh, f: usize) -> Result<Vec<usize>> {
    let facet = mesh.facet(f);
    let mut set = facet.cells();
    let h = set.iter().map(|&c| mesh.cell(c).diameter).fold(0.0, f64::max);
    for _ in 0..EXPANSION_ROUNDS {
        expand(mesh, &mut set);
    }
    if let Some(s) = first_admissible(mesh, f, &set, h) {
        return Ok(s);
    }
    expand(mesh, &mut set);
    first_admissible(mesh, f, &set, h).ok_or(Error::DegenerateStencil {
        facet: f,
        candidates: set.len(),
    })
}

/// The facet reconstruction operator: one stencil per facet.
#[derive(Debug, Clone)]
pub struct FacetOperator {
    stencils: Vec<FacetStencil>,
}

impl FacetOperator {
    pub fn build(mesh: &Mesh) -> Result<FacetOperator> {
        let d = mesh.dim();
        let mut stencils = Vec::with_capacity(mesh.num_facets());
        for f in 0..mesh.num_facets() {
            let cells = select_support(mesh, f)?;
            let pts: Vec<Point> = cells.iter().map(|&c| mesh.cell(c).barycenter).collect();
            let coefficients = barycentric_coords(&pts, &mesh.facet(f).barycenter, d)?;
            stencils.push(FacetStencil {
                facet: f,
                cells,
                coefficients,
            });
        }
        Ok(FacetOperator { stencils })
    }

    pub fn stencil(&self, f: usize) -> &FacetStencil {
        &self.stencils[f]
    }

    pub fn stencils(&self) -> &[FacetStencil] {
        &self.stencils
    }

    /// Reconstructed value of a scalar cell field at the barycenter of `f`.
    pub fn value(&self, f: usize, field: impl Fn(usize) -> f64) -> f64 {
        self.stencils[f].apply(field)
    }

    /// Largest distance from a facet barycenter to one of its support
    /// barycenters, divided by the largest cell diameter.
    pub fn locality(&self, mesh: &Mesh) -> f64 {
        let h = mesh.max_cell_diameter();
        self.stencils
            .iter()
            .flat_map(|s| {
                let xf = mesh.facet(s.facet).barycenter;
                s.cells.iter().map(move |&c| (mesh.cell(c).barycenter - xf).norm())
            })
            .fold(0.0, f64::max)
            / h
    }

    /// Largest |α| over all stencils; large values flag poorly shaped supports.
    pub fn max_coefficient(&self) -> f64 {
        self.stencils
            .iter()
            .flat_map(|s| s.coefficients.iter())
            .fold(0.0f64, |m, a| m.max(a.abs()))
    }

    /// CSV dump `facet,cells,coefficients` with `;`-separated lists.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("facet,cells,coefficients\n");
        for s in &self.stencils {
            let cells: Vec<String> = s.cells.iter().map(|c| c.to_string()).collect();
            let coefs: Vec<String> = s.coefficients.iter().map(|a| format!("{a:.17e}")).collect();
            let _ = writeln!(out, "{},{},{}", s.facet, cells.join(";"), coefs.join(";"));
        }
        out
    }
}

/// Gradient of a scalar field in one cell as a sparse combination of cell values.
#[derive(Debug, Clone, Default)]
pub struct CellGradient {
    /// `(cell, weight)`: gradient = Σ weight · value(cell).
    pub entries: Vec<(usize, Point)>,
}

impl CellGradient {
    pub fn apply(&self, field: impl Fn(usize) -> f64) -> Point {
        self.entries.iter().map(|(c, w)| w * field(*c)).sum()
    }
}

#[derive(Debug, Clone)]
pub struct GradientOperator {
    cells: Vec<CellGradient>,
}

impl GradientOperator {
    pub fn build(mesh: &Mesh, facets: &FacetOperator) -> GradientOperator {
        let cells = (0..mesh.num_cells())
            .map(|c| {
                let cell = mesh.cell(c);
                let mut entries: Vec<(usize, Point)> = Vec::new();
                for &f in &cell.facets {
                    let facet = mesh.facet(f);
                    let w = facet.outward_normal(c) * (facet.measure / cell.measure);
                    let st = facets.stencil(f);
                    for (&s, &a) in st.cells.iter().zip(&st.coefficients) {
                        match entries.iter_mut().find(|(k, _)| *k == s) {
                            Some((_, acc)) => *acc += w * a,
                            None => entries.push((s, w * a)),
                        }
                    }
                }
                entries.sort_by_key(|(k, _)| *k);
                CellGradient { entries }
            })
            .collect();
        GradientOperator { cells }
    }

    pub fn cell(&self, c: usize) -> &CellGradient {
        &self.cells[c]
    }

    pub fn gradient(&self, c: usize, field: impl Fn(usize) -> f64) -> Point {
        self.cells[c].apply(field)
    }
}

/// Facet and gradient operators of a mesh.
#[derive(Debug, Clone)]
pub struct Reconstruction {
    pub facets: FacetOperator,
    pub gradients: GradientOperator,
}

impl Reconstruction {
    pub fn build(mesh: &Mesh) -> Result<Reconstruction> {
        let facets = FacetOperator::build(mesh)?;
        let gradients = GradientOperator::build(mesh, &facets);
        Ok(Reconstruction { facets, gradients })
    }

    /// Cellwise P1 reconstruction of a scalar field evaluated at `x`.
    pub fn p1_eval(&self, mesh: &Mesh, c: usize, field: impl Fn(usize) -> f64, x: &Point) -> f64 {
        let g = self.gradients.gradient(c, &field);
        field(c) + g.dot(&(x - mesh.cell(c).barycenter))
    }

    /// Coefficients `(cell, weight)` of the linear functional v ↦ 𝕽_c(v)(x).
    pub fn p1_functional(&self, mesh: &Mesh, c: usize, x: &Point) -> Vec<(usize, f64)> {
        let dx = x - mesh.cell(c).barycenter;
        let mut out: Vec<(usize, f64)> = self
            .gradients
            .cell(c)
            .entries
            .iter()
            .map(|(k, w)| (*k, w.dot(&dx)))
            .collect();
        match out.iter_mut().find(|(k, _)| *k == c) {
            Some((_, w)) => *w += 1.0,
            None => out.push((c, 1.0)),
        }
        out
    }
}
