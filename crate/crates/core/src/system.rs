//! Assembly of the discrete bilinear and linear forms over the cell dofs.
//!
//! Every cell carries `d + r` unknowns: the displacement components followed
//! by the micro-rotation components (`r = 1` in 2D, `r = 3` in 3D). Matrices
//! follow the convention `a(u, v) = vᵀ A u`: rows index test functions.

use std::collections::BTreeMap;
use std::sync::Arc;

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::geometry::Point;
use crate::material::{Material, epsilon_dot};
use crate::mesh::{FacetPartition, Mesh, classify_facets};
use crate::reconstruction::Reconstruction;
use crate::sparse::{Assembler, SparseMatrix};

/// Scalar data `(x, t) ↦ value`.
pub type ScalarFn = Arc<dyn Fn(&Point, f64) -> f64 + Send + Sync>;
/// Vector data `(x, t) ↦ [v0, v1, v2]`; trailing entries are ignored in 2D.
pub type VectorFn = Arc<dyn Fn(&Point, f64) -> [f64; 3] + Send + Sync>;

pub fn constant(value: f64) -> ScalarFn {
    Arc::new(move |_, _| value)
}

pub fn constant_vector(value: [f64; 3]) -> VectorFn {
    Arc::new(move |_, _| value)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DofMap {
    pub dim: usize,
    pub rotation_dim: usize,
    pub num_cells: usize,
}

impl DofMap {
    pub fn new(dim: usize, num_cells: usize) -> Self {
        DofMap { dim, rotation_dim: if dim == 2 { 1 } else { 3 }, num_cells }
    }

    pub fn per_cell(&self) -> usize {
        self.dim + self.rotation_dim
    }

    pub fn len(&self) -> usize {
        self.per_cell() * self.num_cells
    }

    pub fn is_empty(&self) -> bool {
        self.num_cells == 0
    }

    pub fn u(&self, cell: usize, i: usize) -> usize {
        cell * self.per_cell() + i
    }

    pub fn phi(&self, cell: usize, k: usize) -> usize {
        cell * self.per_cell() + self.dim + k
    }

    /// Dof vector from per-cell displacement and rotation samples.
    pub fn sample(
        &self,
        mesh: &Mesh,
        u: impl Fn(&Point) -> [f64; 3],
        phi: impl Fn(&Point) -> [f64; 3],
    ) -> Vec<f64> {
        let mut q = vec![0.0; self.len()];
        for (c, cell) in mesh.cells().iter().enumerate() {
            let uv = u(&cell.barycenter);
            let pv = phi(&cell.barycenter);
            for i in 0..self.dim {
                q[self.u(c, i)] = uv[i];
            }
            for k in 0..self.rotation_dim {
                q[self.phi(c, k)] = pv[k];
            }
        }
        q
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Field {
    Displacement,
    Rotation,
}

/// Component of a field a constraint acts on.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Direction {
    Axis(usize),
    /// Outward facet normal.
    Normal,
    /// Fixed direction, normalized on use.
    Vector(Point),
}

/// Weakly imposed condition `m · w = g` on a boundary facet, where `w` is the
/// displacement or rotation and `m` the constraint direction.
#[derive(Clone)]
pub struct Constraint {
    pub field: Field,
    pub direction: Direction,
    pub value: ScalarFn,
}

impl std::fmt::Debug for Constraint {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Constraint")
            .field("field", &self.field)
            .field("direction", &self.direction)
            .finish_non_exhaustive()
    }
}

impl Constraint {
    pub fn new(field: Field, direction: Direction, value: ScalarFn) -> Self {
        Constraint { field, direction, value }
    }

    pub fn zero(field: Field, direction: Direction) -> Self {
        Self::new(field, direction, constant(0.0))
    }
}

/// Surface traction `g` and surface couple `m` on Neumann facets.
#[derive(Clone, Default)]
pub struct BoundaryLoad {
    pub traction: Option<VectorFn>,
    pub couple: Option<VectorFn>,
}

/// Test-function trace that surface loads are paired with.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SurfaceTrace {
    /// Facet reconstruction `𝓡_F(v)`; reproduces constant-stress states exactly.
    #[default]
    Facet,
    /// Value `v_c` of the adjacent cell.
    Cell,
}

/// Per-tag boundary data. Tags without constraints are Neumann boundaries;
/// tags without loads are traction free.
#[derive(Clone, Default)]
pub struct BoundaryConditions {
    pub constraints: BTreeMap<String, Vec<Constraint>>,
    pub loads: BTreeMap<String, BoundaryLoad>,
    pub surface_trace: SurfaceTrace,
    /// Trace of the velocity and test function in the boundary damping form.
    pub damping_trace: DampingTrace,
}

/// Trace used by the boundary damping form.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum DampingTrace {
    /// Facet reconstruction, the same trace the Nitsche terms constrain.
    #[default]
    Facet,
    /// Value of the adjacent cell; keeps the damping on boundary cells only.
    Cell,
}

impl BoundaryConditions {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn constrain(&mut self, tag: &str, constraint: Constraint) -> &mut Self {
        self.constraints.entry(tag.to_string()).or_default().push(constraint);
        self
    }

    /// Full Dirichlet condition: every displacement and rotation component.
    pub fn dirichlet(&mut self, tag: &str, dim: usize, u: [ScalarFn; 3], phi: [ScalarFn; 3]) -> &mut Self {
        let r = if dim == 2 { 1 } else { 3 };
        for (i, g) in u.into_iter().enumerate().take(dim) {
            self.constrain(tag, Constraint::new(Field::Displacement, Direction::Axis(i), g));
        }
        for (k, g) in phi.into_iter().enumerate().take(r) {
            self.constrain(tag, Constraint::new(Field::Rotation, Direction::Axis(k), g));
        }
        self
    }

    /// Homogeneous full Dirichlet condition.
    pub fn clamp(&mut self, tag: &str, dim: usize) -> &mut Self {
        let z = || constant(0.0);
        self.dirichlet(tag, dim, [z(), z(), z()], [z(), z(), z()])
    }

    pub fn load(&mut self, tag: &str, load: BoundaryLoad) -> &mut Self {
        self.loads.insert(tag.to_string(), load);
        self
    }

    pub fn is_dirichlet(&self, tag: &str) -> bool {
        self.constraints.get(tag).is_some_and(|c| !c.is_empty())
    }

    /// Tags referenced by the conditions but absent from the mesh.
    pub fn unknown_tags(&self, mesh: &Mesh) -> Vec<String> {
        let present = mesh.boundary_tag_names();
        self.constraints
            .keys()
            .chain(self.loads.keys())
            .filter(|t| !present.contains(t))
            .cloned()
            .collect()
    }
}

/// Volumetric force `f` and couple `𝔠`.
#[derive(Clone, Default)]
pub struct BodyLoads {
    pub force: Option<VectorFn>,
    pub couple: Option<VectorFn>,
}

/// Linear map from nearby cell dofs to the strain and curvature of one cell.
#[derive(Debug, Clone)]
pub struct CellStrain {
    pub dofs: Vec<usize>,
    /// Flattened `e`, `d² × dofs.len()`.
    pub strain: DMatrix<f64>,
    /// Flattened `κ`, `(r·d) × dofs.len()`.
    pub curvature: DMatrix<f64>,
}

impl CellStrain {
    fn gather(&self, q: &[f64]) -> nalgebra::DVector<f64> {
        nalgebra::DVector::from_iterator(self.dofs.len(), self.dofs.iter().map(|&i| q[i]))
    }

    pub fn strain_of(&self, q: &[f64]) -> Vec<f64> {
        (&self.strain * self.gather(q)).as_slice().to_vec()
    }

    pub fn curvature_of(&self, q: &[f64]) -> Vec<f64> {
        (&self.curvature * self.gather(q)).as_slice().to_vec()
    }
}

/// Reconstruction operators together with the per-cell strain maps.
#[derive(Debug, Clone)]
pub struct Operators {
    pub dofs: DofMap,
    pub reconstruction: Reconstruction,
    pub cells: Vec<CellStrain>,
}

impl Operators {
    pub fn build(mesh: &Mesh) -> Result<Operators> {
        let reconstruction = Reconstruction::build(mesh)?;
        let dofs = DofMap::new(mesh.dim(), mesh.num_cells());
        let cells = (0..mesh.num_cells())
            .map(|c| cell_strain(&reconstruction, &dofs, c))
            .collect();
        Ok(Operators { dofs, reconstruction, cells })
    }

    /// Strain `e_c` of cell `c` (flattened row-major).
    pub fn strain(&self, c: usize, q: &[f64]) -> Vec<f64> {
        self.cells[c].strain_of(q)
    }

    /// Curvature `κ_c` of cell `c` (flattened row-major).
    pub fn curvature(&self, c: usize, q: &[f64]) -> Vec<f64> {
        self.cells[c].curvature_of(q)
    }
}

fn cell_strain(rec: &Reconstruction, dofs: &DofMap, c: usize) -> CellStrain {
    let d = dofs.dim;
    let r = dofs.rotation_dim;
    let nc = dofs.per_cell();
    let grad = &rec.gradients.cell(c).entries;
    let mut cells: Vec<usize> = grad.iter().map(|(k, _)| *k).collect();
    if !cells.contains(&c) {
        cells.push(c);
    }
    cells.sort_unstable();
    let local = |k: usize| cells.binary_search(&k).unwrap();
    let n = cells.len() * nc;
    let mut strain = DMatrix::zeros(d * d, n);
    let mut curvature = DMatrix::zeros(r * d, n);
    for (k, w) in grad {
        let base = local(*k) * nc;
        for j in 0..d {
            for i in 0..d {
                strain[(i * d + j, base + i)] += w[j];
            }
            for i in 0..r {
                curvature[(i * d + j, base + d + i)] += w[j];
            }
        }
    }
    let base = local(c) * nc;
    for k in 0..r {
        let mut unit = [0.0; 3];
        unit[k] = 1.0;
        let e = epsilon_dot(d, &unit[..r]);
        for (row, v) in e.iter().enumerate() {
            strain[(row, base + d + k)] += v;
        }
    }
    let dof_list = cells.iter().flat_map(|&k| (0..nc).map(move |i| k * nc + i)).collect();
    CellStrain { dofs: dof_list, strain, curvature }
}

/// `a_elas`: Σ_c |c| (e:ℂ:e + κ:𝔻:κ).
pub fn assemble_elastic(mesh: &Mesh, material: &Material, ops: &Operators) -> SparseMatrix {
    let c_mat = material.stiffness();
    let d_mat = material.couple_stiffness();
    let n = ops.dofs.len();
    let mut asm = Assembler::new(n, n);
    for (c, cs) in ops.cells.iter().enumerate() {
        let local = cs.strain.transpose() * &c_mat * &cs.strain + cs.curvature.transpose() * &d_mat * &cs.curvature;
        asm.add_block(&cs.dofs, &cs.dofs, &local, mesh.cell(c).measure);
    }
    asm.finish()
}

/// `P_il = Σ_jm n_j T_(ij),(lm) n_m` for a tensor acting on flattened `a ⊗ n`.
fn acoustic(t: &DMatrix<f64>, rows: usize, d: usize, n: &Point) -> DMatrix<f64> {
    let mut p = DMatrix::zeros(rows, rows);
    for i in 0..rows {
        for l in 0..rows {
            let mut s = 0.0;
            for j in 0..d {
                for m in 0..d {
                    s += n[j] * t[(i * d + j, l * d + m)] * n[m];
                }
            }
            p[(i, l)] = s;
        }
    }
    p
}

/// Merge `(cell, weight)` lists, subtracting the second.
fn jump_functional(a: Vec<(usize, f64)>, b: Vec<(usize, f64)>) -> Vec<(usize, f64)> {
    let mut out: BTreeMap<usize, f64> = BTreeMap::new();
    for (k, w) in a {
        *out.entry(k).or_default() += w;
    }
    for (k, w) in b {
        *out.entry(k).or_default() -= w;
    }
    out.into_iter().collect()
}

/// Interior penalty on the jumps of the cellwise P1 reconstruction.
pub fn assemble_inner_penalty(mesh: &Mesh, material: &Material, ops: &Operators) -> SparseMatrix {
    let dm = &ops.dofs;
    let (d, r) = (dm.dim, dm.rotation_dim);
    let c_mat = material.stiffness();
    let d_mat = material.couple_stiffness();
    let n = dm.len();
    let mut asm = Assembler::new(n, n);
    for f in mesh.interior_facets() {
        let facet = mesh.facet(f);
        let crate::mesh::FacetSide::Interior { minus, plus } = facet.side else { unreachable!() };
        let quad = mesh.facet_quadrature(f);
        let mut cells: Vec<usize> = Vec::new();
        let jumps: Vec<(f64, Vec<(usize, f64)>)> = quad
            .iter()
            .map(|q| {
                let j = jump_functional(
                    ops.reconstruction.p1_functional(mesh, minus, &q.x),
                    ops.reconstruction.p1_functional(mesh, plus, &q.x),
                );
                cells.extend(j.iter().map(|e| e.0));
                (q.weight, j)
            })
            .collect();
        cells.sort_unstable();
        cells.dedup();
        let m = cells.len();
        let mut s = DMatrix::<f64>::zeros(m, m);
        for (w, j) in &jumps {
            let idx: Vec<(usize, f64)> = j.iter().map(|(k, v)| (cells.binary_search(k).unwrap(), *v)).collect();
            for &(a, va) in &idx {
                for &(b, vb) in &idx {
                    s[(a, b)] += w * va * vb;
                }
            }
        }
        let inv_h = 1.0 / facet.diameter;
        let pu = acoustic(&c_mat, d, d, &facet.normal) * inv_h;
        let pr = acoustic(&d_mat, r, d, &facet.normal) * inv_h;
        for a in 0..m {
            for b in 0..m {
                let sab: f64 = s[(a, b)];
                if sab == 0.0 {
                    continue;
                }
                for i in 0..d {
                    for l in 0..d {
                        asm.add(dm.u(cells[a], i), dm.u(cells[b], l), sab * pu[(i, l)]);
                    }
                }
                for i in 0..r {
                    for l in 0..r {
                        asm.add(dm.phi(cells[a], i), dm.phi(cells[b], l), sab * pr[(i, l)]);
                    }
                }
            }
        }
    }
    asm.finish()
}

/// Unit constraint direction in the field's component space.
fn direction_vector(dir: Direction, field: Field, dofs: &DofMap, normal: &Point) -> Vec<f64> {
    let len = match field {
        Field::Displacement => dofs.dim,
        Field::Rotation => dofs.rotation_dim,
    };
    if len == 1 {
        return vec![1.0];
    }
    let v: Point = match dir {
        Direction::Axis(k) => {
            let mut v = Point::zeros();
            v[k.min(2)] = 1.0;
            v
        }
        Direction::Normal => *normal,
        Direction::Vector(v) => v.normalize(),
    };
    v.as_slice()[..len].to_vec()
}

/// Consistency, non-symmetric and Dirichlet-data terms of the Nitsche method.
#[derive(Debug, Clone)]
pub struct NitscheTerms {
    pub k_con: SparseMatrix,
    pub k_nsym: SparseMatrix,
    pub rhs_nsym: Vec<f64>,
}

/// Row vector (over `cs.dofs`) of `m · (T B_c q) n` where T is ℂ or 𝔻.
fn flux_functional(cs_map: &DMatrix<f64>, tensor: &DMatrix<f64>, rows: usize, d: usize, n: &Point, m: &[f64]) -> nalgebra::RowDVector<f64> {
    let stress = tensor * cs_map;
    let mut out = nalgebra::RowDVector::zeros(cs_map.ncols());
    for i in 0..rows {
        for j in 0..d {
            let w = m[i] * n[j];
            if w != 0.0 {
                out += stress.row(i * d + j) * w;
            }
        }
    }
    out
}

pub fn assemble_nitsche(
    mesh: &Mesh,
    material: &Material,
    ops: &Operators,
    dirichlet: &[usize],
    bcs: &BoundaryConditions,
) -> NitscheTerms {
    let dm = &ops.dofs;
    let n = dm.len();
    let c_mat = material.stiffness();
    let d_mat = material.couple_stiffness();
    let mut con = Assembler::new(n, n);
    let mut nsym = Assembler::new(n, n);
    for &f in dirichlet {
        let facet = mesh.facet(f);
        let c = facet.boundary_cell().expect("Dirichlet facet on the boundary");
        let tag = facet.tag.as_deref().unwrap_or_default();
        let Some(list) = bcs.constraints.get(tag) else { continue };
        let cs = &ops.cells[c];
        let st = ops.reconstruction.facets.stencil(f);
        for con_spec in list {
            let m = direction_vector(con_spec.direction, con_spec.field, dm, &facet.normal);
            let (flux, trace_dofs): (_, Vec<(usize, f64)>) = match con_spec.field {
                Field::Displacement => (
                    flux_functional(&cs.strain, &c_mat, dm.dim, dm.dim, &facet.normal, &m),
                    st.cells
                        .iter()
                        .zip(&st.coefficients)
                        .flat_map(|(&k, &a)| (0..dm.dim).map(move |i| (k, i, a)))
                        .map(|(k, i, a)| (dm.u(k, i), a * m[i]))
                        .collect(),
                ),
                Field::Rotation => (
                    flux_functional(&cs.curvature, &d_mat, dm.rotation_dim, dm.dim, &facet.normal, &m),
                    st.cells
                        .iter()
                        .zip(&st.coefficients)
                        .flat_map(|(&k, &a)| (0..dm.rotation_dim).map(move |i| (k, i, a)))
                        .map(|(k, i, a)| (dm.phi(k, i), a * m[i]))
                        .collect(),
                ),
            };
            for &(row, tv) in &trace_dofs {
                if tv == 0.0 {
                    continue;
                }
                for (j, &col) in cs.dofs.iter().enumerate() {
                    let fv = flux[j];
                    if fv != 0.0 {
                        con.add(row, col, -facet.measure * tv * fv);
                        nsym.add(col, row, facet.measure * tv * fv);
                    }
                }
            }
        }
    }
    let rhs_nsym = nitsche_rhs(mesh, material, ops, dirichlet, bcs, 0.0);
    NitscheTerms { k_con: con.finish(), k_nsym: nsym.finish(), rhs_nsym }
}

/// `l_nsym` at time `t`: Σ_F (σ_h(v)·n)·∫_F u_D + (μ_h(ψ)·n)·∫_F φ_D.
pub fn nitsche_rhs(
    mesh: &Mesh,
    material: &Material,
    ops: &Operators,
    dirichlet: &[usize],
    bcs: &BoundaryConditions,
    t: f64,
) -> Vec<f64> {
    let dm = &ops.dofs;
    let c_mat = material.stiffness();
    let d_mat = material.couple_stiffness();
    let mut rhs = vec![0.0; dm.len()];
    for &f in dirichlet {
        let facet = mesh.facet(f);
        let c = facet.boundary_cell().expect("Dirichlet facet on the boundary");
        let tag = facet.tag.as_deref().unwrap_or_default();
        let Some(list) = bcs.constraints.get(tag) else { continue };
        let quad = mesh.facet_quadrature(f);
        let cs = &ops.cells[c];
        for con_spec in list {
            let integral: f64 = quad.iter().map(|q| q.weight * (con_spec.value)(&q.x, t)).sum();
            if integral == 0.0 {
                continue;
            }
            let m = direction_vector(con_spec.direction, con_spec.field, dm, &facet.normal);
            let flux = match con_spec.field {
                Field::Displacement => flux_functional(&cs.strain, &c_mat, dm.dim, dm.dim, &facet.normal, &m),
                Field::Rotation => {
                    flux_functional(&cs.curvature, &d_mat, dm.rotation_dim, dm.dim, &facet.normal, &m)
                }
            };
            for (j, &col) in cs.dofs.iter().enumerate() {
                rhs[col] += flux[j] * integral;
            }
        }
    }
    rhs
}

/// Diagonal mass: ρ|c| on displacement dofs, ρ|c|I on rotation dofs.
pub fn assemble_mass(mesh: &Mesh, material: &Material, dofs: &DofMap) -> Vec<f64> {
    let rho = material.density();
    let inertia = material.micro_inertia();
    let mut m = vec![0.0; dofs.len()];
    for (c, cell) in mesh.cells().iter().enumerate() {
        for i in 0..dofs.dim {
            m[dofs.u(c, i)] = rho * cell.measure;
        }
        for k in 0..dofs.rotation_dim {
            m[dofs.phi(c, k)] = rho * cell.measure * inertia;
        }
    }
    m
}

/// Boundary damping Σ_F (4G/h_F)|F|(u̇_c·v_c + ℓ² φ̇_c·ψ_c), restricted to the
/// constrained directions of each Dirichlet facet.
pub fn assemble_damping(
    mesh: &Mesh,
    material: &Material,
    ops: &Operators,
    dirichlet: &[usize],
    bcs: &BoundaryConditions,
) -> SparseMatrix {
    let dofs = &ops.dofs;
    let g = material.shear_modulus();
    let l2 = material.damping_length().powi(2);
    let mut asm = Assembler::new(dofs.len(), dofs.len());
    for &f in dirichlet {
        let facet = mesh.facet(f);
        let c = facet.boundary_cell().expect("Dirichlet facet on the boundary");
        let tag = facet.tag.as_deref().unwrap_or_default();
        let Some(list) = bcs.constraints.get(tag) else { continue };
        let scale = 4.0 * g / facet.diameter * facet.measure;
        let trace: Vec<(usize, f64)> = match bcs.damping_trace {
            DampingTrace::Cell => vec![(c, 1.0)],
            DampingTrace::Facet => {
                let st = ops.reconstruction.facets.stencil(f);
                st.cells.iter().copied().zip(st.coefficients.iter().copied()).collect()
            }
        };
        for con_spec in list {
            let m = direction_vector(con_spec.direction, con_spec.field, dofs, &facet.normal);
            let weight = match con_spec.field {
                Field::Displacement => scale,
                Field::Rotation => scale * l2,
            };
            let row = |cell: usize| -> Vec<usize> {
                match con_spec.field {
                    Field::Displacement => (0..dofs.dim).map(|i| dofs.u(cell, i)).collect(),
                    Field::Rotation => (0..dofs.rotation_dim).map(|k| dofs.phi(cell, k)).collect(),
                }
            };
            for &(ca, wa) in &trace {
                let ia = row(ca);
                for &(cb, wb) in &trace {
                    let ib = row(cb);
                    for (a, &ra) in ia.iter().enumerate() {
                        for (b, &rb) in ib.iter().enumerate() {
                            asm.add(ra, rb, weight * wa * wb * m[a] * m[b]);
                        }
                    }
                }
            }
        }
    }
    asm.finish()
}

/// `l_h` at time `t`: body loads per cell plus surface loads on tagged
/// facets, tested against the trace selected by `bcs.surface_trace`.
pub fn assemble_load(mesh: &Mesh, ops: &Operators, body: &BodyLoads, bcs: &BoundaryConditions, t: f64) -> Vec<f64> {
    let dofs = &ops.dofs;
    let mut rhs = vec![0.0; dofs.len()];
    let add = |rhs: &mut Vec<f64>,
               targets: &[(usize, f64)],
               quad: &[crate::geometry::QuadPoint],
               force: &Option<VectorFn>,
               couple: &Option<VectorFn>| {
        if let Some(f) = force {
            let mut total = [0.0; 3];
            for q in quad {
                let v = f(&q.x, t);
                (0..3).for_each(|i| total[i] += q.weight * v[i]);
            }
            for &(c, w) in targets {
                for i in 0..dofs.dim {
                    rhs[dofs.u(c, i)] += w * total[i];
                }
            }
        }
        if let Some(m) = couple {
            let mut total = [0.0; 3];
            for q in quad {
                let v = m(&q.x, t);
                (0..3).for_each(|i| total[i] += q.weight * v[i]);
            }
            for &(c, w) in targets {
                for k in 0..dofs.rotation_dim {
                    rhs[dofs.phi(c, k)] += w * total[k];
                }
            }
        }
    };
    if body.force.is_some() || body.couple.is_some() {
        for c in 0..mesh.num_cells() {
            add(&mut rhs, &[(c, 1.0)], &mesh.cell_quadrature(c), &body.force, &body.couple);
        }
    }
    for f in mesh.boundary_facets() {
        let facet = mesh.facet(f);
        let Some(load) = facet.tag.as_deref().and_then(|t| bcs.loads.get(t)) else { continue };
        let targets: Vec<(usize, f64)> = match bcs.surface_trace {
            SurfaceTrace::Cell => vec![(facet.boundary_cell().unwrap(), 1.0)],
            SurfaceTrace::Facet => {
                let st = ops.reconstruction.facets.stencil(f);
                st.cells.iter().copied().zip(st.coefficients.iter().copied()).collect()
            }
        };
        add(&mut rhs, &targets, &mesh.facet_quadrature(f), &load.traction, &load.couple);
    }
    rhs
}

/// All assembled parts of the discrete problem.
#[derive(Debug, Clone)]
pub struct SystemMatrices {
    pub k_elas: SparseMatrix,
    pub k_pen: SparseMatrix,
    pub k_con: SparseMatrix,
    pub k_nsym: SparseMatrix,
    pub mass: Vec<f64>,
    pub damping: SparseMatrix,
    pub rhs_load: Vec<f64>,
    pub rhs_nsym: Vec<f64>,
}

impl SystemMatrices {
    /// `A = K_elas + K_pen + K_con + K_nsym`
    pub fn stiffness(&self) -> SparseMatrix {
        self.k_elas.add(&self.k_pen).add(&self.k_con).add(&self.k_nsym)
    }

    /// `b = l_h + l_nsym`
    pub fn rhs(&self) -> Vec<f64> {
        self.rhs_load.iter().zip(&self.rhs_nsym).map(|(a, b)| a + b).collect()
    }
}

/// A mesh with material, boundary data and loads, plus its reconstruction.
pub struct Problem<'m> {
    pub mesh: &'m Mesh,
    pub material: Material,
    pub bcs: BoundaryConditions,
    pub body: BodyLoads,
    pub ops: Operators,
    pub partition: FacetPartition,
}

impl<'m> Problem<'m> {
    pub fn new(mesh: &'m Mesh, material: Material, bcs: BoundaryConditions, body: BodyLoads) -> Result<Self> {
        if material.dim() != mesh.dim() {
            return Err(Error::DimensionMismatch(format!(
                "{}D material on a {}D mesh",
                material.dim(),
                mesh.dim()
            )));
        }
        let unknown = bcs.unknown_tags(mesh);
        if let Some(tag) = unknown.first() {
            return Err(Error::UncoveredTag(format!("boundary tag '{tag}' not present in the mesh")));
        }
        let partition = classify_facets(mesh, |t| bcs.is_dirichlet(t))?;
        let ops = Operators::build(mesh)?;
        Ok(Problem { mesh, material, bcs, body, ops, partition })
    }

    pub fn dofs(&self) -> &DofMap {
        &self.ops.dofs
    }

    pub fn load(&self, t: f64) -> Vec<f64> {
        assemble_load(self.mesh, &self.ops, &self.body, &self.bcs, t)
    }

    pub fn nitsche_rhs(&self, t: f64) -> Vec<f64> {
        nitsche_rhs(self.mesh, &self.material, &self.ops, &self.partition.dirichlet, &self.bcs, t)
    }

    /// Total right-hand side at time `t`.
    pub fn rhs(&self, t: f64) -> Vec<f64> {
        let mut b = self.load(t);
        for (bi, ni) in b.iter_mut().zip(self.nitsche_rhs(t)) {
            *bi += ni;
        }
        b
    }

    pub fn assemble(&self) -> SystemMatrices {
        let k_elas = assemble_elastic(self.mesh, &self.material, &self.ops);
        let k_pen = assemble_inner_penalty(self.mesh, &self.material, &self.ops);
        let nitsche = assemble_nitsche(self.mesh, &self.material, &self.ops, &self.partition.dirichlet, &self.bcs);
        SystemMatrices {
            k_elas,
            k_pen,
            k_con: nitsche.k_con,
            k_nsym: nitsche.k_nsym,
            mass: assemble_mass(self.mesh, &self.material, &self.ops.dofs),
            damping: assemble_damping(self.mesh, &self.material, &self.ops, &self.partition.dirichlet, &self.bcs),
            rhs_load: self.load(0.0),
            rhs_nsym: nitsche.rhs_nsym,
        }
    }

    /// Stress `σ_c` and couple stress `μ_c` of every cell (flattened).
    pub fn stresses(&self, q: &[f64]) -> Vec<(Vec<f64>, Vec<f64>)> {
        stress_field(&self.material, &self.ops, q)
    }
}

/// Cellwise constant stresses from a dof vector.
pub fn stress_field(material: &Material, ops: &Operators, q: &[f64]) -> Vec<(Vec<f64>, Vec<f64>)> {
    let c_mat = material.stiffness();
    let d_mat = material.couple_stiffness();
    ops.cells
        .iter()
        .map(|cs| {
            let e = nalgebra::DVector::from_vec(cs.strain_of(q));
            let k = nalgebra::DVector::from_vec(cs.curvature_of(q));
            ((&c_mat * e).as_slice().to_vec(), (&d_mat * k).as_slice().to_vec())
        })
        .collect()
}

/// Rigid Cosserat motions: translations and infinitesimal rotations
/// `u = ω × (x − x0)`, `φ = ω` (in 2D `u = ω (−(y − y0), x − x0)`).
pub fn rigid_motions(mesh: &Mesh, dofs: &DofMap) -> Vec<Vec<f64>> {
    let d = dofs.dim;
    let x0 = mesh.cells().iter().map(|c| c.barycenter).sum::<Point>() / mesh.num_cells().max(1) as f64;
    let mut out = Vec::new();
    for i in 0..d {
        let mut e = [0.0; 3];
        e[i] = 1.0;
        out.push(dofs.sample(mesh, |_| e, |_| [0.0; 3]));
    }
    for k in 0..dofs.rotation_dim {
        let mut w = Point::zeros();
        if d == 2 {
            w[2] = 1.0;
        } else {
            w[k] = 1.0;
        }
        let omega = [w[0], w[1], w[2]];
        out.push(dofs.sample(
            mesh,
            |x| {
                let u = w.cross(&(x - x0));
                [u[0], u[1], u[2]]
            },
            |_| if d == 2 { [1.0, 0.0, 0.0] } else { omega },
        ));
    }
    out
}

/// `ε : σ` per cell: the moment source of the DEM balance.
pub fn moment_of(dim: usize, sigma: &[f64]) -> Vec<f64> {
    crate::material::epsilon_contract(dim, sigma)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::material::CosseratMaterial2D;
    use crate::mesh::rect_mesh;

    fn plane() -> Material {
        Material::Plane(CosseratMaterial2D::new(1e3, 0.25, 0.5, 0.1).unwrap().with_inertia(2.0, 0.5).unwrap())
    }

    fn dense(a: &SparseMatrix) -> DMatrix<f64> {
        a.to_dense()
    }

    #[test]
    fn mass_is_diagonal_density_times_measure() {
        let mesh = rect_mesh([0.0, 0.0], 1.0, 1.0, 2, 2);
        let dofs = DofMap::new(2, mesh.num_cells());
        let m = assemble_mass(&mesh, &plane(), &dofs);
        for c in 0..mesh.num_cells() {
            assert!((m[dofs.u(c, 0)] - 2.0 * 0.125).abs() < 1e-15);
            assert!((m[dofs.u(c, 1)] - 2.0 * 0.125).abs() < 1e-15);
            assert!((m[dofs.phi(c, 0)] - 2.0 * 0.125 * 0.5).abs() < 1e-15);
        }
    }

    #[test]
    fn damping_is_empty_without_dirichlet_facets() {
        let mesh = rect_mesh([0.0, 0.0], 1.0, 1.0, 2, 2);
        let ops = Operators::build(&mesh).unwrap();
        let c = assemble_damping(&mesh, &plane(), &ops, &[], &BoundaryConditions::new());
        assert_eq!(c.nnz(), 0);
    }

    #[test]
    fn single_facet_cell_damping_by_hand() {
        let mesh = rect_mesh([0.0, 0.0], 1.0, 1.0, 2, 2);
        let ops = Operators::build(&mesh).unwrap();
        let mut bcs = BoundaryConditions::new();
        bcs.clamp("bottom", 2);
        bcs.damping_trace = DampingTrace::Cell;
        let f = mesh.facets_by_tag()["bottom"][0];
        let c = mesh.facet(f).boundary_cell().unwrap();
        let damp = dense(&assemble_damping(&mesh, &plane(), &ops, &[f], &bcs));
        let dofs = ops.dofs;
        let w = 4.0 * 1e3 / 0.5 * 0.5;
        let l2 = 0.1f64.powi(2);
        assert!((damp[(dofs.u(c, 0), dofs.u(c, 0))] - w).abs() < 1e-9);
        assert!((damp[(dofs.u(c, 1), dofs.u(c, 1))] - w).abs() < 1e-9);
        assert!((damp[(dofs.phi(c, 0), dofs.phi(c, 0))] - w * l2).abs() < 1e-9);
        assert!((damp.sum() - w * (2.0 + l2)).abs() < 1e-9);
    }

    #[test]
    fn facet_damping_is_symmetric_psd() {
        let mesh = rect_mesh([0.0, 0.0], 1.0, 1.0, 3, 3);
        let mut bcs = BoundaryConditions::new();
        bcs.clamp("left", 2);
        let p = Problem::new(&mesh, plane(), bcs, BodyLoads::default()).unwrap();
        let damp = dense(&p.assemble().damping);
        assert!((&damp - damp.transpose()).amax() < 1e-12 * damp.amax());
        let ev = damp.symmetric_eigenvalues();
        assert!(ev.min() > -1e-9 * ev.max());
    }

    #[test]
    fn nitsche_blocks_are_negative_transposes() {
        let mesh = rect_mesh([0.0, 0.0], 1.0, 0.5, 4, 2);
        let mut bcs = BoundaryConditions::new();
        bcs.clamp("left", 2);
        bcs.constrain("right", Constraint::new(Field::Displacement, Direction::Normal, constant(0.1)));
        let p = Problem::new(&mesh, plane(), bcs, BodyLoads::default()).unwrap();
        let sys = p.assemble();
        let con = dense(&sys.k_con);
        let nsym = dense(&sys.k_nsym);
        assert!(con.amax() > 0.0);
        assert!((&con + nsym.transpose()).amax() < 1e-14 * con.amax());
    }

    #[test]
    fn uniform_traction_sums_to_force_on_edge() {
        let mesh = rect_mesh([0.0, 0.0], 2.0, 1.0, 4, 3);
        let mut bcs = BoundaryConditions::new();
        bcs.load("top", BoundaryLoad { traction: Some(constant_vector([0.0, 3.0, 0.0])), couple: None });
        for trace in [SurfaceTrace::Facet, SurfaceTrace::Cell] {
            bcs.surface_trace = trace;
            let ops = Operators::build(&mesh).unwrap();
            let rhs = assemble_load(&mesh, &ops, &BodyLoads::default(), &bcs, 0.0);
            let fy: f64 = (0..mesh.num_cells()).map(|c| rhs[ops.dofs.u(c, 1)]).sum();
            let fx: f64 = (0..mesh.num_cells()).map(|c| rhs[ops.dofs.u(c, 0)]).sum();
            assert!((fy - 6.0).abs() < 1e-12, "{trace:?}: {fy}");
            assert!(fx.abs() < 1e-12);
        }
    }

    #[test]
    fn body_load_integrates_over_cells() {
        let mesh = rect_mesh([-0.12, 0.0], 0.24, 0.12, 6, 3);
        let ops = Operators::build(&mesh).unwrap();
        let body = BodyLoads {
            force: Some(constant_vector([1.0, 1.0, 0.0])),
            couple: Some(Arc::new(|x: &Point, _| [2.0 * (x[0] - x[1]), 0.0, 0.0])),
        };
        let rhs = assemble_load(&mesh, &ops, &body, &BoundaryConditions::new(), 0.0);
        for (c, cell) in mesh.cells().iter().enumerate() {
            let x = cell.barycenter;
            assert!((rhs[ops.dofs.u(c, 0)] - cell.measure).abs() < 1e-15);
            assert!((rhs[ops.dofs.phi(c, 0)] - cell.measure * 2.0 * (x[0] - x[1])).abs() < 1e-15);
        }
        let zero = assemble_load(&mesh, &ops, &BodyLoads::default(), &BoundaryConditions::new(), 0.0);
        assert!(zero.iter().all(|v| *v == 0.0));
    }

    #[test]
    fn unknown_tag_is_rejected() {
        let mesh = rect_mesh([0.0, 0.0], 1.0, 1.0, 1, 1);
        let mut bcs = BoundaryConditions::new();
        bcs.clamp("hole", 2);
        assert!(matches!(
            Problem::new(&mesh, plane(), bcs, BodyLoads::default()),
            Err(Error::UncoveredTag(_))
        ));
    }

    #[test]
    fn static_system_size_and_skew_quadratic_form() {
        let mesh = rect_mesh([0.0, 0.0], 1.0, 1.0, 3, 3);
        let mut bcs = BoundaryConditions::new();
        bcs.clamp("bottom", 2);
        let p = Problem::new(&mesh, plane(), bcs, BodyLoads::default()).unwrap();
        let sys = p.assemble();
        let a = sys.stiffness();
        assert_eq!(a.nrows(), 3 * mesh.num_cells());
        let v: Vec<f64> = (0..a.nrows()).map(|i| ((i * 37 % 11) as f64 - 5.0) / 7.0).collect();
        let s = sys.k_elas.add(&sys.k_pen);
        let lhs = crate::sparse::dot(&v, &a.matvec(&v));
        let rhs = crate::sparse::dot(&v, &s.matvec(&v));
        assert!((lhs - rhs).abs() < 1e-10 * rhs.abs());
    }
}
