//! Polytopal meshes: cells, facets, adjacency and the geometric quantities
//! the reconstruction needs (barycenters, measures, diameters, normals).
//!
//! A mesh is built once from vertex coordinates and cell vertex lists and is
//! immutable afterwards. Two-dimensional cells are polygons given by their
//! vertex loop; three-dimensional cells are tetrahedra or hexahedra (VTK
//! vertex ordering). Facets are identified by their sorted vertex sets.

mod generate;
mod gmsh;
mod json;

pub use generate::{generate_box_mesh, generate_rect_mesh, rect_mesh, box_mesh};
pub use json::{MeshJson, write_json};

use std::collections::{BTreeMap, HashMap};
use std::path::Path;

use crate::error::{Error, Result};
use crate::geometry::{self, Point};

/// Relative tolerance on the out-of-plane deviation of 3D facet vertices.
pub const PLANARITY_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MeshFormat {
    GmshMsh,
    InternalJson,
}

impl MeshFormat {
    /// Guess the format from a file extension.
    pub fn from_path(path: &Path) -> Option<Self> {
        match path.extension()?.to_str()? {
            "msh" => Some(MeshFormat::GmshMsh),
            "json" => Some(MeshFormat::InternalJson),
            _ => None,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Cell {
    pub vertices: Vec<usize>,
    pub facets: Vec<usize>,
    pub barycenter: Point,
    pub measure: f64,
    pub diameter: f64,
}

/// Which cells a facet separates.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FacetSide {
    /// Normal points from `minus` to `plus`.
    Interior { minus: usize, plus: usize },
    /// Normal points out of the domain.
    Boundary { cell: usize },
}

#[derive(Debug, Clone)]
pub struct Facet {
    pub vertices: Vec<usize>,
    pub barycenter: Point,
    pub measure: f64,
    /// Largest vertex-to-vertex distance.
    pub diameter: f64,
    pub normal: Point,
    pub side: FacetSide,
    pub tag: Option<String>,
}

impl Facet {
    pub fn is_boundary(&self) -> bool {
        matches!(self.side, FacetSide::Boundary { .. })
    }

    /// Cells adjacent to the facet (one or two).
    pub fn cells(&self) -> Vec<usize> {
        match self.side {
            FacetSide::Interior { minus, plus } => vec![minus, plus],
            FacetSide::Boundary { cell } => vec![cell],
        }
    }

    /// Orientation sign ι_{c,F}: +1 for the minus (or boundary) cell, −1 for the plus cell.
    pub fn orientation(&self, cell: usize) -> f64 {
        match self.side {
            FacetSide::Interior { plus, .. } if plus == cell => -1.0,
            _ => 1.0,
        }
    }

    /// Unit normal pointing out of `cell`.
    pub fn outward_normal(&self, cell: usize) -> Point {
        self.normal * self.orientation(cell)
    }

    pub fn boundary_cell(&self) -> Option<usize> {
        match self.side {
            FacetSide::Boundary { cell } => Some(cell),
            FacetSide::Interior { .. } => None,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Mesh {
    dim: usize,
    vertices: Vec<Point>,
    cells: Vec<Cell>,
    facets: Vec<Facet>,
}

/// Local facet vertex lists of a cell.
fn local_facets(dim: usize, cell: &[usize]) -> Result<Vec<Vec<usize>>> {
    match (dim, cell.len()) {
        (2, n) if n >= 3 => Ok((0..n).map(|i| vec![cell[i], cell[(i + 1) % n]]).collect()),
        (3, 4) => Ok([[0, 1, 2], [0, 1, 3], [0, 2, 3], [1, 2, 3]]
            .iter()
            .map(|f| f.iter().map(|&k| cell[k]).collect())
            .collect()),
        (3, 8) => Ok([
            [0, 3, 2, 1],
            [4, 5, 6, 7],
            [0, 1, 5, 4],
            [1, 2, 6, 5],
            [2, 3, 7, 6],
            [3, 0, 4, 7],
        ]
        .iter()
        .map(|f| f.iter().map(|&k| cell[k]).collect())
        .collect()),
        (d, n) => Err(Error::InvalidMesh(format!(
            "unsupported cell with {n} vertices in dimension {d}"
        ))),
    }
}

fn sorted_key(vs: &[usize]) -> Vec<usize> {
    let mut k = vs.to_vec();
    k.sort_unstable();
    k
}

/// Geometry of a facet: barycenter, measure, unit normal (arbitrary sign) and
/// sub-simplices used for quadrature.
struct FacetGeometry {
    barycenter: Point,
    measure: f64,
    normal: Point,
    diameter: f64,
}

fn facet_geometry(dim: usize, pts: &[Point]) -> Result<FacetGeometry> {
    let diameter = geometry::diameter(pts);
    if dim == 2 {
        let t = pts[1] - pts[0];
        let len = t.norm();
        if len <= 0.0 {
            return Err(Error::InvalidMesh("zero-length facet".into()));
        }
        return Ok(FacetGeometry {
            barycenter: 0.5 * (pts[0] + pts[1]),
            measure: len,
            normal: Point::new(t.y, -t.x, 0.0) / len,
            diameter,
        });
    }
    // Newell normal, then area centroid of the fan around the vertex average.
    let n = pts.len();
    let mut normal = Point::zeros();
    for i in 0..n {
        let a = pts[i];
        let b = pts[(i + 1) % n];
        normal += a.cross(&b);
    }
    let norm = normal.norm();
    if norm <= 0.0 {
        return Err(Error::InvalidMesh("zero-area facet".into()));
    }
    let normal = normal / norm;
    let center = geometry::centroid(pts);
    for p in pts {
        if (p - center).dot(&normal).abs() > PLANARITY_TOLERANCE * diameter {
            return Err(Error::InvalidMesh("non-planar facet".into()));
        }
    }
    let mut measure = 0.0;
    let mut moment = Point::zeros();
    for i in 0..n {
        let a = pts[i];
        let b = pts[(i + 1) % n];
        let area = geometry::triangle_area(&center, &a, &b);
        measure += area;
        moment += area * (center + a + b) / 3.0;
    }
    if measure <= 0.0 {
        return Err(Error::InvalidMesh("zero-area facet".into()));
    }
    Ok(FacetGeometry {
        barycenter: moment / measure,
        measure,
        normal,
        diameter,
    })
}

impl Mesh {
    /// Build a mesh from raw connectivity.
    ///
    /// `boundary_tags` pairs facet vertex lists with a tag name. Tags that do
    /// not match any facet are rejected.
    pub fn new(
        dim: usize,
        vertices: Vec<Point>,
        cells: Vec<Vec<usize>>,
        boundary_tags: &[(Vec<usize>, String)],
    ) -> Result<Mesh> {
        if dim != 2 && dim != 3 {
            return Err(Error::InvalidMesh(format!("dimension {dim}")));
        }
        if cells.is_empty() {
            return Err(Error::InvalidMesh("no cells".into()));
        }
        let nv = vertices.len();
        let mut facet_index: HashMap<Vec<usize>, usize> = HashMap::new();
        let mut facet_vertices: Vec<Vec<usize>> = Vec::new();
        let mut facet_cells: Vec<Vec<usize>> = Vec::new();
        let mut cell_facets = Vec::with_capacity(cells.len());
        for (c, cell) in cells.iter().enumerate() {
            if let Some(&v) = cell.iter().find(|&&v| v >= nv) {
                return Err(Error::InvalidMesh(format!("cell {c} references vertex {v}")));
            }
            let mut ids = Vec::new();
            for fv in local_facets(dim, cell)? {
                let key = sorted_key(&fv);
                let id = *facet_index.entry(key).or_insert_with(|| {
                    facet_vertices.push(fv.clone());
                    facet_cells.push(Vec::new());
                    facet_vertices.len() - 1
                });
                facet_cells[id].push(c);
                ids.push(id);
            }
            cell_facets.push(ids);
        }

        let mut facet_geom = Vec::with_capacity(facet_vertices.len());
        for (f, fv) in facet_vertices.iter().enumerate() {
            if facet_cells[f].len() > 2 {
                return Err(Error::InvalidMesh(format!(
                    "facet {f} shared by {} cells",
                    facet_cells[f].len()
                )));
            }
            let pts: Vec<Point> = fv.iter().map(|&v| vertices[v]).collect();
            facet_geom.push(
                facet_geometry(dim, &pts)
                    .map_err(|e| Error::InvalidMesh(format!("facet {f}: {e}")))?,
            );
        }

        // Cell measure and barycenter from the pyramids over each facet.
        let mut out_cells = Vec::with_capacity(cells.len());
        for (c, cell) in cells.iter().enumerate() {
            let pts: Vec<Point> = cell.iter().map(|&v| vertices[v]).collect();
            let apex = geometry::centroid(&pts);
            let mut measure = 0.0;
            let mut moment = Point::zeros();
            for &f in &cell_facets[c] {
                let g = &facet_geom[f];
                let h = (g.barycenter - apex).dot(&g.normal).abs();
                let vol = g.measure * h / dim as f64;
                // centroid of a pyramid/cone: apex + d/(d+1) (facet centroid - apex)
                let cen = apex + (g.barycenter - apex) * (dim as f64 / (dim as f64 + 1.0));
                measure += vol;
                moment += vol * cen;
            }
            if measure <= 0.0 || !measure.is_finite() {
                return Err(Error::InvalidMesh(format!("cell {c} has zero measure")));
            }
            out_cells.push(Cell {
                vertices: cell.clone(),
                facets: cell_facets[c].clone(),
                barycenter: moment / measure,
                measure,
                diameter: geometry::diameter(&pts),
            });
        }

        let mut facets = Vec::with_capacity(facet_vertices.len());
        for (f, fv) in facet_vertices.into_iter().enumerate() {
            let g = &facet_geom[f];
            let first = facet_cells[f][0];
            let outward = if (g.barycenter - out_cells[first].barycenter).dot(&g.normal) >= 0.0 {
                g.normal
            } else {
                -g.normal
            };
            let side = match facet_cells[f][..] {
                [c] => FacetSide::Boundary { cell: c },
                [a, b] => FacetSide::Interior {
                    minus: a.min(b),
                    plus: a.max(b),
                },
                _ => unreachable!(),
            };
            let normal = match side {
                FacetSide::Interior { minus, .. } if minus != first => -outward,
                _ => outward,
            };
            facets.push(Facet {
                vertices: fv,
                barycenter: g.barycenter,
                measure: g.measure,
                diameter: g.diameter,
                normal,
                side,
                tag: None,
            });
        }

        let mut mesh = Mesh {
            dim,
            vertices,
            cells: out_cells,
            facets,
        };
        let index: HashMap<Vec<usize>, usize> = facet_index;
        for (fv, tag) in boundary_tags {
            let f = index.get(&sorted_key(fv)).ok_or_else(|| {
                Error::InvalidMesh(format!("tag `{tag}` references unknown facet {fv:?}"))
            })?;
            mesh.facets[*f].tag = Some(tag.clone());
        }
        Ok(mesh)
    }

    /// Same connectivity and tags with every vertex moved by `map`.
    pub fn moved(&self, map: impl Fn(usize, &Point) -> Point) -> Result<Mesh> {
        let vertices = self.vertices.iter().enumerate().map(|(i, v)| map(i, v)).collect();
        let cells = self.cells.iter().map(|c| c.vertices.clone()).collect();
        let tags: Vec<(Vec<usize>, String)> = self
            .facets
            .iter()
            .filter_map(|f| f.tag.clone().map(|t| (f.vertices.clone(), t)))
            .collect();
        Mesh::new(self.dim, vertices, cells, &tags)
    }

    /// Vertices lying on a boundary facet.
    pub fn boundary_vertices(&self) -> Vec<bool> {
        let mut on = vec![false; self.vertices.len()];
        for f in self.boundary_facets() {
            for &v in &self.facets[f].vertices {
                on[v] = true;
            }
        }
        on
    }

    /// Read a mesh file.
    pub fn load(path: impl AsRef<Path>, format: MeshFormat) -> Result<Mesh> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        match format {
            MeshFormat::GmshMsh => gmsh::parse_msh(&text),
            MeshFormat::InternalJson => json::parse_json(&text),
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn vertices(&self) -> &[Point] {
        &self.vertices
    }

    pub fn cells(&self) -> &[Cell] {
        &self.cells
    }

    pub fn facets(&self) -> &[Facet] {
        &self.facets
    }

    pub fn cell(&self, c: usize) -> &Cell {
        &self.cells[c]
    }

    pub fn facet(&self, f: usize) -> &Facet {
        &self.facets[f]
    }

    pub fn num_cells(&self) -> usize {
        self.cells.len()
    }

    pub fn num_facets(&self) -> usize {
        self.facets.len()
    }

    pub fn interior_facets(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.facets.len()).filter(|&f| !self.facets[f].is_boundary())
    }

    pub fn boundary_facets(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.facets.len()).filter(|&f| self.facets[f].is_boundary())
    }

    /// Cells sharing a facet with `c`.
    pub fn neighbors(&self, c: usize) -> impl Iterator<Item = usize> + '_ {
        self.cells[c].facets.iter().filter_map(move |&f| match self.facets[f].side {
            FacetSide::Interior { minus, plus } => Some(if minus == c { plus } else { minus }),
            FacetSide::Boundary { .. } => None,
        })
    }

    /// Mean cell diameter, used as the mesh size `h`.
    pub fn mesh_size(&self) -> f64 {
        self.cells.iter().map(|c| c.diameter).sum::<f64>() / self.cells.len() as f64
    }

    pub fn max_cell_diameter(&self) -> f64 {
        self.cells.iter().map(|c| c.diameter).fold(0.0, f64::max)
    }

    pub fn total_measure(&self) -> f64 {
        self.cells.iter().map(|c| c.measure).sum()
    }

    /// Distinct boundary tags present on boundary facets.
    pub fn boundary_tag_names(&self) -> Vec<String> {
        let mut tags: Vec<String> = self
            .facets
            .iter()
            .filter(|f| f.is_boundary())
            .filter_map(|f| f.tag.clone())
            .collect();
        tags.sort();
        tags.dedup();
        tags
    }

    /// Boundary facets grouped by tag.
    pub fn facets_by_tag(&self) -> BTreeMap<String, Vec<usize>> {
        let mut map: BTreeMap<String, Vec<usize>> = BTreeMap::new();
        for f in self.boundary_facets() {
            if let Some(t) = &self.facets[f].tag {
                map.entry(t.clone()).or_default().push(f);
            }
        }
        map
    }

    /// Pyramids (cell barycenter + facet fan) partitioning cell `c`; each
    /// entry is a simplex given by `dim + 1` points.
    pub fn cell_simplices(&self, c: usize) -> Vec<Vec<Point>> {
        let cell = &self.cells[c];
        let apex = cell.barycenter;
        let mut out = Vec::new();
        for &f in &cell.facets {
            for tri in self.facet_simplices(f) {
                let mut s = Vec::with_capacity(self.dim + 1);
                s.push(apex);
                s.extend(tri);
                out.push(s);
            }
        }
        out
    }

    /// Simplices partitioning facet `f` (segments in 2D, triangles in 3D).
    pub fn facet_simplices(&self, f: usize) -> Vec<Vec<Point>> {
        let facet = &self.facets[f];
        let pts: Vec<Point> = facet.vertices.iter().map(|&v| self.vertices[v]).collect();
        if self.dim == 2 || pts.len() == 3 {
            return vec![pts];
        }
        let n = pts.len();
        (0..n)
            .map(|i| vec![facet.barycenter, pts[i], pts[(i + 1) % n]])
            .collect()
    }

    /// Degree-2 quadrature over cell `c`.
    pub fn cell_quadrature(&self, c: usize) -> Vec<geometry::QuadPoint> {
        self.cell_simplices(c)
            .iter()
            .flat_map(|s| geometry::simplex_rule(s))
            .collect()
    }

    /// Quadrature over facet `f`, exact for quadratics.
    pub fn facet_quadrature(&self, f: usize) -> Vec<geometry::QuadPoint> {
        self.facet_simplices(f)
            .iter()
            .flat_map(|s| geometry::simplex_rule(s))
            .collect()
    }

    /// Whether `x` lies in cell `c` (up to a relative tolerance).
    pub fn cell_contains(&self, c: usize, x: &Point) -> bool {
        let cell = &self.cells[c];
        let tol = 1e-10 * cell.diameter;
        cell.facets.iter().all(|&f| {
            let facet = &self.facets[f];
            let n = facet.outward_normal(c);
            (x - facet.barycenter).dot(&n) <= tol
        })
    }

    /// First cell containing `x`, falling back to the nearest barycenter.
    pub fn locate(&self, x: &Point) -> usize {
        if let Some(c) = (0..self.cells.len()).find(|&c| self.cell_contains(c, x)) {
            return c;
        }
        (0..self.cells.len())
            .min_by(|&a, &b| {
                let da = (self.cells[a].barycenter - x).norm();
                let db = (self.cells[b].barycenter - x).norm();
                da.total_cmp(&db)
            })
            .unwrap_or(0)
    }

    /// Apply `f` to every vertex, recomputing all derived geometry.
    pub fn map_vertices(&self, f: impl Fn(&Point) -> Point) -> Result<Mesh> {
        let vertices = self.vertices.iter().map(f).collect();
        let cells = self.cells.iter().map(|c| c.vertices.clone()).collect();
        let tags: Vec<(Vec<usize>, String)> = self
            .facets
            .iter()
            .filter_map(|f| f.tag.clone().map(|t| (f.vertices.clone(), t)))
            .collect();
        Mesh::new(self.dim, vertices, cells, &tags)
    }

    /// Σ_{F∈∂c} |F| n_{F,c}; zero for every closed cell.
    pub fn closure_defect(&self, c: usize) -> Point {
        self.cells[c]
            .facets
            .iter()
            .map(|&f| self.facets[f].measure * self.facets[f].outward_normal(c))
            .sum()
    }
}

/// Partition of the facets into interior, Dirichlet and Neumann sets.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct FacetPartition {
    pub interior: Vec<usize>,
    pub dirichlet: Vec<usize>,
    pub neumann: Vec<usize>,
}

/// Split the boundary facets with `is_dirichlet` evaluated on their tags.
pub fn classify_facets(mesh: &Mesh, is_dirichlet: impl Fn(&str) -> bool) -> Result<FacetPartition> {
    let mut part = FacetPartition::default();
    for (f, facet) in mesh.facets().iter().enumerate() {
        if !facet.is_boundary() {
            part.interior.push(f);
            continue;
        }
        let tag = facet.tag.as_deref().ok_or(Error::UntaggedFacet { facet: f })?;
        if is_dirichlet(tag) {
            part.dirichlet.push(f);
        } else {
            part.neumann.push(f);
        }
    }
    Ok(part)
}
