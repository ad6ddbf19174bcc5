use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::Mesh;
use crate::error::{Error, Result};
use crate::geometry::Point;

/// On-disk layout of the internal mesh format.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MeshJson {
    pub dim: usize,
    pub vertices: Vec<Vec<f64>>,
    pub cells: Vec<Vec<usize>>,
    #[serde(default)]
    pub boundary_tags: BTreeMap<String, Vec<Vec<usize>>>,
}

impl MeshJson {
    pub fn into_mesh(self) -> Result<Mesh> {
        let mut vertices = Vec::with_capacity(self.vertices.len());
        for (i, v) in self.vertices.iter().enumerate() {
            if v.len() != self.dim {
                return Err(Error::parse(
                    None,
                    format!("vertex {i} has {} coordinates, expected {}", v.len(), self.dim),
                ));
            }
            vertices.push(Point::new(v[0], v[1], if self.dim == 3 { v[2] } else { 0.0 }));
        }
        let tags: Vec<(Vec<usize>, String)> = self
            .boundary_tags
            .into_iter()
            .flat_map(|(tag, facets)| facets.into_iter().map(move |f| (f, tag.clone())))
            .collect();
        Mesh::new(self.dim, vertices, self.cells, &tags)
    }

    pub fn from_mesh(mesh: &Mesh) -> MeshJson {
        let d = mesh.dim();
        let mut boundary_tags: BTreeMap<String, Vec<Vec<usize>>> = BTreeMap::new();
        for f in mesh.boundary_facets() {
            if let Some(t) = &mesh.facet(f).tag {
                boundary_tags
                    .entry(t.clone())
                    .or_default()
                    .push(mesh.facet(f).vertices.clone());
            }
        }
        MeshJson {
            dim: d,
            vertices: mesh.vertices().iter().map(|p| p.as_slice()[..d].to_vec()).collect(),
            cells: mesh.cells().iter().map(|c| c.vertices.clone()).collect(),
            boundary_tags,
        }
    }
}

pub(super) fn parse_json(text: &str) -> Result<Mesh> {
    let raw: MeshJson = serde_json::from_str(text)
        .map_err(|e| Error::parse(Some(e.line()), e.to_string()))?;
    raw.into_mesh()
}

/// Serialize a mesh in the internal JSON format.
pub fn write_json(mesh: &Mesh) -> String {
    serde_json::to_string(&MeshJson::from_mesh(mesh)).expect("mesh serializes")
}
