//! Structured simplicial meshes of rectangles and boxes.

use super::Mesh;
use crate::geometry::Point;

/// Triangulated rectangle `[x0, x0+lx] × [y0, y0+ly]` with `nx × ny`
/// rectangles, each split along its rising diagonal. Boundary facets are
/// tagged `left`, `right`, `bottom`, `top`.
pub fn rect_mesh(origin: [f64; 2], lx: f64, ly: f64, nx: usize, ny: usize) -> Mesh {
    assert!(nx >= 1 && ny >= 1 && lx > 0.0 && ly > 0.0, "invalid rectangle mesh");
    let id = |i: usize, j: usize| j * (nx + 1) + i;
    let mut vertices = Vec::with_capacity((nx + 1) * (ny + 1));
    for j in 0..=ny {
        for i in 0..=nx {
            vertices.push(Point::new(
                origin[0] + lx * i as f64 / nx as f64,
                origin[1] + ly * j as f64 / ny as f64,
                0.0,
            ));
        }
    }
    let mut cells = Vec::with_capacity(2 * nx * ny);
    for j in 0..ny {
        for i in 0..nx {
            let (a, b, c, d) = (id(i, j), id(i + 1, j), id(i + 1, j + 1), id(i, j + 1));
            cells.push(vec![a, b, c]);
            cells.push(vec![a, c, d]);
        }
    }
    let mut tags = Vec::with_capacity(2 * (nx + ny));
    for i in 0..nx {
        tags.push((vec![id(i, 0), id(i + 1, 0)], "bottom".to_string()));
        tags.push((vec![id(i, ny), id(i + 1, ny)], "top".to_string()));
    }
    for j in 0..ny {
        tags.push((vec![id(0, j), id(0, j + 1)], "left".to_string()));
        tags.push((vec![id(nx, j), id(nx, j + 1)], "right".to_string()));
    }
    Mesh::new(2, vertices, cells, &tags).expect("structured rectangle mesh is valid")
}

/// [`rect_mesh`] anchored at the origin.
pub fn generate_rect_mesh(lx: f64, ly: f64, nx: usize, ny: usize) -> Mesh {
    rect_mesh([0.0, 0.0], lx, ly, nx, ny)
}

/// Box `origin + [0,lx]×[0,ly]×[0,lz]` cut into `nx × ny × nz` hexahedra,
/// each split into six tetrahedra around its main diagonal. Tags: `left`/`right`
/// (x), `bottom`/`top` (y), `back`/`front` (z).
pub fn box_mesh(origin: [f64; 3], lengths: [f64; 3], counts: [usize; 3]) -> Mesh {
    let [nx, ny, nz] = counts;
    assert!(nx >= 1 && ny >= 1 && nz >= 1, "invalid box mesh");
    let id = |i: usize, j: usize, k: usize| (k * (ny + 1) + j) * (nx + 1) + i;
    let mut vertices = Vec::new();
    for k in 0..=nz {
        for j in 0..=ny {
            for i in 0..=nx {
                vertices.push(Point::new(
                    origin[0] + lengths[0] * i as f64 / nx as f64,
                    origin[1] + lengths[1] * j as f64 / ny as f64,
                    origin[2] + lengths[2] * k as f64 / nz as f64,
                ));
            }
        }
    }
    // Kuhn paths from corner 000 to corner 111.
    const PATHS: [[usize; 3]; 6] = [[0, 1, 2], [0, 2, 1], [1, 0, 2], [1, 2, 0], [2, 0, 1], [2, 1, 0]];
    let mut cells = Vec::with_capacity(6 * nx * ny * nz);
    for k in 0..nz {
        for j in 0..ny {
            for i in 0..nx {
                for path in PATHS {
                    let mut corner = [i, j, k];
                    let mut tet = vec![id(i, j, k)];
                    for axis in path {
                        corner[axis] += 1;
                        tet.push(id(corner[0], corner[1], corner[2]));
                    }
                    cells.push(tet);
                }
            }
        }
    }
    let mut tags = Vec::new();
    // Each boundary quad is split along the diagonal joining its lowest and highest corner.
    let mut quad = |a: usize, b: usize, c: usize, d: usize, tag: &str| {
        tags.push((vec![a, b, c], tag.to_string()));
        tags.push((vec![a, c, d], tag.to_string()));
    };
    for k in 0..nz {
        for j in 0..ny {
            for (i, tag) in [(0, "left"), (nx, "right")] {
                quad(id(i, j, k), id(i, j + 1, k), id(i, j + 1, k + 1), id(i, j, k + 1), tag);
            }
        }
    }
    for k in 0..nz {
        for i in 0..nx {
            for (j, tag) in [(0, "bottom"), (ny, "top")] {
                quad(id(i, j, k), id(i + 1, j, k), id(i + 1, j, k + 1), id(i, j, k + 1), tag);
            }
        }
    }
    for j in 0..ny {
        for i in 0..nx {
            for (k, tag) in [(0, "back"), (nz, "front")] {
                quad(id(i, j, k), id(i + 1, j, k), id(i + 1, j + 1, k), id(i, j + 1, k), tag);
            }
        }
    }
    Mesh::new(3, vertices, cells, &tags).expect("structured box mesh is valid")
}

/// [`box_mesh`] anchored at the origin.
pub fn generate_box_mesh(lx: f64, ly: f64, lz: f64, nx: usize, ny: usize, nz: usize) -> Mesh {
    box_mesh([0.0; 3], [lx, ly, lz], [nx, ny, nz])
}
