//! Reader for the ASCII Gmsh MSH 2.2 format.

use std::collections::HashMap;

use super::Mesh;
use crate::error::{Error, Result};
use crate::geometry::Point;

fn element_info(kind: usize) -> Option<(usize, usize)> {
    // (topological dimension, node count)
    match kind {
        15 => Some((0, 1)),
        1 => Some((1, 2)),
        2 => Some((2, 3)),
        3 => Some((2, 4)),
        4 => Some((3, 4)),
        5 => Some((3, 8)),
        _ => None,
    }
}

struct RawElement {
    dim: usize,
    physical: Option<i64>,
    nodes: Vec<usize>,
}

pub(super) fn parse_msh(text: &str) -> Result<Mesh> {
    let lines: Vec<&str> = text.lines().collect();
    let mut i = 0;
    let mut names: HashMap<(usize, i64), String> = HashMap::new();
    let mut nodes: Vec<(usize, Point)> = Vec::new();
    let mut elements: Vec<RawElement> = Vec::new();
    let perr = |line: usize, msg: &str| Error::parse(Some(line + 1), msg.to_string());

    while i < lines.len() {
        let line = lines[i].trim();
        match line {
            "$MeshFormat" => {
                let header = lines.get(i + 1).ok_or_else(|| perr(i, "truncated header"))?;
                let version = header.split_whitespace().next().unwrap_or("");
                if !version.starts_with("2.") {
                    return Err(perr(i + 1, &format!("unsupported MSH version {version}")));
                }
                if header.split_whitespace().nth(1) != Some("0") {
                    return Err(perr(i + 1, "binary MSH files are not supported"));
                }
                i += 3;
            }
            "$PhysicalNames" => {
                let n: usize = parse(lines.get(i + 1), i + 1)?;
                for k in 0..n {
                    let l = i + 2 + k;
                    let text = lines.get(l).ok_or_else(|| perr(l, "truncated $PhysicalNames"))?;
                    let mut it = text.splitn(3, char::is_whitespace);
                    let dim: usize = parse(it.next().as_ref(), l)?;
                    let tag: i64 = parse(it.next().as_ref(), l)?;
                    let name = it.next().unwrap_or("").trim().trim_matches('"').to_string();
                    names.insert((dim, tag), name);
                }
                i += n + 3;
            }
            "$Nodes" => {
                let n: usize = parse(lines.get(i + 1), i + 1)?;
                for k in 0..n {
                    let l = i + 2 + k;
                    let text = lines.get(l).ok_or_else(|| perr(l, "truncated $Nodes"))?;
                    let vals: Vec<&str> = text.split_whitespace().collect();
                    if vals.len() < 4 {
                        return Err(perr(l, "node line needs id x y z"));
                    }
                    let id: usize = parse(Some(&vals[0]), l)?;
                    let x: f64 = parse(Some(&vals[1]), l)?;
                    let y: f64 = parse(Some(&vals[2]), l)?;
                    let z: f64 = parse(Some(&vals[3]), l)?;
                    nodes.push((id, Point::new(x, y, z)));
                }
                i += n + 3;
            }
            "$Elements" => {
                let n: usize = parse(lines.get(i + 1), i + 1)?;
                for k in 0..n {
                    let l = i + 2 + k;
                    let text = lines.get(l).ok_or_else(|| perr(l, "truncated $Elements"))?;
                    let vals: Vec<i64> = text
                        .split_whitespace()
                        .map(|s| s.parse::<i64>().map_err(|_| perr(l, "bad integer")))
                        .collect::<Result<_>>()?;
                    if vals.len() < 3 {
                        return Err(perr(l, "element line too short"));
                    }
                    let kind = vals[1] as usize;
                    let ntags = vals[2] as usize;
                    let (dim, nn) =
                        element_info(kind).ok_or_else(|| perr(l, &format!("unsupported element type {kind}")))?;
                    if vals.len() != 3 + ntags + nn {
                        return Err(perr(l, "element node count mismatch"));
                    }
                    elements.push(RawElement {
                        dim,
                        physical: (ntags > 0).then(|| vals[3]),
                        nodes: vals[3 + ntags..].iter().map(|&v| v as usize).collect(),
                    });
                }
                i += n + 3;
            }
            _ => i += 1,
        }
    }

    if nodes.is_empty() || elements.is_empty() {
        return Err(Error::parse(None, "missing $Nodes or $Elements section"));
    }
    let dim = elements.iter().map(|e| e.dim).max().unwrap_or(0);
    if dim != 2 && dim != 3 {
        return Err(Error::InvalidMesh(format!("mesh dimension {dim}")));
    }
    let index: HashMap<usize, usize> = nodes.iter().enumerate().map(|(k, (id, _))| (*id, k)).collect();
    let map = |ids: &[usize]| -> Result<Vec<usize>> {
        ids.iter()
            .map(|id| {
                index
                    .get(id)
                    .copied()
                    .ok_or_else(|| Error::parse(None, format!("unknown node {id}")))
            })
            .collect()
    };
    let vertices: Vec<Point> = nodes
        .iter()
        .map(|(_, p)| if dim == 2 { Point::new(p.x, p.y, 0.0) } else { *p })
        .collect();
    let mut cells = Vec::new();
    let mut tags = Vec::new();
    for e in &elements {
        if e.dim == dim {
            cells.push(map(&e.nodes)?);
        } else if e.dim + 1 == dim {
            if let Some(tag) = e.physical {
                let name = names
                    .get(&(e.dim, tag))
                    .cloned()
                    .unwrap_or_else(|| tag.to_string());
                tags.push((map(&e.nodes)?, name));
            }
        }
    }
    Mesh::new(dim, vertices, cells, &tags)
}

fn parse<T: std::str::FromStr>(s: Option<&&str>, line: usize) -> Result<T> {
    s.and_then(|s| s.trim().parse().ok())
        .ok_or_else(|| Error::parse(Some(line + 1), "expected a number"))
}

#[cfg(test)]
mod tests {
    use super::*;

    const SQUARE: &str = "$MeshFormat
2.2 0 8
$EndMeshFormat
$PhysicalNames
2
1 1 \"bottom\"
1 2 \"wall\"
$EndPhysicalNames
$Nodes
4
1 0 0 0
2 1 0 0
3 1 1 0
4 0 1 0
$EndNodes
$Elements
6
1 1 2 1 1 1 2
2 1 2 2 2 2 3
3 1 2 2 3 3 4
4 1 2 2 4 4 1
5 2 2 3 5 1 2 3
6 2 2 3 5 1 3 4
$EndElements
";

    #[test]
    fn reads_two_triangle_square() {
        let m = parse_msh(SQUARE).unwrap();
        assert_eq!(m.dim(), 2);
        assert_eq!(m.num_cells(), 2);
        let by_tag = m.facets_by_tag();
        assert_eq!(by_tag["bottom"].len(), 1);
        assert_eq!(by_tag["wall"].len(), 3);
        assert!((m.total_measure() - 1.0).abs() < 1e-14);
    }

    #[test]
    fn rejects_unknown_node() {
        let bad = SQUARE.replace("6 2 2 3 5 1 3 4", "6 2 2 3 5 1 3 9");
        assert!(parse_msh(&bad).is_err());
    }

    #[test]
    fn rejects_msh4() {
        let bad = SQUARE.replace("2.2 0 8", "4.1 0 8");
        assert!(matches!(parse_msh(&bad), Err(Error::Parse { .. })));
    }
}
