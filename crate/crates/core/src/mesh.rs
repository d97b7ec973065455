//! Conforming triangulations with edge topology.
//!
//! Local edge `i` of a cell joins its vertices `i` and `(i + 1) % 3`. Every
//! global edge stores its vertices as `(lo, hi)` with `lo < hi` and a unit
//! normal obtained by rotating the tangent `x_hi - x_lo` clockwise. The outward
//! normal of a cell on one of its edges is `sign * n_E`, with the sign stored
//! per (cell, local edge).

use std::collections::HashMap;

use crate::error::{HdgError, Result};

pub type Point = [f64; 2];

#[derive(Debug, Clone, PartialEq)]
pub struct Mesh {
    pub vertices: Vec<Point>,
    /// Counter-clockwise vertex triples.
    pub cells: Vec<[usize; 3]>,
    /// Canonical `(lo, hi)` vertex pairs.
    pub edges: Vec<[usize; 2]>,
    pub cell_edges: Vec<[usize; 3]>,
    /// `n_T = sign * n_E` on each local edge.
    pub cell_edge_signs: Vec<[f64; 3]>,
    /// First incident cell, second incident cell for interior edges.
    pub edge_cells: Vec<(usize, Option<usize>)>,
    pub boundary: Vec<bool>,
    pub edge_normals: Vec<Point>,
    pub edge_lengths: Vec<f64>,
    pub cell_diameters: Vec<f64>,
    pub cell_areas: Vec<f64>,
}

fn signed_area(a: Point, b: Point, c: Point) -> f64 {
    0.5 * ((b[0] - a[0]) * (c[1] - a[1]) - (c[0] - a[0]) * (b[1] - a[1]))
}

fn dist(a: Point, b: Point) -> f64 {
    (b[0] - a[0]).hypot(b[1] - a[1])
}

impl Mesh {
    /// Uniform `n x n` grid of the unit square, each square cut by its
    /// lower-left to upper-right diagonal.
    pub fn uniform(n: usize) -> Mesh {
        assert!(n >= 1, "uniform mesh needs n >= 1");
        let h = 1.0 / n as f64;
        let mut vertices = Vec::with_capacity((n + 1) * (n + 1));
        for j in 0..=n {
            for i in 0..=n {
                vertices.push([i as f64 * h, j as f64 * h]);
            }
        }
        let mut cells = Vec::with_capacity(2 * n * n);
        for j in 0..n {
            for i in 0..n {
                let v00 = j * (n + 1) + i;
                let v10 = v00 + 1;
                let v01 = v00 + n + 1;
                let v11 = v01 + 1;
                cells.push([v00, v10, v11]);
                cells.push([v00, v11, v01]);
            }
        }
        Mesh::from_cells(vertices, cells).expect("structured mesh is valid")
    }

    /// Builds edge topology and metrics. Clockwise cells are flipped; zero-area
    /// cells, dangling indices and non-manifold edges are rejected.
    pub fn from_cells(vertices: Vec<Point>, mut cells: Vec<[usize; 3]>) -> Result<Mesh> {
        let nv = vertices.len();
        for (c, cell) in cells.iter_mut().enumerate() {
            if let Some(&bad) = cell.iter().find(|&&v| v >= nv) {
                return Err(HdgError::MeshValidation(format!(
                    "cell {c} references vertex {bad} but only {nv} vertices exist"
                )));
            }
            let area = signed_area(vertices[cell[0]], vertices[cell[1]], vertices[cell[2]]);
            let scale = dist(vertices[cell[0]], vertices[cell[1]])
                .max(dist(vertices[cell[1]], vertices[cell[2]]))
                .max(dist(vertices[cell[2]], vertices[cell[0]]));
            if area.abs() <= 1e-14 * scale * scale {
                return Err(HdgError::MeshValidation(format!("cell {c} has zero area")));
            }
            if area < 0.0 {
                cell.swap(1, 2);
            }
        }

        let mut lookup: HashMap<(usize, usize), usize> = HashMap::new();
        let mut edges = Vec::new();
        let mut edge_cells: Vec<(usize, Option<usize>)> = Vec::new();
        let mut cell_edges = Vec::with_capacity(cells.len());
        let mut cell_edge_signs = Vec::with_capacity(cells.len());
        for (c, cell) in cells.iter().enumerate() {
            let mut ids = [0usize; 3];
            let mut signs = [0.0; 3];
            for i in 0..3 {
                let (a, b) = (cell[i], cell[(i + 1) % 3]);
                let key = (a.min(b), a.max(b));
                let e = match lookup.get(&key) {
                    Some(&e) => {
                        if edge_cells[e].1.is_some() {
                            return Err(HdgError::MeshValidation(format!(
                                "edge ({}, {}) shared by more than two cells",
                                key.0, key.1
                            )));
                        }
                        edge_cells[e].1 = Some(c);
                        e
                    }
                    None => {
                        let e = edges.len();
                        lookup.insert(key, e);
                        edges.push([key.0, key.1]);
                        edge_cells.push((c, None));
                        e
                    }
                };
                ids[i] = e;
                signs[i] = if a < b { 1.0 } else { -1.0 };
            }
            cell_edges.push(ids);
            cell_edge_signs.push(signs);
        }

        let boundary: Vec<bool> = edge_cells.iter().map(|(_, o)| o.is_none()).collect();
        let edge_lengths: Vec<f64> = edges
            .iter()
            .map(|&[a, b]| dist(vertices[a], vertices[b]))
            .collect();
        let edge_normals = edges
            .iter()
            .zip(&edge_lengths)
            .map(|(&[a, b], &len)| {
                let t = [vertices[b][0] - vertices[a][0], vertices[b][1] - vertices[a][1]];
                [t[1] / len, -t[0] / len]
            })
            .collect();
        let cell_areas = cells
            .iter()
            .map(|c| signed_area(vertices[c[0]], vertices[c[1]], vertices[c[2]]))
            .collect();
        let cell_diameters = cell_edges
            .iter()
            .map(|es| es.iter().map(|&e| edge_lengths[e]).fold(0.0, f64::max))
            .collect();

        Ok(Mesh {
            vertices,
            cells,
            edges,
            cell_edges,
            cell_edge_signs,
            edge_cells,
            boundary,
            edge_normals,
            edge_lengths,
            cell_diameters,
            cell_areas,
        })
    }

    pub fn num_cells(&self) -> usize {
        self.cells.len()
    }

    pub fn num_edges(&self) -> usize {
        self.edges.len()
    }

    /// Mesh size `h = max h_T`.
    pub fn h(&self) -> f64 {
        self.cell_diameters.iter().copied().fold(0.0, f64::max)
    }

    pub fn cell_vertices(&self, c: usize) -> [Point; 3] {
        let [a, b, d] = self.cells[c];
        [self.vertices[a], self.vertices[b], self.vertices[d]]
    }

    /// Outward unit normal of cell `c` on its local edge `i`.
    pub fn outward_normal(&self, c: usize, i: usize) -> Point {
        let n = self.edge_normals[self.cell_edges[c][i]];
        let s = self.cell_edge_signs[c][i];
        [s * n[0], s * n[1]]
    }

    /// Position of edge `e` at canonical parameter `t` in `[0, 1]` (from `lo` to `hi`).
    pub fn edge_point(&self, e: usize, t: f64) -> Point {
        let [a, b] = self.edges[e];
        let (pa, pb) = (self.vertices[a], self.vertices[b]);
        [pa[0] + t * (pb[0] - pa[0]), pa[1] + t * (pb[1] - pa[1])]
    }

    pub fn num_interior_edges(&self) -> usize {
        self.boundary.iter().filter(|b| !**b).count()
    }

    /// Imports a Triangle `.node` / `.ele` pair. Vertex numbering may start at
    /// 0 or 1; the base is taken from the first vertex record.
    pub fn from_triangle(node_text: &str, ele_text: &str) -> Result<Mesh> {
        let mut node_lines = data_lines(node_text);
        let header = node_lines
            .next()
            .ok_or_else(|| HdgError::MeshParse("empty .node file".into()))?;
        let nv: usize = parse_field(&header, 0, ".node header")?;
        let dim: usize = parse_field(&header, 1, ".node header")?;
        if dim != 2 {
            return Err(HdgError::MeshParse(format!(".node dimension must be 2, got {dim}")));
        }
        let mut base = None;
        let mut vertices = vec![[f64::NAN; 2]; nv];
        let mut seen = vec![false; nv];
        for _ in 0..nv {
            let line = node_lines
                .next()
                .ok_or_else(|| HdgError::MeshParse(format!(".node declares {nv} vertices but ends early")))?;
            let idx: usize = parse_field(&line, 0, ".node vertex")?;
            let base = *base.get_or_insert(idx.min(1));
            let slot = idx
                .checked_sub(base)
                .filter(|&s| s < nv)
                .ok_or_else(|| HdgError::MeshParse(format!("vertex index {idx} out of range")))?;
            if seen[slot] {
                return Err(HdgError::MeshParse(format!("duplicate vertex index {idx}")));
            }
            seen[slot] = true;
            vertices[slot] = [
                parse_field(&line, 1, ".node vertex")?,
                parse_field(&line, 2, ".node vertex")?,
            ];
        }
        let base = base.unwrap_or(0);

        let mut ele_lines = data_lines(ele_text);
        let header = ele_lines
            .next()
            .ok_or_else(|| HdgError::MeshParse("empty .ele file".into()))?;
        let nc: usize = parse_field(&header, 0, ".ele header")?;
        let per: usize = parse_field(&header, 1, ".ele header")?;
        if per != 3 {
            return Err(HdgError::MeshParse(format!(
                "only linear triangles are supported, .ele has {per} nodes per cell"
            )));
        }
        let mut cells = Vec::with_capacity(nc);
        for _ in 0..nc {
            let line = ele_lines
                .next()
                .ok_or_else(|| HdgError::MeshParse(format!(".ele declares {nc} cells but ends early")))?;
            let mut cell = [0usize; 3];
            for (i, v) in cell.iter_mut().enumerate() {
                let raw: usize = parse_field(&line, i + 1, ".ele cell")?;
                *v = raw.checked_sub(base).ok_or_else(|| {
                    HdgError::MeshValidation(format!("vertex index {raw} below numbering base {base}"))
                })?;
            }
            cells.push(cell);
        }
        Mesh::from_cells(vertices, cells)
    }

    /// Serializes to Triangle `.node` / `.ele` text with 1-based numbering.
    pub fn to_triangle(&self) -> (String, String) {
        let mut node = format!("{} 2 0 0\n", self.vertices.len());
        for (i, v) in self.vertices.iter().enumerate() {
            node.push_str(&format!("{} {:.17e} {:.17e}\n", i + 1, v[0], v[1]));
        }
        let mut ele = format!("{} 3 0\n", self.cells.len());
        for (i, c) in self.cells.iter().enumerate() {
            ele.push_str(&format!("{} {} {} {}\n", i + 1, c[0] + 1, c[1] + 1, c[2] + 1));
        }
        (node, ele)
    }
}

fn data_lines(text: &str) -> impl Iterator<Item = Vec<String>> + '_ {
    text.lines()
        .map(|l| l.split('#').next().unwrap_or("").trim())
        .filter(|l| !l.is_empty())
        .map(|l| l.split_whitespace().map(str::to_owned).collect())
}

fn parse_field<T: std::str::FromStr>(fields: &[String], i: usize, what: &str) -> Result<T> {
    let raw = fields
        .get(i)
        .ok_or_else(|| HdgError::MeshParse(format!("{what}: missing field {}", i + 1)))?;
    raw.parse()
        .map_err(|_| HdgError::MeshParse(format!("{what}: cannot parse '{raw}'")))
}
