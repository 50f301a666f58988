//! Conforming triangulations of a polygon.
//!
//! A [`Mesh`] owns vertex coordinates and positively oriented triangles and
//! derives the edge tables used by every finite element space: canonical
//! edge orientation (lower vertex index first), the three edges of each
//! triangle (local edge `k` is opposite local vertex `k`), the one or two
//! triangles of each edge, and boundary flags for vertices and edges.
//!
//! Construction enforces that every boundary vertex is joined by an edge to
//! at least one interior vertex. The stress-space construction depends on it.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::error::{Error, Result};

pub type Point = [f64; 2];

/// Structured splitting of the unit square.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Pattern {
    /// Each square is split into four triangles through its center.
    Crisscross,
    /// Each square is split by one diagonal whose direction alternates
    /// checkerboard-wise.
    Alternating,
}

impl std::str::FromStr for Pattern {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "crisscross" => Ok(Pattern::Crisscross),
            "alternating" => Ok(Pattern::Alternating),
            other => Err(Error::Invalid(format!("unknown mesh pattern '{other}'"))),
        }
    }
}

/// Index sets of interior and boundary entities.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct EntityTables {
    pub interior_vertices: Vec<usize>,
    pub boundary_vertices: Vec<usize>,
    pub interior_edges: Vec<usize>,
    pub boundary_edges: Vec<usize>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Mesh {
    vertices: Vec<Point>,
    triangles: Vec<[usize; 3]>,
    edges: Vec<[usize; 2]>,
    edge_of_triangle: Vec<[usize; 3]>,
    triangles_of_edge: Vec<Vec<usize>>,
    vertex_triangles: Vec<Vec<usize>>,
    boundary_vertex: Vec<bool>,
    boundary_edge: Vec<bool>,
}

fn signed_area(a: Point, b: Point, c: Point) -> f64 {
    0.5 * ((b[0] - a[0]) * (c[1] - a[1]) - (c[0] - a[0]) * (b[1] - a[1]))
}

impl Mesh {
    /// Builds a mesh, reorienting clockwise triangles and validating every
    /// structural invariant.
    pub fn new(vertices: Vec<Point>, triangles: Vec<[usize; 3]>) -> Result<Self> {
        let nv = vertices.len();
        let mut tris = Vec::with_capacity(triangles.len());
        for (t, tri) in triangles.iter().enumerate() {
            if let Some(&bad) = tri.iter().find(|&&i| i >= nv) {
                return Err(Error::InvalidMesh(format!(
                    "triangle {t}: vertex index {bad} out of range"
                )));
            }
            let area = signed_area(vertices[tri[0]], vertices[tri[1]], vertices[tri[2]]);
            if area == 0.0 || !area.is_finite() {
                return Err(Error::InvalidMesh(format!("triangle {t} has zero area")));
            }
            tris.push(if area < 0.0 {
                [tri[0], tri[2], tri[1]]
            } else {
                *tri
            });
        }
        Self::from_oriented(vertices, tris)
    }

    fn from_oriented(vertices: Vec<Point>, triangles: Vec<[usize; 3]>) -> Result<Self> {
        let nv = vertices.len();
        let nt = triangles.len();
        if nt == 0 {
            return Err(Error::InvalidMesh("no triangles".into()));
        }
        let mut edge_index: HashMap<[usize; 2], usize> = HashMap::new();
        let mut edges: Vec<[usize; 2]> = Vec::new();
        let mut triangles_of_edge: Vec<Vec<usize>> = Vec::new();
        let mut edge_of_triangle = Vec::with_capacity(nt);
        for (t, tri) in triangles.iter().enumerate() {
            let mut local = [0usize; 3];
            for (k, slot) in local.iter_mut().enumerate() {
                let a = tri[(k + 1) % 3];
                let b = tri[(k + 2) % 3];
                let key = if a < b { [a, b] } else { [b, a] };
                let e = *edge_index.entry(key).or_insert_with(|| {
                    edges.push(key);
                    triangles_of_edge.push(Vec::new());
                    edges.len() - 1
                });
                triangles_of_edge[e].push(t);
                *slot = e;
            }
            edge_of_triangle.push(local);
        }
        for (e, cells) in triangles_of_edge.iter().enumerate() {
            if cells.len() > 2 {
                return Err(Error::InvalidMesh(format!(
                    "edge {:?} shared by {} triangles",
                    edges[e],
                    cells.len()
                )));
            }
        }
        let boundary_edge: Vec<bool> = triangles_of_edge.iter().map(|c| c.len() == 1).collect();
        let mut boundary_vertex = vec![false; nv];
        for (e, &b) in boundary_edge.iter().enumerate() {
            if b {
                boundary_vertex[edges[e][0]] = true;
                boundary_vertex[edges[e][1]] = true;
            }
        }
        let mut vertex_triangles = vec![Vec::new(); nv];
        for (t, tri) in triangles.iter().enumerate() {
            for &v in tri {
                vertex_triangles[v].push(t);
            }
        }
        if let Some(v) = vertex_triangles.iter().position(|c| c.is_empty()) {
            return Err(Error::InvalidMesh(format!(
                "vertex {v} belongs to no triangle"
            )));
        }
        let euler = nv as i64 - edges.len() as i64 + nt as i64;
        if euler != 1 {
            return Err(Error::InvalidMesh(format!(
                "Euler characteristic {euler} (expected 1 for a simply connected domain)"
            )));
        }
        let mesh = Mesh {
            vertices,
            triangles,
            edges,
            edge_of_triangle,
            triangles_of_edge,
            vertex_triangles,
            boundary_vertex,
            boundary_edge,
        };
        mesh.check_boundary_connectivity()?;
        Ok(mesh)
    }

    fn check_boundary_connectivity(&self) -> Result<()> {
        let mut linked = vec![false; self.num_vertices()];
        for &[a, b] in &self.edges {
            if !self.boundary_vertex[a] {
                linked[b] = true;
            }
            if !self.boundary_vertex[b] {
                linked[a] = true;
            }
        }
        match (0..self.num_vertices()).find(|&v| self.boundary_vertex[v] && !linked[v]) {
            Some(v) => Err(Error::InvalidMesh(format!(
                "boundary vertex {v} at {:?} is not connected to any interior vertex",
                self.vertices[v]
            ))),
            None => Ok(()),
        }
    }

    pub fn num_vertices(&self) -> usize {
        self.vertices.len()
    }

    pub fn num_triangles(&self) -> usize {
        self.triangles.len()
    }

    pub fn num_edges(&self) -> usize {
        self.edges.len()
    }

    pub fn vertices(&self) -> &[Point] {
        &self.vertices
    }

    pub fn triangles(&self) -> &[[usize; 3]] {
        &self.triangles
    }

    pub fn edges(&self) -> &[[usize; 2]] {
        &self.edges
    }

    /// Global edge indices of a triangle; entry `k` is the edge opposite
    /// local vertex `k`.
    pub fn edges_of_triangle(&self, t: usize) -> [usize; 3] {
        self.edge_of_triangle[t]
    }

    /// One (boundary) or two (interior) triangles, in increasing index order.
    pub fn triangles_of_edge(&self, e: usize) -> &[usize] {
        &self.triangles_of_edge[e]
    }

    pub fn triangles_of_vertex(&self, v: usize) -> &[usize] {
        &self.vertex_triangles[v]
    }

    pub fn is_boundary_vertex(&self, v: usize) -> bool {
        self.boundary_vertex[v]
    }

    pub fn is_boundary_edge(&self, e: usize) -> bool {
        self.boundary_edge[e]
    }

    pub fn triangle_vertices(&self, t: usize) -> [Point; 3] {
        let [a, b, c] = self.triangles[t];
        [self.vertices[a], self.vertices[b], self.vertices[c]]
    }

    pub fn area(&self, t: usize) -> f64 {
        let [a, b, c] = self.triangle_vertices(t);
        signed_area(a, b, c)
    }

    pub fn diameter(&self, t: usize) -> f64 {
        let [a, b, c] = self.triangle_vertices(t);
        let d = |p: Point, q: Point| ((p[0] - q[0]).powi(2) + (p[1] - q[1]).powi(2)).sqrt();
        d(a, b).max(d(b, c)).max(d(c, a))
    }

    /// Mesh size: the largest cell diameter.
    pub fn h(&self) -> f64 {
        (0..self.num_triangles())
            .map(|t| self.diameter(t))
            .fold(0.0, f64::max)
    }

    /// Position of vertex `v` within triangle `t`.
    pub fn local_vertex(&self, t: usize, v: usize) -> Option<usize> {
        self.triangles[t].iter().position(|&w| w == v)
    }

    /// Position of edge `e` within triangle `t`.
    pub fn local_edge(&self, t: usize, e: usize) -> Option<usize> {
        self.edge_of_triangle[t].iter().position(|&f| f == e)
    }

    /// Cells incident to an interior vertex in counter-clockwise order, so
    /// that consecutive entries share an edge. For boundary vertices the
    /// order is by angle as well but the fan is open.
    pub fn cyclic_triangles_of_vertex(&self, v: usize) -> Vec<usize> {
        let p = self.vertices[v];
        let mut cells: Vec<(f64, usize)> = self.vertex_triangles[v]
            .iter()
            .map(|&t| {
                let [a, b, c] = self.triangle_vertices(t);
                let cx = (a[0] + b[0] + c[0]) / 3.0 - p[0];
                let cy = (a[1] + b[1] + c[1]) / 3.0 - p[1];
                (cy.atan2(cx), t)
            })
            .collect();
        cells.sort_by(|x, y| x.0.total_cmp(&y.0).then(x.1.cmp(&y.1)));
        cells.into_iter().map(|(_, t)| t).collect()
    }

    pub fn classify_entities(&self) -> EntityTables {
        let (boundary_vertices, interior_vertices) =
            (0..self.num_vertices()).partition(|&v| self.boundary_vertex[v]);
        let (boundary_edges, interior_edges) =
            (0..self.num_edges()).partition(|&e| self.boundary_edge[e]);
        EntityTables {
            interior_vertices,
            boundary_vertices,
            interior_edges,
            boundary_edges,
        }
    }

    pub fn num_interior_vertices(&self) -> usize {
        self.boundary_vertex.iter().filter(|&&b| !b).count()
    }

    pub fn num_interior_edges(&self) -> usize {
        self.boundary_edge.iter().filter(|&&b| !b).count()
    }

    /// Splits every triangle into four congruent children through its edge
    /// midpoints. Midpoint of edge `e` gets vertex index `nv + e`.
    pub fn refine_uniform(&self) -> Mesh {
        let nv = self.num_vertices();
        let mut vertices = self.vertices.clone();
        for &[a, b] in &self.edges {
            let (p, q) = (self.vertices[a], self.vertices[b]);
            vertices.push([0.5 * (p[0] + q[0]), 0.5 * (p[1] + q[1])]);
        }
        let mut triangles = Vec::with_capacity(4 * self.num_triangles());
        for (t, &[a, b, c]) in self.triangles.iter().enumerate() {
            let [e0, e1, e2] = self.edge_of_triangle[t];
            let (m0, m1, m2) = (nv + e0, nv + e1, nv + e2);
            triangles.push([a, m2, m1]);
            triangles.push([m2, b, m0]);
            triangles.push([m1, m0, c]);
            triangles.push([m0, m1, m2]);
        }
        Mesh::from_oriented(vertices, triangles)
            .expect("uniform refinement preserves mesh validity")
    }

    /// Locates the cell containing `p` (closed cells, small tolerance).
    pub fn locate(&self, p: Point) -> Option<usize> {
        let tol = 1e-12;
        (0..self.num_triangles()).find(|&t| {
            let [a, b, c] = self.triangle_vertices(t);
            let area = signed_area(a, b, c);
            let l0 = signed_area(p, b, c) / area;
            let l1 = signed_area(a, p, c) / area;
            let l2 = signed_area(a, b, p) / area;
            l0 >= -tol && l1 >= -tol && l2 >= -tol
        })
    }

    /// Writes the plain-text format: `nv nt`, then `x y` per vertex, then
    /// `i j k` per triangle (0-based).
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        writeln!(out, "{} {}", self.num_vertices(), self.num_triangles()).unwrap();
        for p in &self.vertices {
            writeln!(out, "{:?} {:?}", p[0], p[1]).unwrap();
        }
        for t in &self.triangles {
            writeln!(out, "{} {} {}", t[0], t[1], t[2]).unwrap();
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Mesh> {
        let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l));
        let (line_no, header) = lines.next().ok_or(Error::Parse {
            line: 1,
            msg: "missing header".into(),
        })?;
        let head: Vec<&str> = header.split_whitespace().collect();
        let parse_count = |s: &str| s.parse::<usize>().ok();
        let (nv, nt) = match head.as_slice() {
            [a, b] => match (parse_count(a), parse_count(b)) {
                (Some(nv), Some(nt)) => (nv, nt),
                _ => {
                    return Err(Error::Parse {
                        line: line_no,
                        msg: format!("malformed header '{header}'"),
                    })
                }
            },
            _ => {
                return Err(Error::Parse {
                    line: line_no,
                    msg: format!("malformed header '{header}'"),
                })
            }
        };
        let mut vertices = Vec::with_capacity(nv);
        for _ in 0..nv {
            let (line, text) = lines.next().ok_or(Error::Parse {
                line: line_no + vertices.len() + 1,
                msg: "unexpected end of file in vertex block".into(),
            })?;
            let fields: Vec<f64> = text
                .split_whitespace()
                .map(|s| s.parse::<f64>())
                .collect::<std::result::Result<_, _>>()
                .map_err(|e| Error::Parse {
                    line,
                    msg: format!("bad coordinate: {e}"),
                })?;
            match fields.as_slice() {
                [x, y] if x.is_finite() && y.is_finite() => vertices.push([*x, *y]),
                _ => {
                    return Err(Error::Parse {
                        line,
                        msg: "expected two finite coordinates".into(),
                    })
                }
            }
        }
        let mut triangles = Vec::with_capacity(nt);
        for _ in 0..nt {
            let (line, text) = lines.next().ok_or(Error::Parse {
                line: line_no + nv + triangles.len() + 1,
                msg: "unexpected end of file in triangle block".into(),
            })?;
            let idx: Vec<usize> = text
                .split_whitespace()
                .map(|s| s.parse::<usize>())
                .collect::<std::result::Result<_, _>>()
                .map_err(|e| Error::Parse {
                    line,
                    msg: format!("bad vertex index: {e}"),
                })?;
            let tri: [usize; 3] = idx.as_slice().try_into().map_err(|_| Error::Parse {
                line,
                msg: "expected three vertex indices".into(),
            })?;
            if let Some(&bad) = tri.iter().find(|&&i| i >= nv) {
                return Err(Error::Parse {
                    line,
                    msg: format!("index out of range: {bad} (nv = {nv})"),
                });
            }
            let area = signed_area(vertices[tri[0]], vertices[tri[1]], vertices[tri[2]]);
            if area == 0.0 {
                return Err(Error::Parse {
                    line,
                    msg: "nonpositive triangle area".into(),
                });
            }
            triangles.push(if area < 0.0 {
                [tri[0], tri[2], tri[1]]
            } else {
                tri
            });
        }
        if let Some((line, extra)) = lines.find(|(_, l)| !l.trim().is_empty()) {
            return Err(Error::Parse {
                line,
                msg: format!("unexpected trailing content '{extra}'"),
            });
        }
        Mesh::from_oriented(vertices, triangles)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        fs::write(path, self.to_text())?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Mesh> {
        Mesh::from_text(&fs::read_to_string(path)?)
    }
}

/// Structured mesh of the unit square with `n x n` squares.
pub fn generate_structured(n: usize, pattern: Pattern) -> Result<Mesh> {
    if n == 0 {
        return Err(Error::Invalid("structured mesh needs n >= 1".into()));
    }
    let h = 1.0 / n as f64;
    let grid = |i: usize, j: usize| j * (n + 1) + i;
    let mut vertices = Vec::new();
    for j in 0..=n {
        for i in 0..=n {
            vertices.push([i as f64 * h, j as f64 * h]);
        }
    }
    let mut triangles = Vec::new();
    for j in 0..n {
        for i in 0..n {
            let (a, b, c, d) = (
                grid(i, j),
                grid(i + 1, j),
                grid(i + 1, j + 1),
                grid(i, j + 1),
            );
            match pattern {
                Pattern::Crisscross => {
                    let m = vertices.len();
                    vertices.push([(i as f64 + 0.5) * h, (j as f64 + 0.5) * h]);
                    triangles.extend([[a, b, m], [b, c, m], [c, d, m], [d, a, m]]);
                }
                Pattern::Alternating => {
                    if (i + j) % 2 == 0 {
                        triangles.extend([[a, b, c], [a, c, d]]);
                    } else {
                        triangles.extend([[a, b, d], [b, c, d]]);
                    }
                }
            }
        }
    }
    Mesh::new(vertices, triangles)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn crisscross_one_counts() {
        let m = generate_structured(1, Pattern::Crisscross).unwrap();
        assert_eq!(
            (m.num_vertices(), m.num_triangles(), m.num_edges()),
            (5, 4, 8)
        );
        let ent = m.classify_entities();
        assert_eq!(ent.interior_vertices.len(), 1);
        assert_eq!(ent.boundary_vertices.len(), 4);
        assert_eq!(ent.interior_edges.len(), 4);
        assert_eq!(ent.boundary_edges.len(), 4);
    }

    #[test]
    fn crisscross_two_counts() {
        let m = generate_structured(2, Pattern::Crisscross).unwrap();
        assert_eq!(
            (m.num_vertices(), m.num_triangles(), m.num_edges()),
            (13, 16, 28)
        );
        let ent = m.classify_entities();
        assert_eq!(ent.interior_vertices.len(), 5);
        assert_eq!(ent.interior_edges.len(), 20);
    }

    #[test]
    fn alternating_needs_even_n() {
        assert!(generate_structured(1, Pattern::Alternating).is_err());
        assert!(generate_structured(3, Pattern::Alternating).is_err());
        let m = generate_structured(4, Pattern::Alternating).unwrap();
        assert_eq!(m.num_triangles(), 32);
    }

    #[test]
    fn clockwise_input_is_reoriented() {
        let verts = vec![[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0], [0.5, 0.5]];
        let tris = vec![[0, 4, 1], [1, 2, 4], [2, 3, 4], [3, 0, 4]];
        let m = Mesh::new(verts, tris).unwrap();
        assert!((0..4).all(|t| m.area(t) > 0.0));
        assert_eq!(m.triangles()[0], [0, 1, 4]);
    }

    #[test]
    fn load_errors_report_lines() {
        let bad_header = "5\n";
        match Mesh::from_text(bad_header) {
            Err(Error::Parse { line: 1, .. }) => {}
            other => panic!("unexpected {other:?}"),
        }
        let out_of_range = "3 1\n0 0\n1 0\n0 1\n0 1 3\n";
        match Mesh::from_text(out_of_range) {
            Err(Error::Parse { line: 5, msg }) => assert!(msg.contains("index out of range")),
            other => panic!("unexpected {other:?}"),
        }
        let flat = "3 1\n0 0\n1 0\n2 0\n0 1 2\n";
        match Mesh::from_text(flat) {
            Err(Error::Parse { line: 5, msg }) => assert!(msg.contains("nonpositive")),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn cyclic_order_shares_edges() {
        let m = generate_structured(2, Pattern::Crisscross)
            .unwrap()
            .refine_uniform();
        for v in 0..m.num_vertices() {
            if m.is_boundary_vertex(v) {
                continue;
            }
            let ring = m.cyclic_triangles_of_vertex(v);
            for w in ring.windows(2) {
                let shared = m
                    .edges_of_triangle(w[0])
                    .iter()
                    .filter(|e| m.edges_of_triangle(w[1]).contains(e))
                    .count();
                assert_eq!(shared, 1, "vertex {v}: cells {w:?} not adjacent");
            }
        }
    }
}
