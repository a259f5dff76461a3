//! Combinatorial triangulated tori and their flat embeddings.

use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::Graph;

/// Unordered vertex pair stored as `(min, max)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct EdgeKey(pub usize, pub usize);

impl EdgeKey {
    pub fn new(a: usize, b: usize) -> Self {
        if a <= b {
            Self(a, b)
        } else {
            Self(b, a)
        }
    }

    pub fn other(&self, v: usize) -> usize {
        if v == self.0 {
            self.1
        } else {
            self.0
        }
    }
}

/// Closed genus-one triangulation.
///
/// Faces keep the orientation they were given in. Corner `c` of face `f` is
/// vertex `triangles()[f][c]`; `face_edges()[f][c]` is the edge opposite it.
#[derive(Clone, Debug)]
pub struct Triangulation {
    triangles: Vec<[usize; 3]>,
    graph: Graph,
    edge_faces: Vec<[usize; 2]>,
    face_edges: Vec<[usize; 3]>,
    degrees: Vec<usize>,
}

impl Triangulation {
    pub fn num_vertices(&self) -> usize {
        self.graph.num_vertices()
    }

    pub fn num_edges(&self) -> usize {
        self.graph.num_edges()
    }

    pub fn num_faces(&self) -> usize {
        self.triangles.len()
    }

    pub fn triangles(&self) -> &[[usize; 3]] {
        &self.triangles
    }

    pub fn edges(&self) -> &[EdgeKey] {
        self.graph.edges()
    }

    pub fn graph(&self) -> &Graph {
        &self.graph
    }

    pub fn edge_index(&self, a: usize, b: usize) -> Option<usize> {
        self.graph.edge_index(EdgeKey::new(a, b))
    }

    /// The two faces incident to each edge, in increasing face order.
    pub fn edge_faces(&self) -> &[[usize; 2]] {
        &self.edge_faces
    }

    pub fn face_edges(&self) -> &[[usize; 3]] {
        &self.face_edges
    }

    pub fn vertex_degrees(&self) -> &[usize] {
        &self.degrees
    }

    pub fn euler_characteristic(&self) -> i64 {
        self.num_vertices() as i64 - self.num_edges() as i64 + self.num_faces() as i64
    }

    pub fn validate(&self) -> ValidationReport {
        validate_faces(self.num_vertices(), &self.triangles)
    }
}

/// Builds and validates a torus triangulation from a face list.
pub fn build_triangulation(triangles: &[[usize; 3]], num_vertices: usize) -> Result<Triangulation> {
    check_face_list(triangles, num_vertices)?;
    let incidence = edge_incidence(triangles);
    if let Some((edge, faces)) = incidence.iter().find(|(_, f)| f.len() != 2) {
        return Err(Error::NonManifoldEdge { edge: *edge, faces: faces.len() });
    }
    let euler = num_vertices as i64 - incidence.len() as i64 + triangles.len() as i64;
    if euler != 0 {
        return Err(Error::NotTorus { euler });
    }
    let edges: Vec<EdgeKey> = incidence.keys().copied().collect();
    let graph = Graph::from_sorted(num_vertices, edges);
    let components = graph.components();
    if components != 1 {
        return Err(Error::Disconnected { components });
    }
    let edge_faces: Vec<[usize; 2]> = incidence.values().map(|f| [f[0], f[1]]).collect();
    let index: HashMap<EdgeKey, usize> = graph.edges().iter().enumerate().map(|(i, e)| (*e, i)).collect();
    let face_edges = triangles
        .iter()
        .map(|&[a, b, c]| [index[&EdgeKey::new(b, c)], index[&EdgeKey::new(a, c)], index[&EdgeKey::new(a, b)]])
        .collect();
    let degrees = graph.degrees();
    Ok(Triangulation { triangles: triangles.to_vec(), graph, edge_faces, face_edges, degrees })
}

fn check_face_list(triangles: &[[usize; 3]], num_vertices: usize) -> Result<()> {
    for (f, t) in triangles.iter().enumerate() {
        if t.iter().any(|&v| v >= num_vertices) {
            return Err(Error::InvalidInput(format!("face {f} references a vertex outside 0..{num_vertices}")));
        }
        if t[0] == t[1] || t[1] == t[2] || t[0] == t[2] {
            return Err(Error::InvalidInput(format!("face {f} repeats a vertex")));
        }
    }
    Ok(())
}

fn edge_incidence(triangles: &[[usize; 3]]) -> BTreeMap<EdgeKey, Vec<usize>> {
    let mut map: BTreeMap<EdgeKey, Vec<usize>> = BTreeMap::new();
    for (f, &[a, b, c]) in triangles.iter().enumerate() {
        for key in [EdgeKey::new(a, b), EdgeKey::new(b, c), EdgeKey::new(a, c)] {
            map.entry(key).or_default().push(f);
        }
    }
    map
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub enum Violation {
    InvalidFaces(String),
    NonManifoldEdge { edge: EdgeKey, faces: usize },
    NotTorus { euler: i64 },
    Disconnected { components: usize },
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct ValidationReport {
    pub num_vertices: usize,
    pub num_edges: usize,
    pub num_faces: usize,
    pub euler_characteristic: i64,
    /// Degree → number of vertices with that degree.
    pub degree_histogram: BTreeMap<usize, usize>,
    pub min_degree: usize,
    pub max_degree: usize,
    pub components: usize,
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Report-only check of a raw face list. Never fails.
pub fn validate_faces(num_vertices: usize, triangles: &[[usize; 3]]) -> ValidationReport {
    let mut violations = Vec::new();
    if let Err(Error::InvalidInput(msg)) = check_face_list(triangles, num_vertices) {
        violations.push(Violation::InvalidFaces(msg));
    }
    let usable: Vec<[usize; 3]> = triangles
        .iter()
        .copied()
        .filter(|t| t.iter().all(|&v| v < num_vertices) && t[0] != t[1] && t[1] != t[2] && t[0] != t[2])
        .collect();
    let incidence = edge_incidence(&usable);
    for (edge, faces) in &incidence {
        if faces.len() != 2 {
            violations.push(Violation::NonManifoldEdge { edge: *edge, faces: faces.len() });
        }
    }
    let euler = num_vertices as i64 - incidence.len() as i64 + triangles.len() as i64;
    if euler != 0 {
        violations.push(Violation::NotTorus { euler });
    }
    let graph = Graph::from_sorted(num_vertices, incidence.keys().copied().collect());
    let components = graph.components();
    if components != 1 {
        violations.push(Violation::Disconnected { components });
    }
    let degrees = graph.degrees();
    let mut degree_histogram = BTreeMap::new();
    for d in &degrees {
        *degree_histogram.entry(*d).or_insert(0) += 1;
    }
    ValidationReport {
        num_vertices,
        num_edges: incidence.len(),
        num_faces: triangles.len(),
        euler_characteristic: euler,
        degree_histogram,
        min_degree: degrees.iter().copied().min().unwrap_or(0),
        max_degree: degrees.iter().copied().max().unwrap_or(0),
        components,
        violations,
    }
}

/// Basis of a planar lattice; the flat torus is `R² / (Z a + Z b)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Lattice {
    pub a: [f64; 2],
    pub b: [f64; 2],
}

impl Lattice {
    pub fn new(a: [f64; 2], b: [f64; 2]) -> Result<Self> {
        let lattice = Self { a, b };
        let det = lattice.determinant();
        if !det.is_finite() || det == 0.0 {
            return Err(Error::InvalidInput("lattice basis is degenerate".into()));
        }
        Ok(lattice)
    }

    /// Unit-area hexagonal lattice with `a` along the x axis.
    pub fn hexagonal_unit() -> Self {
        let s = (2.0 / 3f64.sqrt()).sqrt();
        Self { a: [s, 0.0], b: [0.5 * s, 0.5 * 3f64.sqrt() * s] }
    }

    pub fn determinant(&self) -> f64 {
        self.a[0] * self.b[1] - self.a[1] * self.b[0]
    }

    pub fn area(&self) -> f64 {
        self.determinant().abs()
    }

    pub fn point(&self, x: f64, y: f64) -> [f64; 2] {
        [x * self.a[0] + y * self.b[0], x * self.a[1] + y * self.b[1]]
    }

    /// Lattice coordinates `(x, y)` with `p = x a + y b`.
    pub fn coordinates(&self, p: [f64; 2]) -> [f64; 2] {
        let det = self.determinant();
        [(p[0] * self.b[1] - p[1] * self.b[0]) / det, (self.a[0] * p[1] - self.a[1] * p[0]) / det]
    }

    /// Wraps `p` into the half-open fundamental parallelogram.
    pub fn wrap(&self, p: [f64; 2]) -> [f64; 2] {
        let [x, y] = self.coordinates(p);
        let fx = x - x.floor();
        let fy = y - y.floor();
        self.point(if fx >= 1.0 { 0.0 } else { fx }, if fy >= 1.0 { 0.0 } else { fy })
    }

    /// Shortest translate of the displacement `d`.
    ///
    /// Fails with [`Error::AmbiguousImage`] when two translates tie within
    /// `1e-12`.
    pub fn minimal_image(&self, d: [f64; 2]) -> Result<[f64; 2]> {
        let [x, y] = self.coordinates(d);
        let (x0, y0) = (x.round(), y.round());
        let mut candidates: Vec<([f64; 2], f64)> = Vec::with_capacity(25);
        for i in -2..=2 {
            for j in -2..=2 {
                let p = self.point(x - x0 + i as f64, y - y0 + j as f64);
                candidates.push((p, p[0].hypot(p[1])));
            }
        }
        candidates.sort_by(|a, b| a.1.total_cmp(&b.1));
        if candidates[1].1 - candidates[0].1 <= 1e-12 {
            return Err(Error::AmbiguousImage { displacement: d });
        }
        Ok(candidates[0].0)
    }
}

/// Vertex positions on a flat torus.
#[derive(Clone, Debug, PartialEq)]
pub struct VertexEmbedding {
    pub positions: Vec<[f64; 2]>,
    pub lattice: Lattice,
}

impl VertexEmbedding {
    pub fn new(positions: Vec<[f64; 2]>, lattice: Lattice) -> Self {
        let positions = positions.into_iter().map(|p| lattice.wrap(p)).collect();
        Self { positions, lattice }
    }

    /// Minimal-image displacement from vertex `i` to vertex `j`.
    pub fn displacement(&self, i: usize, j: usize) -> Result<[f64; 2]> {
        let p = self.positions[i];
        let q = self.positions[j];
        self.lattice.minimal_image([q[0] - p[0], q[1] - p[1]])
    }

    /// Flat minimal-image length of every edge of `tri`.
    pub fn flat_lengths(&self, tri: &Triangulation) -> Result<Vec<f64>> {
        tri.edges().iter().map(|e| self.displacement(e.0, e.1).map(|d| d[0].hypot(d[1]))).collect()
    }

    /// Corner angles of every face measured in the flat embedding.
    pub fn corner_angles(&self, tri: &Triangulation) -> Result<Vec<[f64; 3]>> {
        tri.triangles()
            .iter()
            .map(|&[a, b, c]| {
                let ab = self.displacement(a, b)?;
                let ac = self.displacement(a, c)?;
                let bc = self.displacement(b, c)?;
                let angle = |u: [f64; 2], v: [f64; 2]| {
                    let cross = u[0] * v[1] - u[1] * v[0];
                    let dot = u[0] * v[0] + u[1] * v[1];
                    cross.atan2(dot)
                };
                Ok([angle(ab, ac), angle(bc, [-ab[0], -ab[1]]), angle([-ac[0], -ac[1]], [-bc[0], -bc[1]])])
            })
            .collect()
    }
}

/// Regular `n × n` hexagonal triangulation of the unit-area hexagonal torus.
///
/// Vertex `(i, j)` has index `i + n j` and sits at `(i/n) a + (j/n) b`. Every
/// face is equilateral and counterclockwise.
pub fn hex_torus(n: usize) -> Result<(Triangulation, VertexEmbedding)> {
    if n < 3 {
        return Err(Error::InvalidInput(format!("hex_torus needs n >= 3, got {n}")));
    }
    let id = |i: usize, j: usize| (i % n) + n * (j % n);
    let mut triangles = Vec::with_capacity(2 * n * n);
    for j in 0..n {
        for i in 0..n {
            triangles.push([id(i, j), id(i + 1, j), id(i, j + 1)]);
            triangles.push([id(i + 1, j), id(i + 1, j + 1), id(i, j + 1)]);
        }
    }
    let tri = build_triangulation(&triangles, n * n)?;
    let lattice = Lattice::hexagonal_unit();
    let nf = n as f64;
    let positions = (0..n * n).map(|v| lattice.point((v % n) as f64 / nf, (v / n) as f64 / nf)).collect();
    Ok((tri, VertexEmbedding::new(positions, lattice)))
}

/// Seven-vertex torus in which every pair of vertices is adjacent.
pub fn seven_vertex_torus() -> Triangulation {
    let triangles: Vec<[usize; 3]> =
        (0..7).flat_map(|i| [[i, (i + 1) % 7, (i + 3) % 7], [i, (i + 3) % 7, (i + 2) % 7]]).collect();
    build_triangulation(&triangles, 7).expect("seven-vertex torus is valid")
}

/// Length of the flat hexagonal-torus edge for subdivision `n`.
pub fn hex_edge_length(n: usize) -> f64 {
    let s = (2.0 / 3f64.sqrt()).sqrt();
    s / n as f64
}
