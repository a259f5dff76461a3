//! JSON mesh files.
//!
//! ```json
//! { "version": 1, "num_vertices": 7, "triangles": [[0, 1, 3], ...],
//!   "rho": [...], "cos_theta": [{"edge": [0, 1], "value": 1.0}, ...],
//!   "lengths": [{"edge": [0, 1], "value": 0.5}, ...],
//!   "positions": [[x, y], ...], "lattice": [[ax, ay], [bx, by]] }
//! ```
//!
//! Everything after `triangles` is optional. Edge keys must be written with
//! the smaller vertex first, and per-edge lists must cover every edge once.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mesh::{build_triangulation, Lattice, Triangulation, VertexEmbedding};
use crate::packing::{CirclePacking, EdgeLengths};

pub const FORMAT_VERSION: u32 = 1;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EdgeValue {
    pub edge: [usize; 2],
    pub value: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MeshFile {
    pub version: u32,
    pub num_vertices: usize,
    pub triangles: Vec<[usize; 3]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rho: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cos_theta: Option<Vec<EdgeValue>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lengths: Option<Vec<EdgeValue>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub positions: Option<Vec<[f64; 2]>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lattice: Option<[[f64; 2]; 2]>,
}

/// Contents of a mesh file after validation.
#[derive(Clone, Debug)]
pub struct LoadedMesh {
    pub triangulation: Triangulation,
    pub packing: Option<CirclePacking>,
    pub lengths: Option<EdgeLengths>,
    pub embedding: Option<VertexEmbedding>,
}

impl MeshFile {
    pub fn from_json(text: &str) -> Result<Self> {
        let file: Self = serde_json::from_str(text)?;
        if file.version != FORMAT_VERSION {
            return Err(Error::InvalidInput(format!("unsupported mesh version {}", file.version)));
        }
        Ok(file)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_json()?)?;
        Ok(())
    }

    pub fn from_parts(
        tri: &Triangulation,
        packing: Option<&CirclePacking>,
        lengths: Option<&EdgeLengths>,
        embedding: Option<&VertexEmbedding>,
    ) -> Self {
        let per_edge = |values: &[f64]| -> Vec<EdgeValue> {
            tri.edges().iter().zip(values).map(|(e, v)| EdgeValue { edge: [e.0, e.1], value: *v }).collect()
        };
        Self {
            version: FORMAT_VERSION,
            num_vertices: tri.num_vertices(),
            triangles: tri.triangles().to_vec(),
            rho: packing.map(|p| p.rho().to_vec()),
            cos_theta: packing.map(|p| per_edge(p.cos_theta())),
            lengths: lengths.map(|l| per_edge(l.values())),
            positions: embedding.map(|e| e.positions.clone()),
            lattice: embedding.map(|e| [e.lattice.a, e.lattice.b]),
        }
    }

    pub fn load(&self) -> Result<LoadedMesh> {
        let triangulation = build_triangulation(&self.triangles, self.num_vertices)?;
        let packing = match (&self.rho, &self.cos_theta) {
            (Some(rho), Some(cos)) => {
                Some(CirclePacking::new(rho.clone(), edge_values(&triangulation, cos, "cos_theta")?)?)
            }
            (None, None) => None,
            _ => return Err(Error::InvalidInput("rho and cos_theta must be given together".into())),
        };
        let lengths = match &self.lengths {
            Some(l) => Some(EdgeLengths::new(&triangulation, edge_values(&triangulation, l, "lengths")?)?),
            None => None,
        };
        let embedding = match (&self.positions, &self.lattice) {
            (Some(pos), Some([a, b])) => {
                if pos.len() != self.num_vertices {
                    return Err(Error::DimensionMismatch { expected: self.num_vertices, got: pos.len() });
                }
                Some(VertexEmbedding { positions: pos.clone(), lattice: Lattice::new(*a, *b)? })
            }
            (None, None) => None,
            _ => return Err(Error::InvalidInput("positions and lattice must be given together".into())),
        };
        Ok(LoadedMesh { triangulation, packing, lengths, embedding })
    }
}

/// Orders a per-edge list by the triangulation's edge indexing.
fn edge_values(tri: &Triangulation, entries: &[EdgeValue], field: &str) -> Result<Vec<f64>> {
    let mut values = vec![f64::NAN; tri.num_edges()];
    let mut seen = vec![false; tri.num_edges()];
    for entry in entries {
        let [i, j] = entry.edge;
        if i >= j {
            return Err(Error::InvalidInput(format!("{field}: edge [{i}, {j}] must have i < j")));
        }
        let index =
            tri.edge_index(i, j).ok_or_else(|| Error::InvalidInput(format!("{field}: [{i}, {j}] is not an edge")))?;
        if std::mem::replace(&mut seen[index], true) {
            return Err(Error::InvalidInput(format!("{field}: edge [{i}, {j}] listed twice")));
        }
        values[index] = entry.value;
    }
    if entries.len() != tri.num_edges() {
        return Err(Error::DimensionMismatch { expected: tri.num_edges(), got: entries.len() });
    }
    Ok(values)
}
