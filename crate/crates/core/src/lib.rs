//! Discrete uniformization of circle-packing metrics on triangulated tori.
//!
//! A torus triangulation carries a circle-packing metric: log-radii `ρ` on
//! vertices and conformal weights `Θ` on edges. A discrete conformal factor
//! `u` rescales the radii, and the solvers in [`uniformize`] find the unique
//! (up to area) `u` for which the angle defect vanishes everywhere. The
//! [`experiment`] module builds packings on tori carrying a known smooth
//! uniformization factor and measures how fast the discrete factor
//! approaches it as the mesh is refined.

pub mod error;
pub mod exec;
pub mod experiment;
pub mod graph;
pub mod mesh;
pub mod mesh_io;
pub mod packing;
pub mod uniformize;
pub mod verify;

pub use error::{Error, Result};
pub use exec::Execution;
pub use graph::{EdgeWeight, Flow, Graph};
pub use mesh::{build_triangulation, hex_torus, EdgeKey, Lattice, Triangulation, VertexEmbedding};
pub use packing::{CirclePacking, ConformalFactor, CornerAngles, Curvature, EdgeLengths};
pub use uniformize::{Method, SolveOptions, SolveReport};
