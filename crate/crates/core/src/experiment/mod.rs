//! Ground-truth convergence experiments.
//!
//! A [`SmoothTorusModel`] fixes a smooth factor `ū` on the unit flat torus and
//! the background metric `g = e^{−2ū}·flat`, whose uniformization factor is
//! `ū` itself. Hexagonal meshes get midpoint-rule `g`-lengths, a uniform
//! packing is fitted to them, and the discrete unit-area factor is compared
//! with `ū` at the vertices.
//!
//! Constant radii squeeze every edge length into `[√2 r, 2r]`. At a given
//! `eps` the lengths must stay within a ratio of `sqrt((1 + eps) / 2)`, which
//! caps the field's oscillation at `ln sqrt(2 / (1 + eps))` (about 0.30 for
//! `eps = 0.1`). Stronger fields are rejected as not uniformly packable.

mod geodesic;
mod model;
mod study;

pub use geodesic::{geodesic_length_refined, midpoint_edge_length, GEODESIC_GRADIENT_TOL};
pub use model::{FieldSample, FieldShape, SmoothTorusModel};
pub use study::{
    build_experiment_mesh, convergence_study, fit_order, quadrature_area, reference_factor, study_row, ConvergenceRow,
    ConvergenceStudy, ExperimentMesh, OrderFit, ReferenceFactor, RowFailure, QUADRATURE_CELLS,
};
