use std::fmt::Write as _;
use std::time::Instant;

use serde::Serialize;
use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::experiment::geodesic::{midpoint_edge_length, GL_NODES, GL_WEIGHTS};
use crate::experiment::model::SmoothTorusModel;
use crate::mesh::{hex_torus, Lattice, Triangulation, VertexEmbedding};
use crate::packing::{check_regularity, fit_uniform_packing, CirclePacking, EdgeLengths, RegularityReport};
use crate::uniformize::{uniformize, Method, SolveOptions};

/// Cells per lattice direction used by [`reference_factor`].
pub const QUADRATURE_CELLS: usize = 32;

/// `∫ e^{2 log_density(p)} dA` over the fundamental domain, by composite
/// Gauss-Legendre on a `cells × cells` grid in lattice coordinates.
pub fn quadrature_area(lattice: &Lattice, cells: usize, log_density: impl Fn([f64; 2]) -> f64) -> f64 {
    let h = 1.0 / cells as f64;
    let mut total = 0.0;
    for i in 0..cells {
        for j in 0..cells {
            let mut cell = 0.0;
            for (tx, wx) in GL_NODES.iter().zip(&GL_WEIGHTS) {
                for (ty, wy) in GL_NODES.iter().zip(&GL_WEIGHTS) {
                    let p = lattice.point((i as f64 + tx) * h, (j as f64 + ty) * h);
                    cell += wx * wy * (2.0 * log_density(p)).exp();
                }
            }
            total += cell * h * h;
        }
    }
    total * lattice.area()
}

/// Unit-area normalized smooth factor `ū₀ = ū − ½ ln Area(e^{2ū} g)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ReferenceFactor {
    pub model: SmoothTorusModel,
    /// Area of `e^{2ū} g` before normalization.
    pub area: f64,
    pub shift: f64,
}

impl ReferenceFactor {
    pub fn value(&self, p: [f64; 2]) -> f64 {
        self.model.ubar(p) + self.shift
    }

    /// Area of `e^{2ū₀} g`, recomputed by quadrature.
    pub fn normalized_area(&self) -> f64 {
        let m = self.model;
        quadrature_area(&m.lattice, QUADRATURE_CELLS, |p| self.value(p) + m.background_log_density(p))
    }
}

pub fn reference_factor(model: &SmoothTorusModel) -> ReferenceFactor {
    let area = quadrature_area(&model.lattice, QUADRATURE_CELLS, |p| model.ubar(p) + model.background_log_density(p));
    ReferenceFactor { model: *model, area, shift: -0.5 * area.ln() }
}

/// Uniform circle packing approximating `(M, g)` on the hexagonal torus.
#[derive(Clone, Debug)]
pub struct ExperimentMesh {
    pub triangulation: Triangulation,
    pub embedding: VertexEmbedding,
    pub lengths: EdgeLengths,
    pub packing: CirclePacking,
    pub regularity: RegularityReport,
}

pub fn build_experiment_mesh(model: &SmoothTorusModel, n: usize, eps: f64) -> Result<ExperimentMesh> {
    if n < 8 {
        return Err(Error::InvalidInput(format!("experiment meshes need n >= 8, got {n}")));
    }
    if !(eps > 0.0 && eps <= 0.5) {
        return Err(Error::InvalidInput(format!("eps must lie in (0, 0.5], got {eps}")));
    }
    let (triangulation, embedding) = hex_torus(n)?;
    let raw = triangulation
        .edges()
        .iter()
        .map(|e| midpoint_edge_length(model, embedding.positions[e.0], embedding.positions[e.1]))
        .collect::<Result<Vec<_>>>()?;
    let lengths = EdgeLengths::new(&triangulation, raw)?;
    let packing = fit_uniform_packing(&triangulation, &lengths, eps)?;
    let regularity = check_regularity(&triangulation, &lengths, &packing, eps)?;
    if !regularity.is_regular() {
        return Err(Error::RegularityFailure {
            eps,
            min_cos: regularity.min_cos_theta,
            min_angle: regularity.min_angle,
        });
    }
    Ok(ExperimentMesh { triangulation, embedding, lengths, packing, regularity })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ConvergenceRow {
    pub n: usize,
    /// Mesh size `|l|`.
    pub l_max: f64,
    pub err_max: f64,
    pub err_l2: f64,
    pub iterations: usize,
    pub runtime_ms: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RowFailure {
    pub n: usize,
    pub message: String,
}

/// Least-squares slope of `log err_max` against `log l_max`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct OrderFit {
    pub order: f64,
    /// Half-width of the 95% confidence band; NaN with fewer than 3 points.
    pub half_width: f64,
    pub points: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ConvergenceStudy {
    pub rows: Vec<std::result::Result<ConvergenceRow, RowFailure>>,
    pub fit: Option<OrderFit>,
}

/// Error of the discrete unit-area factor against `ū₀` on one mesh.
pub fn study_row(
    model: &SmoothTorusModel,
    reference: &ReferenceFactor,
    n: usize,
    eps: f64,
    method: Method,
    opts: &SolveOptions,
) -> Result<ConvergenceRow> {
    let start = Instant::now();
    let mesh = build_experiment_mesh(model, n, eps)?;
    let solved = uniformize(&mesh.triangulation, &mesh.packing, method, opts)?;
    let errors: Vec<f64> =
        solved.factor.values().iter().zip(&mesh.embedding.positions).map(|(u, p)| u - reference.value(*p)).collect();
    let err_max = errors.iter().fold(0.0_f64, |m, e| m.max(e.abs()));
    let err_l2 = errors.iter().map(|e| e * e).sum::<f64>().sqrt();
    Ok(ConvergenceRow {
        n,
        l_max: mesh.lengths.max(),
        err_max,
        err_l2,
        iterations: solved.report.iterations,
        runtime_ms: start.elapsed().as_secs_f64() * 1e3,
    })
}

pub fn convergence_study(
    model: &SmoothTorusModel,
    sizes: &[usize],
    eps: f64,
    method: Method,
    opts: &SolveOptions,
    exec: Execution,
) -> Result<ConvergenceStudy> {
    if sizes.is_empty() || sizes.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::InvalidInput("sizes must be nonempty and strictly increasing".into()));
    }
    let reference = reference_factor(model);
    let rows = exec.map(sizes, |&n| {
        study_row(model, &reference, n, eps, method, opts).map_err(|e| RowFailure { n, message: e.to_string() })
    });
    let points: Vec<(f64, f64)> = rows
        .iter()
        .filter_map(|r| r.as_ref().ok())
        .filter(|r| r.err_max > 0.0)
        .map(|r| (r.l_max.ln(), r.err_max.ln()))
        .collect();
    Ok(ConvergenceStudy { rows, fit: fit_order(&points) })
}

/// Least-squares line through `(x, y)` points, reporting slope and the 95%
/// Student-t half-width of the slope.
pub fn fit_order(points: &[(f64, f64)]) -> Option<OrderFit> {
    let k = points.len();
    if k < 2 {
        return None;
    }
    let kf = k as f64;
    let mx = points.iter().map(|p| p.0).sum::<f64>() / kf;
    let my = points.iter().map(|p| p.1).sum::<f64>() / kf;
    let sxx: f64 = points.iter().map(|p| (p.0 - mx).powi(2)).sum();
    if sxx == 0.0 {
        return None;
    }
    let sxy: f64 = points.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let order = sxy / sxx;
    let half_width = if k >= 3 {
        let intercept = my - order * mx;
        let ssr: f64 = points.iter().map(|p| (p.1 - intercept - order * p.0).powi(2)).sum();
        let se = (ssr / (kf - 2.0) / sxx).sqrt();
        let t = StudentsT::new(0.0, 1.0, kf - 2.0).ok()?.inverse_cdf(0.975);
        t * se
    } else {
        f64::NAN
    };
    Some(OrderFit { order, half_width, points: k })
}

impl ConvergenceStudy {
    pub fn successful_rows(&self) -> impl Iterator<Item = &ConvergenceRow> {
        self.rows.iter().filter_map(|r| r.as_ref().ok())
    }

    /// CSV with columns `n,l_max,err_max,err_l2,iterations,runtime_ms`,
    /// failed rows as `#` comments, and a final `# fitted_order=` line.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("n,l_max,err_max,err_l2,iterations,runtime_ms\n");
        for row in &self.rows {
            match row {
                Ok(r) => {
                    let _ = writeln!(
                        out,
                        "{},{:.12e},{:.12e},{:.12e},{},{:.3}",
                        r.n, r.l_max, r.err_max, r.err_l2, r.iterations, r.runtime_ms
                    );
                }
                Err(f) => {
                    let _ = writeln!(out, "# n={} failed: {}", f.n, f.message);
                }
            }
        }
        match self.fit {
            Some(fit) => {
                let _ = writeln!(out, "# fitted_order={:.6}", fit.order);
            }
            None => out.push_str("# fitted_order=nan\n"),
        }
        out
    }
}
