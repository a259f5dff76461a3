//! Curvature Jacobian and solvers for `K(u) = 0` with unit area.
//!
//! The partial derivative of a corner angle with respect to the conformal
//! factor at an adjacent vertex has the closed form
//!
//! ```text
//! ∂θ^i_jk/∂u_j = [r_i² r_j² sin²Θ_ij + r_i² r_j r_k (cosΘ_jk + cosΘ_ij cosΘ_ik)
//!                 + r_i r_j² r_k (cosΘ_ik + cosΘ_ij cosΘ_jk)] / (l_ik l_ij³ sin θ^i_jk)
//! ```
//!
//! Summing it over the two faces of an edge gives the weight `η_ij`, and the
//! curvature Jacobian is `∂K/∂u = −Δ_η`. Both solvers step along
//! `Δ_η^{-1} K`: Newton with backtracking, or a fixed-step RK4 integration of
//! `u' = Δ_{η(u)}^{-1} K(u(0))` under which `K(u(t)) = (1 − t) K(u(0))`.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::graph::{self, project_mean_zero, sup_norm, EdgeWeight};
use crate::mesh::Triangulation;
use crate::packing::{
    apply_conformal_factor, discrete_curvature, edge_lengths_from_packing, inner_angles, mesh_area, CirclePacking,
    ConformalFactor, CornerAngles, Curvature, EdgeLengths,
};

/// Data at corner `i` of triangle `ijk` needed by [`angle_derivative`].
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CornerGeometry {
    /// Radii `r_i, r_j, r_k`.
    pub radii: [f64; 3],
    pub cos_ij: f64,
    pub cos_ik: f64,
    pub cos_jk: f64,
    pub l_ij: f64,
    pub l_ik: f64,
    /// Inner angle at `i`.
    pub theta_i: f64,
}

/// `∂θ^i_jk / ∂u_j`. Returns `None` when `sin θ^i ≤ 1e-14`.
pub fn angle_derivative(c: &CornerGeometry) -> Option<f64> {
    let sin_theta = c.theta_i.sin();
    if sin_theta.is_nan() || sin_theta <= 1e-14 {
        return None;
    }
    let [ri, rj, rk] = c.radii;
    let sin2_ij = (1.0 - c.cos_ij * c.cos_ij).max(0.0);
    let num = ri * ri * rj * rj * sin2_ij
        + ri * ri * rj * rk * (c.cos_jk + c.cos_ij * c.cos_ik)
        + ri * rj * rj * rk * (c.cos_ik + c.cos_ij * c.cos_jk);
    Some(num / (c.l_ik * c.l_ij.powi(3) * sin_theta))
}

/// Edge weights `η(u)` together with the per-face angle partials.
#[derive(Clone, Debug)]
pub struct JacobianWeights {
    pub eta: EdgeWeight,
    /// `d_theta[f][c][d] = ∂θ_c / ∂u_{v_d}` for the corners `c, d` of face
    /// `f`. Rows sum to zero.
    pub d_theta: Vec<[[f64; 3]; 3]>,
}

fn face_partials(
    tri: &Triangulation,
    packing: &CirclePacking,
    lengths: &EdgeLengths,
    angles: &CornerAngles,
    f: usize,
) -> Result<[[f64; 3]; 3]> {
    let verts = tri.triangles()[f];
    let opp = lengths.face(tri, f);
    let cos_opp = tri.face_edges()[f].map(|e| packing.cos_theta()[e]);
    let radii = verts.map(|v| packing.radius(v));
    let mut m = [[0.0; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            if i == j {
                continue;
            }
            let k = 3 - i - j;
            let geom = CornerGeometry {
                radii: [radii[i], radii[j], radii[k]],
                cos_ij: cos_opp[k],
                cos_ik: cos_opp[j],
                cos_jk: cos_opp[i],
                l_ij: opp[k],
                l_ik: opp[j],
                theta_i: angles.0[f][i],
            };
            m[i][j] = angle_derivative(&geom).ok_or(Error::DegenerateFace { face: f })?;
        }
        let (a, b) = ((i + 1) % 3, (i + 2) % 3);
        m[i][i] = -(m[i][a] + m[i][b]);
    }
    Ok(m)
}

pub fn eta_weights(tri: &Triangulation, packing: &CirclePacking) -> Result<JacobianWeights> {
    let lengths = edge_lengths_from_packing(tri, packing)?;
    let angles = inner_angles(tri, &lengths)?;
    weights_from_geometry(tri, packing, &lengths, &angles)
}

fn weights_from_geometry(
    tri: &Triangulation,
    packing: &CirclePacking,
    lengths: &EdgeLengths,
    angles: &CornerAngles,
) -> Result<JacobianWeights> {
    let d_theta =
        (0..tri.num_faces()).map(|f| face_partials(tri, packing, lengths, angles, f)).collect::<Result<Vec<_>>>()?;
    let mut eta = vec![0.0; tri.num_edges()];
    for (f, m) in d_theta.iter().enumerate() {
        let verts = tri.triangles()[f];
        for (k, &e) in tri.face_edges()[f].iter().enumerate() {
            let (i, j) = ((k + 1) % 3, (k + 2) % 3);
            // Corner at the smaller vertex, varied at the larger one.
            let (lo, hi) = if verts[i] < verts[j] { (i, j) } else { (j, i) };
            eta[e] += m[lo][hi];
        }
    }
    Ok(JacobianWeights { eta: EdgeWeight::new(eta)?, d_theta })
}

/// The linear map `δu ↦ −Δ_η δu`, equal to `∂K/∂u` at the packing it was
/// assembled for.
#[derive(Clone, Debug)]
pub struct CurvatureJacobian<'a> {
    tri: &'a Triangulation,
    weights: JacobianWeights,
}

impl CurvatureJacobian<'_> {
    pub fn weights(&self) -> &JacobianWeights {
        &self.weights
    }

    pub fn apply(&self, du: &[f64]) -> Result<Vec<f64>> {
        let mut out = graph::laplacian_apply(self.tri.graph(), &self.weights.eta, du)?;
        out.iter_mut().for_each(|x| *x = -*x);
        Ok(out)
    }

    /// Row-major dense matrix; entry `[i][j] = ∂K_i/∂u_j`.
    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        let n = self.tri.num_vertices();
        let mut m = vec![vec![0.0; n]; n];
        for (e, w) in self.tri.edges().iter().zip(self.weights.eta.values()) {
            m[e.0][e.0] += w;
            m[e.1][e.1] += w;
            m[e.0][e.1] -= w;
            m[e.1][e.0] -= w;
        }
        m
    }
}

pub fn curvature_jacobian<'a>(tri: &'a Triangulation, packing: &CirclePacking) -> Result<CurvatureJacobian<'a>> {
    Ok(CurvatureJacobian { tri, weights: eta_weights(tri, packing)? })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct StepRecord {
    /// Flow time for continuation steps, damping factor for Newton steps.
    pub t: f64,
    /// `‖K‖∞` after a Newton step; decay-law deviation
    /// `‖K(u(t)) − (1 − t) K(u(0))‖∞` after a flow step.
    pub residual: f64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct SolveReport {
    pub iterations: usize,
    pub final_residual: f64,
    pub step_history: Vec<StepRecord>,
    /// Constant `a` such that `u + a` has unit area.
    pub area_shift: f64,
    /// Largest decay-law deviation over the flow checkpoints.
    pub flow_deviation: Option<f64>,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SolveOptions {
    /// Target for `‖K‖∞`.
    pub tol: f64,
    pub max_iter: usize,
    /// Relative residual for each Laplacian solve.
    pub linear_tol: f64,
    pub max_halvings: usize,
}

impl Default for SolveOptions {
    fn default() -> Self {
        Self { tol: 1e-10, max_iter: 100, linear_tol: graph::DEFAULT_SOLVE_TOL, max_halvings: 30 }
    }
}

pub const DEFAULT_FLOW_STEPS: usize = 64;

/// Lengths, angles and curvature of `(T, u * l)`.
struct State {
    packing: CirclePacking,
    lengths: EdgeLengths,
    angles: CornerAngles,
    curvature: Curvature,
}

impl State {
    fn new(tri: &Triangulation, base: &CirclePacking, u: &[f64]) -> Result<Self> {
        let packing = apply_conformal_factor(base, &ConformalFactor(u.to_vec()))?;
        let lengths = edge_lengths_from_packing(tri, &packing)?;
        let angles = inner_angles(tri, &lengths)?;
        let curvature = discrete_curvature(tri, &angles);
        Ok(Self { packing, lengths, angles, curvature })
    }

    fn residual(&self) -> f64 {
        self.curvature.sup_norm()
    }

    fn weights(&self, tri: &Triangulation) -> Result<EdgeWeight> {
        Ok(weights_from_geometry(tri, &self.packing, &self.lengths, &self.angles)?.eta)
    }
}

fn mean_zero(mut v: Vec<f64>) -> Vec<f64> {
    project_mean_zero(&mut v);
    v
}

/// Newton iteration for `K(u) = 0` starting from `u = 0`.
pub fn newton_uniformize(
    tri: &Triangulation,
    packing: &CirclePacking,
    opts: &SolveOptions,
) -> Result<(ConformalFactor, SolveReport)> {
    newton_uniformize_from(tri, packing, &ConformalFactor::zeros(tri.num_vertices()), opts)
}

/// Newton iteration for `K(u) = 0` from an arbitrary start.
///
/// Each step solves `Δ_η δ = K(u)` and halves the step until the iterate is
/// admissible and `‖K‖∞` decreases. The returned factor has zero mean.
pub fn newton_uniformize_from(
    tri: &Triangulation,
    packing: &CirclePacking,
    initial: &ConformalFactor,
    opts: &SolveOptions,
) -> Result<(ConformalFactor, SolveReport)> {
    if initial.0.len() != tri.num_vertices() {
        return Err(Error::DimensionMismatch { expected: tri.num_vertices(), got: initial.0.len() });
    }
    if opts.tol.is_nan() || opts.tol <= 0.0 {
        return Err(Error::InvalidInput(format!("tolerance must be positive, got {}", opts.tol)));
    }
    let mut u = mean_zero(initial.0.clone());
    let mut state = State::new(tri, packing, &u)?;
    let mut residual = state.residual();
    let mut report = SolveReport::default();

    while residual > opts.tol {
        if report.iterations >= opts.max_iter {
            return Err(Error::NoConvergence { iterations: report.iterations, residual });
        }
        report.iterations += 1;
        let eta = state.weights(tri)?;
        let rhs = mean_zero(state.curvature.0.clone());
        let step = graph::solve_laplacian(tri.graph(), &eta, &rhs, opts.linear_tol)?;

        let mut damping = 1.0;
        let mut accepted = None;
        for _ in 0..=opts.max_halvings {
            let trial: Vec<f64> = u.iter().zip(&step).map(|(a, d)| a + damping * d).collect();
            if let Ok(next) = State::new(tri, packing, &trial) {
                let r = next.residual();
                if r < residual || r <= opts.tol {
                    accepted = Some((trial, next, r));
                    break;
                }
            }
            damping *= 0.5;
        }
        let Some((trial, next, r)) = accepted else {
            return Err(Error::LostAdmissibility { iteration: report.iterations });
        };
        u = mean_zero(trial);
        state = next;
        residual = r;
        report.step_history.push(StepRecord { t: damping, residual });
    }

    report.final_residual = residual;
    report.area_shift = area_shift(&state.lengths, tri)?;
    Ok((ConformalFactor(u), report))
}

fn area_shift(lengths: &EdgeLengths, tri: &Triangulation) -> Result<f64> {
    Ok(-0.5 * mesh_area(tri, lengths)?.ln())
}

/// RK4 integration of `u' = Δ_{η(u)}^{-1} K(u(0))` over `t ∈ [0, 1]`
/// followed by a Newton polish to `opts.tol`.
pub fn continuation_flow(
    tri: &Triangulation,
    packing: &CirclePacking,
    num_steps: usize,
    opts: &SolveOptions,
) -> Result<(ConformalFactor, SolveReport)> {
    if num_steps == 0 {
        return Err(Error::InvalidInput("continuation needs at least one step".into()));
    }
    let n = tri.num_vertices();
    let start = State::new(tri, packing, &vec![0.0; n])?;
    let k0 = mean_zero(start.curvature.0.clone());
    let mut u = vec![0.0; n];
    let mut history = Vec::with_capacity(num_steps);
    let mut max_dev = 0.0_f64;

    if sup_norm(&k0) > 0.0 {
        let rhs = |v: &[f64]| -> Result<Vec<f64>> {
            let state = State::new(tri, packing, v)?;
            graph::solve_laplacian(tri.graph(), &state.weights(tri)?, &k0, opts.linear_tol)
        };
        let h = 1.0 / num_steps as f64;
        let axpy = |v: &[f64], a: f64, d: &[f64]| -> Vec<f64> { v.iter().zip(d).map(|(x, y)| x + a * y).collect() };
        for s in 0..num_steps {
            let k1 = rhs(&u)?;
            let k2 = rhs(&axpy(&u, 0.5 * h, &k1))?;
            let k3 = rhs(&axpy(&u, 0.5 * h, &k2))?;
            let k4 = rhs(&axpy(&u, h, &k3))?;
            for i in 0..n {
                u[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
            }
            project_mean_zero(&mut u);
            let t = (s + 1) as f64 * h;
            let state = State::new(tri, packing, &u)?;
            let dev = state.curvature.0.iter().zip(&k0).fold(0.0_f64, |m, (k, k0)| m.max((k - (1.0 - t) * k0).abs()));
            max_dev = max_dev.max(dev);
            history.push(StepRecord { t, residual: dev });
        }
    }

    let (u, polish) = newton_uniformize_from(tri, packing, &ConformalFactor(u), opts)?;
    history.extend(polish.step_history);
    Ok((
        u,
        SolveReport {
            iterations: history.len(),
            final_residual: polish.final_residual,
            step_history: history,
            area_shift: polish.area_shift,
            flow_deviation: Some(max_dev),
        },
    ))
}

/// Shifts `u` by `a = −½ ln Area((T, u * l)_E)` so the mesh has unit area.
pub fn normalize_area(
    tri: &Triangulation,
    packing: &CirclePacking,
    u: &ConformalFactor,
) -> Result<(ConformalFactor, f64)> {
    let lengths = edge_lengths_from_packing(tri, &apply_conformal_factor(packing, u)?)?;
    let a = area_shift(&lengths, tri)?;
    Ok((u.shifted(a), a))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Newton,
    Flow,
}

impl std::str::FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "newton" => Ok(Self::Newton),
            "flow" => Ok(Self::Flow),
            other => Err(Error::InvalidInput(format!("unknown method {other:?}"))),
        }
    }
}

/// Flat, unit-area uniformization of a packing.
#[derive(Clone, Debug)]
pub struct Uniformization {
    /// Unit-area factor.
    pub factor: ConformalFactor,
    pub curvature: Curvature,
    pub report: SolveReport,
}

pub fn uniformize(
    tri: &Triangulation,
    packing: &CirclePacking,
    method: Method,
    opts: &SolveOptions,
) -> Result<Uniformization> {
    let (u, report) = match method {
        Method::Newton => newton_uniformize(tri, packing, opts)?,
        Method::Flow => continuation_flow(tri, packing, DEFAULT_FLOW_STEPS, opts)?,
    };
    let factor = u.shifted(report.area_shift);
    let curvature = State::new(tri, packing, factor.values())?.curvature;
    Ok(Uniformization { factor, curvature, report })
}
