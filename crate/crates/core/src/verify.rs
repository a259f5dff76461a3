//! Randomized property sweeps and finite-difference oracles.
//!
//! Every sweep draws sample `i` from a ChaCha stream keyed by `(seed, i)`,
//! so results do not depend on the [`Execution`] mode. Each returns a
//! [`SweepSummary`] whose `worst` field is the largest observed ratio of
//! the checked quantity to its bound; a sweep passes when `violations == 0`.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::graph::{divergence, isoperimetric_constant, solve_laplacian, EdgeWeight, Flow, Graph, DEFAULT_SOLVE_TOL};
use crate::mesh::{hex_torus, seven_vertex_torus, EdgeKey, Triangulation};
use crate::packing::apply_conformal_factor;
use crate::packing::{
    packing_curvature, packing_length, triangle_angles, triangle_area, CirclePacking, ConformalFactor, CornerAngles,
};
use crate::uniformize::{angle_derivative, curvature_jacobian, CornerGeometry};

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct SweepSummary {
    pub samples: usize,
    pub violations: usize,
    /// Largest observed `quantity / bound`.
    pub worst: f64,
}

impl SweepSummary {
    pub fn passed(&self) -> bool {
        self.violations == 0
    }

    fn collect(ratios: impl IntoIterator<Item = f64>) -> Self {
        let mut summary = Self { samples: 0, violations: 0, worst: 0.0 };
        for r in ratios {
            summary.samples += 1;
            if r.is_nan() || r > 1.0 {
                summary.violations += 1;
            }
            summary.worst = if r.is_nan() { f64::NAN } else { summary.worst.max(r) };
        }
        summary
    }
}

/// Deterministic generator for sample `index` of a sweep.
pub fn sample_rng(seed: u64, index: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index as u64);
    rng
}

/// Side lengths `(a, b, c)` of a triangle with every angle at least `eps`
/// (which must not exceed `π/3`), scaled by a random factor in `[0.1, 10]`.
pub fn random_regular_triangle(rng: &mut impl Rng, eps: f64) -> ([f64; 3], [f64; 3]) {
    let first = rng.random_range(eps..=PI - 2.0 * eps);
    let second = rng.random_range(eps..=PI - first - eps);
    let angles = [first, second, PI - first - second];
    let scale = rng.random_range(0.1..10.0);
    (angles.map(|a| scale * a.sin()), angles)
}

/// Length-area band `(ε/8)a² ≤ area ≤ a²/ε` for every side `a` of random
/// triangles with all angles at least `ε`.
pub fn length_area_sweep(samples: usize, seed: u64, exec: Execution) -> SweepSummary {
    let ratios = exec.map_range(samples, |i| {
        let mut rng = sample_rng(seed, i);
        let eps = rng.random_range(0.01..=PI / 3.0);
        let ([a, b, c], _) = random_regular_triangle(&mut rng, eps);
        let Some(area) = triangle_area(a, b, c) else { return f64::NAN };
        [a, b, c].iter().map(|s| (eps / 8.0 * s * s / area).max(area / (s * s / eps))).fold(0.0, f64::max)
    });
    SweepSummary::collect(ratios)
}

/// Comparison-triangle bands: perturbing each side by relative size at most
/// `δ < ε²/48` keeps a triangle, moves each angle by at most `24δ/ε` and the
/// area by at most `576δ/ε²` relative.
pub fn comparison_sweep(samples: usize, seed: u64, exec: Execution) -> SweepSummary {
    let ratios = exec.map_range(samples, |i| {
        let mut rng = sample_rng(seed, i);
        let eps = rng.random_range(0.01..=PI / 3.0);
        let (sides, angles) = random_regular_triangle(&mut rng, eps);
        let delta = rng.random_range(0.0..1.0) * eps * eps / 48.0;
        let perturbed = sides.map(|s| {
            // Bias toward the extremes of the allowed band.
            let t: f64 =
                if rng.random_bool(0.5) { rng.random_range(-1.0..=1.0) } else { [-1.0, 1.0][rng.random_range(0..2)] };
            s * (1.0 + t * delta)
        });
        let (Some(new_angles), Some(area), Some(new_area)) = (
            triangle_angles(perturbed[0], perturbed[1], perturbed[2]),
            triangle_area(sides[0], sides[1], sides[2]),
            triangle_area(perturbed[0], perturbed[1], perturbed[2]),
        ) else {
            return f64::INFINITY;
        };
        if delta == 0.0 {
            return 0.0;
        }
        let angle_ratio =
            angles.iter().zip(&new_angles).map(|(a, b)| (a - b).abs() / (24.0 * delta / eps)).fold(0.0, f64::max);
        let area_ratio = (new_area - area).abs() / (576.0 * delta / (eps * eps) * area);
        angle_ratio.max(area_ratio)
    });
    SweepSummary::collect(ratios)
}

/// Random admissible face: radii `e^ρ` with `ρ ∈ [−1, 1]` and `cos Θ ∈ [0, 1]`.
/// Returns radii, the cosines opposite each corner, and the side lengths
/// opposite each corner.
fn random_face(rng: &mut impl Rng) -> Option<([f64; 3], [f64; 3], [f64; 3])> {
    let rho: [f64; 3] = std::array::from_fn(|_| rng.random_range(-1.0..1.0));
    let cos: [f64; 3] = std::array::from_fn(|_| rng.random_range(0.0..=1.0));
    let opp = [
        packing_length(rho[1], rho[2], cos[0]),
        packing_length(rho[0], rho[2], cos[1]),
        packing_length(rho[0], rho[1], cos[2]),
    ];
    triangle_angles(opp[0], opp[1], opp[2])?;
    Some((rho.map(f64::exp), cos, opp))
}

fn corner(radii: [f64; 3], cos_opp: [f64; 3], opp: [f64; 3], angles: [f64; 3], i: usize, j: usize) -> CornerGeometry {
    let k = 3 - i - j;
    CornerGeometry {
        radii: [radii[i], radii[j], radii[k]],
        cos_ij: cos_opp[k],
        cos_ik: cos_opp[j],
        cos_jk: cos_opp[i],
        l_ij: opp[k],
        l_ik: opp[j],
        theta_i: angles[i],
    }
}

/// Symmetry `∂θ^i/∂u_j = ∂θ^j/∂u_i` on random faces, relative to `tol`.
pub fn corner_symmetry_sweep(samples: usize, seed: u64, tol: f64, exec: Execution) -> SweepSummary {
    let ratios = exec.map_range(samples, |s| {
        let mut rng = sample_rng(seed, s);
        let (radii, cos, opp) = loop {
            if let Some(face) = random_face(&mut rng) {
                break face;
            }
        };
        let Some(angles) = triangle_angles(opp[0], opp[1], opp[2]) else { return f64::NAN };
        let mut worst = 0.0_f64;
        for (i, j) in [(0, 1), (0, 2), (1, 2)] {
            let a = angle_derivative(&corner(radii, cos, opp, angles, i, j));
            let b = angle_derivative(&corner(radii, cos, opp, angles, j, i));
            let (Some(a), Some(b)) = (a, b) else { return f64::NAN };
            worst = worst.max((a - b).abs() / (a.abs().max(b.abs()) * tol));
        }
        worst
    });
    SweepSummary::collect(ratios)
}

/// Random packing on `tri` with `ρ ∈ [−noise, noise]` and `cos Θ ∈ [cos_min, 1]`.
pub fn random_packing(tri: &Triangulation, rng: &mut impl Rng, noise: f64, cos_min: f64) -> Result<CirclePacking> {
    let rho =
        (0..tri.num_vertices()).map(|_| if noise > 0.0 { rng.random_range(-noise..=noise) } else { 0.0 }).collect();
    let cos = (0..tri.num_edges()).map(|_| rng.random_range(cos_min..=1.0)).collect();
    CirclePacking::new(rho, cos)
}

/// Triangulation for sweep sample `index`: the seven-vertex torus or
/// `hex_torus(n)` with `n` drawn from `sizes`.
fn sweep_mesh(rng: &mut impl Rng, sizes: std::ops::RangeInclusive<usize>, allow_seven: bool) -> Triangulation {
    if allow_seven && rng.random_bool(0.1) {
        return seven_vertex_torus();
    }
    hex_torus(rng.random_range(sizes)).map(|(t, _)| t).expect("sizes start at 3")
}

/// Gauss–Bonnet `|Σ K_i| ≤ tol·V` on random packings of `hex_torus(3..=8)`.
pub fn gauss_bonnet_sweep(samples: usize, seed: u64, tol: f64, exec: Execution) -> SweepSummary {
    let ratios = exec.map_range(samples, |i| {
        let mut rng = sample_rng(seed, i);
        let tri = sweep_mesh(&mut rng, 3..=8, false);
        let noise = rng.random_range(0.0..1.5);
        match random_packing(&tri, &mut rng, noise, 0.0).and_then(|p| packing_curvature(&tri, &p)) {
            Ok(k) => k.total().abs() / (tol * tri.num_vertices() as f64),
            Err(_) => f64::NAN,
        }
    });
    SweepSummary::collect(ratios)
}

/// Largest deviation of the assembled `∂K/∂u` from central differences of
/// `K` with step `h`. Entries are compared relative to their own magnitude;
/// structurally zero entries relative to the largest entry. Columns are
/// differenced in parallel under [`Execution::Parallel`].
pub fn jacobian_check(tri: &Triangulation, packing: &CirclePacking, h: f64, exec: Execution) -> Result<f64> {
    let n = tri.num_vertices();
    let jac = curvature_jacobian(tri, packing)?.to_dense();
    let scale = jac.iter().flatten().fold(0.0_f64, |m, x| m.max(x.abs()));
    let columns = exec.map_range(n, |j| -> Result<Vec<f64>> {
        let shifted = |s: f64| {
            let mut u = vec![0.0; n];
            u[j] = s;
            apply_conformal_factor(packing, &ConformalFactor(u)).and_then(|p| packing_curvature(tri, &p))
        };
        let (up, dn) = (shifted(h)?, shifted(-h)?);
        Ok(up.values().iter().zip(dn.values()).map(|(a, b)| (a - b) / (2.0 * h)).collect())
    });
    let mut worst = 0.0_f64;
    for (j, column) in columns.into_iter().enumerate() {
        for (i, fd) in column?.into_iter().enumerate() {
            let exact = jac[i][j];
            let denom = if exact != 0.0 { exact.abs() } else { scale };
            worst = worst.max((exact - fd).abs() / denom);
        }
    }
    Ok(worst)
}

/// [`jacobian_check`] on random packings with at most 100 vertices.
pub fn jacobian_sweep(samples: usize, seed: u64, h: f64, tol: f64, exec: Execution) -> SweepSummary {
    let ratios = (0..samples).map(|i| {
        let mut rng = sample_rng(seed, i);
        let tri = sweep_mesh(&mut rng, 3..=10, true);
        random_packing(&tri, &mut rng, 0.5, 0.2)
            .and_then(|p| jacobian_check(&tri, &p, h, exec))
            .map_or(f64::NAN, |e| e / tol)
    });
    SweepSummary::collect(ratios.collect::<Vec<_>>())
}

/// Flow `x_ij = (α^i_jk − α^j_ik)/3 + (α^i_jk′ − α^j_ik′)/3` over the two
/// faces `ijk`, `ijk′` of each edge. When every face's entries of `α` sum to
/// zero, `div(x)_i` equals the sum of `α` at vertex `i`.
pub fn angle_difference_flow(tri: &Triangulation, alpha: &CornerAngles) -> Result<Flow> {
    if alpha.0.len() != tri.num_faces() {
        return Err(Error::DimensionMismatch { expected: tri.num_faces(), got: alpha.0.len() });
    }
    let mut x = vec![0.0; tri.num_edges()];
    for (f, verts) in tri.triangles().iter().enumerate() {
        for (c, &e) in tri.face_edges()[f].iter().enumerate() {
            // Edge opposite corner c joins the other two corners.
            let (a, b) = ((c + 1) % 3, (c + 2) % 3);
            let key: EdgeKey = tri.edges()[e];
            let (lo, hi) = if verts[a] == key.0 { (a, b) } else { (b, a) };
            x[e] += (alpha.0[f][lo] - alpha.0[f][hi]) / 3.0;
        }
    }
    Ok(Flow::new(x))
}

/// Random connected graph on `vertices` vertices: a random spanning tree
/// plus each remaining pair with probability `density`.
pub fn random_connected_graph(rng: &mut impl Rng, vertices: usize, density: f64) -> Result<Graph> {
    let mut edges = Vec::new();
    for v in 1..vertices {
        edges.push((rng.random_range(0..v), v));
    }
    for i in 0..vertices {
        for j in i + 1..vertices {
            if rng.random_bool(density) {
                edges.push((i, j));
            }
        }
    }
    Graph::new(vertices, edges)
}

/// Discrete elliptic estimate on random small graphs:
/// `‖Δ_η⁻¹ div x‖∞ ≤ 4 C₂ √(C₁ + 1) / C₃ · |l| · |V|_l^{1/2}` where `C₁` is
/// the brute-force isoperimetric constant, `|x_ij| ≤ C₂ l_ij²` and `η ≥ C₃`.
pub fn elliptic_sweep(samples: usize, seed: u64, exec: Execution) -> SweepSummary {
    let ratios = exec.map_range(samples, |i| -> f64 {
        let mut rng = sample_rng(seed, i);
        let vertices = rng.random_range(2..=12);
        let density = rng.random_range(0.0..0.6);
        let Ok(graph) = random_connected_graph(&mut rng, vertices, density) else { return f64::NAN };
        let m = graph.num_edges();
        let lengths: Vec<f64> = (0..m).map(|_| rng.random_range(0.1..2.0)).collect();
        let c2 = rng.random_range(0.1..5.0);
        let c3 = rng.random_range(0.1..5.0);
        let eta: Vec<f64> = (0..m).map(|_| c3 * rng.random_range(1.0..4.0)).collect();
        let x: Vec<f64> = lengths.iter().map(|l| c2 * l * l * rng.random_range(-1.0..=1.0)).collect();
        let (Ok(c1), Ok(eta)) = (isoperimetric_constant(&graph, &lengths), EdgeWeight::new(eta)) else {
            return f64::NAN;
        };
        let Ok(y) = divergence(&graph, &Flow::new(x)) else { return f64::NAN };
        let Ok(sol) = solve_laplacian(&graph, &eta, &y, DEFAULT_SOLVE_TOL) else { return f64::NAN };
        let l_max = lengths.iter().copied().fold(0.0, f64::max);
        let l_area: f64 = lengths.iter().map(|l| l * l).sum();
        let bound = 4.0 * c2 * (c1 + 1.0).sqrt() / c3 * l_max * l_area.sqrt();
        sol.iter().fold(0.0_f64, |m, v| m.max(v.abs())) / bound
    });
    SweepSummary::collect(ratios)
}
