//! Circle-packing metrics, the discrete conformal action, Euclidean angles,
//! angle-defect curvature and area.
//!
//! An edge `ij` of a packing with log-radii `ρ` and conformal weight `Θ` has
//! length `l² = e^{2ρ_i} + e^{2ρ_j} + 2 e^{ρ_i+ρ_j} cos Θ_ij`. A conformal
//! factor `u` acts by `ρ ↦ ρ + u` and leaves `Θ` fixed.

use std::f64::consts::PI;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::mesh::Triangulation;

/// Slack for the strict triangle inequality, relative to the perimeter.
pub const TRIANGLE_SLACK: f64 = 1e-12;
/// Law-of-cosines arguments within this distance of `±1` are clamped.
pub const COSINE_CLAMP: f64 = 1e-12;

/// Per-vertex log-radii and per-edge `cos Θ`, both indexed like the
/// triangulation they belong to.
#[derive(Clone, Debug, PartialEq)]
pub struct CirclePacking {
    rho: Vec<f64>,
    cos_theta: Vec<f64>,
}

impl CirclePacking {
    pub fn new(rho: Vec<f64>, cos_theta: Vec<f64>) -> Result<Self> {
        if let Some(r) = rho.iter().find(|r| !r.is_finite()) {
            return Err(Error::InvalidInput(format!("log-radius {r} is not finite")));
        }
        if let Some(c) = cos_theta.iter().find(|c| !(0.0..=1.0).contains(*c)) {
            return Err(Error::InvalidInput(format!("cos(theta) = {c} is outside [0, 1]")));
        }
        Ok(Self { rho, cos_theta })
    }

    /// Packing on `tri` with equal radii `e^{rho}` and a constant weight.
    pub fn uniform(tri: &Triangulation, rho: f64, cos_theta: f64) -> Result<Self> {
        Self::new(vec![rho; tri.num_vertices()], vec![cos_theta; tri.num_edges()])
    }

    pub fn rho(&self) -> &[f64] {
        &self.rho
    }

    pub fn cos_theta(&self) -> &[f64] {
        &self.cos_theta
    }

    pub fn radius(&self, v: usize) -> f64 {
        self.rho[v].exp()
    }

    fn check_shape(&self, tri: &Triangulation) -> Result<()> {
        if self.rho.len() != tri.num_vertices() {
            return Err(Error::DimensionMismatch { expected: tri.num_vertices(), got: self.rho.len() });
        }
        if self.cos_theta.len() != tri.num_edges() {
            return Err(Error::DimensionMismatch { expected: tri.num_edges(), got: self.cos_theta.len() });
        }
        Ok(())
    }
}

/// Positive edge lengths indexed like [`Triangulation::edges`].
#[derive(Clone, Debug, PartialEq)]
pub struct EdgeLengths(Vec<f64>);

impl EdgeLengths {
    /// Wraps raw lengths after checking positivity and every face's strict
    /// triangle inequality.
    pub fn new(tri: &Triangulation, lengths: Vec<f64>) -> Result<Self> {
        if lengths.len() != tri.num_edges() {
            return Err(Error::DimensionMismatch { expected: tri.num_edges(), got: lengths.len() });
        }
        if let Some(l) = lengths.iter().find(|l| !(l.is_finite() && **l > 0.0)) {
            return Err(Error::InvalidInput(format!("edge length {l} is not positive")));
        }
        let out = Self(lengths);
        for f in 0..tri.num_faces() {
            let [a, b, c] = out.face(tri, f);
            if !satisfies_triangle_inequality(a, b, c) {
                return Err(Error::DegenerateFace { face: f });
            }
        }
        Ok(out)
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    /// Mesh size `|l|`.
    pub fn max(&self) -> f64 {
        self.0.iter().copied().fold(0.0, f64::max)
    }

    pub fn min(&self) -> f64 {
        self.0.iter().copied().fold(f64::INFINITY, f64::min)
    }

    /// Lengths opposite the three corners of face `f`.
    pub fn face(&self, tri: &Triangulation, f: usize) -> [f64; 3] {
        tri.face_edges()[f].map(|e| self.0[e])
    }

    pub fn scaled(&self, factor: f64) -> Self {
        Self(self.0.iter().map(|l| l * factor).collect())
    }
}

/// Discrete conformal factor `u`, one entry per vertex.
#[derive(Clone, Debug, PartialEq)]
pub struct ConformalFactor(pub Vec<f64>);

impl ConformalFactor {
    pub fn zeros(n: usize) -> Self {
        Self(vec![0.0; n])
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn shifted(&self, a: f64) -> Self {
        Self(self.0.iter().map(|u| u + a).collect())
    }
}

/// Corner angles per face; entry `[f][c]` is the angle at corner `c`.
#[derive(Clone, Debug, PartialEq)]
pub struct CornerAngles(pub Vec<[f64; 3]>);

/// Angle defect `K_i` per vertex.
#[derive(Clone, Debug, PartialEq)]
pub struct Curvature(pub Vec<f64>);

impl Curvature {
    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn total(&self) -> f64 {
        self.0.iter().sum()
    }

    pub fn sup_norm(&self) -> f64 {
        self.0.iter().fold(0.0_f64, |m, k| m.max(k.abs()))
    }
}

/// `sqrt(e^{2ρ_i} + e^{2ρ_j} + 2 e^{ρ_i+ρ_j} cos Θ)`.
pub fn packing_length(rho_i: f64, rho_j: f64, cos_theta: f64) -> f64 {
    let ri = rho_i.exp();
    let rj = rho_j.exp();
    (ri * ri + rj * rj + 2.0 * ri * rj * cos_theta).sqrt()
}

/// Strict triangle inequality with slack `TRIANGLE_SLACK · perimeter`.
pub fn satisfies_triangle_inequality(a: f64, b: f64, c: f64) -> bool {
    let slack = TRIANGLE_SLACK * (a + b + c);
    a > 0.0 && b > 0.0 && c > 0.0 && b + c - a > slack && a + c - b > slack && a + b - c > slack
}

/// Angles opposite the sides `a`, `b`, `c`, or `None` for a degenerate triangle.
pub fn triangle_angles(a: f64, b: f64, c: f64) -> Option<[f64; 3]> {
    if !satisfies_triangle_inequality(a, b, c) {
        return None;
    }
    let corner = |opp: f64, s: f64, t: f64| {
        let cos = (s * s + t * t - opp * opp) / (2.0 * s * t);
        if cos.abs() > 1.0 + COSINE_CLAMP {
            None
        } else {
            Some(cos.clamp(-1.0, 1.0).acos())
        }
    };
    Some([corner(a, b, c)?, corner(b, a, c)?, corner(c, a, b)?])
}

/// Heron's formula in the cancellation-free ordering.
pub fn triangle_area(a: f64, b: f64, c: f64) -> Option<f64> {
    if !satisfies_triangle_inequality(a, b, c) {
        return None;
    }
    let mut s = [a, b, c];
    s.sort_by(|x, y| y.total_cmp(x));
    let [a, b, c] = s;
    let prod = (a + (b + c)) * (c - (a - b)) * (c + (a - b)) * (a + (b - c));
    Some(0.25 * prod.max(0.0).sqrt())
}

pub fn edge_lengths_from_packing(tri: &Triangulation, packing: &CirclePacking) -> Result<EdgeLengths> {
    packing.check_shape(tri)?;
    let lengths = tri
        .edges()
        .iter()
        .zip(packing.cos_theta())
        .map(|(e, &c)| packing_length(packing.rho[e.0], packing.rho[e.1], c))
        .collect();
    EdgeLengths::new(tri, lengths)
}

/// Uniform packing reproducing `lengths`: `e^{ρ₀} = |l| / 2` and
/// `cos Θ_ij = l_ij² / (2 e^{2ρ₀}) − 1`.
///
/// Constant radii confine every edge to `[√2 r, 2r]`, so this fails with
/// [`Error::NotUniformlyPackable`] as soon as `min l / max l` drops below
/// `sqrt((1 + eps) / 2)`.
pub fn fit_uniform_packing(tri: &Triangulation, lengths: &EdgeLengths, eps: f64) -> Result<CirclePacking> {
    if !(0.0..1.0).contains(&eps) {
        return Err(Error::InvalidInput(format!("eps must lie in [0, 1), got {eps}")));
    }
    if lengths.values().len() != tri.num_edges() {
        return Err(Error::DimensionMismatch { expected: tri.num_edges(), got: lengths.values().len() });
    }
    let radius = 0.5 * lengths.max();
    let two_r2 = 2.0 * radius * radius;
    let cos_theta: Vec<f64> = lengths.values().iter().map(|l| (l * l / two_r2 - 1.0).min(1.0)).collect();
    let min_cos = cos_theta.iter().copied().fold(f64::INFINITY, f64::min);
    if min_cos < eps {
        return Err(Error::NotUniformlyPackable { min_cos, eps });
    }
    CirclePacking::new(vec![radius.ln(); tri.num_vertices()], cos_theta)
}

pub fn apply_conformal_factor(packing: &CirclePacking, u: &ConformalFactor) -> Result<CirclePacking> {
    if u.0.len() != packing.rho.len() {
        return Err(Error::DimensionMismatch { expected: packing.rho.len(), got: u.0.len() });
    }
    Ok(CirclePacking {
        rho: packing.rho.iter().zip(&u.0).map(|(r, x)| r + x).collect(),
        cos_theta: packing.cos_theta.clone(),
    })
}

pub fn inner_angles(tri: &Triangulation, lengths: &EdgeLengths) -> Result<CornerAngles> {
    (0..tri.num_faces())
        .map(|f| {
            let [a, b, c] = lengths.face(tri, f);
            triangle_angles(a, b, c).ok_or(Error::DegenerateFace { face: f })
        })
        .collect::<Result<Vec<_>>>()
        .map(CornerAngles)
}

/// `K_i = 2π − Σ θ^i` over the corners at `i`.
pub fn discrete_curvature(tri: &Triangulation, angles: &CornerAngles) -> Curvature {
    let mut sums = vec![0.0; tri.num_vertices()];
    for (t, corners) in tri.triangles().iter().zip(&angles.0) {
        for c in 0..3 {
            sums[t[c]] += corners[c];
        }
    }
    Curvature(sums.into_iter().map(|s| 2.0 * PI - s).collect())
}

/// Curvature of the metric induced by `packing`.
pub fn packing_curvature(tri: &Triangulation, packing: &CirclePacking) -> Result<Curvature> {
    let lengths = edge_lengths_from_packing(tri, packing)?;
    Ok(discrete_curvature(tri, &inner_angles(tri, &lengths)?))
}

pub fn mesh_area(tri: &Triangulation, lengths: &EdgeLengths) -> Result<f64> {
    (0..tri.num_faces())
        .map(|f| {
            let [a, b, c] = lengths.face(tri, f);
            triangle_area(a, b, c).ok_or(Error::DegenerateFace { face: f })
        })
        .sum()
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RegularityReport {
    pub eps: f64,
    pub min_cos_theta: f64,
    pub min_angle: f64,
    pub cos_theta_ok: bool,
    pub angles_ok: bool,
    /// `⌈2π / eps⌉`, the degree bound every eps-regular mesh obeys.
    pub degree_bound: usize,
    pub max_degree: usize,
    /// Mesh size `|l|`.
    pub size: f64,
}

impl RegularityReport {
    pub fn is_regular(&self) -> bool {
        self.cos_theta_ok && self.angles_ok
    }
}

/// Checks `cos Θ_ij ≥ eps` on every edge and `θ ≥ eps` at every corner.
pub fn check_regularity(
    tri: &Triangulation,
    lengths: &EdgeLengths,
    packing: &CirclePacking,
    eps: f64,
) -> Result<RegularityReport> {
    packing.check_shape(tri)?;
    let angles = inner_angles(tri, lengths)?;
    let min_cos_theta = packing.cos_theta.iter().copied().fold(f64::INFINITY, f64::min);
    let min_angle = angles.0.iter().flatten().copied().fold(f64::INFINITY, f64::min);
    Ok(RegularityReport {
        eps,
        min_cos_theta,
        min_angle,
        cos_theta_ok: min_cos_theta >= eps,
        angles_ok: min_angle >= eps,
        degree_bound: if eps > 0.0 { (2.0 * PI / eps).ceil() as usize } else { usize::MAX },
        max_degree: tri.vertex_degrees().iter().copied().max().unwrap_or(0),
        size: lengths.max(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{hex_edge_length, hex_torus, seven_vertex_torus};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::{FRAC_PI_2, FRAC_PI_3, LN_2};

    #[test]
    fn packing_length_examples() {
        assert!((packing_length(0.0, 0.0, 0.0) - 2f64.sqrt()).abs() < 1e-15);
        assert!((packing_length(0.0, 0.0, 1.0) - 2.0).abs() < 1e-15);
        assert!((packing_length(LN_2, 0.0, 0.0) - 5f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn triangle_examples() {
        let eq = triangle_angles(1.0, 1.0, 1.0).unwrap();
        assert!(eq.iter().all(|a| (a - FRAC_PI_3).abs() < 1e-15));
        let right = triangle_angles(3.0, 4.0, 5.0).unwrap();
        assert!((right[2] - FRAC_PI_2).abs() < 1e-15);
        assert!(triangle_angles(1.0, 1.0, 2.0).is_none());
        assert!((triangle_area(1.0, 1.0, 1.0).unwrap() - 3f64.sqrt() / 4.0).abs() < 1e-16);
        assert!((triangle_area(3.0, 4.0, 5.0).unwrap() - 6.0).abs() < 1e-14);
    }

    #[test]
    fn degenerate_face_is_reported() {
        let t = seven_vertex_torus();
        let mut l = vec![1.0; t.num_edges()];
        let f = 3;
        l[t.face_edges()[f][0]] = 2.0;
        assert!(matches!(EdgeLengths::new(&t, l), Err(Error::DegenerateFace { .. })));
    }

    #[test]
    fn fit_constant_lengths() {
        let (t, _) = hex_torus(4).unwrap();
        let c = 0.3;
        let l = EdgeLengths::new(&t, vec![c; t.num_edges()]).unwrap();
        let p = fit_uniform_packing(&t, &l, 0.5).unwrap();
        assert!(p.rho().iter().all(|r| (r - (c / 2.0).ln()).abs() < 1e-15));
        assert!(p.cos_theta().iter().all(|x| *x == 1.0));
    }

    #[test]
    fn fit_band_endpoints() {
        let (t, _) = hex_torus(3).unwrap();
        let mut raw = vec![2.0; t.num_edges()];
        raw[0] = 2f64.sqrt();
        let l = EdgeLengths::new(&t, raw).unwrap();
        let p = fit_uniform_packing(&t, &l, 0.0).unwrap();
        assert!(p.rho().iter().all(|r| r.abs() < 1e-15));
        assert!(p.cos_theta()[0].abs() < 1e-15);
        assert_eq!(p.cos_theta()[1], 1.0);
    }

    #[test]
    fn fit_rejects_wide_ratio() {
        let (t, _) = hex_torus(3).unwrap();
        let mut raw = vec![1.0; t.num_edges()];
        // Only one short edge per face keeps the triangle inequality intact.
        raw[0] = 0.5;
        let l = EdgeLengths::new(&t, raw).unwrap();
        assert!(matches!(fit_uniform_packing(&t, &l, 0.1), Err(Error::NotUniformlyPackable { .. })));
    }

    #[test]
    fn fit_round_trip() {
        let (t, emb) = hex_torus(6).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let base = emb.flat_lengths(&t).unwrap();
        let raw: Vec<f64> = base.iter().map(|l| l * rng.random_range(0.95..1.05)).collect();
        let l = EdgeLengths::new(&t, raw).unwrap();
        let p = fit_uniform_packing(&t, &l, 0.1).unwrap();
        let back = edge_lengths_from_packing(&t, &p).unwrap();
        for (a, b) in back.values().iter().zip(l.values()) {
            assert!((a - b).abs() <= 1e-14 * b, "{a} vs {b}");
        }
    }

    #[test]
    fn conformal_action() {
        let (t, _) = hex_torus(4).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let p = CirclePacking::new(
            (0..t.num_vertices()).map(|_| rng.random_range(-0.2..0.2)).collect(),
            (0..t.num_edges()).map(|_| rng.random_range(0.0..1.0)).collect(),
        )
        .unwrap();
        let l0 = edge_lengths_from_packing(&t, &p).unwrap();
        assert_eq!(apply_conformal_factor(&p, &ConformalFactor::zeros(16)).unwrap(), p);

        let a = 0.37;
        let scaled = apply_conformal_factor(&p, &ConformalFactor(vec![a; 16])).unwrap();
        let l1 = edge_lengths_from_packing(&t, &scaled).unwrap();
        for (x, y) in l1.values().iter().zip(l0.values()) {
            assert!((x - a.exp() * y).abs() < 1e-14 * x);
        }

        let u = ConformalFactor((0..16).map(|_| rng.random_range(-1.0..1.0)).collect());
        let minus = ConformalFactor(u.0.iter().map(|x| -x).collect());
        let back = apply_conformal_factor(&apply_conformal_factor(&p, &u).unwrap(), &minus).unwrap();
        let l2 = edge_lengths_from_packing(&t, &back).unwrap();
        for (x, y) in l2.values().iter().zip(l0.values()) {
            assert!((x - y).abs() < 1e-15 * y.max(1.0));
        }
    }

    #[test]
    fn flat_hex_has_zero_curvature_and_unit_area() {
        let n = 5;
        let (t, _) = hex_torus(n).unwrap();
        let s = hex_edge_length(n);
        let l = EdgeLengths::new(&t, vec![s; t.num_edges()]).unwrap();
        let k = discrete_curvature(&t, &inner_angles(&t, &l).unwrap());
        assert!(k.sup_norm() < 1e-14);
        let area = mesh_area(&t, &l).unwrap();
        let expected = 2.0 * (n * n) as f64 * 3f64.sqrt() / 4.0 * s * s;
        assert!((area - expected).abs() < 1e-14);
        assert!((area - 1.0).abs() < 1e-13);
        let scaled = mesh_area(&t, &l.scaled(0.5f64.exp())).unwrap();
        assert!((scaled - area * 1f64.exp()).abs() < 1e-13);
    }

    /// Brute-force sign pattern: a larger circle at `v` lengthens the sides
    /// at `v` while opposite sides stay fixed, so the angle sum at `v` drops
    /// below 2π and the neighbors pick up the excess.
    #[test]
    fn bump_sign_pattern() {
        let (t, _) = hex_torus(3).unwrap();
        let mut p = CirclePacking::uniform(&t, 0.0, 1.0).unwrap();
        let v = 4;
        let mut rho = p.rho().to_vec();
        rho[v] += 0.1;
        p = CirclePacking::new(rho, p.cos_theta().to_vec()).unwrap();

        let l = edge_lengths_from_packing(&t, &p).unwrap();
        let angles = inner_angles(&t, &l).unwrap();
        let k = discrete_curvature(&t, &angles);

        // Independent sum over the raw face list.
        let mut sum_at = [0.0; 9];
        for (f, tri) in t.triangles().iter().enumerate() {
            let [a, b, c] = l.face(&t, f);
            let cos0 = (b * b + c * c - a * a) / (2.0 * b * c);
            let cos1 = (a * a + c * c - b * b) / (2.0 * a * c);
            let cos2 = (a * a + b * b - c * c) / (2.0 * a * b);
            sum_at[tri[0]] += cos0.acos();
            sum_at[tri[1]] += cos1.acos();
            sum_at[tri[2]] += cos2.acos();
        }
        for (i, s) in sum_at.iter().enumerate() {
            assert!((k.values()[i] - (2.0 * PI - s)).abs() < 1e-12);
        }
        assert!(k.values()[v] > 0.0);
        for e in t.edges() {
            if e.0 == v || e.1 == v {
                assert!(k.values()[e.other(v)] < 0.0);
            }
        }
        assert!(k.total().abs() < 1e-12);
    }

    #[test]
    fn regularity_report() {
        let (t, _) = hex_torus(4).unwrap();
        let p = CirclePacking::uniform(&t, -2.0, 1.0).unwrap();
        let l = edge_lengths_from_packing(&t, &p).unwrap();
        let r = check_regularity(&t, &l, &p, 0.9).unwrap();
        assert!(r.is_regular());
        assert!(r.max_degree <= r.degree_bound);
        assert!((r.size - 2.0 * (-2.0f64).exp()).abs() < 1e-15);

        let mut cos = vec![1.0; t.num_edges()];
        cos[7] = 0.05;
        let p = CirclePacking::new(vec![-2.0; 16], cos).unwrap();
        let l = edge_lengths_from_packing(&t, &p).unwrap();
        let r = check_regularity(&t, &l, &p, 0.1).unwrap();
        assert!(!r.cos_theta_ok && !r.is_regular());
        assert_eq!(r.degree_bound, 63);
    }

    #[test]
    fn packing_rejects_bad_weights() {
        assert!(CirclePacking::new(vec![0.0], vec![1.5]).is_err());
        assert!(CirclePacking::new(vec![f64::NAN], vec![]).is_err());
    }
}
