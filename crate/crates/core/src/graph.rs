//! Calculus on the 1-skeleton: flows, gradient, divergence, the weighted
//! Laplacian `Δ_η`, a kernel-aware conjugate-gradient solve, and an exhaustive
//! isoperimetric constant for small metric graphs.
//!
//! Every per-edge loop visits edges in sorted canonical-key order, so
//! `divergence(gradient(η, f))` and `laplacian_apply(η, f)` agree bit for bit.

use std::collections::VecDeque;

use nalgebra::{DMatrix, SymmetricEigen};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::mesh::EdgeKey;

/// Simple undirected graph with edges stored once, sorted by canonical key.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Graph {
    num_vertices: usize,
    edges: Vec<EdgeKey>,
}

impl Graph {
    /// Builds a graph from an arbitrary edge list. Duplicates are merged and
    /// self-loops rejected.
    pub fn new(num_vertices: usize, edges: impl IntoIterator<Item = (usize, usize)>) -> Result<Self> {
        let mut keys = Vec::new();
        for (a, b) in edges {
            if a == b {
                return Err(Error::InvalidInput(format!("self-loop at vertex {a}")));
            }
            if a >= num_vertices || b >= num_vertices {
                return Err(Error::InvalidInput(format!("edge ({a}, {b}) out of range for {num_vertices} vertices")));
            }
            keys.push(EdgeKey::new(a, b));
        }
        keys.sort_unstable();
        keys.dedup();
        Ok(Self { num_vertices, edges: keys })
    }

    pub(crate) fn from_sorted(num_vertices: usize, edges: Vec<EdgeKey>) -> Self {
        debug_assert!(edges.windows(2).all(|w| w[0] < w[1]));
        Self { num_vertices, edges }
    }

    pub fn num_vertices(&self) -> usize {
        self.num_vertices
    }

    pub fn num_edges(&self) -> usize {
        self.edges.len()
    }

    pub fn edges(&self) -> &[EdgeKey] {
        &self.edges
    }

    /// Position of `key` in the sorted edge list.
    pub fn edge_index(&self, key: EdgeKey) -> Option<usize> {
        self.edges.binary_search(&key).ok()
    }

    pub fn degrees(&self) -> Vec<usize> {
        let mut deg = vec![0; self.num_vertices];
        for e in &self.edges {
            deg[e.0] += 1;
            deg[e.1] += 1;
        }
        deg
    }

    pub fn neighbors(&self) -> Vec<Vec<usize>> {
        let mut adj = vec![Vec::new(); self.num_vertices];
        for e in &self.edges {
            adj[e.0].push(e.1);
            adj[e.1].push(e.0);
        }
        adj
    }

    /// Number of connected components (isolated vertices count).
    pub fn components(&self) -> usize {
        let adj = self.neighbors();
        let mut seen = vec![false; self.num_vertices];
        let mut count = 0;
        let mut queue = VecDeque::new();
        for start in 0..self.num_vertices {
            if seen[start] {
                continue;
            }
            count += 1;
            seen[start] = true;
            queue.push_back(start);
            while let Some(v) = queue.pop_front() {
                for &w in &adj[v] {
                    if !seen[w] {
                        seen[w] = true;
                        queue.push_back(w);
                    }
                }
            }
        }
        count
    }

    pub fn is_connected(&self) -> bool {
        self.components() == 1
    }

    fn check_edge_len(&self, len: usize) -> Result<()> {
        if len != self.edges.len() {
            return Err(Error::DimensionMismatch { expected: self.edges.len(), got: len });
        }
        Ok(())
    }

    fn check_vertex_len(&self, len: usize) -> Result<()> {
        if len != self.num_vertices {
            return Err(Error::DimensionMismatch { expected: self.num_vertices, got: len });
        }
        Ok(())
    }
}

/// Positive per-edge weight `η`, indexed like [`Graph::edges`].
#[derive(Clone, Debug, PartialEq)]
pub struct EdgeWeight(Vec<f64>);

impl EdgeWeight {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if let Some((index, &value)) = values.iter().enumerate().find(|(_, v)| !(v.is_finite() && **v > 0.0)) {
            return Err(Error::NonPositiveWeight { index, value });
        }
        Ok(Self(values))
    }

    pub fn constant(num_edges: usize, value: f64) -> Result<Self> {
        Self::new(vec![value; num_edges])
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

/// Antisymmetric edge function. The stored value for edge `(i, j)` with
/// `i < j` is `x_ij`; `x_ji = -x_ij` is implied.
#[derive(Clone, Debug, PartialEq)]
pub struct Flow(Vec<f64>);

impl Flow {
    pub fn new(values: Vec<f64>) -> Self {
        Self(values)
    }

    pub fn zeros(num_edges: usize) -> Self {
        Self(vec![0.0; num_edges])
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.0
    }

    /// Value of the flow from `from` to `to` across `key`.
    pub fn directed(&self, index: usize, key: EdgeKey, from: usize) -> f64 {
        if from == key.0 {
            self.0[index]
        } else {
            -self.0[index]
        }
    }
}

/// `(∇f)_ij = η_ij (f_j − f_i)`.
pub fn gradient(graph: &Graph, eta: &EdgeWeight, f: &[f64]) -> Result<Flow> {
    graph.check_edge_len(eta.len())?;
    graph.check_vertex_len(f.len())?;
    Ok(Flow(graph.edges.iter().zip(&eta.0).map(|(e, w)| w * (f[e.1] - f[e.0])).collect()))
}

/// `div(x)_i = Σ_{j∼i} x_ij`.
pub fn divergence(graph: &Graph, x: &Flow) -> Result<Vec<f64>> {
    graph.check_edge_len(x.0.len())?;
    let mut out = vec![0.0; graph.num_vertices];
    for (e, &v) in graph.edges.iter().zip(&x.0) {
        out[e.0] += v;
        out[e.1] -= v;
    }
    Ok(out)
}

/// `(Δ_η f)_i = Σ_{j∼i} η_ij (f_j − f_i)`.
pub fn laplacian_apply(graph: &Graph, eta: &EdgeWeight, f: &[f64]) -> Result<Vec<f64>> {
    graph.check_edge_len(eta.len())?;
    graph.check_vertex_len(f.len())?;
    let mut out = vec![0.0; graph.num_vertices];
    laplacian_into(graph, eta.values(), f, &mut out);
    Ok(out)
}

fn laplacian_into(graph: &Graph, eta: &[f64], f: &[f64], out: &mut [f64]) {
    out.iter_mut().for_each(|o| *o = 0.0);
    for (e, w) in graph.edges.iter().zip(eta) {
        let g = w * (f[e.1] - f[e.0]);
        out[e.0] += g;
        out[e.1] -= g;
    }
}

pub(crate) fn project_mean_zero(v: &mut [f64]) {
    if v.is_empty() {
        return;
    }
    let mean = v.iter().sum::<f64>() / v.len() as f64;
    v.iter_mut().for_each(|x| *x -= mean);
}

pub(crate) fn sup_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0_f64, |m, x| m.max(x.abs()))
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub const DEFAULT_SOLVE_TOL: f64 = 1e-12;

/// Solves `Δ_η x = y` on the mean-zero subspace.
///
/// Preconditioned conjugate gradient with a Jacobi preconditioner projected
/// onto `1^⊥`. The returned `x` has zero mean and satisfies
/// `‖Δ_η x − y‖∞ ≤ tol·‖y‖∞`. The iteration cap is `50·V`.
pub fn solve_laplacian(graph: &Graph, eta: &EdgeWeight, y: &[f64], tol: f64) -> Result<Vec<f64>> {
    graph.check_edge_len(eta.len())?;
    graph.check_vertex_len(y.len())?;
    let n = graph.num_vertices;
    let y_norm = sup_norm(y);
    if y_norm == 0.0 {
        return Ok(vec![0.0; n]);
    }
    let sum: f64 = y.iter().sum();
    if sum.abs() > 1e-9 * y_norm {
        return Err(Error::NotMeanZero { sum });
    }
    // CG runs on the positive semidefinite operator `−Δ` with right side `−y`.
    let mut rhs: Vec<f64> = y.iter().map(|v| -v).collect();
    project_mean_zero(&mut rhs);
    let apply = |f: &[f64], out: &mut [f64]| {
        laplacian_into(graph, eta.values(), f, out);
        out.iter_mut().for_each(|o| *o = -*o);
    };

    let mut diag = vec![0.0; n];
    for (e, w) in graph.edges.iter().zip(eta.values()) {
        diag[e.0] += w;
        diag[e.1] += w;
    }
    let inv_diag: Vec<f64> = diag.iter().map(|d| if *d > 0.0 { 1.0 / d } else { 1.0 }).collect();
    let precondition = |r: &[f64], z: &mut [f64]| {
        for ((zi, ri), d) in z.iter_mut().zip(r).zip(&inv_diag) {
            *zi = ri * d;
        }
        project_mean_zero(z);
    };

    let threshold = tol * y_norm;
    let cap = 50 * n.max(1);
    let mut x = vec![0.0; n];
    let mut r = rhs.clone();
    let mut z = vec![0.0; n];
    let mut ap = vec![0.0; n];
    let mut iterations = 0;

    // Outer loop restarts from the true residual if the recursive one drifted.
    loop {
        precondition(&r, &mut z);
        let mut p = z.clone();
        let mut rz = dot(&r, &z);
        while sup_norm(&r) > threshold {
            if iterations >= cap {
                apply(&x, &mut ap);
                let residual = ap.iter().zip(&rhs).fold(0.0_f64, |m, (a, b)| m.max((a - b).abs()));
                return Err(Error::NoConvergence { iterations, residual });
            }
            iterations += 1;
            apply(&p, &mut ap);
            let pap = dot(&p, &ap);
            if pap <= 0.0 {
                break;
            }
            let alpha = rz / pap;
            for i in 0..n {
                x[i] += alpha * p[i];
                r[i] -= alpha * ap[i];
            }
            project_mean_zero(&mut x);
            precondition(&r, &mut z);
            let rz_next = dot(&r, &z);
            let beta = rz_next / rz;
            rz = rz_next;
            for i in 0..n {
                p[i] = z[i] + beta * p[i];
            }
        }
        apply(&x, &mut ap);
        for i in 0..n {
            r[i] = rhs[i] - ap[i];
        }
        if sup_norm(&r) <= threshold {
            return Ok(x);
        }
        if iterations >= cap {
            return Err(Error::NoConvergence { iterations, residual: sup_norm(&r) });
        }
    }
}

/// Largest vertex count accepted by [`isoperimetric_constant`].
pub const ISOPERIMETRIC_LIMIT: usize = 20;

/// Smallest `C` with `min(|U|_l, |V|_l − |U|_l) ≤ C·|∂U|_l²` for every
/// proper nonempty `U ⊂ V`, where `|U|_l` sums `l²` over edges inside `U`
/// and `|∂U|_l` sums `l` over edges leaving `U`.
///
/// Enumerates all `2^V − 2` subsets, so only small graphs are accepted.
/// Returns infinity when some subset with positive area has no boundary.
pub fn isoperimetric_constant(graph: &Graph, lengths: &[f64]) -> Result<f64> {
    graph.check_edge_len(lengths.len())?;
    let n = graph.num_vertices;
    if n > ISOPERIMETRIC_LIMIT {
        return Err(Error::TooLarge { vertices: n, limit: ISOPERIMETRIC_LIMIT });
    }
    if n < 2 {
        return Ok(0.0);
    }
    let total: f64 = lengths.iter().map(|l| l * l).sum();
    let mut best = 0.0_f64;
    let full: u32 = (1u32 << n) - 1;
    for mask in 1..full {
        let mut area = 0.0;
        let mut perimeter = 0.0;
        for (e, l) in graph.edges.iter().zip(lengths) {
            let a = mask >> e.0 & 1 == 1;
            let b = mask >> e.1 & 1 == 1;
            if a && b {
                area += l * l;
            } else if a != b {
                perimeter += l;
            }
        }
        let smaller = area.min(total - area);
        if smaller <= 0.0 {
            continue;
        }
        if perimeter == 0.0 {
            return Ok(f64::INFINITY);
        }
        best = best.max(smaller / (perimeter * perimeter));
    }
    Ok(best)
}

/// Summary of the spectrum of `−Δ_η` (nonnegative eigenvalues).
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SpectrumSummary {
    pub kernel_dimension: usize,
    /// Smallest eigenvalue above the kernel threshold.
    pub spectral_gap: f64,
    pub largest: f64,
}

/// Largest vertex count for the dense eigensolver used by [`laplacian_spectrum`].
pub const SPECTRUM_LIMIT: usize = 1500;

pub fn laplacian_spectrum(graph: &Graph, eta: &EdgeWeight) -> Result<SpectrumSummary> {
    graph.check_edge_len(eta.len())?;
    let n = graph.num_vertices;
    if n > SPECTRUM_LIMIT {
        return Err(Error::TooLarge { vertices: n, limit: SPECTRUM_LIMIT });
    }
    let mut m = DMatrix::<f64>::zeros(n, n);
    for (e, w) in graph.edges.iter().zip(eta.values()) {
        m[(e.0, e.0)] += w;
        m[(e.1, e.1)] += w;
        m[(e.0, e.1)] -= w;
        m[(e.1, e.0)] -= w;
    }
    let eig = SymmetricEigen::new(m);
    let mut values: Vec<f64> = eig.eigenvalues.iter().copied().collect();
    values.sort_by(|a, b| a.total_cmp(b));
    let largest = values.last().copied().unwrap_or(0.0);
    let cutoff = 1e-9 * largest.max(1.0);
    let kernel_dimension = values.iter().filter(|v| v.abs() <= cutoff).count();
    let spectral_gap = values.iter().copied().find(|v| *v > cutoff).unwrap_or(0.0);
    Ok(SpectrumSummary { kernel_dimension, spectral_gap, largest })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn triangle() -> Graph {
        Graph::new(3, [(0, 1), (1, 2), (0, 2)]).unwrap()
    }

    fn cycle(n: usize) -> Graph {
        Graph::new(n, (0..n).map(|i| (i, (i + 1) % n))).unwrap()
    }

    #[test]
    fn gradient_of_constant_is_zero() {
        let g = cycle(5);
        let eta = EdgeWeight::new(vec![0.3, 1.0, 2.0, 0.5, 1.5]).unwrap();
        let flow = gradient(&g, &eta, &[4.0; 5]).unwrap();
        assert!(flow.values().iter().all(|v| *v == 0.0));
    }

    #[test]
    fn gradient_of_indicator() {
        let g = cycle(5);
        let eta = EdgeWeight::constant(5, 1.0).unwrap();
        let mut f = vec![0.0; 5];
        f[2] = 1.0;
        let flow = gradient(&g, &eta, &f).unwrap();
        for (idx, e) in g.edges().iter().enumerate() {
            if e.0 == 2 || e.1 == 2 {
                let other = if e.0 == 2 { e.1 } else { e.0 };
                assert_eq!(flow.directed(idx, *e, other), 1.0);
            } else {
                assert_eq!(flow.values()[idx], 0.0);
            }
        }
    }

    #[test]
    fn single_edge_divergence() {
        let g = triangle();
        let mut x = Flow::zeros(3);
        let idx = g.edge_index(EdgeKey::new(1, 2)).unwrap();
        x.values_mut()[idx] = 1.0;
        assert_eq!(divergence(&g, &x).unwrap(), vec![0.0, 1.0, -1.0]);
        assert_eq!(divergence(&g, &Flow::zeros(3)).unwrap(), vec![0.0; 3]);
    }

    #[test]
    fn laplacian_is_div_grad_bitwise() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let g = Graph::new(8, (0..8).flat_map(|i| [(i, (i + 1) % 8), (i, (i + 3) % 8)])).unwrap();
        let eta = EdgeWeight::new((0..g.num_edges()).map(|_| rng.random_range(0.1..2.0)).collect()).unwrap();
        let f: Vec<f64> = (0..8).map(|_| rng.random_range(-1.0..1.0)).collect();
        let a = laplacian_apply(&g, &eta, &f).unwrap();
        let b = divergence(&g, &gradient(&g, &eta, &f).unwrap()).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn mean_zero_rhs_is_required() {
        let g = cycle(4);
        let eta = EdgeWeight::constant(4, 1.0).unwrap();
        assert!(matches!(solve_laplacian(&g, &eta, &[1.0; 4], 1e-12), Err(Error::NotMeanZero { .. })));
        assert_eq!(solve_laplacian(&g, &eta, &[0.0; 4], 1e-12).unwrap(), vec![0.0; 4]);
    }

    #[test]
    fn solve_recovers_forward_image() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let n = 30;
        let g = Graph::new(n, (0..n).flat_map(|i| [(i, (i + 1) % n), (i, (i + 7) % n)])).unwrap();
        let eta = EdgeWeight::new((0..g.num_edges()).map(|_| rng.random_range(0.2..3.0)).collect()).unwrap();
        let mut f: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
        project_mean_zero(&mut f);
        let y = laplacian_apply(&g, &eta, &f).unwrap();
        let x = solve_laplacian(&g, &eta, &y, 1e-12).unwrap();
        let mean: f64 = x.iter().sum::<f64>() / n as f64;
        assert!(mean.abs() < 1e-14);
        let err = x.iter().zip(&f).fold(0.0_f64, |m, (a, b)| m.max((a - b).abs()));
        assert!(err < 1e-9, "{err}");
        let residual: Vec<f64> = laplacian_apply(&g, &eta, &x).unwrap().iter().zip(&y).map(|(a, b)| a - b).collect();
        assert!(sup_norm(&residual) <= 1e-12 * sup_norm(&y));
    }

    #[test]
    fn triangle_isoperimetric_constant() {
        // Singletons contain no edge; each pair holds one unit edge with two
        // boundary edges: min(1, 3 - 1) / 2^2.
        let c = isoperimetric_constant(&triangle(), &[1.0; 3]).unwrap();
        assert_eq!(c, 0.25);
        let scaled = isoperimetric_constant(&triangle(), &[3.5; 3]).unwrap();
        assert!((scaled - 0.25).abs() < 1e-15);
    }

    #[test]
    fn isoperimetric_rejects_large_graphs() {
        let g = cycle(21);
        assert!(matches!(isoperimetric_constant(&g, &[1.0; 21]), Err(Error::TooLarge { vertices: 21, .. })));
    }

    #[test]
    fn cycle_spectrum() {
        let g = cycle(6);
        let s = laplacian_spectrum(&g, &EdgeWeight::constant(6, 1.0).unwrap()).unwrap();
        assert_eq!(s.kernel_dimension, 1);
        assert!((s.spectral_gap - 1.0).abs() < 1e-12);
        assert!((s.largest - 4.0).abs() < 1e-12);
    }

    #[test]
    fn weights_must_be_positive() {
        assert!(matches!(EdgeWeight::new(vec![1.0, 0.0]), Err(Error::NonPositiveWeight { index: 1, .. })));
    }
}
