//! Acceptance suite. Runs every criterion, prints one PASS/FAIL line each,
//! and exits nonzero if any criterion fails.

use std::process::ExitCode;
use std::time::{Duration, Instant};

use circlepack::experiment::{
    build_experiment_mesh, convergence_study, fit_order, geodesic_length_refined, midpoint_edge_length,
    reference_factor, FieldShape, SmoothTorusModel,
};
use circlepack::mesh::hex_torus;
use circlepack::packing::{apply_conformal_factor, edge_lengths_from_packing, mesh_area, packing_curvature};
use circlepack::uniformize::{
    continuation_flow, newton_uniformize, newton_uniformize_from, normalize_area, uniformize,
};
use circlepack::verify::{
    comparison_sweep, corner_symmetry_sweep, elliptic_sweep, gauss_bonnet_sweep, jacobian_sweep, length_area_sweep,
    random_packing, sample_rng,
};
use circlepack::{ConformalFactor, Execution, Method, Result, SolveOptions};
use rand::Rng;

const EXEC: Execution = Execution::Parallel;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Result<Outcome> {
    Ok(Outcome { pass, detail })
}

fn sup_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).fold(0.0_f64, |m, (x, y)| m.max((x - y).abs()))
}

fn gauss_bonnet() -> Result<Outcome> {
    let s = gauss_bonnet_sweep(50, 101, 1e-9, EXEC);
    outcome(s.samples == 50 && s.passed(), format!("{} packings, worst |ΣK|/(1e-9·V) = {:.2e}", s.samples, s.worst))
}

fn jacobian() -> Result<Outcome> {
    let s = jacobian_sweep(20, 202, 1e-5, 1e-6, EXEC);
    outcome(s.samples == 20 && s.passed(), format!("{} packings, worst error = {:.2e}", s.samples, s.worst * 1e-6))
}

fn symmetry() -> Result<Outcome> {
    let s = corner_symmetry_sweep(10_000, 303, 1e-12, EXEC);
    outcome(
        s.samples == 10_000 && s.passed(),
        format!("{} faces, worst relative asymmetry = {:.2e}", s.samples, s.worst * 1e-12),
    )
}

fn solver() -> Result<Outcome> {
    let opts = SolveOptions::default();
    let mut worst_iters = 0;
    let mut worst_residual = 0.0_f64;
    let mut worst_agreement = 0.0_f64;
    let mut worst_decay = 0.0_f64;
    let mut largest = 0;
    for (i, n) in [8usize, 16, 32, 64].into_iter().enumerate() {
        let (tri, _) = hex_torus(n)?;
        let mut rng = sample_rng(404, i);
        let noise = rng.random_range(0.1..0.3);
        let p = random_packing(&tri, &mut rng, noise, 0.5)?;
        let (u, report) = newton_uniformize(&tri, &p, &opts)?;
        let k = packing_curvature(&tri, &apply_conformal_factor(&p, &u)?)?;
        let (uf, flow) = continuation_flow(&tri, &p, 64, &opts)?;
        let decay = flow.step_history.iter().find(|s| (s.t - 0.5).abs() < 1e-12).map_or(f64::INFINITY, |s| s.residual);
        worst_iters = worst_iters.max(report.iterations);
        worst_residual = worst_residual.max(k.sup_norm());
        worst_agreement = worst_agreement.max(sup_diff(u.values(), uf.values()));
        worst_decay = worst_decay.max(decay);
        largest = largest.max(tri.num_vertices());
    }
    outcome(
        worst_iters <= 25 && worst_residual <= 1e-10 && worst_agreement <= 1e-8 && worst_decay <= 1e-6,
        format!(
            "V ≤ {largest}: Newton ≤ {worst_iters} iterations, ‖K‖∞ ≤ {worst_residual:.2e}, \
             flow-Newton gap {worst_agreement:.2e}, decay deviation at t=0.5 {worst_decay:.2e}"
        ),
    )
}

fn rigidity() -> Result<Outcome> {
    let opts = SolveOptions::default();
    let mut worst = 0.0_f64;
    for i in 0..10 {
        let mut rng = sample_rng(505, i);
        let (tri, _) = hex_torus(rng.random_range(4..=12))?;
        let p = random_packing(&tri, &mut rng, 0.3, 0.3)?;
        let v = tri.num_vertices();
        let mut start = || -> ConformalFactor {
            let shift = rng.random_range(-2.0..2.0);
            ConformalFactor((0..v).map(|_| shift + rng.random_range(-0.05..0.05)).collect())
        };
        let (a, b) = (start(), start());
        let (ua, _) = newton_uniformize_from(&tri, &p, &a, &opts)?;
        let (ub, _) = newton_uniformize_from(&tri, &p, &b, &opts)?;
        let (na, _) = normalize_area(&tri, &p, &ua)?;
        let (nb, _) = normalize_area(&tri, &p, &ub)?;
        worst = worst.max(sup_diff(na.values(), nb.values()));
    }
    outcome(worst <= 1e-8, format!("10 instances, largest gap between normalized factors {worst:.2e}"))
}

fn convergence() -> Result<Outcome> {
    let model = SmoothTorusModel::hexagonal(FieldShape::Default, 0.05);
    let sizes = [8, 16, 32, 64];
    let study = convergence_study(&model, &sizes, 0.1, Method::Newton, &SolveOptions::default(), EXEC)?;
    let rows: Vec<_> = study.successful_rows().cloned().collect();
    let all_rows = rows.len() == sizes.len();
    let decreasing = rows.windows(2).all(|w| w[1].err_max < w[0].err_max);
    let errs: Vec<String> = rows.iter().map(|r| format!("{:.2e}", r.err_max)).collect();
    let (order, band) = study.fit.map_or((f64::NAN, f64::NAN), |f| (f.order, f.half_width));
    let doubling = rows.windows(2).map(|w| w[1].err_max / w[0].err_max).fold(0.0, f64::max);

    // Both normalizations should give unit area.
    let reference = reference_factor(&model);
    let mut worst_area = (reference.normalized_area() - 1.0).abs();
    for &n in &sizes[..2] {
        let mesh = build_experiment_mesh(&model, n, 0.1)?;
        let solved = uniformize(&mesh.triangulation, &mesh.packing, Method::Newton, &SolveOptions::default())?;
        let lengths =
            edge_lengths_from_packing(&mesh.triangulation, &apply_conformal_factor(&mesh.packing, &solved.factor)?)?;
        worst_area = worst_area.max((mesh_area(&mesh.triangulation, &lengths)? - 1.0).abs());
    }
    outcome(
        all_rows && decreasing && order >= 0.8,
        format!(
            "err_max = [{}], order = {order:.3} ± {band:.3}, worst doubling ratio {doubling:.3}, \
             unit-area deviation {worst_area:.1e}",
            errs.join(", ")
        ),
    )
}

fn constants() -> Result<Outcome> {
    let mut worst = 0.0_f64;
    for c in [0.0, 0.3, -0.7] {
        let model = SmoothTorusModel::hexagonal(FieldShape::Constant, c);
        let study = convergence_study(&model, &[8, 16, 32, 64], 0.1, Method::Newton, &SolveOptions::default(), EXEC)?;
        if study.successful_rows().count() != 4 {
            return outcome(false, format!("a row failed for c = {c}"));
        }
        worst = worst.max(study.successful_rows().map(|r| r.err_max).fold(0.0, f64::max));
    }
    outcome(worst <= 1e-9, format!("c ∈ {{0, 0.3, −0.7}}, n ∈ {{8..64}}: worst err_max {worst:.2e}"))
}

fn cubic() -> Result<Outcome> {
    let model = SmoothTorusModel::hexagonal(FieldShape::Default, 0.05);
    // Chords centered at a fixed point, so the leading deviation term has a
    // fixed coefficient.
    let center = [0.0, 0.0];
    let dir = [1.0, 0.0];
    let mut points = Vec::new();
    let mut devs = Vec::new();
    for l in [0.2f64, 0.1, 0.05, 0.025] {
        let p = [center[0] - 0.5 * l * dir[0], center[1] - 0.5 * l * dir[1]];
        let q = [center[0] + 0.5 * l * dir[0], center[1] + 0.5 * l * dir[1]];
        let dev = (midpoint_edge_length(&model, p, q)? - geodesic_length_refined(&model, p, q, 32)?).abs();
        devs.push(format!("{dev:.2e}"));
        points.push((l.ln(), dev.ln()));
    }
    let slope = fit_order(&points).map_or(f64::NAN, |f| f.order);
    outcome((2.7..=3.3).contains(&slope), format!("deviations [{}], slope {slope:.3}", devs.join(", ")))
}

fn length_area() -> Result<Outcome> {
    let s = length_area_sweep(100_000, 909, EXEC);
    outcome(
        s.samples == 100_000 && s.passed(),
        format!("{} triangles, {} violations, worst ratio {:.3}", s.samples, s.violations, s.worst),
    )
}

fn comparison() -> Result<Outcome> {
    let s = comparison_sweep(10_000, 1010, EXEC);
    outcome(
        s.samples == 10_000 && s.passed(),
        format!("{} perturbations, {} violations, worst ratio {:.3}", s.samples, s.violations, s.worst),
    )
}

fn elliptic() -> Result<Outcome> {
    let s = elliptic_sweep(100, 1111, EXEC);
    outcome(
        s.samples == 100 && s.passed(),
        format!("{} graphs, {} violations, worst ratio {:.3}", s.samples, s.violations, s.worst),
    )
}

type Check = fn() -> Result<Outcome>;

fn main() -> ExitCode {
    let criteria: [(&str, Check, Option<Duration>); 11] = [
        ("Gauss-Bonnet", gauss_bonnet, Some(Duration::from_secs(5))),
        ("Jacobian oracle", jacobian, Some(Duration::from_secs(30))),
        ("corner symmetry", symmetry, Some(Duration::from_secs(5))),
        ("solver correctness", solver, Some(Duration::from_secs(120))),
        ("rigidity", rigidity, None),
        ("main convergence", convergence, Some(Duration::from_secs(300))),
        ("exactness on constants", constants, None),
        ("cubic estimate", cubic, Some(Duration::from_secs(60))),
        ("length-area band", length_area, None),
        ("comparison-triangle bands", comparison, None),
        ("elliptic estimate", elliptic, None),
    ];
    let mut failures = 0;
    for (index, (name, check, limit)) in criteria.into_iter().enumerate() {
        let start = Instant::now();
        let result = check();
        let elapsed = start.elapsed();
        let in_time = limit.is_none_or(|l| elapsed < l);
        let (pass, detail) = match result {
            Ok(o) => (o.pass && in_time, o.detail),
            Err(e) => (false, format!("error: {e}")),
        };
        let budget = limit.map_or(String::new(), |l| format!(" / {} s", l.as_secs()));
        println!(
            "criterion {:>2} {:<26} {}  ({detail}; {:.2} s{budget})",
            index + 1,
            name,
            if pass { "PASS" } else { "FAIL" },
            elapsed.as_secs_f64()
        );
        failures += usize::from(!pass);
    }
    println!("acceptance: {} of 11 criteria passed", 11 - failures);
    if failures == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
