use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};
use serde_json::json;

use circlepack::experiment::{convergence_study, midpoint_edge_length, FieldShape, SmoothTorusModel};
use circlepack::graph::{isoperimetric_constant, laplacian_spectrum, ISOPERIMETRIC_LIMIT, SPECTRUM_LIMIT};
use circlepack::mesh::validate_faces;
use circlepack::mesh_io::MeshFile;
use circlepack::packing::{check_regularity, edge_lengths_from_packing, fit_uniform_packing, mesh_area};
use circlepack::uniformize::{eta_weights, uniformize};
use circlepack::{hex_torus, EdgeLengths, EdgeWeight, Execution, Method, SolveOptions};

#[derive(Parser)]
#[command(name = "circlepack", version, about = "Discrete uniformization of circle packings on tori")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write the hexagonal torus with n×n vertices on the unit-area lattice.
    GenHex {
        #[arg(long)]
        n: usize,
        /// Field shaping the background metric: constant, sinsin or default.
        #[arg(long, default_value = "constant")]
        field: String,
        #[arg(long, default_value_t = 0.0)]
        amplitude: f64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Fit a constant-radius packing to the mesh's edge lengths.
    FitPacking {
        #[arg(long)]
        mesh: PathBuf,
        #[arg(long)]
        eps: f64,
        /// Output mesh; printed to stdout when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Solve for the flat unit-area conformal factor of the mesh's packing.
    Uniformize {
        #[arg(long)]
        mesh: PathBuf,
        #[arg(long, default_value_t = 1e-10)]
        tol: f64,
        #[arg(long, default_value = "newton")]
        method: String,
        #[arg(long)]
        out: PathBuf,
    },
    /// Error of the discrete factor against the smooth one under refinement.
    Convergence {
        #[arg(long, default_value = "default")]
        field: String,
        #[arg(long, default_value_t = 0.05)]
        amplitude: f64,
        #[arg(long, value_delimiter = ',', default_value = "8,16,32,64")]
        sizes: Vec<usize>,
        #[arg(long, default_value_t = 0.1)]
        eps: f64,
        #[arg(long, default_value = "newton")]
        method: String,
        /// Run rows one after another.
        #[arg(long)]
        sequential: bool,
        /// Output CSV; printed to stdout when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Validate a mesh and summarize its Laplacian.
    Check {
        #[arg(long)]
        mesh: PathBuf,
    },
}

fn write_or_print(out: Option<&Path>, text: &str) -> Result<()> {
    match out {
        Some(path) => fs::write(path, text).with_context(|| format!("writing {}", path.display())),
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout.write_all(text.as_bytes())?;
            if !text.ends_with('\n') {
                writeln!(stdout)?;
            }
            Ok(())
        }
    }
}

fn gen_hex(n: usize, field: &str, amplitude: f64, out: &Path) -> Result<()> {
    let model = SmoothTorusModel::hexagonal(field.parse::<FieldShape>()?, amplitude);
    let (tri, embedding) = hex_torus(n)?;
    let raw = tri
        .edges()
        .iter()
        .map(|e| midpoint_edge_length(&model, embedding.positions[e.0], embedding.positions[e.1]))
        .collect::<circlepack::Result<Vec<_>>>()?;
    let lengths = EdgeLengths::new(&tri, raw)?;
    let file = MeshFile::from_parts(&tri, None, Some(&lengths), Some(&embedding));
    file.write(out)?;
    eprintln!("wrote {} vertices, {} faces to {}", file.num_vertices, file.triangles.len(), out.display());
    Ok(())
}

fn fit_packing(mesh: &Path, eps: f64, out: Option<&Path>) -> Result<()> {
    let file = MeshFile::read(mesh)?;
    let loaded = file.load()?;
    let Some(lengths) = loaded.lengths else {
        bail!("{} has no edge lengths to fit", mesh.display());
    };
    let tri = &loaded.triangulation;
    let packing = fit_uniform_packing(tri, &lengths, eps)?;
    let report = check_regularity(tri, &lengths, &packing, eps)?;
    eprintln!("{}", serde_json::to_string_pretty(&report)?);
    if !report.is_regular() {
        eprintln!("warning: the fitted packing is not {eps}-regular");
    }
    let fitted = MeshFile::from_parts(tri, Some(&packing), Some(&lengths), loaded.embedding.as_ref());
    write_or_print(out, &fitted.to_json()?)
}

fn run_uniformize(mesh: &Path, tol: f64, method: &str, out: &Path) -> Result<()> {
    let loaded = MeshFile::read(mesh)?.load()?;
    let Some(packing) = loaded.packing else {
        bail!("{} has no packing (rho and cos_theta); run fit-packing first", mesh.display());
    };
    let method: Method = method.parse()?;
    let opts = SolveOptions { tol, ..SolveOptions::default() };
    let tri = &loaded.triangulation;
    let solved = uniformize(tri, &packing, method, &opts)?;
    let result = json!({
        "method": method,
        "u": solved.factor.values(),
        "curvature": solved.curvature.values(),
        "area_shift": solved.report.area_shift,
        "iterations": solved.report.iterations,
        "final_residual": solved.report.final_residual,
        "flow_deviation": solved.report.flow_deviation,
        "iteration_log": solved.report.step_history,
    });
    fs::write(out, serde_json::to_string_pretty(&result)?)?;
    eprintln!(
        "{} iterations, ‖K‖∞ = {:.3e}, area shift {:.6}",
        solved.report.iterations, solved.report.final_residual, solved.report.area_shift
    );
    Ok(())
}

fn run_convergence(
    field: &str,
    amplitude: f64,
    sizes: &[usize],
    eps: f64,
    method: &str,
    sequential: bool,
    out: Option<&Path>,
) -> Result<()> {
    let model = SmoothTorusModel::hexagonal(field.parse()?, amplitude);
    let exec = if sequential { Execution::Sequential } else { Execution::Parallel };
    let study = convergence_study(&model, sizes, eps, method.parse()?, &SolveOptions::default(), exec)?;
    if let Some(fit) = study.fit {
        eprintln!("fitted order {:.4} ± {:.4} (95%)", fit.order, fit.half_width);
    }
    write_or_print(out, &study.to_csv())
}

fn check(mesh: &Path) -> Result<()> {
    let file = MeshFile::read(mesh)?;
    let report = validate_faces(file.num_vertices, &file.triangles);
    println!("validation: {}", serde_json::to_string_pretty(&report)?);
    if !report.is_valid() {
        bail!("{} is not a valid torus triangulation", mesh.display());
    }
    let loaded = file.load()?;
    let tri = &loaded.triangulation;
    let lengths = match (&loaded.lengths, &loaded.packing) {
        (Some(l), _) => Some(l.clone()),
        (None, Some(p)) => Some(edge_lengths_from_packing(tri, p)?),
        (None, None) => None,
    };
    if let Some(l) = &lengths {
        println!("area: {:.12}", mesh_area(tri, l)?);
        println!("mesh size |l|: {:.6e}", l.max());
    }
    if tri.num_vertices() <= SPECTRUM_LIMIT {
        let unit = laplacian_spectrum(tri.graph(), &EdgeWeight::constant(tri.num_edges(), 1.0)?)?;
        println!("spectrum (unit weights): {}", serde_json::to_string(&unit)?);
        if let Some(p) = &loaded.packing {
            let eta = eta_weights(tri, p)?.eta;
            let s = laplacian_spectrum(tri.graph(), &eta)?;
            println!("spectrum (packing weights): {}", serde_json::to_string(&s)?);
        }
    } else {
        println!("spectrum: skipped, more than {SPECTRUM_LIMIT} vertices");
    }
    if tri.num_vertices() <= ISOPERIMETRIC_LIMIT {
        let unit = vec![1.0; tri.num_edges()];
        let l = lengths.as_ref().map_or(unit.as_slice(), |l| l.values());
        println!("isoperimetric constant: {:.6}", isoperimetric_constant(tri.graph(), l)?);
    } else {
        println!("isoperimetric constant: skipped, more than {ISOPERIMETRIC_LIMIT} vertices");
    }
    Ok(())
}

fn main() -> Result<()> {
    match Cli::parse().command {
        Command::GenHex { n, field, amplitude, out } => gen_hex(n, &field, amplitude, &out),
        Command::FitPacking { mesh, eps, out } => fit_packing(&mesh, eps, out.as_deref()),
        Command::Uniformize { mesh, tol, method, out } => run_uniformize(&mesh, tol, &method, &out),
        Command::Convergence { field, amplitude, sizes, eps, method, sequential, out } => {
            run_convergence(&field, amplitude, &sizes, eps, &method, sequential, out.as_deref())
        }
        Command::Check { mesh } => check(&mesh),
    }
}
