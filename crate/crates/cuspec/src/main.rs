use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand};
use cuspec::cusp::{
    build_weights_for_f, check_discrete_cusp, counting_sandwich, dynamics_experiment,
    eigen_ratio_series, f_alpha, jacobi_reduction, le_jacobi_operator, sector_operator,
    solve_alpha,
    verify_keystone, write_asymptotics_csv, write_counting_csv, write_occupation_csv,
    CuspProduct, Sector,
};
use cuspec::document::{load_graph, save_graph};
use cuspec::error::Error;
use cuspec::graph::ExtReal;
use cuspec::magnetic::{
    coupling_period, cycle_basis, find_gauge, holonomy_vector, CouplingPeriod, CycleBasis,
};
use cuspec::operators::{
    assemble_laplacian, fmt_f64, write_eigenvectors_bin, write_spectrum_csv,
};
use cuspec::phase::Phase;
use cuspec::products::{build_cusp_example, cartesian_product, product_through};
use cuspec::{MagneticPotential, WeightedGraph};
use num_rational::Rational64;
use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

const EXIT_OK: u8 = 0;
const EXIT_VALIDATION: u8 = 1;
const EXIT_NUMERICAL: u8 = 2;
const EXIT_USAGE: u8 = 64;

#[derive(Parser)]
#[command(
    name = "cuspec",
    about = "Spectra of magnetic Laplacians on weighted graphs: holonomy, products, discrete cusps",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct GraphInput {
    /// Graph document (JSON)
    #[arg(long)]
    graph: PathBuf,
    /// Add flux 2π·p/q to every fundamental cycle (on its non-tree edge)
    #[arg(long, value_parser = parse_rational)]
    flux: Option<Rational64>,
}

#[derive(Args)]
struct CuspParams {
    /// Truncation depth N of the base half-line (vertices 0..=N)
    #[arg(long)]
    depth: usize,
    /// Fiber cycle size
    #[arg(long, default_value_t = 3)]
    fiber: usize,
    /// Coupling κ as a rational p/q; the fiber flux is κ·2π/3
    #[arg(long, value_parser = parse_rational, default_value = "1/1")]
    kappa: Rational64,
}

#[derive(Subcommand)]
enum Command {
    /// Eigenvalues of the magnetic Laplacian (CSV: index,eigenvalue)
    Spectrum {
        #[command(flatten)]
        input: GraphInput,
        /// Output CSV path (stdout when omitted)
        #[arg(long)]
        output: Option<PathBuf>,
        /// Also dump eigenvectors (binary, column-major complex doubles)
        #[arg(long)]
        eigenvectors: Option<PathBuf>,
    },
    /// Fundamental-cycle holonomies (CSV)
    Holonomy {
        #[command(flatten)]
        input: GraphInput,
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Find a gauge σ carrying the potential of --other onto --graph's
    Gauge {
        #[command(flatten)]
        input: GraphInput,
        /// Second graph document with the same underlying graph
        #[arg(long)]
        other: PathBuf,
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Coupling period ν: the couplings λ with trivial holonomy of λθ form νZ
    Nu {
        #[command(flatten)]
        input: GraphInput,
    },
    /// Product of two graphs (emits a graph document)
    Product {
        /// First factor document
        #[arg(long)]
        g1: PathBuf,
        /// Second factor document
        #[arg(long)]
        g2: PathBuf,
        /// Cartesian product (default is product through --index)
        #[arg(long, conflicts_with = "index")]
        cartesian: bool,
        /// Comma-separated fiber vertex ids for the through-product
        #[arg(long, value_delimiter = ',')]
        index: Vec<String>,
        #[arg(long)]
        output: PathBuf,
    },
    /// Build the exponential-cusp example (emits a graph document)
    CuspBuild {
        #[command(flatten)]
        params: CuspParams,
        #[arg(long)]
        output: PathBuf,
    },
    /// Check the discrete-cusp hypotheses over a truncation family
    CuspCheck {
        #[command(flatten)]
        params: CuspParams,
        /// Additional depths forming the truncation family
        #[arg(long, value_delimiter = ',')]
        depths: Vec<usize>,
    },
    /// Verify the keystone form inequalities
    Keystone {
        #[command(flatten)]
        params: CuspParams,
        /// PSD witness tolerance
        #[arg(long, default_value_t = 1e-9)]
        tol: f64,
    },
    /// Eigenvalue sandwich and ratio against the model operator (CSV)
    Asymptotics {
        #[command(flatten)]
        params: CuspParams,
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Counting-function sandwich over the geometric grid λ = e^k (CSV)
    Counting {
        #[command(flatten)]
        params: CuspParams,
        /// Largest exponent k of the grid
        #[arg(long, default_value_t = 30)]
        kmax: u32,
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Jacobi reduction of the low-energy block (κ = 0)
    Jacobi {
        /// Truncation depth N
        #[arg(long, default_value_t = 30)]
        depth: usize,
        /// Fiber cycle size
        #[arg(long, default_value_t = 3)]
        fiber: usize,
    },
    /// F(α) for the fiber, or solve F(α) = a
    Falpha {
        /// Fiber cycle size
        #[arg(long, default_value_t = 3)]
        fiber: usize,
        /// Coupling κ as p/q (fiber flux κ·2π/3)
        #[arg(long, value_parser = parse_rational, default_value = "1/1")]
        kappa: Rational64,
        /// Evaluate F at this α
        #[arg(long, conflicts_with = "solve")]
        alpha: Option<f64>,
        /// Solve F(α) = a for the smallest α
        #[arg(long)]
        solve: Option<f64>,
        /// Upper end of the α search interval
        #[arg(long, default_value_t = 8.0)]
        alpha_max: f64,
    },
    /// Rebuild base weights so #{x : 1/m̃(x) ≤ λ} = ⌊λ^p⌋ + 1
    BuildWeights {
        /// Base graph document
        #[arg(long)]
        graph: PathBuf,
        /// Exponent p of the target f(λ) = λ^p
        #[arg(long, default_value_t = 2.0)]
        power: f64,
        #[arg(long)]
        output: PathBuf,
    },
    /// Propagate a wave packet and record window occupation (CSV)
    Evolve {
        #[command(flatten)]
        params: CuspParams,
        /// Sector generating the dynamics
        #[arg(long, default_value = "full")]
        sector: String,
        /// Base level carrying the initial normalized delta
        #[arg(long, default_value_t = 0)]
        start: usize,
        /// Window of base levels "a..b" (inclusive)
        #[arg(long, default_value = "0..20")]
        window: String,
        #[arg(long, default_value_t = 200.0)]
        tmax: f64,
        #[arg(long, default_value_t = 400)]
        steps: usize,
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Weighted girth and radius of injectivity
    Girth {
        /// Graph document
        #[arg(long)]
        graph: PathBuf,
        /// Per-vertex CSV output path
        #[arg(long)]
        output: Option<PathBuf>,
    },
}

fn parse_rational(s: &str) -> Result<Rational64, String> {
    let (p, q) = match s.split_once('/') {
        Some((p, q)) => (p, q),
        None => (s, "1"),
    };
    let p: i64 = p.trim().parse().map_err(|_| format!("bad numerator in {s:?}"))?;
    let q: i64 = q.trim().parse().map_err(|_| format!("bad denominator in {s:?}"))?;
    if q <= 0 {
        return Err(format!("denominator must be positive in {s:?}"));
    }
    Ok(Rational64::new(p, q))
}

/// Add flux 2π·r to every fundamental cycle by shifting its non-tree edge.
fn apply_flux(
    g: &WeightedGraph,
    theta: &MagneticPotential,
    basis: &CycleBasis,
    r: Rational64,
) -> Result<MagneticPotential, Error> {
    let mut phases: Vec<Phase> = theta.phases().to_vec();
    for (i, &k) in basis.non_tree_edges.iter().enumerate() {
        let e = &g.edges()[k];
        // the cycle traverses the non-tree edge in one orientation; add
        // the flux so the traversal gains +2π·r
        let along = basis.cycles[i].edges.iter().any(|&(x, y)| x == e.u && y == e.v);
        let add = Phase::TwoPi(if along { r } else { -r });
        phases[k] = phases[k].add(add);
    }
    MagneticPotential::from_phases(g, phases)
}

fn load_with_flux(input: &GraphInput) -> Result<(WeightedGraph, MagneticPotential), Error> {
    let (g, theta) = load_graph(&input.graph)?;
    match input.flux {
        Some(r) => {
            let basis = cycle_basis(&g);
            let theta = apply_flux(&g, &theta, &basis, r)?;
            Ok((g, theta))
        }
        None => Ok((g, theta)),
    }
}

fn out_writer(path: &Option<PathBuf>) -> std::io::Result<Box<dyn Write>> {
    match path {
        Some(p) => Ok(Box::new(std::fs::File::create(p)?)),
        None => Ok(Box::new(std::io::stdout().lock())),
    }
}

fn parse_window(s: &str) -> Result<(usize, usize), Error> {
    let (a, b) = s
        .split_once("..")
        .ok_or_else(|| Error::BadParameters(format!("window {s:?} is not of the form a..b")))?;
    let a: usize = a
        .trim()
        .parse()
        .map_err(|_| Error::BadParameters(format!("bad window start in {s:?}")))?;
    let b: usize = b
        .trim()
        .parse()
        .map_err(|_| Error::BadParameters(format!("bad window end in {s:?}")))?;
    if b < a {
        return Err(Error::BadParameters(format!("empty window {s:?}")));
    }
    Ok((a, b))
}

fn run(cli: Cli) -> Result<u8, Error> {
    match cli.command {
        Command::Spectrum { input, output, eigenvectors } => {
            let (g, theta) = load_with_flux(&input)?;
            let h = assemble_laplacian(&g, &theta)?;
            if let Some(bin_path) = eigenvectors {
                let spec = h.eigensolve()?;
                write_spectrum_csv(out_writer(&output)?, spec.eigenvalues())?;
                let mut f = std::fs::File::create(bin_path)?;
                write_eigenvectors_bin(&mut f, &spec)?;
            } else {
                let vals = h.eigenvalues()?;
                write_spectrum_csv(out_writer(&output)?, &vals)?;
            }
            Ok(EXIT_OK)
        }
        Command::Holonomy { input, output } => {
            let (g, theta) = load_with_flux(&input)?;
            let basis = cycle_basis(&g);
            let hol = holonomy_vector(&g, &theta, &basis)?;
            let mut w = out_writer(&output)?;
            writeln!(
                w,
                "cycle_index,non_tree_edge,flux_radians,flux_rational_p,flux_rational_q"
            )?;
            for (i, (h, &k)) in hol.iter().zip(&basis.non_tree_edges).enumerate() {
                let e = &g.edges()[k];
                let (p, q) = match h.rational() {
                    Some(r) => (r.numer().to_string(), r.denom().to_string()),
                    None => (String::new(), String::new()),
                };
                writeln!(
                    w,
                    "{},{}-{},{},{},{}",
                    i,
                    g.id(e.u),
                    g.id(e.v),
                    fmt_f64(h.radians_value()),
                    p,
                    q
                )?;
            }
            Ok(EXIT_OK)
        }
        Command::Gauge { input, other, output } => {
            let (g, theta1) = load_with_flux(&input)?;
            let (g2, theta2) = load_graph(&other)?;
            if g2.vertex_count() != g.vertex_count() || g2.edge_count() != g.edge_count() {
                return Err(Error::PotentialGraphMismatch);
            }
            let gauge = find_gauge(&g, &theta1, &theta2)?;
            let mut w = out_writer(&output)?;
            writeln!(w, "vertex,sigma")?;
            for (x, s) in gauge.sigma.iter().enumerate() {
                writeln!(w, "{},{}", g.id(x), fmt_f64(*s))?;
            }
            Ok(EXIT_OK)
        }
        Command::Nu { input } => {
            let (g, theta) = load_with_flux(&input)?;
            let basis = cycle_basis(&g);
            match coupling_period(&g, &theta, &basis)? {
                CouplingPeriod::Trivial => println!("nu = trivial (every coupling kills the holonomy)"),
                CouplingPeriod::Zero => println!("nu = 0 (only the zero coupling)"),
                CouplingPeriod::Period(r) => {
                    if r.is_integer() {
                        println!("nu = {}", r.numer());
                    } else {
                        println!("nu = {}/{}", r.numer(), r.denom());
                    }
                }
            }
            Ok(EXIT_OK)
        }
        Command::Product { g1, g2, cartesian, index, output } => {
            let (a, ta) = load_graph(&g1)?;
            let (b, tb) = load_graph(&g2)?;
            let product = if cartesian {
                cartesian_product(&a, &ta, &b, &tb)?
            } else {
                let idx: Vec<usize> = index
                    .iter()
                    .map(|id| b.vertex(id))
                    .collect::<Result<_, _>>()?;
                product_through(&a, &ta, &b, &tb, &idx)?
            };
            save_graph(&output, &product.graph, &product.theta)?;
            Ok(EXIT_OK)
        }
        Command::CuspBuild { params, output } => {
            let p = build_cusp_example(params.depth, params.fiber, params.kappa)?;
            save_graph(&output, &p.graph, &p.theta)?;
            Ok(EXIT_OK)
        }
        Command::CuspCheck { params, depths } => {
            let mut all_depths = depths;
            all_depths.push(params.depth);
            all_depths.sort_unstable();
            all_depths.dedup();
            let members: Result<Vec<_>, _> = all_depths
                .iter()
                .map(|&d| build_cusp_example(d, params.fiber, params.kappa))
                .collect();
            let members = members?;
            let refs: Vec<_> = members.iter().collect();
            let bound = (0.5f64).exp() + (-0.5f64).exp();
            let report = check_discrete_cusp(&refs, bound, 1e-3)?;
            println!(
                "H1 (base measure decays): {} (monotone: {}, deepest min m1 = {:.3e})",
                report.h1_ok, report.h1_monotone_decay, report.h1_inf_measure
            );
            println!("H2 (finite fiber): true (|V2| = {})", report.h2_fiber_size);
            println!(
                "H3 (bounded base degree): {} (sup = {:.12} <= {:.12})",
                report.h3_ok, report.h3_sup_degree, report.h3_bound
            );
            Ok(if report.all_pass { EXIT_OK } else { EXIT_NUMERICAL })
        }
        Command::Keystone { params, tol } => {
            let c = CuspProduct::new(build_cusp_example(params.depth, params.fiber, params.kappa)?)?;
            let report = verify_keystone(&c, tol)?;
            println!("M = {}", fmt_f64(report.m_const));
            if report.c_degenerate {
                println!("c = 0 (degenerate: fiber Laplacian has kernel; lower bound is trivial)");
            } else {
                println!("c = {}", fmt_f64(report.c));
            }
            for check in &report.checks {
                println!(
                    "{}: {} (witness {})",
                    check.name,
                    if check.order.holds { "ok" } else { "VIOLATED" },
                    fmt_f64(check.order.witness)
                );
            }
            Ok(if report.all_pass { EXIT_OK } else { EXIT_NUMERICAL })
        }
        Command::Asymptotics { params, output } => {
            let c = CuspProduct::new(build_cusp_example(params.depth, params.fiber, params.kappa)?)?;
            let report = eigen_ratio_series(&c)?;
            write_asymptotics_csv(out_writer(&output)?, &report)?;
            Ok(if report.all_sandwich_ok { EXIT_OK } else { EXIT_NUMERICAL })
        }
        Command::Counting { params, kmax, output } => {
            let c = CuspProduct::new(build_cusp_example(params.depth, params.fiber, params.kappa)?)?;
            let grid: Vec<f64> = (1..=kmax).map(|k| (k as f64).exp()).collect();
            let report = counting_sandwich(&c, &grid)?;
            write_counting_csv(out_writer(&output)?, &report)?;
            Ok(if report.all_sandwich_ok { EXIT_OK } else { EXIT_NUMERICAL })
        }
        Command::Jacobi { depth, fiber } => {
            let c = CuspProduct::new(build_cusp_example(depth, fiber, Rational64::new(0, 1))?)?;
            let report = jacobi_reduction(&c)?;
            println!("offdiagonal max deviation from -1: {}", fmt_f64(report.offdiag_max_dev));
            println!(
                "interior diagonal max deviation from e^(1/2)+e^(-1/2): {}",
                fmt_f64(report.interior_diag_max_dev)
            );
            println!("site-0 diagonal: {}", fmt_f64(report.site0_measured));
            println!("note: {}", report.note);
            let ok = report.offdiag_max_dev < 1e-10 && report.interior_diag_max_dev < 1e-10;
            Ok(if ok { EXIT_OK } else { EXIT_NUMERICAL })
        }
        Command::Falpha { fiber, kappa, alpha, solve, alpha_max } => {
            let p = build_cusp_example(1, fiber, kappa)?;
            let c = CuspProduct::new(p)?;
            let eigs = c.fiber_spectrum.eigenvalues().to_vec();
            match (alpha, solve) {
                (Some(a), None) => {
                    let v = f_alpha(&c.product.g2, &eigs, a)?;
                    println!("F({a}) = {}", fmt_f64(v));
                }
                (None, Some(target)) => {
                    let a = solve_alpha(&c.product.g2, &eigs, target, alpha_max)?;
                    println!("alpha = {}", fmt_f64(a));
                }
                _ => {
                    return Err(Error::BadParameters(
                        "pass exactly one of --alpha or --solve".to_owned(),
                    ))
                }
            }
            Ok(EXIT_OK)
        }
        Command::BuildWeights { graph, power, output } => {
            if power <= 0.0 || !power.is_finite() {
                return Err(Error::BadParameters("--power must be positive".to_owned()));
            }
            let (g, theta) = load_graph(&graph)?;
            let rebuilt = build_weights_for_f(&g, &|l: f64| l.powf(power))?;
            save_graph(&output, &rebuilt, &theta)?;
            Ok(EXIT_OK)
        }
        Command::Evolve { params, sector, start, window, tmax, steps, output } => {
            let n1 = params.depth + 1;
            let n2 = params.fiber;
            let sector = match sector.as_str() {
                "le" => Sector::Le,
                "he" => Sector::He,
                "full" => Sector::Full,
                other => {
                    return Err(Error::BadParameters(format!(
                        "unknown sector {other:?} (expected le, he, or full)"
                    )))
                }
            };
            if start >= n1 {
                return Err(Error::BadParameters(format!(
                    "start level {start} exceeds depth {}",
                    params.depth
                )));
            }
            let (wa, wb) = parse_window(&window)?;
            // the low-energy sector is a single copy of the base Laplacian;
            // run it in its unit-measure Jacobi picture, which also covers
            // depths where the e^-j measures underflow
            let op = if matches!(sector, Sector::Le) {
                if !(params.kappa / Rational64::from_integer(3)).is_integer() {
                    return Err(Error::BadParameters(
                        "low-energy sector is empty unless the fiber flux is a \
                         multiple of 2pi (kappa in 3Z)"
                            .to_owned(),
                    ));
                }
                le_jacobi_operator(params.depth)
            } else {
                let c = CuspProduct::new(build_cusp_example(
                    params.depth,
                    params.fiber,
                    params.kappa,
                )?)?;
                sector_operator(&c, sector)?
            };
            let dim = op.dim();
            // sector bases are level-major within each fiber mode, so a
            // base level maps to every index congruent to it mod n1 (le/he)
            // or to the n2 fiber copies at that level (full)
            let level_indices = |level: usize| -> Vec<usize> {
                if dim % n1 == 0 && dim != n1 * n2 {
                    (0..dim / n1).map(|i| i * n1 + level).collect()
                } else if dim == n1 * n2 {
                    (0..n2).map(|y| level * n2 + y).collect()
                } else {
                    vec![level]
                }
            };
            let start_idx = level_indices(start)[0];
            let mut v = vec![num_complex::Complex64::new(0.0, 0.0); dim];
            v[start_idx] = num_complex::Complex64::new(
                1.0 / op.measure()[start_idx].sqrt(),
                0.0,
            );
            let mut window_idx = Vec::new();
            for level in wa..=wb.min(n1 - 1) {
                window_idx.extend(level_indices(level));
            }
            let spec = op.eigensolve()?;
            let trace = dynamics_experiment(&spec, &v, &window_idx, tmax, steps);
            write_occupation_csv(out_writer(&output)?, &trace)?;
            Ok(EXIT_OK)
        }
        Command::Girth { graph, output } => {
            let (g, _) = load_graph(&graph)?;
            let report = g.girth_and_radius();
            println!("girth = {}", report.girth);
            println!("rad = {}", report.rad);
            if let Some(path) = output {
                let mut w = std::fs::File::create(path)?;
                writeln!(w, "vertex,girth,rad")?;
                for x in 0..g.vertex_count() {
                    writeln!(
                        w,
                        "{},{},{}",
                        g.id(x),
                        ext_csv(&report.vertex_girth[x]),
                        ext_csv(&report.vertex_rad[x])
                    )?;
                }
            }
            Ok(EXIT_OK)
        }
    }
}

fn ext_csv(x: &ExtReal) -> String {
    match x {
        ExtReal::Finite(v) => fmt_f64(*v),
        ExtReal::Infinite => "inf".to_owned(),
    }
}

fn main() -> ExitCode {
    // CUSPEC_THREADS caps internal parallelism; the current implementation
    // is single-threaded, so any positive value is accepted as-is
    if let Ok(v) = std::env::var("CUSPEC_THREADS") {
        if v.parse::<usize>().map(|n| n == 0).unwrap_or(true) {
            eprintln!("error: CUSPEC_THREADS must be a positive integer");
            return ExitCode::from(EXIT_VALIDATION);
        }
    }
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) => {
            print!("{e}");
            return ExitCode::from(EXIT_OK);
        }
        Err(e) => {
            eprint!("{e}");
            return ExitCode::from(EXIT_USAGE);
        }
    };
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(EXIT_VALIDATION)
        }
    }
}
