//! `obstakl`: command-line harness for the obstacle-problem solvers.
//!
//! Subcommands:
//! * `solve classical|thin|fractional` — one discrete solve, with optional
//!   text dumps of the solution vectors;
//! * `study --config FILE [--check]` — convergence studies from a flat
//!   key = value config, or the built-in pass/fail suite;
//! * `mesh info|graded` — mesh diagnostics and dumps.
//!
//! Exit codes: 0 success, 2 usage error, 3 solver non-convergence,
//! 4 failed checks in `--check` mode.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::Context;
use clap::{Args, Parser, Subcommand};

use obstakl_core::classical::{benchmark_1d, benchmark_2d, solve_classical};
use obstakl_core::fractional::{
    build_obstacle_system, build_space, BaseDomain, FractionalConfig,
};
use obstakl_core::mesh::{
    graded_partition, structured_triangle_mesh, uniform_interval_mesh, Rect,
};
use obstakl_core::study::{parse_config, run_study};
use obstakl_core::thin::{solve_thin, ThinProblem};
use obstakl_core::vi::{
    kkt_report, obsvec_string, PdasOptions, PsorOptions, SolverChoice, ViSolution,
    ACTIVE_TIE_TOL,
};
use obstakl_core::{Error as CoreError, Result as CoreResult};

#[derive(Parser)]
#[command(name = "obstakl", version, about = "Obstacle-problem finite element harness")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve a single discrete instance
    Solve {
        #[command(subcommand)]
        problem: SolveCommand,
    },
    /// Run convergence studies from a config file
    Study {
        /// Flat `key = value` config with one `[section]` per problem
        #[arg(long)]
        config: PathBuf,
        /// Run the built-in acceptance checks (pinned thresholds) instead
        /// of the configured studies; exits 4 on any failure
        #[arg(long)]
        check: bool,
    },
    /// Mesh diagnostics
    Mesh {
        #[command(subcommand)]
        what: MeshCommand,
    },
}

#[derive(Args)]
struct SolveOpts {
    /// Refinement level: the mesh parameter is 2^level
    #[arg(long)]
    level: u32,
    /// psor | pdas (fractional also accepts cg for --linear runs)
    #[arg(long, default_value = "psor")]
    solver: String,
    /// Iteration tolerance
    #[arg(long, default_value_t = 1e-10)]
    tol: f64,
    /// Cap on solver iterations (relaxation sweeps / active-set steps)
    #[arg(long, default_value_t = 200_000)]
    max_iter: usize,
    /// Write dumps as `<prefix>solution.vec` etc. instead of stdout
    #[arg(long)]
    dump_prefix: Option<PathBuf>,
}

#[derive(Subcommand)]
enum SolveCommand {
    /// Classical obstacle problem benchmark
    Classical {
        /// 1 (interval) or 2 (unit square)
        #[arg(long, default_value_t = 1)]
        dim: u32,
        #[command(flatten)]
        opts: SolveOpts,
    },
    /// Boundary (Signorini) obstacle problem benchmark
    Thin {
        #[command(flatten)]
        opts: SolveOpts,
    },
    /// Spectral fractional problem on the unit interval
    Fractional {
        /// Fractional power in (0, 1)
        #[arg(long)]
        s: f64,
        /// Axial grading exponent (default: 1.1 * 3/(2s))
        #[arg(long)]
        gamma: Option<f64>,
        /// Truncation height (default: selected from the dof count)
        #[arg(long = "Y")]
        height: Option<f64>,
        /// Solve the linear problem (load sin(pi x)) instead of the
        /// obstacle benchmark
        #[arg(long)]
        linear: bool,
        #[command(flatten)]
        opts: SolveOpts,
    },
}

#[derive(Subcommand)]
enum MeshCommand {
    /// Counts and quality measures of a generated mesh
    Info {
        #[arg(long, default_value_t = 1)]
        dim: u32,
        /// Cells (1D) or cells per side (2D)
        #[arg(long)]
        n: usize,
        /// Write an OBSMESH v1 dump to this path
        #[arg(long)]
        dump: Option<PathBuf>,
    },
    /// Nodes and interval ratios of a graded axial partition
    Graded {
        #[arg(long)]
        height: f64,
        #[arg(long)]
        intervals: usize,
        #[arg(long)]
        gamma: f64,
    },
}

fn main() {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => std::process::exit(code),
        Err(err) => {
            eprintln!("error: {err:#}");
            std::process::exit(exit_code(&err));
        }
    }
}

fn exit_code(err: &anyhow::Error) -> i32 {
    match err.downcast_ref::<CoreError>() {
        Some(CoreError::NonConvergence { .. }) => 3,
        Some(CoreError::InvalidInput(_)) | Some(CoreError::Format(_)) => 2,
        _ => 1,
    }
}

fn run(cli: Cli) -> anyhow::Result<i32> {
    match cli.command {
        Command::Solve { problem } => run_solve(problem).map(|()| 0),
        Command::Study { config, check } => run_study_command(&config, check),
        Command::Mesh { what } => run_mesh(what).map(|()| 0),
    }
}

fn classical_solver(opts: &SolveOpts, h: f64) -> CoreResult<SolverChoice> {
    match opts.solver.as_str() {
        "psor" => Ok(SolverChoice::Psor(PsorOptions {
            omega: 2.0 / (1.0 + (std::f64::consts::PI * h).sin()),
            tol: opts.tol,
            max_iter: opts.max_iter,
        })),
        "pdas" => Ok(SolverChoice::Pdas(PdasOptions {
            max_iter: opts.max_iter.min(1000),
            ..Default::default()
        })),
        other => Err(CoreError::InvalidInput(format!(
            "unknown solver '{other}' (expected psor or pdas)"
        ))),
    }
}

fn kkt_line(sol: &ViSolution) -> String {
    format!(
        "kkt infeasibility={:e} stationarity={:e} complementarity={:e} max={:e} \
         iterations={} active={} solver={}",
        sol.kkt.infeasibility,
        sol.kkt.stationarity,
        sol.kkt.complementarity,
        sol.kkt_residual(),
        sol.iterations,
        sol.active_set.len(),
        sol.solver.id()
    )
}

fn emit_vector(prefix: &Option<PathBuf>, stem: &str, values: &[f64]) -> anyhow::Result<()> {
    let text = obsvec_string(values);
    match prefix {
        Some(p) => {
            let path = sibling(p, stem);
            fs::write(&path, text).with_context(|| format!("writing {}", path.display()))?;
            println!("wrote {}", path.display());
        }
        None => print!("{text}"),
    }
    Ok(())
}

fn sibling(prefix: &Path, stem: &str) -> PathBuf {
    let mut name = prefix.file_name().unwrap_or_default().to_os_string();
    name.push(stem);
    prefix.with_file_name(name)
}

fn run_solve(problem: SolveCommand) -> anyhow::Result<()> {
    match problem {
        SolveCommand::Classical { dim, opts } => {
            let n = 1usize << opts.level;
            let bench = match dim {
                1 => benchmark_1d(),
                2 => benchmark_2d(),
                other => {
                    return Err(CoreError::InvalidInput(format!(
                        "dimension must be 1 or 2, got {other}"
                    ))
                    .into())
                }
            };
            let solver = classical_solver(&opts, 1.0 / n as f64)?;
            let (sol, space) = solve_classical(&bench, n, &solver)?;
            emit_vector(&opts.dump_prefix, "solution.vec", &space.scatter(&sol.u))?;
            println!("{}", kkt_line(&sol));
            Ok(())
        }
        SolveCommand::Thin { opts } => {
            let n = 1usize << opts.level;
            let solver = classical_solver(&opts, 1.0 / n as f64)?;
            let (sol, space) = solve_thin(&ThinProblem::benchmark(), n, &solver)?;
            emit_vector(&opts.dump_prefix, "solution.vec", &space.scatter(&sol.u))?;
            println!("{}", kkt_line(&sol));
            Ok(())
        }
        SolveCommand::Fractional {
            s,
            gamma,
            height,
            linear,
            opts,
        } => run_solve_fractional(s, gamma, height, linear, opts),
    }
}

fn run_solve_fractional(
    s: f64,
    gamma: Option<f64>,
    height: Option<f64>,
    linear: bool,
    opts: SolveOpts,
) -> anyhow::Result<()> {
    let m = 1usize << opts.level;
    let gamma = gamma.unwrap_or_else(|| FractionalConfig::default_gamma(s));
    let base = BaseDomain::UnitInterval;
    let cfg = match height {
        Some(y) => FractionalConfig::new(s, gamma, y, base.lambda1())?,
        None => FractionalConfig::with_auto_height(s, gamma, base, m)?,
    };
    let space = build_space(&cfg, base, m)?;
    let pi = std::f64::consts::PI;

    let (reduced, kkt, iterations, solver_id): (Vec<f64>, _, usize, &str) = if linear {
        let op = obstakl_core::assembly::assemble_weighted_stiffness(&space, cfg.alpha)?;
        let rhs = obstakl_core::assembly::assemble_trace_load(&space, cfg.d_s, |p| {
            (pi * p[0]).sin()
        })?;
        match opts.solver.as_str() {
            "cg" => {
                let (u, iters) = obstakl_core::sparse::cg_solve(
                    &op,
                    &rhs,
                    None,
                    None,
                    &obstakl_core::sparse::CgOptions {
                        max_iter: opts.max_iter.max(10_000),
                        ..Default::default()
                    },
                )?;
                let sys = obstakl_core::vi::ObstacleSystem::unconstrained(op, rhs)?;
                let report = kkt_report(&sys, &u, ACTIVE_TIE_TOL);
                (u, report, iters, "cg")
            }
            "psor" | "pdas" => {
                let sys = obstakl_core::vi::ObstacleSystem::unconstrained(op, rhs)?;
                let sol = classical_solver(&opts, 0.5 / m as f64)?.solve(&sys)?;
                let id = sol.solver.id();
                (sol.u, sol.kkt, sol.iterations, id)
            }
            other => {
                return Err(CoreError::InvalidInput(format!(
                    "unknown solver '{other}' (expected psor, pdas or cg)"
                ))
                .into())
            }
        }
    } else {
        if opts.solver == "cg" {
            return Err(CoreError::InvalidInput(
                "cg handles linear runs only; obstacle runs need psor or pdas".into(),
            )
            .into());
        }
        let sys = build_obstacle_system(&cfg, &space, |_| 0.0, |p| {
            (0.2 * (pi * p[0]).sin()).min(0.15)
        })?;
        let sol = classical_solver(&opts, 0.5 / m as f64)?.solve(&sys)?;
        let id = sol.solver.id();
        (sol.u, sol.kkt, sol.iterations, id)
    };

    let values = space.scatter(&reduced);
    let trace = space.trace_values(&values);
    let energy = obstakl_core::assembly::weighted::weighted_energy_sq(
        space.mesh(),
        cfg.alpha,
        &values,
        0.0,
    )
    .max(0.0)
    .sqrt();
    emit_vector(&opts.dump_prefix, "trace.vec", &trace)?;
    let manifest = format!(
        "s={}\nalpha={}\nd_s={}\nY={}\ngamma={}\nsigma_y={:e}\nM={}\nndofs={}\nenergy={:e}\n\
         kkt_infeasibility={:e}\nkkt_stationarity={:e}\nkkt_complementarity={:e}\n\
         iterations={}\nsolver={}\n",
        cfg.s,
        cfg.alpha,
        cfg.d_s,
        cfg.height,
        cfg.gamma,
        space.mesh().axial.neighbor_ratio_bound(),
        m,
        space.n_dofs(),
        energy,
        kkt.infeasibility,
        kkt.stationarity,
        kkt.complementarity,
        iterations,
        solver_id,
    );
    if let Some(p) = &opts.dump_prefix {
        let path = sibling(p, "manifest.txt");
        fs::write(&path, &manifest).with_context(|| format!("writing {}", path.display()))?;
        println!("wrote {}", path.display());
    }
    print!("{manifest}");
    Ok(())
}

fn run_study_command(config: &PathBuf, check: bool) -> anyhow::Result<i32> {
    let text = fs::read_to_string(config)
        .with_context(|| format!("reading config {}", config.display()))
        .map_err(|e| match e.downcast::<std::io::Error>() {
            Ok(io) => CoreError::InvalidInput(format!("config: {io}")).into(),
            Err(other) => other,
        })?;
    let specs = parse_config(&text)?;
    if check {
        // the pinned acceptance suite; the config selects nothing here, it
        // is only validated
        let mut all_ok = true;
        for outcome in obstakl_core::acceptance::run_all()? {
            println!("{}", outcome.line());
            all_ok &= outcome.passed;
        }
        return Ok(if all_ok { 0 } else { 4 });
    }
    for spec in &specs {
        let outcome = run_study(spec)?;
        println!("study {}: {} levels", outcome.spec_name, outcome.records.len());
        for r in &outcome.records {
            println!(
                "  level {}: size {:e} err_h1 {:e} err_l2 {:e} err_linf {:e} kkt {:e}",
                r.level, r.size, r.err_h1, r.err_l2, r.err_linf, r.kkt
            );
        }
        for fit in &outcome.fits {
            println!(
                "  fit {}: slope {:.4} (R^2 {:.5})",
                fit.name, fit.slope, fit.r_squared
            );
        }
        if let Some(path) = &spec.out {
            println!("  csv written to {}", path.display());
        }
    }
    Ok(0)
}

fn run_mesh(what: MeshCommand) -> anyhow::Result<()> {
    match what {
        MeshCommand::Info { dim, n, dump } => {
            let mesh = match dim {
                1 => uniform_interval_mesh(0.0, 1.0, n)?,
                2 => structured_triangle_mesh(Rect::unit_square(), n)?,
                other => {
                    return Err(CoreError::InvalidInput(format!(
                        "dimension must be 1 or 2, got {other}"
                    ))
                    .into())
                }
            };
            println!("dim={dim}");
            println!("vertices={}", mesh.n_vertices());
            println!("cells={}", mesh.n_cells());
            println!("boundary={}", mesh.boundary_nodes().len());
            println!("h_max={:e}", mesh.max_diameter());
            let sigma = (0..mesh.n_cells())
                .map(|c| mesh.shape_coefficient(c))
                .fold(0.0_f64, f64::max);
            println!("sigma_max={sigma:e}");
            println!("measure={:e}", mesh.total_measure());
            let (acute, _) = obstakl_core::mesh::is_weakly_acute(&mesh)?;
            println!("weakly_acute={acute}");
            if let Some(path) = dump {
                fs::write(&path, mesh.to_obsmesh_string())
                    .with_context(|| format!("writing {}", path.display()))?;
                println!("wrote {}", path.display());
            }
            Ok(())
        }
        MeshCommand::Graded {
            height,
            intervals,
            gamma,
        } => {
            let part = graded_partition(height, intervals, gamma)?;
            println!("height={height:e}");
            println!("intervals={intervals}");
            println!("gamma={gamma:e}");
            println!("sigma_y={:e}", part.neighbor_ratio_bound());
            println!("first_interval={:e}", part.interval_length(0));
            println!(
                "last_interval={:e}",
                part.interval_length(intervals - 1)
            );
            Ok(())
        }
    }
}
