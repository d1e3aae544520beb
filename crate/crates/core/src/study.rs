//! Convergence-study harness: run a problem over a ladder of refinement
//! levels, record error norms and certificates, fit rates in log-log, and
//! emit a CSV table. Runs are deterministic for a given spec (fixed
//! iteration orders, no randomness); the wall-time column is the one
//! exception.

use std::io::Write as _;
use std::path::PathBuf;
use std::time::Instant;

use crate::assembly::weighted::prolong_to;
use crate::assembly::{
    energy_norm_error, energy_seminorm_sq, h1_norm_sq, interpolate_nodal, l2_error, l2_norm_sq,
    linf_error, prolong_nodal, FeSpace,
};
use crate::classical::{
    benchmark_1d, benchmark_2d, calibrate_c_star, delta_for_level, extract_free_boundary,
    interface_metrics, solve_classical,
};
use crate::error::{Error, Result};
use crate::fmt::efmt;
use crate::fractional::{
    build_obstacle_system, build_space, choose_truncation, mode_energy_error, spectral_mode_trace,
    BaseDomain, FractionalConfig,
};
use crate::thin::{build_thin_system, ThinProblem};
use crate::vi::{solve_pdas_from, PdasOptions, PsorOptions, SolverChoice, ViSolution};

/// Problems the harness can drive.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ProblemId {
    Classical1d,
    Classical2d,
    Thin,
    FractionalLinear,
    FractionalObstacle,
}

impl ProblemId {
    pub fn parse(name: &str) -> Result<Self> {
        match name {
            "classical1d" => Ok(Self::Classical1d),
            "classical2d" => Ok(Self::Classical2d),
            "thin" => Ok(Self::Thin),
            "fractional-linear" => Ok(Self::FractionalLinear),
            "fractional-obstacle" => Ok(Self::FractionalObstacle),
            other => Err(Error::InvalidInput(format!("unknown problem '{other}'"))),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Self::Classical1d => "classical1d",
            Self::Classical2d => "classical2d",
            Self::Thin => "thin",
            Self::FractionalLinear => "fractional-linear",
            Self::FractionalObstacle => "fractional-obstacle",
        }
    }
}

/// Solver preference; `Auto` picks the natural method per problem
/// (relaxation with mesh-adapted omega on the structured meshes, the
/// active-set method on graded cylinders, plain CG for linear runs).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolverPref {
    Auto,
    Psor,
    Pdas,
    Cg,
}

impl SolverPref {
    pub fn parse(name: &str) -> Result<Self> {
        match name {
            "auto" => Ok(Self::Auto),
            "psor" => Ok(Self::Psor),
            "pdas" => Ok(Self::Pdas),
            "cg" => Ok(Self::Cg),
            other => Err(Error::InvalidInput(format!("unknown solver '{other}'"))),
        }
    }
}

/// One study: problem, refinement levels (mesh parameter = 2^level), and
/// tolerances/knobs.
#[derive(Debug, Clone)]
pub struct StudySpec {
    pub problem: ProblemId,
    pub levels: Vec<u32>,
    pub solver: SolverPref,
    /// Iteration tolerance handed to the solvers.
    pub tol: f64,
    /// Fractional power (fractional problems only).
    pub s: f64,
    /// Axial grading exponent; defaults to 1.1 * 3/(2s).
    pub gamma: Option<f64>,
    /// Fixed truncation height; default selects it from the dof count.
    pub height: Option<f64>,
    /// Free-boundary threshold constant; default calibrates it on the two
    /// coarsest levels.
    pub c_star: Option<f64>,
    /// Compact-subset margin for interface metrics, in units of h.
    pub margin_factor: f64,
    /// CSV output path.
    pub out: Option<PathBuf>,
}

impl StudySpec {
    pub fn new(problem: ProblemId, levels: Vec<u32>) -> Self {
        Self {
            problem,
            levels,
            solver: SolverPref::Auto,
            tol: 1e-12,
            s: 0.5,
            gamma: None,
            height: None,
            c_star: None,
            margin_factor: 2.0,
            out: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.levels.is_empty() {
            return Err(Error::InvalidInput("study needs at least one level".into()));
        }
        if self.levels.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::InvalidInput(
                "levels must be strictly increasing".into(),
            ));
        }
        if *self.levels.last().expect("nonempty") > 14 {
            return Err(Error::InvalidInput(
                "level beyond 14 is off desk scale".into(),
            ));
        }
        if !(self.tol > 0.0) {
            return Err(Error::InvalidInput("tolerance must be positive".into()));
        }
        if !(self.s > 0.0 && self.s < 1.0) {
            return Err(Error::InvalidInput("s must lie in (0, 1)".into()));
        }
        Ok(())
    }
}

/// Per-level measurements. Fields that do not apply to a problem are zero.
#[derive(Debug, Clone, Copy)]
pub struct ConvergenceRecord {
    pub level: u32,
    /// Mesh size h (classical/thin) or dof count (fractional).
    pub size: f64,
    pub err_h1: f64,
    pub err_l2: f64,
    pub err_linf: f64,
    pub fb_measure: f64,
    pub fb_distance: f64,
    pub kkt: f64,
    pub seconds: f64,
}

/// A fitted rate: least-squares slope of log(error) against log(size).
#[derive(Debug, Clone)]
pub struct RateFit {
    pub name: String,
    pub slope: f64,
    pub r_squared: f64,
}

#[derive(Debug, Clone)]
pub struct StudyOutcome {
    pub spec_name: &'static str,
    pub records: Vec<ConvergenceRecord>,
    pub fits: Vec<RateFit>,
}

/// Least-squares fit of log(error) vs log(size). Requires two or more
/// strictly positive pairs. Returns (slope, R^2); a constant sequence has
/// slope zero and R^2 = 1 by convention.
pub fn fit_rate(pairs: &[(f64, f64)]) -> Result<(f64, f64)> {
    if pairs.len() < 2 {
        return Err(Error::InvalidInput(
            "rate fit needs at least two points".into(),
        ));
    }
    if pairs.iter().any(|&(x, y)| !(x > 0.0) || !(y > 0.0)) {
        return Err(Error::InvalidInput(
            "rate fit needs strictly positive sizes and errors".into(),
        ));
    }
    let n = pairs.len() as f64;
    let logs: Vec<(f64, f64)> = pairs.iter().map(|&(x, y)| (x.ln(), y.ln())).collect();
    let mean_x = logs.iter().map(|p| p.0).sum::<f64>() / n;
    let mean_y = logs.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = logs.iter().map(|p| (p.0 - mean_x).powi(2)).sum();
    let sxy: f64 = logs.iter().map(|p| (p.0 - mean_x) * (p.1 - mean_y)).sum();
    let syy: f64 = logs.iter().map(|p| (p.1 - mean_y).powi(2)).sum();
    if sxx == 0.0 {
        return Err(Error::InvalidInput("all sizes are identical".into()));
    }
    let slope = sxy / sxx;
    let r2 = if syy == 0.0 {
        1.0
    } else {
        let ss_res: f64 = logs
            .iter()
            .map(|p| {
                let pred = mean_y + slope * (p.0 - mean_x);
                (p.1 - pred).powi(2)
            })
            .sum();
        1.0 - ss_res / syy
    };
    Ok((slope, r2))
}

pub const CSV_HEADER: &str =
    "level,size,err_h1,err_l2,err_linf,fb_measure,fb_distance,kkt,seconds";

pub fn csv_string(records: &[ConvergenceRecord]) -> String {
    let mut out = String::from(CSV_HEADER);
    out.push('\n');
    for r in records {
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{},{}\n",
            r.level,
            efmt(r.size, 10),
            efmt(r.err_h1, 10),
            efmt(r.err_l2, 10),
            efmt(r.err_linf, 10),
            efmt(r.fb_measure, 10),
            efmt(r.fb_distance, 10),
            efmt(r.kkt, 10),
            efmt(r.seconds, 10),
        ));
    }
    out
}

fn flush_csv(spec: &StudySpec, records: &[ConvergenceRecord]) -> Result<()> {
    if let Some(path) = &spec.out {
        let mut file = std::fs::File::create(path)?;
        file.write_all(csv_string(records).as_bytes())?;
    }
    Ok(())
}

/// Run one study. On a level failure the records completed so far are
/// still flushed to the CSV before the error propagates.
pub fn run_study(spec: &StudySpec) -> Result<StudyOutcome> {
    spec.validate()?;
    let result = match spec.problem {
        ProblemId::Classical1d => run_classical_1d(spec),
        ProblemId::Classical2d => run_classical_2d(spec),
        ProblemId::Thin => run_thin(spec),
        ProblemId::FractionalLinear => run_fractional_linear(spec),
        ProblemId::FractionalObstacle => run_fractional_obstacle(spec),
    };
    match result {
        Ok((records, fits)) => {
            flush_csv(spec, &records)?;
            Ok(StudyOutcome {
                spec_name: spec.problem.name(),
                records,
                fits,
            })
        }
        Err((records, err)) => {
            flush_csv(spec, &records)?;
            Err(err)
        }
    }
}

type DriverResult = std::result::Result<
    (Vec<ConvergenceRecord>, Vec<RateFit>),
    (Vec<ConvergenceRecord>, Error),
>;

fn classical_solver(spec: &StudySpec, h: f64) -> SolverChoice {
    match spec.solver {
        SolverPref::Pdas => SolverChoice::Pdas(PdasOptions::default()),
        SolverPref::Auto | SolverPref::Psor | SolverPref::Cg => {
            SolverChoice::psor_auto(h, spec.tol)
        }
    }
}

fn run_classical_1d(spec: &StudySpec) -> DriverResult {
    let bench = benchmark_1d();
    let mut records: Vec<ConvergenceRecord> = Vec::new();
    let mut solved: Vec<(u32, usize, FeSpace, Vec<f64>, ViSolution, f64)> = Vec::new();
    for &level in &spec.levels {
        let n = 1usize << level;
        let h = 1.0 / n as f64;
        let clock = Instant::now();
        let (sol, space) = match solve_classical(&bench, n, &classical_solver(spec, h)) {
            Ok(v) => v,
            Err(e) => return Err((records, e)),
        };
        let seconds = clock.elapsed().as_secs_f64();
        let full = space.scatter(&sol.u);
        solved.push((level, n, space, full, sol, seconds));
    }
    // errors against the analytic solution
    let mut linf_by_h = Vec::new();
    for (_, n, space, full, _, _) in &solved {
        let h = 1.0 / *n as f64;
        let linf = linf_error(space, full, |p| bench.exact_u(p).expect("analytic"));
        linf_by_h.push((h, linf));
    }
    let w2inf = bench.w2inf().expect("analytic seminorm");
    let c_star = match spec.c_star {
        Some(c) => c,
        None => match calibrate_c_star(&linf_by_h[..linf_by_h.len().min(2)], w2inf) {
            Ok(c) => c,
            Err(e) => return Err((records, e)),
        },
    };
    for (idx, (level, n, space, full, sol, seconds)) in solved.iter().enumerate() {
        let h = 1.0 / *n as f64;
        let err_h1 = energy_norm_error(space, full, |p| bench.exact_grad(p).expect("analytic"));
        let err_l2 = l2_error(space, full, |p| bench.exact_u(p).expect("analytic"));
        let err_linf = linf_by_h[idx].1;
        let metrics = delta_for_level(h, c_star, w2inf)
            .and_then(|delta| extract_free_boundary(space, full, delta))
            .and_then(|est| interface_metrics(&est, &bench, None, spec.margin_factor * h));
        let (fb_measure, fb_distance) = match metrics {
            Ok(m) => m,
            Err(e) => return Err((records, e)),
        };
        records.push(ConvergenceRecord {
            level: *level,
            size: h,
            err_h1,
            err_l2,
            err_linf,
            fb_measure,
            fb_distance,
            kkt: sol.kkt_residual(),
            seconds: *seconds,
        });
    }
    let fits = fit_standard(&records, "h");
    Ok((records, fits))
}

fn fit_standard(records: &[ConvergenceRecord], size_name: &str) -> Vec<RateFit> {
    let mut fits = Vec::new();
    let selectors: [(&str, fn(&ConvergenceRecord) -> f64); 3] = [
        ("err_h1", |r| r.err_h1),
        ("err_l2", |r| r.err_l2),
        ("err_linf", |r| r.err_linf),
    ];
    for (name, get) in selectors {
        let pairs: Vec<(f64, f64)> = records
            .iter()
            .map(|r| (r.size, get(r)))
            .filter(|&(x, y)| x > 0.0 && y > 0.0)
            .collect();
        if pairs.len() >= 2 {
            if let Ok((slope, r2)) = fit_rate(&pairs) {
                fits.push(RateFit {
                    name: format!("{name}_vs_{size_name}"),
                    slope,
                    r_squared: r2,
                });
            }
        }
    }
    fits
}

fn run_classical_2d(spec: &StudySpec) -> DriverResult {
    let mut records: Vec<ConvergenceRecord> = Vec::new();
    let mut bench = benchmark_2d();
    let finest = 1usize << *spec.levels.last().expect("validated nonempty");
    if let Err(e) = bench.attach_reference(finest, 4, spec.tol.max(1e-12)) {
        return Err((records, e));
    }
    let reference = bench.reference().expect("just attached");
    let ref_mesh = reference.space.mesh();
    let w2inf = reference.w2inf;
    let c_star = spec.c_star.unwrap_or(1.0);
    for &level in &spec.levels {
        let n = 1usize << level;
        let h = std::f64::consts::SQRT_2 / n as f64;
        let clock = Instant::now();
        let (sol, space) =
            match solve_classical(&bench, n, &classical_solver(spec, 1.0 / n as f64)) {
                Ok(v) => v,
                Err(e) => return Err((records, e)),
            };
        let seconds = clock.elapsed().as_secs_f64();
        let full = space.scatter(&sol.u);
        let on_ref = prolong_nodal(space.mesh(), &full, ref_mesh);
        let diff: Vec<f64> = on_ref
            .iter()
            .zip(&reference.u_full)
            .map(|(&a, &b)| a - b)
            .collect();
        let err_h1 = energy_seminorm_sq(ref_mesh, &diff).max(0.0).sqrt();
        let err_l2 = l2_norm_sq(ref_mesh, &diff).max(0.0).sqrt();
        let err_linf = diff.iter().fold(0.0_f64, |m, &v| m.max(v.abs()));
        // threshold the obstacle slack, as in the zero-obstacle reduction
        let psi_full = interpolate_nodal(&space, |p| bench.psi(p));
        let shifted: Vec<f64> = full.iter().zip(&psi_full).map(|(&u, &p)| u - p).collect();
        let metrics = delta_for_level(h, c_star, w2inf)
            .and_then(|delta| extract_free_boundary(&space, &shifted, delta))
            .and_then(|est| {
                interface_metrics(&est, &bench, Some((&space, &shifted)), spec.margin_factor * h)
            });
        let (fb_measure, fb_distance) = match metrics {
            Ok(m) => m,
            Err(e) => return Err((records, e)),
        };
        records.push(ConvergenceRecord {
            level,
            size: h,
            err_h1,
            err_l2,
            err_linf,
            fb_measure,
            fb_distance,
            kkt: sol.kkt_residual(),
            seconds,
        });
    }
    let fits = fit_standard(&records, "h");
    Ok((records, fits))
}

fn run_thin(spec: &StudySpec) -> DriverResult {
    let mut records: Vec<ConvergenceRecord> = Vec::new();
    let prob = ThinProblem::benchmark();
    let finest = 1usize << *spec.levels.last().expect("validated nonempty");
    let overkill_n = finest << 3;
    // overkill with the same solver as the study levels, nested warm start
    let overkill = (|| -> Result<(FeSpace, Vec<f64>)> {
        let mut previous: Option<(crate::mesh::SimplicialMesh, Vec<f64>)> = None;
        let mut n = 8usize.min(overkill_n);
        let mut out = None;
        while n <= overkill_n {
            let (sys, space) = build_thin_system(&prob, n)?;
            let h = 1.0 / n as f64;
            let start = previous.as_ref().map(|(mesh, full)| {
                let full_here = prolong_nodal(mesh, full, space.mesh());
                space.restrict(&full_here)
            });
            let sol = match spec.solver {
                SolverPref::Pdas => {
                    solve_pdas_from(&sys, &PdasOptions::default(), start.as_deref())?
                }
                _ => {
                    let opts = PsorOptions::auto_omega(h).with_tol(spec.tol.max(1e-12));
                    crate::vi::solve_psor_from(&sys, &opts, start.as_deref())?
                }
            };
            let full = space.scatter(&sol.u);
            previous = Some((space.mesh().clone(), full.clone()));
            out = Some((space, full));
            n *= 2;
        }
        Ok(out.expect("ladder nonempty"))
    })();
    let (ref_space, ref_full) = match overkill {
        Ok(v) => v,
        Err(e) => return Err((records, e)),
    };
    for &level in &spec.levels {
        let n = 1usize << level;
        let h = std::f64::consts::SQRT_2 / n as f64;
        let clock = Instant::now();
        let step = (|| -> Result<(ViSolution, FeSpace)> {
            let (sys, space) = build_thin_system(&prob, n)?;
            let solver = match spec.solver {
                SolverPref::Pdas => SolverChoice::Pdas(PdasOptions::default()),
                _ => SolverChoice::psor_auto(1.0 / n as f64, spec.tol),
            };
            Ok((solver.solve(&sys)?, space))
        })();
        let (sol, space) = match step {
            Ok(v) => v,
            Err(e) => return Err((records, e)),
        };
        let seconds = clock.elapsed().as_secs_f64();
        let full = space.scatter(&sol.u);
        let on_ref = prolong_nodal(space.mesh(), &full, ref_space.mesh());
        let diff: Vec<f64> = on_ref.iter().zip(&ref_full).map(|(&a, &b)| a - b).collect();
        let err_h1 = h1_norm_sq(ref_space.mesh(), &diff).max(0.0).sqrt();
        let err_l2 = l2_norm_sq(ref_space.mesh(), &diff).max(0.0).sqrt();
        let err_linf = diff.iter().fold(0.0_f64, |m, &v| m.max(v.abs()));
        records.push(ConvergenceRecord {
            level,
            size: h,
            err_h1,
            err_l2,
            err_linf,
            fb_measure: 0.0,
            fb_distance: 0.0,
            kkt: sol.kkt_residual(),
            seconds,
        });
    }
    let fits = fit_standard(&records, "h");
    Ok((records, fits))
}

fn run_fractional_linear(spec: &StudySpec) -> DriverResult {
    let mut records: Vec<ConvergenceRecord> = Vec::new();
    let s = spec.s;
    let gamma = spec.gamma.unwrap_or_else(|| FractionalConfig::default_gamma(s));
    let exact = spectral_mode_trace(s, 1);
    let f = |p: &[f64]| (std::f64::consts::PI * p[0]).sin();
    for &level in &spec.levels {
        let m = 1usize << level;
        let cfg = match spec.height {
            Some(y) => FractionalConfig::new(s, gamma, y, BaseDomain::UnitInterval.lambda1()),
            None => FractionalConfig::with_auto_height(s, gamma, BaseDomain::UnitInterval, m),
        };
        let cfg = match cfg {
            Ok(c) => c,
            Err(e) => return Err((records, e)),
        };
        let clock = Instant::now();
        let run = (|| -> Result<(f64, f64, f64, usize)> {
            let space = build_space(&cfg, BaseDomain::UnitInterval, m)?;
            let op = crate::assembly::assemble_weighted_stiffness(&space, cfg.alpha)?;
            let rhs = crate::assembly::assemble_trace_load(&space, cfg.d_s, f)?;
            let (u, _) = crate::sparse::cg_solve(&op, &rhs, None, None, &Default::default())?;
            let rhs_dot_u: f64 = rhs.iter().zip(&u).map(|(&a, &b)| a * b).sum();
            let err_h1 = mode_energy_error(&cfg, 1, rhs_dot_u);
            let values = space.scatter(&u);
            let trace = space.trace_values(&values);
            let base_space = FeSpace::all_free(space.mesh().base.clone());
            let err_l2 = l2_error(&base_space, &trace, |p| exact(p[0]));
            let err_linf = linf_error(&base_space, &trace, |p| exact(p[0]));
            Ok((err_h1, err_l2, err_linf, space.n_dofs()))
        })();
        let (err_h1, err_l2, err_linf, ndofs) = match run {
            Ok(v) => v,
            Err(e) => return Err((records, e)),
        };
        records.push(ConvergenceRecord {
            level,
            size: ndofs as f64,
            err_h1,
            err_l2,
            err_linf,
            fb_measure: 0.0,
            fb_distance: 0.0,
            kkt: 0.0,
            seconds: clock.elapsed().as_secs_f64(),
        });
    }
    let fits = fractional_fits(&records, s);
    Ok((records, fits))
}

/// Rate fits for fractional studies: the size metric is the dof count and
/// the energy errors are pre-divided by `|log(#cells)|^s` with
/// `#cells = 2^(2 level)` on the 2D cylinder.
fn fractional_fits(records: &[ConvergenceRecord], s: f64) -> Vec<RateFit> {
    let mut fits = Vec::new();
    let corrected: Vec<(f64, f64)> = records
        .iter()
        .filter(|r| r.err_h1 > 0.0)
        .map(|r| {
            let m = 1usize << r.level;
            let cells = (m * m) as f64;
            (r.size, r.err_h1 / cells.ln().powf(s))
        })
        .collect();
    if corrected.len() >= 2 {
        if let Ok((slope, r2)) = fit_rate(&corrected) {
            fits.push(RateFit {
                name: "energy_logcorrected_vs_dofs".into(),
                slope,
                r_squared: r2,
            });
        }
    }
    let raw: Vec<(f64, f64)> = records
        .iter()
        .filter(|r| r.err_l2 > 0.0)
        .map(|r| (r.size, r.err_l2))
        .collect();
    if raw.len() >= 2 {
        if let Ok((slope, r2)) = fit_rate(&raw) {
            fits.push(RateFit {
                name: "l2_vs_dofs".into(),
                slope,
                r_squared: r2,
            });
        }
    }
    fits
}

fn run_fractional_obstacle(spec: &StudySpec) -> DriverResult {
    let mut records: Vec<ConvergenceRecord> = Vec::new();
    let s = spec.s;
    let gamma = spec.gamma.unwrap_or_else(|| FractionalConfig::default_gamma(s));
    let finest = 1usize << *spec.levels.last().expect("validated nonempty");
    let m_ref = finest << 3;
    // fixed height across the ladder keeps the meshes nested, so the
    // overkill comparison is an exact prolongation
    let height = match spec.height {
        Some(y) => y,
        None => match choose_truncation(BaseDomain::UnitInterval.lambda1(), m_ref * m_ref) {
            Ok(y) => y,
            Err(e) => return Err((records, e)),
        },
    };
    let cfg = match FractionalConfig::new(s, gamma, height, BaseDomain::UnitInterval.lambda1()) {
        Ok(c) => c,
        Err(e) => return Err((records, e)),
    };
    let f = |_: &[f64]| 0.0;
    let psi = |p: &[f64]| (0.2 * (std::f64::consts::PI * p[0]).sin()).min(0.15);

    // one pass up the ladder with warm starts; keep the requested levels
    type Kept = (u32, crate::assembly::CylinderSpace, Vec<f64>, f64, f64);
    let mut kept: Vec<Kept> = Vec::new();
    let mut previous: Option<(crate::mesh::CylinderMesh, Vec<f64>)> = None;
    let mut reference: Option<(crate::assembly::CylinderSpace, Vec<f64>)> = None;
    let mut m = 1usize << spec.levels[0];
    while m <= m_ref {
        let level = m.trailing_zeros();
        let clock = Instant::now();
        let step = (|| -> Result<(crate::assembly::CylinderSpace, ViSolution)> {
            let space = build_space(&cfg, BaseDomain::UnitInterval, m)?;
            let sys = build_obstacle_system(&cfg, &space, f, psi)?;
            let start = previous.as_ref().map(|(mesh, full)| {
                let full_here = prolong_to(mesh, full, space.mesh());
                space.restrict(&full_here)
            });
            let sol = match spec.solver {
                SolverPref::Psor => crate::vi::solve_psor_from(
                    &sys,
                    &PsorOptions::default().with_tol(spec.tol),
                    start.as_deref(),
                )?,
                _ => solve_pdas_from(&sys, &PdasOptions::default(), start.as_deref())?,
            };
            Ok((space, sol))
        })();
        let (space, sol) = match step {
            Ok(v) => v,
            Err(e) => return Err((records, e)),
        };
        let seconds = clock.elapsed().as_secs_f64();
        let full = space.scatter(&sol.u);
        previous = Some((space.mesh().clone(), full.clone()));
        if m == m_ref {
            reference = Some((space, full));
        } else if spec.levels.contains(&level) {
            kept.push((level, space, full, sol.kkt_residual(), seconds));
        }
        m *= 2;
    }
    let (ref_space, ref_full) = reference.expect("ladder reaches the reference");
    for (level, space, full, kkt, seconds) in kept {
        let on_ref = prolong_to(space.mesh(), &full, ref_space.mesh());
        let diff: Vec<f64> = on_ref.iter().zip(&ref_full).map(|(&a, &b)| a - b).collect();
        let err_h1 =
            crate::assembly::weighted::weighted_energy_sq(ref_space.mesh(), cfg.alpha, &diff, 0.0)
                .max(0.0)
                .sqrt();
        let trace_diff = ref_space.trace_values(&diff);
        let err_l2 = l2_norm_sq(&ref_space.mesh().base, &trace_diff).max(0.0).sqrt();
        let err_linf = trace_diff.iter().fold(0.0_f64, |acc, &v| acc.max(v.abs()));
        records.push(ConvergenceRecord {
            level,
            size: space.n_dofs() as f64,
            err_h1,
            err_l2,
            err_linf,
            fb_measure: 0.0,
            fb_distance: 0.0,
            kkt,
            seconds,
        });
    }
    let fits = fractional_fits(&records, s);
    Ok((records, fits))
}

/// Parse the flat `key = value` config format with one `[section]` per
/// problem. Unknown keys are rejected; `#` starts a comment line.
pub fn parse_config(text: &str) -> Result<Vec<StudySpec>> {
    let mut specs: Vec<StudySpec> = Vec::new();
    let mut current: Option<StudySpec> = None;
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        if let Some(name) = line.strip_prefix('[').and_then(|r| r.strip_suffix(']')) {
            if let Some(done) = current.take() {
                done.validate()?;
                specs.push(done);
            }
            let problem = ProblemId::parse(name.trim())?;
            current = Some(StudySpec::new(problem, Vec::new()));
            continue;
        }
        let spec = current.as_mut().ok_or_else(|| {
            Error::Format(format!("line {}: key outside of a section", lineno + 1))
        })?;
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| Error::Format(format!("line {}: expected 'key = value'", lineno + 1)))?;
        let (key, value) = (key.trim(), value.trim());
        let bad =
            |what: &str| Error::Format(format!("line {}: bad {what}: '{value}'", lineno + 1));
        match key {
            "levels" => {
                spec.levels = value
                    .split(',')
                    .map(|t| t.trim().parse::<u32>().map_err(|_| bad("level")))
                    .collect::<Result<_>>()?;
            }
            "solver" => spec.solver = SolverPref::parse(value)?,
            "tol" => spec.tol = value.parse().map_err(|_| bad("tolerance"))?,
            "s" => spec.s = value.parse().map_err(|_| bad("fractional power"))?,
            "gamma" => spec.gamma = Some(value.parse().map_err(|_| bad("gamma"))?),
            "y" => spec.height = Some(value.parse().map_err(|_| bad("height"))?),
            "c_star" => spec.c_star = Some(value.parse().map_err(|_| bad("c_star"))?),
            "margin" => spec.margin_factor = value.parse().map_err(|_| bad("margin factor"))?,
            "out" => spec.out = Some(PathBuf::from(value)),
            other => {
                return Err(Error::Format(format!(
                    "line {}: unknown key '{other}'",
                    lineno + 1
                )))
            }
        }
    }
    if let Some(done) = current.take() {
        done.validate()?;
        specs.push(done);
    }
    if specs.is_empty() {
        return Err(Error::Format("config defines no studies".into()));
    }
    Ok(specs)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fit_rate_pins() {
        let (slope, r2) = fit_rate(&[(0.1, 0.1), (0.05, 0.05)]).unwrap();
        assert!((slope - 1.0).abs() < 1e-12);
        assert!((r2 - 1.0).abs() < 1e-12);
        let (slope, _) = fit_rate(&[(0.1, 0.01), (0.05, 0.0025)]).unwrap();
        assert!((slope - 2.0).abs() < 1e-12);
        let (slope, r2) = fit_rate(&[(0.1, 0.7), (0.05, 0.7), (0.025, 0.7)]).unwrap();
        assert_eq!(slope, 0.0);
        assert_eq!(r2, 1.0);
    }

    #[test]
    fn fit_rate_rejects_bad_input() {
        assert!(fit_rate(&[(0.1, 0.1)]).is_err());
        assert!(fit_rate(&[(0.1, 0.1), (0.05, -0.2)]).is_err());
        assert!(fit_rate(&[(0.1, 0.1), (0.1, 0.2)]).is_err());
    }

    #[test]
    fn spec_validation() {
        let mut spec = StudySpec::new(ProblemId::Classical1d, vec![]);
        assert!(spec.validate().is_err());
        spec.levels = vec![3, 3];
        assert!(spec.validate().is_err());
        spec.levels = vec![3, 4, 5];
        assert!(spec.validate().is_ok());
    }

    #[test]
    fn csv_format_is_pinned() {
        let records = vec![ConvergenceRecord {
            level: 3,
            size: 0.125,
            err_h1: 0.5,
            err_l2: 0.01,
            err_linf: 0.02,
            fb_measure: 0.0,
            fb_distance: 0.0,
            kkt: 1e-11,
            seconds: 0.25,
        }];
        let text = csv_string(&records);
        let mut lines = text.lines();
        assert_eq!(lines.next().unwrap(), CSV_HEADER);
        assert_eq!(
            lines.next().unwrap(),
            "3,1.2500000000e-01,5.0000000000e-01,1.0000000000e-02,2.0000000000e-02,0.0000000000e+00,0.0000000000e+00,1.0000000000e-11,2.5000000000e-01"
        );
    }

    #[test]
    fn classical_1d_small_study_runs() {
        let spec = StudySpec::new(ProblemId::Classical1d, vec![3, 4, 5]);
        let outcome = run_study(&spec).unwrap();
        assert_eq!(outcome.records.len(), 3);
        let h1 = outcome
            .fits
            .iter()
            .find(|f| f.name == "err_h1_vs_h")
            .expect("h1 fit present");
        assert!(
            (0.8..=1.2).contains(&h1.slope),
            "slope {} off first order",
            h1.slope
        );
        for r in &outcome.records {
            assert!(r.kkt <= 1e-9);
        }
    }

    #[test]
    fn config_parsing_round_trip() {
        let text = "\
# comment
[classical1d]
levels = 3,4,5
solver = psor
tol = 1e-11

[fractional-linear]
levels = 3,4
s = 0.75
gamma = 2.3
out = /tmp/frac.csv
";
        let specs = parse_config(text).unwrap();
        assert_eq!(specs.len(), 2);
        assert_eq!(specs[0].problem, ProblemId::Classical1d);
        assert_eq!(specs[0].levels, vec![3, 4, 5]);
        assert_eq!(specs[0].solver, SolverPref::Psor);
        assert_eq!(specs[1].s, 0.75);
        assert_eq!(
            specs[1].out.as_deref(),
            Some(std::path::Path::new("/tmp/frac.csv"))
        );
    }

    #[test]
    fn config_rejects_unknown_keys_and_empty() {
        assert!(parse_config("[classical1d]\nwhat = 3\n").is_err());
        assert!(parse_config("levels = 3\n").is_err());
        assert!(parse_config("# nothing\n").is_err());
        assert!(parse_config("[classical1d]\nlevels = 5,4\n").is_err());
    }

    #[test]
    fn identical_specs_reproduce_results() {
        let spec = StudySpec::new(ProblemId::Classical1d, vec![3, 4]);
        let a = run_study(&spec).unwrap();
        let b = run_study(&spec).unwrap();
        for (ra, rb) in a.records.iter().zip(&b.records) {
            assert_eq!(ra.err_h1, rb.err_h1);
            assert_eq!(ra.err_l2, rb.err_l2);
            assert_eq!(ra.err_linf, rb.err_linf);
            assert_eq!(ra.fb_measure, rb.fb_measure);
            assert_eq!(ra.fb_distance, rb.fb_distance);
            assert_eq!(ra.kkt, rb.kkt);
        }
    }
}
