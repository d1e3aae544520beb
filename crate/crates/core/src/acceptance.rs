//! The built-in pass/fail suite. Every check pins its thresholds here, in
//! code; the `acceptance` integration test target and the CLI `--check`
//! mode both run exactly these functions, so CI and the command line agree
//! by construction.

use std::f64::consts::PI;
use std::time::Instant;

use crate::assembly::{assemble_load_fn, assemble_stiffness, interpolate_nodal, FeSpace};
use crate::classical::{
    benchmark_1d, calibrate_c_star, delta_for_level, extract_free_boundary, solve_classical,
    Interface, GAMMA_1D,
};
use crate::error::Result;
use crate::fractional::{
    decay_profile, solve_fractional_linear, truncation_error_probe, BaseDomain,
    FractionalConfig,
};
use crate::mesh::{is_weakly_acute, structured_triangle_mesh, Rect};
use crate::oracle::{brute_force_vi, tanh_sinh, DenseMatrix};
use crate::sparse::SparseOperator;
use crate::study::{run_study, ProblemId, StudySpec};
use crate::util::SplitMix64;
use crate::vi::{
    solve_pdas, solve_psor, ObstacleSystem, PdasOptions, PsorOptions, SolverChoice,
};

/// Result of one acceptance check.
#[derive(Debug, Clone)]
pub struct CheckOutcome {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
    pub seconds: f64,
}

impl CheckOutcome {
    fn judge(name: &'static str, passed: bool, detail: String) -> Self {
        Self {
            name,
            passed,
            detail,
            seconds: 0.0,
        }
    }

    /// One status line, `PASS name: detail` / `FAIL name: detail`.
    pub fn line(&self) -> String {
        format!(
            "{} {}: {} [{:.1} s]",
            if self.passed { "PASS" } else { "FAIL" },
            self.name,
            self.detail,
            self.seconds,
        )
    }
}

fn timed(check: fn() -> Result<CheckOutcome>) -> Result<CheckOutcome> {
    let clock = Instant::now();
    let mut outcome = check()?;
    outcome.seconds = clock.elapsed().as_secs_f64();
    Ok(outcome)
}

/// Every check, in order. Each entry is independent; a failure does not
/// stop the rest.
pub const ALL_CHECKS: [fn() -> Result<CheckOutcome>; 10] = [
    classical_1d_energy_rate,
    classical_1d_pointwise_rate,
    classical_1d_interface,
    classical_2d_suite,
    thin_rate,
    fractional_linear_rates,
    fractional_obstacle_rate,
    solver_oracle_equivalence,
    exponential_decay_probe,
    weighted_quadrature_oracle,
];

/// Run every check in order, timing each.
pub fn run_all() -> Result<Vec<CheckOutcome>> {
    ALL_CHECKS.iter().map(|&check| timed(check)).collect()
}

const CLASSICAL_1D_LEVELS: [u32; 7] = [3, 4, 5, 6, 7, 8, 9];

/// Energy rate on the 1D benchmark, n = 8..512: fitted H1 slope in
/// [0.9, 1.1] with R^2 >= 0.99.
pub fn classical_1d_energy_rate() -> Result<CheckOutcome> {
    let spec = StudySpec::new(ProblemId::Classical1d, CLASSICAL_1D_LEVELS.to_vec());
    let outcome = run_study(&spec)?;
    let fit = outcome
        .fits
        .iter()
        .find(|f| f.name == "err_h1_vs_h")
        .expect("h1 fit");
    let passed = (0.9..=1.1).contains(&fit.slope) && fit.r_squared >= 0.99;
    Ok(CheckOutcome::judge(
        "classical-1d-energy-rate",
        passed,
        format!(
            "H1 slope {:.4} (target [0.9, 1.1]), R^2 {:.5} (>= 0.99)",
            fit.slope, fit.r_squared
        ),
    ))
}

/// Pointwise rate: the ratio `linf_err / (h^2 |log h|)` stays bounded,
/// max/min <= 3 across the levels.
pub fn classical_1d_pointwise_rate() -> Result<CheckOutcome> {
    let spec = StudySpec::new(ProblemId::Classical1d, CLASSICAL_1D_LEVELS.to_vec());
    let outcome = run_study(&spec)?;
    let ratios: Vec<f64> = outcome
        .records
        .iter()
        .map(|r| r.err_linf / (r.size * r.size * r.size.ln().abs()))
        .collect();
    let hi = ratios.iter().fold(f64::MIN, |m, &v| m.max(v));
    let lo = ratios.iter().fold(f64::MAX, |m, &v| m.min(v));
    let spread = hi / lo;
    Ok(CheckOutcome::judge(
        "classical-1d-pointwise-rate",
        spread <= 3.0,
        format!("linf/(h^2|log h|) spread {spread:.3} (max {hi:.4}, min {lo:.4}; limit 3)"),
    ))
}

/// Interface criteria on the 1D benchmark: with the constant calibrated on
/// the two coarsest levels, every discrete interface point on levels >= 4
/// lies within sqrt(2 eta(h)) of {1/4, 3/4}, and the symmetric-difference
/// measure stays below the bound frozen at the coarsest level.
pub fn classical_1d_interface() -> Result<CheckOutcome> {
    let bench = benchmark_1d();
    let w2inf = bench.w2inf().expect("analytic");
    let mut per_level = Vec::new();
    for &level in &CLASSICAL_1D_LEVELS {
        let n = 1usize << level;
        let h = 1.0 / n as f64;
        let (sol, space) = solve_classical(&bench, n, &SolverChoice::psor_auto(h, 1e-12))?;
        let full = space.scatter(&sol.u);
        let linf = crate::assembly::linf_error(&space, &full, |p| {
            bench.exact_u(p).expect("analytic")
        });
        per_level.push((level, h, space, full, linf));
    }
    let coarse: Vec<(f64, f64)> = per_level
        .iter()
        .take(2)
        .map(|(_, h, _, _, linf)| (*h, *linf))
        .collect();
    let c_star = calibrate_c_star(&coarse, w2inf)?;
    let mut frozen_c: Option<f64> = None;
    let mut worst_dist_ratio = 0.0_f64;
    let mut worst_meas_ratio = 0.0_f64;
    let mut passed = true;
    for (level, h, space, full, _) in &per_level {
        let eta = delta_for_level(*h, c_star, w2inf)?;
        let est = extract_free_boundary(space, full, eta)?;
        let radius = (2.0 * eta).sqrt();
        if let Interface::Points1d { points, .. } = &est.interface {
            if *level >= 4 {
                for &x in points {
                    let d = (x - GAMMA_1D[0]).abs().min((x - GAMMA_1D[1]).abs());
                    worst_dist_ratio = worst_dist_ratio.max(d / radius);
                    if d > radius {
                        passed = false;
                    }
                }
            }
        }
        let (sym, _) =
            crate::classical::interface_metrics(&est, &bench, None, 2.0 * h)?;
        match frozen_c {
            None => frozen_c = Some(sym / eta.sqrt()),
            Some(c) => {
                let bound = c * eta.sqrt();
                worst_meas_ratio = worst_meas_ratio.max(sym / bound);
                if sym > bound {
                    passed = false;
                }
            }
        }
    }
    Ok(CheckOutcome::judge(
        "classical-1d-interface",
        passed,
        format!(
            "c* = {c_star}, worst dist/sqrt(2 eta) = {worst_dist_ratio:.3} (<= 1), \
             worst measure/frozen bound = {worst_meas_ratio:.3} (<= 1)"
        ),
    ))
}

/// 2D property suite: weak acuteness of the structured mesh, the discrete
/// comparison principle on random obstacle pairs, and the H1 rate against
/// the overkill reference.
pub fn classical_2d_suite() -> Result<CheckOutcome> {
    // weak acuteness
    let mesh = structured_triangle_mesh(Rect::unit_square(), 16)?;
    let (acute, violations) = is_weakly_acute(&mesh)?;
    if !acute {
        return Ok(CheckOutcome::judge(
            "classical-2d-suite",
            false,
            format!("structured mesh not weakly acute: {violations:?}"),
        ));
    }
    // comparison principle: raising the obstacle nodally never lowers the
    // solution anywhere (weakly acute mesh)
    let mut rng = SplitMix64::new(0x0b57ac1e);
    let n = 16usize;
    let mesh = structured_triangle_mesh(Rect::unit_square(), n)?;
    let space = FeSpace::with_zero_boundary(mesh);
    let op = assemble_stiffness(&space)?;
    let rhs = assemble_load_fn(&space, |_| -8.0)?;
    let mut worst_violation = 0.0_f64;
    for _ in 0..3 {
        let amp = rng.range(0.1, 0.4);
        let psi_low = interpolate_nodal(&space, |p| {
            amp * (PI * p[0]).sin() * (PI * p[1]).sin() - 0.05
        });
        let lift: Vec<f64> = (0..space.mesh().n_vertices())
            .map(|_| rng.range(0.0, 0.1))
            .collect();
        let constraint_low: Vec<Option<f64>> = space
            .free_nodes()
            .iter()
            .map(|&z| Some(psi_low[z]))
            .collect();
        let constraint_high: Vec<Option<f64>> = space
            .free_nodes()
            .iter()
            .map(|&z| Some(psi_low[z] + lift[z]))
            .collect();
        let low = solve_psor(
            &ObstacleSystem::new(op.clone(), rhs.clone(), constraint_low)?,
            &PsorOptions::auto_omega(1.0 / n as f64).with_tol(1e-12),
        )?;
        let high = solve_psor(
            &ObstacleSystem::new(op.clone(), rhs.clone(), constraint_high)?,
            &PsorOptions::auto_omega(1.0 / n as f64).with_tol(1e-12),
        )?;
        for (a, b) in low.u.iter().zip(&high.u) {
            worst_violation = worst_violation.max(a - b);
        }
    }
    if worst_violation > 1e-8 {
        return Ok(CheckOutcome::judge(
            "classical-2d-suite",
            false,
            format!("comparison principle violated by {worst_violation:e}"),
        ));
    }
    // H1 rate vs overkill
    let mut spec = StudySpec::new(ProblemId::Classical2d, vec![3, 4, 5, 6]);
    spec.tol = 1e-11;
    let outcome = run_study(&spec)?;
    let fit = outcome
        .fits
        .iter()
        .find(|f| f.name == "err_h1_vs_h")
        .expect("h1 fit");
    let passed = (0.8..=1.2).contains(&fit.slope);
    Ok(CheckOutcome::judge(
        "classical-2d-suite",
        passed,
        format!(
            "weakly acute; comparison principle slack {worst_violation:.1e}; \
             H1 slope vs overkill {:.4} (target [0.8, 1.2])",
            fit.slope
        ),
    ))
}

/// Boundary-obstacle rate: H1 slope vs overkill in [0.85, 1.15] over four
/// levels, complementarity certificate <= 1e-8 on every level.
pub fn thin_rate() -> Result<CheckOutcome> {
    let spec = StudySpec::new(ProblemId::Thin, vec![3, 4, 5, 6]);
    let outcome = run_study(&spec)?;
    let fit = outcome
        .fits
        .iter()
        .find(|f| f.name == "err_h1_vs_h")
        .expect("h1 fit");
    let worst_kkt = outcome
        .records
        .iter()
        .fold(0.0_f64, |m, r| m.max(r.kkt));
    let passed = (0.85..=1.15).contains(&fit.slope) && worst_kkt <= 1e-8;
    Ok(CheckOutcome::judge(
        "thin-rate",
        passed,
        format!(
            "H1 slope vs overkill {:.4} (target [0.85, 1.15]), worst certificate {worst_kkt:.2e}",
            fit.slope
        ),
    ))
}

/// Linear fractional rates for s in {0.25, 0.5, 0.75} against the spectral
/// exact solution: log-corrected energy slope vs dofs in [-0.65, -0.35].
pub fn fractional_linear_rates() -> Result<CheckOutcome> {
    let mut details = Vec::new();
    let mut passed = true;
    for s in [0.25, 0.5, 0.75] {
        let mut spec = StudySpec::new(ProblemId::FractionalLinear, vec![4, 5, 6, 7]);
        spec.s = s;
        let outcome = run_study(&spec)?;
        let fit = outcome
            .fits
            .iter()
            .find(|f| f.name == "energy_logcorrected_vs_dofs")
            .expect("corrected fit");
        if !(-0.65..=-0.35).contains(&fit.slope) {
            passed = false;
        }
        details.push(format!("s={s}: slope {:.4}", fit.slope));
    }
    Ok(CheckOutcome::judge(
        "fractional-linear-rate",
        passed,
        format!("{} (target [-0.65, -0.35])", details.join(", ")),
    ))
}

/// Fractional obstacle rate at s = 1/2 against the overkill reference:
/// log-corrected slope in [-0.7, -0.3], trace certificate <= 1e-8.
pub fn fractional_obstacle_rate() -> Result<CheckOutcome> {
    let spec = StudySpec::new(ProblemId::FractionalObstacle, vec![3, 4, 5, 6]);
    let outcome = run_study(&spec)?;
    let fit = outcome
        .fits
        .iter()
        .find(|f| f.name == "energy_logcorrected_vs_dofs")
        .expect("corrected fit");
    let worst_kkt = outcome
        .records
        .iter()
        .fold(0.0_f64, |m, r| m.max(r.kkt));
    let passed = (-0.7..=-0.3).contains(&fit.slope) && worst_kkt <= 1e-8;
    Ok(CheckOutcome::judge(
        "fractional-obstacle-rate",
        passed,
        format!(
            "log-corrected slope {:.4} (target [-0.7, -0.3]), worst certificate {worst_kkt:.2e}",
            fit.slope
        ),
    ))
}

/// Both solvers against the exhaustive active-set enumeration on 200
/// random SPD instances (n <= 12): max-norm agreement to 1e-10.
pub fn solver_oracle_equivalence() -> Result<CheckOutcome> {
    let mut rng = SplitMix64::new(0x5eed_0001);
    let mut worst = 0.0_f64;
    let instances = 200;
    for _ in 0..instances {
        let n = 2 + rng.below(11); // 2..=12
        // random SPD: B^T B / n + I
        let b: Vec<f64> = (0..n * n).map(|_| rng.range(-1.0, 1.0)).collect();
        let mut dense = DenseMatrix::zeros(n);
        for i in 0..n {
            for j in 0..n {
                let mut acc = 0.0;
                for k in 0..n {
                    acc += b[k * n + i] * b[k * n + j];
                }
                dense.set(i, j, acc / n as f64 + if i == j { 1.0 } else { 0.0 });
            }
        }
        let f: Vec<f64> = (0..n).map(|_| rng.range(-1.0, 1.0)).collect();
        let constraint: Vec<Option<f64>> = (0..n)
            .map(|_| {
                if rng.next_f64() < 0.6 {
                    Some(rng.range(-0.5, 0.5))
                } else {
                    None
                }
            })
            .collect();
        let mut triplets = Vec::new();
        for i in 0..n {
            for j in 0..n {
                triplets.push((i, j, dense.get(i, j)));
            }
        }
        let op = SparseOperator::from_triplets(n, triplets)?;
        let sys = ObstacleSystem::new(op, f.clone(), constraint.clone())?;
        let Some(exact) = brute_force_vi(&dense, &f, &constraint, 1e-10) else {
            return Ok(CheckOutcome::judge(
                "solver-oracle-equivalence",
                false,
                "enumeration found no KKT point for an SPD instance".into(),
            ));
        };
        let psor = solve_psor(&sys, &PsorOptions::default().with_tol(1e-14))?;
        let pdas = solve_pdas(&sys, &PdasOptions::default())?;
        for (u, e) in psor.u.iter().zip(&exact) {
            worst = worst.max((u - e).abs());
        }
        for (u, e) in pdas.u.iter().zip(&exact) {
            worst = worst.max((u - e).abs());
        }
    }
    Ok(CheckOutcome::judge(
        "solver-oracle-equivalence",
        worst <= 1e-10,
        format!("{instances} instances, worst deviation {worst:.2e} (limit 1e-10)"),
    ))
}

/// Tail-energy decay of the linear s = 1/2 extension (fitted log-slope at
/// most -sqrt(lambda_1)/4) and monotone-decreasing truncation ladder.
pub fn exponential_decay_probe() -> Result<CheckOutcome> {
    let s = 0.5;
    let lambda1 = BaseDomain::UnitInterval.lambda1();
    let cfg = FractionalConfig::with_auto_height(
        s,
        FractionalConfig::default_gamma(s),
        BaseDomain::UnitInterval,
        64,
    )?;
    let (ext, space) =
        solve_fractional_linear(&cfg, BaseDomain::UnitInterval, 64, |p| (PI * p[0]).sin())?;
    let cuts = [0.5, 1.0, 1.5, 2.0, 2.5, 3.0];
    let tails = decay_profile(&space, cfg.alpha, &ext.values, &cuts);
    // least-squares slope of log(tail energy) against the cut height
    let pairs: Vec<(f64, f64)> = cuts
        .iter()
        .zip(&tails)
        .filter(|&(_, &t)| t > 1e-28)
        .map(|(&c, &t)| (c, t.ln()))
        .collect();
    let n = pairs.len() as f64;
    let mx = pairs.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pairs.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pairs.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pairs.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let slope = sxy / sxx;
    let decay_ok = slope <= -lambda1.sqrt() / 4.0;

    let probe = truncation_error_probe(
        &cfg,
        BaseDomain::UnitInterval,
        48,
        |p| (PI * p[0]).sin(),
        None,
        &[1.0, 2.0, 3.0, 4.0, 5.0],
        &SolverChoice::pdas_default(),
    )?;
    let monotone = probe.windows(2).all(|w| w[1].1 <= w[0].1 + 1e-9);
    Ok(CheckOutcome::judge(
        "exponential-decay",
        decay_ok && monotone,
        format!(
            "tail log-slope {slope:.3} (<= {:.3}); truncation distances {}",
            -lambda1.sqrt() / 4.0,
            if monotone {
                "monotone decreasing"
            } else {
                "NOT monotone"
            }
        ),
    ))
}

/// Closed-form axial weighted integrals against tanh-sinh quadrature on
/// 100 random intervals drawn from random graded partitions, for
/// alpha in {-1/2, 0, 1/2}: relative agreement to 1e-12.
pub fn weighted_quadrature_oracle() -> Result<CheckOutcome> {
    let mut rng = SplitMix64::new(0xa11ce);
    let mut worst = 0.0_f64;
    for _ in 0..100 {
        let height = rng.range(0.5, 16.0);
        let m = 4 + rng.below(61);
        let gamma = rng.range(1.0, 7.0);
        let part = crate::mesh::graded_partition(height, m, gamma)?;
        let k = rng.below(m);
        let (a, b) = part.interval(k);
        let h = b - a;
        for &alpha in &[-0.5, 0.0, 0.5] {
            let cell = crate::assembly::axial_weighted_integrals(a, b, alpha)?;
            let weight = move |y: f64| y.powf(alpha);
            let left = move |y: f64| (b - y) / h;
            let right = move |y: f64| (y - a) / h;
            let cases: [(f64, Box<dyn Fn(f64) -> f64>); 5] = [
                (cell.s[0][0], Box::new(move |y| weight(y) / (h * h))),
                (cell.s[0][1], Box::new(move |y| -weight(y) / (h * h))),
                (cell.m[0][0], Box::new(move |y| weight(y) * left(y) * left(y))),
                (
                    cell.m[0][1],
                    Box::new(move |y| weight(y) * left(y) * right(y)),
                ),
                (
                    cell.m[1][1],
                    Box::new(move |y| weight(y) * right(y) * right(y)),
                ),
            ];
            for (ours, integrand) in cases {
                let reference = tanh_sinh(integrand.as_ref(), a, b, 1e-14);
                let scale = reference.abs().max(1e-300);
                worst = worst.max((ours - reference).abs() / scale);
            }
        }
    }
    Ok(CheckOutcome::judge(
        "weighted-quadrature-oracle",
        worst <= 1e-12,
        format!("100 intervals x 3 exponents, worst relative deviation {worst:.2e} (limit 1e-12)"),
    ))
}
