//! Solvers for the discrete variational inequality
//! `A u >= f`, `u >= psi` on the constrained dofs, with complementarity
//! `(A u - f)_z (u - psi)_z = 0`.
//!
//! Two independent methods are provided on purpose: projected SOR and a
//! primal-dual active-set iteration. Cross-validating them (and, on small
//! instances, the exhaustive oracle) is the main defense against silent
//! solver bugs.

use std::io::Write;

use crate::error::{Error, Result};
use crate::fmt::g17;
use crate::sparse::{cg_solve, CgOptions, SparseOperator};

/// Ties `u_z = psi_z` within this tolerance are classified active.
pub const ACTIVE_TIE_TOL: f64 = 1e-8;

/// One discrete obstacle instance: operator, load, and nodal constraints.
/// Unconstrained dofs carry `None` rather than a large negative sentinel,
/// so floating-point comparisons can never spuriously activate them.
#[derive(Debug, Clone)]
pub struct ObstacleSystem {
    pub op: SparseOperator,
    pub rhs: Vec<f64>,
    pub constraint: Vec<Option<f64>>,
}

impl ObstacleSystem {
    pub fn new(
        op: SparseOperator,
        rhs: Vec<f64>,
        constraint: Vec<Option<f64>>,
    ) -> Result<Self> {
        if op.n() != rhs.len() || op.n() != constraint.len() {
            return Err(Error::InvalidInput(format!(
                "dimension mismatch: operator {}, rhs {}, constraints {}",
                op.n(),
                rhs.len(),
                constraint.len()
            )));
        }
        Ok(Self {
            op,
            rhs,
            constraint,
        })
    }

    /// Linear system (no constraints anywhere).
    pub fn unconstrained(op: SparseOperator, rhs: Vec<f64>) -> Result<Self> {
        let n = op.n();
        Self::new(op, rhs, vec![None; n])
    }

    pub fn n(&self) -> usize {
        self.op.n()
    }

    pub fn constrained_indices(&self) -> Vec<usize> {
        (0..self.n())
            .filter(|&i| self.constraint[i].is_some())
            .collect()
    }

    /// Feasible starting vector: zero projected onto the constraint set.
    fn feasible_start(&self) -> Vec<f64> {
        self.constraint
            .iter()
            .map(|c| match c {
                Some(psi) => psi.max(0.0),
                None => 0.0,
            })
            .collect()
    }

    /// Quadratic energy `1/2 u^T A u - f^T u`.
    pub fn energy(&self, u: &[f64]) -> f64 {
        let au = self.op.matvec(u);
        let mut e = 0.0;
        for i in 0..self.n() {
            e += 0.5 * u[i] * au[i] - self.rhs[i] * u[i];
        }
        e
    }
}

/// The three complementarity residual maxima certifying a candidate
/// solution.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KktReport {
    /// max over constrained dofs of (psi - u), clamped at zero.
    pub infeasibility: f64,
    /// max |A u - f| over dofs outside the active set.
    pub stationarity: f64,
    /// max |(A u - f)_z (u - psi)_z| over constrained dofs.
    pub complementarity: f64,
}

impl KktReport {
    pub fn max(&self) -> f64 {
        self.infeasibility
            .max(self.stationarity)
            .max(self.complementarity)
    }
}

/// Residual maxima for a candidate vector. The stationarity maximum runs
/// over every dof not classified active (unconstrained dofs included):
/// those are plain equations of the discrete system.
pub fn kkt_report(sys: &ObstacleSystem, u: &[f64], tie_tol: f64) -> KktReport {
    let residual = sys.op.matvec(u);
    let mut infeasibility = 0.0_f64;
    let mut stationarity = 0.0_f64;
    let mut complementarity = 0.0_f64;
    for i in 0..sys.n() {
        let r = residual[i] - sys.rhs[i];
        match sys.constraint[i] {
            Some(psi) => {
                let slack = u[i] - psi;
                infeasibility = infeasibility.max(-slack);
                complementarity = complementarity.max((r * slack).abs());
                if slack > tie_tol {
                    stationarity = stationarity.max(r.abs());
                }
            }
            None => {
                stationarity = stationarity.max(r.abs());
            }
        }
    }
    KktReport {
        infeasibility: infeasibility.max(0.0),
        stationarity,
        complementarity,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolverKind {
    Psor,
    Pdas,
}

impl SolverKind {
    pub fn id(&self) -> &'static str {
        match self {
            SolverKind::Psor => "psor",
            SolverKind::Pdas => "pdas",
        }
    }
}

/// Converged solution with its active set and certificate.
#[derive(Debug, Clone)]
pub struct ViSolution {
    pub u: Vec<f64>,
    pub active_set: Vec<usize>,
    pub kkt: KktReport,
    pub iterations: usize,
    pub solver: SolverKind,
}

impl ViSolution {
    pub fn kkt_residual(&self) -> f64 {
        self.kkt.max()
    }
}

fn finish(sys: &ObstacleSystem, u: Vec<f64>, iterations: usize, solver: SolverKind) -> ViSolution {
    let active_set = (0..sys.n())
        .filter(|&i| {
            sys.constraint[i]
                .map(|psi| u[i] - psi <= ACTIVE_TIE_TOL)
                .unwrap_or(false)
        })
        .collect();
    let kkt = kkt_report(sys, &u, ACTIVE_TIE_TOL);
    ViSolution {
        u,
        active_set,
        kkt,
        iterations,
        solver,
    }
}

#[derive(Debug, Clone, Copy)]
pub struct PsorOptions {
    /// Relaxation factor in (0, 2).
    pub omega: f64,
    /// Stop when the max-norm change of one sweep drops below this.
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for PsorOptions {
    fn default() -> Self {
        Self {
            omega: 1.5,
            tol: 1e-10,
            max_iter: 200_000,
        }
    }
}

impl PsorOptions {
    /// Near-optimal over-relaxation for a structured mesh of size h.
    pub fn auto_omega(h: f64) -> Self {
        Self {
            omega: 2.0 / (1.0 + (std::f64::consts::PI * h).sin()),
            ..Self::default()
        }
    }

    pub fn with_tol(mut self, tol: f64) -> Self {
        self.tol = tol;
        self
    }
}

/// Projected SOR: Gauss-Seidel sweeps with pointwise projection onto the
/// constraint at constrained dofs. Kept strictly sequential so runs are
/// reproducible.
pub fn solve_psor(sys: &ObstacleSystem, opts: &PsorOptions) -> Result<ViSolution> {
    solve_psor_from(sys, opts, None)
}

/// Projected SOR from a caller-supplied start vector (projected onto the
/// constraint set first). The nested-refinement reference solves warm-start
/// through this entry point.
pub fn solve_psor_from(
    sys: &ObstacleSystem,
    opts: &PsorOptions,
    start: Option<&[f64]>,
) -> Result<ViSolution> {
    if !(opts.omega > 0.0 && opts.omega < 2.0) {
        return Err(Error::InvalidInput(format!(
            "relaxation factor must lie in (0, 2), got {}",
            opts.omega
        )));
    }
    let n = sys.n();
    for i in 0..n {
        if !(sys.op.diag(i) > 0.0) {
            return Err(Error::InvalidInput(format!(
                "operator is not positive definite: diagonal entry {i} is {}",
                sys.op.diag(i)
            )));
        }
    }
    let mut u = match start {
        Some(v) => {
            let mut u = v.to_vec();
            for i in 0..n {
                if let Some(psi) = sys.constraint[i] {
                    u[i] = u[i].max(psi);
                }
            }
            u
        }
        None => sys.feasible_start(),
    };
    let mut last_change = f64::INFINITY;
    for sweep in 1..=opts.max_iter {
        let mut change = 0.0_f64;
        for i in 0..n {
            let (cols, vals) = sys.op.row(i);
            let mut sigma = sys.rhs[i];
            let mut diag = 0.0;
            for (&j, &v) in cols.iter().zip(vals) {
                if j == i {
                    diag = v;
                } else {
                    sigma -= v * u[j];
                }
            }
            let mut cand = (1.0 - opts.omega) * u[i] + opts.omega * sigma / diag;
            if let Some(psi) = sys.constraint[i] {
                cand = cand.max(psi);
            }
            change = change.max((cand - u[i]).abs());
            u[i] = cand;
        }
        if change < opts.tol {
            return Ok(finish(sys, u, sweep, SolverKind::Psor));
        }
        last_change = change;
    }
    Err(Error::NonConvergence {
        solver: "psor",
        iterations: opts.max_iter,
        residual: last_change,
    })
}

#[derive(Debug, Clone, Copy)]
pub struct PdasOptions {
    /// Complementarity scaling in the active-set update rule.
    pub c: f64,
    pub max_iter: usize,
    pub cg: CgOptions,
}

impl Default for PdasOptions {
    fn default() -> Self {
        Self {
            c: 1.0,
            max_iter: 100,
            cg: CgOptions::default(),
        }
    }
}

/// Primal-dual active set (semismooth Newton): guess an active set, solve
/// the reduced linear system with `u = psi` there, update the set from the
/// multiplier rule `lambda_z + c (psi_z - u_z) > 0`, stop when it is
/// stable.
pub fn solve_pdas(sys: &ObstacleSystem, opts: &PdasOptions) -> Result<ViSolution> {
    solve_pdas_from(sys, opts, None)
}

/// Active-set iteration warm-started from a previous solution: the initial
/// guess seeds both the first reduced solve and the initial active set.
pub fn solve_pdas_from(
    sys: &ObstacleSystem,
    opts: &PdasOptions,
    start: Option<&[f64]>,
) -> Result<ViSolution> {
    let n = sys.n();
    for i in 0..n {
        if !(sys.op.diag(i) > 0.0) {
            return Err(Error::InvalidInput(format!(
                "operator is not positive definite: diagonal entry {i} is {}",
                sys.op.diag(i)
            )));
        }
    }
    let mut active: Vec<bool> = match start {
        Some(v) => (0..n)
            .map(|i| {
                sys.constraint[i]
                    .map(|psi| v[i] - psi <= ACTIVE_TIE_TOL)
                    .unwrap_or(false)
            })
            .collect(),
        None => sys
            .constraint
            .iter()
            .map(|c| matches!(c, Some(psi) if *psi > 0.0))
            .collect(),
    };
    let mut u = match start {
        Some(v) => v.to_vec(),
        None => sys.feasible_start(),
    };
    for iteration in 1..=opts.max_iter {
        for i in 0..n {
            if active[i] {
                u[i] = sys.constraint[i].expect("active dof is constrained");
            }
        }
        let (next, _iters) = cg_solve(&sys.op, &sys.rhs, Some(&active), Some(&u), &opts.cg)
            .map_err(|e| match e {
                Error::Singular(msg) => Error::Singular(format!("reduced system: {msg}")),
                other => other,
            })?;
        u = next;
        let residual = sys.op.matvec(&u);
        let mut next_active = vec![false; n];
        for i in 0..n {
            if let Some(psi) = sys.constraint[i] {
                let lambda = residual[i] - sys.rhs[i];
                next_active[i] = lambda + opts.c * (psi - u[i]) > 0.0;
            }
        }
        if next_active == active {
            return Ok(finish(sys, u, iteration, SolverKind::Pdas));
        }
        active = next_active;
    }
    Err(Error::NonConvergence {
        solver: "pdas",
        iterations: opts.max_iter,
        residual: kkt_report(sys, &u, ACTIVE_TIE_TOL).max(),
    })
}

/// Solver selection shared by the drivers and the CLI.
#[derive(Debug, Clone, Copy)]
pub enum SolverChoice {
    Psor(PsorOptions),
    Pdas(PdasOptions),
}

impl SolverChoice {
    pub fn psor_default() -> Self {
        SolverChoice::Psor(PsorOptions::default())
    }

    pub fn pdas_default() -> Self {
        SolverChoice::Pdas(PdasOptions::default())
    }

    /// PSOR with mesh-size-adapted relaxation and the given sweep tolerance.
    pub fn psor_auto(h: f64, tol: f64) -> Self {
        SolverChoice::Psor(PsorOptions::auto_omega(h).with_tol(tol))
    }

    pub fn solve(&self, sys: &ObstacleSystem) -> Result<ViSolution> {
        match self {
            SolverChoice::Psor(opts) => solve_psor(sys, opts),
            SolverChoice::Pdas(opts) => solve_pdas(sys, opts),
        }
    }
}

/// Plain-text vector dump, format `OBSVEC v1`.
pub fn write_obsvec<W: Write>(w: &mut W, values: &[f64]) -> Result<()> {
    writeln!(w, "OBSVEC v1")?;
    writeln!(w, "{}", values.len())?;
    for &v in values {
        writeln!(w, "{}", g17(v))?;
    }
    Ok(())
}

pub fn obsvec_string(values: &[f64]) -> String {
    let mut buf = Vec::new();
    write_obsvec(&mut buf, values).expect("write to Vec");
    String::from_utf8(buf).expect("ascii output")
}

/// Parse an `OBSVEC v1` dump.
pub fn read_obsvec(text: &str) -> Result<Vec<f64>> {
    let mut lines = text.lines();
    match lines.next() {
        Some("OBSVEC v1") => {}
        other => {
            return Err(Error::Format(format!(
                "expected OBSVEC v1 header, found {other:?}"
            )))
        }
    }
    let n: usize = lines
        .next()
        .ok_or_else(|| Error::Format("missing length line".into()))?
        .trim()
        .parse()
        .map_err(|e| Error::Format(format!("bad length: {e}")))?;
    let values: Vec<f64> = lines
        .map(|l| {
            l.trim()
                .parse::<f64>()
                .map_err(|e| Error::Format(format!("bad value: {e}")))
        })
        .collect::<Result<_>>()?;
    if values.len() != n {
        return Err(Error::Format(format!(
            "expected {n} values, found {}",
            values.len()
        )));
    }
    Ok(values)
}
