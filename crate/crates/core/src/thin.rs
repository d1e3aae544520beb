//! The boundary (Signorini) obstacle problem: operator `-Laplace + I` on a
//! rectangle, every node free, and the unilateral constraint `u >= g`
//! imposed on the boundary nodes only. The discrete conormal flux
//! `(A u - f)_z` at a boundary node plays the multiplier role, so the same
//! complementarity certificate applies, restricted to the boundary.

use std::rc::Rc;

use crate::assembly::{assemble_load_fn, assemble_mass_plus_stiffness, FeSpace};
use crate::error::Result;
use crate::mesh::{structured_triangle_mesh, Rect};
use crate::vi::{kkt_report, KktReport, ObstacleSystem, SolverChoice, ViSolution};

/// Problem data: rectangle domain, volume load `f`, boundary obstacle `g`.
#[derive(Clone)]
pub struct ThinProblem {
    pub rect: Rect,
    pub f: Rc<dyn Fn(&[f64]) -> f64>,
    pub g: Rc<dyn Fn(&[f64]) -> f64>,
}

impl ThinProblem {
    pub fn new(
        rect: Rect,
        f: impl Fn(&[f64]) -> f64 + 'static,
        g: impl Fn(&[f64]) -> f64 + 'static,
    ) -> Self {
        Self {
            rect,
            f: Rc::new(f),
            g: Rc::new(g),
        }
    }

    /// Default benchmark on the unit square: a left/right antisymmetric
    /// load and a smooth boundary obstacle that peaks mid-edge. The
    /// constraint comes out active on part of the boundary and inactive
    /// elsewhere, so both complementarity branches are exercised.
    pub fn benchmark() -> Self {
        Self::new(
            Rect::unit_square(),
            |p| 8.0 * (p[0] - 0.5),
            |p| 0.5 - (p[0] - 0.5) * (p[0] - 0.5) - (p[1] - 0.5) * (p[1] - 0.5),
        )
    }
}

/// Assemble and solve at `n_per_side`. All nodes are unknowns; the
/// boundary nodes are constrained by the interpolated obstacle.
pub fn solve_thin(
    prob: &ThinProblem,
    n_per_side: usize,
    solver: &SolverChoice,
) -> Result<(ViSolution, FeSpace)> {
    let (sys, space) = build_thin_system(prob, n_per_side)?;
    let sol = solver.solve(&sys)?;
    Ok((sol, space))
}

/// The discrete system: `A = stiffness + mass`, load from `f`, boundary
/// constraints from `g`.
pub fn build_thin_system(
    prob: &ThinProblem,
    n_per_side: usize,
) -> Result<(ObstacleSystem, FeSpace)> {
    let mesh = structured_triangle_mesh(prob.rect, n_per_side)?;
    let space = FeSpace::all_free(mesh);
    let op = assemble_mass_plus_stiffness(&space)?;
    let rhs = assemble_load_fn(&space, |p| (prob.f)(p))?;
    let mut constraint = vec![None; space.n_dofs()];
    for &node in space.trace_nodes() {
        let dof = space.dof_of(node).expect("boundary nodes are free here");
        constraint[dof] = Some((prob.g)(space.mesh().vertex(node)));
    }
    let sys = ObstacleSystem::new(op, rhs, constraint)?;
    Ok((sys, space))
}

/// Signorini complementarity certificate: the usual residual triple, which
/// by construction of the system runs over the boundary dofs (the only
/// constrained ones). `tie_tol` classifies active ties.
pub fn signorini_report(sys: &ObstacleSystem, u: &[f64], tie_tol: f64) -> KktReport {
    kkt_report(sys, u, tie_tol)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracle::{brute_force_vi, DenseMatrix};
    use crate::vi::{solve_pdas, solve_psor, PdasOptions, PsorOptions, ACTIVE_TIE_TOL};

    #[test]
    fn huge_negative_obstacle_is_pure_neumann_solve() {
        let prob = ThinProblem::new(Rect::unit_square(), |p| (p[0] + p[1]).sin(), |_| -1e6);
        let (sys, _space) = build_thin_system(&prob, 8).unwrap();
        let sol = solve_pdas(&sys, &PdasOptions::default()).unwrap();
        assert!(sol.active_set.is_empty());
        let linear = crate::sparse::cg_solve(&sys.op, &sys.rhs, None, None, &Default::default())
            .unwrap()
            .0;
        for (a, b) in sol.u.iter().zip(&linear) {
            assert!((a - b).abs() < 1e-9);
        }
    }

    #[test]
    fn constant_obstacle_zero_load_verified_against_oracle() {
        // f = 0, g = 1 on n = 2: boundary clamps to 1, interior solves the
        // reduced system; the exhaustive oracle certifies the active set.
        let prob = ThinProblem::new(Rect::unit_square(), |_| 0.0, |_| 1.0);
        let (sys, space) = build_thin_system(&prob, 2).unwrap();
        let n = sys.n();
        let mut dense = DenseMatrix::zeros(n);
        for i in 0..n {
            let (cols, vals) = sys.op.row(i);
            for (&j, &v) in cols.iter().zip(vals) {
                dense.set(i, j, v);
            }
        }
        let oracle = brute_force_vi(&dense, &sys.rhs, &sys.constraint, 1e-10).unwrap();
        for solver in [
            SolverChoice::Psor(PsorOptions::default().with_tol(1e-13)),
            SolverChoice::pdas_default(),
        ] {
            let sol = solver.solve(&sys).unwrap();
            for (a, b) in sol.u.iter().zip(&oracle) {
                assert!((a - b).abs() < 1e-8, "{a} vs {b}");
            }
            // all boundary nodes active at g = 1
            for &node in space.trace_nodes() {
                let dof = space.dof_of(node).unwrap();
                assert!((sol.u[dof] - 1.0).abs() <= ACTIVE_TIE_TOL);
            }
            // interior strictly below 1 (maximum principle)
            for dof in 0..n {
                let node = space.node_of(dof);
                if !space.mesh().is_boundary_node(node) {
                    assert!(sol.u[dof] < 1.0);
                }
            }
        }
    }

    #[test]
    fn benchmark_has_mixed_active_set() {
        let prob = ThinProblem::benchmark();
        let (sys, space) = build_thin_system(&prob, 8).unwrap();
        let sol = solve_pdas(&sys, &PdasOptions::default()).unwrap();
        let boundary_count = space.trace_nodes().len();
        assert!(!sol.active_set.is_empty(), "constraint never binds");
        assert!(
            sol.active_set.len() < boundary_count,
            "constraint binds everywhere"
        );
        let report = signorini_report(&sys, &sol.u, ACTIVE_TIE_TOL);
        assert!(report.max() <= 1e-8, "certificate {report:?}");
    }

    #[test]
    fn boundary_feasibility_exact_after_projection() {
        let prob = ThinProblem::benchmark();
        let (sys, space) = build_thin_system(&prob, 12).unwrap();
        let sol = solve_psor(&sys, &PsorOptions::default().with_tol(1e-12)).unwrap();
        for &node in space.trace_nodes() {
            let dof = space.dof_of(node).unwrap();
            let g = (prob.g)(space.mesh().vertex(node));
            assert!(sol.u[dof] >= g, "node {node}");
        }
        let _ = sys;
    }

    #[test]
    fn cross_solver_agreement() {
        let prob = ThinProblem::benchmark();
        let (sys, _) = build_thin_system(&prob, 10).unwrap();
        let a = solve_psor(&sys, &PsorOptions::default().with_tol(1e-13)).unwrap();
        let b = solve_pdas(&sys, &PdasOptions::default()).unwrap();
        for (x, y) in a.u.iter().zip(&b.u) {
            assert!((x - y).abs() < 1e-8);
        }
    }

    #[test]
    fn perturbed_boundary_node_shows_in_report() {
        let prob = ThinProblem::benchmark();
        let (sys, _space) = build_thin_system(&prob, 6).unwrap();
        let sol = solve_pdas(&sys, &PdasOptions::default()).unwrap();
        let mut u = sol.u.clone();
        // push an active boundary node off the obstacle: complementarity
        // picks up the product of the (positive) flux and the new slack
        let &active = sol.active_set.first().expect("benchmark has active nodes");
        u[active] += 0.1;
        let report = signorini_report(&sys, &u, ACTIVE_TIE_TOL);
        assert!(report.complementarity > 1e-6 || report.stationarity > 1e-6);
    }
}
