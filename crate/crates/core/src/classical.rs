//! The classical obstacle problem end to end: benchmark instances with
//! known solutions, the discrete solve, free-boundary extraction by
//! thresholding, and the interface error metrics (symmetric-difference
//! measure and one-sided distance).

use crate::assembly::{
    assemble_load_fn, assemble_stiffness, interpolate_nodal, FeSpace,
};
use crate::error::{Error, Result};
use crate::mesh::{structured_triangle_mesh, uniform_interval_mesh, Rect, SimplicialMesh};
use crate::vi::{solve_psor_from, ObstacleSystem, PsorOptions, SolverChoice, ViSolution};

/// Computational domain of a benchmark.
#[derive(Debug, Clone, Copy)]
pub enum Domain {
    Interval { a: f64, b: f64 },
    Rectangle(Rect),
}

/// W2-infinity seminorm of the 1D benchmark solution (max |u''| = 8).
pub const W2INF_1D: f64 = 8.0;

/// Exact free boundary of the 1D benchmark.
pub const GAMMA_1D: [f64; 2] = [0.25, 0.75];

/// A benchmark instance: domain, data, and (where available) the exact
/// solution. The 2D instance acquires its "exact" solution as an overkill
/// reference computed on a much finer mesh.
pub struct ClassicalBenchmark {
    pub domain: Domain,
    kind: BenchKind,
}

enum BenchKind {
    Quartic1d,
    ObstacleBump2d { reference: Option<Reference2d> },
}

/// Overkill reference for the 2D benchmark: nested projected-SOR solution
/// several refinement levels beyond the finest study level.
pub struct Reference2d {
    pub n: usize,
    pub space: FeSpace,
    /// Full nodal solution values.
    pub u_full: Vec<f64>,
    /// Solution minus interpolated obstacle (the thresholded quantity).
    pub shifted_full: Vec<f64>,
    /// Estimated |u|_W2inf from second differences.
    pub w2inf: f64,
    /// Threshold used for the reference's own interface.
    pub delta: f64,
}

fn quartic_u(x: f64) -> f64 {
    if (0.25..=0.75).contains(&x) {
        let t = x - 0.25;
        4.0 * t * t - 16.0 * t * t * t + 16.0 * t * t * t * t
    } else {
        0.0
    }
}

fn quartic_du(x: f64) -> f64 {
    if (0.25..=0.75).contains(&x) {
        let t = x - 0.25;
        8.0 * t - 48.0 * t * t + 64.0 * t * t * t
    } else {
        0.0
    }
}

fn quartic_ddu(x: f64) -> f64 {
    if (0.25..=0.75).contains(&x) {
        let t = x - 0.25;
        8.0 - 96.0 * t + 192.0 * t * t
    } else {
        0.0
    }
}

fn bump_psi(x: f64, y: f64) -> f64 {
    0.4 - 2.0 * ((x - 0.5) * (x - 0.5) + (y - 0.5) * (y - 0.5))
}

impl ClassicalBenchmark {
    /// Load term.
    pub fn f(&self, p: &[f64]) -> f64 {
        match self.kind {
            BenchKind::Quartic1d => {
                let x = p[0];
                if x > 0.25 && x < 0.75 {
                    -quartic_ddu(x)
                } else {
                    -1.0
                }
            }
            BenchKind::ObstacleBump2d { .. } => -8.0,
        }
    }

    /// Obstacle.
    pub fn psi(&self, p: &[f64]) -> f64 {
        match self.kind {
            BenchKind::Quartic1d => 0.0,
            BenchKind::ObstacleBump2d { .. } => bump_psi(p[0], p[1]),
        }
    }

    /// Exact solution value, if analytic or an overkill reference is
    /// attached.
    pub fn exact_u(&self, p: &[f64]) -> Option<f64> {
        match &self.kind {
            BenchKind::Quartic1d => Some(quartic_u(p[0])),
            BenchKind::ObstacleBump2d { reference } => reference
                .as_ref()
                .map(|r| r.space.mesh().eval_p1(&r.u_full, p)),
        }
    }

    /// Exact gradient (1D analytic only; 2D comparisons go through nested
    /// prolongation instead).
    pub fn exact_grad(&self, p: &[f64]) -> Option<[f64; 2]> {
        match self.kind {
            BenchKind::Quartic1d => Some([quartic_du(p[0]), 0.0]),
            BenchKind::ObstacleBump2d { .. } => None,
        }
    }

    pub fn w2inf(&self) -> Option<f64> {
        match &self.kind {
            BenchKind::Quartic1d => Some(W2INF_1D),
            BenchKind::ObstacleBump2d { reference } => reference.as_ref().map(|r| r.w2inf),
        }
    }

    pub fn reference(&self) -> Option<&Reference2d> {
        match &self.kind {
            BenchKind::ObstacleBump2d { reference } => reference.as_ref(),
            BenchKind::Quartic1d => None,
        }
    }

    pub fn is_one_dimensional(&self) -> bool {
        matches!(self.domain, Domain::Interval { .. })
    }

    /// Compute and attach the overkill reference: nested projected SOR with
    /// mesh-adapted relaxation, `levels_beyond` doublings past
    /// `finest_study_n`.
    pub fn attach_reference(
        &mut self,
        finest_study_n: usize,
        levels_beyond: u32,
        tol: f64,
    ) -> Result<()> {
        let BenchKind::ObstacleBump2d { reference } = &mut self.kind else {
            return Err(Error::InvalidInput(
                "overkill references are built for the 2D benchmark only".into(),
            ));
        };
        let n_ref = finest_study_n << levels_beyond;
        let rect = match self.domain {
            Domain::Rectangle(r) => r,
            Domain::Interval { .. } => unreachable!("2D benchmark has a rectangle domain"),
        };
        let f = |_p: &[f64]| -8.0;
        let psi = |p: &[f64]| bump_psi(p[0], p[1]);
        let (space, sol) = nested_psor_solve(rect, n_ref, tol, &f, &psi, None)?;
        let u_full = space.scatter(&sol.u);
        let psi_full = interpolate_nodal(&space, psi);
        let shifted_full: Vec<f64> = u_full
            .iter()
            .zip(&psi_full)
            .map(|(&u, &p)| u - p)
            .collect();
        let w2inf = estimate_w2inf(space.mesh(), &u_full);
        let h = space.mesh().max_diameter();
        let delta = delta_for_level(h, 1.0, w2inf)?;
        *reference = Some(Reference2d {
            n: n_ref,
            space,
            u_full,
            shifted_full,
            w2inf,
            delta,
        });
        Ok(())
    }
}

/// 1D benchmark on (0, 1) with obstacle zero: the solution is a quartic
/// bubble supported on (1/4, 3/4), glued C^1 to the contact set, with load
/// -u'' inside the support and -1 on the contact set. The multiplier on the
/// contact set is +1 and the free boundary is exactly {1/4, 3/4}.
pub fn benchmark_1d() -> ClassicalBenchmark {
    ClassicalBenchmark {
        domain: Domain::Interval { a: 0.0, b: 1.0 },
        kind: BenchKind::Quartic1d,
    }
}

/// 2D benchmark on the unit square: constant load -8 pressing the membrane
/// onto the paraboloid obstacle 0.4 - 2 |x - c|^2 (admissible: negative on
/// the boundary, positive at the center). Strictly negative load keeps the
/// nondegeneracy property. No closed form; the exact solution is an
/// overkill reference attached by [`ClassicalBenchmark::attach_reference`].
pub fn benchmark_2d() -> ClassicalBenchmark {
    ClassicalBenchmark {
        domain: Domain::Rectangle(Rect::unit_square()),
        kind: BenchKind::ObstacleBump2d { reference: None },
    }
}

/// Assemble and solve one discrete instance of the benchmark at mesh
/// parameter `n` (cells in 1D, cells per side in 2D). All interior nodes
/// are constrained by the interpolated obstacle.
pub fn solve_classical(
    bench: &ClassicalBenchmark,
    n: usize,
    solver: &SolverChoice,
) -> Result<(ViSolution, FeSpace)> {
    let mesh = build_mesh(&bench.domain, n)?;
    let space = FeSpace::with_zero_boundary(mesh);
    let sys = build_system(bench, &space)?;
    let sol = solver.solve(&sys)?;
    Ok((sol, space))
}

fn build_mesh(domain: &Domain, n: usize) -> Result<SimplicialMesh> {
    match *domain {
        Domain::Interval { a, b } => uniform_interval_mesh(a, b, n),
        Domain::Rectangle(rect) => structured_triangle_mesh(rect, n),
    }
}

fn build_system(bench: &ClassicalBenchmark, space: &FeSpace) -> Result<ObstacleSystem> {
    let op = assemble_stiffness(space)?;
    let rhs = assemble_load_fn(space, |p| bench.f(p))?;
    let psi_full = interpolate_nodal(space, |p| bench.psi(p));
    let constraint: Vec<Option<f64>> = space
        .free_nodes()
        .iter()
        .map(|&node| Some(psi_full[node]))
        .collect();
    ObstacleSystem::new(op, rhs, constraint)
}

/// Nested-refinement projected SOR: solve on n = n0, 2 n0, ..., n_target,
/// warm-starting each level from the prolonged previous solution. Used for
/// the overkill references.
pub fn nested_psor_solve(
    rect: Rect,
    n_target: usize,
    tol: f64,
    f: &dyn Fn(&[f64]) -> f64,
    psi: &dyn Fn(&[f64]) -> f64,
    coarsest: Option<usize>,
) -> Result<(FeSpace, ViSolution)> {
    let n0 = coarsest.unwrap_or(8).min(n_target);
    let mut ladder = vec![n_target];
    let mut n = n_target;
    while n > n0 && n % 2 == 0 {
        n /= 2;
        ladder.push(n);
    }
    ladder.reverse();

    let mut previous: Option<(SimplicialMesh, Vec<f64>)> = None;
    let mut out = None;
    for &level_n in &ladder {
        let mesh = structured_triangle_mesh(rect, level_n)?;
        let space = FeSpace::with_zero_boundary(mesh);
        let op = assemble_stiffness(&space)?;
        let rhs = assemble_load_fn(&space, f)?;
        let psi_full = interpolate_nodal(&space, psi);
        let constraint: Vec<Option<f64>> = space
            .free_nodes()
            .iter()
            .map(|&node| Some(psi_full[node]))
            .collect();
        let sys = ObstacleSystem::new(op, rhs, constraint)?;
        let h = space.mesh().max_diameter();
        let opts = PsorOptions::auto_omega(h).with_tol(tol);
        let start = previous.as_ref().map(|(coarse_mesh, coarse_full)| {
            let full = crate::assembly::prolong_nodal(coarse_mesh, coarse_full, space.mesh());
            space.restrict(&full)
        });
        let sol = solve_psor_from(&sys, &opts, start.as_deref())?;
        let full = space.scatter(&sol.u);
        previous = Some((space.mesh().clone(), full));
        out = Some((space, sol));
    }
    Ok(out.expect("ladder is nonempty"))
}

/// Estimate |u|_W2inf from second differences of a discrete solution on a
/// structured mesh (used when no analytic seminorm exists).
pub fn estimate_w2inf(mesh: &SimplicialMesh, full: &[f64]) -> f64 {
    let crate::mesh::MeshKind::StructuredRect { rect, n } = mesh.kind else {
        return 0.0;
    };
    let hx = (rect.x1 - rect.x0) / n as f64;
    let hy = (rect.y1 - rect.y0) / n as f64;
    let stride = n + 1;
    let mut worst = 0.0_f64;
    for j in 1..n {
        for i in 1..n {
            let c = full[j * stride + i];
            let dxx = (full[j * stride + i - 1] - 2.0 * c + full[j * stride + i + 1]) / (hx * hx);
            let dyy =
                (full[(j - 1) * stride + i] - 2.0 * c + full[(j + 1) * stride + i]) / (hy * hy);
            let dxy = (full[(j + 1) * stride + i + 1] - full[(j + 1) * stride + i - 1]
                - full[(j - 1) * stride + i + 1]
                + full[(j - 1) * stride + i - 1])
                / (4.0 * hx * hy);
            worst = worst.max(dxx.abs()).max(dyy.abs()).max(dxy.abs());
        }
    }
    worst
}

/// Interface threshold `delta = c_star h^2 |log h| w2inf`.
pub fn delta_for_level(h: f64, c_star: f64, w2inf: f64) -> Result<f64> {
    if !(h > 0.0 && h < 1.0) {
        return Err(Error::InvalidInput(format!(
            "threshold formula requires h in (0, 1), got {h}"
        )));
    }
    Ok(c_star * h * h * h.ln().abs() * w2inf)
}

/// Calibrate the unknowable constant: the smallest power of two c such
/// that `linf_err <= c h^2 |log h| w2inf` holds on the supplied
/// (coarse-level) pairs.
pub fn calibrate_c_star(coarse_pairs: &[(f64, f64)], w2inf: f64) -> Result<f64> {
    let mut needed = 0.0_f64;
    for &(h, err) in coarse_pairs {
        if !(h > 0.0 && h < 1.0) || err < 0.0 {
            return Err(Error::InvalidInput("calibration pair out of range".into()));
        }
        needed = needed.max(err / (h * h * h.ln().abs() * w2inf));
    }
    if needed == 0.0 {
        return Ok(1.0);
    }
    Ok(2.0_f64.powi(needed.log2().ceil() as i32))
}

/// Discrete interface data extracted from a thresholded solution.
#[derive(Debug, Clone)]
pub struct FreeBoundaryEstimate {
    pub delta: f64,
    /// Exact measure of the set {v > delta} in its piecewise-linear
    /// representation.
    pub omega_plus_measure: f64,
    /// Cells meeting {v > delta}.
    pub omega_plus_cells: Vec<usize>,
    pub interface: Interface,
}

#[derive(Debug, Clone)]
pub enum Interface {
    Points1d {
        /// Interior endpoints of the super-level intervals.
        points: Vec<f64>,
        /// Maximal intervals of {v > delta}.
        intervals: Vec<(f64, f64)>,
    },
    Segments2d {
        /// Level-set segments per cut cell.
        segments: Vec<[[f64; 2]; 2]>,
    },
}

impl Interface {
    pub fn points_1d(&self) -> &[f64] {
        match self {
            Interface::Points1d { points, .. } => points,
            Interface::Segments2d { .. } => &[],
        }
    }
}

/// Threshold the discrete function at `delta`: the non-coincidence
/// candidate is {v > delta}, the discrete free boundary its interior
/// boundary. `full_nodal` holds the values at all mesh nodes.
pub fn extract_free_boundary(
    space: &FeSpace,
    full_nodal: &[f64],
    delta: f64,
) -> Result<FreeBoundaryEstimate> {
    if delta < 0.0 {
        return Err(Error::InvalidInput("threshold must be nonnegative".into()));
    }
    let mesh = space.mesh();
    match mesh.dim {
        1 => extract_1d(mesh, full_nodal, delta),
        _ => extract_2d(mesh, full_nodal, delta),
    }
}

fn extract_1d(mesh: &SimplicialMesh, v: &[f64], delta: f64) -> Result<FreeBoundaryEstimate> {
    let mut raw: Vec<(f64, f64)> = Vec::new();
    let mut cells = Vec::new();
    for c in 0..mesh.n_cells() {
        let cell = mesh.cell(c);
        let (x0, x1) = (mesh.vertex(cell[0])[0], mesh.vertex(cell[1])[0]);
        let (v0, v1) = (v[cell[0]] - delta, v[cell[1]] - delta);
        let piece = if v0 > 0.0 && v1 > 0.0 {
            Some((x0, x1))
        } else if v0 > 0.0 {
            // downcrossing inside the cell
            Some((x0, x0 + (x1 - x0) * v0 / (v0 - v1)))
        } else if v1 > 0.0 {
            Some((x0 + (x1 - x0) * (-v0) / (v1 - v0), x1))
        } else {
            None
        };
        if let Some(p) = piece {
            if p.1 > p.0 {
                raw.push(p);
                cells.push(c);
            }
        }
    }
    raw.sort_by(|a, b| a.0.partial_cmp(&b.0).expect("finite endpoints"));
    let mut intervals: Vec<(f64, f64)> = Vec::new();
    for p in raw {
        match intervals.last_mut() {
            Some(last) if p.0 <= last.1 + 1e-14 => last.1 = last.1.max(p.1),
            _ => intervals.push(p),
        }
    }
    let measure = intervals.iter().map(|(a, b)| b - a).sum();
    // interface = interval endpoints interior to the domain
    let (dom_a, dom_b) = domain_span(mesh);
    let mut points = Vec::new();
    for &(a, b) in &intervals {
        if a > dom_a + 1e-14 {
            points.push(a);
        }
        if b < dom_b - 1e-14 {
            points.push(b);
        }
    }
    Ok(FreeBoundaryEstimate {
        delta,
        omega_plus_measure: measure,
        omega_plus_cells: cells,
        interface: Interface::Points1d { points, intervals },
    })
}

fn domain_span(mesh: &SimplicialMesh) -> (f64, f64) {
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for i in 0..mesh.n_vertices() {
        lo = lo.min(mesh.vertex(i)[0]);
        hi = hi.max(mesh.vertex(i)[0]);
    }
    (lo, hi)
}

fn extract_2d(mesh: &SimplicialMesh, v: &[f64], delta: f64) -> Result<FreeBoundaryEstimate> {
    let mut measure = 0.0;
    let mut cells = Vec::new();
    let mut segments = Vec::new();
    for c in 0..mesh.n_cells() {
        let cell = mesh.cell(c);
        let p: Vec<[f64; 2]> = cell
            .iter()
            .map(|&i| {
                let q = mesh.vertex(i);
                [q[0], q[1]]
            })
            .collect();
        let w: Vec<f64> = cell.iter().map(|&i| v[i] - delta).collect();
        let (area_above, crossings) = clip_triangle_above(&p, &w);
        if area_above > 0.0 {
            measure += area_above;
            cells.push(c);
        }
        if let Some(seg) = crossings {
            segments.push(seg);
        }
    }
    Ok(FreeBoundaryEstimate {
        delta,
        omega_plus_measure: measure,
        omega_plus_cells: cells,
        interface: Interface::Segments2d { segments },
    })
}

/// Area of {w > 0} within the triangle (w linear with vertex values) and
/// the zero-level segment when the cell is cut.
fn clip_triangle_above(p: &[[f64; 2]], w: &[f64]) -> (f64, Option<[[f64; 2]; 2]>) {
    let above: Vec<usize> = (0..3).filter(|&i| w[i] > 0.0).collect();
    let tri_area = |a: &[f64; 2], b: &[f64; 2], c: &[f64; 2]| -> f64 {
        0.5 * ((b[0] - a[0]) * (c[1] - a[1]) - (c[0] - a[0]) * (b[1] - a[1])).abs()
    };
    let cut = |i: usize, j: usize| -> [f64; 2] {
        let t = w[i] / (w[i] - w[j]);
        [
            p[i][0] + t * (p[j][0] - p[i][0]),
            p[i][1] + t * (p[j][1] - p[i][1]),
        ]
    };
    match above.len() {
        0 => (0.0, None),
        3 => (tri_area(&p[0], &p[1], &p[2]), None),
        1 => {
            let i = above[0];
            let (j, k) = ((i + 1) % 3, (i + 2) % 3);
            let a = cut(i, j);
            let b = cut(i, k);
            (tri_area(&p[i], &a, &b), Some([a, b]))
        }
        _ => {
            let below = (0..3).find(|i| !above.contains(i)).expect("one below");
            let (j, k) = ((below + 1) % 3, (below + 2) % 3);
            let a = cut(j, below);
            let b = cut(k, below);
            let total = tri_area(&p[0], &p[1], &p[2]);
            (total - tri_area(&p[below], &a, &b), Some([a, b]))
        }
    }
}

/// Interface error metrics against the benchmark's exact (or reference)
/// free boundary, restricted to the compact subset that stays `margin`
/// away from the domain boundary. Returns (symmetric-difference measure,
/// sup distance of discrete interface points to the exact interface).
pub fn interface_metrics(
    est: &FreeBoundaryEstimate,
    bench: &ClassicalBenchmark,
    est_source: Option<(&FeSpace, &[f64])>,
    margin: f64,
) -> Result<(f64, f64)> {
    match (&bench.kind, &est.interface) {
        (BenchKind::Quartic1d, Interface::Points1d { points, intervals }) => {
            let (a, b) = match bench.domain {
                Domain::Interval { a, b } => (a, b),
                Domain::Rectangle(_) => unreachable!(),
            };
            let window = (a + margin, b - margin);
            let exact = (GAMMA_1D[0], GAMMA_1D[1]);
            let sym = interval_symmetric_difference(intervals, &[exact], window);
            let mut dist = 0.0_f64;
            for &x in points {
                if x >= window.0 && x <= window.1 {
                    dist = dist.max((x - GAMMA_1D[0]).abs().min((x - GAMMA_1D[1]).abs()));
                }
            }
            Ok((sym, dist))
        }
        (BenchKind::ObstacleBump2d { reference }, Interface::Segments2d { segments }) => {
            let reference = reference.as_ref().ok_or_else(|| {
                Error::InvalidInput("2D metrics need the overkill reference attached".into())
            })?;
            let (space, shifted) = est_source.ok_or_else(|| {
                Error::InvalidInput("2D metrics need the thresholded discrete data".into())
            })?;
            Ok(metrics_2d(est, segments, space, shifted, reference, margin))
        }
        _ => Err(Error::InvalidInput(
            "estimate dimensionality does not match the benchmark".into(),
        )),
    }
}

fn interval_symmetric_difference(
    a: &[(f64, f64)],
    b: &[(f64, f64)],
    window: (f64, f64),
) -> f64 {
    let clip = |set: &[(f64, f64)]| -> Vec<(f64, f64)> {
        set.iter()
            .filter_map(|&(lo, hi)| {
                let lo = lo.max(window.0);
                let hi = hi.min(window.1);
                (hi > lo).then_some((lo, hi))
            })
            .collect()
    };
    let a = clip(a);
    let b = clip(b);
    let len = |set: &[(f64, f64)]| -> f64 { set.iter().map(|(lo, hi)| hi - lo).sum() };
    let mut inter = 0.0;
    for &(lo1, hi1) in &a {
        for &(lo2, hi2) in &b {
            inter += (hi1.min(hi2) - lo1.max(lo2)).max(0.0);
        }
    }
    len(&a) + len(&b) - 2.0 * inter
}

fn metrics_2d(
    est: &FreeBoundaryEstimate,
    segments: &[[[f64; 2]; 2]],
    space: &FeSpace,
    shifted: &[f64],
    reference: &Reference2d,
    margin: f64,
) -> (f64, f64) {
    let rect = match space.mesh().kind {
        crate::mesh::MeshKind::StructuredRect { rect, .. } => rect,
        _ => Rect::unit_square(),
    };
    // membership sampling on a deterministic grid of >= 10^4 points
    let grid = 128usize;
    let mut disagree = 0usize;
    let mut total = 0usize;
    for j in 0..grid {
        for i in 0..grid {
            let x = rect.x0 + (rect.x1 - rect.x0) * (i as f64 + 0.5) / grid as f64;
            let y = rect.y0 + (rect.y1 - rect.y0) * (j as f64 + 0.5) / grid as f64;
            if x < rect.x0 + margin
                || x > rect.x1 - margin
                || y < rect.y0 + margin
                || y > rect.y1 - margin
            {
                continue;
            }
            total += 1;
            let here = space.mesh().eval_p1(shifted, &[x, y]) > est.delta;
            let there = reference
                .space
                .mesh()
                .eval_p1(&reference.shifted_full, &[x, y])
                > reference.delta;
            if here != there {
                disagree += 1;
            }
        }
    }
    let window_area = ((rect.x1 - rect.x0) - 2.0 * margin).max(0.0)
        * ((rect.y1 - rect.y0) - 2.0 * margin).max(0.0);
    let sym = if total > 0 {
        window_area * disagree as f64 / total as f64
    } else {
        0.0
    };
    // sup distance: discrete interface sample points to the reference
    // interface (sampled the same way on the reference function's own mesh)
    let ref_est = extract_free_boundary(&reference.space, &reference.shifted_full, reference.delta)
        .expect("reference threshold");
    let ref_points: Vec<[f64; 2]> = match &ref_est.interface {
        Interface::Segments2d { segments } => segments
            .iter()
            .flat_map(|s| s.iter().copied())
            .collect(),
        Interface::Points1d { .. } => Vec::new(),
    };
    let mut sup = 0.0_f64;
    for seg in segments {
        for p in seg {
            if p[0] < rect.x0 + margin
                || p[0] > rect.x1 - margin
                || p[1] < rect.y0 + margin
                || p[1] > rect.y1 - margin
            {
                continue;
            }
            let mut best = f64::INFINITY;
            for q in &ref_points {
                let d = ((p[0] - q[0]).powi(2) + (p[1] - q[1]).powi(2)).sqrt();
                best = best.min(d);
            }
            if best.is_finite() {
                sup = sup.max(best);
            }
        }
    }
    (sym, sup)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::vi::kkt_report;

    #[test]
    fn benchmark_values_pin() {
        let b = benchmark_1d();
        assert!((b.exact_u(&[0.5]).unwrap() - 1.0 / 16.0).abs() < 1e-15);
        // multiplier on the contact set: -u'' - f = 0 - (-1) = 1
        assert!((0.0 - b.f(&[0.1]) - 1.0).abs() < 1e-15);
        // C^1 matching at the free boundary
        assert!(quartic_u(0.25).abs() < 1e-15);
        assert!(quartic_du(0.25).abs() < 1e-15);
        assert!(quartic_u(0.75).abs() < 1e-14);
        assert!(quartic_du(0.75).abs() < 1e-13);
    }

    #[test]
    fn benchmark_complementarity_on_dense_grid() {
        let b = benchmark_1d();
        for k in 0..=2000 {
            let x = k as f64 / 2000.0;
            if x == 0.25 || x == 0.75 {
                // lambda has one-sided limits at the interface; a.e. identity
                continue;
            }
            let u = quartic_u(x);
            assert!(u >= 0.0, "feasibility at {x}");
            let lambda = -quartic_ddu(x) - b.f(&[x]);
            if x < 0.25 || x > 0.75 {
                assert!((lambda - 1.0).abs() < 1e-10, "multiplier at {x}");
            } else {
                assert!(lambda.abs() < 1e-10, "stationarity at {x}");
            }
            assert!(lambda * u < 1e-10, "complementarity at {x}");
        }
    }

    #[test]
    fn solve_1d_certificate_and_feasibility() {
        let bench = benchmark_1d();
        let (sol, space) = solve_classical(
            &bench,
            8,
            &SolverChoice::Psor(PsorOptions::default().with_tol(1e-12)),
        )
        .unwrap();
        assert!(sol.kkt_residual() <= 1e-9, "kkt {}", sol.kkt_residual());
        // nodal feasibility is exact after projection
        for (dof, &node) in space.free_nodes().iter().enumerate() {
            let psi = bench.psi(space.mesh().vertex(node));
            assert!(sol.u[dof] >= psi);
        }
    }

    #[test]
    fn inactive_constraint_matches_linear_fem() {
        // push the obstacle far below: the VI solve equals the linear solve
        let mesh = uniform_interval_mesh(0.0, 1.0, 16).unwrap();
        let space = FeSpace::with_zero_boundary(mesh);
        let op = assemble_stiffness(&space).unwrap();
        let rhs = assemble_load_fn(&space, |p| (std::f64::consts::PI * p[0]).sin()).unwrap();
        let constraint = vec![Some(-1e6); space.n_dofs()];
        let sys = ObstacleSystem::new(op.clone(), rhs.clone(), constraint).unwrap();
        let sol = crate::vi::solve_pdas(&sys, &Default::default()).unwrap();
        let linear = crate::sparse::cg_solve(&op, &rhs, None, None, &Default::default())
            .unwrap()
            .0;
        for (a, b) in sol.u.iter().zip(&linear) {
            assert!((a - b).abs() < 1e-9);
        }
        assert!(sol.active_set.is_empty());
    }

    #[test]
    fn refining_reduces_h1_error_at_first_order() {
        let bench = benchmark_1d();
        let mut errs = Vec::new();
        for n in [16usize, 32] {
            let (sol, space) =
                solve_classical(&bench, n, &SolverChoice::psor_auto(1.0 / n as f64, 1e-12))
                    .unwrap();
            let full = space.scatter(&sol.u);
            let err = crate::assembly::energy_norm_error(&space, &full, |p| {
                bench.exact_grad(p).unwrap()
            });
            errs.push(err);
        }
        let ratio = errs[0] / errs[1];
        assert!((1.7..=2.3).contains(&ratio), "ratio {ratio}");
    }

    #[test]
    fn free_boundary_hand_example() {
        let mesh = uniform_interval_mesh(0.0, 1.0, 2).unwrap();
        let space = FeSpace::with_zero_boundary(mesh);
        let est = extract_free_boundary(&space, &[0.0, 1.0, 0.0], 0.5).unwrap();
        match &est.interface {
            Interface::Points1d { points, intervals } => {
                assert_eq!(points.as_slice(), &[0.25, 0.75]);
                assert_eq!(intervals.as_slice(), &[(0.25, 0.75)]);
            }
            _ => panic!("expected 1D interface"),
        }
        assert!((est.omega_plus_measure - 0.5).abs() < 1e-15);
    }

    #[test]
    fn free_boundary_degenerate_thresholds() {
        let mesh = uniform_interval_mesh(0.0, 1.0, 4).unwrap();
        let space = FeSpace::with_zero_boundary(mesh);
        // delta = 0 with v > 0 everywhere except boundary: interface empty
        let est = extract_free_boundary(&space, &[0.1, 1.0, 1.0, 1.0, 0.1], 0.0).unwrap();
        assert!(est.interface.points_1d().is_empty());
        assert!((est.omega_plus_measure - 1.0).abs() < 1e-14);
        // delta above the max: empty set
        let est = extract_free_boundary(&space, &[0.0, 0.4, 0.5, 0.4, 0.0], 2.0).unwrap();
        assert_eq!(est.omega_plus_measure, 0.0);
        assert!(est.omega_plus_cells.is_empty());
        // negative threshold rejected
        assert!(extract_free_boundary(&space, &[0.0; 5], -0.1).is_err());
    }

    #[test]
    fn metrics_1d_hand_examples() {
        let bench = benchmark_1d();
        let est = FreeBoundaryEstimate {
            delta: 0.0,
            omega_plus_measure: 0.52,
            omega_plus_cells: vec![],
            interface: Interface::Points1d {
                points: vec![0.24, 0.76],
                intervals: vec![(0.24, 0.76)],
            },
        };
        let (sym, dist) = interface_metrics(&est, &bench, None, 0.05).unwrap();
        assert!((dist - 0.01).abs() < 1e-12);
        assert!((sym - 0.02).abs() < 1e-12);
        // exact interface: both metrics zero
        let exact = FreeBoundaryEstimate {
            delta: 0.0,
            omega_plus_measure: 0.5,
            omega_plus_cells: vec![],
            interface: Interface::Points1d {
                points: vec![0.25, 0.75],
                intervals: vec![(0.25, 0.75)],
            },
        };
        let (sym, dist) = interface_metrics(&exact, &bench, None, 0.05).unwrap();
        assert_eq!(sym, 0.0);
        assert_eq!(dist, 0.0);
    }

    #[test]
    fn delta_formula() {
        let d = delta_for_level(0.1, 1.0, 1.0).unwrap();
        assert!((d - 0.01 * 10.0_f64.ln()).abs() < 1e-15);
        assert_eq!(delta_for_level(0.1, 0.0, 1.0).unwrap(), 0.0);
        let twice = delta_for_level(0.1, 1.0, 2.0).unwrap();
        assert!((twice - 2.0 * d).abs() < 1e-15);
        assert!(delta_for_level(1.0, 1.0, 1.0).is_err());
    }

    #[test]
    fn calibration_picks_power_of_two() {
        let c = calibrate_c_star(&[(0.125, 0.01), (0.0625, 0.004)], 8.0).unwrap();
        assert!(c.log2().fract() == 0.0);
        for &(h, err) in &[(0.125, 0.01), (0.0625, 0.004)] {
            assert!(err <= c * h * h * h.ln().abs() * 8.0 + 1e-15);
        }
    }

    #[test]
    fn triangle_clip_cases() {
        let p = [[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]];
        // all above
        let (a, seg) = clip_triangle_above(&p, &[1.0, 1.0, 1.0]);
        assert!((a - 0.5).abs() < 1e-15);
        assert!(seg.is_none());
        // one above: quarter of the area for symmetric cut
        let (a, seg) = clip_triangle_above(&p, &[1.0, -1.0, -1.0]);
        assert!((a - 0.125).abs() < 1e-15);
        assert!(seg.is_some());
        // two above
        let (a, _) = clip_triangle_above(&p, &[-1.0, 1.0, 1.0]);
        assert!((a - 0.375).abs() < 1e-15);
        // none
        let (a, seg) = clip_triangle_above(&p, &[-1.0, -0.5, -2.0]);
        assert_eq!(a, 0.0);
        assert!(seg.is_none());
    }

    #[test]
    fn reference_2d_is_dihedral_symmetric_and_feasible() {
        let mut bench = benchmark_2d();
        // small reference (two doublings past n = 8) keeps this quick; the
        // study harness uses four
        bench.attach_reference(8, 2, 1e-12).unwrap();
        let r = bench.reference().unwrap();
        let n = r.n;
        let stride = n + 1;
        let mut worst = 0.0_f64;
        for j in 0..=n {
            for i in 0..=n {
                let u = r.u_full[j * stride + i];
                // reflections and the diagonal transposition
                for &v in &[
                    r.u_full[j * stride + (n - i)],
                    r.u_full[(n - j) * stride + i],
                    r.u_full[i * stride + j],
                ] {
                    worst = worst.max((u - v).abs());
                }
            }
        }
        assert!(worst <= 1e-9, "reference asymmetry {worst:e}");
        // feasibility against the interpolated obstacle, and a nonempty
        // contact region for the constant negative load
        let psi_full = interpolate_nodal(&r.space, |p| bench.psi(p));
        let mut contact = 0usize;
        for (u, p) in r.u_full.iter().zip(&psi_full) {
            assert!(u >= &(p - 1e-12));
            if (u - p).abs() <= 1e-8 {
                contact += 1;
            }
        }
        assert!(contact > 0, "contact region is empty");
    }

    #[test]
    fn kkt_report_ties_out_with_solver_certificate() {
        let bench = benchmark_1d();
        let (sol, space) = solve_classical(&bench, 16, &SolverChoice::pdas_default()).unwrap();
        let sys = build_system(&bench, &space).unwrap();
        let report = kkt_report(&sys, &sol.u, crate::vi::ACTIVE_TIE_TOL);
        assert!(report.max() <= 1e-8);
    }
}
