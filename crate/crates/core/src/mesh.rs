//! Interval and triangular meshes, graded axial partitions, and the
//! tensor-product cylinder meshes built from them.
//!
//! Two-dimensional domains are axis-aligned rectangles meshed with the
//! single-diagonal right-triangle pattern, which is weakly acute by
//! construction and therefore supports the discrete maximum principle.
//! Axial partitions of `[0, Y]` follow the radical grading
//! `y_k = (k/M)^gamma * Y` that concentrates cells near `y = 0`.

use std::io::Write;

use crate::error::{Error, Result};
use crate::fmt::g17;

/// Axis-aligned rectangle `[x0, x1] x [y0, y1]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Rect {
    pub x0: f64,
    pub x1: f64,
    pub y0: f64,
    pub y1: f64,
}

impl Rect {
    pub fn unit_square() -> Self {
        Rect {
            x0: 0.0,
            x1: 1.0,
            y0: 0.0,
            y1: 1.0,
        }
    }

    pub fn area(&self) -> f64 {
        (self.x1 - self.x0) * (self.y1 - self.y0)
    }

    pub fn is_degenerate(&self) -> bool {
        !(self.x1 > self.x0) || !(self.y1 > self.y0)
    }
}

/// Construction metadata. Keeps point location O(1)/O(log n) on generated
/// meshes, which the overkill-reference comparisons rely on.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum MeshKind {
    Interval { a: f64, b: f64, n: usize },
    StructuredRect { rect: Rect, n: usize },
    General,
}

/// Conforming simplicial mesh in one or two dimensions.
///
/// Vertex coordinates are stored flattened with stride `dim`; cells are
/// vertex-index tuples with stride `dim + 1`. Indices are 0-based.
#[derive(Debug, Clone)]
pub struct SimplicialMesh {
    pub dim: usize,
    coords: Vec<f64>,
    cells: Vec<usize>,
    boundary: Vec<usize>,
    is_boundary: Vec<bool>,
    pub kind: MeshKind,
}

/// Default cap on the shape coefficient h_T / rho_T.
pub const DEFAULT_SIGMA_MAX: f64 = 10.0;

impl SimplicialMesh {
    /// Build from raw arrays. Boundary nodes must be listed explicitly.
    pub fn from_raw(
        dim: usize,
        coords: Vec<f64>,
        cells: Vec<usize>,
        boundary: Vec<usize>,
    ) -> Result<Self> {
        if dim != 1 && dim != 2 {
            return Err(Error::InvalidInput(format!("unsupported dimension {dim}")));
        }
        if coords.len() % dim != 0 {
            return Err(Error::InvalidInput("coordinate array length".into()));
        }
        if cells.len() % (dim + 1) != 0 {
            return Err(Error::InvalidInput("cell array length".into()));
        }
        let n_vertices = coords.len() / dim;
        if cells.iter().any(|&v| v >= n_vertices) || boundary.iter().any(|&v| v >= n_vertices) {
            return Err(Error::InvalidInput("vertex index out of range".into()));
        }
        let mut is_boundary = vec![false; n_vertices];
        for &b in &boundary {
            is_boundary[b] = true;
        }
        Ok(Self {
            dim,
            coords,
            cells,
            boundary,
            is_boundary,
            kind: MeshKind::General,
        })
    }

    pub fn n_vertices(&self) -> usize {
        self.coords.len() / self.dim
    }

    pub fn n_cells(&self) -> usize {
        self.cells.len() / (self.dim + 1)
    }

    pub fn vertex(&self, i: usize) -> &[f64] {
        &self.coords[i * self.dim..(i + 1) * self.dim]
    }

    pub fn cell(&self, c: usize) -> &[usize] {
        let k = self.dim + 1;
        &self.cells[c * k..(c + 1) * k]
    }

    pub fn boundary_nodes(&self) -> &[usize] {
        &self.boundary
    }

    pub fn is_boundary_node(&self, i: usize) -> bool {
        self.is_boundary[i]
    }

    /// Length (1D) or area (2D) of a cell; always nonnegative for the
    /// generated meshes.
    pub fn cell_measure(&self, c: usize) -> f64 {
        let cell = self.cell(c);
        match self.dim {
            1 => (self.coords[cell[1]] - self.coords[cell[0]]).abs(),
            _ => {
                let a = self.vertex(cell[0]);
                let b = self.vertex(cell[1]);
                let d = self.vertex(cell[2]);
                0.5 * ((b[0] - a[0]) * (d[1] - a[1]) - (d[0] - a[0]) * (b[1] - a[1])).abs()
            }
        }
    }

    /// Cell diameter h_T.
    pub fn cell_diameter(&self, c: usize) -> f64 {
        let cell = self.cell(c);
        match self.dim {
            1 => (self.coords[cell[1]] - self.coords[cell[0]]).abs(),
            _ => {
                let mut h: f64 = 0.0;
                for i in 0..3 {
                    for j in (i + 1)..3 {
                        let p = self.vertex(cell[i]);
                        let q = self.vertex(cell[j]);
                        h = h.max(((p[0] - q[0]).powi(2) + (p[1] - q[1]).powi(2)).sqrt());
                    }
                }
                h
            }
        }
    }

    /// Shape coefficient sigma_T = h_T / rho_T, with rho_T the inscribed
    /// sphere diameter (the interval length itself in 1D).
    pub fn shape_coefficient(&self, c: usize) -> f64 {
        match self.dim {
            1 => 1.0,
            _ => {
                let cell = self.cell(c);
                let mut per = 0.0;
                for i in 0..3 {
                    let p = self.vertex(cell[i]);
                    let q = self.vertex(cell[(i + 1) % 3]);
                    per += ((p[0] - q[0]).powi(2) + (p[1] - q[1]).powi(2)).sqrt();
                }
                let area = self.cell_measure(c);
                if area == 0.0 {
                    return f64::INFINITY;
                }
                // inradius r = 2A / perimeter, rho = 2r
                let rho = 4.0 * area / per;
                self.cell_diameter(c) / rho
            }
        }
    }

    pub fn max_diameter(&self) -> f64 {
        (0..self.n_cells()).fold(0.0_f64, |m, c| m.max(self.cell_diameter(c)))
    }

    pub fn total_measure(&self) -> f64 {
        (0..self.n_cells()).map(|c| self.cell_measure(c)).sum()
    }

    /// Check measure consistency, shape regularity and (in 2D) conformity.
    pub fn validate(&self, expected_measure: f64, sigma_max: f64) -> Result<()> {
        let total = self.total_measure();
        let rel = (total - expected_measure).abs() / expected_measure.abs().max(1.0);
        if rel > 1e-12 {
            return Err(Error::InvalidInput(format!(
                "cell measures sum to {total}, expected {expected_measure}"
            )));
        }
        for c in 0..self.n_cells() {
            let sigma = self.shape_coefficient(c);
            if !(sigma <= sigma_max) {
                return Err(Error::InvalidInput(format!(
                    "cell {c} violates shape regularity: sigma = {sigma}"
                )));
            }
        }
        if self.dim == 2 {
            self.check_conformity()?;
        }
        Ok(())
    }

    /// Every interior edge must be shared by exactly two cells and every
    /// boundary edge by exactly one; hanging nodes would break the count.
    fn check_conformity(&self) -> Result<()> {
        use std::collections::HashMap;
        let mut edges: HashMap<(usize, usize), usize> = HashMap::new();
        for c in 0..self.n_cells() {
            let cell = self.cell(c);
            for i in 0..3 {
                let (mut a, mut b) = (cell[i], cell[(i + 1) % 3]);
                if a > b {
                    std::mem::swap(&mut a, &mut b);
                }
                *edges.entry((a, b)).or_insert(0) += 1;
            }
        }
        for (&(a, b), &count) in &edges {
            if count > 2 {
                return Err(Error::InvalidInput(format!(
                    "edge ({a},{b}) shared by {count} cells"
                )));
            }
            if count == 1 && !(self.is_boundary[a] && self.is_boundary[b]) {
                return Err(Error::InvalidInput(format!(
                    "edge ({a},{b}) is open but not on the boundary"
                )));
            }
        }
        Ok(())
    }

    /// Evaluate the piecewise-linear function with the given nodal values at
    /// a point. Structured meshes locate the cell arithmetically; general
    /// meshes fall back to a scan.
    pub fn eval_p1(&self, nodal: &[f64], p: &[f64]) -> f64 {
        debug_assert_eq!(nodal.len(), self.n_vertices());
        match self.kind {
            MeshKind::Interval { a, b, n } => {
                let h = (b - a) / n as f64;
                let mut k = ((p[0] - a) / h).floor() as isize;
                k = k.clamp(0, n as isize - 1);
                let k = k as usize;
                let x0 = a + k as f64 * h;
                let t = ((p[0] - x0) / h).clamp(0.0, 1.0);
                nodal[k] * (1.0 - t) + nodal[k + 1] * t
            }
            MeshKind::StructuredRect { rect, n } => {
                let hx = (rect.x1 - rect.x0) / n as f64;
                let hy = (rect.y1 - rect.y0) / n as f64;
                let i = (((p[0] - rect.x0) / hx).floor() as isize).clamp(0, n as isize - 1) as usize;
                let j = (((p[1] - rect.y0) / hy).floor() as isize).clamp(0, n as isize - 1) as usize;
                let sx = ((p[0] - rect.x0) / hx - i as f64).clamp(0.0, 1.0);
                let sy = ((p[1] - rect.y0) / hy - j as f64).clamp(0.0, 1.0);
                let stride = n + 1;
                let v00 = nodal[j * stride + i];
                let v10 = nodal[j * stride + i + 1];
                let v01 = nodal[(j + 1) * stride + i];
                let v11 = nodal[(j + 1) * stride + i + 1];
                // Diagonal from (i, j) to (i+1, j+1): lower triangle has
                // sy <= sx, upper triangle sy > sx.
                if sy <= sx {
                    v00 + (v10 - v00) * sx + (v11 - v10) * sy
                } else {
                    v00 + (v11 - v01) * sx + (v01 - v00) * sy
                }
            }
            MeshKind::General => self.eval_p1_scan(nodal, p),
        }
    }

    fn eval_p1_scan(&self, nodal: &[f64], p: &[f64]) -> f64 {
        if self.dim == 1 {
            for c in 0..self.n_cells() {
                let cell = self.cell(c);
                let (x0, x1) = (self.coords[cell[0]], self.coords[cell[1]]);
                if p[0] >= x0.min(x1) - 1e-14 && p[0] <= x0.max(x1) + 1e-14 {
                    let t = (p[0] - x0) / (x1 - x0);
                    return nodal[cell[0]] * (1.0 - t) + nodal[cell[1]] * t;
                }
            }
        } else {
            for c in 0..self.n_cells() {
                let cell = self.cell(c);
                let a = self.vertex(cell[0]);
                let b = self.vertex(cell[1]);
                let d = self.vertex(cell[2]);
                let det = (b[0] - a[0]) * (d[1] - a[1]) - (d[0] - a[0]) * (b[1] - a[1]);
                if det == 0.0 {
                    continue;
                }
                let l1 = ((p[0] - a[0]) * (d[1] - a[1]) - (d[0] - a[0]) * (p[1] - a[1])) / det;
                let l2 = ((b[0] - a[0]) * (p[1] - a[1]) - (p[0] - a[0]) * (b[1] - a[1])) / det;
                let l0 = 1.0 - l1 - l2;
                if l0 >= -1e-12 && l1 >= -1e-12 && l2 >= -1e-12 {
                    return l0 * nodal[cell[0]] + l1 * nodal[cell[1]] + l2 * nodal[cell[2]];
                }
            }
        }
        f64::NAN
    }

    /// Plain-text dump, format `OBSMESH v1`.
    pub fn write_obsmesh<W: Write>(&self, w: &mut W) -> Result<()> {
        writeln!(w, "OBSMESH v1")?;
        writeln!(w, "vertices {}", self.n_vertices())?;
        for i in 0..self.n_vertices() {
            let v = self.vertex(i);
            let line: Vec<String> = v.iter().map(|&x| g17(x)).collect();
            writeln!(w, "{}", line.join(" "))?;
        }
        writeln!(w, "cells {}", self.n_cells())?;
        for c in 0..self.n_cells() {
            let line: Vec<String> = self.cell(c).iter().map(|v| v.to_string()).collect();
            writeln!(w, "{}", line.join(" "))?;
        }
        writeln!(w, "boundary {}", self.boundary.len())?;
        for &b in &self.boundary {
            writeln!(w, "{b}")?;
        }
        Ok(())
    }

    pub fn to_obsmesh_string(&self) -> String {
        let mut buf = Vec::new();
        self.write_obsmesh(&mut buf).expect("write to Vec");
        String::from_utf8(buf).expect("ascii output")
    }
}

/// `n_cells` equal intervals on `[a, b]`.
pub fn uniform_interval_mesh(a: f64, b: f64, n_cells: usize) -> Result<SimplicialMesh> {
    if !(a < b) {
        return Err(Error::InvalidInput(format!(
            "interval endpoints must satisfy a < b, got [{a}, {b}]"
        )));
    }
    if n_cells == 0 {
        return Err(Error::InvalidInput("n_cells must be at least 1".into()));
    }
    let n = n_cells;
    let coords: Vec<f64> = (0..=n).map(|k| a + (b - a) * k as f64 / n as f64).collect();
    let mut cells = Vec::with_capacity(2 * n);
    for k in 0..n {
        cells.push(k);
        cells.push(k + 1);
    }
    let mut mesh = SimplicialMesh::from_raw(1, coords, cells, vec![0, n])?;
    mesh.kind = MeshKind::Interval { a, b, n };
    Ok(mesh)
}

/// `2 n^2` right triangles on an axis-aligned rectangle, all diagonals in the
/// same direction. On near-square cells the opposite-angle sums stay at or
/// below pi, so the mesh is weakly acute.
pub fn structured_triangle_mesh(rect: Rect, n_per_side: usize) -> Result<SimplicialMesh> {
    if rect.is_degenerate() {
        return Err(Error::InvalidInput("degenerate rectangle".into()));
    }
    if n_per_side == 0 {
        return Err(Error::InvalidInput("n_per_side must be at least 1".into()));
    }
    let n = n_per_side;
    let stride = n + 1;
    let mut coords = Vec::with_capacity(2 * stride * stride);
    for j in 0..=n {
        for i in 0..=n {
            coords.push(rect.x0 + (rect.x1 - rect.x0) * i as f64 / n as f64);
            coords.push(rect.y0 + (rect.y1 - rect.y0) * j as f64 / n as f64);
        }
    }
    let mut cells = Vec::with_capacity(6 * n * n);
    for j in 0..n {
        for i in 0..n {
            let v00 = j * stride + i;
            let v10 = v00 + 1;
            let v01 = v00 + stride;
            let v11 = v01 + 1;
            // diagonal v00 -- v11, both triangles counterclockwise
            cells.extend_from_slice(&[v00, v10, v11]);
            cells.extend_from_slice(&[v00, v11, v01]);
        }
    }
    let mut boundary = Vec::new();
    for j in 0..=n {
        for i in 0..=n {
            if i == 0 || j == 0 || i == n || j == n {
                boundary.push(j * stride + i);
            }
        }
    }
    let mut mesh = SimplicialMesh::from_raw(2, coords, cells, boundary)?;
    mesh.kind = MeshKind::StructuredRect { rect, n };
    Ok(mesh)
}

/// Graded partition of `[0, Y]` with nodes `y_k = (k/M)^gamma * Y`.
#[derive(Debug, Clone)]
pub struct GradedPartition {
    pub height: f64,
    pub intervals: usize,
    pub gamma: f64,
    pub nodes: Vec<f64>,
}

pub fn graded_partition(height: f64, intervals: usize, gamma: f64) -> Result<GradedPartition> {
    if !(height > 0.0) {
        return Err(Error::InvalidInput("height must be positive".into()));
    }
    if intervals == 0 {
        return Err(Error::InvalidInput("at least one interval required".into()));
    }
    if !(gamma >= 1.0) {
        return Err(Error::InvalidInput(format!(
            "grading exponent must be >= 1, got {gamma}"
        )));
    }
    let m = intervals as f64;
    let nodes: Vec<f64> = (0..=intervals)
        .map(|k| (k as f64 / m).powf(gamma) * height)
        .collect();
    Ok(GradedPartition {
        height,
        intervals,
        gamma,
        nodes,
    })
}

impl GradedPartition {
    pub fn interval(&self, k: usize) -> (f64, f64) {
        (self.nodes[k], self.nodes[k + 1])
    }

    pub fn interval_length(&self, k: usize) -> f64 {
        self.nodes[k + 1] - self.nodes[k]
    }

    /// Largest ratio of adjacent interval lengths (sigma_Y). Reported, not
    /// enforced: for fixed gamma it is automatically finite.
    pub fn neighbor_ratio_bound(&self) -> f64 {
        let mut sigma: f64 = 1.0;
        for k in 0..self.intervals.saturating_sub(1) {
            let h0 = self.interval_length(k);
            let h1 = self.interval_length(k + 1);
            sigma = sigma.max(h1 / h0).max(h0 / h1);
        }
        sigma
    }

    /// Index of the interval containing y (clamped at the ends).
    pub fn locate(&self, y: f64) -> usize {
        match self
            .nodes
            .binary_search_by(|v| v.partial_cmp(&y).expect("finite node"))
        {
            Ok(k) => k.min(self.intervals - 1),
            Err(ins) => ins.saturating_sub(1).min(self.intervals - 1),
        }
    }
}

/// Tensor-product mesh of `base x [0, Y]`. Prisms are implicit: cell
/// (c, k) = base cell c times axial interval k. Node index = base index +
/// level * (number of base vertices), so the trace plane y = 0 occupies a
/// contiguous index prefix.
#[derive(Debug, Clone)]
pub struct CylinderMesh {
    pub base: SimplicialMesh,
    pub axial: GradedPartition,
}

impl CylinderMesh {
    pub fn new(base: SimplicialMesh, axial: GradedPartition) -> Self {
        Self { base, axial }
    }

    pub fn n_levels(&self) -> usize {
        self.axial.intervals + 1
    }

    pub fn n_nodes(&self) -> usize {
        self.base.n_vertices() * self.n_levels()
    }

    pub fn n_cells(&self) -> usize {
        self.base.n_cells() * self.axial.intervals
    }

    pub fn node_index(&self, base_idx: usize, level: usize) -> usize {
        base_idx + level * self.base.n_vertices()
    }

    pub fn split_index(&self, node: usize) -> (usize, usize) {
        let nb = self.base.n_vertices();
        (node % nb, node / nb)
    }

    /// Nodes on the Dirichlet boundary: the lateral surface (base boundary at
    /// every level) and the top cap y = Y.
    pub fn is_dirichlet_node(&self, node: usize) -> bool {
        let (b, level) = self.split_index(node);
        level == self.axial.intervals || self.base.is_boundary_node(b)
    }

    /// Nodes on the trace plane y = 0 (all of them, including the lateral
    /// boundary ones, which stay pinned to zero).
    pub fn is_trace_node(&self, node: usize) -> bool {
        let (_, level) = self.split_index(node);
        level == 0
    }

    /// Evaluate the tensor P1 x P1 function at (x', y).
    pub fn eval(&self, nodal: &[f64], x: &[f64], y: f64) -> f64 {
        debug_assert_eq!(nodal.len(), self.n_nodes());
        let nb = self.base.n_vertices();
        let k = self.axial.locate(y.clamp(0.0, self.axial.height));
        let (y0, y1) = self.axial.interval(k);
        let t = ((y - y0) / (y1 - y0)).clamp(0.0, 1.0);
        let lower = self.base.eval_p1(&nodal[k * nb..(k + 1) * nb], x);
        let upper = self.base.eval_p1(&nodal[(k + 1) * nb..(k + 2) * nb], x);
        lower * (1.0 - t) + upper * t
    }
}

/// Weak acuteness test: every off-diagonal entry of the full stiffness
/// matrix (no boundary elimination) must be nonpositive up to 1e-14.
/// Returns the violating node pairs otherwise.
pub fn is_weakly_acute(mesh: &SimplicialMesh) -> Result<(bool, Vec<(usize, usize)>)> {
    let op = crate::assembly::assemble_stiffness_full(mesh)?;
    let mut violations = Vec::new();
    for i in 0..op.n() {
        let (cols, vals) = op.row(i);
        for (&j, &v) in cols.iter().zip(vals) {
            if j > i && v > 1e-14 {
                violations.push((i, j));
            }
        }
    }
    Ok((violations.is_empty(), violations))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn uniform_interval_basics() {
        let mesh = uniform_interval_mesh(0.0, 1.0, 2).unwrap();
        assert_eq!(mesh.n_vertices(), 3);
        assert_eq!(mesh.vertex(1)[0], 0.5);
        assert_eq!(mesh.cell(0), &[0, 1]);
        assert_eq!(mesh.cell(1), &[1, 2]);
        assert_eq!(mesh.boundary_nodes(), &[0, 2]);

        let single = uniform_interval_mesh(0.0, 1.0, 1).unwrap();
        assert_eq!(single.n_cells(), 1);
        assert_eq!(single.cell(0), &[0, 1]);

        let wide = uniform_interval_mesh(-1.0, 1.0, 4).unwrap();
        for c in 0..4 {
            assert!((wide.cell_measure(c) - 0.5).abs() < 1e-15);
        }
    }

    #[test]
    fn interval_rejects_bad_input() {
        assert!(uniform_interval_mesh(1.0, 1.0, 2).is_err());
        assert!(uniform_interval_mesh(2.0, 1.0, 2).is_err());
        assert!(uniform_interval_mesh(0.0, 1.0, 0).is_err());
    }

    #[test]
    fn structured_triangle_counts() {
        let m1 = structured_triangle_mesh(Rect::unit_square(), 1).unwrap();
        assert_eq!(m1.n_cells(), 2);
        assert_eq!(m1.n_vertices(), 4);

        let m2 = structured_triangle_mesh(Rect::unit_square(), 2).unwrap();
        assert_eq!(m2.n_cells(), 8);
        assert_eq!(m2.n_vertices(), 9);
        m2.validate(1.0, DEFAULT_SIGMA_MAX).unwrap();
    }

    #[test]
    fn degenerate_rectangle_rejected() {
        let rect = Rect {
            x0: 0.0,
            x1: 0.0,
            y0: 0.0,
            y1: 1.0,
        };
        assert!(structured_triangle_mesh(rect, 2).is_err());
    }

    #[test]
    fn measure_consistency() {
        let mesh = structured_triangle_mesh(Rect::unit_square(), 7).unwrap();
        assert!((mesh.total_measure() - 1.0).abs() < 1e-12);
        let mesh = uniform_interval_mesh(-2.0, 3.0, 13).unwrap();
        assert!((mesh.total_measure() - 5.0).abs() < 1e-12);
    }

    #[test]
    fn refinement_halves_diameter_exactly() {
        let coarse = structured_triangle_mesh(Rect::unit_square(), 4).unwrap();
        let fine = structured_triangle_mesh(Rect::unit_square(), 8).unwrap();
        assert_eq!(coarse.max_diameter(), 2.0 * fine.max_diameter());
    }

    #[test]
    fn graded_partition_pins() {
        let g = graded_partition(1.0, 4, 2.0).unwrap();
        assert_eq!(g.nodes, vec![0.0, 1.0 / 16.0, 0.25, 9.0 / 16.0, 1.0]);

        let uniform = graded_partition(1.0, 2, 1.0).unwrap();
        assert_eq!(uniform.nodes, vec![0.0, 0.5, 1.0]);

        let g3 = graded_partition(2.0, 4, 3.0).unwrap();
        assert_eq!(
            g3.nodes,
            vec![0.0, 2.0 / 64.0, 2.0 / 8.0, 27.0 * 2.0 / 64.0, 2.0]
        );
    }

    #[test]
    fn graded_partition_matches_uniform_mesh_at_gamma_one() {
        let g = graded_partition(3.0, 8, 1.0).unwrap();
        let mesh = uniform_interval_mesh(0.0, 3.0, 8).unwrap();
        for k in 0..=8 {
            assert_eq!(g.nodes[k], mesh.vertex(k)[0]);
        }
    }

    #[test]
    fn graded_partition_rejects_gamma_below_one() {
        assert!(graded_partition(1.0, 4, 0.9).is_err());
        assert!(graded_partition(0.0, 4, 2.0).is_err());
        assert!(graded_partition(1.0, 0, 2.0).is_err());
    }

    #[test]
    fn graded_neighbor_ratio_is_finite_and_reported() {
        let g = graded_partition(1.0, 16, 3.5).unwrap();
        let sigma = g.neighbor_ratio_bound();
        assert!(sigma.is_finite());
        assert!(sigma >= 1.0);
        // ratio of the first two intervals is 2^gamma - 1 at worst
        assert!(sigma <= 2f64.powf(3.5));
    }

    #[test]
    fn cylinder_counts_and_masks() {
        let base = uniform_interval_mesh(0.0, 1.0, 4).unwrap();
        let axial = graded_partition(2.0, 3, 2.0).unwrap();
        let cyl = CylinderMesh::new(base, axial);
        assert_eq!(cyl.n_cells(), 4 * 3);
        assert_eq!(cyl.n_nodes(), 5 * 4);
        // trace plane is a contiguous prefix
        for node in 0..5 {
            assert!(cyl.is_trace_node(node));
        }
        assert!(!cyl.is_trace_node(5));
        // lateral and top nodes are Dirichlet
        assert!(cyl.is_dirichlet_node(cyl.node_index(0, 1)));
        assert!(cyl.is_dirichlet_node(cyl.node_index(4, 2)));
        assert!(cyl.is_dirichlet_node(cyl.node_index(2, 3)));
        assert!(!cyl.is_dirichlet_node(cyl.node_index(2, 1)));
    }

    #[test]
    fn eval_p1_reproduces_linear_functions() {
        let mesh = structured_triangle_mesh(Rect::unit_square(), 3).unwrap();
        let nodal: Vec<f64> = (0..mesh.n_vertices())
            .map(|i| {
                let v = mesh.vertex(i);
                2.0 * v[0] - 0.5 * v[1] + 1.0
            })
            .collect();
        for &(x, y) in &[(0.1, 0.9), (0.5, 0.5), (0.99, 0.01), (1.0, 1.0)] {
            let exact = 2.0 * x - 0.5 * y + 1.0;
            assert!((mesh.eval_p1(&nodal, &[x, y]) - exact).abs() < 1e-13);
        }
    }

    #[test]
    fn weak_acuteness_detected_and_violated() {
        // every 1D mesh is weakly acute (off-diagonals are -1/h)
        let mesh = uniform_interval_mesh(0.0, 2.0, 5).unwrap();
        let (ok, bad) = is_weakly_acute(&mesh).unwrap();
        assert!(ok && bad.is_empty());
        // the structured right-triangle pattern is weakly acute
        let mesh = structured_triangle_mesh(Rect::unit_square(), 4).unwrap();
        let (ok, bad) = is_weakly_acute(&mesh).unwrap();
        assert!(ok, "violations: {bad:?}");
        // a stretched pair of obtuse triangles sharing a long edge is not:
        // the stiffness entry across that edge comes out positive
        let mesh = SimplicialMesh::from_raw(
            2,
            vec![0.0, 0.0, 1.0, 0.0, 0.5, 0.05, 0.5, -0.05],
            vec![0, 1, 2, 0, 3, 1],
            vec![0, 1, 2, 3],
        )
        .unwrap();
        let (ok, bad) = is_weakly_acute(&mesh).unwrap();
        assert!(!ok);
        assert!(bad.contains(&(0, 1)), "offending pair missing: {bad:?}");
    }

    #[test]
    fn obsmesh_dump_pins_format() {
        let mesh = uniform_interval_mesh(0.0, 1.0, 2).unwrap();
        let text = mesh.to_obsmesh_string();
        assert_eq!(
            text,
            "OBSMESH v1\nvertices 3\n0\n0.5\n1\ncells 2\n0 1\n1 2\nboundary 2\n0\n2\n"
        );
    }
}
