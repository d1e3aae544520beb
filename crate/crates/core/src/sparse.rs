//! Symmetric sparse operators in compressed-row form, plus the conjugate
//! gradient solver used by the active-set method and the linear runs.

use std::io::Write;

use crate::error::{Error, Result};
use crate::fmt::g17;

/// Symmetric positive-definite operator stored row-compressed. Both
/// triangles are kept so row traversal (relaxation sweeps) is direct.
#[derive(Debug, Clone)]
pub struct SparseOperator {
    n: usize,
    row_ptr: Vec<usize>,
    cols: Vec<usize>,
    vals: Vec<f64>,
}

impl SparseOperator {
    /// Build from (row, col, value) triplets; duplicates are summed.
    pub fn from_triplets(n: usize, mut triplets: Vec<(usize, usize, f64)>) -> Result<Self> {
        if triplets.iter().any(|&(i, j, _)| i >= n || j >= n) {
            return Err(Error::InvalidInput("triplet index out of range".into()));
        }
        triplets.sort_unstable_by(|a, b| (a.0, a.1).cmp(&(b.0, b.1)));
        let mut row_ptr = vec![0usize; n + 1];
        let mut cols = Vec::with_capacity(triplets.len());
        let mut vals: Vec<f64> = Vec::with_capacity(triplets.len());
        let mut last: Option<(usize, usize)> = None;
        for &(i, j, v) in &triplets {
            if last == Some((i, j)) {
                *vals.last_mut().expect("value present") += v;
            } else {
                cols.push(j);
                vals.push(v);
                row_ptr[i + 1] += 1;
                last = Some((i, j));
            }
        }
        for i in 0..n {
            row_ptr[i + 1] += row_ptr[i];
        }
        Ok(Self {
            n,
            row_ptr,
            cols,
            vals,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn nnz(&self) -> usize {
        self.vals.len()
    }

    pub fn row(&self, i: usize) -> (&[usize], &[f64]) {
        let (lo, hi) = (self.row_ptr[i], self.row_ptr[i + 1]);
        (&self.cols[lo..hi], &self.vals[lo..hi])
    }

    pub fn diag(&self, i: usize) -> f64 {
        let (cols, vals) = self.row(i);
        match cols.binary_search(&i) {
            Ok(k) => vals[k],
            Err(_) => 0.0,
        }
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let (cols, vals) = self.row(i);
        match cols.binary_search(&j) {
            Ok(k) => vals[k],
            Err(_) => 0.0,
        }
    }

    pub fn matvec_into(&self, x: &[f64], y: &mut [f64]) {
        debug_assert_eq!(x.len(), self.n);
        debug_assert_eq!(y.len(), self.n);
        for i in 0..self.n {
            let (cols, vals) = self.row(i);
            let mut acc = 0.0;
            for (&j, &v) in cols.iter().zip(vals) {
                acc += v * x[j];
            }
            y[i] = acc;
        }
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.n];
        self.matvec_into(x, &mut y);
        y
    }

    /// Largest |a_ij - a_ji| over the stored pattern.
    pub fn symmetry_defect(&self) -> f64 {
        let mut defect = 0.0_f64;
        for i in 0..self.n {
            let (cols, vals) = self.row(i);
            for (&j, &v) in cols.iter().zip(vals) {
                defect = defect.max((v - self.get(j, i)).abs());
            }
        }
        defect
    }

    pub fn row_sum(&self, i: usize) -> f64 {
        let (_, vals) = self.row(i);
        vals.iter().sum()
    }

    pub fn to_dense(&self) -> Vec<f64> {
        let mut dense = vec![0.0; self.n * self.n];
        for i in 0..self.n {
            let (cols, vals) = self.row(i);
            for (&j, &v) in cols.iter().zip(vals) {
                dense[i * self.n + j] = v;
            }
        }
        dense
    }

    /// Principal submatrix on the kept indices (renumbered consecutively).
    /// Returns the submatrix and the kept original indices in order.
    pub fn restricted(&self, keep: &[bool]) -> Result<(SparseOperator, Vec<usize>)> {
        if keep.len() != self.n {
            return Err(Error::InvalidInput("keep mask length mismatch".into()));
        }
        let mut new_index = vec![usize::MAX; self.n];
        let mut kept = Vec::new();
        for i in 0..self.n {
            if keep[i] {
                new_index[i] = kept.len();
                kept.push(i);
            }
        }
        let mut triplets = Vec::new();
        for &i in &kept {
            let (cols, vals) = self.row(i);
            for (&j, &v) in cols.iter().zip(vals) {
                if keep[j] {
                    triplets.push((new_index[i], new_index[j], v));
                }
            }
        }
        Ok((SparseOperator::from_triplets(kept.len(), triplets)?, kept))
    }

    /// Debug dump: `i j value` lines sorted by (i, j).
    pub fn write_triplets<W: Write>(&self, w: &mut W) -> Result<()> {
        for i in 0..self.n {
            let (cols, vals) = self.row(i);
            for (&j, &v) in cols.iter().zip(vals) {
                writeln!(w, "{i} {j} {}", g17(v))?;
            }
        }
        Ok(())
    }
}

/// Options for the (preconditioned) conjugate gradient solver.
#[derive(Debug, Clone, Copy)]
pub struct CgOptions {
    pub rel_tol: f64,
    pub max_iter: usize,
    /// Diagonal (Jacobi) preconditioning; essential on the graded
    /// anisotropic cylinder systems.
    pub jacobi: bool,
}

impl Default for CgOptions {
    fn default() -> Self {
        Self {
            rel_tol: 1e-12,
            max_iter: 100_000,
            jacobi: true,
        }
    }
}

/// Solve `A x = b` by CG. `fixed` marks rows whose unknowns are pinned to
/// `x0` values (the active set in the active-set solver); pass all-false for
/// an unconstrained solve. Returns the solution and the iteration count.
pub fn cg_solve(
    a: &SparseOperator,
    b: &[f64],
    fixed: Option<&[bool]>,
    x0: Option<&[f64]>,
    opts: &CgOptions,
) -> Result<(Vec<f64>, usize)> {
    let n = a.n();
    let all_free = vec![false; n];
    let fixed = fixed.unwrap_or(&all_free);
    let mut x = match x0 {
        Some(v) => v.to_vec(),
        None => vec![0.0; n],
    };
    // r = b - A x on free rows, 0 on fixed rows
    let mut r = vec![0.0; n];
    a.matvec_into(&x, &mut r);
    for i in 0..n {
        r[i] = if fixed[i] { 0.0 } else { b[i] - r[i] };
    }
    let precond: Vec<f64> = (0..n)
        .map(|i| {
            let d = a.diag(i);
            if opts.jacobi && d > 0.0 {
                1.0 / d
            } else {
                1.0
            }
        })
        .collect();

    let norm_b = {
        let mut s = 0.0;
        for i in 0..n {
            if !fixed[i] {
                s += b[i] * b[i];
            }
        }
        s.sqrt()
    };
    let threshold = if norm_b > 0.0 {
        opts.rel_tol * norm_b
    } else {
        opts.rel_tol
    };

    let mut z: Vec<f64> = r.iter().zip(&precond).map(|(&ri, &m)| ri * m).collect();
    let mut p = z.clone();
    let mut rz: f64 = r.iter().zip(&z).map(|(&ri, &zi)| ri * zi).sum();
    let mut ap = vec![0.0; n];

    let res_norm = |r: &[f64]| -> f64 { r.iter().map(|&v| v * v).sum::<f64>().sqrt() };
    if res_norm(&r) <= threshold {
        return Ok((x, 0));
    }

    for iter in 1..=opts.max_iter {
        a.matvec_into(&p, &mut ap);
        for i in 0..n {
            if fixed[i] {
                ap[i] = 0.0;
            }
        }
        let pap: f64 = p.iter().zip(&ap).map(|(&pi, &api)| pi * api).sum();
        if pap <= 0.0 {
            return Err(Error::Singular(
                "conjugate gradients hit a nonpositive curvature direction".into(),
            ));
        }
        let alpha = rz / pap;
        for i in 0..n {
            x[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
        }
        if res_norm(&r) <= threshold {
            return Ok((x, iter));
        }
        for i in 0..n {
            z[i] = r[i] * precond[i];
        }
        let rz_new: f64 = r.iter().zip(&z).map(|(&ri, &zi)| ri * zi).sum();
        let beta = rz_new / rz;
        rz = rz_new;
        for i in 0..n {
            p[i] = z[i] + beta * p[i];
        }
    }
    Err(Error::NonConvergence {
        solver: "cg",
        iterations: opts.max_iter,
        residual: res_norm(&r) / norm_b.max(f64::MIN_POSITIVE),
    })
}
