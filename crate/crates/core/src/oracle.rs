//! Independent reference implementations used only to validate the main
//! code paths: a tanh-sinh quadrature (checks the closed-form weighted
//! integrals), a dense Cholesky factorization, and an exhaustive
//! active-set enumeration for small complementarity systems (checks both
//! iterative solvers). Nothing here shares code with the implementations
//! it certifies.

/// Tanh-sinh (double-exponential) quadrature of `f` on `[a, b]`. Handles
/// integrable endpoint singularities because the transformed nodes cluster
/// exponentially close to the ends without ever touching them.
pub fn tanh_sinh(f: impl Fn(f64) -> f64, a: f64, b: f64, rel_tol: f64) -> f64 {
    assert!(b > a, "empty interval");
    let half = 0.5 * (b - a);
    let pi_half = 0.5 * std::f64::consts::PI;
    // phi(t) = tanh(pi/2 sinh t); node offsets from each endpoint are
    // computed directly so precision survives next to a singularity.
    let sum_nodes = |h: f64, only_odd: bool| -> f64 {
        let t_max = 6.5;
        let k_max = (t_max / h).floor() as usize;
        let (start, step) = if only_odd { (1, 2) } else { (0, 1) };
        let mut sum = 0.0;
        let mut k = start;
        while k <= k_max {
            let t = k as f64 * h;
            let sh = pi_half * t.sinh();
            let w = pi_half * t.cosh() / sh.cosh().powi(2);
            if k == 0 {
                sum += w * f(0.5 * (a + b));
            } else {
                // 1 - tanh(sh) = 2 / (exp(2 sh) + 1)
                let delta = 1.0 / (1.0 + (2.0 * sh).exp());
                if delta > 0.0 && w > 0.0 {
                    let x_plus = b - (b - a) * delta;
                    let x_minus = a + (b - a) * delta;
                    sum += w * (f(x_plus) + f(x_minus));
                }
            }
            k += step;
        }
        sum
    };
    let mut h = 1.0;
    let mut total = sum_nodes(h, false) * h * half;
    for _ in 0..12 {
        h *= 0.5;
        let odd = sum_nodes(h, true) * h * half;
        let new_total = 0.5 * total + odd;
        if (new_total - total).abs() <= rel_tol * new_total.abs().max(1e-300) {
            return new_total;
        }
        total = new_total;
    }
    total
}

/// Dense symmetric matrix in row-major storage.
#[derive(Debug, Clone)]
pub struct DenseMatrix {
    pub n: usize,
    pub data: Vec<f64>,
}

impl DenseMatrix {
    pub fn zeros(n: usize) -> Self {
        Self {
            n,
            data: vec![0.0; n * n],
        }
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.n + j]
    }

    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.n + j] = v;
    }
}

/// Cholesky solve of a dense SPD system; `None` if the factorization
/// breaks down (not positive definite).
pub fn cholesky_solve(a: &DenseMatrix, b: &[f64]) -> Option<Vec<f64>> {
    let n = a.n;
    let mut l = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..=i {
            let mut s = a.get(i, j);
            for k in 0..j {
                s -= l[i * n + k] * l[j * n + k];
            }
            if i == j {
                if s <= 0.0 {
                    return None;
                }
                l[i * n + i] = s.sqrt();
            } else {
                l[i * n + j] = s / l[j * n + j];
            }
        }
    }
    // forward then backward substitution
    let mut y = vec![0.0; n];
    for i in 0..n {
        let mut s = b[i];
        for k in 0..i {
            s -= l[i * n + k] * y[k];
        }
        y[i] = s / l[i * n + i];
    }
    let mut x = vec![0.0; n];
    for i in (0..n).rev() {
        let mut s = y[i];
        for k in (i + 1)..n {
            s -= l[k * n + i] * x[k];
        }
        x[i] = s / l[i * n + i];
    }
    Some(x)
}

/// Exhaustive solve of the complementarity system
/// `A u >= f, u >= psi (on constrained dofs), (A u - f)^T (u - psi) = 0`
/// by enumerating every active subset of the constrained index set and
/// keeping the first feasible KKT point. Exponential in the number of
/// constrained dofs; intended for n <= ~16.
pub fn brute_force_vi(
    a: &DenseMatrix,
    f: &[f64],
    constraint: &[Option<f64>],
    tol: f64,
) -> Option<Vec<f64>> {
    let n = a.n;
    let constrained: Vec<usize> = (0..n).filter(|&i| constraint[i].is_some()).collect();
    let m = constrained.len();
    assert!(m <= 20, "active-set enumeration limited to small systems");
    for mask in 0u64..(1u64 << m) {
        let mut active = vec![false; n];
        for (bit, &idx) in constrained.iter().enumerate() {
            if mask & (1 << bit) != 0 {
                active[idx] = true;
            }
        }
        // reduced system: u = psi on active, rows of A on inactive
        let inactive: Vec<usize> = (0..n).filter(|&i| !active[i]).collect();
        let r = inactive.len();
        let mut sub = DenseMatrix::zeros(r);
        let mut rhs = vec![0.0; r];
        for (ii, &gi) in inactive.iter().enumerate() {
            let mut b = f[gi];
            for gj in 0..n {
                if active[gj] {
                    b -= a.get(gi, gj) * constraint[gj].expect("active implies constrained");
                }
            }
            rhs[ii] = b;
            for (jj, &gj) in inactive.iter().enumerate() {
                sub.set(ii, jj, a.get(gi, gj));
            }
        }
        let Some(sol) = cholesky_solve(&sub, &rhs) else {
            continue;
        };
        let mut u = vec![0.0; n];
        for (ii, &gi) in inactive.iter().enumerate() {
            u[gi] = sol[ii];
        }
        for &gi in &constrained {
            if active[gi] {
                u[gi] = constraint[gi].expect("constrained");
            }
        }
        // feasibility and multiplier signs
        let mut ok = true;
        let mut residual = vec![0.0; n];
        for i in 0..n {
            let mut s = -f[i];
            for j in 0..n {
                s += a.get(i, j) * u[j];
            }
            residual[i] = s;
        }
        for &gi in &constrained {
            let psi = constraint[gi].expect("constrained");
            if u[gi] < psi - tol {
                ok = false;
                break;
            }
            if active[gi] && residual[gi] < -tol {
                ok = false;
                break;
            }
            if !active[gi] && residual[gi].abs() > tol {
                ok = false;
                break;
            }
        }
        if ok {
            for i in 0..n {
                if constraint[i].is_none() && residual[i].abs() > tol {
                    ok = false;
                    break;
                }
            }
        }
        if ok {
            return Some(u);
        }
    }
    None
}
