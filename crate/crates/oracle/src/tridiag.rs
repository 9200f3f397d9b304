//! Symmetric tridiagonal eigenproblems with a constant off-diagonal.

/// Number of eigenvalues strictly below `x` (Sturm sequence count).
fn count_below(diag: &[f64], off: f64, x: f64) -> usize {
    let off2 = off * off;
    let tiny = f64::MIN_POSITIVE.sqrt();
    let mut count = 0;
    let mut q = 1.0;
    for (i, d) in diag.iter().enumerate() {
        q = if i == 0 { d - x } else { d - x - off2 / q };
        if q == 0.0 {
            q = -tiny;
        }
        if q < 0.0 {
            count += 1;
        }
    }
    count
}

/// The `k`-th smallest eigenvalue (0-based) by bisection.
pub fn kth_eigenvalue(diag: &[f64], off: f64, k: usize) -> f64 {
    let r = 2.0 * off.abs();
    let mut lo = diag.iter().copied().fold(f64::INFINITY, f64::min) - r;
    let mut hi = diag.iter().copied().fold(f64::NEG_INFINITY, f64::max) + r;
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if count_below(diag, off, mid) > k {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Solve `(T - shift) x = b` by Gaussian elimination with partial pivoting.
fn solve_shifted(diag: &[f64], off: f64, shift: f64, rhs: &[f64]) -> Vec<f64> {
    let n = diag.len();
    // Row i holds [a_i (sub), b_i (diag), c_i (super), d_i (second super)].
    let mut sub = vec![off; n];
    let mut mid: Vec<f64> = diag.iter().map(|d| d - shift).collect();
    let mut sup = vec![off; n];
    let mut sup2 = vec![0.0; n];
    let mut b = rhs.to_vec();
    sub[0] = 0.0;
    sup[n - 1] = 0.0;
    let eps = 1e-300;
    for i in 0..n - 1 {
        // Candidate pivots: mid[i] (row i) and sub[i+1] (row i+1).
        if sub[i + 1].abs() > mid[i].abs() {
            // Swap rows i and i+1 in the band.
            let (r0_mid, r0_sup, r0_sup2) = (mid[i], sup[i], sup2[i]);
            mid[i] = sub[i + 1];
            sup[i] = mid[i + 1];
            sup2[i] = sup[i + 1];
            sub[i + 1] = r0_mid;
            mid[i + 1] = r0_sup;
            sup[i + 1] = r0_sup2;
            b.swap(i, i + 1);
        }
        if mid[i].abs() < eps {
            mid[i] = eps;
        }
        let m = sub[i + 1] / mid[i];
        mid[i + 1] -= m * sup[i];
        sup[i + 1] -= m * sup2[i];
        b[i + 1] -= m * b[i];
        sub[i + 1] = 0.0;
    }
    if mid[n - 1].abs() < eps {
        mid[n - 1] = eps;
    }
    let mut x = vec![0.0; n];
    for i in (0..n).rev() {
        let mut s = b[i];
        if i + 1 < n {
            s -= sup[i] * x[i + 1];
        }
        if i + 2 < n {
            s -= sup2[i] * x[i + 2];
        }
        x[i] = s / mid[i];
    }
    x
}

/// Eigenvector for an accurate eigenvalue estimate, orthogonalized against
/// `previous` (needed for near-degenerate pairs). Unit 2-norm.
pub fn inverse_iteration(diag: &[f64], off: f64, eigenvalue: f64, previous: &[Vec<f64>]) -> Vec<f64> {
    let n = diag.len();
    let scale = diag.iter().fold(off.abs(), |m, d| m.max(d.abs()));
    let shift = eigenvalue + scale * 1e-14;
    // Deterministic, non-symmetric start vector.
    let mut v: Vec<f64> = (0..n).map(|i| 1.0 + 0.37 * ((i as f64) * 0.61).sin()).collect();
    for _ in 0..4 {
        for p in previous {
            let pn: f64 = p.iter().map(|x| x * x).sum();
            let dot: f64 = p.iter().zip(&v).map(|(a, b)| a * b).sum::<f64>() / pn;
            v.iter_mut().zip(p).for_each(|(x, y)| *x -= dot * y);
        }
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        v.iter_mut().for_each(|x| *x /= norm);
        v = solve_shifted(diag, off, shift, &v);
    }
    for p in previous {
        let pn: f64 = p.iter().map(|x| x * x).sum();
        let dot: f64 = p.iter().zip(&v).map(|(a, b)| a * b).sum::<f64>() / pn;
        v.iter_mut().zip(p).for_each(|(x, y)| *x -= dot * y);
    }
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    v.iter_mut().for_each(|x| *x /= norm);
    v
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn free_particle_in_a_box() {
        // diag 2, off -1: eigenvalues 2 - 2 cos(k pi / (n + 1)).
        let n = 50;
        let diag = vec![2.0; n];
        for k in 0..5 {
            let exact = 2.0 - 2.0 * (((k + 1) as f64) * std::f64::consts::PI / (n as f64 + 1.0)).cos();
            assert!((kth_eigenvalue(&diag, -1.0, k) - exact).abs() < 1e-12);
        }
    }

    #[test]
    fn inverse_iteration_residual() {
        let n = 40;
        let diag: Vec<f64> = (0..n).map(|i| (i as f64 - 20.0).powi(2) * 0.01 + 2.0).collect();
        let e = kth_eigenvalue(&diag, -1.0, 2);
        let v = inverse_iteration(&diag, -1.0, e, &[]);
        let mut res = 0.0f64;
        for i in 0..n {
            let mut tv = diag[i] * v[i];
            if i > 0 {
                tv -= v[i - 1];
            }
            if i + 1 < n {
                tv -= v[i + 1];
            }
            res = res.max((tv - e * v[i]).abs());
        }
        assert!(res < 1e-10, "residual {res}");
    }
}
