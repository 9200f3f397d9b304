//! Derivative-free local minimization (Nelder–Mead with dimension-adaptive
//! coefficients).

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NelderMeadOptions {
    pub max_iterations: usize,
    /// Stop when the spread of objective values over the simplex is below this.
    pub f_tolerance: f64,
    /// ... and every vertex lies within this distance (per coordinate) of the best.
    pub x_tolerance: f64,
    /// Edge length of the initial simplex along each axis.
    pub initial_step: f64,
}

impl Default for NelderMeadOptions {
    fn default() -> Self {
        Self {
            max_iterations: 10_000,
            f_tolerance: 1e-7,
            x_tolerance: 1e-4,
            initial_step: 0.05,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Minimum<T> {
    pub x: Vec<T>,
    pub value: T,
    pub iterations: usize,
    pub evaluations: usize,
    pub converged: bool,
    /// Best value after each iteration (non-increasing).
    pub history: Vec<T>,
    /// Final simplex, best vertex first.
    pub simplex: Vec<Vec<T>>,
    pub simplex_values: Vec<T>,
}

/// Minimizes `f` from `x0`. Non-finite objective values are treated as `+inf`.
pub fn nelder_mead<T, F>(mut f: F, x0: &[T], options: &NelderMeadOptions) -> Minimum<T>
where
    T: Scalar,
    F: FnMut(&[T]) -> T,
{
    let n = x0.len();
    let nf = T::of_usize(n.max(1));
    // Gao & Han coefficients.
    let alpha = T::one();
    let beta = T::one() + T::lit(2.0) / nf;
    let gamma = T::lit(0.75) - T::lit(0.5) / nf;
    let delta = T::one() - T::one() / nf;
    let (gamma, delta) = if n <= 1 {
        (T::lit(0.5), T::lit(0.5))
    } else {
        (gamma, delta)
    };

    let mut evaluations = 0usize;
    let mut eval = |x: &[T]| {
        evaluations += 1;
        let v = f(x);
        if v.is_finite() {
            v
        } else {
            T::max_value().unwrap_or(T::lit(f64::MAX))
        }
    };

    let step = T::lit(options.initial_step);
    let mut simplex: Vec<Vec<T>> = vec![x0.to_vec()];
    for i in 0..n {
        let mut v = x0.to_vec();
        v[i] += step;
        simplex.push(v);
    }
    let mut values: Vec<T> = simplex.iter().map(|v| eval(v)).collect();
    let mut history = Vec::new();
    let mut iterations = 0;
    let mut converged = false;

    let f_tol = T::lit(options.f_tolerance);
    let x_tol = T::lit(options.x_tolerance);

    loop {
        sort_simplex(&mut simplex, &mut values);
        history.push(values[0]);
        let spread = values[n] - values[0];
        let size = simplex[1..]
            .iter()
            .flat_map(|v| v.iter().zip(&simplex[0]).map(|(a, b)| (*a - *b).abs()))
            .fold(T::zero(), |a, b| a.max(b));
        if n == 0 || (spread <= f_tol && size <= x_tol) {
            converged = true;
            break;
        }
        if iterations >= options.max_iterations {
            break;
        }
        iterations += 1;

        let mut centroid = vec![T::zero(); n];
        for v in &simplex[..n] {
            for (c, x) in centroid.iter_mut().zip(v) {
                *c += *x / nf;
            }
        }
        let along = |t: T| -> Vec<T> {
            centroid
                .iter()
                .zip(&simplex[n])
                .map(|(c, w)| *c + t * (*c - *w))
                .collect()
        };

        let xr = along(alpha);
        let fr = eval(&xr);
        if fr < values[0] {
            let xe = along(alpha * beta);
            let fe = eval(&xe);
            if fe < fr {
                simplex[n] = xe;
                values[n] = fe;
            } else {
                simplex[n] = xr;
                values[n] = fr;
            }
            continue;
        }
        if fr < values[n - 1] {
            simplex[n] = xr;
            values[n] = fr;
            continue;
        }
        let (xc, fc) = if fr < values[n] {
            let xc = along(alpha * gamma);
            let fc = eval(&xc);
            (xc, fc)
        } else {
            let xc = along(-gamma);
            let fc = eval(&xc);
            (xc, fc)
        };
        if fc < values[n].min(fr) {
            simplex[n] = xc;
            values[n] = fc;
            continue;
        }
        // Shrink towards the best vertex.
        let best = simplex[0].clone();
        for k in 1..=n {
            let v: Vec<T> = best
                .iter()
                .zip(&simplex[k])
                .map(|(b, x)| *b + delta * (*x - *b))
                .collect();
            values[k] = eval(&v);
            simplex[k] = v;
        }
    }

    Minimum {
        x: simplex[0].clone(),
        value: values[0],
        iterations,
        evaluations,
        converged,
        history,
        simplex,
        simplex_values: values,
    }
}

/// Stable sort by value; ties keep their previous order so runs are
/// reproducible.
fn sort_simplex<T: Scalar>(simplex: &mut Vec<Vec<T>>, values: &mut Vec<T>) {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].partial_cmp(&values[b]).expect("finite or max"));
    *simplex = order.iter().map(|&i| simplex[i].clone()).collect();
    *values = order.iter().map(|&i| values[i]).collect();
}

/// Ratio of the largest to the smallest singular value of the final
/// simplex's edge matrix; large values mean the simplex collapsed onto a
/// lower-dimensional valley.
pub fn simplex_anisotropy<T: Scalar>(simplex: &[Vec<T>]) -> T {
    let n = simplex.len() - 1;
    if n == 0 {
        return T::one();
    }
    let edges = nalgebra::DMatrix::from_fn(n, n, |r, c| simplex[c + 1][r] - simplex[0][r]);
    let sv = edges.singular_values();
    let max = sv.iter().fold(T::zero(), |a, b| a.max(*b));
    let min = sv.iter().fold(max, |a, b| a.min(*b));
    if min <= T::zero() {
        T::max_value().unwrap_or(T::lit(f64::MAX))
    } else {
        max / min
    }
}

/// Curvature-based standard deviation along each coordinate: a parabola
/// through `f(x - h e_i), f(x), f(x + h e_i)` gives `sigma_i^2 = 2 s^2 / f''`
/// with `s^2 = value / dof` (unit variance when `dof == 0`). Returns `None`
/// for axes with non-positive curvature.
pub fn axis_uncertainties<T, F>(mut f: F, x: &[T], h: T, value: T, dof: usize) -> Vec<Option<T>>
where
    T: Scalar,
    F: FnMut(&[T]) -> T,
{
    let s2 = if dof > 0 { value / T::of_usize(dof) } else { T::one() };
    (0..x.len())
        .map(|i| {
            let mut xp = x.to_vec();
            let mut xm = x.to_vec();
            xp[i] += h;
            xm[i] -= h;
            let curv = (f(&xp) - T::lit(2.0) * value + f(&xm)) / (h * h);
            (curv > T::zero() && curv.is_finite()).then(|| (T::lit(2.0) * s2 / curv).sqrt())
        })
        .collect()
}

/// Gauss-Newton refinement of a least-squares minimum. `residuals` returns
/// the weighted residual vector or `None` when the model fails; the Jacobian
/// uses forward differences of step `h`. Returns `None` if any evaluation
/// fails.
pub fn gauss_newton_refine<F>(mut residuals: F, x: &[f64], h: f64, steps: usize) -> Option<Vec<f64>>
where
    F: FnMut(&[f64]) -> Option<Vec<f64>>,
{
    let mut x = x.to_vec();
    for _ in 0..steps {
        let r0 = residuals(&x)?;
        let mut jac = DMatrix::zeros(r0.len(), x.len());
        for j in 0..x.len() {
            let mut xp = x.clone();
            xp[j] += h;
            let rp = residuals(&xp)?;
            for i in 0..r0.len() {
                jac[(i, j)] = (rp[i] - r0[i]) / h;
            }
        }
        let r = DVector::from_vec(r0);
        let delta = jac.svd(true, true).solve(&(-r), 1e-12).ok()?;
        for (xi, d) in x.iter_mut().zip(delta.iter()) {
            *xi += d;
        }
    }
    Some(x)
}
