//! Dense symmetric eigensolver wrapper and small matrix helpers.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Eigen-decomposition with ascending eigenvalues and deterministic vector
/// signs (largest-magnitude component positive).
#[derive(Debug, Clone)]
pub struct SortedEigen<T: Scalar> {
    pub values: DVector<T>,
    /// Column `k` belongs to `values[k]`.
    pub vectors: DMatrix<T>,
}

fn dominant_index<T: Scalar>(col: &[T]) -> usize {
    let mut best = 0;
    for (i, v) in col.iter().enumerate() {
        if v.abs() > col[best].abs() {
            best = i;
        }
    }
    best
}

pub fn max_asymmetry<T: Scalar>(m: &DMatrix<T>) -> T {
    let mut worst = T::zero();
    for i in 0..m.nrows() {
        for j in i + 1..m.ncols() {
            worst = worst.max((m[(i, j)] - m[(j, i)]).abs());
        }
    }
    worst
}

/// Relative asymmetry `max|m_ij - m_ji| / max|m_ij|`.
pub fn relative_asymmetry<T: Scalar>(m: &DMatrix<T>) -> T {
    let scale = m.iter().fold(T::zero(), |s, x| s.max(x.abs()));
    if scale == T::zero() {
        return T::zero();
    }
    max_asymmetry(m) / scale
}

pub fn sym_eigen<T: Scalar>(m: DMatrix<T>) -> Result<SortedEigen<T>> {
    let n = m.nrows();
    let norm = m.norm().as_f64();
    let asym = max_asymmetry(&m).as_f64();
    let eig = SymmetricEigen::try_new(m, T::eps(), 0).ok_or(Error::Eigensolver {
        dim: n,
        norm,
        asymmetry: asym,
    })?;
    if eig.eigenvalues.iter().any(|v| !v.is_finite()) {
        return Err(Error::Eigensolver {
            dim: n,
            norm,
            asymmetry: asym,
        });
    }

    let dominant: Vec<usize> = (0..n)
        .map(|k| dominant_index(eig.eigenvectors.column(k).as_slice()))
        .collect();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| {
        eig.eigenvalues[a]
            .partial_cmp(&eig.eigenvalues[b])
            .expect("finite eigenvalues")
    });
    // Near-degenerate runs are ordered by dominant basis index.
    let scale = eig.eigenvalues.iter().fold(T::one(), |s, v| s.max(v.abs()));
    let tie = scale * T::eps() * T::lit(64.0);
    let mut start = 0;
    while start < n {
        let mut end = start + 1;
        while end < n && eig.eigenvalues[order[end]] - eig.eigenvalues[order[end - 1]] <= tie {
            end += 1;
        }
        order[start..end].sort_by_key(|&k| dominant[k]);
        start = end;
    }

    let values = DVector::from_iterator(n, order.iter().map(|&k| eig.eigenvalues[k]));
    let mut vectors = DMatrix::zeros(n, n);
    for (dst, &k) in order.iter().enumerate() {
        let col = eig.eigenvectors.column(k);
        let sign = if col[dominant[k]] < T::zero() {
            -T::one()
        } else {
            T::one()
        };
        vectors.set_column(dst, &(col * sign));
    }
    Ok(SortedEigen { values, vectors })
}

/// Applies `f` to the eigenvalues of a symmetric matrix: `U f(D) U^T`.
pub fn matrix_function<T: Scalar>(eig: &SortedEigen<T>, f: impl Fn(T) -> T) -> DMatrix<T> {
    let fd = DMatrix::from_diagonal(&eig.values.map(f));
    &eig.vectors * fd * eig.vectors.transpose()
}

/// Kronecker product.
pub fn kron<T: Scalar>(a: &DMatrix<T>, b: &DMatrix<T>) -> DMatrix<T> {
    a.kronecker(b)
}

/// Forces exact symmetry by averaging with the transpose.
pub fn symmetrize<T: Scalar>(m: &mut DMatrix<T>) {
    let half = T::lit(0.5);
    let n = m.nrows();
    for i in 0..n {
        for j in i + 1..n {
            let v = (m[(i, j)] + m[(j, i)]) * half;
            m[(i, j)] = v;
            m[(j, i)] = v;
        }
    }
}
