//! Single-mode rf-SQUID Hamiltonian
//!
//! ```text
//! H = 4 E_C n^2 + E_L/2 (phi - 2 pi Phi_ext)^2 - E_J cos(phi)
//! ```
//!
//! diagonalized in the harmonic-oscillator basis of its linear part.
//!
//! # Operator convention
//!
//! With `a` the oscillator lowering operator,
//!
//! ```text
//! phi = 2 pi Phi_ext + phi_zpf (a + a^dag)
//! n   = i (a^dag - a) / (2 phi_zpf)
//! phi_zpf = (2 E_C / E_L)^(1/4)
//! ```
//!
//! so that `[phi, n] = i`. The oscillator is centered on the minimum of the
//! inductive term, `2 pi Phi_ext`; flux stays attached to `phi` in the
//! inductive term exactly as written above, only the expansion point moves
//! with it. `cos(phi)` is built from the spectral decomposition of the
//! truncated `phi_zpf (a + a^dag)`, never from a series.
//!
//! Because `n` is purely imaginary in this basis, [`OperatorSet`] stores the
//! real antisymmetric matrix `K` with `n = i K`. All Hamiltonians stay real
//! symmetric.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex;
use serde::{Deserialize, Serialize};

use crate::constants::{ELEMENTARY_CHARGE, GHZ, NANO};
use crate::error::{Error, Result};
use crate::linalg::{matrix_function, sym_eigen};
use crate::scalar::Scalar;

/// Smallest basis accepted by [`build_operators`].
pub const MIN_DIM: usize = 4;
/// Default starting basis size (20 plasmon states).
pub const DEFAULT_DIM: usize = 20;
/// Auto-doubling ceiling.
pub const MAX_AUTO_DIM: usize = 160;
/// Default convergence tolerance on the lowest levels, GHz (0.1 MHz).
pub const DEFAULT_TOLERANCE_GHZ: f64 = 1e-4;
/// Number of low levels checked for convergence.
pub const CONVERGENCE_LEVELS: usize = 5;

/// Circuit energies (GHz, i.e. E/h) and external flux (flux quanta).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QubitParams<T> {
    pub e_l: T,
    pub e_c: T,
    pub e_j: T,
    pub phi_ext: T,
}

impl<T: Scalar> QubitParams<T> {
    pub fn new(e_l: T, e_c: T, e_j: T, phi_ext: T) -> Result<Self> {
        let p = Self { e_l, e_c, e_j, phi_ext };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        let finite = [self.e_l, self.e_c, self.e_j, self.phi_ext]
            .iter()
            .all(|v| v.is_finite());
        if !finite {
            return Err(Error::InvalidParameter("non-finite qubit parameter".into()));
        }
        if self.e_l <= T::zero() || self.e_c <= T::zero() {
            return Err(Error::InvalidParameter(format!(
                "E_L and E_C must be positive (got E_L={}, E_C={})",
                self.e_l, self.e_c
            )));
        }
        if self.e_j < T::zero() {
            return Err(Error::InvalidParameter(format!(
                "E_J must be non-negative (got {})",
                self.e_j
            )));
        }
        Ok(())
    }

    pub fn with_flux(&self, phi_ext: T) -> Self {
        Self { phi_ext, ..*self }
    }

    pub fn phase_zpf(&self) -> T {
        phase_zpf(self)
    }

    /// Harmonic frequency `sqrt(8 E_L E_C)` of the linear part, GHz.
    pub fn plasma_frequency(&self) -> T {
        (T::lit(8.0) * self.e_l * self.e_c).sqrt()
    }

    /// Center of the inductive well, `2 pi Phi_ext`, radians.
    pub fn well_center(&self) -> T {
        T::two_pi() * self.phi_ext
    }
}

/// Josephson energy (GHz) of a junction with critical current `i_c_na` (nA):
/// `E_J / h = I_c Phi_0 / (2 pi h) = I_c / (4 pi e)`.
///
/// Zero current is accepted and maps to the harmonic limit `E_J = 0`.
pub fn critical_current_to_ej<T: Scalar>(i_c_na: T) -> Result<T> {
    if !i_c_na.is_finite() || i_c_na < T::zero() {
        return Err(Error::InvalidParameter(format!(
            "critical current must be finite and non-negative (got {i_c_na} nA)"
        )));
    }
    let ghz_per_na = NANO / (4.0 * PI * ELEMENTARY_CHARGE) / GHZ;
    Ok(i_c_na * T::lit(ghz_per_na))
}

/// Inverse of [`critical_current_to_ej`], nA.
pub fn ej_to_critical_current<T: Scalar>(e_j_ghz: T) -> T {
    e_j_ghz * T::lit(4.0 * PI * ELEMENTARY_CHARGE * GHZ / NANO)
}

/// Zero-point phase fluctuations `(2 E_C / E_L)^(1/4)`.
pub fn phase_zpf<T: Scalar>(params: &QubitParams<T>) -> T {
    (T::lit(2.0) * params.e_c / params.e_l).sqrt().sqrt()
}

/// Flux-independent part of the oscillator basis: truncated ladder-built
/// operators plus `cos` and `sin` of the phase fluctuation.
#[derive(Debug, Clone)]
pub struct OscillatorBasis<T: Scalar> {
    pub dim: usize,
    pub phi_zpf: T,
    /// `sqrt(8 E_L E_C)`, GHz.
    pub plasma_frequency: T,
    /// `phi_zpf (a + a^dag)`.
    pub x: DMatrix<T>,
    /// `(a^dag - a) / (2 phi_zpf)`; the charge operator is `i K`.
    pub k: DMatrix<T>,
    pub cos_x: DMatrix<T>,
    pub sin_x: DMatrix<T>,
}

impl<T: Scalar> OscillatorBasis<T> {
    pub fn new(e_l: T, e_c: T, dim: usize) -> Result<Self> {
        if dim < MIN_DIM {
            return Err(Error::DimensionTooSmall { dim, min: MIN_DIM });
        }
        if !(e_l > T::zero() && e_c > T::zero()) {
            return Err(Error::InvalidParameter("E_L and E_C must be positive".into()));
        }
        let phi_zpf = (T::lit(2.0) * e_c / e_l).sqrt().sqrt();
        let mut x = DMatrix::zeros(dim, dim);
        let mut k = DMatrix::zeros(dim, dim);
        let two = T::lit(2.0);
        for m in 1..dim {
            let s = T::of_usize(m).sqrt();
            // <m-1| a |m> = sqrt(m)
            x[(m - 1, m)] = phi_zpf * s;
            x[(m, m - 1)] = phi_zpf * s;
            k[(m, m - 1)] = s / (two * phi_zpf);
            k[(m - 1, m)] = -s / (two * phi_zpf);
        }
        let eig = sym_eigen(x.clone())?;
        let cos_x = matrix_function(&eig, |v| v.cos());
        let sin_x = matrix_function(&eig, |v| v.sin());
        Ok(Self {
            dim,
            phi_zpf,
            plasma_frequency: (T::lit(8.0) * e_l * e_c).sqrt(),
            x,
            k,
            cos_x,
            sin_x,
        })
    }

    /// `cos(center + x)` via the angle-addition identity on the exact
    /// `cos x`, `sin x` matrices.
    pub fn cos_phi(&self, center: T) -> DMatrix<T> {
        &self.cos_x * center.cos() - &self.sin_x * center.sin()
    }

    /// Hamiltonian matrix at the given junction energy and flux.
    ///
    /// The linear part `4 E_C n^2 + E_L/2 x^2` is written from the ladder
    /// algebra before truncation, which makes it exactly diagonal:
    /// `sqrt(8 E_L E_C) (m + 1/2)`.
    pub fn hamiltonian(&self, e_j: T, phi_ext: T) -> DMatrix<T> {
        let center = T::two_pi() * phi_ext;
        let mut h = self.cos_phi(center) * (-e_j);
        let half = T::lit(0.5);
        for m in 0..self.dim {
            h[(m, m)] += self.plasma_frequency * (T::of_usize(m) + half);
        }
        h
    }
}

/// Truncated operators for one parameter set.
#[derive(Debug, Clone)]
pub struct OperatorSet<T: Scalar> {
    pub dim: usize,
    pub phi_zpf: T,
    /// `2 pi Phi_ext`, the oscillator expansion point.
    pub phi_center: T,
    /// Phase operator, `phi_center * I + phi_zpf (a + a^dag)`.
    pub phi_op: DMatrix<T>,
    /// `K` with `n = i K`.
    pub n_op_imag: DMatrix<T>,
    pub cos_phi_op: DMatrix<T>,
}

impl<T: Scalar> OperatorSet<T> {
    /// The Hermitian charge operator as a complex matrix.
    pub fn n_op(&self) -> DMatrix<Complex<T>> {
        self.n_op_imag.map(|v| Complex::new(T::zero(), v))
    }
}

pub fn build_operators<T: Scalar>(params: &QubitParams<T>, dim: usize) -> Result<OperatorSet<T>> {
    params.validate()?;
    let basis = OscillatorBasis::new(params.e_l, params.e_c, dim)?;
    let center = params.well_center();
    let phi_op = &basis.x + DMatrix::identity(dim, dim) * center;
    Ok(OperatorSet {
        dim,
        phi_zpf: basis.phi_zpf,
        phi_center: center,
        cos_phi_op: basis.cos_phi(center),
        phi_op,
        n_op_imag: basis.k,
    })
}

/// How the oscillator basis is sized.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Truncation {
    Fixed(usize),
    /// Start at `start`, double until the lowest levels move by less than
    /// `tolerance_ghz`, give up at `max`.
    Auto {
        start: usize,
        max: usize,
        tolerance_ghz: f64,
    },
}

impl Default for Truncation {
    fn default() -> Self {
        Truncation::Auto {
            start: DEFAULT_DIM,
            max: MAX_AUTO_DIM,
            tolerance_ghz: DEFAULT_TOLERANCE_GHZ,
        }
    }
}

/// Which operator a matrix element refers to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum QubitOperator {
    Charge,
    Phase,
}

/// Eigen-decomposition of the qubit Hamiltonian.
#[derive(Debug, Clone)]
pub struct SpectrumResult<T: Scalar> {
    pub params: QubitParams<T>,
    pub dim: usize,
    /// Ascending, GHz.
    pub energies: Vec<T>,
    /// Columns are eigenvectors in the oscillator basis.
    pub eigenvectors: DMatrix<T>,
    /// Largest shift of the lowest levels seen on the last basis doubling,
    /// GHz; `None` when no doubling was attempted.
    pub convergence_shift: Option<T>,
    pub tolerance: Option<T>,
    basis: Arc<OscillatorBasis<T>>,
}

impl<T: Scalar> SpectrumResult<T> {
    pub fn converged(&self) -> bool {
        matches!((self.convergence_shift, self.tolerance), (Some(s), Some(t)) if s < t)
    }

    pub fn levels(&self) -> usize {
        self.energies.len()
    }

    /// `E_j - E_i`, GHz. Panics on out-of-range indices; see
    /// [`transition_frequency`] for the checked form.
    pub fn transition(&self, i: usize, j: usize) -> T {
        self.energies[j] - self.energies[i]
    }

    /// All transitions among the lowest `levels` states.
    pub fn transitions(&self, levels: usize) -> BTreeMap<(usize, usize), T> {
        let n = levels.min(self.levels());
        let mut out = BTreeMap::new();
        for i in 0..n {
            for j in i + 1..n {
                out.insert((i, j), self.transition(i, j));
            }
        }
        out
    }

    pub fn basis(&self) -> &OscillatorBasis<T> {
        &self.basis
    }

    /// Lowest `levels` eigenvectors as columns.
    pub fn low_vectors(&self, levels: usize) -> DMatrix<T> {
        self.eigenvectors.columns(0, levels.min(self.dim)).into_owned()
    }

    /// `<i| phi - 2 pi Phi_ext |j>` for the lowest `levels` states: the
    /// phase across the inductor.
    pub fn inductor_phase_matrix(&self, levels: usize) -> DMatrix<T> {
        let v = self.low_vectors(levels);
        v.transpose() * &self.basis.x * &v
    }

    /// `<i| phi |j>` (junction phase, includes the well offset on the diagonal).
    pub fn phase_matrix(&self, levels: usize) -> DMatrix<T> {
        let n = levels.min(self.dim);
        self.inductor_phase_matrix(levels) + DMatrix::identity(n, n) * self.params.well_center()
    }

    /// `K` in the eigenbasis, with `<i| n |j> = i K_ij`.
    pub fn charge_matrix_imag(&self, levels: usize) -> DMatrix<T> {
        let v = self.low_vectors(levels);
        v.transpose() * &self.basis.k * &v
    }

    /// `|<i| op |j>|`.
    pub fn element(&self, op: QubitOperator, i: usize, j: usize) -> T {
        let vi = self.eigenvectors.column(i);
        let vj = self.eigenvectors.column(j);
        match op {
            QubitOperator::Charge => (vi.transpose() * &self.basis.k * vj)[(0, 0)].abs(),
            QubitOperator::Phase => {
                let offset = if i == j { self.params.well_center() } else { T::zero() };
                ((vi.transpose() * &self.basis.x * vj)[(0, 0)] + offset).abs()
            }
        }
    }
}

fn solve_in_basis<T: Scalar>(params: &QubitParams<T>, basis: Arc<OscillatorBasis<T>>) -> Result<SpectrumResult<T>> {
    let h = basis.hamiltonian(params.e_j, params.phi_ext);
    let eig = sym_eigen(h)?;
    Ok(SpectrumResult {
        params: *params,
        dim: basis.dim,
        energies: eig.values.iter().copied().collect(),
        eigenvectors: eig.vectors,
        convergence_shift: None,
        tolerance: None,
        basis,
    })
}

/// Reusable solver for one `(E_L, E_C)` pair and basis size; flux and `E_J`
/// vary per call. Cheap to clone.
#[derive(Debug, Clone)]
pub struct QubitSolver<T: Scalar> {
    basis: Arc<OscillatorBasis<T>>,
    e_l: T,
    e_c: T,
}

impl<T: Scalar> QubitSolver<T> {
    pub fn new(e_l: T, e_c: T, dim: usize) -> Result<Self> {
        Ok(Self {
            basis: Arc::new(OscillatorBasis::new(e_l, e_c, dim)?),
            e_l,
            e_c,
        })
    }

    pub fn dim(&self) -> usize {
        self.basis.dim
    }

    pub fn solve(&self, e_j: T, phi_ext: T) -> Result<SpectrumResult<T>> {
        let params = QubitParams::new(self.e_l, self.e_c, e_j, phi_ext)?;
        solve_in_basis(&params, self.basis.clone())
    }

    /// Eigenvalues only.
    pub fn energies(&self, e_j: T, phi_ext: T) -> Result<DVector<T>> {
        Ok(sym_eigen(self.basis.hamiltonian(e_j, phi_ext))?.values)
    }
}

/// Diagonalizes the Hamiltonian.
pub fn diagonalize<T: Scalar>(params: &QubitParams<T>, truncation: Truncation) -> Result<SpectrumResult<T>> {
    params.validate()?;
    match truncation {
        Truncation::Fixed(dim) => {
            let basis = Arc::new(OscillatorBasis::new(params.e_l, params.e_c, dim)?);
            solve_in_basis(params, basis)
        }
        Truncation::Auto {
            start,
            max,
            tolerance_ghz,
        } => {
            let tol = T::lit(tolerance_ghz);
            let mut dim = start.max(MIN_DIM);
            let mut current = solve_in_basis(params, Arc::new(OscillatorBasis::new(params.e_l, params.e_c, dim)?))?;
            loop {
                let next_dim = 2 * dim;
                if next_dim > max.max(start) {
                    current.tolerance = Some(tol);
                    return Ok(current);
                }
                let mut next = solve_in_basis(
                    params,
                    Arc::new(OscillatorBasis::new(params.e_l, params.e_c, next_dim)?),
                )?;
                let levels = CONVERGENCE_LEVELS.min(dim);
                let shift = (0..levels)
                    .map(|k| (next.energies[k] - current.energies[k]).abs())
                    .fold(T::zero(), |a, b| a.max(b));
                next.convergence_shift = Some(shift);
                next.tolerance = Some(tol);
                if shift < tol {
                    return Ok(next);
                }
                current = next;
                dim = next_dim;
            }
        }
    }
}

/// Smallest basis size (from the auto schedule) whose lowest levels are
/// stable under doubling. Useful to pin one size across a flux sweep.
pub fn converged_dim<T: Scalar>(params: &QubitParams<T>, truncation: Truncation) -> Result<usize> {
    match truncation {
        Truncation::Fixed(d) => Ok(d),
        Truncation::Auto { .. } => {
            let s = diagonalize(params, truncation)?;
            Ok(if s.converged() { s.dim / 2 } else { s.dim }.max(MIN_DIM))
        }
    }
}

/// `E_j - E_i` in GHz.
pub fn transition_frequency<T: Scalar>(
    params: &QubitParams<T>,
    i: usize,
    j: usize,
    truncation: Truncation,
) -> Result<T> {
    let s = diagonalize(params, truncation)?;
    if !(i < j && j < s.levels()) {
        return Err(Error::LevelOutOfRange {
            i,
            j,
            levels: s.levels(),
        });
    }
    Ok(s.transition(i, j))
}

/// `|<i| op |j>|` in the eigenbasis.
pub fn matrix_element<T: Scalar>(
    params: &QubitParams<T>,
    op: QubitOperator,
    i: usize,
    j: usize,
    truncation: Truncation,
) -> Result<T> {
    let s = diagonalize(params, truncation)?;
    if i >= s.levels() || j >= s.levels() {
        return Err(Error::LevelOutOfRange {
            i,
            j,
            levels: s.levels(),
        });
    }
    Ok(s.element(op, i, j))
}

/// Normalized harmonic-oscillator eigenfunctions `h_0..h_{count-1}` at `xi`
/// (unit length scale), by the stable three-term recurrence.
fn hermite_functions<T: Scalar>(xi: T, count: usize, out: &mut Vec<T>) {
    out.clear();
    let two = T::lit(2.0);
    let h0 = (-xi * xi / two).exp() / T::pi().sqrt().sqrt();
    out.push(h0);
    if count > 1 {
        out.push(two.sqrt() * xi * h0);
    }
    for m in 2..count {
        let mf = T::of_usize(m);
        let next = (two / mf).sqrt() * xi * out[m - 1] - ((mf - T::one()) / mf).sqrt() * out[m - 2];
        out.push(next);
    }
}

/// Trapezoidal rule on an arbitrary ascending grid.
pub fn trapezoid<T: Scalar>(x: &[T], y: &[T]) -> T {
    x.windows(2).zip(y.windows(2)).fold(T::zero(), |acc, (xs, ys)| {
        acc + (xs[1] - xs[0]) * (ys[0] + ys[1]) * T::lit(0.5)
    })
}

/// Ground-state density `|psi_0(phi)|^2` over the junction phase `phi`,
/// normalized by trapezoidal quadrature on `phi_grid`.
///
/// The grid must cover at least `6 pi` on either side of the well center
/// `2 pi Phi_ext` and be ascending. Fails if the raw quadrature deviates from
/// one by more than `1e-6`, which signals an unconverged basis or a grid too
/// coarse to resolve the wavefunction.
pub fn ground_state_phase_pdf<T: Scalar>(
    params: &QubitParams<T>,
    truncation: Truncation,
    phi_grid: &[T],
) -> Result<Vec<T>> {
    let spectrum = diagonalize(params, truncation)?;
    ground_state_pdf_from(&spectrum, phi_grid)
}

fn ground_state_pdf_from<T: Scalar>(spectrum: &SpectrumResult<T>, phi_grid: &[T]) -> Result<Vec<T>> {
    let center = spectrum.params.well_center();
    let six_pi = T::lit(6.0 * PI);
    let (Some(&lo), Some(&hi)) = (phi_grid.first(), phi_grid.last()) else {
        return Err(Error::InvalidParameter("empty phase grid".into()));
    };
    if lo > center - six_pi || hi < center + six_pi {
        return Err(Error::InvalidParameter(
            "phase grid must span at least 6 pi either side of the well center".into(),
        ));
    }
    if phi_grid.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::InvalidParameter("phase grid must be strictly ascending".into()));
    }
    let coeffs = spectrum.eigenvectors.column(0);
    let length = T::lit(2.0).sqrt() * spectrum.basis.phi_zpf;
    let jacobian = T::one() / length;
    let mut h = Vec::with_capacity(spectrum.dim);
    let pdf: Vec<T> = phi_grid
        .iter()
        .map(|&phi| {
            hermite_functions((phi - center) / length, spectrum.dim, &mut h);
            let amp = h.iter().zip(coeffs.iter()).fold(T::zero(), |a, (f, c)| a + *f * *c);
            amp * amp * jacobian
        })
        .collect();
    let area = trapezoid(phi_grid, &pdf);
    if (area - T::one()).abs() > T::lit(1e-6) {
        return Err(Error::Convergence(format!(
            "ground-state density integrates to {area}, expected 1"
        )));
    }
    Ok(pdf.into_iter().map(|p| p / area).collect())
}

/// Probability that the ground state sits more than `pi` away from the
/// inductive well center, `P(|phi - 2 pi Phi_ext| > pi)`.
pub fn delocalization_probability<T: Scalar>(params: &QubitParams<T>, truncation: Truncation) -> Result<T> {
    let spectrum = diagonalize(params, truncation)?;
    delocalization_from(&spectrum)
}

pub(crate) fn delocalization_from<T: Scalar>(spectrum: &SpectrumResult<T>) -> Result<T> {
    // pi / 200 spacing over center +- 12 pi puts the cut points on the grid.
    const PER_PI: usize = 200;
    const HALF_SPAN_PI: usize = 12;
    let n = 2 * HALF_SPAN_PI * PER_PI + 1;
    let center = spectrum.params.well_center();
    let step = T::pi() / T::of_usize(PER_PI);
    let grid: Vec<T> = (0..n)
        .map(|i| center + step * (T::of_usize(i) - T::of_usize(HALF_SPAN_PI * PER_PI)))
        .collect();
    let pdf = ground_state_pdf_from(spectrum, &grid)?;
    let lo = (HALF_SPAN_PI - 1) * PER_PI;
    let hi = (HALF_SPAN_PI + 1) * PER_PI;
    // Simpson on the even number of cells inside the cut.
    let inner = &pdf[lo..=hi];
    let third = step / T::lit(3.0);
    let inside = inner.iter().enumerate().fold(T::zero(), |acc, (i, &v)| {
        let w = if i == 0 || i == inner.len() - 1 {
            T::one()
        } else if i % 2 == 1 {
            T::lit(4.0)
        } else {
            T::lit(2.0)
        };
        acc + w * v
    }) * third;
    Ok((T::one() - inside).max(T::zero()))
}

/// Central finite-difference slope of `f_ij` with respect to flux
/// (GHz per flux quantum), together with its Richardson extrapolation from
/// steps `h` and `h/2`. The basis size is held fixed across the stencil.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FluxSlope<T> {
    pub central: T,
    pub richardson: T,
}

pub fn transition_flux_slope<T: Scalar>(
    params: &QubitParams<T>,
    i: usize,
    j: usize,
    dim: usize,
    step: T,
) -> Result<FluxSlope<T>> {
    let solver = QubitSolver::new(params.e_l, params.e_c, dim)?;
    if !(i < j && j < dim) {
        return Err(Error::LevelOutOfRange { i, j, levels: dim });
    }
    let f = |phi: T| -> Result<T> {
        let e = solver.energies(params.e_j, phi)?;
        Ok(e[j] - e[i])
    };
    let two = T::lit(2.0);
    let d = |h: T| -> Result<T> { Ok((f(params.phi_ext + h)? - f(params.phi_ext - h)?) / (two * h)) };
    let d1 = d(step)?;
    let d2 = d(step / two)?;
    Ok(FluxSlope {
        central: d1,
        richardson: (T::lit(4.0) * d2 - d1) / T::lit(3.0),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn qubit_a(phi: f64) -> QubitParams<f64> {
        QubitParams::new(0.618, 2.75, 8.55, phi).unwrap()
    }

    #[test]
    fn critical_current_values() {
        assert_eq!(critical_current_to_ej(0.0).unwrap(), 0.0);
        // Independent route: E_J = I_c * Phi_0 / (2 pi), Phi_0 = h / 2e.
        let phi0 = 6.626_070_15e-34 / (2.0 * 1.602_176_634e-19);
        let i_for_1ghz = 2.0 * PI * 6.626_070_15e-34 * 1e9 / phi0 * 1e9;
        assert!((i_for_1ghz - 2.013).abs() < 0.001);
        assert!((critical_current_to_ej(i_for_1ghz).unwrap() - 1.0).abs() < 1e-12);
        let e20 = critical_current_to_ej(20.0).unwrap();
        assert!((e20 - 20e-9 * phi0 / (2.0 * PI) / 6.626_070_15e-34 / 1e9).abs() < 1e-12);
        assert!((e20 - 9.93).abs() < 0.01);
        assert!(critical_current_to_ej(-1.0).is_err());
        assert!((ej_to_critical_current(e20) - 20.0).abs() < 1e-9);
    }

    #[test]
    fn zpf_examples() {
        let a = QubitParams::<f64>::new(0.618, 2.75, 0.0, 0.0).unwrap();
        assert!((phase_zpf(&a) - 1.73).abs() < 0.005);
        let h = QubitParams::<f64>::new(10.70, 0.54, 0.0, 0.0).unwrap();
        assert!((phase_zpf(&h) - 0.56).abs() < 0.005);
        let unit = QubitParams::<f64>::new(2.0, 1.0, 0.0, 0.0).unwrap();
        assert_eq!(phase_zpf(&unit), 1.0);
    }

    #[test]
    fn rejects_bad_params() {
        assert!(QubitParams::new(0.0, 1.0, 1.0, 0.0).is_err());
        assert!(QubitParams::new(1.0, -1.0, 1.0, 0.0).is_err());
        assert!(QubitParams::new(1.0, 1.0, -0.1, 0.0).is_err());
        assert!(QubitParams::new(1.0, 1.0, 1.0, f64::NAN).is_err());
        assert!(build_operators(&qubit_a(0.0), 3).is_err());
    }

    #[test]
    fn two_level_ladder() {
        // phi_zpf = 1 needs 2 E_C = E_L.
        let p = QubitParams::new(2.0, 1.0, 0.0, 0.0).unwrap();
        let basis = OscillatorBasis::new(p.e_l, p.e_c, 4).unwrap();
        assert_eq!(basis.x[(0, 1)], 1.0);
        assert_eq!(basis.x[(1, 0)], 1.0);
        assert_eq!(basis.x[(0, 0)], 0.0);
    }

    #[test]
    fn operator_invariants() {
        for &dim in &[4usize, 20, 41] {
            let ops = build_operators(&qubit_a(0.0), dim).unwrap();
            assert!(ops.phi_op.trace().abs() < 1e-12);
            assert!(ops.n_op_imag.trace().abs() < 1e-12);
            let n = ops.n_op();
            assert!((&n - n.adjoint()).norm() < 1e-12);
            assert!((&ops.phi_op - ops.phi_op.transpose()).norm() < 1e-12);
            assert!((&ops.cos_phi_op - ops.cos_phi_op.transpose()).norm() < 1e-12);
            // [phi, n] = i [x, K]; [x, K] = 1 except the truncation corner.
            let comm = &ops.phi_op * &ops.n_op_imag - &ops.n_op_imag * &ops.phi_op;
            for r in 0..dim - 1 {
                for c in 0..dim - 1 {
                    let want = if r == c { 1.0 } else { 0.0 };
                    assert!((comm[(r, c)] - want).abs() < 1e-10);
                }
            }
        }
        let ops = build_operators(&qubit_a(0.3), 24).unwrap();
        assert!((ops.n_op_imag.trace()).abs() < 1e-12);
        let eig = ops.cos_phi_op.clone().symmetric_eigen();
        assert!(eig.eigenvalues.iter().all(|v| v.abs() <= 1.0 + 1e-9));
    }

    #[test]
    fn harmonic_limit_is_exact() {
        let p = QubitParams::new(0.618, 2.75, 0.0, 0.37).unwrap();
        let s = diagonalize(&p, Truncation::Fixed(20)).unwrap();
        let w = (8.0f64 * 0.618 * 2.75).sqrt();
        assert!((s.transition(0, 1) - w).abs() < 1e-12);
        assert!((s.transition(0, 2) - 2.0 * s.transition(0, 1)).abs() < 1e-12);
        assert!((w - 3.687).abs() < 5e-4);
        // |<0|phi|1>| = phi_zpf under this convention.
        assert!((s.element(QubitOperator::Phase, 0, 1) - p.phase_zpf()).abs() < 1e-12);
    }

    #[test]
    fn transitions_are_additive() {
        let s = diagonalize(&qubit_a(0.21), Truncation::default()).unwrap();
        let t = s.transitions(5);
        assert_eq!(t.len(), 10);
        for (i, k, j) in [(0, 1, 4), (1, 2, 3), (0, 3, 4)] {
            assert_eq!(s.transition(i, j), s.energies[j] - s.energies[i]);
            assert!((t[&(i, j)] - (t[&(i, k)] + t[&(k, j)])).abs() < 1e-12);
        }
        assert!(transition_frequency(&qubit_a(0.0), 2, 1, Truncation::Fixed(10)).is_err());
        assert!(transition_frequency(&qubit_a(0.0), 0, 10, Truncation::Fixed(10)).is_err());
    }

    #[test]
    fn parity_at_zero_flux() {
        let s = diagonalize(&qubit_a(0.0), Truncation::default()).unwrap();
        assert!(s.element(QubitOperator::Phase, 0, 0) < 1e-9);
        assert!(s.element(QubitOperator::Phase, 1, 1) < 1e-9);
    }

    #[test]
    fn auto_truncation_reports_convergence() {
        let s = diagonalize(&qubit_a(0.5), Truncation::default()).unwrap();
        assert!(s.converged());
        assert!(s.dim <= MAX_AUTO_DIM);
        let fixed = diagonalize(&qubit_a(0.5), Truncation::Fixed(30)).unwrap();
        assert!(!fixed.converged());
        assert!(fixed.convergence_shift.is_none());
    }

    #[test]
    fn gaussian_ground_state_in_harmonic_limit() {
        let p = QubitParams::new(0.618, 2.75, 0.0, 0.0).unwrap();
        let zpf = p.phase_zpf();
        let grid: Vec<f64> = (0..4001).map(|i| -20.0 + 40.0 * i as f64 / 4000.0).collect();
        let pdf = ground_state_phase_pdf(&p, Truncation::Fixed(20), &grid).unwrap();
        for (x, v) in grid.iter().zip(&pdf).step_by(97) {
            let g = (-x * x / (2.0 * zpf * zpf)).exp() / (2.0 * PI * zpf * zpf).sqrt();
            assert!((v - g).abs() < 1e-9, "at {x}: {v} vs {g}");
        }
        let p_out = delocalization_probability(&p, Truncation::Fixed(20)).unwrap();
        let expected = erfc(PI / (2.0f64.sqrt() * zpf));
        assert!((p_out - expected).abs() < 1e-6, "{p_out} vs {expected}");
    }

    #[test]
    fn pdf_rejects_narrow_grid() {
        let grid: Vec<f64> = (0..101).map(|i| -10.0 + 0.2 * i as f64).collect();
        assert!(ground_state_phase_pdf(&qubit_a(0.0), Truncation::Fixed(20), &grid).is_err());
    }

    #[test]
    fn localized_limit_has_no_delocalization() {
        let p = QubitParams::new(200.0, 0.5, 0.0, 0.0).unwrap();
        assert!(delocalization_probability(&p, Truncation::Fixed(20)).unwrap() < 1e-12);
    }

    #[test]
    fn f32_solver_tracks_f64() {
        let p64 = qubit_a(0.5);
        let p32 = QubitParams::new(0.618f32, 2.75, 8.55, 0.5).unwrap();
        let a = diagonalize(&p64, Truncation::Fixed(40)).unwrap();
        let b = diagonalize(&p32, Truncation::Fixed(40)).unwrap();
        assert!((a.transition(0, 1) - b.transition(0, 1) as f64).abs() < 1e-3);
    }

    // Complementary error function via a continued-fraction-free series
    // good to ~1e-12 on the range used here.
    fn erfc(x: f64) -> f64 {
        // erf(x) = 2/sqrt(pi) * sum_n (-1)^n x^(2n+1) / (n! (2n+1))
        let mut term = x;
        let mut sum = x;
        for n in 1..200 {
            term *= -x * x / n as f64;
            sum += term / (2 * n + 1) as f64;
        }
        1.0 - 2.0 / PI.sqrt() * sum
    }
}
