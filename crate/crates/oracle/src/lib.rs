//! Reference solvers used to cross-check `rfsquid`.
//!
//! Nothing here shares code with the library under test. The single-mode
//! Hamiltonian
//!
//! ```text
//! H = 4 E_C n^2 + E_L/2 (phi - 2 pi Phi_ext)^2 - E_J cos(phi)
//! ```
//!
//! is discretized on a uniform phase grid (3-point Laplacian, Dirichlet
//! walls) and solved with Sturm-sequence bisection plus inverse iteration.
//! Small dense problems (the coupled qubit-resonator model built from the
//! grid eigenstates) are solved with cyclic Jacobi rotations.
//!
//! Slow on purpose. Energies are in GHz, flux in units of the flux quantum.

use std::f64::consts::PI;

mod jacobi;
mod tridiag;

pub use jacobi::jacobi_eigen;

/// Uniform phase grid, endpoints included.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridSpec {
    pub phi_min: f64,
    pub phi_max: f64,
    pub n_points: usize,
}

impl Default for GridSpec {
    fn default() -> Self {
        Self::symmetric(8.0 * PI, 32001)
    }
}

impl GridSpec {
    pub fn symmetric(half_width: f64, n_points: usize) -> Self {
        Self {
            phi_min: -half_width,
            phi_max: half_width,
            n_points,
        }
    }

    pub fn step(&self) -> f64 {
        (self.phi_max - self.phi_min) / (self.n_points - 1) as f64
    }

    pub fn point(&self, i: usize) -> f64 {
        self.phi_min + self.step() * i as f64
    }

    pub fn points(&self) -> Vec<f64> {
        (0..self.n_points).map(|i| self.point(i)).collect()
    }

    /// Same range, grid spacing halved (point count stays odd).
    pub fn refined(&self) -> Self {
        Self {
            n_points: 2 * self.n_points - 1,
            ..*self
        }
    }

    fn validate(&self) -> Result<(), OracleError> {
        if self.n_points < 5 || self.n_points % 2 == 0 {
            return Err(OracleError::BadGrid("n_points must be odd and >= 5"));
        }
        if !(self.phi_max > self.phi_min) || !self.phi_min.is_finite() || !self.phi_max.is_finite() {
            return Err(OracleError::BadGrid("empty or non-finite phase range"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum OracleError {
    BadGrid(&'static str),
    BadLevelCount,
}

impl std::fmt::Display for OracleError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            OracleError::BadGrid(msg) => write!(f, "invalid grid: {msg}"),
            OracleError::BadLevelCount => write!(f, "requested more levels than grid points"),
        }
    }
}

impl std::error::Error for OracleError {}

/// Circuit energies in GHz plus external flux in flux quanta.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Circuit {
    pub e_l: f64,
    pub e_c: f64,
    pub e_j: f64,
    pub phi_ext: f64,
}

impl Circuit {
    pub fn new(e_l: f64, e_c: f64, e_j: f64, phi_ext: f64) -> Self {
        Self { e_l, e_c, e_j, phi_ext }
    }

    pub fn potential(&self, phi: f64) -> f64 {
        let d = phi - 2.0 * PI * self.phi_ext;
        0.5 * self.e_l * d * d - self.e_j * phi.cos()
    }
}

/// Lowest eigenpairs of the discretized Hamiltonian.
#[derive(Debug, Clone)]
pub struct GridSpectrum {
    pub grid: GridSpec,
    /// Ascending, GHz.
    pub energies: Vec<f64>,
    /// Wavefunctions sampled on the grid, normalized so that sum(psi^2) * dphi = 1.
    pub wavefunctions: Vec<Vec<f64>>,
    /// Largest level shift (MHz) seen when the grid spacing is halved.
    pub refinement_shift_mhz: f64,
    /// Set when `refinement_shift_mhz` exceeds 1 MHz.
    pub too_coarse: bool,
}

impl GridSpectrum {
    pub fn transition(&self, i: usize, j: usize) -> f64 {
        self.energies[j] - self.energies[i]
    }
}

fn tridiagonal(circuit: &Circuit, grid: &GridSpec) -> (Vec<f64>, f64) {
    let h = grid.step();
    let kin = 4.0 * circuit.e_c / (h * h);
    let diag = (0..grid.n_points)
        .map(|i| 2.0 * kin + circuit.potential(grid.point(i)))
        .collect();
    (diag, -kin)
}

fn solve_levels(circuit: &Circuit, grid: &GridSpec, levels: usize) -> Result<(Vec<f64>, Vec<Vec<f64>>), OracleError> {
    grid.validate()?;
    if levels == 0 || levels > grid.n_points {
        return Err(OracleError::BadLevelCount);
    }
    let (diag, off) = tridiagonal(circuit, grid);
    let energies: Vec<f64> = (0..levels).map(|k| tridiag::kth_eigenvalue(&diag, off, k)).collect();
    let mut vectors: Vec<Vec<f64>> = Vec::with_capacity(levels);
    for &e in &energies {
        let mut v = tridiag::inverse_iteration(&diag, off, e, &vectors);
        let norm = (v.iter().map(|x| x * x).sum::<f64>() * grid.step()).sqrt();
        // Sign fixed so the largest-magnitude sample is positive.
        let peak = v
            .iter()
            .copied()
            .fold(0.0f64, |m, x| if x.abs() > m.abs() { x } else { m });
        let s = if peak < 0.0 { -1.0 } else { 1.0 } / norm;
        v.iter_mut().for_each(|x| *x *= s);
        vectors.push(v);
    }
    Ok((energies, vectors))
}

/// Lowest `levels` eigenpairs on `grid`, with a refinement check against a
/// grid of half the spacing.
pub fn grid_diagonalize(circuit: &Circuit, grid: &GridSpec, levels: usize) -> Result<GridSpectrum, OracleError> {
    let (energies, wavefunctions) = solve_levels(circuit, grid, levels)?;
    let fine = grid.refined();
    let (diag, off) = tridiagonal(circuit, &fine);
    let refinement_shift_mhz = energies
        .iter()
        .enumerate()
        .map(|(k, e)| (tridiag::kth_eigenvalue(&diag, off, k) - e).abs() * 1e3)
        .fold(0.0, f64::max);
    Ok(GridSpectrum {
        grid: *grid,
        energies,
        wavefunctions,
        refinement_shift_mhz,
        too_coarse: refinement_shift_mhz > 1.0,
    })
}

/// Lowest `levels` energies only, without the refinement check.
pub fn grid_energies(circuit: &Circuit, grid: &GridSpec, levels: usize) -> Result<Vec<f64>, OracleError> {
    grid.validate()?;
    if levels == 0 || levels > grid.n_points {
        return Err(OracleError::BadLevelCount);
    }
    let (diag, off) = tridiagonal(circuit, grid);
    Ok((0..levels).map(|k| tridiag::kth_eigenvalue(&diag, off, k)).collect())
}

/// Richardson-extrapolated energies from `grid` and its refinement. The
/// 3-point stencil error is O(h^2), so `(4 E(h/2) - E(h)) / 3` is O(h^4).
pub fn grid_energies_extrapolated(circuit: &Circuit, grid: &GridSpec, levels: usize) -> Result<Vec<f64>, OracleError> {
    let coarse = grid_energies(circuit, grid, levels)?;
    let fine = grid_energies(circuit, &grid.refined(), levels)?;
    Ok(coarse.iter().zip(&fine).map(|(c, f)| (4.0 * f - c) / 3.0).collect())
}

/// Trapezoidal integral of samples on a uniform grid.
pub fn trapezoid(values: &[f64], step: f64) -> f64 {
    match values {
        [] | [_] => 0.0,
        [first, inner @ .., last] => step * (0.5 * (first + last) + inner.iter().sum::<f64>()),
    }
}

/// Ground-state density |psi_0(phi)|^2 on the grid, normalized to unit area.
pub fn grid_ground_pdf(circuit: &Circuit, grid: &GridSpec) -> Result<Vec<f64>, OracleError> {
    let (_, vectors) = solve_levels(circuit, grid, 1)?;
    let mut pdf: Vec<f64> = vectors[0].iter().map(|x| x * x).collect();
    let area = trapezoid(&pdf, grid.step());
    pdf.iter_mut().for_each(|p| *p /= area);
    Ok(pdf)
}

/// Probability that the ground state lies further than pi from the center of
/// the inductive well, `|phi - 2 pi Phi_ext| > pi`.
///
/// Sub-interval pieces of cells straddling the cut are handled by linear
/// interpolation of the density.
pub fn grid_delocalization(circuit: &Circuit, grid: &GridSpec) -> Result<f64, OracleError> {
    let pdf = grid_ground_pdf(circuit, grid)?;
    let center = 2.0 * PI * circuit.phi_ext;
    let h = grid.step();
    let mut inside = 0.0;
    for i in 0..grid.n_points - 1 {
        let (a, b) = (grid.point(i) - center, grid.point(i + 1) - center);
        let lo = a.max(-PI);
        let hi = b.min(PI);
        if hi <= lo {
            continue;
        }
        let interp = |x: f64| pdf[i] + (pdf[i + 1] - pdf[i]) * (x - a) / h;
        inside += 0.5 * (interp(lo) + interp(hi)) * (hi - lo);
    }
    Ok(1.0 - inside)
}

/// Matrix elements between grid eigenstates.
///
/// Returns `(x, k)` where `x[i][j] = <i| phi - 2 pi Phi_ext |j>` and
/// `k[i][j] = -<i| d/dphi |j>`, so that the charge operator is `n = i k`.
pub fn grid_matrix_elements(spectrum: &GridSpectrum, phi_ext: f64) -> (Vec<Vec<f64>>, Vec<Vec<f64>>) {
    let grid = &spectrum.grid;
    let h = grid.step();
    let center = 2.0 * PI * phi_ext;
    let m = spectrum.wavefunctions.len();
    let derivs: Vec<Vec<f64>> = spectrum
        .wavefunctions
        .iter()
        .map(|psi| {
            let n = psi.len();
            (0..n)
                .map(|i| {
                    let left = if i == 0 { 0.0 } else { psi[i - 1] };
                    let right = if i + 1 == n { 0.0 } else { psi[i + 1] };
                    (right - left) / (2.0 * h)
                })
                .collect()
        })
        .collect();
    let mut x = vec![vec![0.0; m]; m];
    let mut k = vec![vec![0.0; m]; m];
    for i in 0..m {
        for j in 0..m {
            let psi_i = &spectrum.wavefunctions[i];
            let psi_j = &spectrum.wavefunctions[j];
            x[i][j] = (0..grid.n_points)
                .map(|p| psi_i[p] * (grid.point(p) - center) * psi_j[p])
                .sum::<f64>()
                * h;
            k[i][j] = -psi_i.iter().zip(&derivs[j]).map(|(a, b)| a * b).sum::<f64>() * h;
        }
    }
    (x, k)
}

/// Dense coupled qubit-resonator Hamiltonian in the product basis
/// `|qubit level i> (x) |photon k>`, index `i * n_photons + k`.
///
/// Terms: qubit energies on the diagonal, `omega_r a^dag a`, the capacitive
/// coupling `g_c k (x) (a - a^dag)` and the inductive coupling
/// `-g_l x (x) (a + a^dag)`. All real.
pub fn coupled_matrix(
    qubit_energies: &[f64],
    x: &[Vec<f64>],
    k: &[Vec<f64>],
    omega_r: f64,
    g_c: f64,
    g_l: f64,
    n_photons: usize,
) -> Vec<Vec<f64>> {
    let nq = qubit_energies.len();
    let dim = nq * n_photons;
    let mut h = vec![vec![0.0; dim]; dim];
    let idx = |i: usize, p: usize| i * n_photons + p;
    for i in 0..nq {
        for p in 0..n_photons {
            h[idx(i, p)][idx(i, p)] = qubit_energies[i] + omega_r * p as f64;
        }
    }
    for i in 0..nq {
        for j in 0..nq {
            for p in 0..n_photons.saturating_sub(1) {
                // <p+1| a^dag |p> = sqrt(p+1); <p| a |p+1> = sqrt(p+1)
                let s = ((p + 1) as f64).sqrt();
                // (a - a^dag): <p|.|p+1> = +s, <p+1|.|p> = -s
                // (a + a^dag): both +s
                h[idx(i, p)][idx(j, p + 1)] += g_c * k[i][j] * s - g_l * x[i][j] * s;
                h[idx(i, p + 1)][idx(j, p)] += -g_c * k[i][j] * s - g_l * x[i][j] * s;
            }
        }
    }
    h
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn harmonic_ladder_on_default_grid() {
        let c = Circuit::new(0.618, 2.75, 0.0, 0.0);
        let spec = grid_diagonalize(&c, &GridSpec::default(), 4).unwrap();
        let w = (8.0 * c.e_l * c.e_c).sqrt();
        for k in 0..4 {
            assert!((spec.energies[k] - w * (k as f64 + 0.5)).abs() < 1e-4, "level {k}");
        }
    }

    #[test]
    fn trapezoid_on_linear_is_exact() {
        let v: Vec<f64> = (0..11).map(|i| i as f64).collect();
        assert!((trapezoid(&v, 0.1) - 5.0).abs() < 1e-12);
    }

    #[test]
    fn rejects_even_grid() {
        let c = Circuit::new(1.0, 1.0, 0.0, 0.0);
        assert!(grid_energies(&c, &GridSpec::symmetric(10.0, 2000), 1).is_err());
    }
}
